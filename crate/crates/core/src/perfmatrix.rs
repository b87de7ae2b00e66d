//! Workload × configuration performance data.
//!
//! A [`PerfMatrix`] is the complete table of measured elapsed times for every
//! workload on every VM type. It doubles as the simulation oracle: every pull
//! an optimizer makes is answered by a lookup here. The matrix is immutable
//! once built and can be shared read-only across concurrent runs.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const CONFIGS_FILE: &str = "configs.csv";
pub const MEASUREMENTS_FILE: &str = "measurements.csv";

const CONFIGS_HEADER: &str = "config_id,family,size_tier,vcpus,mem_gb,price_per_hour_usd,ebs_mbps";
const MEASUREMENTS_HEADER: &str = "workload_id,config_id,elapsed_seconds";

/// A VM type: one arm of the bandit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudConfig {
    pub id: String,
    /// `compute-optimized`, `memory-optimized` or `general-purpose`.
    pub family: String,
    pub size_tier: String,
    pub vcpus: u32,
    pub mem_gb: f64,
    /// USD per hour.
    pub price_per_hour: f64,
    /// Mbit/s, 0 when unknown.
    pub ebs_mbps: f64,
}

impl CloudConfig {
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(invalid("config id must not be empty"));
        }
        if self.vcpus < 1 {
            return Err(invalid(format!("config `{}`: vcpus must be >= 1", self.id)));
        }
        if !(self.mem_gb > 0.0 && self.mem_gb.is_finite()) {
            return Err(invalid(format!("config `{}`: mem_gb must be > 0", self.id)));
        }
        if !(self.price_per_hour > 0.0 && self.price_per_hour.is_finite()) {
            return Err(invalid(format!("config `{}`: price_per_hour must be > 0", self.id)));
        }
        if !(self.ebs_mbps >= 0.0 && self.ebs_mbps.is_finite()) {
            return Err(invalid(format!("config `{}`: ebs_mbps must be >= 0", self.id)));
        }
        Ok(())
    }
}

/// Which quantity an optimizer minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveKind {
    ExecutionTime,
    OperationalCost,
}

#[derive(Debug, Deserialize)]
struct ConfigRow {
    config_id: String,
    family: String,
    size_tier: String,
    vcpus: u32,
    mem_gb: f64,
    price_per_hour_usd: f64,
    ebs_mbps: f64,
}

#[derive(Debug, Deserialize)]
struct MeasurementRow {
    workload_id: String,
    config_id: String,
    elapsed_seconds: f64,
}

/// Complete |W|×|S| table of elapsed seconds plus config metadata.
#[derive(Debug, Clone)]
pub struct PerfMatrix {
    workloads: Vec<String>,
    configs: Vec<CloudConfig>,
    /// Row-major, one row per workload.
    elapsed: Vec<f64>,
    objective_kind: ObjectiveKind,
    objective: Vec<f64>,
    row_min: Vec<f64>,
    workload_index: HashMap<String, usize>,
    config_index: HashMap<String, usize>,
}

impl PerfMatrix {
    /// Builds a matrix from row-major elapsed seconds.
    pub fn new(
        workloads: Vec<String>,
        configs: Vec<CloudConfig>,
        elapsed: Vec<f64>,
        objective_kind: ObjectiveKind,
    ) -> Result<Self> {
        if workloads.is_empty() {
            return Err(invalid("matrix needs at least one workload"));
        }
        if configs.len() < 2 {
            return Err(invalid("matrix needs at least two configs"));
        }
        if elapsed.len() != workloads.len() * configs.len() {
            return Err(Error::DimensionMismatch { left: elapsed.len(), right: workloads.len() * configs.len() });
        }
        let mut config_index = HashMap::with_capacity(configs.len());
        for (i, c) in configs.iter().enumerate() {
            c.validate()?;
            if config_index.insert(c.id.clone(), i).is_some() {
                return Err(invalid(format!("duplicate config id `{}`", c.id)));
            }
        }
        let mut workload_index = HashMap::with_capacity(workloads.len());
        for (i, w) in workloads.iter().enumerate() {
            if w.is_empty() {
                return Err(invalid("workload id must not be empty"));
            }
            if workload_index.insert(w.clone(), i).is_some() {
                return Err(invalid(format!("duplicate workload id `{w}`")));
            }
        }
        let n_s = configs.len();
        for (k, &v) in elapsed.iter().enumerate() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!(
                    "elapsed_seconds must be a positive finite number, got {v} for workload `{}` on config `{}`",
                    workloads[k / n_s],
                    configs[k % n_s].id
                )));
            }
        }
        let mut m = PerfMatrix {
            workloads,
            configs,
            elapsed,
            objective_kind,
            objective: Vec::new(),
            row_min: Vec::new(),
            workload_index,
            config_index,
        };
        m.recompute_objective();
        Ok(m)
    }

    fn recompute_objective(&mut self) {
        let n_s = self.configs.len();
        self.objective = self
            .elapsed
            .iter()
            .enumerate()
            .map(|(k, &e)| match self.objective_kind {
                ObjectiveKind::ExecutionTime => e,
                ObjectiveKind::OperationalCost => e * self.configs[k % n_s].price_per_hour / 3600.0,
            })
            .collect();
        self.row_min =
            self.objective.chunks(n_s).map(|row| row.iter().copied().fold(f64::INFINITY, f64::min)).collect();
    }

    /// Same measurements viewed under a different objective.
    pub fn with_objective(&self, kind: ObjectiveKind) -> PerfMatrix {
        let mut m = self.clone();
        m.objective_kind = kind;
        m.recompute_objective();
        m
    }

    /// Submatrix restricted to the given workload rows, in the given order.
    pub fn select_workloads(&self, rows: &[usize]) -> Result<PerfMatrix> {
        let n_s = self.n_configs();
        let mut workloads = Vec::with_capacity(rows.len());
        let mut elapsed = Vec::with_capacity(rows.len() * n_s);
        for &w in rows {
            if w >= self.n_workloads() {
                return Err(Error::Lookup { kind: "workload index", id: w.to_string() });
            }
            workloads.push(self.workloads[w].clone());
            elapsed.extend_from_slice(&self.elapsed[w * n_s..(w + 1) * n_s]);
        }
        PerfMatrix::new(workloads, self.configs.clone(), elapsed, self.objective_kind)
    }

    pub fn n_workloads(&self) -> usize {
        self.workloads.len()
    }

    pub fn n_configs(&self) -> usize {
        self.configs.len()
    }

    pub fn workloads(&self) -> &[String] {
        &self.workloads
    }

    pub fn configs(&self) -> &[CloudConfig] {
        &self.configs
    }

    pub fn objective_kind(&self) -> ObjectiveKind {
        self.objective_kind
    }

    pub fn workload_index(&self, id: &str) -> Result<usize> {
        self.workload_index.get(id).copied().ok_or_else(|| Error::Lookup { kind: "workload", id: id.to_string() })
    }

    pub fn config_index(&self, id: &str) -> Result<usize> {
        self.config_index.get(id).copied().ok_or_else(|| Error::Lookup { kind: "config", id: id.to_string() })
    }

    pub fn elapsed_at(&self, w: usize, s: usize) -> f64 {
        self.elapsed[w * self.n_configs() + s]
    }

    /// Objective value of cell (w, s) by index. Panics on out-of-range indices.
    pub fn objective_at(&self, w: usize, s: usize) -> f64 {
        self.objective[w * self.n_configs() + s]
    }

    /// All objective values of workload `w`, in config order.
    pub fn objective_row(&self, w: usize) -> &[f64] {
        let n_s = self.n_configs();
        &self.objective[w * n_s..(w + 1) * n_s]
    }

    /// The true per-workload optimum (minimum objective).
    pub fn optimum_at(&self, w: usize) -> f64 {
        self.row_min[w]
    }

    pub fn normalized_performance_at(&self, w: usize, s: usize) -> f64 {
        self.objective_at(w, s) / self.row_min[w]
    }

    /// Argmin of the objective row, lowest index on ties.
    pub fn best_config_at(&self, w: usize) -> usize {
        argmin(self.objective_row(w))
    }

    pub fn fraction_within_at(&self, s: usize, threshold: f64) -> Result<f64> {
        if !(threshold >= 1.0) {
            return Err(invalid(format!("threshold must be >= 1, got {threshold}")));
        }
        let hits = (0..self.n_workloads()).filter(|&w| self.normalized_performance_at(w, s) <= threshold).count();
        Ok(hits as f64 / self.n_workloads() as f64)
    }

    /// Elapsed seconds or operational cost (USD) of workload `w` on config `s`.
    pub fn objective(&self, w: &str, s: &str) -> Result<f64> {
        Ok(self.objective_at(self.workload_index(w)?, self.config_index(s)?))
    }

    /// Objective divided by the per-workload optimum; 1.0 at the optimum.
    pub fn normalized_performance(&self, w: &str, s: &str) -> Result<f64> {
        Ok(self.normalized_performance_at(self.workload_index(w)?, self.config_index(s)?))
    }

    /// Brute-force oracle: the optimal config id for `w`.
    pub fn best_config(&self, w: &str) -> Result<&str> {
        let s = self.best_config_at(self.workload_index(w)?);
        Ok(&self.configs[s].id)
    }

    /// Fraction of workloads on which `s` is within `threshold` of the optimum.
    pub fn fraction_within(&self, s: &str, threshold: f64) -> Result<f64> {
        self.fraction_within_at(self.config_index(s)?, threshold)
    }

    pub fn load_dir(dir: impl AsRef<Path>, kind: ObjectiveKind) -> Result<PerfMatrix> {
        let dir = dir.as_ref();
        let configs = fs::read_to_string(dir.join(CONFIGS_FILE))?;
        let measurements = fs::read_to_string(dir.join(MEASUREMENTS_FILE))?;
        load_matrix(&configs, &measurements, kind)
    }

    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        fs::write(dir.join(CONFIGS_FILE), self.configs_csv())?;
        fs::write(dir.join(MEASUREMENTS_FILE), self.measurements_csv())?;
        Ok(())
    }

    /// The configs table in ingestion format.
    pub fn configs_csv(&self) -> String {
        let mut out = String::from(CONFIGS_HEADER);
        out.push('\n');
        for c in &self.configs {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                c.id, c.family, c.size_tier, c.vcpus, c.mem_gb, c.price_per_hour, c.ebs_mbps
            );
        }
        out
    }

    /// The measurements table in ingestion format, workload-major.
    pub fn measurements_csv(&self) -> String {
        let mut out = String::from(MEASUREMENTS_HEADER);
        out.push('\n');
        for (w, wid) in self.workloads.iter().enumerate() {
            for (s, c) in self.configs.iter().enumerate() {
                let _ = writeln!(out, "{},{},{}", wid, c.id, self.elapsed_at(w, s));
            }
        }
        out
    }
}

pub(crate) fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes())
}

/// Parses the two ingestion tables into a complete matrix.
///
/// Config order follows the configs table; workload order follows first
/// appearance in the measurements table.
pub fn load_matrix(configs_table: &str, measurements_table: &str, objective_kind: ObjectiveKind) -> Result<PerfMatrix> {
    let mut configs = Vec::new();
    for row in reader(configs_table).deserialize::<ConfigRow>() {
        let r = row?;
        configs.push(CloudConfig {
            id: r.config_id,
            family: r.family,
            size_tier: r.size_tier,
            vcpus: r.vcpus,
            mem_gb: r.mem_gb,
            price_per_hour: r.price_per_hour_usd,
            ebs_mbps: r.ebs_mbps,
        });
    }
    let mut config_index = HashMap::new();
    for (i, c) in configs.iter().enumerate() {
        if config_index.insert(c.id.as_str(), i).is_some() {
            return Err(invalid(format!("duplicate config id `{}`", c.id)));
        }
    }

    let mut workloads: Vec<String> = Vec::new();
    let mut workload_index: HashMap<String, usize> = HashMap::new();
    let mut cells: HashMap<(usize, usize), f64> = HashMap::new();
    for row in reader(measurements_table).deserialize::<MeasurementRow>() {
        let r = row?;
        let s = *config_index
            .get(r.config_id.as_str())
            .ok_or_else(|| Error::Lookup { kind: "config", id: r.config_id.clone() })?;
        let w = match workload_index.get(&r.workload_id) {
            Some(&w) => w,
            None => {
                workloads.push(r.workload_id.clone());
                workload_index.insert(r.workload_id.clone(), workloads.len() - 1);
                workloads.len() - 1
            }
        };
        if !(r.elapsed_seconds > 0.0 && r.elapsed_seconds.is_finite()) {
            return Err(invalid(format!(
                "elapsed_seconds must be a positive finite number, got {} for workload `{}` on config `{}`",
                r.elapsed_seconds, r.workload_id, r.config_id
            )));
        }
        if cells.insert((w, s), r.elapsed_seconds).is_some() {
            return Err(Error::DuplicateMeasurement { workload: r.workload_id, config: r.config_id });
        }
    }

    let n_s = configs.len();
    let mut elapsed = Vec::with_capacity(workloads.len() * n_s);
    for (w, wid) in workloads.iter().enumerate() {
        for (s, c) in configs.iter().enumerate() {
            match cells.get(&(w, s)) {
                Some(&v) => elapsed.push(v),
                None => return Err(Error::IncompleteMatrix { workload: wid.clone(), config: c.id.clone() }),
            }
        }
    }
    PerfMatrix::new(workloads, configs, elapsed, objective_kind)
}

/// One measurement: workload `workload` run on config `config`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pull {
    pub workload: usize,
    pub config: usize,
    pub value: f64,
    /// Bandit reward, present only for collective runs.
    pub reward: Option<f64>,
}

/// Ordered record of every measurement an optimizer made. Its length is the
/// measurement cost.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PullLog {
    entries: Vec<Pull>,
}

impl PullLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, pull: Pull) {
        self.entries.push(pull);
    }

    pub fn entries(&self) -> &[Pull] {
        &self.entries
    }

    pub fn cost(&self) -> u64 {
        self.entries.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Pull with the lowest observed value, lowest config index on ties.
    pub fn best_pull(&self) -> Option<&Pull> {
        self.entries.iter().reduce(|best, p| {
            if p.value < best.value || (p.value == best.value && p.config < best.config) {
                p
            } else {
                best
            }
        })
    }

    pub(crate) fn to_doc(&self, matrix: &PerfMatrix) -> Vec<PullDoc> {
        self.entries
            .iter()
            .map(|p| PullDoc {
                workload: matrix.workloads()[p.workload].clone(),
                config: matrix.configs()[p.config].id.clone(),
                value: p.value,
                reward: p.reward,
            })
            .collect()
    }
}

/// Serialized form of a [`Pull`], keyed by ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PullDoc {
    pub workload: String,
    pub config: String,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(id: &str, price: f64) -> CloudConfig {
        CloudConfig {
            id: id.into(),
            family: "general-purpose".into(),
            size_tier: "large".into(),
            vcpus: 2,
            mem_gb: 8.0,
            price_per_hour: price,
            ebs_mbps: 450.0,
        }
    }

    fn one_row(row: &[f64], prices: &[f64], kind: ObjectiveKind) -> PerfMatrix {
        let configs = prices.iter().enumerate().map(|(i, &p)| cfg(&format!("s{i}"), p)).collect();
        PerfMatrix::new(vec!["w0".into()], configs, row.to_vec(), kind).unwrap()
    }

    const CONFIGS: &str = "config_id,family,size_tier,vcpus,mem_gb,price_per_hour_usd,ebs_mbps\n\
        m4.large,general-purpose,large,2,8,0.1,450\n\
        c4.large,compute-optimized,large,2,3.75,0.1,500\n";

    #[test]
    fn loads_minimal_complete_table() {
        let meas = "workload_id,config_id,elapsed_seconds\n\
            a,m4.large,10\nb,c4.large,5\na,c4.large,12\nb,m4.large,7\n";
        let m = load_matrix(CONFIGS, meas, ObjectiveKind::ExecutionTime).unwrap();
        assert_eq!(m.n_workloads(), 2);
        assert_eq!(m.n_configs(), 2);
        assert_eq!(m.workloads(), &["a".to_string(), "b".to_string()]);
        assert_eq!(m.objective("b", "m4.large").unwrap(), 7.0);
    }

    #[test]
    fn missing_cell_names_the_pair() {
        let meas = "workload_id,config_id,elapsed_seconds\n\
            a,m4.large,10\nb,c4.large,5\na,c4.large,12\n";
        match load_matrix(CONFIGS, meas, ObjectiveKind::ExecutionTime) {
            Err(Error::IncompleteMatrix { workload, config }) => {
                assert_eq!((workload.as_str(), config.as_str()), ("b", "m4.large"));
            }
            other => panic!("expected incomplete matrix, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_and_nonpositive_rejected() {
        let dup = "workload_id,config_id,elapsed_seconds\n\
            a,m4.large,10\na,m4.large,11\na,c4.large,12\n";
        assert!(matches!(
            load_matrix(CONFIGS, dup, ObjectiveKind::ExecutionTime),
            Err(Error::DuplicateMeasurement { .. })
        ));
        let neg = "workload_id,config_id,elapsed_seconds\na,m4.large,0\na,c4.large,12\n";
        assert!(matches!(load_matrix(CONFIGS, neg, ObjectiveKind::ExecutionTime), Err(Error::Validation(_))));
        let bad_cfg = "config_id,family,size_tier,vcpus,mem_gb,price_per_hour_usd,ebs_mbps\n\
            x,general-purpose,large,2,8,-1,0\ny,general-purpose,large,2,8,1,0\n";
        let meas = "workload_id,config_id,elapsed_seconds\na,x,1\na,y,1\n";
        assert!(matches!(load_matrix(bad_cfg, meas, ObjectiveKind::ExecutionTime), Err(Error::Validation(_))));
    }

    #[test]
    fn unknown_config_in_measurements_is_lookup_error() {
        let meas = "workload_id,config_id,elapsed_seconds\na,t2.micro,10\n";
        assert!(matches!(load_matrix(CONFIGS, meas, ObjectiveKind::ExecutionTime), Err(Error::Lookup { .. })));
    }

    #[test]
    fn objective_unit_conversion() {
        let m = one_row(&[3600.0, 120.0, 7200.0], &[1.0, 1.0, 0.10], ObjectiveKind::OperationalCost);
        assert_eq!(m.objective("w0", "s0").unwrap(), 1.0);
        assert!((m.objective("w0", "s2").unwrap() - 0.20).abs() < 1e-15);
        let t = m.with_objective(ObjectiveKind::ExecutionTime);
        assert_eq!(t.objective("w0", "s1").unwrap(), 120.0);
        assert!(matches!(t.objective("nope", "s1"), Err(Error::Lookup { .. })));
    }

    #[test]
    fn normalized_performance_row() {
        let m = one_row(&[100.0, 120.0, 150.0], &[1.0; 3], ObjectiveKind::ExecutionTime);
        let np: Vec<f64> = (0..3).map(|s| m.normalized_performance_at(0, s)).collect();
        assert_eq!(np, vec![1.0, 1.2, 1.5]);
    }

    #[test]
    fn best_config_ties_go_to_lowest_index() {
        let m = one_row(&[5.0, 3.0, 4.0], &[1.0; 3], ObjectiveKind::ExecutionTime);
        assert_eq!(m.best_config("w0").unwrap(), "s1");
        let m = one_row(&[3.0, 3.0, 4.0], &[1.0; 3], ObjectiveKind::ExecutionTime);
        assert_eq!(m.best_config("w0").unwrap(), "s0");
        assert_eq!(m.normalized_performance("w0", "s0").unwrap(), 1.0);
    }

    #[test]
    fn fraction_within_counts() {
        // Column s0 has NP [1.0, 1.25, 1.4] over three workloads.
        let configs = vec![cfg("s0", 1.0), cfg("s1", 1.0)];
        let elapsed = vec![10.0, 20.0, 12.5, 10.0, 14.0, 10.0];
        let m =
            PerfMatrix::new(vec!["a".into(), "b".into(), "c".into()], configs, elapsed, ObjectiveKind::ExecutionTime)
                .unwrap();
        assert!((m.fraction_within("s0", 1.3).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.fraction_within("s0", 1.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(m.fraction_within("s0", 0.9).is_err());
    }

    #[test]
    fn csv_emission_reloads() {
        let m = one_row(&[100.0, 0.1 + 0.2, 150.5], &[0.1, 0.2, 0.3], ObjectiveKind::OperationalCost);
        let back = load_matrix(&m.configs_csv(), &m.measurements_csv(), ObjectiveKind::OperationalCost).unwrap();
        assert_eq!(back.configs(), m.configs());
        assert_eq!(back.objective_row(0), m.objective_row(0));
    }

    #[test]
    fn pull_log_best_prefers_lowest_config_on_ties() {
        let mut log = PullLog::new();
        for (c, v) in [(0, 3.0), (2, 2.0), (1, 2.0)] {
            log.push(Pull { workload: 0, config: c, value: v, reward: None });
        }
        assert_eq!(log.best_pull().unwrap().config, 1);
        assert_eq!(log.cost(), 3);
    }
}
