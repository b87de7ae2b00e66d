//! Replicated experiments: NP distributions, threshold tables, cost curves
//! and the knee point at which per-workload optimization pays off.
//!
//! Replication `i` uses seed `base_seed + i`. Collective methods draw from
//! `ChaCha8Rng::seed_from_u64(seed)`; per-workload methods give workload `w`
//! its own stream of the same seed, so results do not depend on the order in
//! which workloads are visited.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandit::PolicySpec;
use crate::baselines::{run_brute, run_cherrypick, run_random_k, RunOutcome};
use crate::error::{invalid, Error, Result};
use crate::micky::{run_micky, Budget, MickyOutcome, RewardMode};
use crate::perfmatrix::PerfMatrix;

pub const QUANTILES: [f64; 5] = [0.10, 0.25, 0.50, 0.75, 0.90];
pub const THRESHOLDS: [f64; 3] = [1.1, 1.2, 1.4];
pub const DEFAULT_REPS: usize = 100;

/// An optimizer together with its settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MethodSpec {
    Micky {
        #[serde(default)]
        policy: PolicySpec,
        #[serde(default)]
        budget: Budget,
        #[serde(default)]
        reward_mode: RewardMode,
    },
    #[serde(rename = "cherrypick")]
    CherryPick {
        #[serde(default = "default_n_init")]
        n_init: usize,
        #[serde(default = "default_ei_stop")]
        ei_stop: f64,
    },
    RandomK {
        k: usize,
    },
    Brute,
}

fn default_n_init() -> usize {
    3
}

fn default_ei_stop() -> f64 {
    0.10
}

impl MethodSpec {
    pub fn micky() -> Self {
        MethodSpec::Micky {
            policy: PolicySpec::default(),
            budget: Budget::default(),
            reward_mode: RewardMode::default(),
        }
    }

    pub fn cherrypick() -> Self {
        MethodSpec::CherryPick { n_init: default_n_init(), ei_stop: default_ei_stop() }
    }

    pub fn label(&self) -> String {
        match self {
            MethodSpec::Micky { .. } => "micky".into(),
            MethodSpec::CherryPick { .. } => "cherrypick".into(),
            MethodSpec::RandomK { k } => format!("random{k}"),
            MethodSpec::Brute => "brute".into(),
        }
    }

    /// True when the method returns one config for the whole group.
    pub fn is_collective(&self) -> bool {
        matches!(self, MethodSpec::Micky { .. })
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Parses a roster name (`micky`, `cherrypick`, `random4`, `random8`,
/// `brute`, or any `random<k>`) into its default settings.
impl FromStr for MethodSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "micky" => Ok(MethodSpec::micky()),
            "cherrypick" => Ok(MethodSpec::cherrypick()),
            "brute" => Ok(MethodSpec::Brute),
            _ => s
                .strip_prefix("random")
                .and_then(|k| k.parse().ok())
                .filter(|&k: &usize| k > 0)
                .map(|k| MethodSpec::RandomK { k })
                .ok_or_else(|| Error::Parse(format!("unknown method '{s}'"))),
        }
    }
}

/// Output of a single method invocation.
#[derive(Debug, Clone, PartialEq)]
pub enum MethodRun {
    Collective(MickyOutcome),
    PerWorkload(Vec<RunOutcome>),
}

impl MethodRun {
    pub fn cost(&self) -> u64 {
        match self {
            MethodRun::Collective(o) => o.cost(),
            MethodRun::PerWorkload(outs) => outs.iter().map(RunOutcome::cost).sum(),
        }
    }

    /// Config recommended for each workload.
    pub fn chosen(&self, n_workloads: usize) -> Vec<usize> {
        match self {
            MethodRun::Collective(o) => vec![o.exemplar; n_workloads],
            MethodRun::PerWorkload(outs) => outs.iter().map(|o| o.chosen).collect(),
        }
    }

    pub fn to_json(&self, matrix: &PerfMatrix, label: &str) -> Result<String> {
        let doc = match self {
            MethodRun::Collective(o) => {
                let mut doc = o.to_doc(matrix);
                doc.method = Some(label.to_string());
                serde_json::to_value(doc)?
            }
            MethodRun::PerWorkload(outs) => serde_json::json!({
                "method": label,
                "cost": self.cost(),
                "outcomes": outs.iter().map(|o| o.to_doc(matrix)).collect::<Vec<_>>(),
            }),
        };
        Ok(serde_json::to_string_pretty(&doc)? + "\n")
    }
}

fn workload_rng(seed: u64, w: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(w as u64);
    rng
}

/// Runs `method` once over every workload of `matrix`.
pub fn run_method(method: &MethodSpec, matrix: &PerfMatrix, seed: u64) -> Result<MethodRun> {
    let per_workload = |f: &dyn Fn(usize, &mut ChaCha8Rng) -> Result<RunOutcome>| -> Result<MethodRun> {
        (0..matrix.n_workloads())
            .map(|w| f(w, &mut workload_rng(seed, w)))
            .collect::<Result<Vec<_>>>()
            .map(MethodRun::PerWorkload)
    };
    match *method {
        MethodSpec::Micky { policy, budget, reward_mode } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            run_micky(matrix, policy, budget, reward_mode, &mut rng).map(MethodRun::Collective)
        }
        MethodSpec::CherryPick { n_init, ei_stop } => {
            per_workload(&|w, rng| run_cherrypick(matrix, w, n_init, ei_stop, rng))
        }
        MethodSpec::RandomK { k } => per_workload(&|w, rng| run_random_k(matrix, w, k, rng)),
        MethodSpec::Brute => per_workload(&|w, _| run_brute(matrix, w)),
    }
}

/// Per-replication summary kept for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub seed: u64,
    /// NP of the recommended config, one entry per workload.
    pub np: Vec<f64>,
    pub cost: u64,
    /// Group recommendation, for collective methods.
    pub exemplar: Option<usize>,
}

pub fn run_replication(method: &MethodSpec, matrix: &PerfMatrix, seed: u64) -> Result<Replication> {
    let run = run_method(method, matrix, seed)?;
    let np = run
        .chosen(matrix.n_workloads())
        .iter()
        .enumerate()
        .map(|(w, &s)| matrix.normalized_performance_at(w, s))
        .collect();
    let exemplar = match &run {
        MethodRun::Collective(o) => Some(o.exemplar),
        MethodRun::PerWorkload(_) => None,
    };
    Ok(Replication { seed, np, cost: run.cost(), exemplar })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostStats {
    pub min: u64,
    pub median: f64,
    pub max: u64,
}

/// Aggregate statistics for one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub method: String,
    pub replications: usize,
    pub np_quantiles: BTreeMap<String, f64>,
    pub threshold_fractions: BTreeMap<String, f64>,
    pub total_cost_stats: CostStats,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exemplar_histogram: Option<BTreeMap<String, u64>>,
}

/// A report together with the replications it summarizes.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub report: ExperimentReport,
    pub replications: Vec<Replication>,
}

impl Experiment {
    pub fn np_samples(&self) -> impl Iterator<Item = f64> + '_ {
        self.replications.iter().flat_map(|r| r.np.iter().copied())
    }
}

/// Linear-interpolation quantile of ascending `sorted`, with
/// `h = (n - 1) q` and `x[floor h] + (h - floor h) (x[floor h + 1] - x[floor h])`.
pub fn quantile(sorted: &[f64], q: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(invalid("quantile of an empty sample"));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(invalid(format!("quantile level must lie in [0, 1], got {q}")));
    }
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    Ok(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

fn median_u64(values: &[u64]) -> f64 {
    let mut v: Vec<f64> = values.iter().map(|&c| c as f64).collect();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5).unwrap_or(f64::NAN)
}

fn level_key(x: f64) -> String {
    format!("{x:.2}")
}

fn threshold_key(x: f64) -> String {
    format!("{x:.1}")
}

/// Reduces replications, in seed order, into a report.
pub fn aggregate(label: &str, matrix: &PerfMatrix, replications: &[Replication]) -> Result<ExperimentReport> {
    if replications.is_empty() {
        return Err(invalid("at least one replication is required"));
    }
    let mut np: Vec<f64> = replications.iter().flat_map(|r| r.np.iter().copied()).collect();
    np.sort_by(f64::total_cmp);
    let np_quantiles = QUANTILES.iter().map(|&q| Ok((level_key(q), quantile(&np, q)?))).collect::<Result<_>>()?;
    let threshold_fractions = THRESHOLDS
        .iter()
        .map(|&t| (threshold_key(t), np.iter().filter(|&&x| x <= t).count() as f64 / np.len() as f64))
        .collect();
    let costs: Vec<u64> = replications.iter().map(|r| r.cost).collect();
    let total_cost_stats = CostStats {
        min: costs.iter().copied().min().unwrap_or(0),
        median: median_u64(&costs),
        max: costs.iter().copied().max().unwrap_or(0),
    };
    let exemplar_histogram = if replications.iter().all(|r| r.exemplar.is_some()) {
        let mut hist = BTreeMap::new();
        for s in replications.iter().filter_map(|r| r.exemplar) {
            *hist.entry(matrix.configs()[s].id.clone()).or_insert(0) += 1;
        }
        Some(hist)
    } else {
        None
    };
    Ok(ExperimentReport {
        method: label.to_string(),
        replications: replications.len(),
        np_quantiles,
        threshold_fractions,
        total_cost_stats,
        exemplar_histogram,
    })
}

/// Runs `method` `n_reps` times with seeds `base_seed + i`. Replications run
/// on the current rayon pool; the result does not depend on its size.
pub fn replicate(method: &MethodSpec, matrix: &PerfMatrix, n_reps: usize, base_seed: u64) -> Result<Experiment> {
    if n_reps == 0 {
        return Err(invalid("n_reps must be >= 1"));
    }
    let replications = (0..n_reps as u64)
        .into_par_iter()
        .map(|i| run_replication(method, matrix, base_seed.wrapping_add(i)))
        .collect::<Result<Vec<_>>>()?;
    let report = aggregate(&method.label(), matrix, &replications)?;
    Ok(Experiment { report, replications })
}

/// One cell of a cost curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostPoint {
    pub n_workloads: usize,
    pub method: String,
    pub median_cost: f64,
}

/// Median total cost per (workload count, method) over `seeds`. For each
/// seed the workload subset is drawn from that seed, then the method runs on
/// the subset with the same seed.
pub fn cost_curve(
    matrix: &PerfMatrix,
    workload_counts: &[usize],
    methods: &[MethodSpec],
    seeds: &[u64],
) -> Result<Vec<CostPoint>> {
    if seeds.is_empty() {
        return Err(invalid("cost_curve needs at least one seed"));
    }
    let n_w = matrix.n_workloads();
    if let Some(&bad) = workload_counts.iter().find(|&&c| c == 0 || c > n_w) {
        return Err(invalid(format!("workload count {bad} must lie in 1..={n_w}")));
    }
    let mut points = Vec::new();
    for &count in workload_counts {
        let subsets = seeds
            .iter()
            .map(|&seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut rows = rand::seq::index::sample(&mut rng, n_w, count).into_vec();
                rows.sort_unstable();
                matrix.select_workloads(&rows)
            })
            .collect::<Result<Vec<_>>>()?;
        for method in methods {
            let costs = seeds
                .par_iter()
                .zip(subsets.par_iter())
                .map(|(&seed, sub)| run_method(method, sub, seed).map(|r| r.cost()))
                .collect::<Result<Vec<_>>>()?;
            points.push(CostPoint { n_workloads: count, method: method.label(), median_cost: median_u64(&costs) });
        }
    }
    Ok(points)
}

/// Inputs to the break-even inequality `K * dp * C_P >= m * C_M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KneeInputs {
    /// Fractional performance lost per run by using the exemplar.
    pub delta_p: f64,
    /// Measurements saved per workload by optimizing collectively.
    pub per_workload_measurement_savings: f64,
    /// Cost of one production run relative to one measurement.
    pub cp_over_cm: f64,
}

impl KneeInputs {
    pub fn new(delta_p: f64, savings: f64, cp_over_cm: f64) -> Self {
        KneeInputs { delta_p, per_workload_measurement_savings: savings, cp_over_cm }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("delta_p", self.delta_p), ("savings", self.per_workload_measurement_savings)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be a finite non-negative number, got {v}")));
            }
        }
        if !(self.cp_over_cm > 0.0 && self.cp_over_cm.is_finite()) {
            return Err(invalid(format!("ratio must be a finite positive number, got {}", self.cp_over_cm)));
        }
        Ok(())
    }
}

/// Recurrence count after which a per-workload optimizer pays off.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Knee {
    /// The collective choice loses nothing per run.
    Never,
    After(u64),
}

impl fmt::Display for Knee {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Knee::Never => f.write_str("never"),
            Knee::After(k) => write!(f, "{k}"),
        }
    }
}

/// `K = ceil(m / (ratio * delta_p))`; quotients within 1e-9 of an integer are
/// not rounded up.
pub fn knee_point(k_in: &KneeInputs) -> Result<Knee> {
    k_in.validate()?;
    if k_in.delta_p == 0.0 {
        return Ok(Knee::Never);
    }
    let k = k_in.per_workload_measurement_savings / (k_in.cp_over_cm * k_in.delta_p);
    Ok(Knee::After((k - 1e-9).ceil().max(0.0) as u64))
}

/// JSON document comparing methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonDoc {
    pub methods: BTreeMap<String, ExperimentReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_curve: Option<Vec<CostPoint>>,
}

/// Emitted artifacts: JSON comparison, long-format NP table and, when a
/// curve was supplied, the cost-curve table.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub doc: ComparisonDoc,
    pub json: String,
    pub np_csv: String,
    pub cost_curve_csv: Option<String>,
}

pub const NP_CSV_HEADER: [&str; 5] = ["method", "replication", "workload", "np", "cost"];
pub const COST_CURVE_CSV_HEADER: [&str; 3] = ["n_workloads", "method", "median_cost"];

pub fn summarize(matrix: &PerfMatrix, experiments: &[Experiment], curve: Option<&[CostPoint]>) -> Result<Summary> {
    if experiments.is_empty() {
        return Err(invalid("summarize needs at least one report"));
    }
    let mut methods = BTreeMap::new();
    for e in experiments {
        if methods.insert(e.report.method.clone(), e.report.clone()).is_some() {
            return Err(invalid(format!("duplicate method '{}'", e.report.method)));
        }
    }
    let doc = ComparisonDoc { methods, cost_curve: curve.map(<[CostPoint]>::to_vec) };
    let json = serde_json::to_string_pretty(&doc)? + "\n";

    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(NP_CSV_HEADER)?;
    for e in experiments {
        for (i, r) in e.replications.iter().enumerate() {
            for (w, np) in r.np.iter().enumerate() {
                wtr.write_record([
                    e.report.method.clone(),
                    i.to_string(),
                    matrix.workloads()[w].clone(),
                    np.to_string(),
                    r.cost.to_string(),
                ])?;
            }
        }
    }
    let np_csv = into_string(wtr)?;

    let cost_curve_csv = curve
        .map(|points| {
            let mut wtr = csv::Writer::from_writer(Vec::new());
            wtr.write_record(COST_CURVE_CSV_HEADER)?;
            for p in points {
                wtr.write_record([p.n_workloads.to_string(), p.method.clone(), p.median_cost.to_string()])?;
            }
            into_string(wtr)
        })
        .transpose()?;

    Ok(Summary { doc, json, np_csv, cost_curve_csv })
}

fn into_string(wtr: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = wtr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}
