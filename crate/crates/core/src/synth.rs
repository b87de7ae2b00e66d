//! Synthetic performance matrices with a planted exemplar configuration.
//!
//! For a fraction `p` of workloads the planted config lands within a factor
//! `1 + near_band` of the optimum; for the rest it pays an exponential
//! penalty. All other cells sit at `optimum * (1 + Exp(1))`. The planted
//! structure lives in the objective named by `SynthSpec::objective`; prices
//! vary by family and size so the other objective ranks configs differently.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::perfmatrix::{CloudConfig, ObjectiveKind, PerfMatrix};

pub const SIDECAR_FILE: &str = "synth.json";

const FAMILIES: [(&str, char, f64, f64); 3] = [
    // label, letter, GiB per vCPU, USD per vCPU-hour
    ("compute-optimized", 'c', 1.875, 0.050),
    ("memory-optimized", 'r', 7.625, 0.0665),
    ("general-purpose", 'm', 4.0, 0.050),
];
const SIZES: [&str; 5] = ["large", "xlarge", "2xlarge", "4xlarge", "8xlarge"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n_workloads: usize,
    pub n_configs: usize,
    /// Fraction of workloads on which the planted config is near-optimal.
    pub exemplar_fraction: f64,
    /// Width of the near-optimal band, as a fraction of the optimum.
    pub near_band: f64,
    pub penalty_scale: f64,
    /// Range of per-workload optimum values, in seconds.
    pub base_time_range: (f64, f64),
    pub seed: u64,
    /// Objective that carries the planted structure.
    pub objective: ObjectiveKind,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_workloads: 40,
            n_configs: 10,
            exemplar_fraction: 0.8,
            near_band: 0.1,
            penalty_scale: 1.0,
            base_time_range: (60.0, 3600.0),
            seed: 42,
            objective: ObjectiveKind::OperationalCost,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_workloads < 1 {
            return Err(invalid("n_workloads must be >= 1"));
        }
        if self.n_configs < 2 {
            return Err(invalid("n_configs must be >= 2"));
        }
        if !(self.exemplar_fraction > 0.0 && self.exemplar_fraction <= 1.0) {
            return Err(invalid("exemplar_fraction must lie in (0, 1]"));
        }
        if !(self.near_band >= 0.0 && self.near_band.is_finite()) {
            return Err(invalid("near_band must be >= 0"));
        }
        if !(self.penalty_scale > 0.0 && self.penalty_scale.is_finite()) {
            return Err(invalid("penalty_scale must be > 0"));
        }
        let (lo, hi) = self.base_time_range;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(invalid("base_time_range must satisfy 0 < min < max"));
        }
        Ok(())
    }
}

/// Sidecar written next to the generated tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSidecar {
    pub planted_exemplar: String,
    pub spec: SynthSpec,
}

fn exp1<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    -(1.0 - rng.random::<f64>()).ln()
}

fn catalog<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<CloudConfig> {
    (0..n)
        .map(|i| {
            let (family, letter, mem_per_cpu, cpu_price) = FAMILIES[i % 3];
            let size = (i / 3) % SIZES.len();
            let generation = 4 + i / (3 * SIZES.len());
            let vcpus = 2u32 << size;
            let jitter = rng.random_range(0.9..1.1);
            let price = ((cpu_price * f64::from(vcpus) * jitter) * 1e4).round().max(1.0) / 1e4;
            CloudConfig {
                id: format!("{letter}{generation}.{}", SIZES[size]),
                family: family.to_string(),
                size_tier: SIZES[size].to_string(),
                vcpus,
                mem_gb: mem_per_cpu * f64::from(vcpus),
                price_per_hour: price,
                ebs_mbps: 450.0 * f64::from(1u32 << size),
            }
        })
        .collect()
}

/// Generates a complete matrix and returns it with the planted config id.
pub fn gen_matrix(spec: &SynthSpec) -> Result<(PerfMatrix, String)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_s = spec.n_configs;
    let configs = catalog(n_s, &mut rng);
    let planted = rng.random_range(0..n_s);
    let ref_price = configs.iter().map(|c| c.price_per_hour).sum::<f64>() / n_s as f64;
    let (lo, hi) = spec.base_time_range;

    let mut elapsed = Vec::with_capacity(spec.n_workloads * n_s);
    for _ in 0..spec.n_workloads {
        let optimum = rng.random_range(lo..hi);
        let near = rng.random::<f64>() < spec.exemplar_fraction;
        // With a zero-width band the planted config is the optimum itself.
        let holder = if near && spec.near_band == 0.0 {
            planted
        } else {
            let k = rng.random_range(0..n_s - 1);
            if k >= planted {
                k + 1
            } else {
                k
            }
        };
        for (s, c) in configs.iter().enumerate() {
            let target = if s == holder {
                optimum
            } else if s == planted {
                if near {
                    optimum * (1.0 + spec.near_band * rng.random::<f64>())
                } else {
                    optimum * (1.0 + spec.penalty_scale * exp1(&mut rng))
                }
            } else {
                optimum * (1.0 + exp1(&mut rng))
            };
            elapsed.push(match spec.objective {
                ObjectiveKind::ExecutionTime => target,
                ObjectiveKind::OperationalCost => target * ref_price / c.price_per_hour,
            });
        }
    }

    let workloads = (0..spec.n_workloads).map(|i| format!("w{i:03}")).collect();
    let id = configs[planted].id.clone();
    let matrix = PerfMatrix::new(workloads, configs, elapsed, spec.objective)?;
    Ok((matrix, id))
}

/// Generates a matrix and writes both tables plus the sidecar into `dir`.
pub fn write_synth(spec: &SynthSpec, dir: impl AsRef<Path>) -> Result<SynthSidecar> {
    let (matrix, planted) = gen_matrix(spec)?;
    let dir = dir.as_ref();
    matrix.write_dir(dir)?;
    let sidecar = SynthSidecar { planted_exemplar: planted, spec: spec.clone() };
    fs::write(dir.join(SIDECAR_FILE), serde_json::to_string_pretty(&sidecar)? + "\n")?;
    Ok(sidecar)
}
