//! Seeded experiment harness.
//!
//! An [`ExperimentConfig`] names a channel scenario, an SNR grid, a list of
//! algorithms and a number of random realizations. [`run_experiment`]
//! evaluates every (algorithm, SNR, realization) triple, possibly in
//! parallel, and returns a [`ResultTable`] whose numeric columns depend only
//! on the configuration: realization `r` always draws its channel from seed
//! `base_seed + r`, the same channel is reused across the SNR grid, and
//! averages use an order-independent summation.

use std::time::Instant;

use icran::channels::{
    gen_channel, rate_from_beamformers, rate_miso, snr_db_to_budget, weighted_sum_rate_parallel, Channel, ChannelDims,
    ParallelChannel, PowerMatrix,
};
use icran::linalg::stable_sum;
use icran::utilities::UtilitySpec;
use icran::waterfilling::{iwfa, IwfaOptions, Schedule};
use icran::wsrm::{cca_miso, mdp_solve, scale_solve, wmmse_mimo, wmmse_parallel, CcaOptions, MimoInit, ScaleOptions, StopRule};
use icran::{CMatrix, CVector, SolverTrace};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const CONFIG_VERSION: u32 = 1;

/// Environment variable capping the worker count (`0` or unset: one per core).
pub const THREADS_ENV: &str = "ICRAN_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] icran::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, BenchError>;

fn default_epsilon() -> f64 {
    StopRule::default().epsilon
}
fn default_max_iter() -> usize {
    StopRule::default().max_iter
}

/// An algorithm and its parameters. The `name` tag selects the variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlgorithmSpec {
    Wmmse {
        #[serde(default = "default_epsilon")]
        epsilon: f64,
        #[serde(default = "default_max_iter")]
        max_iter: usize,
    },
    Mdp {
        #[serde(default = "default_epsilon")]
        epsilon: f64,
        #[serde(default = "default_max_iter")]
        max_iter: usize,
    },
    Scale {
        #[serde(default = "default_epsilon")]
        epsilon: f64,
        #[serde(default = "default_max_iter")]
        max_iter: usize,
        #[serde(default)]
        grad_steps: Option<usize>,
        #[serde(default)]
        step_size: Option<f64>,
    },
    Iwfa {
        #[serde(default)]
        schedule: Schedule,
        #[serde(default)]
        tol: Option<f64>,
        #[serde(default)]
        max_iter: Option<usize>,
    },
    WmmseMimo {
        /// Streams per user; `min(M_k, N_k)` when unset.
        #[serde(default)]
        streams: Option<Vec<usize>>,
        #[serde(default = "default_epsilon")]
        epsilon: f64,
        #[serde(default = "default_max_iter")]
        max_iter: usize,
    },
    Cca {
        #[serde(default)]
        utility: Option<String>,
        #[serde(default)]
        tol: Option<f64>,
        #[serde(default)]
        max_iter: Option<usize>,
    },
}

pub const ALGORITHM_NAMES: [&str; 6] = ["wmmse", "mdp", "scale", "iwfa", "wmmse_mimo", "cca"];

impl AlgorithmSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Wmmse { .. } => "wmmse",
            Self::Mdp { .. } => "mdp",
            Self::Scale { .. } => "scale",
            Self::Iwfa { .. } => "iwfa",
            Self::WmmseMimo { .. } => "wmmse_mimo",
            Self::Cca { .. } => "cca",
        }
    }

    /// Default parameters for a bare algorithm name.
    pub fn from_name(name: &str) -> Result<Self> {
        let doc = serde_json::json!({ "name": name });
        serde_json::from_value(doc).map_err(|_| {
            BenchError::Config(format!("unknown algorithm `{name}` (valid: {})", ALGORITHM_NAMES.join(", ")))
        })
    }

    fn scenario_kind(&self) -> &'static str {
        match self {
            Self::Wmmse { .. } | Self::Mdp { .. } | Self::Scale { .. } | Self::Iwfa { .. } => "parallel",
            Self::WmmseMimo { .. } => "mimo",
            Self::Cca { .. } => "miso",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub path: Option<String>,
    #[serde(default)]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub scenario: ChannelDims,
    pub snr_grid: Vec<f64>,
    pub algorithms: Vec<AlgorithmSpec>,
    pub realizations: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSpec>,
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s).map_err(|e| BenchError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BenchError::Config(m));
        if self.version != CONFIG_VERSION {
            return bad(format!("unsupported config version {} (expected {CONFIG_VERSION})", self.version));
        }
        if self.realizations == 0 {
            return bad("realizations must be at least 1".into());
        }
        if self.snr_grid.is_empty() {
            return bad("snr_grid must not be empty".into());
        }
        if let Some(x) = self.snr_grid.iter().find(|x| !x.is_finite()) {
            return bad(format!("snr value {x} is not finite"));
        }
        if self.algorithms.is_empty() {
            return bad(format!("no algorithms given (valid: {})", ALGORITHM_NAMES.join(", ")));
        }
        let kind = match &self.scenario {
            ChannelDims::Scalar { .. } => "scalar",
            ChannelDims::Parallel { .. } => "parallel",
            ChannelDims::Miso { .. } => "miso",
            ChannelDims::Mimo { .. } => "mimo",
        };
        for a in &self.algorithms {
            if a.scenario_kind() != kind {
                return bad(format!("algorithm `{}` needs a {} scenario, got {kind}", a.name(), a.scenario_kind()));
            }
        }
        // Surface dimension errors before any work starts.
        gen_channel(&self.scenario, self.base_seed).map_err(|e| BenchError::Config(e.to_string()))?;
        Ok(())
    }
}

/// One (algorithm, SNR, realization) outcome. Column order is the CSV order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub algorithm: String,
    pub snr_db: f64,
    pub realization: usize,
    pub seed: u64,
    pub sum_rate: f64,
    pub iterations: usize,
    /// Informational only; excluded from every comparison.
    pub wall_time_ms: f64,
    pub converged: bool,
}

/// Final iterate of a run, enough to recompute its sum rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FinalIterate {
    /// `powers[k][n]`.
    Powers { powers: Vec<Vec<f64>> },
    /// Per-user beams (MISO: one column) as `[re, im]` pairs, column-major.
    Beams { shapes: Vec<[usize; 2]>, entries: Vec<Vec<[f64; 2]>> },
}

impl FinalIterate {
    fn from_matrices<'a>(ms: impl IntoIterator<Item = &'a CMatrix>) -> Self {
        let (shapes, entries) =
            ms.into_iter().map(|m| ([m.nrows(), m.ncols()], m.iter().map(|z| [z.re, z.im]).collect())).unzip();
        Self::Beams { shapes, entries }
    }

    fn matrices(shapes: &[[usize; 2]], entries: &[Vec<[f64; 2]>]) -> Vec<CMatrix> {
        shapes
            .iter()
            .zip(entries)
            .map(|(s, e)| CMatrix::from_iterator(s[0], s[1], e.iter().map(|p| icran::Complex64::new(p[0], p[1]))))
            .collect()
    }

    /// Re-evaluates the unweighted sum rate of this iterate on `ch`.
    pub fn sum_rate(&self, ch: &Channel) -> Result<f64> {
        let rates = match (self, ch) {
            (Self::Powers { powers }, Channel::Parallel(c)) => {
                let p = PowerMatrix::from_rows(powers.clone())?;
                return Ok(weighted_sum_rate_parallel(c, &p, &vec![1.0; c.users()])?);
            }
            (Self::Beams { shapes, entries }, Channel::Miso(c)) => {
                let v: Vec<CVector> =
                    Self::matrices(shapes, entries).into_iter().map(|m| m.column(0).into_owned()).collect();
                rate_miso(c, &v)?
            }
            (Self::Beams { shapes, entries }, Channel::Mimo(c)) => rate_from_beamformers(c, &Self::matrices(shapes, entries))?,
            _ => return Err(BenchError::Config("iterate does not match the channel kind".into())),
        };
        Ok(rates.iter().sum())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
    /// Aligned with `rows`.
    pub final_iterates: Vec<FinalIterate>,
}

/// Mean sum rate of one algorithm at one SNR.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub algorithm: String,
    pub snr_db: f64,
    pub mean_sum_rate: f64,
    pub realizations: usize,
    pub converged: usize,
}

impl ResultTable {
    /// Per (algorithm, SNR) means, in first-appearance order.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut keys: Vec<(String, f64)> = Vec::new();
        for r in &self.rows {
            if !keys.iter().any(|(a, s)| *a == r.algorithm && s.to_bits() == r.snr_db.to_bits()) {
                keys.push((r.algorithm.clone(), r.snr_db));
            }
        }
        keys.into_iter()
            .map(|(algorithm, snr_db)| {
                let group: Vec<&ResultRow> =
                    self.rows.iter().filter(|r| r.algorithm == algorithm && r.snr_db.to_bits() == snr_db.to_bits()).collect();
                let rates: Vec<f64> = group.iter().map(|r| r.sum_rate).collect();
                SummaryRow {
                    mean_sum_rate: stable_sum(&rates) / rates.len() as f64,
                    realizations: group.len(),
                    converged: group.iter().filter(|r| r.converged).count(),
                    algorithm,
                    snr_db,
                }
            })
            .collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        if self.rows.is_empty() {
            w.write_record(["algorithm", "snr_db", "realization", "seed", "sum_rate", "iterations", "wall_time_ms", "converged"])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json<W: std::io::Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }
}

struct Outcome {
    sum_rate: f64,
    iterations: usize,
    converged: bool,
    last: FinalIterate,
}

fn from_powers(ch: &ParallelChannel, t: SolverTrace<PowerMatrix>) -> Result<Outcome> {
    Ok(Outcome {
        sum_rate: weighted_sum_rate_parallel(ch, &t.final_state, &vec![1.0; ch.users()])?,
        iterations: t.iterations,
        converged: t.converged,
        last: FinalIterate::Powers { powers: t.final_state.rows() },
    })
}

fn solve(alg: &AlgorithmSpec, ch: &Channel) -> Result<Outcome> {
    let k = ch.users();
    let ones = vec![1.0; k];
    match (alg, ch) {
        (AlgorithmSpec::Wmmse { epsilon, max_iter }, Channel::Parallel(c)) => {
            from_powers(c, wmmse_parallel(c, &ones, &StopRule { epsilon: *epsilon, max_iter: *max_iter })?)
        }
        (AlgorithmSpec::Mdp { epsilon, max_iter }, Channel::Parallel(c)) => {
            from_powers(c, mdp_solve(c, &ones, &StopRule { epsilon: *epsilon, max_iter: *max_iter }, None)?)
        }
        (AlgorithmSpec::Scale { epsilon, max_iter, grad_steps, step_size }, Channel::Parallel(c)) => {
            let d = ScaleOptions::default();
            let opts = ScaleOptions {
                stop: StopRule { epsilon: *epsilon, max_iter: *max_iter },
                grad_steps: grad_steps.unwrap_or(d.grad_steps),
                step_size: step_size.unwrap_or(d.step_size),
                armijo: d.armijo,
            };
            from_powers(c, scale_solve(c, &ones, &opts)?)
        }
        (AlgorithmSpec::Iwfa { schedule, tol, max_iter }, Channel::Parallel(c)) => {
            let d = IwfaOptions::default();
            let opts = IwfaOptions {
                schedule: *schedule,
                tol: tol.unwrap_or(d.tol),
                max_iter: max_iter.unwrap_or(d.max_iter),
                ..d
            };
            from_powers(c, iwfa(c, &opts, None)?)
        }
        (AlgorithmSpec::WmmseMimo { streams, epsilon, max_iter }, Channel::Mimo(c)) => {
            let d: Vec<usize> = match streams {
                Some(s) => s.clone(),
                None => c.antennas().iter().map(|a| a.tx.min(a.rx)).collect(),
            };
            let t = wmmse_mimo(c, &ones, &d, &MimoInit::Svd, &StopRule { epsilon: *epsilon, max_iter: *max_iter })?;
            Ok(Outcome {
                sum_rate: rate_from_beamformers(c, &t.final_state.v)?.iter().sum(),
                iterations: t.iterations,
                converged: t.converged,
                last: FinalIterate::from_matrices(&t.final_state.v),
            })
        }
        (AlgorithmSpec::Cca { utility, tol, max_iter }, Channel::Miso(c)) => {
            let spec: UtilitySpec = match utility {
                Some(u) => u.parse()?,
                None => UtilitySpec::sum_rate(),
            };
            let d = CcaOptions::default();
            let opts = CcaOptions { tol: tol.unwrap_or(d.tol), max_iter: max_iter.unwrap_or(d.max_iter), ..d };
            let t = cca_miso(c, &spec, &opts)?;
            let beams: Vec<CMatrix> = t.final_state.iter().map(|v| CMatrix::from_column_slice(v.len(), 1, v.as_slice())).collect();
            Ok(Outcome {
                sum_rate: rate_miso(c, &t.final_state)?.iter().sum(),
                iterations: t.iterations,
                converged: t.converged,
                last: FinalIterate::from_matrices(&beams),
            })
        }
        _ => Err(BenchError::Config(format!("algorithm `{}` does not run on this channel", alg.name()))),
    }
}

/// Worker count from [`THREADS_ENV`]; `None` means rayon's default.
pub fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(0) => Ok(None),
            Ok(n) => Ok(Some(n)),
            Err(_) => Err(BenchError::Config(format!("{THREADS_ENV} must be a nonnegative integer, got `{v}`"))),
        },
    }
}

/// The random channel of realization `r` with a uniform budget at `snr_db`.
pub fn realization_channel(cfg: &ExperimentConfig, realization: usize, snr_db: f64) -> Result<Channel> {
    let seed = cfg.base_seed.wrapping_add(realization as u64);
    Ok(gen_channel(&cfg.scenario, seed)?.with_uniform_budget(snr_db_to_budget(snr_db))?)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultTable> {
    cfg.validate()?;
    let mut tasks = Vec::new();
    for alg in &cfg.algorithms {
        for &snr in &cfg.snr_grid {
            for r in 0..cfg.realizations {
                tasks.push((alg, snr, r));
            }
        }
    }
    let run = || -> Result<Vec<(ResultRow, FinalIterate)>> {
        tasks
            .par_iter()
            .map(|&(alg, snr, r)| {
                let ch = realization_channel(cfg, r, snr)?;
                let start = Instant::now();
                let out = solve(alg, &ch)?;
                let row = ResultRow {
                    algorithm: alg.name().to_string(),
                    snr_db: snr,
                    realization: r,
                    seed: cfg.base_seed.wrapping_add(r as u64),
                    sum_rate: out.sum_rate,
                    iterations: out.iterations,
                    wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
                    converged: out.converged,
                };
                Ok((row, out.last))
            })
            .collect()
    };
    let pairs = match thread_cap()? {
        None => run()?,
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| BenchError::Config(e.to_string()))?
            .install(run)?,
    };
    let (rows, final_iterates) = pairs.into_iter().unzip();
    Ok(ResultTable { rows, final_iterates })
}

/// The parallel-channel comparison of WMMSE, MDP and SCALE from equal power,
/// as used by `icran wsrm`.
pub fn comparison_config(users: usize, tones: usize, snr_grid: Vec<f64>, realizations: usize, base_seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        version: CONFIG_VERSION,
        scenario: ChannelDims::Parallel { users, tones },
        snr_grid,
        algorithms: ["wmmse", "mdp", "scale"].iter().map(|n| AlgorithmSpec::from_name(n).expect("known name")).collect(),
        realizations,
        base_seed,
        output: None,
    }
}

/// Largest pairwise relative gap between algorithm means at each SNR:
/// `|a - b| / max(a, b)`.
pub fn max_pairwise_gap(summary: &[SummaryRow]) -> Vec<(f64, f64)> {
    let mut snrs: Vec<f64> = summary.iter().map(|s| s.snr_db).collect();
    snrs.sort_by(f64::total_cmp);
    snrs.dedup();
    snrs.into_iter()
        .map(|snr| {
            let means: Vec<f64> = summary.iter().filter(|s| s.snr_db == snr).map(|s| s.mean_sum_rate).collect();
            let mut gap: f64 = 0.0;
            for (i, a) in means.iter().enumerate() {
                for b in &means[i + 1..] {
                    gap = gap.max((a - b).abs() / a.max(*b));
                }
            }
            (snr, gap)
        })
        .collect()
}
