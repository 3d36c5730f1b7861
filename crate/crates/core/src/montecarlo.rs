//! Seeded multi-trial experiments.
//!
//! Trial `i` of an experiment runs with seed [`trial_seed`]`(base_seed, i)`,
//! so results depend only on the `ExperimentSpec` and never on how trials are spread over
//! threads. Aggregates are reported in the caller's receiver labels; the
//! per-trial reports keep the canonical labels of the plan.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::region::RateTriple;
use crate::scheme::{self, Mode, SchemePlan, TrialOptions, TrialReport, Variant, DEFAULT_BLOCK_SIZE};
use crate::Error;

fn default_block_size() -> usize {
    DEFAULT_BLOCK_SIZE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub params: ChannelParams,
    pub r0: f64,
    pub k1: u64,
    pub variant: Variant,
    pub mode: Mode,
    pub trials: usize,
    pub base_seed: u64,
    #[serde(default = "default_block_size")]
    pub block_size: usize,
}

impl ExperimentSpec {
    pub fn new(params: ChannelParams, r0: f64, k1: u64, trials: usize, base_seed: u64) -> Self {
        ExperimentSpec {
            params,
            r0,
            k1,
            variant: Variant::Capacity,
            mode: Mode::Adaptive,
            trials,
            base_seed,
            block_size: DEFAULT_BLOCK_SIZE,
        }
    }

    pub fn with_variant(&self, variant: Variant) -> Self {
        ExperimentSpec { variant, ..self.clone() }
    }

    pub fn options(&self) -> TrialOptions {
        TrialOptions {
            mode: self.mode,
            block_size: self.block_size,
        }
    }

    /// Checks everything that can be checked before running a trial.
    pub fn validate(&self) -> Result<SchemePlan, Error> {
        if self.trials == 0 {
            return Err(Error::InvalidExperiment("trials must be at least 1".into()));
        }
        self.options().validate()?;
        Ok(scheme::plan(&self.params, self.r0, self.k1)?)
    }
}

/// Mean and standard error (sample standard deviation over `sqrt(n)`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let stderr = if xs.len() < 2 {
            0.0
        } else {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        };
        Estimate { mean, stderr }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub spec: ExperimentSpec,
    pub plan: SchemePlan,
    pub mean_rates: RateTriple,
    pub stderr_rates: RateTriple,
    pub sum_rate: Estimate,
    pub target: RateTriple,
    pub decode_success_fraction: f64,
    pub per_trial: Vec<TrialReport>,
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trial `index`: `mix(base_seed ^ mix(index + GOLDEN))`, where
/// `mix` is the SplitMix64 finalizer and `GOLDEN = 0x9e3779b97f4a7c15`.
pub fn trial_seed(base_seed: u64, index: u64) -> u64 {
    mix(base_seed ^ mix(index.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentSummary, Error> {
    let plan = spec.validate()?;
    let options = spec.options();
    let per_trial = (0..spec.trials)
        .into_par_iter()
        .map(|i| {
            let seed = trial_seed(spec.base_seed, i as u64);
            scheme::run_variant(spec.variant, &plan, options, seed).map_err(|source| Error::TrialFailed { trial: i, source })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let caller: Vec<RateTriple> = per_trial.iter().map(|r| plan.to_caller(r.achieved)).collect();
    let component = |f: fn(&RateTriple) -> f64| Estimate::of(&caller.iter().map(f).collect::<Vec<_>>());
    let (e1, e2, e0) = (component(|r| r.r1), component(|r| r.r2), component(|r| r.r0));
    let sum_rate = component(RateTriple::sum);
    let successes = per_trial.iter().filter(|r| r.success()).count();
    let target = match spec.variant {
        Variant::Capacity => plan.target,
        other => plan.expected_rates(other),
    };
    Ok(ExperimentSummary {
        spec: spec.clone(),
        mean_rates: RateTriple::new(e1.mean, e2.mean, e0.mean),
        stderr_rates: RateTriple::new(e1.stderr, e2.stderr, e0.stderr),
        sum_rate,
        target: plan.to_caller(target),
        decode_success_fraction: successes as f64 / spec.trials as f64,
        per_trial,
        plan,
    })
}

/// Difference of mean sum-rates, `a - b`, with the combined standard error
/// `sqrt(se_a^2 + se_b^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SumRateDelta {
    pub a: Variant,
    pub b: Variant,
    pub delta: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub summaries: Vec<ExperimentSummary>,
    pub deltas: Vec<SumRateDelta>,
}

impl Comparison {
    pub fn summary(&self, variant: Variant) -> Option<&ExperimentSummary> {
        self.summaries.iter().find(|s| s.spec.variant == variant)
    }

    pub fn delta(&self, a: Variant, b: Variant) -> Option<&SumRateDelta> {
        self.deltas.iter().find(|d| d.a == a && d.b == b)
    }
}

/// Runs every variant with the same seeds; `spec.variant` is ignored.
pub fn compare_variants(spec: &ExperimentSpec) -> Result<Comparison, Error> {
    let summaries = Variant::ALL
        .into_iter()
        .map(|v| run_experiment(&spec.with_variant(v)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut deltas = Vec::new();
    for i in 0..summaries.len() {
        for j in i + 1..summaries.len() {
            let (a, b) = (&summaries[i], &summaries[j]);
            deltas.push(SumRateDelta {
                a: a.spec.variant,
                b: b.spec.variant,
                delta: a.sum_rate.mean - b.sum_rate.mean,
                stderr: a.sum_rate.stderr.hypot(b.sum_rate.stderr),
            });
        }
    }
    Ok(Comparison { summaries, deltas })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub k1: u64,
    pub mean_rates: RateTriple,
    pub stderr_rates: RateTriple,
    pub target: RateTriple,
    /// Largest `|mean - target| / target` over the components with a
    /// positive target.
    pub relative_error: f64,
    pub decode_success_fraction: f64,
}

pub fn relative_error(mean: &RateTriple, target: &RateTriple) -> f64 {
    [(mean.r1, target.r1), (mean.r2, target.r2), (mean.r0, target.r0)]
        .into_iter()
        .filter(|&(_, t)| t > 1e-12)
        .map(|(m, t)| (m - t).abs() / t)
        .fold(0.0, f64::max)
}

/// Runs `spec` once per entry of `k1_list`, which must be strictly ascending.
pub fn convergence_sweep(spec: &ExperimentSpec, k1_list: &[u64]) -> Result<Vec<ConvergenceRow>, Error> {
    if k1_list.is_empty() {
        return Err(Error::InvalidExperiment("k1 list is empty".into()));
    }
    if k1_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidExperiment("k1 list must be strictly ascending".into()));
    }
    k1_list
        .iter()
        .map(|&k1| {
            let summary = run_experiment(&ExperimentSpec { k1, ..spec.clone() })?;
            Ok(ConvergenceRow {
                k1,
                relative_error: relative_error(&summary.mean_rates, &summary.target),
                mean_rates: summary.mean_rates,
                stderr_rates: summary.stderr_rates,
                target: summary.target,
                decode_success_fraction: summary.decode_success_fraction,
            })
        })
        .collect()
}
