//! Command-line front end: region geometry, planning, simulation, variant
//! comparison and sweeps, emitted as JSON or CSV.
//!
//! Exit codes: 0 on success, 1 on invalid input, 2 when an adaptive run
//! fails to decode (which indicates a bug, since adaptive runs always finish).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use ebc_core::channel::ChannelParams;
use ebc_core::montecarlo::{self, ConvergenceRow, ExperimentSpec};
use ebc_core::region::{self, RegionError, RegionSlice};
use ebc_core::scheme::{self, Case, Mode, Variant, DEFAULT_BLOCK_SIZE};

pub const SEED_ENV: &str = "EBC_SEED";

#[derive(Parser, Debug)]
#[command(name = "ebc", version, about = "Erasure broadcast channel with delayed feedback: capacity region and coding-scheme simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Capacity and baseline region slices at one common rate.
    Region(RunArgs),
    /// Bit allocation and expected phase lengths for one corner point.
    Plan(RunArgs),
    /// Monte Carlo run of one scheme variant.
    Simulate(RunArgs),
    /// All scheme variants under matched seeds.
    Compare(RunArgs),
    /// Maximum sum-rate over an r0 grid, or convergence over a k1 grid.
    Sweep(SweepArgs),
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// Erasure probability of receiver 1's link.
    #[arg(long)]
    d1: Option<f64>,
    /// Erasure probability of receiver 2's link.
    #[arg(long)]
    d2: Option<f64>,
    /// Probability that both links are erased in the same slot.
    #[arg(long)]
    d12: Option<f64>,
    /// Common-message rate.
    #[arg(long)]
    r0: Option<f64>,
    /// Private bits for the receiver with the better link.
    #[arg(long)]
    k1: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Base seed [default: $EBC_SEED, else 0].
    #[arg(long)]
    seed: Option<u64>,
    /// capacity, baseline or simple.
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Slack of fixed-length mode.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Message bits per generator block.
    #[arg(long)]
    block_size: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write output here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON file with any of the above settings; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("grid").required(true).args(["r0_grid", "k1_grid"])))]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated, strictly ascending common rates.
    #[arg(long, value_delimiter = ',')]
    r0_grid: Option<Vec<f64>>,
    /// Comma-separated, strictly ascending k1 values.
    #[arg(long, value_delimiter = ',')]
    k1_grid: Option<Vec<u64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeArg {
    Adaptive,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

/// Settings read from `--config`; every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub d1: Option<f64>,
    pub d2: Option<f64>,
    pub d12: Option<f64>,
    pub r0: Option<f64>,
    pub k1: Option<u64>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub variant: Option<Variant>,
    pub mode: Option<ModeArg>,
    pub epsilon: Option<f64>,
    pub block_size: Option<usize>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
}

/// Fully resolved settings.
#[derive(Debug, Clone, PartialEq)]
struct Settings {
    params: ChannelParams,
    r0: f64,
    spec: ExperimentSpec,
    format: Format,
    out: Option<PathBuf>,
}

/// Error carrying the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure { code: 1, error: e.into() }
    }
}

fn read_config(path: &Path) -> anyhow::Result<RunConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

fn env_seed() -> anyhow::Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| anyhow!("{SEED_ENV}={s:?} is not an unsigned integer")),
        Err(_) => Ok(None),
    }
}

impl RunArgs {
    fn resolve(&self) -> anyhow::Result<Settings> {
        let file = match &self.config {
            Some(path) => read_config(path)?,
            None => RunConfig::default(),
        };
        let d1 = self.d1.or(file.d1).unwrap_or(0.4);
        let d2 = self.d2.or(file.d2).unwrap_or(0.6);
        let d12 = self.d12.or(file.d12).unwrap_or(0.24);
        let params = ChannelParams::new(d1, d2, d12)?;
        let r0 = self.r0.or(file.r0).unwrap_or(0.0);
        let k1 = self.k1.or(file.k1).unwrap_or(10_000);
        let trials = self.trials.or(file.trials).unwrap_or(10);
        let base_seed = match self.seed.or(file.seed) {
            Some(s) => s,
            None => env_seed()?.unwrap_or(0),
        };
        let epsilon = self.epsilon.or(file.epsilon).unwrap_or(0.05);
        let mode = match self.mode.or(file.mode).unwrap_or(ModeArg::Adaptive) {
            ModeArg::Adaptive => Mode::Adaptive,
            ModeArg::Fixed => Mode::Fixed { epsilon },
        };
        if !r0.is_finite() || r0 < 0.0 {
            bail!("--r0 must be a non-negative number, got {r0}");
        }
        if trials == 0 {
            bail!("--trials must be at least 1");
        }
        if k1 == 0 {
            bail!("--k1 must be at least 1");
        }
        let spec = ExperimentSpec {
            params,
            r0,
            k1,
            variant: self.variant.or(file.variant).unwrap_or(Variant::Capacity),
            mode,
            trials,
            base_seed,
            block_size: self.block_size.or(file.block_size).unwrap_or(DEFAULT_BLOCK_SIZE),
        };
        spec.options().validate()?;
        Ok(Settings {
            params,
            r0,
            spec,
            format: self.format.or(file.format).unwrap_or(Format::Json),
            out: self.out.clone().or(file.out),
        })
    }
}

fn emit(settings: &Settings, body: &[u8]) -> anyhow::Result<()> {
    match &settings.out {
        Some(path) => fs::write(path, body).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(body)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn json<T: Serialize>(value: &T) -> anyhow::Result<Vec<u8>> {
    let mut body = serde_json::to_vec_pretty(value)?;
    body.push(b'\n');
    Ok(body)
}

fn csv_body<F>(header: &[&str], fill: F) -> anyhow::Result<Vec<u8>>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    fill(&mut w)?;
    w.into_inner().map_err(|e| anyhow!("{e}"))
}

/// Output of `ebc region`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    pub params: ChannelParams,
    pub r0: f64,
    pub r_bar: f64,
    pub sum_rate_max: Option<f64>,
    pub capacity: RegionSlice,
    pub baseline: RegionSlice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

fn cmd_region(args: &RunArgs) -> Result<u8, Failure> {
    let s = args.resolve()?;
    let p = s.params;
    let r_bar = region::r_bar(&p)?;
    let report = match region::region_slice(&p, s.r0) {
        Err(RegionError::EmptyRegion { r0, max }) => {
            let empty = RegionSlice {
                r0,
                vertices: Vec::new(),
                active_bounds: Vec::new(),
            };
            RegionReport {
                params: p,
                r0,
                r_bar,
                sum_rate_max: None,
                capacity: empty.clone(),
                baseline: empty,
                warning: Some(format!("region is empty: r0 = {r0} exceeds {max}")),
            }
        }
        other => RegionReport {
            params: p,
            r0: s.r0,
            r_bar,
            sum_rate_max: Some(region::sum_rate_max(&p, s.r0)?),
            capacity: other?,
            baseline: region::baseline_region_slice(&p, s.r0)?,
            warning: None,
        },
    };
    if let Some(w) = &report.warning {
        eprintln!("warning: {w}");
    }
    let body = match s.format {
        Format::Json => json(&report)?,
        Format::Csv => csv_body(&["series", "r1", "r2"], |w| {
            for (series, slice) in [("capacity", &report.capacity), ("baseline", &report.baseline)] {
                for v in &slice.vertices {
                    w.serialize((series, v.r1, v.r2))?;
                }
            }
            Ok(())
        })?,
    };
    emit(&s, &body)?;
    Ok(0)
}

fn cmd_plan(args: &RunArgs) -> Result<u8, Failure> {
    let s = args.resolve()?;
    let plan = scheme::plan(&s.params, s.r0, s.spec.k1)?;
    let body = match s.format {
        Format::Json => json(&plan)?,
        Format::Csv => csv_body(&["quantity", "value"], |w| {
            let l = &plan.expected_lengths;
            let counts = [("k1", plan.k1), ("k2", plan.k2), ("k0", plan.k0), ("k0_piggyback", plan.k0_piggyback)];
            for (name, v) in counts {
                w.serialize((name, v.to_string()))?;
            }
            let reals = [
                ("k12_expected", Some(plan.k12_expected)),
                ("k21_expected", Some(plan.k21_expected)),
                ("n1", l.n1),
                ("n2", l.n2),
                ("n2a", l.n2a),
                ("n2b", l.n2b),
                ("n3a", l.n3a),
                ("n3b", l.n3b),
                ("n3c", l.n3c),
            ];
            for (name, v) in reals {
                if let Some(v) = v {
                    w.serialize((name, v))?;
                }
            }
            Ok(())
        })?,
    };
    emit(&s, &body)?;
    Ok(0)
}

fn decode_exit(mode: Mode, success: f64) -> u8 {
    if mode.is_adaptive() && success < 1.0 {
        eprintln!("error: adaptive run failed to decode in {:.1}% of trials", 100.0 * (1.0 - success));
        2
    } else {
        0
    }
}

fn run_failure(e: ebc_core::Error) -> Failure {
    let code = if matches!(e, ebc_core::Error::TrialFailed { .. }) { 2 } else { 1 };
    Failure { code, error: e.into() }
}

/// Per-trial CSV row; rates use the caller's receiver labels.
#[derive(Serialize)]
struct TrialRow {
    trial: usize,
    seed: u64,
    total_n: u64,
    r1: f64,
    r2: f64,
    r0: f64,
    success: bool,
    k12_missent: u64,
    k21_missent: u64,
    k0_piggyback: u64,
    n1: Option<u64>,
    n2: Option<u64>,
    n2a: Option<u64>,
    n2b: Option<u64>,
    n3a: Option<u64>,
    n3b: Option<u64>,
    n3c: Option<u64>,
}

fn cmd_simulate(args: &RunArgs) -> Result<u8, Failure> {
    let s = args.resolve()?;
    let summary = montecarlo::run_experiment(&s.spec).map_err(run_failure)?;
    let body = match s.format {
        Format::Json => json(&summary)?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for (i, t) in summary.per_trial.iter().enumerate() {
                let r = summary.plan.to_caller(t.achieved);
                let l = &t.realized_lengths;
                w.serialize(TrialRow {
                    trial: i,
                    seed: t.seed,
                    total_n: t.total_n,
                    r1: r.r1,
                    r2: r.r2,
                    r0: r.r0,
                    success: t.success(),
                    k12_missent: t.k12_missent,
                    k21_missent: t.k21_missent,
                    k0_piggyback: t.k0_piggyback,
                    n1: l.n1,
                    n2: l.n2,
                    n2a: l.n2a,
                    n2b: l.n2b,
                    n3a: l.n3a,
                    n3b: l.n3b,
                    n3c: l.n3c,
                })?;
            }
            w.into_inner().map_err(|e| anyhow!("{e}"))?
        }
    };
    emit(&s, &body)?;
    Ok(decode_exit(s.spec.mode, summary.decode_success_fraction))
}

fn cmd_compare(args: &RunArgs) -> Result<u8, Failure> {
    let s = args.resolve()?;
    let cmp = montecarlo::compare_variants(&s.spec).map_err(run_failure)?;
    let body = match s.format {
        Format::Json => json(&cmp)?,
        Format::Csv => csv_body(&["variant", "r1", "r2", "r0", "sum", "stderr"], |w| {
            for summary in &cmp.summaries {
                let m = summary.mean_rates;
                w.serialize((summary.spec.variant.name(), m.r1, m.r2, m.r0, summary.sum_rate.mean, summary.sum_rate.stderr))?;
            }
            Ok(())
        })?,
    };
    emit(&s, &body)?;
    let worst = cmp.summaries.iter().map(|s| s.decode_success_fraction).fold(1.0, f64::min);
    Ok(decode_exit(s.spec.mode, worst))
}

/// One row of an r0 sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SumRateRow {
    pub r0: f64,
    pub case: Case,
    pub sum_rate_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SumRateSweep {
    pub params: ChannelParams,
    pub r_bar: f64,
    pub rows: Vec<SumRateRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSweep {
    pub spec: ExperimentSpec,
    pub rows: Vec<ConvergenceRow>,
}

fn ascending<T: PartialOrd>(grid: &[T]) -> bool {
    !grid.is_empty() && grid.windows(2).all(|w| w[0] < w[1])
}

fn cmd_sweep(args: &SweepArgs) -> Result<u8, Failure> {
    let s = args.run.resolve()?;
    if let Some(grid) = &args.r0_grid {
        if !ascending(grid) {
            return Err(anyhow!("--r0-grid must be non-empty and strictly ascending").into());
        }
        let r_bar = region::r_bar(&s.params)?;
        let rows = grid
            .iter()
            .map(|&r0| {
                Ok(SumRateRow {
                    r0,
                    case: if r0 > r_bar { Case::CaseI } else { Case::CaseII },
                    sum_rate_max: region::sum_rate_max(&s.params, r0)?,
                })
            })
            .collect::<Result<Vec<_>, RegionError>>()?;
        let sweep = SumRateSweep {
            params: s.params,
            r_bar,
            rows,
        };
        let body = match s.format {
            Format::Json => json(&sweep)?,
            Format::Csv => csv_body(&["r0", "sum_rate_max"], |w| {
                for row in &sweep.rows {
                    w.serialize((row.r0, row.sum_rate_max))?;
                }
                Ok(())
            })?,
        };
        emit(&s, &body)?;
        return Ok(0);
    }
    let grid = args.k1_grid.as_deref().unwrap_or_default();
    if !ascending(grid) {
        return Err(anyhow!("--k1-grid must be non-empty and strictly ascending").into());
    }
    let rows = montecarlo::convergence_sweep(&s.spec, grid).map_err(run_failure)?;
    let worst = rows.iter().map(|r| r.decode_success_fraction).fold(1.0, f64::min);
    let sweep = ConvergenceSweep { spec: s.spec.clone(), rows };
    let body = match s.format {
        Format::Json => json(&sweep)?,
        Format::Csv => csv_body(&["k1", "r1", "r2", "r0", "relative_error", "success_fraction"], |w| {
            for r in &sweep.rows {
                let m = r.mean_rates;
                w.serialize((r.k1, m.r1, m.r2, m.r0, r.relative_error, r.decode_success_fraction))?;
            }
            Ok(())
        })?,
    };
    emit(&s, &body)?;
    Ok(decode_exit(s.spec.mode, worst))
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Region(a) => cmd_region(a),
        Command::Plan(a) => cmd_plan(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(code) => code,
        Err(Failure { code, error }) => {
            eprintln!("error: {error:#}");
            code
        }
    }
}
