//! Command-line driver: `stochquad <command> [--config file.toml] [--seed U64]
//! [--out dir] [--preset name] [--threads N]`.
//!
//! Settings come from, in increasing precedence: built-in defaults, the
//! preset, the TOML config file (flat keys named like the long flags, with
//! `_` for `-`), and explicit flags. Every command writes `manifest.json`,
//! which is bit-identical across re-runs with the same seed, and
//! `timing.json` with the wall time.
//!
//! Exit codes: 0 success, 1 failed check or runtime error, 2 usage or
//! configuration error, 3 numeric divergence.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::drm::{self, NodeSource, TrainConfig, TrainStatus};
use crate::error::Error;
use crate::net::NetworkParameters;
use crate::quadrature::exactness::exactness_report;
use crate::quadrature::{GlobalRule, Rule, RuleId};
use crate::rng::substream;
use crate::stats::{self, Grid};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Parser)]
#[command(
    name = "stochquad",
    version,
    about = "Stochastic quadrature rules and Deep Ritz training"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check polynomial exactness and weight sums of rules.
    Exactness(ExactnessCmd),
    /// Measure quadrature variance against the number of points.
    VarianceStudy(VarianceCmd),
    /// Train the network and write the trace.
    Train(TrainCmd),
    /// Stochastic-gradient covariance of saved parameters.
    CovMetrics(CovCmd),
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct CommonArgs {
    /// TOML file with settings; explicit flags take precedence.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (default ".").
    #[arg(long)]
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub preset: Option<String>,
    /// Cap on worker threads.
    #[arg(long)]
    #[serde(skip_serializing)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ExactnessCmd {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    /// Rules to check (default: all).
    #[arg(long, value_delimiter = ',')]
    pub rules: Option<Vec<RuleId>>,
    /// Restrict to one dimension.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Random polynomials per degree.
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct VarianceCmd {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_delimiter = ',')]
    pub rules: Option<Vec<RuleId>>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Point budgets N; each rule uses the finest uniform mesh within budget.
    #[arg(long, value_delimiter = ',')]
    pub points: Option<Vec<usize>>,
    #[arg(long)]
    pub repetitions: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct TrainCmd {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub rule: Option<RuleId>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Cells per axis, or points for `mc`.
    #[arg(long)]
    pub n: Option<usize>,
    /// Train on fixed midpoints of this many cells per axis instead.
    #[arg(long, conflicts_with = "rule")]
    pub midpoints: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub gamma0: Option<f64>,
    #[arg(long)]
    pub gamma_f: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Iterations between H¹ error evaluations.
    #[arg(long)]
    pub eval_stride: Option<usize>,
    /// Pre-sample this many radial base points for p2tri/p2tet.
    #[arg(long)]
    pub database: Option<usize>,
    /// Use the long iteration budgets of the reference experiments.
    #[arg(long)]
    #[serde(default)]
    pub full: bool,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct CovCmd {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    /// Saved network parameters (.json or .bin).
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long)]
    pub rule: Option<RuleId>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of gradient samples S.
    #[arg(long)]
    pub samples: Option<usize>,
}

/// Fill every unset field of `self` from `other`.
trait Fill {
    fn fill(&mut self, other: Self);
}

macro_rules! fill_fields {
    ($ty:ty { $($field:ident),* } $(bools { $($flag:ident),* })?) => {
        impl Fill for $ty {
            fn fill(&mut self, other: Self) {
                $( if self.$field.is_none() { self.$field = other.$field; } )*
                $($( self.$flag |= other.$flag; )*)?
            }
        }
    };
}

fill_fields!(CommonArgs {
    config,
    seed,
    out,
    preset,
    threads
});
fill_fields!(ExactnessCmd { rules, dim, trials });
fill_fields!(VarianceCmd {
    rules,
    dim,
    points,
    repetitions
});
fill_fields!(TrainCmd { rule, dim, n, midpoints, iterations, gamma0, gamma_f, epsilon, eval_stride, database } bools { full });
fill_fields!(CovCmd {
    params,
    rule,
    n,
    samples
});

/// Command-level failure with its exit status.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidArgument(_) | Error::Io { .. } | Error::Format { .. } => EXIT_USAGE,
            Error::NonFinite { .. } => EXIT_DIVERGED,
            Error::ResourceExhausted { .. } => EXIT_FAILURE,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parse `args` and run; returns the process exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn run(cli: Cli) -> CliResult<i32> {
    let started = Instant::now();
    let outcome = match cli.command {
        Command::Exactness(mut c) => {
            resolve(&mut c, |c| &mut c.common, exactness_preset)?;
            with_threads(&c.common, || cmd_exactness(&c))?
        }
        Command::VarianceStudy(mut c) => {
            resolve(&mut c, |c| &mut c.common, variance_preset)?;
            with_threads(&c.common, || cmd_variance_study(&c))?
        }
        Command::Train(mut c) => {
            resolve(
                &mut c,
                |c| &mut c.common,
                |name| Ok(train_preset(name, false).map(|_| TrainCmd::default())),
            )?;
            with_threads(&c.common, || cmd_train(&c))?
        }
        Command::CovMetrics(mut c) => {
            resolve(&mut c, |c| &mut c.common, |_| Ok(None))?;
            with_threads(&c.common, || cmd_cov_metrics(&c))?
        }
    };
    let out = outcome.out_dir.clone();
    write_json(&out.join("manifest.json"), &outcome.manifest)?;
    write_json(
        &out.join("timing.json"),
        &json!({ "wall_time_seconds": started.elapsed().as_secs_f64() }),
    )?;
    Ok(outcome.code)
}

struct Outcome {
    code: i32,
    out_dir: PathBuf,
    manifest: serde_json::Value,
}

/// Merge the config file and preset into `cmd` (flags win).
fn resolve<C, G, P>(cmd: &mut C, common: G, preset: P) -> CliResult<()>
where
    C: Fill + Default + for<'de> Deserialize<'de>,
    G: Fn(&mut C) -> &mut CommonArgs,
    P: Fn(&str) -> CliResult<Option<C>>,
{
    if let Some(path) = common(cmd).config.clone() {
        let text = fs::read_to_string(&path).map_err(|e| CliError::from(Error::io(&path, e)))?;
        let mut from_file: C =
            toml::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        let file_common = std::mem::take(common(&mut from_file));
        common(cmd).fill(file_common);
        cmd.fill(from_file);
    }
    if let Some(name) = common(cmd).preset.clone() {
        match preset(&name)? {
            Some(p) => cmd.fill(p),
            None => return Err(CliError::usage(format!("unknown preset {name:?} for this command"))),
        }
    }
    Ok(())
}

fn with_threads<T>(common: &CommonArgs, f: impl FnOnce() -> CliResult<T> + Send) -> CliResult<T>
where
    T: Send,
{
    match common.threads {
        None => f(),
        Some(0) => Err(CliError::usage("--threads must be positive")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::usage(e.to_string()))?
            .install(f),
    }
}

fn out_dir(common: &CommonArgs) -> CliResult<PathBuf> {
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|e| CliError::from(Error::io(&dir, e)))?;
    Ok(dir)
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e).into())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serialisable");
    text.push('\n');
    write_text(path, &text)
}

fn manifest(
    command: &str,
    seed: u64,
    config: &impl Serialize,
    artifacts: &[String],
    results: serde_json::Value,
) -> serde_json::Value {
    json!({
        "tool": "stochquad",
        "version": concat!("v", env!("CARGO_PKG_VERSION")),
        "command": command,
        "seed": seed,
        "config": config,
        "artifacts": artifacts,
        "results": results,
    })
}

fn exactness_preset(name: &str) -> CliResult<Option<ExactnessCmd>> {
    let dim = match name {
        "exactness-1d" => 1,
        "exactness-2d" => 2,
        "exactness-3d" => 3,
        _ => return Ok(None),
    };
    Ok(Some(ExactnessCmd {
        dim: Some(dim),
        ..Default::default()
    }))
}

fn variance_preset(name: &str) -> CliResult<Option<VarianceCmd>> {
    let (dim, rules, points) = match name {
        "variance-1d" => (
            1,
            vec![RuleId::Mc, RuleId::P0, RuleId::P1, RuleId::P3],
            vec![6, 12, 24, 48, 96],
        ),
        "variance-2d" => (
            2,
            vec![
                RuleId::Mc,
                RuleId::P0,
                RuleId::P1,
                RuleId::P3,
                RuleId::P1tri,
                RuleId::P2tri,
            ],
            vec![32, 100, 512, 2048, 8192],
        ),
        "variance-3d" => (
            3,
            vec![RuleId::Mc, RuleId::P0, RuleId::P1tet, RuleId::P2tet],
            vec![1755, 4160, 8125, 14040, 22295],
        ),
        _ => return Ok(None),
    };
    Ok(Some(VarianceCmd {
        rules: Some(rules),
        dim: Some(dim),
        points: Some(points),
        ..Default::default()
    }))
}

fn cmd_exactness(c: &ExactnessCmd) -> CliResult<Outcome> {
    let seed = c.common.seed.unwrap_or(DEFAULT_SEED);
    let trials = c.trials.unwrap_or(200);
    if trials == 0 {
        return Err(CliError::usage("--trials must be positive"));
    }
    let rules = c.rules.clone().unwrap_or_else(|| RuleId::ALL.to_vec());
    let dims: Vec<usize> = match c.dim {
        Some(d) if (1..=3).contains(&d) => vec![d],
        Some(d) => return Err(CliError::usage(format!("dimension {d} not in 1..=3"))),
        None => vec![1, 2, 3],
    };
    let mut reports = Vec::new();
    let mut stream_id = 0;
    for &d in &dims {
        for &id in &rules {
            if !id.supports_dim(d) {
                continue;
            }
            stream_id += 1;
            let rule = if id == RuleId::Mc {
                Rule::monte_carlo(d, 8)?
            } else {
                Rule::new(id, d)?
            };
            let mut rng = substream(seed, stream_id);
            reports.push(exactness_report(&rule, trials, &mut rng)?);
        }
    }
    if reports.is_empty() {
        return Err(CliError::usage("no rule matches the requested dimension"));
    }
    let passed = reports.iter().all(|r| r.passed);
    for r in &reports {
        eprintln!("{} {}D: {}", r.rule, r.dim, if r.passed { "pass" } else { "FAIL" });
    }
    let dir = out_dir(&c.common)?;
    write_json(
        &dir.join("exactness.json"),
        &json!({ "passed": passed, "reports": reports }),
    )?;
    Ok(Outcome {
        code: if passed { EXIT_OK } else { EXIT_FAILURE },
        out_dir: dir,
        manifest: manifest(
            "exactness",
            seed,
            &json!({ "preset": c.common.preset, "rules": rules, "dims": dims, "trials": trials }),
            &["exactness.json".into()],
            json!({ "passed": passed, "checked": reports.len() }),
        ),
    })
}

fn cmd_variance_study(c: &VarianceCmd) -> CliResult<Outcome> {
    let seed = c.common.seed.unwrap_or(DEFAULT_SEED);
    let dim = c.dim.unwrap_or(1);
    let points = c.points.clone().unwrap_or_default();
    if points.is_empty() {
        return Err(CliError::usage("the N grid (--points) is empty"));
    }
    let repetitions = c.repetitions.unwrap_or(1000);
    let rules = c
        .rules
        .clone()
        .unwrap_or_else(|| RuleId::for_dim(dim).into_iter().filter(|r| r.unbiased()).collect());
    let problem = drm::Problem::new(dim)?;
    let grid = Grid::Points(points);
    let mut studies = Vec::new();
    for (i, &id) in rules.iter().enumerate() {
        if !id.supports_dim(dim) {
            return Err(CliError::usage(format!("rule {id} is not defined in {dim}D")));
        }
        let study = stats::variance_scaling_study(
            id,
            dim,
            &grid,
            repetitions,
            seed ^ (i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15),
            |x| problem.loss_density(x),
        )?;
        for w in &study.warnings {
            eprintln!("warning: {id}: {w}");
        }
        eprintln!(
            "{id} {dim}D: slope {:.3} (reference {:.3})",
            study.fitted_slope, study.reference_exponent
        );
        studies.push(study);
    }
    let dir = out_dir(&c.common)?;
    write_text(&dir.join("variance.csv"), &stats::studies_to_csv(&studies))?;
    write_json(&dir.join("variance.json"), &studies)?;
    let slopes: serde_json::Map<String, serde_json::Value> = studies
        .iter()
        .map(|s| (s.rule.to_string(), json!(s.fitted_slope)))
        .collect();
    Ok(Outcome {
        code: EXIT_OK,
        out_dir: dir,
        manifest: manifest(
            "variance-study",
            seed,
            &json!({ "preset": c.common.preset, "rules": rules, "dim": dim, "points": grid, "repetitions": repetitions }),
            &["variance.csv".into(), "variance.json".into()],
            json!({ "slopes": slopes }),
        ),
    })
}

/// One run of a train preset.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PresetRun {
    pub label: String,
    pub dim: usize,
    pub source: NodeSource,
    pub iterations: usize,
}

/// Runs of a named train preset; `full` selects the long reference budgets.
pub fn train_preset(name: &str, full: bool) -> Option<Vec<PresetRun>> {
    let st = |rule, n| NodeSource::Stochastic { rule, n };
    let mk = |dim: usize, iterations: usize, entries: Vec<(&str, NodeSource)>| -> Vec<PresetRun> {
        entries
            .into_iter()
            .map(|(label, source)| PresetRun {
                label: label.to_string(),
                dim,
                source,
                iterations,
            })
            .collect()
    };
    let pick = |desk: usize, long: usize| if full { long } else { desk };
    let one_d = |points: [usize; 4]| {
        vec![
            ("mc", st(RuleId::Mc, points[0])),
            ("p0", st(RuleId::P0, points[1])),
            ("p1", st(RuleId::P1, points[2])),
            ("p3", st(RuleId::P3, points[3])),
        ]
    };
    Some(match name {
        // 6 points: mc 6, p0 6 cells, p1 3 cells, p3 2 cells
        "1d-poor" => mk(1, pick(20_000, 100_000), one_d([6, 6, 3, 2])),
        // 32 points: p3 uses 10 cells (30 points)
        "1d-moderate" => mk(1, pick(20_000, 25_000), one_d([32, 32, 16, 10])),
        // 252 points
        "1d-good" => mk(1, pick(10_000, 10_000), one_d([252, 252, 126, 84])),
        "bias-1d" => mk(
            1,
            pick(20_000, 50_000),
            vec![("p1", st(RuleId::P1, 32)), ("p1b", st(RuleId::P1b, 32))],
        ),
        "overfit-1d" => mk(1, 4000, vec![("midpoints", NodeSource::Midpoints { count: 20 })]),
        "2d-study" => mk(
            2,
            pick(5000, 20_000),
            vec![
                ("mc-128", st(RuleId::Mc, 128)),
                ("mc-2312", st(RuleId::Mc, 2312)),
                // 4² cells × 2 triangles × 4 points = 128; 17² × 2 × 4 = 2312
                ("p2tri-128", st(RuleId::P2tri, 4)),
                ("p2tri-2312", st(RuleId::P2tri, 17)),
            ],
        ),
        "3d-study" => mk(
            3,
            pick(2000, 20_000),
            vec![
                // 3³ cubes × 5 tetrahedra × 13 points = 1755
                ("p2tet-1755", st(RuleId::P2tet, 3)),
                ("mc-1755", st(RuleId::Mc, 1755)),
                ("mc-5320", st(RuleId::Mc, 5320)),
                ("mc-31000", st(RuleId::Mc, 31_000)),
            ],
        ),
        _ => return None,
    })
}

fn cmd_train(c: &TrainCmd) -> CliResult<Outcome> {
    let seed = c.common.seed.unwrap_or(DEFAULT_SEED);
    let runs = match &c.common.preset {
        Some(name) => {
            let mut runs =
                train_preset(name, c.full).ok_or_else(|| CliError::usage(format!("unknown preset {name:?}")))?;
            for r in &mut runs {
                if let Some(k) = c.iterations {
                    r.iterations = k;
                }
            }
            runs
        }
        None => {
            let dim = c.dim.unwrap_or(1);
            let source = match (c.midpoints, c.rule) {
                (Some(count), _) => NodeSource::Midpoints { count },
                (None, Some(rule)) => NodeSource::Stochastic {
                    rule,
                    n: c.n.ok_or_else(|| CliError::usage("--n is required with --rule"))?,
                },
                (None, None) => return Err(CliError::usage("give --rule and --n, --midpoints, or --preset")),
            };
            let label = source.label();
            vec![PresetRun {
                label,
                dim,
                source,
                iterations: c.iterations.unwrap_or([20_000, 5000, 2000][dim.clamp(1, 3) - 1]),
            }]
        }
    };

    let dir = out_dir(&c.common)?;
    let mut artifacts = Vec::new();
    let mut results = Vec::new();
    let mut code = EXIT_OK;
    for run in &runs {
        let mut cfg = TrainConfig::new(run.dim, run.source.clone(), run.iterations, seed);
        if let Some(v) = c.gamma0 {
            cfg.gamma0 = v;
        }
        if let Some(v) = c.gamma_f {
            cfg.gamma_f = v;
        }
        if let Some(v) = c.epsilon {
            cfg.epsilon = v;
        }
        if let Some(v) = c.eval_stride {
            cfg.eval_stride = v;
        }
        cfg.radial_database = c.database;
        eprintln!("training {} ({} iterations)", run.label, run.iterations);
        let out = drm::train(&cfg)?;
        let trace_name = format!("{}.trace.csv", run.label);
        let params_name = format!("{}.params.json", run.label);
        write_text(&dir.join(&trace_name), &out.trace.to_csv())?;
        out.params.save(&dir.join(&params_name))?;
        artifacts.push(trace_name);
        artifacts.push(params_name);
        if let TrainStatus::Diverged { iteration, reason, .. } = &out.trace.status {
            eprintln!("{}: diverged at iteration {iteration}: {reason}", run.label);
            code = EXIT_DIVERGED;
        }
        let last = out.trace.records.last();
        results.push(json!({
            "label": run.label,
            "dim": run.dim,
            "source": run.source,
            "iterations": run.iterations,
            "points": out.trace.points,
            "status": out.trace.status,
            "final_loss": last.map(|r| r.loss),
            "final_h1_error_pct": out.trace.final_h1_error_pct,
            "exact_loss_minimum": out.trace.exact_loss_minimum,
        }));
    }
    Ok(Outcome {
        code,
        out_dir: dir,
        manifest: manifest(
            "train",
            seed,
            &json!({ "preset": c.common.preset, "options": c, "runs": runs }),
            &artifacts,
            json!({ "runs": results }),
        ),
    })
}

fn cmd_cov_metrics(c: &CovCmd) -> CliResult<Outcome> {
    let seed = c.common.seed.unwrap_or(DEFAULT_SEED);
    let path = c
        .params
        .clone()
        .ok_or_else(|| CliError::usage("--params is required"))?;
    if !path.is_file() {
        return Err(CliError::usage(format!("parameter file {} not found", path.display())));
    }
    let params = NetworkParameters::load(&path)?;
    let rule = c.rule.ok_or_else(|| CliError::usage("--rule is required"))?;
    let n = c.n.ok_or_else(|| CliError::usage("--n is required"))?;
    let global = GlobalRule::new(rule, params.dim(), n)?;
    let metrics = stats::gradient_covariance_metrics(&params, &global, c.samples.unwrap_or(500), seed)?;
    if !metrics.converged {
        eprintln!("warning: power iteration did not converge; lambda_max is the best estimate");
    }
    let dir = out_dir(&c.common)?;
    write_json(&dir.join("cov_metrics.json"), &metrics)?;
    Ok(Outcome {
        code: EXIT_OK,
        out_dir: dir,
        manifest: manifest(
            "cov-metrics",
            seed,
            &json!({ "params": path, "dim": params.dim(), "rule": rule, "n": n, "samples": metrics.sample_count }),
            &["cov_metrics.json".into()],
            json!({ "points": global.points(), "metrics": metrics }),
        ),
    })
}
