//! Subcommands. Each takes a parsed configuration, writes its files under
//! the output directory and returns the JSON it recorded as meta.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use loewner_core::driver::split_seed;
use loewner_core::forward::{sle_adaptive, solve, solve_naive};
use loewner_core::inverse::{extract, sanitize, CurveSource, Repair};
use loewner_core::stats::{common_grid, estimate_kappa_with};
use loewner_core::{AdaptiveConfig, BlockParams, DrivingPath, KappaReport, SlitKind};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::bench::BenchSpec;
use crate::error::{CliError, Result};
use crate::io;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Vertical,
    Tilted,
}

impl From<Kind> for SlitKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Vertical => SlitKind::Vertical,
            Kind::Tilted => SlitKind::Tilted,
        }
    }
}

#[derive(Args, Clone, Debug, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct BlockArgs {
    /// Series truncation order n.
    #[arg(long = "order-n", env = "LOEWNER_ORDER_N", default_value_t = 12)]
    pub order_n: usize,
    /// Gate multiplier L; `inf` disables series evaluation.
    #[arg(long = "gate-L", env = "LOEWNER_GATE_L", default_value_t = 4.0)]
    pub gate_l: f64,
    /// Block size b [default: ceil(0.2 sqrt(N))].
    #[arg(long = "block-b", env = "LOEWNER_BLOCK_B")]
    pub block_b: Option<usize>,
    /// Nested composition of every map, no blocks.
    #[arg(long, env = "LOEWNER_NAIVE")]
    pub naive: bool,
}

impl BlockArgs {
    pub fn params(&self) -> Result<Option<BlockParams>> {
        if self.order_n < 2 {
            return invalid(format!("--order-n must be at least 2, got {}", self.order_n));
        }
        if !(self.gate_l > 1.0) {
            return invalid(format!("--gate-L must exceed 1, got {}", self.gate_l));
        }
        if self.block_b == Some(0) {
            return invalid("--block-b must be positive".into());
        }
        if self.naive {
            return Ok(None);
        }
        Ok(Some(BlockParams {
            block_size: self.block_b,
            order: self.order_n,
            gate: self.gate_l,
        }))
    }

    fn resolved(&self, steps: usize) -> Value {
        let b = self.params().ok().flatten().map(|p| p.resolve_block_size(steps));
        json!({
            "order_n": self.order_n,
            "gate_L": self.gate_l,
            "block_b": b,
            "naive": self.naive,
        })
    }
}

fn invalid<T>(msg: String) -> Result<T> {
    Err(CliError::Invalid(msg))
}

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa >= 0.0 && kappa.is_finite() {
        Ok(())
    } else {
        invalid(format!("--kappa must be finite and nonnegative, got {kappa}"))
    }
}

fn check_positive(flag: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        invalid(format!("{flag} must be positive, got {x}"))
    }
}

fn file_in(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

#[derive(Args, Clone, Debug, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct TraceConfig {
    #[arg(long, env = "LOEWNER_KAPPA")]
    pub kappa: f64,
    /// Final capacity time.
    #[arg(long = "T", env = "LOEWNER_T", default_value_t = 1.0)]
    pub t_max: f64,
    /// Bound on consecutive point distance [default: 0.01 sqrt(2T)].
    #[arg(long, env = "LOEWNER_EPS")]
    pub eps: Option<f64>,
    /// Initial number of steps.
    #[arg(long = "N", env = "LOEWNER_N", default_value_t = 64)]
    pub steps: usize,
    #[arg(long, env = "LOEWNER_MAX_ROUNDS", default_value_t = 64)]
    pub max_rounds: usize,
    #[arg(long, env = "LOEWNER_MAX_POINTS", default_value_t = 2_000_000)]
    pub max_points: usize,
    #[arg(long, value_enum, env = "LOEWNER_KIND", default_value_t = Kind::Vertical)]
    pub kind: Kind,
    #[arg(long, env = "LOEWNER_SEED", default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub blocks: BlockArgs,
    /// Output directory.
    #[arg(long, env = "LOEWNER_OUT", default_value = ".")]
    pub out: PathBuf,
}

impl TraceConfig {
    pub fn adaptive(&self) -> Result<AdaptiveConfig> {
        check_kappa(self.kappa)?;
        check_positive("--T", self.t_max)?;
        let mut cfg = AdaptiveConfig::new(self.kappa, self.t_max, self.seed);
        if let Some(eps) = self.eps {
            check_positive("--eps", eps)?;
            cfg.eps = eps;
        }
        if self.steps < 2 {
            return invalid(format!("--N must be at least 2, got {}", self.steps));
        }
        cfg.initial_steps = self.steps;
        cfg.max_rounds = self.max_rounds;
        cfg.max_points = self.max_points;
        cfg.kind = self.kind.into();
        cfg.blocks = self.blocks.params()?;
        Ok(cfg)
    }
}

/// Adaptive SLE trace: `trace.csv`, `driving.csv` and `meta.json`.
///
/// Files are written even when a cap trips; the meta then says
/// `"compliant": false` and the command fails with exit code 3.
pub fn cmd_trace(cfg: &TraceConfig) -> Result<Value> {
    let adaptive = cfg.adaptive()?;
    io::ensure_dir(&cfg.out)?;
    let run = sle_adaptive(&adaptive)?;
    let trace_path = file_in(&cfg.out, "trace.csv");
    let driving_path = file_in(&cfg.out, "driving.csv");
    io::write_trace(io::create(&trace_path)?, &run.trace, &trace_path.display().to_string())?;
    io::write_driving(io::create(&driving_path)?, &run.path, &driving_path.display().to_string())?;
    let mut config = serde_json::to_value(cfg)?;
    config["eps"] = json!(adaptive.eps);
    config["blocks"] = cfg.blocks.resolved(run.path.steps());
    let meta = json!({
        "command": "trace",
        "config": config,
        "files": ["trace.csv", "driving.csv"],
        "points": run.trace.len(),
        "rounds": run.rounds,
        "history": run.history,
        "max_gap": run.trace.max_gap(),
        "compliant": run.compliant,
    });
    io::write_json(&file_in(&cfg.out, "meta.json"), &meta)?;
    if !run.compliant {
        return Err(CliError::NotConverged(format!(
            "refinement capped after {} rounds with {} points; max gap {} > eps {}",
            run.rounds,
            run.trace.len(),
            run.trace.max_gap(),
            adaptive.eps
        )));
    }
    Ok(meta)
}

#[derive(Args, Clone, Debug, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct ForwardConfig {
    /// Driving function CSV with columns `t,u`.
    #[arg(long = "in", env = "LOEWNER_IN")]
    pub input: PathBuf,
    #[arg(long, value_enum, env = "LOEWNER_KIND", default_value_t = Kind::Vertical)]
    pub kind: Kind,
    #[command(flatten)]
    pub blocks: BlockArgs,
    /// Also run the naive solver and report the largest point discrepancy.
    #[arg(long)]
    pub compare: bool,
    #[arg(long, env = "LOEWNER_OUT", default_value = ".")]
    pub out: PathBuf,
}

/// Trace of a driving function read from CSV: `trace.csv` and `meta.json`.
pub fn cmd_forward(cfg: &ForwardConfig) -> Result<Value> {
    let params = cfg.blocks.params()?;
    let name = cfg.input.display().to_string();
    let path = io::read_driving(io::open(&cfg.input)?, &name)?;
    let kind = SlitKind::from(cfg.kind);
    let trace = solve(&path, kind, params)?;
    io::ensure_dir(&cfg.out)?;
    let trace_path = file_in(&cfg.out, "trace.csv");
    io::write_trace(io::create(&trace_path)?, &trace, &trace_path.display().to_string())?;
    let mut config = serde_json::to_value(cfg)?;
    config["blocks"] = cfg.blocks.resolved(path.steps());
    let mut meta = json!({
        "command": "forward",
        "config": config,
        "files": ["trace.csv"],
        "points": trace.len(),
        "max_gap": trace.max_gap(),
    });
    if cfg.compare {
        let naive = solve_naive(&path, kind)?;
        let diff = naive
            .points
            .iter()
            .zip(&trace.points)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        meta["naive_max_diff"] = json!(diff);
        meta["diameter"] = json!(naive.diameter());
    }
    io::write_json(&file_in(&cfg.out, "meta.json"), &meta)?;
    Ok(meta)
}

#[derive(Args, Clone, Debug, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct ExtractConfig {
    /// Curve CSV with columns `re,im` and optionally `t`.
    #[arg(long = "in", env = "LOEWNER_IN")]
    pub input: PathBuf,
    #[arg(long, value_enum, env = "LOEWNER_KIND", default_value_t = Kind::Vertical)]
    pub kind: Kind,
    #[command(flatten)]
    pub blocks: BlockArgs,
    /// Height, relative to the curve scale, that points on the real axis
    /// are lifted to.
    #[arg(long, env = "LOEWNER_LIFT", default_value_t = loewner_core::inverse::DEFAULT_LIFT)]
    pub lift: f64,
    #[arg(long, env = "LOEWNER_OUT", default_value = ".")]
    pub out: PathBuf,
}

fn repairs_json(repairs: &[Repair]) -> Value {
    let lifted: Vec<usize> = repairs
        .iter()
        .filter_map(|r| match r {
            Repair::Lifted { index, .. } => Some(*index),
            _ => None,
        })
        .collect();
    let dropped: Vec<usize> = repairs
        .iter()
        .filter_map(|r| match r {
            Repair::Dropped { index } => Some(*index),
            _ => None,
        })
        .collect();
    json!({ "lifted": lifted, "dropped": dropped })
}

/// Driving function of a curve read from CSV: `driving.csv` and
/// `meta.json`.
pub fn cmd_extract(cfg: &ExtractConfig) -> Result<Value> {
    let params = cfg.blocks.params()?;
    check_positive("--lift", cfg.lift)?;
    let name = cfg.input.display().to_string();
    let (points, _) = io::read_curve(io::open(&cfg.input)?, &name)?;
    let (curve, repairs) = sanitize(points, cfg.lift, CurveSource::File)?;
    let ex = extract(&curve, cfg.kind.into(), params)?;
    io::ensure_dir(&cfg.out)?;
    let driving_path = file_in(&cfg.out, "driving.csv");
    io::write_driving(io::create(&driving_path)?, &ex.path, &driving_path.display().to_string())?;
    let mut config = serde_json::to_value(cfg)?;
    config["blocks"] = cfg.blocks.resolved(curve.len().saturating_sub(1));
    let meta = json!({
        "command": "extract",
        "config": config,
        "files": ["driving.csv"],
        "points": curve.len(),
        "input_repairs": repairs_json(&repairs),
        "lifted_images": ex.lifted,
        "merged_steps": ex.merged,
        "final_time": ex.path.final_time(),
    });
    io::write_json(&file_in(&cfg.out, "meta.json"), &meta)?;
    Ok(meta)
}

#[derive(Args, Clone, Debug, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct KappaConfig {
    /// Generate SLE(kappa) traces; ignored with `--in`.
    #[arg(long, env = "LOEWNER_KAPPA", default_value_t = 8.0 / 3.0)]
    pub kappa: f64,
    #[arg(long = "T", env = "LOEWNER_T", default_value_t = 1.0)]
    pub t_max: f64,
    #[arg(long, env = "LOEWNER_EPS")]
    pub eps: Option<f64>,
    /// Number of generated traces.
    #[arg(long, env = "LOEWNER_PATHS", default_value_t = 200)]
    pub paths: usize,
    /// Number of grid times for the variance fit.
    #[arg(long, env = "LOEWNER_GRID", default_value_t = 100)]
    pub grid: usize,
    /// Slit kind of the generated traces.
    #[arg(long, value_enum, env = "LOEWNER_KIND", default_value_t = Kind::Vertical)]
    pub kind: Kind,
    /// Slit kind used to extract driving functions.
    #[arg(long, value_enum, env = "LOEWNER_EXTRACT_KIND", default_value_t = Kind::Vertical)]
    pub extract_kind: Kind,
    #[arg(long, env = "LOEWNER_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Worker threads.
    #[arg(long, env = "LOEWNER_JOBS", default_value_t = 1)]
    pub jobs: usize,
    /// Bootstrap resamples for the standard error.
    #[arg(long, env = "LOEWNER_RESAMPLES", default_value_t = 200)]
    pub resamples: usize,
    /// Directory of curve CSV files to analyse instead of generating.
    #[arg(long = "in", env = "LOEWNER_IN")]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub blocks: BlockArgs,
    #[arg(long, env = "LOEWNER_OUT", default_value = ".")]
    pub out: PathBuf,
}

/// [`KappaReport`] in JSON form.
pub fn kappa_json(r: &KappaReport) -> Value {
    let d = &r.diagnostics;
    json!({
        "kappa_hat": r.kappa_hat,
        "stderr": r.stderr,
        "r_squared": r.r_squared,
        "degenerate": r.degenerate,
        "n_paths": r.n_paths,
        "n_times": r.n_times,
        "diagnostics": {
            "lag1_autocorr": d.lag1_autocorr,
            "skewness": d.skewness,
            "excess_kurtosis": d.excess_kurtosis,
            "ks": d.ks,
            "increments": d.increments,
            "brownian_like": d.brownian_like,
        },
    })
}

const KAPPA_STREAM: u64 = 0x6b61_7070_615f_7374;

/// Driving functions for the ensemble, in input order, plus the number of
/// generated traces whose refinement was capped.
fn ensemble(cfg: &KappaConfig, params: Option<BlockParams>) -> Result<(Vec<DrivingPath>, usize, Value)> {
    let extract_kind = SlitKind::from(cfg.extract_kind);
    if let Some(dir) = &cfg.input {
        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|source| CliError::Io {
                path: dir.display().to_string(),
                source,
            })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        files.sort();
        let results: Vec<Result<(DrivingPath, Value)>> = files
            .par_iter()
            .map(|f| {
                let name = f.display().to_string();
                let (points, _) = io::read_curve(io::open(f)?, &name)?;
                let (curve, repairs) = sanitize(points, loewner_core::inverse::DEFAULT_LIFT, CurveSource::File)?;
                let ex = extract(&curve, extract_kind, params)?;
                Ok((ex.path, json!({ "file": name, "repairs": repairs_json(&repairs) })))
            })
            .collect();
        let mut paths = Vec::with_capacity(results.len());
        let mut notes = Vec::new();
        for r in results {
            let (p, n) = r?;
            paths.push(p);
            notes.push(n);
        }
        return Ok((paths, 0, Value::Array(notes)));
    }
    check_kappa(cfg.kappa)?;
    check_positive("--T", cfg.t_max)?;
    let mut adaptive = AdaptiveConfig::new(cfg.kappa, cfg.t_max, cfg.seed);
    if let Some(eps) = cfg.eps {
        check_positive("--eps", eps)?;
        adaptive.eps = eps;
    }
    adaptive.kind = cfg.kind.into();
    adaptive.blocks = params;
    let results: Vec<Result<(DrivingPath, bool)>> = (0..cfg.paths)
        .into_par_iter()
        .map(|i| {
            let mut run_cfg = adaptive;
            run_cfg.seed = split_seed(cfg.seed, KAPPA_STREAM, i as u64);
            let run = sle_adaptive(&run_cfg)?;
            let curve = loewner_core::CurveInput::new(run.trace.points, CurveSource::Trace)?;
            let ex = extract(&curve, extract_kind, params)?;
            Ok((ex.path, run.compliant))
        })
        .collect();
    let mut paths = Vec::with_capacity(results.len());
    let mut capped = 0;
    for r in results {
        let (p, ok) = r?;
        capped += usize::from(!ok);
        paths.push(p);
    }
    Ok((paths, capped, json!({ "eps": adaptive.eps })))
}

/// Ensemble κ estimate: `kappa.json`, also returned for printing.
pub fn cmd_kappa(cfg: &KappaConfig) -> Result<Value> {
    let params = cfg.blocks.params()?;
    if cfg.jobs == 0 {
        return invalid("--jobs must be positive".into());
    }
    if cfg.input.is_none() && cfg.paths < 2 {
        return invalid(format!("--paths must be at least 2, got {}", cfg.paths));
    }
    if cfg.grid == 0 {
        return invalid("--grid must be positive".into());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| CliError::Invalid(format!("--jobs: {e}")))?;
    let (paths, capped, source) = pool.install(|| ensemble(cfg, params))?;
    let grid = common_grid(&paths, cfg.grid)?;
    let report = estimate_kappa_with(&paths, &grid, cfg.resamples, cfg.seed)?;
    let meta = json!({
        "command": "kappa",
        "config": serde_json::to_value(cfg)?,
        "source": source,
        "capped_traces": capped,
        "report": kappa_json(&report),
    });
    io::ensure_dir(&cfg.out)?;
    io::write_json(&file_in(&cfg.out, "kappa.json"), &meta)?;
    if capped > 0 {
        return Err(CliError::NotConverged(format!("{capped} traces hit a refinement cap")));
    }
    Ok(meta)
}

#[derive(Args, Clone, Debug, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct BenchConfig {
    #[arg(long, value_enum, env = "LOEWNER_KIND", default_value_t = Kind::Vertical)]
    pub kind: Kind,
    #[arg(long, env = "LOEWNER_KAPPA", default_value_t = 8.0 / 3.0)]
    pub kappa: f64,
    #[arg(long, env = "LOEWNER_SEED", default_value_t = 1)]
    pub seed: u64,
    /// Repetitions per timing; the median is kept.
    #[arg(long, env = "LOEWNER_REPS", default_value_t = 5)]
    pub reps: usize,
    /// Step counts for the naive solvers.
    #[arg(long, value_delimiter = ',', default_value = "1000,2000,4000,8000")]
    pub naive_sizes: Vec<usize>,
    /// Step counts for the blocked per-point forward cost.
    #[arg(long, value_delimiter = ',', default_value = "1000,10000,100000")]
    pub forward_sizes: Vec<usize>,
    /// Step counts for the blocked inverse cost.
    #[arg(long, value_delimiter = ',', default_value = "2000,10000,50000")]
    pub inverse_sizes: Vec<usize>,
    /// Step count for the naive-versus-blocked speedups.
    #[arg(long = "N", env = "LOEWNER_N", default_value_t = 10_000)]
    pub steps: usize,
    #[command(flatten)]
    pub blocks: BlockArgs,
    #[arg(long, env = "LOEWNER_OUT", default_value = ".")]
    pub out: PathBuf,
}

/// Timing matrices and slope fits: `bench.json`.
pub fn cmd_bench(cfg: &BenchConfig) -> Result<Value> {
    check_kappa(cfg.kappa)?;
    let Some(params) = cfg.blocks.params()? else {
        return invalid("bench always compares against the naive solvers; drop --naive".into());
    };
    for (flag, sizes) in [
        ("--naive-sizes", &cfg.naive_sizes),
        ("--forward-sizes", &cfg.forward_sizes),
        ("--inverse-sizes", &cfg.inverse_sizes),
    ] {
        if sizes.len() < 2 || sizes.iter().any(|&n| n < 2) {
            return invalid(format!("{flag} needs at least two sizes of 2 or more"));
        }
    }
    let spec = BenchSpec {
        kappa: cfg.kappa,
        kind: cfg.kind.into(),
        seed: cfg.seed,
        reps: cfg.reps,
        params,
        naive_sizes: cfg.naive_sizes.clone(),
        forward_sizes: cfg.forward_sizes.clone(),
        inverse_sizes: cfg.inverse_sizes.clone(),
        speedup_steps: cfg.steps,
        ..BenchSpec::default()
    };
    let report = spec.run()?;
    let meta = json!({
        "command": "bench",
        "config": serde_json::to_value(cfg)?,
        "report": report,
    });
    io::ensure_dir(&cfg.out)?;
    io::write_json(&file_in(&cfg.out, "bench.json"), &meta)?;
    Ok(meta)
}
