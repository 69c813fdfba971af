//! Builds a scenario's flow, runs its checks in parallel and writes the
//! report bundle.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;

use ricci_core::conjugate_heat::kernel_flow;
use ricci_core::flow::evolve_ricci;
use ricci_core::snapshot::{density_snapshots, write_run, SliceSnapshot};

use crate::checks::{self, CheckOutput, Context};
use crate::config::{ConfigError, ScenarioConfig, CHECK_NAMES};
use crate::report::{Report, REPORT_FORMAT};

/// Environment variable holding the number of worker threads.
pub const WORKERS_ENV: &str = "RICCI_LAB_WORKERS";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("flow: {0}")]
    Flow(ricci_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("snapshots: {0}")]
    Snapshot(ricci_core::Error),
    #[error("{WORKERS_ENV}: {0}")]
    Workers(String),
}

#[derive(Debug)]
pub struct RunOutcome {
    pub report: Report,
    /// Per-check wall time, kept out of the report so reruns compare equal.
    pub timings: Vec<(String, Duration)>,
    pub flow_time: Duration,
    /// Scenario directory, when artifacts were written.
    pub dir: Option<PathBuf>,
}

fn conventions(cfg: &ScenarioConfig) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    m.insert("entropy".into(), "N and W vanish on Euclidean space; W-bar uses the (4 pi tau)^(-n/2) normalization".into());
    m.insert("scale".into(), format!("r = {}; lengths in units of r, times in units of r^2", cfg.r));
    m.insert("balls".into(), "closed geodesic balls; radial balls are centred at a pole".into());
    m.insert("kernel".into(), "delta data is a compact bump imposed at its Gaussian-equivalent age".into());
    m.insert("margins".into(), "margin >= -tolerance passes; margins are lhs - rhs for >= and rhs - lhs for <=".into());
    m
}

fn worker_pool() -> Result<rayon::ThreadPool, RunError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| RunError::Workers(format!("`{v}` is not a positive integer")))?;
        if n == 0 {
            return Err(RunError::Workers("worker count must be positive".into()));
        }
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| RunError::Workers(e.to_string()))
}

/// Runs every selected check of a scenario. Artifacts are written under
/// `out/<scenario>/` when `out` is given.
pub fn run_scenario(cfg: &ScenarioConfig, out: Option<&Path>) -> Result<RunOutcome, RunError> {
    cfg.validate()?;
    let start = Instant::now();
    let geometry = cfg.normalized_geometry();
    let span = cfg.normalized_flow();
    let (_, initial) = geometry.build(span.start).map_err(RunError::Flow)?;
    let flow = evolve_ricci(&initial, (span.start, span.end), span.policy).map_err(RunError::Flow)?;
    let flow_time = start.elapsed();
    let ctx = Context {
        cfg,
        flow: &flow,
        initial: &initial,
        policy: span.policy,
        tol: cfg.tolerance_profile.ledger(),
    };
    let names: Vec<&str> = CHECK_NAMES.iter().copied().filter(|c| cfg.runs(c)).collect();
    let pool = worker_pool()?;
    let results: Vec<(CheckOutput, Duration)> = pool.install(|| {
        names
            .par_iter()
            .map(|name| {
                let t = Instant::now();
                let out = checks::run(name, &ctx);
                (out, t.elapsed())
            })
            .collect()
    });
    let timings = names
        .iter()
        .zip(&results)
        .map(|(n, (_, d))| (n.to_string(), *d))
        .collect();
    let checks: Vec<_> = results.iter().map(|(o, _)| o.report.clone()).collect();
    let report = Report {
        format: REPORT_FORMAT.into(),
        scenario: cfg.name.clone(),
        input_hash: cfg.input_hash(),
        seed: cfg.seed,
        tolerance_profile: cfg.tolerance_profile.as_str().into(),
        tolerances: ctx.tol,
        conventions: conventions(cfg),
        fault_inject: cfg.fault_inject.clone(),
        verdict: Report::overall(&checks),
        checks,
    };
    let mut outcome = RunOutcome {
        report,
        timings,
        flow_time,
        dir: None,
    };
    if let Some(out) = out {
        let tables: Vec<_> = results.into_iter().flat_map(|(o, _)| o.tables).collect();
        outcome.dir = Some(write_bundle(out, cfg, &ctx, &outcome, &tables)?);
    }
    Ok(outcome)
}

fn write(path: &Path, text: &str) -> Result<(), RunError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| RunError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, text).map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_bundle(
    out: &Path,
    cfg: &ScenarioConfig,
    ctx: &Context,
    outcome: &RunOutcome,
    tables: &[checks::Table],
) -> Result<PathBuf, RunError> {
    let dir = out.join(&cfg.name);
    write(&dir.join("report.json"), &outcome.report.to_json())?;
    let mut timings = format!("flow {:.3}\n", outcome.flow_time.as_secs_f64());
    for (name, d) in &outcome.timings {
        timings.push_str(&format!("{name} {:.3}\n", d.as_secs_f64()));
    }
    write(&dir.join("timings.txt"), &timings)?;
    for t in tables {
        write(&dir.join("tables").join(&t.name), &t.csv)?;
    }
    write(&out.join("inputs").join(format!("{}.toml", outcome.report.input_hash)), &cfg.canonical())?;
    write_snapshots(&dir.join("snapshots"), cfg, ctx)?;
    Ok(dir)
}

/// Metric slices at a handful of times and the first basepoint's kernel.
fn write_snapshots(dir: &Path, cfg: &ScenarioConfig, ctx: &Context) -> Result<(), RunError> {
    let flow = ctx.flow;
    let mut times = vec![flow.start(), -1.0, 0.0, flow.end()];
    times.retain(|t| flow.contains(*t));
    times.sort_by(f64::total_cmp);
    times.dedup();
    let metric: Vec<SliceSnapshot> = times
        .iter()
        .map(|&t| flow.slice_at(t).map(|s| SliceSnapshot::metric(&s)))
        .collect::<Result<_, _>>()
        .map_err(RunError::Snapshot)?;
    write_run(dir, "metric", &metric, None).map_err(RunError::Snapshot)?;
    let x0 = cfg.basepoints[0];
    if flow.contains(-1.0) && flow.contains(0.0) {
        let record = [-1.0, -0.5, -0.25];
        let kernel = kernel_flow(flow, x0, 0.0, -1.0, &record, ctx.conjugate()).map_err(RunError::Snapshot)?;
        let snaps = density_snapshots(&kernel, &record).map_err(RunError::Snapshot)?;
        write_run(dir, "kernel", &snaps, Some((x0, 0.0))).map_err(RunError::Snapshot)?;
    }
    Ok(())
}
