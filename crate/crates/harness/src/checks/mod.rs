//! One named check per inequality, each owning its inputs.

mod almost_mono;
mod ancient;
mod entropy;
mod harnack;
mod maxprinciple;
mod theorems;
mod transport;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use ricci_core::conjugate_heat::ConjugateOptions;
use ricci_core::entropy::entropy_curve;
use ricci_core::flow::{evolve_ricci, FlowSpacetime, StepPolicy};
use ricci_core::geometry::{MetricSlice, ModelKind, Point};
use ricci_core::lsi::MuOptions;
use ricci_core::Error;

use crate::config::{ScenarioConfig, TerminalData};
use crate::report::CheckReport;
use crate::tolerances::Tolerances;

/// A CSV artifact produced by a check.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub csv: String,
}

#[derive(Clone, Debug)]
pub struct CheckOutput {
    pub report: CheckReport,
    pub tables: Vec<Table>,
}

impl From<CheckReport> for CheckOutput {
    fn from(report: CheckReport) -> Self {
        CheckOutput {
            report,
            tables: Vec::new(),
        }
    }
}

/// Shared, read-only inputs of every check in a scenario.
pub struct Context<'a> {
    pub cfg: &'a ScenarioConfig,
    pub flow: &'a FlowSpacetime,
    /// Initial slice of the flow, for re-evolving at a finer step.
    pub initial: &'a MetricSlice,
    pub policy: StepPolicy,
    pub tol: Tolerances,
}

impl Context<'_> {
    pub fn n(&self) -> usize {
        self.flow.dim()
    }

    pub fn kind(&self) -> ModelKind {
        self.flow.kind()
    }

    pub fn conjugate(&self) -> &ConjugateOptions {
        &self.cfg.solver.conjugate
    }

    pub fn mu_options(&self) -> MuOptions {
        MuOptions {
            seed: self.cfg.seed.wrapping_add(self.cfg.solver.mu.seed),
            ..self.cfg.solver.mu.clone()
        }
    }

    /// Deterministic generator for one stream of one check.
    pub fn rng(&self, check: &str, stream: u64) -> ChaCha8Rng {
        let digest = Sha256::digest(check.as_bytes());
        let mut tag = [0u8; 8];
        tag.copy_from_slice(&digest[..8]);
        ChaCha8Rng::seed_from_u64(self.cfg.seed ^ u64::from_le_bytes(tag) ^ stream.rotate_left(32))
    }

    /// `N_{x,t}(τ)`, shifted by +1 when the check is under fault injection.
    pub fn nash(&self, check: &str, x: Point, t: f64, tau: f64) -> Result<f64, Error> {
        let curve = entropy_curve(self.flow, x, t, &[tau], self.conjugate())?;
        Ok(curve.nash[0] + self.fault(check))
    }

    pub fn fault(&self, check: &str) -> f64 {
        if self.cfg.faulty(check) {
            1.0
        } else {
            0.0
        }
    }

    /// The same flow evolved with its base step divided by `factor`.
    pub fn refined_flow(&self, factor: f64) -> Result<FlowSpacetime, Error> {
        let policy = StepPolicy {
            dt: self.policy.dt / factor,
            ..self.policy
        };
        evolve_ricci(self.initial, (self.flow.start(), self.flow.requested_end()), policy)
    }

    pub fn covers(&self, a: f64, b: f64) -> bool {
        self.flow.contains(a) && self.flow.contains(b)
    }
}

pub fn run(name: &str, ctx: &Context) -> CheckOutput {
    let out = match name {
        "entropy_calibration" => entropy::calibration(ctx),
        "entropy_monotonicity" => entropy::monotonicity(ctx),
        "nash_identity" => entropy::identity(ctx),
        "max_principle" => maxprinciple::check(ctx),
        "transport" => transport::check(ctx),
        "main_theorem" => theorems::main_theorem(ctx),
        "harnack" => harnack::check(ctx),
        "pstar_corollary" => theorems::pstar_corollary(ctx),
        "local_sobolev" => theorems::local_sobolev(ctx),
        "noncollapse_improving" => theorems::noncollapse_improving(ctx),
        "almost_mono" => almost_mono::check(ctx),
        "ancient_sobolev" => ancient::check(ctx),
        other => Ok(CheckReport::failed(other, "unknown check").into()),
    };
    let mut out = out.unwrap_or_else(|e| aborted(name, e).into());
    out.report = out.report.finish(&ctx.cfg.input_hash());
    out
}

/// A check that could not complete: unmet preconditions skip it, anything
/// else fails it.
fn aborted(name: &str, e: Error) -> CheckReport {
    match e {
        Error::Precondition(m) => CheckReport::skipped(name, format!("precondition: {m}")),
        other => CheckReport::failed(name, format!("error: {other}")),
    }
}

/// Index of the node carrying a basepoint's values.
pub fn node_of(slice: &MetricSlice, p: Point) -> usize {
    match p {
        Point::North => 0,
        Point::South => slice.len() - 1,
        Point::Node(i) => i,
    }
}

/// File-name-safe label of a point.
pub fn tag(p: Point) -> String {
    p.label().replace(':', "-")
}

/// Unit-mass terminal data on a slice.
pub fn terminal_field(slice: &MetricSlice, data: &TerminalData) -> Result<Vec<f64>, Error> {
    let raw: Vec<f64> = if let Some(tg) = slice.grid().torus() {
        (0..slice.len())
            .map(|idx| {
                let (x, y) = tg.coords(idx);
                let phase: f64 = data
                    .modes
                    .iter()
                    .map(|m| {
                        let arg = 2.0
                            * std::f64::consts::PI
                            * (m.kx as f64 * x / tg.lx + m.ky as f64 * y / tg.ly)
                            + m.phase;
                        m.amplitude * arg.sin()
                    })
                    .sum();
                phase.exp()
            })
            .collect()
    } else {
        let d = slice.distances_from(Point::North)?;
        d.iter()
            .map(|r| {
                data.shells
                    .iter()
                    .map(|s| s.weight * (-(r - s.center).powi(2) / (s.width * s.width)).exp())
                    .sum()
            })
            .collect()
    };
    let mass = slice.integrate(&raw)?;
    if !(mass > 0.0) {
        return Err(Error::InvalidArgument("terminal data has no mass".into()));
    }
    Ok(raw.iter().map(|u| u / mass).collect())
}

fn fmt_time(t: f64) -> String {
    format!("{t}").replace('-', "m").replace('.', "p")
}
