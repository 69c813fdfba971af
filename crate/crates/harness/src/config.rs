//! Scenario configuration files.
//!
//! Geometry and flow span are given in physical units and divided by the
//! declared scale `r` (lengths by `r`, times by `r²`) before any check runs.
//! Every other time or length in a scenario is already in units of `r`.

use serde::{Deserialize, Serialize};

use ricci_core::conjugate_heat::ConjugateOptions;
use ricci_core::flow::StepPolicy;
use ricci_core::geometry::{ConformalMode, GeometryModel, ModelKind, Point};
use ricci_core::lsi::{MuOptions, NuOptions};

use crate::tolerances::ToleranceProfile;

/// Names accepted in `checks` and `fault_inject`.
pub const CHECK_NAMES: [&str; 12] = [
    "entropy_calibration",
    "entropy_monotonicity",
    "nash_identity",
    "max_principle",
    "transport",
    "main_theorem",
    "harnack",
    "pstar_corollary",
    "local_sobolev",
    "noncollapse_improving",
    "almost_mono",
    "ancient_sobolev",
];

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerance_profile: ToleranceProfile,
    /// Declared parabolic scale.
    #[serde(default = "one")]
    pub r: f64,
    pub geometry: GeometryModel,
    pub flow: FlowSpan,
    pub basepoints: Vec<Point>,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub constants: Constants,
    pub theorem: TheoremParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identity: Option<IdentityParams>,
    #[serde(default)]
    pub transport: TransportParams,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub harnack: Vec<HarnackConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pstar: Option<PStarParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noncollapse: Option<NoncollapseParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub almost_mono: Option<AlmostMonoParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ancient: Option<AncientParams>,
    /// Subset of checks to run; empty runs all.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<String>,
    /// Checks whose Nash entropies are deliberately shifted by +1.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fault_inject: Vec<String>,
    /// Output directory; not part of the input hash.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSpan {
    pub start: f64,
    pub end: f64,
    #[serde(default)]
    pub policy: StepPolicy,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOptions {
    #[serde(default)]
    pub mu: MuOptions,
    #[serde(default)]
    pub nu: NuOptions,
    #[serde(default)]
    pub conjugate: ConjugateOptions,
}

/// Dimensional constants left unspecified by the inequalities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constants {
    /// Sobolev constant `c(n)`; defaults to the sharp constant with 10% slack.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sobolev_c: Option<f64>,
    /// `C(n)` in the volume-ratio bound on `ν`.
    #[serde(default = "default_volume_c")]
    pub volume_c: f64,
    /// `c₀(n)` in `κ = exp(ν₀ − c₀)`; defaults to the cutoff-bump value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff_c0: Option<f64>,
    /// Allowance for `−N(1)` inside `C(n, A)`.
    #[serde(default = "default_nash_allowance")]
    pub nash_allowance: f64,
}

fn default_volume_c() -> f64 {
    30.0
}

fn default_nash_allowance() -> f64 {
    1.0
}

impl Default for Constants {
    fn default() -> Self {
        Constants {
            sobolev_c: None,
            volume_c: default_volume_c(),
            cutoff_c0: None,
            nash_allowance: default_nash_allowance(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoremParams {
    /// `(A, τ)` pairs for the local `ν` lower bound.
    pub pairs: Vec<[f64; 2]>,
    #[serde(default = "default_random")]
    pub random_functions: usize,
}

fn default_random() -> usize {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationParams {
    pub taus: Vec<f64>,
    pub mu_radius: f64,
    pub mu_tau: f64,
}

/// Terminal data for a conjugate heat solve: a sum of radial Gaussian shells
/// on radial models, `exp(Σ modes)` on the torus.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerminalData {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub shells: Vec<Shell>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub modes: Vec<ConformalMode>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Shell {
    pub center: f64,
    pub width: f64,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentityParams {
    pub tau0: f64,
    pub terminal: TerminalData,
    /// Solve from this time down to `start`.
    #[serde(default)]
    pub terminal_time: f64,
    pub start: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportParams {
    /// Gaps `t − s` for the `Hₙ`-centre bound.
    #[serde(default)]
    pub gaps: Vec<f64>,
    /// Gaps for the flat second-moment check.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub variance_gaps: Vec<f64>,
    /// `A` values for the concentration bound.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub concentration: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ladder: Option<LadderParams>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderParams {
    pub x1: Point,
    pub t1: f64,
    pub x2: Point,
    pub t2: f64,
    pub times: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarnackConfig {
    pub x1: Point,
    pub t1: f64,
    pub x2: Point,
    pub t2: f64,
    pub s: f64,
    pub t_star: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PStarParams {
    pub a: f64,
    pub tau: f64,
    /// Candidate times in `[0, A²]`.
    pub times: Vec<f64>,
    pub points: Vec<Point>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoncollapseParams {
    pub a: f64,
    /// Radii of the sub-balls, as fractions of `A`.
    #[serde(default = "default_fractions")]
    pub fractions: Vec<f64>,
}

fn default_fractions() -> Vec<f64> {
    vec![0.25, 0.5, 1.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlmostMonoParams {
    pub a: f64,
    pub tau: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AncientParams {
    /// Increasing scales for the entropy curve, each double the previous.
    pub taus: Vec<f64>,
    /// Times at which `ν(g_t)` is evaluated.
    pub times: Vec<f64>,
    /// Largest scale for `ν`; defaults to `a(t)²` on the sphere.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_max: Option<f64>,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let de = toml::Deserializer::new(text);
        let cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let message = e.inner().message().trim().to_string();
            ConfigError::Schema {
                path: if path.is_empty() || path == "." { "<root>".into() } else { path },
                message,
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario configs serialize")
    }

    /// The canonical text the input hash is computed from.
    pub fn canonical(&self) -> String {
        let mut c = self.clone();
        c.output = None;
        c.to_toml()
    }

    pub fn input_hash(&self) -> String {
        crate::report::sha256_hex(self.canonical().as_bytes())
    }

    pub fn runs(&self, check: &str) -> bool {
        self.checks.is_empty() || self.checks.iter().any(|c| c == check)
    }

    pub fn faulty(&self, check: &str) -> bool {
        self.fault_inject.iter().any(|c| c == check)
    }

    /// Geometry with lengths divided by `r`.
    pub fn normalized_geometry(&self) -> GeometryModel {
        let mut g = self.geometry.clone();
        let r = self.r;
        g.radius = g.radius.map(|x| x / r);
        g.r_max = g.r_max.map(|x| x / r);
        g.periods = g.periods.map(|[a, b]| [a / r, b / r]);
        g
    }

    /// Flow span and step policy with times divided by `r²`.
    pub fn normalized_flow(&self) -> FlowSpan {
        let r2 = self.r * self.r;
        FlowSpan {
            start: self.flow.start / r2,
            end: self.flow.end / r2,
            policy: StepPolicy {
                dt: self.flow.policy.dt / r2,
                max_curvature: self.flow.policy.max_curvature * r2,
                ..self.flow.policy
            },
        }
    }

    /// Same scenario on a grid with `nodes` nodes per direction. Torus nodes
    /// are moved to the nearest node of the new lattice.
    pub fn with_resolution(&self, nodes: usize) -> ScenarioConfig {
        let mut c = self.clone();
        let old = self.geometry.nodes;
        c.geometry.nodes = nodes;
        if self.geometry.kind == ModelKind::FlatTorusConformal {
            let map = |p: &mut Point| {
                if let Point::Node(i) = *p {
                    let scale = |k: usize| ((k as f64 * nodes as f64 / old as f64).round() as usize) % nodes;
                    *p = Point::Node(scale(i / old) * nodes + scale(i % old));
                }
            };
            c.basepoints.iter_mut().for_each(map);
            for h in &mut c.harnack {
                map(&mut h.x1);
                map(&mut h.x2);
            }
            if let Some(p) = &mut c.pstar {
                p.points.iter_mut().for_each(map);
            }
            if let Some(l) = &mut c.transport.ladder {
                map(&mut l.x1);
                map(&mut l.x2);
            }
        }
        c
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.name.trim().is_empty() {
            return bad("name must not be empty".into());
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return bad(format!("r = {} must be positive", self.r));
        }
        self.geometry
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("geometry: {e}")))?;
        self.flow
            .policy
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("flow.policy: {e}")))?;
        if !(self.flow.start < self.flow.end) || !self.flow.start.is_finite() || !self.flow.end.is_finite() {
            return bad(format!("flow span [{}, {}] is empty", self.flow.start, self.flow.end));
        }
        if self.basepoints.is_empty() {
            return bad("at least one basepoint is required".into());
        }
        for p in &self.basepoints {
            self.check_point(*p)?;
        }
        if self.theorem.pairs.is_empty() {
            return bad("theorem.pairs must not be empty".into());
        }
        for [a, tau] in &self.theorem.pairs {
            if !(*a > 0.0 && *tau > 0.0) {
                return bad(format!("theorem pair ({a}, {tau}) must be positive"));
            }
        }
        for c in self.checks.iter().chain(&self.fault_inject) {
            if !CHECK_NAMES.contains(&c.as_str()) {
                return bad(format!("unknown check `{c}`"));
            }
        }
        for h in &self.harnack {
            self.check_point(h.x1)?;
            self.check_point(h.x2)?;
        }
        if let Some(p) = &self.pstar {
            if !(p.a > 0.0 && p.tau > 0.0) {
                return bad("pstar.a and pstar.tau must be positive".into());
            }
            for x in &p.points {
                self.check_point(*x)?;
            }
        }
        if let Some(l) = &self.transport.ladder {
            self.check_point(l.x1)?;
            self.check_point(l.x2)?;
        }
        if let Some(n) = &self.noncollapse {
            if !(n.a > 0.0) || n.fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
                return bad("noncollapse.a must be positive and fractions in (0, 1]".into());
            }
        }
        if let Some(a) = &self.ancient {
            if a.taus.len() < 2 || a.taus.windows(2).any(|w| !(w[1] > w[0])) {
                return bad("ancient.taus must be increasing with at least two entries".into());
            }
        }
        Ok(())
    }

    fn check_point(&self, p: Point) -> Result<(), ConfigError> {
        let ok = match (self.geometry.kind, p) {
            (ModelKind::FlatTorusConformal, Point::Node(i)) => i < self.geometry.nodes * self.geometry.nodes,
            (ModelKind::FlatTorusConformal, _) => false,
            (ModelKind::EuclideanRadial, Point::North) => true,
            (ModelKind::SphereRadial, Point::North | Point::South) => true,
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(ConfigError::Invalid(format!(
                "point {} is not a basepoint of the {} model",
                p.label(),
                self.geometry.kind.as_str()
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "tiny"
basepoints = ["north"]
[geometry]
kind = "euclidean_radial"
n = 3
r_max = 10.0
nodes = 64
[flow]
start = -1.0
end = 0.0
[theorem]
pairs = [[1.0, 1.0]]
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let c = ScenarioConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(c.r, 1.0);
        assert_eq!(c.theorem.random_functions, 100);
        assert_eq!(c.constants.volume_c, 30.0);
        assert_eq!(c.tolerance_profile, ToleranceProfile::Default);
        assert!(c.runs("harnack"));
        let again = ScenarioConfig::from_toml_str(&c.to_toml()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn missing_field_names_its_path() {
        let text = MINIMAL.replace("n = 3\n", "");
        match ScenarioConfig::from_toml_str(&text) {
            Err(ConfigError::Schema { path, message }) => {
                assert_eq!(path, "geometry");
                assert!(message.contains("missing field `n`"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let typo = MINIMAL.replace("[theorem]", "[theorem]\nrandom = 3");
        let e = ScenarioConfig::from_toml_str(&typo).unwrap_err().to_string();
        assert!(e.starts_with("theorem.random"), "{e}");
    }

    #[test]
    fn rejects_bad_points_and_checks() {
        let south = MINIMAL.replace("[\"north\"]", "[\"south\"]");
        assert!(ScenarioConfig::from_toml_str(&south).is_err());
        let unknown = format!("checks = [\"nope\"]\n{MINIMAL}");
        assert!(ScenarioConfig::from_toml_str(&unknown).is_err());
    }

    #[test]
    fn hash_ignores_output_directory() {
        let mut c = ScenarioConfig::from_toml_str(MINIMAL).unwrap();
        let h = c.input_hash();
        c.output = Some("elsewhere".into());
        assert_eq!(c.input_hash(), h);
        c.seed = 1;
        assert_ne!(c.input_hash(), h);
    }

    #[test]
    fn normalization_rescales_lengths_and_times() {
        let mut c = ScenarioConfig::from_toml_str(MINIMAL).unwrap();
        c.r = 2.0;
        assert_eq!(c.normalized_geometry().r_max, Some(5.0));
        let f = c.normalized_flow();
        assert_eq!((f.start, f.end), (-0.25, 0.0));
        assert_eq!(f.policy.dt, c.flow.policy.dt / 4.0);
    }

    #[test]
    fn resolution_moves_torus_nodes() {
        let text = MINIMAL
            .replace("[\"north\"]", "[{ node = 33 }]")
            .replace("kind = \"euclidean_radial\"\nn = 3\nr_max = 10.0\nnodes = 64", "kind = \"flat_torus_conformal\"\nn = 2\nperiods = [1.0, 1.0]\nnodes = 16");
        let c = ScenarioConfig::from_toml_str(&text).unwrap();
        let fine = c.with_resolution(32);
        // node 33 is (i, j) = (1, 2) on 16²; (2, 4) on 32²
        assert_eq!(fine.basepoints, vec![Point::Node(4 * 32 + 2)]);
        fine.validate().unwrap();
    }
}
