//! Ricci flow on the model geometries.
//!
//! The Euclidean model is static and the round sphere follows its closed
//! form `a² = a₀² − 2(n−1)(t − t_a)`. The conformal torus evolves
//! `∂_t v = e^{−2v}Δ₀v` with a semi-implicit second-order backward
//! difference scheme whose diffusion coefficient is extrapolated from the
//! two previous levels; a step that would increase `max v − min v` is redone
//! with backward Euler, which satisfies the discrete maximum principle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{MetricSlice, ModelKind};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepPolicy {
    /// Base time step.
    pub dt: f64,
    /// Steps are capped at `safety / sup|R|`.
    #[serde(default = "default_safety")]
    pub safety: f64,
    /// Blow-up threshold on `sup|R|`.
    #[serde(default = "default_max_curvature")]
    pub max_curvature: f64,
}

fn default_safety() -> f64 {
    0.5
}

fn default_max_curvature() -> f64 {
    1e6
}

impl Default for StepPolicy {
    fn default() -> Self {
        StepPolicy {
            dt: 0.01,
            safety: default_safety(),
            max_curvature: default_max_curvature(),
        }
    }
}

impl StepPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "safety factor {} must lie in (0, 1]",
                self.safety
            )));
        }
        if !(self.max_curvature > 0.0) {
            return Err(Error::InvalidArgument("blow-up threshold must be positive".into()));
        }
        Ok(())
    }

    fn step(&self, sup_r: f64) -> f64 {
        if sup_r > 0.0 {
            self.dt.min(self.safety / sup_r)
        } else {
            self.dt
        }
    }
}

/// Stored slices of a Ricci flow over its achieved interval.
#[derive(Clone, Debug)]
pub struct FlowSpacetime {
    slices: Vec<MetricSlice>,
    policy: StepPolicy,
    requested_end: f64,
    singular_time: Option<f64>,
    /// Torus steps redone with backward Euler.
    fallbacks: usize,
}

impl FlowSpacetime {
    pub fn slices(&self) -> &[MetricSlice] {
        &self.slices
    }

    pub fn times(&self) -> Vec<f64> {
        self.slices.iter().map(MetricSlice::time).collect()
    }

    pub fn policy(&self) -> &StepPolicy {
        &self.policy
    }

    pub fn start(&self) -> f64 {
        self.slices[0].time()
    }

    pub fn end(&self) -> f64 {
        self.slices[self.slices.len() - 1].time()
    }

    pub fn requested_end(&self) -> f64 {
        self.requested_end
    }

    pub fn dim(&self) -> usize {
        self.slices[0].dim()
    }

    pub fn kind(&self) -> ModelKind {
        self.slices[0].kind()
    }

    /// Detected blow-up time, if the requested span reached one.
    pub fn singular_time(&self) -> Option<f64> {
        self.singular_time
    }

    pub fn is_singular(&self) -> bool {
        self.singular_time.is_some()
    }

    /// Number of torus steps redone with backward Euler.
    pub fn fallback_steps(&self) -> usize {
        self.fallbacks
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start() && t <= self.end()
    }

    /// The slice at time `t`, interpolating the profile between stored slices.
    pub fn slice_at(&self, t: f64) -> Result<MetricSlice> {
        if !self.contains(t) {
            return Err(Error::OutOfInterval {
                time: t,
                start: self.start(),
                end: self.end(),
            });
        }
        let k = self.slices.partition_point(|s| s.time() < t);
        let hi = &self.slices[k];
        if hi.time() == t {
            return Ok(hi.clone());
        }
        let lo = &self.slices[k - 1];
        let theta = (t - lo.time()) / (hi.time() - lo.time());
        match lo.kind() {
            ModelKind::EuclideanRadial => Ok(lo.with_time(t)),
            ModelKind::SphereRadial => {
                let (a, b) = (lo.scale().unwrap(), hi.scale().unwrap());
                let a2 = (1.0 - theta) * a * a + theta * b * b;
                MetricSlice::radial(lo.model_arc().clone(), lo.grid_arc().clone(), t, a2.sqrt())
            }
            ModelKind::FlatTorusConformal => {
                let (va, vb) = (
                    lo.conformal_exponent().unwrap(),
                    hi.conformal_exponent().unwrap(),
                );
                let v = va
                    .iter()
                    .zip(vb)
                    .map(|(a, b)| (1.0 - theta) * a + theta * b)
                    .collect();
                MetricSlice::conformal(lo.model_arc().clone(), lo.grid_arc().clone(), t, v)
            }
        }
    }

    /// Assembles a spacetime from previously stored slices.
    pub fn from_slices(slices: Vec<MetricSlice>, policy: StepPolicy) -> Result<Self> {
        if slices.is_empty() {
            return Err(Error::InvalidArgument("a flow needs at least one slice".into()));
        }
        if slices.windows(2).any(|w| !(w[1].time() > w[0].time())) {
            return Err(Error::InvalidArgument("slice times must increase strictly".into()));
        }
        let end = slices[slices.len() - 1].time();
        Ok(FlowSpacetime {
            slices,
            policy,
            requested_end: end,
            singular_time: None,
            fallbacks: 0,
        })
    }
}

/// Evolves `initial` by Ricci flow over `[t_a, t_b]`.
pub fn evolve_ricci(
    initial: &MetricSlice,
    t_span: (f64, f64),
    policy: StepPolicy,
) -> Result<FlowSpacetime> {
    policy.validate()?;
    let (t_a, t_b) = t_span;
    if !(t_a < t_b) || !t_a.is_finite() || !t_b.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "time span [{t_a}, {t_b}] must be nonempty"
        )));
    }
    let start = initial.with_time(t_a);
    match initial.kind() {
        ModelKind::EuclideanRadial => Ok(evolve_static(start, t_b, policy)),
        ModelKind::SphereRadial => evolve_sphere(start, t_b, policy),
        ModelKind::FlatTorusConformal => evolve_torus(start, t_b, policy),
    }
}

fn ladder_step(t: f64, t_b: f64, dt: f64) -> f64 {
    // avoid a sliver at the end of the span
    if t + 1.5 * dt >= t_b {
        if t + dt >= t_b {
            t_b - t
        } else {
            0.5 * (t_b - t)
        }
    } else {
        dt
    }
}

fn evolve_static(start: MetricSlice, t_b: f64, policy: StepPolicy) -> FlowSpacetime {
    let mut slices = vec![start];
    let mut t = slices[0].time();
    while t < t_b {
        t += ladder_step(t, t_b, policy.dt);
        slices.push(slices[0].with_time(t));
    }
    FlowSpacetime {
        slices,
        policy,
        requested_end: t_b,
        singular_time: None,
        fallbacks: 0,
    }
}

fn evolve_sphere(start: MetricSlice, t_b: f64, policy: StepPolicy) -> Result<FlowSpacetime> {
    let n = start.dim() as f64;
    let t_a = start.time();
    let a0 = start.scale().expect("radial slice");
    let extinction = t_a + a0 * a0 / (2.0 * (n - 1.0));
    let radius_sq = |t: f64| a0 * a0 - 2.0 * (n - 1.0) * (t - t_a);
    let curvature = |a2: f64| n * (n - 1.0) / a2;
    let model = start.model_arc().clone();
    let grid = start.grid_arc().clone();
    let mut slices = vec![start];
    let mut t = t_a;
    let mut singular_time = None;
    while t < t_b {
        let dt = policy.step(curvature(radius_sq(t)));
        let next = t + ladder_step(t, t_b, dt);
        let a2 = radius_sq(next);
        if a2 <= 0.0 || curvature(a2) > policy.max_curvature {
            singular_time = Some(extinction);
            break;
        }
        slices.push(MetricSlice::radial(model.clone(), grid.clone(), next, a2.sqrt())?);
        t = next;
    }
    Ok(FlowSpacetime {
        slices,
        policy,
        requested_end: t_b,
        singular_time,
        fallbacks: 0,
    })
}

fn oscillation(v: &[f64]) -> f64 {
    let (lo, hi) = v
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| (l.min(*x), h.max(*x)));
    hi - lo
}

fn evolve_torus(start: MetricSlice, t_b: f64, policy: StepPolicy) -> Result<FlowSpacetime> {
    let model = start.model_arc().clone();
    let grid = start.grid_arc().clone();
    let cell: f64 = grid.coord_weights()[0];
    let stiffness = start.stiffness().clone();
    let mut slices = vec![start];
    let mut prev: Option<(Vec<f64>, f64)> = None;
    let mut t = slices[0].time();
    let mut fallbacks = 0;
    let mut singular_time = None;
    while t < t_b {
        let current = slices.last().unwrap();
        let sup_r = current.max_abs_curvature();
        if sup_r > policy.max_curvature {
            singular_time = Some(t);
            break;
        }
        let h = ladder_step(t, t_b, policy.step(sup_r));
        let v = current.conformal_exponent().unwrap().to_vec();
        let osc = oscillation(&v);
        let backward_euler = |v: &[f64]| -> Result<Vec<f64>> {
            let w: Vec<f64> = v.iter().map(|x| (2.0 * x).exp() * cell).collect();
            let rhs: Vec<f64> = w.iter().zip(v).map(|(a, b)| a * b).collect();
            stiffness.solve(&w, h, &rhs, None)
        };
        let mut next = None;
        if let Some((v_old, h_old)) = &prev {
            let omega = h / h_old;
            let a0 = (1.0 + 2.0 * omega) / (1.0 + omega);
            let b = omega * omega / (1.0 + omega);
            let w: Vec<f64> = v
                .iter()
                .zip(v_old)
                .map(|(a, b)| (2.0 * ((1.0 + omega) * a - omega * b)).exp() * cell)
                .collect();
            let diag: Vec<f64> = w.iter().map(|x| a0 * x).collect();
            let rhs: Vec<f64> = (0..v.len())
                .map(|i| w[i] * ((1.0 + omega) * v[i] - b * v_old[i]))
                .collect();
            let candidate = stiffness.solve(&diag, h, &rhs, None)?;
            if oscillation(&candidate) <= osc {
                next = Some(candidate);
            }
        }
        let next = match next {
            Some(v) => v,
            None => {
                if prev.is_some() {
                    fallbacks += 1;
                }
                backward_euler(&v)?
            }
        };
        t += h;
        prev = Some((v, h));
        slices.push(MetricSlice::conformal(model.clone(), grid.clone(), t, next)?);
    }
    Ok(FlowSpacetime {
        slices,
        policy,
        requested_end: t_b,
        singular_time,
        fallbacks,
    })
}

/// One row of the curvature lower-bound check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LowerBoundRow {
    pub time: f64,
    pub min_curvature: f64,
    pub bound: f64,
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LowerBoundReport {
    pub t_min: f64,
    pub rows: Vec<LowerBoundRow>,
}

impl LowerBoundReport {
    pub fn worst_margin(&self) -> f64 {
        self.rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min)
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.worst_margin() >= -tolerance
    }
}

/// Margins `min R(s) + n / (2(s − t_min))` at every stored slice after `t_min`.
pub fn curvature_lower_bound_check(flow: &FlowSpacetime, t_min: f64) -> LowerBoundReport {
    let n = flow.dim() as f64;
    let rows = flow
        .slices()
        .iter()
        .filter(|s| s.time() > t_min)
        .map(|s| {
            let bound = -n / (2.0 * (s.time() - t_min));
            let min_curvature = s.min_curvature();
            LowerBoundRow {
                time: s.time(),
                min_curvature,
                bound,
                margin: min_curvature - bound,
            }
        })
        .collect();
    LowerBoundReport { t_min, rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ConformalMode, GeometryModel};
    use std::f64::consts::PI;

    fn bumpy(amplitude: f64, nodes: usize) -> MetricSlice {
        let modes = vec![
            ConformalMode {
                amplitude,
                kx: 1,
                ky: 0,
                phase: 0.0,
            },
            ConformalMode {
                amplitude: 0.5 * amplitude,
                kx: 1,
                ky: 1,
                phase: 0.7,
            },
        ];
        GeometryModel::torus([2.0 * PI; 2], nodes, modes).build(0.0).unwrap().1
    }

    #[test]
    fn sphere_matches_closed_form() {
        let (_, s) = GeometryModel::sphere(3, 1.0, 64).build(0.0).unwrap();
        let flow = evolve_ricci(&s, (0.0, 0.2), StepPolicy::default()).unwrap();
        let last = flow.slice_at(0.2).unwrap();
        assert!((last.scale().unwrap().powi(2) - 0.2).abs() < 1e-12);
        // independent Euler integration of da²/dt = −2(n−1)
        let mut a2 = 1.0;
        let steps = 1000;
        for _ in 0..steps {
            a2 += -4.0 * (0.2 / steps as f64);
        }
        assert!((last.scale().unwrap().powi(2) - a2).abs() < 1e-10);
        let mid = flow.slice_at(0.1234).unwrap();
        assert!((mid.scale().unwrap().powi(2) - (1.0 - 4.0 * 0.1234)).abs() < 1e-12);
    }

    #[test]
    fn sphere_blow_up_is_flagged() {
        let (_, s) = GeometryModel::sphere(3, 1.0, 64).build(0.0).unwrap();
        let flow = evolve_ricci(&s, (0.0, 1.0), StepPolicy::default()).unwrap();
        assert_eq!(flow.singular_time(), Some(0.25));
        assert!(flow.end() < 0.25);
        assert!(flow.slices().iter().all(|s| s.max_abs_curvature() <= 1e6));
        assert!(flow.slice_at(0.3).is_err());
    }

    #[test]
    fn static_and_fixed_point_flows() {
        let (_, e) = GeometryModel::euclidean(3, 20.0, 128).build(0.0).unwrap();
        let flow = evolve_ricci(&e, (-1.0, 0.0), StepPolicy::default()).unwrap();
        assert!(flow.slices().iter().all(|s| s.weights() == e.weights()));
        assert!(flow.slice_at(-1.5).is_err());
        let flat = bumpy(0.0, 32);
        let flow = evolve_ricci(&flat, (0.0, 0.5), StepPolicy::default()).unwrap();
        assert!(flow
            .slices()
            .iter()
            .all(|s| s.conformal_exponent().unwrap().iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn stored_time_returns_that_slice() {
        let flow = evolve_ricci(&bumpy(0.3, 32), (0.0, 0.3), StepPolicy::default()).unwrap();
        let stored = &flow.slices()[7];
        let again = flow.slice_at(stored.time()).unwrap();
        assert_eq!(again.conformal_exponent(), stored.conformal_exponent());
    }

    #[test]
    fn torus_flow_respects_maximum_principle_and_area() {
        let flow = evolve_ricci(&bumpy(0.3, 32), (0.0, 2.0), StepPolicy::default()).unwrap();
        let osc: Vec<f64> = flow
            .slices()
            .iter()
            .map(|s| oscillation(s.conformal_exponent().unwrap()))
            .collect();
        assert!(osc.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        assert!(osc.last().unwrap() < &(0.5 * osc[0]));
        let area0 = flow.slices()[0].volume();
        for s in flow.slices() {
            assert!((s.volume() - area0).abs() / area0 < 1e-3, "area drift at {}", s.time());
        }
        let report = curvature_lower_bound_check(&flow, 0.0);
        assert!(report.passes(1e-6));
    }

    #[test]
    fn torus_time_refinement_is_second_order() {
        let run = |dt: f64| {
            let policy = StepPolicy {
                dt,
                ..StepPolicy::default()
            };
            let flow = evolve_ricci(&bumpy(0.3, 24), (0.0, 0.5), policy).unwrap();
            flow.slice_at(0.5).unwrap().conformal_exponent().unwrap().to_vec()
        };
        let (a, b, c) = (run(0.04), run(0.02), run(0.01));
        let diff = |x: &[f64], y: &[f64]| {
            x.iter().zip(y).fold(0.0_f64, |m, (p, q)| m.max((p - q).abs()))
        };
        let ratio = diff(&a, &b) / diff(&b, &c);
        assert!(ratio > 3.0, "ratio {ratio}");
    }

    #[test]
    fn euclidean_lower_bound_margin() {
        let (_, e) = GeometryModel::euclidean(3, 10.0, 64).build(-1.0).unwrap();
        let flow = evolve_ricci(&e, (-1.0, 0.0), StepPolicy::default()).unwrap();
        let report = curvature_lower_bound_check(&flow, -1.0);
        let last = report.rows.last().unwrap();
        assert!((last.margin - 1.5).abs() < 1e-12);
    }
}
