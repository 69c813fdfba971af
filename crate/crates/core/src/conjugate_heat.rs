//! Conjugate heat flows `−∂_t u − Δu + Ru = 0` solved backward in time.
//!
//! With `m = W u` the mass vector of a slice, the equation reads
//! `∂_σ m = −K u` in backward time `σ = t₁ − t`, because the volume form
//! itself evolves by `∂_t dg = −R dg`. The solver steps this conservative
//! form with variable-step BDF2 (backward Euler on the first step and
//! whenever BDF2 would produce a negative value), so `Σ m` is preserved up
//! to the linear-solver residual.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::FlowSpacetime;
use crate::geometry::{MetricSlice, Point, ScalarField};

/// Relative floor below which densities are excluded from logarithms.
pub const DENSITY_FLOOR: f64 = 1e-30;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConjugateOptions {
    /// Step cap; `None` uses the flow's base step.
    #[serde(default)]
    pub max_dt: Option<f64>,
    /// Kernel steps are capped at `grading · age`, where age is the elapsed
    /// backward time including the bump's own age.
    #[serde(default = "default_grading")]
    pub grading: f64,
    #[serde(default = "default_mass_tolerance")]
    pub mass_tolerance: f64,
    /// Width of the kernel's initial bump in grid cells.
    #[serde(default = "default_width")]
    pub width_cells: f64,
}

fn default_grading() -> f64 {
    0.05
}

fn default_mass_tolerance() -> f64 {
    1e-6
}

fn default_width() -> f64 {
    4.0
}

impl Default for ConjugateOptions {
    fn default() -> Self {
        ConjugateOptions {
            max_dt: None,
            grading: default_grading(),
            mass_tolerance: default_mass_tolerance(),
            width_cells: default_width(),
        }
    }
}

impl ConjugateOptions {
    /// Same options with every step size divided by `factor`.
    pub fn refined(&self, factor: f64, flow: &FlowSpacetime) -> Self {
        ConjugateOptions {
            max_dt: Some(self.max_dt.unwrap_or(flow.policy().dt) / factor),
            grading: self.grading / factor,
            ..self.clone()
        }
    }
}

/// A conjugate heat flow stored at increasing times.
#[derive(Clone, Debug)]
pub struct DensityFlow {
    slices: Vec<MetricSlice>,
    fields: Vec<Vec<f64>>,
    masses: Vec<f64>,
    terminal_time: f64,
    basepoint: Option<Point>,
    base_time: Option<f64>,
    age: f64,
}

impl DensityFlow {
    pub fn times(&self) -> Vec<f64> {
        self.slices.iter().map(MetricSlice::time).collect()
    }

    pub fn slices(&self) -> &[MetricSlice] {
        &self.slices
    }

    pub fn fields(&self) -> &[Vec<f64>] {
        &self.fields
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    /// Time at which the terminal data was imposed.
    pub fn terminal_time(&self) -> f64 {
        self.terminal_time
    }

    pub fn basepoint(&self) -> Option<Point> {
        self.basepoint
    }

    /// Time of the kernel's basepoint, `None` for non-kernel flows.
    pub fn base_time(&self) -> Option<f64> {
        self.base_time
    }

    /// Effective age of the initial bump.
    pub fn bump_age(&self) -> f64 {
        self.age
    }

    pub fn max_mass_error(&self) -> f64 {
        self.masses.iter().fold(0.0, |m, x| m.max((x - 1.0).abs()))
    }

    /// Index of the stored time equal to `t` up to round-off.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = 1e-12 * (1.0 + t.abs());
        self.slices.iter().position(|s| (s.time() - t).abs() <= tol)
    }

    pub fn slice_and_field(&self, t: f64) -> Result<(&MetricSlice, &[f64])> {
        let k = self.index_of(t).ok_or_else(|| Error::OutOfInterval {
            time: t,
            start: self.slices[0].time(),
            end: self.terminal_time,
        })?;
        Ok((&self.slices[k], &self.fields[k]))
    }

    /// Restriction to stored times `≥ t_from`.
    pub fn since(&self, t_from: f64) -> DensityFlow {
        let k = self.slices.partition_point(|s| s.time() < t_from - 1e-12 * (1.0 + t_from.abs()));
        DensityFlow {
            slices: self.slices[k..].to_vec(),
            fields: self.fields[k..].to_vec(),
            masses: self.masses[k..].to_vec(),
            ..self.clone()
        }
    }
}

/// Solves the conjugate heat equation from terminal data at the flow's
/// time `t1` back to `t0`, landing exactly on every time in `record`.
pub fn solve_conjugate(
    flow: &FlowSpacetime,
    terminal: &ScalarField,
    t1: f64,
    t0: f64,
    record: &[f64],
    opts: &ConjugateOptions,
) -> Result<DensityFlow> {
    let slice = flow.slice_at(t1)?;
    check_terminal(&slice, terminal.values(), opts.mass_tolerance)?;
    march(flow, slice, terminal.values().to_vec(), 0.0, t0, record, opts, None)
}

/// Approximate conjugate heat kernel based at `(x0, t_base)`, solved down to `t_end`.
///
/// A normalized compact bump `(1 − (d/w)²)²` of width `w` is treated as the
/// kernel at the age `δ = ∫d² u dg / (2n)` that a Gaussian of the same second
/// moment would have, so it is imposed at `t_base − δ`.
pub fn kernel_flow(
    flow: &FlowSpacetime,
    x0: Point,
    t_base: f64,
    t_end: f64,
    record: &[f64],
    opts: &ConjugateOptions,
) -> Result<DensityFlow> {
    if opts.width_cells < 2.0 {
        return Err(Error::InvalidArgument(format!(
            "bump width {} is below two grid cells",
            opts.width_cells
        )));
    }
    let slice = flow.slice_at(t_base)?;
    let (bump, second_moment) = delta_bump(&slice, x0, opts.width_cells)?;
    let age = second_moment / (2.0 * slice.dim() as f64);
    let t_start = t_base - age;
    if t_end >= t_start {
        return Err(Error::InvalidArgument(format!(
            "kernel gap {} is shorter than the bump age {age:.3e}",
            t_base - t_end
        )));
    }
    let start_slice = flow.slice_at(t_start)?;
    // renormalize on the slice where the bump is imposed
    let mass = start_slice.integrate(&bump)?;
    let bump: Vec<f64> = bump.iter().map(|u| u / mass).collect();
    let record: Vec<f64> = record.iter().copied().filter(|&t| t < t_start).collect();
    let mut out = march(flow, start_slice, bump, age, t_end, &record, opts, Some(x0))?;
    out.base_time = Some(t_base);
    Ok(out)
}

/// Kernel `K(x0, t0 | ·, t)` evaluated on the slice at `t`.
pub fn heat_kernel(
    flow: &FlowSpacetime,
    x0: Point,
    t0: f64,
    t: f64,
    opts: &ConjugateOptions,
) -> Result<ScalarField> {
    if !(t < t0) {
        return Err(Error::InvalidArgument(format!("kernel time {t} must precede {t0}")));
    }
    let kernel = kernel_flow(flow, x0, t0, t, &[t], opts)?;
    let (_, u) = kernel.slice_and_field(t)?;
    ScalarField::new(u.to_vec())
}

fn check_terminal(slice: &MetricSlice, u: &[f64], tolerance: f64) -> Result<()> {
    if let Some((node, &value)) = u.iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(Error::NegativeDensity { node, value });
    }
    let mass = slice.integrate(u)?;
    if (mass - 1.0).abs() > tolerance {
        return Err(Error::MassDrift {
            time: slice.time(),
            drift: mass - 1.0,
            tolerance,
        });
    }
    Ok(())
}

/// Normalized bump around `x0` and its second moment `∫d² u dg`.
fn delta_bump(slice: &MetricSlice, x0: Point, width_cells: f64) -> Result<(Vec<f64>, f64)> {
    let (dist, width) = match slice.scale() {
        Some(scale) => {
            let d = slice.distances_from(x0)?;
            (d, width_cells * scale * slice.grid().spacing())
        }
        None => {
            let Point::Node(c) = x0 else {
                return Err(Error::UnsupportedPoints(format!(
                    "{} is not a torus node",
                    x0.label()
                )));
            };
            let tg = slice.grid().torus().expect("torus grid");
            if c >= tg.len() {
                return Err(Error::UnsupportedPoints(format!("node {c} out of range")));
            }
            let factor = slice.conformal_exponent().unwrap()[c].exp();
            let d = (0..tg.len())
                .map(|j| {
                    let (dx, dy) = tg.flat_offset(c, j);
                    factor * (dx * dx + dy * dy).sqrt()
                })
                .collect();
            (d, width_cells * factor * slice.grid().spacing())
        }
    };
    let bump: Vec<f64> = dist
        .iter()
        .map(|&d| {
            let q = d / width;
            if q < 1.0 {
                (1.0 - q * q).powi(2)
            } else {
                0.0
            }
        })
        .collect();
    let mass = slice.integrate(&bump)?;
    if !(mass > 0.0) {
        return Err(Error::EmptyMask);
    }
    let bump: Vec<f64> = bump.iter().map(|b| b / mass).collect();
    let moment = slice
        .weights()
        .iter()
        .zip(&bump)
        .zip(&dist)
        .map(|((w, u), d)| w * u * d * d)
        .sum();
    Ok((bump, moment))
}

#[allow(clippy::too_many_arguments)]
fn march(
    flow: &FlowSpacetime,
    start: MetricSlice,
    u_start: Vec<f64>,
    age: f64,
    t_end: f64,
    record: &[f64],
    opts: &ConjugateOptions,
    basepoint: Option<Point>,
) -> Result<DensityFlow> {
    let t_start = start.time();
    if !(t_end < t_start) {
        return Err(Error::InvalidArgument(format!(
            "end time {t_end} must precede the terminal time {t_start}"
        )));
    }
    if t_end < flow.start() {
        return Err(Error::OutOfInterval {
            time: t_end,
            start: flow.start(),
            end: flow.end(),
        });
    }
    let max_dt = opts.max_dt.unwrap_or(flow.policy().dt);
    let mut targets: Vec<f64> = record
        .iter()
        .copied()
        .filter(|&t| t > t_end && t < t_start)
        .collect();
    targets.push(t_end);
    targets.sort_by(|a, b| b.total_cmp(a));
    targets.dedup();

    let mass0 = start.integrate(&u_start)?;
    let mut slices = vec![start];
    let mut fields = vec![u_start];
    let mut masses = vec![mass0];
    let mut history: Option<(Vec<f64>, f64)> = None;
    let mut t = t_start;
    // a short first step keeps the one-step start from dominating the error
    let mut last_h: f64 = max_dt / 32.0;
    for &target in &targets {
        while t > target {
            let sigma = t_start - t;
            let mut h = if age > 0.0 {
                max_dt.min(opts.grading * (age + sigma))
            } else {
                max_dt
            };
            h = h.min(2.0 * last_h);
            let remaining = t - target;
            let t_new = if remaining <= h {
                target
            } else if remaining < 1.5 * h {
                t - 0.5 * remaining
            } else {
                t - h
            };
            let h = t - t_new;
            let slice = flow.slice_at(t_new)?;
            let cur = fields.last().unwrap();
            let m_cur: Vec<f64> = slices
                .last()
                .unwrap()
                .weights()
                .iter()
                .zip(cur)
                .map(|(w, u)| w * u)
                .collect();
            let w_new = slice.weights();
            let mut next = None;
            if let Some((m_old, h_old)) = &history {
                let omega = h / h_old;
                let a0 = (1.0 + 2.0 * omega) / (1.0 + omega);
                let b = omega * omega / (1.0 + omega);
                let diag: Vec<f64> = w_new.iter().map(|w| a0 * w).collect();
                let rhs: Vec<f64> = m_cur
                    .iter()
                    .zip(m_old)
                    .map(|(m, o)| (1.0 + omega) * m - b * o)
                    .collect();
                let candidate = slice.stiffness().solve(&diag, h, &rhs, None)?;
                if candidate.iter().all(|x| *x >= 0.0) {
                    next = Some(candidate);
                }
            }
            let next = match next {
                Some(u) => u,
                None => slice.stiffness().solve(w_new, h, &m_cur, None)?,
            };
            if let Some((node, &value)) = next.iter().enumerate().find(|(_, v)| **v < 0.0) {
                return Err(Error::NegativeDensity { node, value });
            }
            let mass = slice.integrate(&next)?;
            if (mass - mass0).abs() > opts.mass_tolerance {
                return Err(Error::MassDrift {
                    time: t_new,
                    drift: mass - mass0,
                    tolerance: opts.mass_tolerance,
                });
            }
            history = Some((m_cur, h));
            last_h = h;
            t = t_new;
            slices.push(slice);
            fields.push(next);
            masses.push(mass);
        }
    }
    slices.reverse();
    fields.reverse();
    masses.reverse();
    Ok(DensityFlow {
        slices,
        fields,
        masses,
        terminal_time: t_start,
        basepoint,
        base_time: None,
        age,
    })
}

/// Potential `f` with `u = (4πτ)^{−n/2} e^{−f}` on the support mask.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialField {
    pub f: Vec<f64>,
    pub tau: f64,
    pub mask: Vec<bool>,
}

impl PotentialField {
    pub fn mask_fraction(&self) -> f64 {
        self.mask.iter().filter(|m| **m).count() as f64 / self.mask.len() as f64
    }
}

/// Support mask `{u > floor · max u}`.
pub fn support_mask(u: &[f64], relative_floor: f64) -> Vec<bool> {
    let peak = u.iter().fold(0.0_f64, |a, b| a.max(*b));
    let floor = relative_floor * peak;
    u.iter().map(|&x| x > floor && x > 0.0).collect()
}

/// `f = −log u − (n/2) log(4πτ)` on `{u > floor · max u}`; off-mask entries are 0.
pub fn f_potential(u: &[f64], tau: f64, n: usize, relative_floor: f64) -> Result<PotentialField> {
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("scale τ = {tau} must be positive")));
    }
    let mask = support_mask(u, relative_floor);
    if !mask.iter().any(|m| *m) {
        return Err(Error::EmptyMask);
    }
    let shift = 0.5 * n as f64 * (4.0 * std::f64::consts::PI * tau).ln();
    let f = u
        .iter()
        .zip(&mask)
        .map(|(&x, &on)| if on { -x.ln() - shift } else { 0.0 })
        .collect();
    Ok(PotentialField { f, tau, mask })
}

/// Smallest `C` for which two-sided Gaussian bounds hold on the stored kernel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GaussianFit {
    pub constant: f64,
    pub samples: usize,
}

impl GaussianFit {
    pub fn passes(&self) -> bool {
        self.constant.is_finite()
    }
}

/// Fits `C⁻¹g^{−n/2}e^{−C d²/g} ≤ K ≤ C g^{−n/2}e^{−d²/(C g)}` over every
/// stored time with gap `g` at least ten bump ages and every masked node.
pub fn kernel_gaussian_bound_check(kernel: &DensityFlow) -> Result<GaussianFit> {
    let (x0, t_base) = match (kernel.basepoint(), kernel.base_time()) {
        (Some(x), Some(t)) => (x, t),
        _ => return Err(Error::Precondition("Gaussian fit needs a kernel flow".into())),
    };
    let mut constant: f64 = 1.0;
    let mut samples = 0;
    for (slice, u) in kernel.slices().iter().zip(kernel.fields()) {
        let gap = t_base - slice.time();
        if gap < 10.0 * kernel.bump_age() {
            continue;
        }
        let n = slice.dim() as f64;
        let dist = slice.distances_from(x0)?;
        let mask = support_mask(u, DENSITY_FLOOR);
        for ((&k, &d), &on) in u.iter().zip(&dist).zip(&mask) {
            if !on {
                continue;
            }
            samples += 1;
            let scaled = k * gap.powf(0.5 * n);
            let q = d * d / gap;
            // both conditions are monotone in C; bisect on log C
            let upper_ok = |c: f64| scaled <= c * (-q / c).exp();
            let lower_ok = |c: f64| (-c * q).exp() / c <= scaled;
            constant = constant.max(smallest(upper_ok)).max(smallest(lower_ok));
            if !constant.is_finite() {
                return Ok(GaussianFit { constant, samples });
            }
        }
    }
    Ok(GaussianFit { constant, samples })
}

fn smallest(ok: impl Fn(f64) -> bool) -> f64 {
    if ok(1.0) {
        return 1.0;
    }
    let mut hi = 2.0;
    while !ok(hi) {
        hi *= 2.0;
        if hi > 1e300 {
            return f64::INFINITY;
        }
    }
    let mut lo = hi / 2.0;
    for _ in 0..60 {
        let mid = (lo * hi).sqrt();
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{evolve_ricci, StepPolicy};
    use crate::geometry::{ConformalMode, GeometryModel};
    use std::f64::consts::PI;

    fn euclid(nodes: usize) -> FlowSpacetime {
        let (_, e) = GeometryModel::euclidean(3, 20.0, nodes).build(-4.0).unwrap();
        evolve_ricci(&e, (-4.0, 0.0), StepPolicy::default()).unwrap()
    }

    fn gaussian(slice: &MetricSlice, tau: f64) -> Vec<f64> {
        slice
            .radial_coordinates()
            .unwrap()
            .iter()
            .map(|r| (4.0 * PI * tau).powf(-1.5) * (-r * r / (4.0 * tau)).exp())
            .collect()
    }

    fn max_rel(a: &[f64], b: &[f64]) -> f64 {
        let peak = b.iter().fold(0.0_f64, |m, x| m.max(*x));
        a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs())) / peak
    }

    #[test]
    fn gaussian_semigroup_on_euclidean() {
        let flow = euclid(512);
        let s0 = flow.slice_at(0.0).unwrap();
        let terminal = ScalarField::new(gaussian(&s0, 0.5)).unwrap();
        let opts = ConjugateOptions::default();
        let sol = solve_conjugate(&flow, &terminal, 0.0, -1.0, &[-0.5], &opts).unwrap();
        let (slice, u) = sol.slice_and_field(-1.0).unwrap();
        assert!(max_rel(u, &gaussian(slice, 1.5)) < 2e-3);
        assert!(sol.max_mass_error() < 1e-12);
    }

    #[test]
    fn kernel_matches_exact_gaussian() {
        let flow = euclid(512);
        let opts = ConjugateOptions::default();
        let k = heat_kernel(&flow, Point::North, 0.0, -1.0, &opts).unwrap();
        let slice = flow.slice_at(-1.0).unwrap();
        assert!(max_rel(k.values(), &gaussian(&slice, 1.0)) < 5e-3);
        assert!((slice.integrate(k.values()).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn superposition() {
        let flow = euclid(128);
        let s0 = flow.slice_at(0.0).unwrap();
        let g1 = gaussian(&s0, 0.3);
        let r = s0.radial_coordinates().unwrap();
        let shell: Vec<f64> = r.iter().map(|x| (-(x - 3.0).powi(2)).exp()).collect();
        let m = s0.integrate(&shell).unwrap();
        let g2: Vec<f64> = shell.iter().map(|x| x / m).collect();
        let mix: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| 0.5 * a + 0.5 * b).collect();
        let opts = ConjugateOptions::default();
        let solve = |u: &[f64]| {
            let sol = solve_conjugate(&flow, &ScalarField::new(u.to_vec()).unwrap(), 0.0, -1.0, &[], &opts)
                .unwrap();
            sol.fields()[0].clone()
        };
        let (a, b, c) = (solve(&g1), solve(&g2), solve(&mix));
        for i in 0..c.len() {
            assert!((c[i] - 0.5 * a[i] - 0.5 * b[i]).abs() <= 1e-13 * (1.0 + c[i].abs()));
        }
    }

    #[test]
    fn rejects_bad_terminal_data() {
        let flow = euclid(64);
        let s0 = flow.slice_at(0.0).unwrap();
        let mut g = gaussian(&s0, 0.5);
        g[3] = -1e-3;
        let err = solve_conjugate(&flow, &ScalarField::new(g).unwrap(), 0.0, -1.0, &[], &Default::default());
        assert!(matches!(err, Err(Error::NegativeDensity { node: 3, .. })));
        let g: Vec<f64> = gaussian(&s0, 0.5).iter().map(|x| 2.0 * x).collect();
        let err = solve_conjugate(&flow, &ScalarField::new(g).unwrap(), 0.0, -1.0, &[], &Default::default());
        assert!(matches!(err, Err(Error::MassDrift { .. })));
        let narrow = ConjugateOptions {
            width_cells: 1.5,
            ..Default::default()
        };
        assert!(heat_kernel(&flow, Point::North, 0.0, -1.0, &narrow).is_err());
    }

    fn torus_flow() -> FlowSpacetime {
        let modes = vec![ConformalMode {
            amplitude: 0.3,
            kx: 1,
            ky: 1,
            phase: 0.2,
        }];
        // by t = -6 the bump has decayed and the late geometry is nearly flat
        let (_, t) = GeometryModel::torus([2.0 * PI; 2], 24, modes).build(-12.0).unwrap();
        evolve_ricci(&t, (-12.0, 0.0), StepPolicy { dt: 0.05, ..Default::default() }).unwrap()
    }

    #[test]
    fn torus_positivity_and_equilibration() {
        let flow = torus_flow();
        let s0 = flow.slice_at(0.0).unwrap();
        let half: Vec<f64> = (0..s0.len())
            .map(|i| if i % 24 < 12 { 1.0 } else { 0.0 })
            .collect();
        let m = s0.integrate(&half).unwrap();
        let terminal = ScalarField::new(half.iter().map(|x| x / m).collect()).unwrap();
        let sol = solve_conjugate(&flow, &terminal, 0.0, -6.0, &[-0.2], &Default::default()).unwrap();
        let (_, u) = sol.slice_and_field(-0.2).unwrap();
        assert!(u.iter().all(|x| *x > 0.0));
        let (slice, u) = sol.slice_and_field(-6.0).unwrap();
        let area = slice.volume();
        let dev = u.iter().fold(0.0_f64, |m, x| m.max((x * area - 1.0).abs()));
        assert!(dev < 1e-2, "deviation {dev}");
        assert!(sol.max_mass_error() < 1e-9);
    }

    #[test]
    fn semigroup_consistency() {
        let flow = euclid(256);
        let opts = ConjugateOptions::default();
        let s0 = flow.slice_at(0.0).unwrap();
        let terminal = ScalarField::new(gaussian(&s0, 0.2)).unwrap();
        let direct = solve_conjugate(&flow, &terminal, 0.0, -1.0, &[-0.5], &opts).unwrap();
        let mid = ScalarField::new(direct.slice_and_field(-0.5).unwrap().1.to_vec()).unwrap();
        let second = solve_conjugate(&flow, &mid, -0.5, -1.0, &[], &opts).unwrap();
        let a = direct.slice_and_field(-1.0).unwrap().1;
        let b = second.slice_and_field(-1.0).unwrap().1;
        assert!(max_rel(a, b) < 1e-3);
    }

    #[test]
    fn potential_of_gaussian() {
        let flow = euclid(256);
        let s = flow.slice_at(0.0).unwrap();
        let tau = 0.7;
        let p = f_potential(&gaussian(&s, tau), tau, 3, DENSITY_FLOOR).unwrap();
        for (i, r) in s.radial_coordinates().unwrap().iter().enumerate() {
            if p.mask[i] {
                assert!((p.f[i] - r * r / (4.0 * tau)).abs() < 1e-9 * (1.0 + r * r));
            }
        }
        let c = vec![(4.0 * PI * tau).powf(-1.5); s.len()];
        let flat = f_potential(&c, tau, 3, DENSITY_FLOOR).unwrap();
        assert!(flat.f.iter().all(|f| f.abs() < 1e-12));
        assert!(f_potential(&[0.0; 8], 1.0, 3, DENSITY_FLOOR).is_err());
    }

    #[test]
    fn floor_sensitivity_is_negligible() {
        let flow = euclid(512);
        let s = flow.slice_at(0.0).unwrap();
        let u = gaussian(&s, 0.25);
        let uf = |floor: f64| {
            let p = f_potential(&u, 0.25, 3, floor).unwrap();
            (0..u.len())
                .filter(|&i| p.mask[i])
                .map(|i| s.weights()[i] * u[i] * p.f[i])
                .sum::<f64>()
        };
        assert!((uf(1e-30) - uf(1e-29)).abs() < 1e-8);
        assert!((uf(1e-30) - uf(1e-31)).abs() < 1e-8);
    }

    #[test]
    fn gaussian_fit_on_euclidean_kernel() {
        let flow = euclid(512);
        let k = kernel_flow(&flow, Point::North, 0.0, -1.0, &[], &Default::default()).unwrap();
        let fit = kernel_gaussian_bound_check(&k).unwrap();
        // the lower bound at d = 0 forces C ≥ (4π)^{n/2}
        let expected = (4.0 * PI).powf(1.5);
        assert!(fit.passes());
        assert!((fit.constant - expected).abs() / expected < 2e-2, "C = {}", fit.constant);
    }
}
