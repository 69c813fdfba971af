//! Local log-Sobolev functionals `μ(Ω, g, τ)` and `ν(Ω, g, τ)`.
//!
//! `μ` is minimized over `w = √u` on the unit sphere of `L²(dg)` with
//! `w = 0` outside the region. Each iteration takes a gradient step
//! preconditioned by the Sobolev operator `P = 8τK + W`, projects it onto the
//! tangent space of the constraint, retracts by normalization and accepts it
//! through an Armijo backtracking line search. The returned value is the
//! functional at a feasible point, so it is an upper bound for the infimum.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::entropy::w_bar;
use crate::error::{Error, Result};
use crate::geometry::{unit_sphere_area, MetricSlice, Point};

/// Regions must contain at least this many nodes.
pub const MIN_REGION_NODES: usize = 4;

/// A set of grid nodes on which test functions may be nonzero.
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    mask: Vec<bool>,
    center: Point,
    radius: Option<f64>,
}

impl Region {
    /// Closed geodesic ball `B(center, radius)`.
    pub fn ball(slice: &MetricSlice, center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidArgument(format!("ball radius {radius} must be positive")));
        }
        Self::from_mask(slice.ball_mask(center, radius)?, center, Some(radius))
    }

    /// The whole model.
    pub fn whole(slice: &MetricSlice) -> Result<Self> {
        let center = if slice.kind().is_radial() {
            Point::North
        } else {
            Point::Node(0)
        };
        Self::from_mask(vec![true; slice.len()], center, None)
    }

    pub fn from_mask(mask: Vec<bool>, center: Point, radius: Option<f64>) -> Result<Self> {
        let count = mask.iter().filter(|m| **m).count();
        if count < MIN_REGION_NODES {
            return Err(Error::InvalidArgument(format!(
                "region has {count} nodes, fewer than {MIN_REGION_NODES}"
            )));
        }
        Ok(Region {
            mask,
            center,
            radius,
        })
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn center(&self) -> Point {
        self.center
    }

    pub fn radius(&self) -> Option<f64> {
        self.radius
    }

    pub fn node_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    /// True when `self` is a subset of `other`.
    pub fn is_subset_of(&self, other: &Region) -> bool {
        self.mask.iter().zip(&other.mask).all(|(a, b)| !a || *b)
    }
}

/// Values of `w = √u` per node, zero outside the region.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestFunction {
    pub values: Vec<f64>,
}

impl TestFunction {
    /// Restricts to the region, takes absolute values and scales to `∫w² dg = 1`.
    pub fn feasible(slice: &MetricSlice, region: &Region, raw: Vec<f64>) -> Result<Self> {
        let mut values: Vec<f64> = raw
            .iter()
            .zip(region.mask())
            .map(|(w, &on)| if on { w.abs() } else { 0.0 })
            .collect();
        let norm = l2_norm(slice, &values);
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::EmptyMask);
        }
        values.iter_mut().for_each(|w| *w /= norm);
        Ok(TestFunction { values })
    }

    /// The density `u = w²`.
    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|w| w * w).collect()
    }
}

fn l2_norm(slice: &MetricSlice, w: &[f64]) -> f64 {
    slice
        .weights()
        .iter()
        .zip(w)
        .map(|(a, b)| a * b * b)
        .sum::<f64>()
        .sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuOptions {
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    /// Exit when the preconditioned tangent gradient norm drops below this.
    #[serde(default = "default_gradient_tolerance")]
    pub gradient_tolerance: f64,
    /// Number of built-in starts (Gaussian, uniform, then random).
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_max_iterations() -> usize {
    4000
}

fn default_gradient_tolerance() -> f64 {
    1e-6
}

fn default_starts() -> usize {
    5
}

impl Default for MuOptions {
    fn default() -> Self {
        MuOptions {
            max_iterations: default_max_iterations(),
            gradient_tolerance: default_gradient_tolerance(),
            starts: default_starts(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MuResult {
    pub value: f64,
    pub tau: f64,
    #[serde(skip)]
    pub minimizer: TestFunction,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
    /// Final value reached from each start.
    pub start_values: Vec<f64>,
}

struct Problem<'a> {
    slice: &'a MetricSlice,
    mask: &'a [bool],
    tau: f64,
    constant: f64,
}

impl<'a> Problem<'a> {
    fn new(slice: &'a MetricSlice, region: &'a Region, tau: f64) -> Self {
        let n = slice.dim() as f64;
        Problem {
            slice,
            mask: region.mask(),
            tau,
            constant: -0.5 * n * (4.0 * PI * tau).ln() - n,
        }
    }

    fn value(&self, w: &[f64]) -> f64 {
        let weights = self.slice.weights();
        let r = self.slice.curvature();
        let mut potential = 0.0;
        let mut entropy = 0.0;
        for i in 0..w.len() {
            let u = w[i] * w[i];
            potential += weights[i] * r[i] * u;
            if u > 0.0 {
                entropy += weights[i] * u * u.ln();
            }
        }
        self.tau * (4.0 * self.slice.dirichlet_form().energy(w) + potential) - entropy
            + self.constant
    }

    fn gradient(&self, w: &[f64]) -> Vec<f64> {
        let weights = self.slice.weights();
        let r = self.slice.curvature();
        let mut g = vec![0.0; w.len()];
        self.slice.dirichlet_form().apply(w, &mut g);
        for i in 0..w.len() {
            if !self.mask[i] {
                g[i] = 0.0;
                continue;
            }
            // ln|w|² without squaring, which underflows for tiny w
            let log = if w[i] != 0.0 { 2.0 * w[i].abs().ln() } else { 0.0 };
            g[i] = 8.0 * self.tau * g[i] + 2.0 * weights[i] * w[i] * (self.tau * r[i] - log - 1.0);
        }
        g
    }

    fn precondition(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.slice.dirichlet_form().solve(
            self.slice.weights(),
            8.0 * self.tau,
            rhs,
            Some(self.mask),
        )
    }

    fn normalize(&self, w: &mut [f64]) {
        let norm = l2_norm(self.slice, w);
        w.iter_mut().for_each(|x| *x /= norm);
    }

    /// Descends from `w`. Exits on the gradient tolerance or when the line
    /// search can no longer decrease the value at round-off level.
    fn descend(&self, mut w: Vec<f64>, opts: &MuOptions) -> Result<Descent> {
        self.normalize(&mut w);
        let weights = self.slice.weights();
        let mut f = self.value(&w);
        let mut alpha: f64 = 1.0;
        let mut gnorm = f64::INFINITY;
        let mut stagnant = 0;
        for it in 0..opts.max_iterations {
            let g = self.gradient(&w);
            let pg = self.precondition(&g)?;
            let ww: Vec<f64> = weights.iter().zip(&w).map(|(a, b)| a * b).collect();
            let pw = self.precondition(&ww)?;
            let num: f64 = ww.iter().zip(&pg).map(|(a, b)| a * b).sum();
            let den: f64 = ww.iter().zip(&pw).map(|(a, b)| a * b).sum();
            let lambda = num / den;
            let d: Vec<f64> = pg.iter().zip(&pw).map(|(a, b)| a - lambda * b).collect();
            let slope: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
            gnorm = slope.max(0.0).sqrt();
            let at_roundoff = slope <= 1e-12 * f.abs().max(1.0);
            if gnorm < opts.gradient_tolerance {
                return Ok(Descent::new(w, f, it, gnorm, true));
            }
            alpha = (2.0 * alpha).min(1.0);
            let mut accepted = None;
            for _ in 0..60 {
                let mut trial: Vec<f64> = w.iter().zip(&d).map(|(a, b)| a - alpha * b).collect();
                self.normalize(&mut trial);
                let ft = self.value(&trial);
                if ft <= f - 1e-4 * alpha * slope {
                    accepted = Some((trial, ft));
                    break;
                }
                alpha *= 0.5;
            }
            let Some((trial, ft)) = accepted else {
                return Ok(Descent::new(w, f, it, gnorm, at_roundoff));
            };
            if f - ft <= 1e-15 * f.abs().max(1.0) {
                stagnant += 1;
                if stagnant >= 10 {
                    return Ok(Descent::new(trial, ft, it + 1, gnorm, at_roundoff));
                }
            } else {
                stagnant = 0;
            }
            w = trial;
            f = ft;
        }
        Ok(Descent::new(w, f, opts.max_iterations, gnorm, false))
    }
}

struct Descent {
    w: Vec<f64>,
    value: f64,
    iterations: usize,
    gradient_norm: f64,
    converged: bool,
}

impl Descent {
    fn new(w: Vec<f64>, value: f64, iterations: usize, gradient_norm: f64, converged: bool) -> Self {
        Descent {
            w,
            value,
            iterations,
            gradient_norm,
            converged,
        }
    }
}

/// Seeds for the multi-start: a Gaussian at the region centre, the uniform
/// function, then randomly placed and sized Gaussians with multiplicative noise.
fn starting_points(
    slice: &MetricSlice,
    region: &Region,
    tau: f64,
    opts: &MuOptions,
) -> Result<Vec<Vec<f64>>> {
    let center_dist = slice.distances_from(region.center())?;
    let gaussian = |d: &[f64], scale: f64| -> Vec<f64> {
        d.iter().map(|x| (-x * x / (8.0 * scale)).exp()).collect()
    };
    let mut starts = Vec::with_capacity(opts.starts);
    if opts.starts > 0 {
        starts.push(gaussian(&center_dist, tau));
    }
    if opts.starts > 1 {
        starts.push(vec![1.0; slice.len()]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let nodes: Vec<usize> = (0..slice.len()).filter(|&i| region.mask()[i]).collect();
    for _ in 2..opts.starts {
        let scale = tau * 2f64.powf(rng.gen_range(-2.0..2.0));
        let base = if slice.kind().is_radial() {
            let reach = center_dist
                .iter()
                .zip(region.mask())
                .filter(|(_, m)| **m)
                .fold(0.0_f64, |a, (d, _)| a.max(*d));
            let offset = rng.gen_range(0.0..=0.5 * reach);
            let shifted: Vec<f64> = center_dist.iter().map(|d| d - offset).collect();
            gaussian(&shifted, scale)
        } else {
            let c = nodes[rng.gen_range(0..nodes.len())];
            gaussian(&slice.distances_from(Point::Node(c))?, scale)
        };
        starts.push(
            base.into_iter()
                .map(|b| b * (1.0 + 0.3 * rng.gen_range(-1.0..1.0)))
                .collect(),
        );
    }
    Ok(starts)
}

/// `μ(Ω, g, τ)` by multi-start projected descent; `warm` adds one more start.
pub fn mu_local(
    slice: &MetricSlice,
    region: &Region,
    tau: f64,
    opts: &MuOptions,
    warm: Option<&TestFunction>,
) -> Result<MuResult> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!("scale τ = {tau} must be positive")));
    }
    if region.mask().len() != slice.len() {
        return Err(Error::InvalidArgument("region does not match slice".into()));
    }
    let problem = Problem::new(slice, region, tau);
    let mut starts = starting_points(slice, region, tau, opts)?;
    if let Some(w) = warm {
        starts.push(w.values.clone());
    }
    let mut best: Option<Descent> = None;
    let mut start_values = Vec::with_capacity(starts.len());
    let mut iterations = 0;
    for start in starts {
        let feasible = TestFunction::feasible(slice, region, start)?;
        let run = problem.descend(feasible.values, opts)?;
        iterations += run.iterations;
        start_values.push(run.value);
        if best.as_ref().is_none_or(|b| run.value < b.value) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one start");
    let minimizer = TestFunction::feasible(slice, region, best.w)?;
    let value = w_bar(slice, &minimizer.density(), tau)?;
    Ok(MuResult {
        value,
        tau,
        minimizer,
        iterations,
        gradient_norm: best.gradient_norm,
        converged: best.converged,
        start_values,
    })
}

/// Euler–Lagrange residual `τ(−4Δw + Rw) − w log w² − (1 + λ)w` in `L²(dg)`
/// on the region, with `λ` fixed by pairing against `w`.
pub fn euler_lagrange_residual(
    slice: &MetricSlice,
    region: &Region,
    tau: f64,
    w: &TestFunction,
) -> (f64, f64) {
    let weights = slice.weights();
    let r = slice.curvature();
    let mut kw = vec![0.0; w.values.len()];
    slice.dirichlet_form().apply(&w.values, &mut kw);
    let op: Vec<f64> = (0..kw.len())
        .map(|i| {
            let x = w.values[i];
            if !region.mask()[i] || weights[i] == 0.0 {
                return 0.0;
            }
            let log = if x != 0.0 { 2.0 * x.abs().ln() } else { 0.0 };
            tau * (4.0 * kw[i] / weights[i] + r[i] * x) - x * log - x
        })
        .collect();
    let lambda: f64 = (0..op.len()).map(|i| weights[i] * op[i] * w.values[i]).sum();
    let residual = (0..op.len())
        .map(|i| {
            let e = op[i] - lambda * w.values[i];
            weights[i] * e * e
        })
        .sum::<f64>()
        .sqrt();
    (residual, lambda)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NuResult {
    pub value: f64,
    pub argmin: f64,
    pub tau: f64,
    /// `(s, μ(s))` for every evaluated scale, sorted by `s`.
    pub table: Vec<(f64, f64)>,
    pub converged: bool,
    #[serde(skip)]
    pub minimizers: Vec<TestFunction>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NuOptions {
    /// Number of log-spaced scales in `(τ/100, τ]`.
    #[serde(default = "default_points")]
    pub points: usize,
    /// Adjacent values further apart than this trigger a grid refinement.
    #[serde(default = "default_gate")]
    pub gate: f64,
    /// Golden-section evaluations around the grid argmin.
    #[serde(default = "default_polish")]
    pub polish: usize,
}

fn default_points() -> usize {
    12
}

fn default_gate() -> f64 {
    5e-2
}

fn default_polish() -> usize {
    6
}

impl Default for NuOptions {
    fn default() -> Self {
        NuOptions {
            points: default_points(),
            gate: default_gate(),
            polish: default_polish(),
        }
    }
}

/// `points` log-spaced scales in `(τ/100, τ]`, increasing.
pub fn log_scales(tau: f64, points: usize) -> Vec<f64> {
    (0..points)
        .rev()
        .map(|k| tau * 100f64.powf(-(k as f64) / points as f64))
        .collect()
}

/// `ν(Ω, g, τ) = inf_{0<s≤τ} μ(Ω, g, s)` over a gated log grid, refined
/// around the minimum by golden-section search in `log s`.
pub fn nu_local(
    slice: &MetricSlice,
    region: &Region,
    tau: f64,
    nu_opts: &NuOptions,
    mu_opts: &MuOptions,
) -> Result<NuResult> {
    nu_on_scales(slice, region, tau, &resolved_scales(slice, tau, nu_opts.points), nu_opts, mu_opts)
}

/// Scales below twice the squared mesh width see single nodes rather than
/// the geometry.
pub fn scale_floor(slice: &MetricSlice) -> f64 {
    2.0 * slice.mesh_width().powi(2)
}

/// [`log_scales`] with the lower end raised to [`scale_floor`] when it lies
/// below it. Falls back to `[τ]` when τ itself is under the floor.
pub fn resolved_scales(slice: &MetricSlice, tau: f64, points: usize) -> Vec<f64> {
    let floor = scale_floor(slice);
    if tau <= floor {
        return vec![tau];
    }
    if tau / 100.0 >= floor {
        return log_scales(tau, points);
    }
    let span = (tau / floor).ln();
    (0..points)
        .rev()
        .map(|k| tau * (-span * k as f64 / (points - 1).max(1) as f64).exp())
        .collect()
}

/// As [`nu_local`] with an explicit increasing grid of scales in `(0, τ]`.
pub fn nu_on_scales(
    slice: &MetricSlice,
    region: &Region,
    tau: f64,
    scales: &[f64],
    nu_opts: &NuOptions,
    mu_opts: &MuOptions,
) -> Result<NuResult> {
    if scales.is_empty()
        || scales.windows(2).any(|w| !(w[1] > w[0]))
        || !(scales[0] > 0.0)
        || scales[scales.len() - 1] > tau
    {
        return Err(Error::InvalidArgument("scale grid must be increasing in (0, τ]".into()));
    }
    let mut evals: Vec<(f64, MuResult)> = Vec::new();
    let solve = |s: f64, evals: &mut Vec<(f64, MuResult)>| -> Result<()> {
        let warm = evals
            .iter()
            .min_by(|a, b| (a.0.ln() - s.ln()).abs().total_cmp(&(b.0.ln() - s.ln()).abs()))
            .map(|(_, r)| r.minimizer.clone());
        let r = mu_local(slice, region, s, mu_opts, warm.as_ref())?;
        evals.push((s, r));
        evals.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(())
    };
    for &s in scales {
        solve(s, &mut evals)?;
    }
    // gate: refine between neighbours whose values jump
    for _ in 0..2 {
        let gaps: Vec<f64> = evals
            .windows(2)
            .filter(|w| (w[0].1.value - w[1].1.value).abs() > nu_opts.gate)
            .map(|w| (w[0].0 * w[1].0).sqrt())
            .collect();
        if gaps.is_empty() {
            break;
        }
        for s in gaps {
            solve(s, &mut evals)?;
        }
    }
    // golden-section polish in log s around the grid argmin
    let k = argmin(&evals);
    if nu_opts.polish > 0 && evals.len() >= 3 && k > 0 && k + 1 < evals.len() {
        let (mut a, mut b) = (evals[k - 1].0.ln(), evals[k + 1].0.ln());
        let ratio = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..nu_opts.polish / 2 {
            let c = b - ratio * (b - a);
            let d = a + ratio * (b - a);
            solve(c.exp(), &mut evals)?;
            solve(d.exp(), &mut evals)?;
            let fc = value_at(&evals, c.exp());
            let fd = value_at(&evals, d.exp());
            if fc <= fd {
                b = d;
            } else {
                a = c;
            }
        }
    }
    let k = argmin(&evals);
    Ok(NuResult {
        value: evals[k].1.value,
        argmin: evals[k].0,
        tau,
        table: evals.iter().map(|(s, r)| (*s, r.value)).collect(),
        converged: evals.iter().all(|(_, r)| r.converged),
        minimizers: evals.into_iter().map(|(_, r)| r.minimizer).collect(),
    })
}

fn argmin(evals: &[(f64, MuResult)]) -> usize {
    (0..evals.len())
        .min_by(|&i, &j| evals[i].1.value.total_cmp(&evals[j].1.value))
        .expect("nonempty")
}

fn value_at(evals: &[(f64, MuResult)], s: f64) -> f64 {
    evals
        .iter()
        .find(|(x, _)| *x == s)
        .map(|(_, r)| r.value)
        .unwrap_or(f64::INFINITY)
}

/// A random feasible test function: a few Gaussian bumps of random width
/// and placement with multiplicative noise, restricted to the region.
pub fn random_test_function(
    slice: &MetricSlice,
    region: &Region,
    tau: f64,
    rng: &mut impl Rng,
) -> Result<TestFunction> {
    let center_dist = slice.distances_from(region.center())?;
    let nodes: Vec<usize> = (0..slice.len()).filter(|&i| region.mask()[i]).collect();
    let reach = nodes.iter().fold(0.0_f64, |a, &i| a.max(center_dist[i]));
    let mut w = vec![0.0; slice.len()];
    let bumps = rng.gen_range(1..=3);
    for _ in 0..bumps {
        let scale = tau * 4f64.powf(rng.gen_range(-2.0..2.0));
        let amplitude = rng.gen_range(0.2..1.0);
        let dist = if slice.kind().is_radial() {
            let offset = rng.gen_range(0.0..=reach);
            center_dist.iter().map(|d| d - offset).collect::<Vec<_>>()
        } else {
            slice.distances_from(Point::Node(nodes[rng.gen_range(0..nodes.len())]))?
        };
        for (x, d) in w.iter_mut().zip(&dist) {
            *x += amplitude * (-d * d / (8.0 * scale)).exp();
        }
    }
    let noise = rng.gen_range(0.0..0.5);
    for x in w.iter_mut() {
        *x *= 1.0 + noise * rng.gen_range(-1.0..1.0);
    }
    TestFunction::feasible(slice, region, w)
}

/// `W̄(w², τ) − μ_ref`: the log-Sobolev inequality at reference constant `μ_ref`.
pub fn logsobolev_check(slice: &MetricSlice, tau: f64, w: &TestFunction, mu_ref: f64) -> Result<f64> {
    Ok(w_bar(slice, &w.density(), tau)? - mu_ref)
}

/// Sharp Euclidean Sobolev constant: `‖u‖²_{2n/(n−2)} ≤ K(n)² ‖∇u‖²₂`.
pub fn aubin_talenti_constant_sq(n: usize) -> f64 {
    let nf = n as f64;
    4.0 / (nf * (nf - 2.0) * unit_sphere_area(n).powf(2.0 / nf))
}

/// Dimensional constant of the local Sobolev inequality: the sharp Euclidean
/// constant (against `4|∇u|²`) with ten percent slack.
pub fn sobolev_constant(n: usize) -> f64 {
    1.1 * aubin_talenti_constant_sq(n) / 4.0
}

/// Both sides of the local Sobolev inequality.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SobolevSides {
    pub lhs: f64,
    pub rhs: f64,
}

impl SobolevSides {
    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }
}

/// `(∫|u|^{2n/(n−2)})^{(n−2)/n}` against
/// `c e^{−2ν₀/n − cτR_min} ∫(4|∇u|² + (R − R_min + c/τ)u²)`.
pub fn sobolev_check(
    slice: &MetricSlice,
    u: &TestFunction,
    nu0: f64,
    tau: f64,
    r_min: f64,
    c: f64,
) -> Result<SobolevSides> {
    let n = slice.dim();
    if n < 3 {
        return Err(Error::Precondition(format!("Sobolev exponent needs n ≥ 3, got {n}")));
    }
    let nf = n as f64;
    let p = 2.0 * nf / (nf - 2.0);
    let weights = slice.weights();
    let r = slice.curvature();
    let lp: f64 = weights
        .iter()
        .zip(&u.values)
        .map(|(w, x)| w * x.abs().powf(p))
        .sum();
    let lhs = lp.powf((nf - 2.0) / nf);
    let mut energy = 4.0 * slice.dirichlet_form().energy(&u.values);
    for i in 0..u.values.len() {
        energy += weights[i] * (r[i] - r_min + c / tau) * u.values[i] * u.values[i];
    }
    let rhs = c * (-2.0 * nu0 / nf - c * tau * r_min).exp() * energy;
    Ok(SobolevSides { lhs, rhs })
}

/// `log α − 4n(A + τ) − C(n)`.
pub fn volume_to_nu_bound(alpha: f64, a: f64, tau: f64, n: usize, c_n: f64) -> Result<f64> {
    if !(alpha > 0.0 && a > 0.0 && tau > 0.0) {
        return Err(Error::InvalidArgument("α, A and τ must be positive".into()));
    }
    Ok(alpha.ln() - 4.0 * n as f64 * (a + tau) - c_n)
}

/// Constant of the cutoff argument: plugging `η/‖η‖` with `η = 1` on
/// `B(ρ/2)`, `η = 0` off `B(ρ)` and `|∇η| ≤ 2/ρ` into `μ` at scale `ρ²`,
/// with volume doubling `|B(ρ)| ≤ 2ⁿ|B(ρ/2)|`, gives
/// `log(|B(ρ)|/ρⁿ) ≥ ν₀ − (1 + 16·2ⁿ − n − (n/2)log 4π)`.
pub fn cutoff_constant(n: usize) -> f64 {
    let nf = n as f64;
    1.0 + 16.0 * 2f64.powi(n as i32) - nf - 0.5 * nf * (4.0 * PI).ln()
}

/// Volume lower bound `κρⁿ` with `κ = exp(ν₀ − c₀)` for a ball on which
/// `sup R ≤ ρ⁻²`.
pub fn noncollapse_bound(nu0: f64, rho: f64, sup_r: f64, n: usize, c0: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument(format!("radius {rho} must be positive")));
    }
    if sup_r > rho.powi(-2) {
        return Err(Error::Precondition(format!(
            "sup R = {sup_r} exceeds ρ⁻² = {}",
            rho.powi(-2)
        )));
    }
    Ok((nu0 - c0).exp() * rho.powi(n as i32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GeometryModel;

    fn euclid() -> MetricSlice {
        GeometryModel::euclidean(3, 20.0, 512).build(0.0).unwrap().1
    }

    #[test]
    fn euclidean_ball_mu_is_zero() {
        let e = euclid();
        let ball = Region::ball(&e, Point::North, 15.0).unwrap();
        let r = mu_local(&e, &ball, 1.0, &MuOptions::default(), None).unwrap();
        assert!(r.value.abs() < 5e-3, "μ = {}", r.value);
        let again = w_bar(&e, &r.minimizer.density(), 1.0).unwrap();
        assert_eq!(again, r.value);
        // minimizer close to the Gaussian
        let rad = e.radial_coordinates().unwrap();
        let g: Vec<f64> = rad.iter().map(|x| (4.0 * PI).powf(-0.75) * (-x * x / 8.0).exp()).collect();
        let dev = l2_norm(&e, &r.minimizer.values.iter().zip(&g).map(|(a, b)| a - b).collect::<Vec<_>>());
        assert!(dev < 1e-2, "deviation {dev}");
    }

    #[test]
    fn smaller_regions_have_larger_mu() {
        let e = GeometryModel::euclidean(3, 10.0, 128).build(0.0).unwrap().1;
        let small = Region::ball(&e, Point::North, 1.5).unwrap();
        let large = Region::ball(&e, Point::North, 4.0).unwrap();
        assert!(small.is_subset_of(&large));
        let opts = MuOptions::default();
        let a = mu_local(&e, &small, 1.0, &opts, None).unwrap().value;
        let b = mu_local(&e, &large, 1.0, &opts, None).unwrap().value;
        assert!(a >= b - 1e-6, "{a} < {b}");
    }

    #[test]
    fn random_search_never_beats_the_solver() {
        let e = GeometryModel::euclidean(3, 10.0, 128).build(0.0).unwrap().1;
        let ball = Region::ball(&e, Point::North, 3.0).unwrap();
        let r = mu_local(&e, &ball, 0.5, &MuOptions::default(), None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let w = random_test_function(&e, &ball, 0.5, &mut rng).unwrap();
            assert!(logsobolev_check(&e, 0.5, &w, r.value).unwrap() >= -1e-6);
        }
        assert!(logsobolev_check(&e, 0.5, &r.minimizer, r.value).unwrap().abs() < 1e-12);
    }

    #[test]
    fn minimizer_satisfies_euler_lagrange() {
        let e = GeometryModel::euclidean(3, 10.0, 128).build(0.0).unwrap().1;
        let ball = Region::ball(&e, Point::North, 3.0).unwrap();
        let opts = MuOptions {
            gradient_tolerance: 1e-9,
            ..MuOptions::default()
        };
        let r = mu_local(&e, &ball, 0.5, &opts, None).unwrap();
        let (res, _) = euler_lagrange_residual(&e, &ball, 0.5, &r.minimizer);
        assert!(res < 1e-5, "residual {res}");
    }

    #[test]
    fn nu_bounds_mu() {
        let e = GeometryModel::euclidean(3, 10.0, 128).build(0.0).unwrap().1;
        let ball = Region::ball(&e, Point::North, 3.0).unwrap();
        let opts = MuOptions::default();
        let nu = nu_local(&e, &ball, 1.0, &NuOptions::default(), &opts).unwrap();
        let mu = mu_local(&e, &ball, 1.0, &opts, None).unwrap();
        assert!(nu.value <= mu.value + 1e-9);
        assert!(nu.table.len() >= 8);
    }

    #[test]
    fn rejects_degenerate_regions() {
        let e = euclid();
        assert!(Region::ball(&e, Point::North, 0.1).is_err());
        assert!(Region::ball(&e, Point::North, -1.0).is_err());
    }

    #[test]
    fn scale_grid_is_log_spaced() {
        let s = log_scales(2.0, 12);
        assert_eq!(s.len(), 12);
        assert_eq!(*s.last().unwrap(), 2.0);
        assert!(s[0] > 0.02);
        let r = s[1] / s[0];
        assert!(s.windows(2).all(|w| (w[1] / w[0] - r).abs() < 1e-12));
    }

    #[test]
    fn constants() {
        // sharp constant in three dimensions: 1 / (3 (π/2)^{4/3})
        let k = 1.0 / (3.0 * (PI / 2.0).powf(4.0 / 3.0));
        assert!((aubin_talenti_constant_sq(3) - k).abs() < 1e-12);
        assert!((volume_to_nu_bound(1.0, 1.0, 1.0, 3, 30.0).unwrap() + 54.0).abs() < 1e-12);
        assert!((cutoff_constant(3) - 122.2).abs() < 0.05);
    }

    #[test]
    fn noncollapse_bound_behaviour() {
        let c0 = cutoff_constant(3);
        let b = noncollapse_bound(0.0, 1.0, 0.0, 3, c0).unwrap();
        assert!(b <= 4.0 * PI / 3.0);
        assert!(noncollapse_bound(0.1, 1.0, 0.0, 3, c0).unwrap() > b);
        assert!(matches!(
            noncollapse_bound(0.0, 0.5, 6.0, 3, c0),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn sobolev_on_euclidean_ball() {
        let e = GeometryModel::euclidean(3, 10.0, 256).build(0.0).unwrap().1;
        let ball = Region::ball(&e, Point::North, 3.0).unwrap();
        let rad = e.radial_coordinates().unwrap();
        let bump: Vec<f64> = rad.iter().map(|r| (1.0 - (r / 3.0).powi(2)).max(0.0).powi(2)).collect();
        let u = TestFunction::feasible(&e, &ball, bump).unwrap();
        let c = sobolev_constant(3);
        let sides = sobolev_check(&e, &u, 0.0, 1.0, 0.0, c).unwrap();
        assert!(sides.margin() > 0.0);
        let scaled = TestFunction {
            values: u.values.iter().map(|x| 3.0 * x).collect(),
        };
        let s2 = sobolev_check(&e, &scaled, 0.0, 1.0, 0.0, c).unwrap();
        assert!((s2.lhs / sides.lhs - 9.0).abs() < 1e-9 && (s2.rhs / sides.rhs - 9.0).abs() < 1e-9);
        let torus = GeometryModel::torus([1.0, 1.0], 16, vec![]).build(0.0).unwrap().1;
        let whole = Region::whole(&torus).unwrap();
        let w = TestFunction::feasible(&torus, &whole, vec![1.0; 256]).unwrap();
        assert!(sobolev_check(&torus, &w, 0.0, 1.0, 0.0, c).is_err());
    }
}
