//! Entropy functionals of densities and of conjugate heat kernels.
//!
//! Nash entropies use the normalization `N = ∫ f dν − n/2`, under which the
//! Euclidean heat kernel has `N ≡ 0` and `0 ≥ N ≥ W` holds in general.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::Serialize;

use crate::conjugate_heat::{kernel_flow, support_mask, ConjugateOptions, DensityFlow, DENSITY_FLOOR};
use crate::error::{Error, Result};
use crate::flow::FlowSpacetime;
use crate::geometry::{MetricSlice, Point};

/// The pieces of `W̄(g, u, τ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WBarParts {
    /// `∫ 4|∇√u|² dg`.
    pub fisher: f64,
    /// `∫ R u dg`.
    pub curvature: f64,
    /// `∫ u log u dg` over the support mask.
    pub entropy: f64,
    pub mass: f64,
    pub mask_fraction: f64,
}

impl WBarParts {
    pub fn compute(slice: &MetricSlice, u: &[f64]) -> Result<Self> {
        if u.len() != slice.len() {
            return Err(Error::InvalidArgument(format!(
                "density has {} values, slice has {} nodes",
                u.len(),
                slice.len()
            )));
        }
        if let Some((node, &value)) = u.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::NegativeDensity { node, value });
        }
        let mass = slice.integrate(u)?;
        if !(mass > 0.0) {
            return Err(Error::EmptyMask);
        }
        let mask = support_mask(u, DENSITY_FLOOR);
        let root: Vec<f64> = u.iter().map(|x| x.sqrt()).collect();
        let fisher = 4.0 * slice.dirichlet_form().energy(&root);
        let w = slice.weights();
        let r = slice.curvature();
        let mut curvature = 0.0;
        let mut entropy = 0.0;
        let mut on = 0usize;
        for i in 0..u.len() {
            curvature += w[i] * r[i] * u[i];
            if mask[i] {
                entropy += w[i] * u[i] * u[i].ln();
                on += 1;
            }
        }
        Ok(WBarParts {
            fisher,
            curvature,
            entropy,
            mass,
            mask_fraction: on as f64 / u.len() as f64,
        })
    }

    /// `W̄ = τ(∫4|∇√u|² + ∫Ru) − ∫u log u − (n/2)log(4πτ) − n`.
    pub fn w_bar(&self, tau: f64, n: usize) -> f64 {
        let nf = n as f64;
        tau * (self.fisher + self.curvature) - self.entropy - 0.5 * nf * (4.0 * PI * tau).ln() - nf
    }

    /// `N̄ = ∫ f u dg − n/2` with `u = (4πτ)^{−n/2}e^{−f}`.
    pub fn nash(&self, tau: f64, n: usize) -> f64 {
        let nf = n as f64;
        -self.entropy - 0.5 * nf * (4.0 * PI * tau).ln() * self.mass - 0.5 * nf
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("scale τ = {tau} must be positive")))
    }
}

/// `W̄(g, u, τ)` with the gradient term written as `4|∇√u|²`.
pub fn w_bar(slice: &MetricSlice, u: &[f64], tau: f64) -> Result<f64> {
    check_tau(tau)?;
    Ok(WBarParts::compute(slice, u)?.w_bar(tau, slice.dim()))
}

/// `∫ f u dg − n/2`.
pub fn nash_bar(slice: &MetricSlice, u: &[f64], tau: f64) -> Result<f64> {
    check_tau(tau)?;
    Ok(WBarParts::compute(slice, u)?.nash(tau, slice.dim()))
}

/// Nash entropy and pointed W along one kernel flow.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntropyCurve {
    pub basepoint: Point,
    pub t0: f64,
    pub tau: Vec<f64>,
    pub nash: Vec<f64>,
    pub w: Vec<f64>,
    pub mass_err: Vec<f64>,
    pub mask_fraction: Vec<f64>,
}

impl EntropyCurve {
    /// Worst violation of `N(τ_{k+1}) ≤ N(τ_k)` and `W(τ_{k+1}) ≤ W(τ_k)`;
    /// nonnegative when both are nonincreasing.
    pub fn monotonicity_margin(&self) -> f64 {
        let step = |v: &[f64]| {
            v.windows(2)
                .map(|p| p[0] - p[1])
                .fold(f64::INFINITY, f64::min)
        };
        step(&self.nash).min(step(&self.w))
    }

    /// Worst violation of `0 ≥ N ≥ W`.
    pub fn ordering_margin(&self) -> f64 {
        self.nash
            .iter()
            .zip(&self.w)
            .map(|(n, w)| (-n).min(n - w))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau,N,W,mass_err,mask_fraction\n");
        for i in 0..self.tau.len() {
            let _ = writeln!(
                out,
                "{:e},{:e},{:e},{:e},{:e}",
                self.tau[i], self.nash[i], self.w[i], self.mass_err[i], self.mask_fraction[i]
            );
        }
        out
    }
}

/// Entropy curve read off an already solved kernel flow at gaps `taus`.
pub fn curve_from_kernel(kernel: &DensityFlow, taus: &[f64]) -> Result<EntropyCurve> {
    let (x0, t0) = match (kernel.basepoint(), kernel.base_time()) {
        (Some(x), Some(t)) => (x, t),
        _ => return Err(Error::Precondition("entropy curves need a kernel flow".into())),
    };
    let mut curve = EntropyCurve {
        basepoint: x0,
        t0,
        tau: Vec::with_capacity(taus.len()),
        nash: Vec::new(),
        w: Vec::new(),
        mass_err: Vec::new(),
        mask_fraction: Vec::new(),
    };
    for &tau in taus {
        check_tau(tau)?;
        let (slice, u) = kernel.slice_and_field(t0 - tau)?;
        let parts = WBarParts::compute(slice, u)?;
        curve.tau.push(tau);
        curve.nash.push(parts.nash(tau, slice.dim()));
        curve.w.push(parts.w_bar(tau, slice.dim()));
        curve.mass_err.push(parts.mass - 1.0);
        curve.mask_fraction.push(parts.mask_fraction);
    }
    Ok(curve)
}

/// `τ ↦ (N_{x0,t0}(τ), W_{x0,t0}(τ))` on an increasing grid of scales.
pub fn entropy_curve(
    flow: &FlowSpacetime,
    x0: Point,
    t0: f64,
    taus: &[f64],
    opts: &ConjugateOptions,
) -> Result<EntropyCurve> {
    if taus.is_empty() || taus.windows(2).any(|w| !(w[1] > w[0])) || !(taus[0] > 0.0) {
        return Err(Error::InvalidArgument(
            "scale grid must be positive and increasing".into(),
        ));
    }
    let record: Vec<f64> = taus.iter().map(|tau| t0 - tau).collect();
    let t_end = t0 - taus[taus.len() - 1];
    let kernel = kernel_flow(flow, x0, t0, t_end, &record, opts)?;
    curve_from_kernel(&kernel, taus)
}

/// `N_{x0,t0}(τ)`.
pub fn nash_entropy(
    flow: &FlowSpacetime,
    x0: Point,
    t0: f64,
    tau: f64,
    opts: &ConjugateOptions,
) -> Result<f64> {
    Ok(entropy_curve(flow, x0, t0, &[tau], opts)?.nash[0])
}

/// `W_{x0,t0}(τ) = W̄(g_{t0−τ}, K(x0,t0|·,t0−τ), τ)`.
pub fn pointed_w(
    flow: &FlowSpacetime,
    x0: Point,
    t0: f64,
    tau: f64,
    opts: &ConjugateOptions,
) -> Result<f64> {
    Ok(entropy_curve(flow, x0, t0, &[tau], opts)?.w[0])
}

/// Residuals of `−d/dt(τ_t N̄(t)) = W̄(t)` with `τ_t = τ0 − t`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityReport {
    pub times: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub relative_residual: Vec<f64>,
}

impl IdentityReport {
    pub fn max_residual(&self) -> f64 {
        self.relative_residual.iter().fold(0.0, |m, r| m.max(*r))
    }
}

fn scales(density: &DensityFlow, tau0: f64) -> Result<Vec<f64>> {
    density
        .times()
        .iter()
        .map(|t| {
            let tau = tau0 - t;
            check_tau(tau).map(|_| tau)
        })
        .collect()
}

/// Differentiates `τ_t N̄(t)` on the stored ladder with three-point
/// nonuniform central differences and compares with `W̄(t)`.
pub fn nash_derivative_identity_check(density: &DensityFlow, tau0: f64) -> Result<IdentityReport> {
    if density.len() < 5 {
        return Err(Error::Precondition(format!(
            "identity check needs at least 5 stored times, got {}",
            density.len()
        )));
    }
    let times = density.times();
    let taus = scales(density, tau0)?;
    let mut product = Vec::with_capacity(times.len());
    let mut wbar = Vec::with_capacity(times.len());
    for ((slice, u), &tau) in density.slices().iter().zip(density.fields()).zip(&taus) {
        let parts = WBarParts::compute(slice, u)?;
        product.push(tau * parts.nash(tau, slice.dim()));
        wbar.push(parts.w_bar(tau, slice.dim()));
    }
    let mut report = IdentityReport {
        times: Vec::new(),
        lhs: Vec::new(),
        rhs: Vec::new(),
        relative_residual: Vec::new(),
    };
    for k in 1..times.len() - 1 {
        let (h0, h1) = (times[k] - times[k - 1], times[k + 1] - times[k]);
        let derivative = -h1 / (h0 * (h0 + h1)) * product[k - 1]
            + (h1 - h0) / (h0 * h1) * product[k]
            + h0 / (h1 * (h0 + h1)) * product[k + 1];
        let lhs = -derivative;
        report.times.push(times[k]);
        report.lhs.push(lhs);
        report.rhs.push(wbar[k]);
        report
            .relative_residual
            .push((lhs - wbar[k]).abs() / wbar[k].abs().max(1.0));
    }
    Ok(report)
}

/// Per-step margins `W̄(t_{k+1}) − W̄(t_k)` along a conjugate heat flow.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl MonotonicityReport {
    pub fn margins(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn worst_margin(&self) -> f64 {
        self.margins().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.worst_margin() >= -tolerance
    }
}

/// `W̄(t)` with `τ_t = τ0 − t` at every stored time, for the check that it
/// is nondecreasing in `t`.
pub fn w_monotonicity_check(density: &DensityFlow, tau0: f64) -> Result<MonotonicityReport> {
    let taus = scales(density, tau0)?;
    let values = density
        .slices()
        .iter()
        .zip(density.fields())
        .zip(&taus)
        .map(|((slice, u), &tau)| w_bar(slice, u, tau))
        .collect::<Result<Vec<_>>>()?;
    Ok(MonotonicityReport {
        times: density.times(),
        values,
    })
}

/// `Σ p_i ∫K_i log K_i − ∫ū log ū` for the mixture `ū = Σ p_i K_i`;
/// nonnegative by convexity of `x log x`.
pub fn jensen_margin(slice: &MetricSlice, members: &[(f64, &[f64])]) -> Result<f64> {
    let total: f64 = members.iter().map(|(p, _)| p).sum();
    if members.is_empty() || (total - 1.0).abs() > 1e-12 || members.iter().any(|(p, _)| *p < 0.0) {
        return Err(Error::InvalidArgument("mixture weights must form a probability vector".into()));
    }
    let mut mix = vec![0.0; slice.len()];
    let mut average = 0.0;
    for (p, u) in members {
        for (m, x) in mix.iter_mut().zip(u.iter()) {
            *m += p * x;
        }
        average += p * WBarParts::compute(slice, u)?.entropy;
    }
    Ok(average - WBarParts::compute(slice, &mix)?.entropy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conjugate_heat::solve_conjugate;
    use crate::flow::{evolve_ricci, StepPolicy};
    use crate::geometry::{GeometryModel, ScalarField};

    fn gaussian(slice: &MetricSlice, tau: f64) -> Vec<f64> {
        slice
            .radial_coordinates()
            .unwrap()
            .iter()
            .map(|r| (4.0 * PI * tau).powf(-1.5) * (-r * r / (4.0 * tau)).exp())
            .collect()
    }

    #[test]
    fn gaussian_is_critical() {
        let (_, e) = GeometryModel::euclidean(3, 20.0, 512).build(0.0).unwrap();
        for tau in [0.25, 1.0, 4.0] {
            let u = gaussian(&e, tau);
            let w = w_bar(&e, &u, tau).unwrap();
            assert!(w.abs() < 1e-4, "tau {tau}: {w}");
            assert!(nash_bar(&e, &u, tau).unwrap().abs() < 1e-6);
        }
    }

    #[test]
    fn uniform_density_on_round_sphere() {
        let (_, s) = GeometryModel::sphere(3, 1.0, 128).build(0.0).unwrap();
        let u = vec![1.0 / (2.0 * PI * PI); s.len()];
        let tau = 0.1;
        // τR − log u − (n/2)log(4πτ) − n with every integrand constant
        let expected = tau * 6.0 + (2.0 * PI * PI).ln() - 1.5 * (0.4 * PI).ln() - 3.0;
        assert!((expected - 0.239_948_221_295_878).abs() < 1e-12);
        assert!((w_bar(&s, &u, tau).unwrap() - expected).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_arguments() {
        let (_, e) = GeometryModel::euclidean(3, 20.0, 64).build(0.0).unwrap();
        let u = gaussian(&e, 1.0);
        assert!(w_bar(&e, &u, 0.0).is_err());
        assert!(w_bar(&e, &vec![0.0; 64], 1.0).is_err());
    }

    #[test]
    fn euclidean_curve_is_flat_and_ordered() {
        let (_, e) = GeometryModel::euclidean(3, 20.0, 512).build(-4.0).unwrap();
        let flow = evolve_ricci(&e, (-4.0, 0.0), StepPolicy::default()).unwrap();
        let taus = [0.25, 0.5, 1.0, 2.0, 4.0];
        let curve = entropy_curve(&flow, Point::North, 0.0, &taus, &Default::default()).unwrap();
        for i in 0..taus.len() {
            assert!(curve.nash[i].abs() < 1e-3, "N({}) = {}", taus[i], curve.nash[i]);
            assert!(curve.w[i].abs() < 1e-3, "W({}) = {}", taus[i], curve.w[i]);
        }
        assert!(curve.mass_err.iter().all(|m| m.abs() < 1e-10));
        let csv = curve.to_csv();
        assert!(csv.starts_with("tau,N,W,mass_err,mask_fraction\n"));
        assert_eq!(csv.lines().count(), 6);
        let single = entropy_curve(&flow, Point::North, 0.0, &[1.0], &Default::default()).unwrap();
        assert_eq!(single.tau.len(), 1);
    }

    #[test]
    fn identity_on_gaussian_flow() {
        let (_, e) = GeometryModel::euclidean(3, 20.0, 512).build(-1.0).unwrap();
        let flow = evolve_ricci(&e, (-1.0, 0.0), StepPolicy::default()).unwrap();
        let s0 = flow.slice_at(0.0).unwrap();
        let u = ScalarField::new(gaussian(&s0, 0.5)).unwrap();
        let sol = solve_conjugate(&flow, &u, 0.0, -1.0, &[], &Default::default()).unwrap();
        let report = nash_derivative_identity_check(&sol, 0.5).unwrap();
        assert!(report.max_residual() < 1e-3, "{}", report.max_residual());
        let mono = w_monotonicity_check(&sol, 0.5).unwrap();
        assert!(mono.values.iter().all(|w| w.abs() < 1e-3));
        let short = sol.since(-0.0005);
        assert!(nash_derivative_identity_check(&short, 0.5).is_err());
    }

    #[test]
    fn jensen_on_sphere_poles() {
        let (_, s) = GeometryModel::sphere(3, 1.0, 64).build(-0.2).unwrap();
        let flow = evolve_ricci(&s, (-0.2, 0.0), StepPolicy::default()).unwrap();
        let opts = ConjugateOptions::default();
        let north = kernel_flow(&flow, Point::North, 0.0, -0.2, &[], &opts).unwrap();
        let south = kernel_flow(&flow, Point::South, 0.0, -0.2, &[], &opts).unwrap();
        let (slice, a) = north.slice_and_field(-0.2).unwrap();
        let b = south.slice_and_field(-0.2).unwrap().1;
        let margin = jensen_margin(slice, &[(0.3, a), (0.7, b)]).unwrap();
        assert!(margin >= -1e-6);
    }
}
