use ricci_core::conjugate_heat::solve_conjugate;
use ricci_core::entropy::w_bar;
use ricci_core::geometry::{ModelKind, ScalarField};
use ricci_core::lsi::{mu_local, Region};
use ricci_core::transport::{h_n, hn_center};
use ricci_core::Error;

use super::{CheckOutput, Context};
use crate::report::{Assertion, CheckReport};

const NAME: &str = "almost_mono";

pub fn check(ctx: &Context) -> Result<CheckOutput, Error> {
    if ctx.kind() == ModelKind::SphereRadial {
        return Ok(CheckReport::skipped(NAME, "balls of radius A exceed the sphere's diameter").into());
    }
    let Some(p) = &ctx.cfg.almost_mono else {
        return Ok(CheckReport::skipped(NAME, "no [almost_mono] section").into());
    };
    let (a, tau) = (p.a, p.tau);
    let n = ctx.n();
    let root_h = h_n(n).sqrt();
    if !(a > 10.0 * root_h) {
        return Err(Error::Precondition(format!("A = {a} must exceed 10√Hₙ = {}", 10.0 * root_h)));
    }
    if !ctx.covers(-1.0, 0.0) {
        return Err(Error::Precondition("needs [-1, 0] inside the flow".into()));
    }
    let mut report = CheckReport::new(NAME);
    let slack = 100.0 / (a * a) * (-a * a / 20.0).exp();
    report.constant("slack", slack, "(100/A^2) exp(-A^2/20)");
    let now = ctx.flow.slice_at(0.0)?;
    let past = ctx.flow.slice_at(-1.0)?;
    let mu_opts = ctx.mu_options();
    for &x in &ctx.cfg.basepoints {
        let label = x.label();
        let z = hn_center(ctx.flow, x, 0.0, -1.0, ctx.conjugate())?;
        let right_region = Region::ball(&now, x, a)?;
        let right = mu_local(&now, &right_region, tau, &mu_opts, None)?;
        let left_region = Region::ball(&past, z.center, 3.0 * a)?;
        let left = mu_local(&past, &left_region, 1.0 + tau, &mu_opts, None)?;
        let converged = right.converged && left.converged;
        report.push(
            Assertion::le(format!("mu_past(B(z, 3A)) <= mu_now(B(x0, A)) + slack, {label}"), left.value, right.value + slack, ctx.tol.nu_margin)
                .converged(converged),
        );

        // carry the right-hand minimizer back one unit and cut it off inside B(z, 3A)
        let terminal = ScalarField::new(right.minimizer.density())?;
        let carried = solve_conjugate(ctx.flow, &terminal, 0.0, -1.0, &[-1.0], ctx.conjugate())?;
        let (slice, u) = carried.slice_and_field(-1.0)?;
        let inner = 2.0 * a + 2.0 * root_h;
        let width = a - 2.0 * root_h;
        let d = slice.distances_from(z.center)?;
        let cut: Vec<f64> = d
            .iter()
            .zip(u)
            .map(|(d, u)| {
                let eta = (1.0 - ((d - inner) / width).clamp(0.0, 1.0)).powi(2);
                eta * eta * u
            })
            .collect();
        let alpha = slice.integrate(&cut)?;
        let transplanted: Vec<f64> = cut.iter().map(|v| v / alpha).collect();
        let w_t = w_bar(slice, &transplanted, 1.0 + tau)?;
        report.push(
            Assertion::le(format!("W(transplant) <= mu_now + slack, {label}"), w_t, right.value + slack, ctx.tol.transplant)
                .converged(right.converged),
        );
        report.push(
            Assertion::le(format!("mu_past <= W(transplant), {label}"), left.value, w_t, ctx.tol.transplant)
                .converged(left.converged),
        );
        report.datum(&format!("alpha_{label}"), alpha);
        report.datum(&format!("centre_{label}"), &z);
    }
    Ok(report.into())
}
