use ricci_core::entropy::w_bar;
use ricci_core::geometry::{MetricSlice, Point};
use ricci_core::lsi::{
    cutoff_constant, noncollapse_bound, nu_local, random_test_function, sobolev_check,
    sobolev_constant, volume_to_nu_bound, NuResult, Region, TestFunction,
};
use ricci_core::transport::{pstar_contains, PStarWindow};
use ricci_core::Error;

use super::{fmt_time, node_of, tag, CheckOutput, Context, Table};
use crate::report::{Assertion, CheckReport};

const MAIN: &str = "main_theorem";
const PSTAR: &str = "pstar_corollary";
const SOBOLEV: &str = "local_sobolev";
const NONCOLLAPSE: &str = "noncollapse_improving";

/// Lower bound on `ν(B₀(x₀, A), g₀, τ)` from `N_{x₀,0}(1)`.
pub fn local_nu_bound(nash: f64, n: usize, a: f64, tau: f64) -> f64 {
    let nf = n as f64;
    nash - nf.sqrt() * a - 0.5 * nf * tau - 0.5 * nf * (1.0 + tau).ln()
}

/// Lower bound on `ν(B_s(y, A), g_s, τ)` for `(y, s)` in the forward
/// neighbourhood of `(x₀, 0)` of radius `A`.
pub fn pstar_nu_bound(nash: f64, n: usize, a: f64, tau: f64) -> f64 {
    let nf = n as f64;
    nash - 2.0 * nf.sqrt() * a - 0.5 * nf * tau - 0.5 * nf * (1.0 + tau).ln() - 0.5 * nf * (1.0 + a * a).ln()
}

/// `C(n, A)` built from the local bound at scale `A²` with `N(1) ≥ −allowance`.
pub fn noncollapse_constant(n: usize, a: f64, allowance: f64) -> f64 {
    -local_nu_bound(-allowance, n, a, a * a)
}

fn nu_table(nu: &NuResult) -> String {
    let mut out = String::from("s,mu\n");
    for (s, mu) in &nu.table {
        out.push_str(&format!("{s},{mu}\n"));
    }
    out
}

fn need_unit_past(ctx: &Context, check: &str) -> Result<(), Error> {
    if ctx.covers(-1.0, 0.0) {
        Ok(())
    } else {
        Err(Error::Precondition(format!("{check} needs [-1, 0] inside the flow")))
    }
}

pub fn main_theorem(ctx: &Context) -> Result<CheckOutput, Error> {
    need_unit_past(ctx, MAIN)?;
    let mut report = CheckReport::new(MAIN);
    let mut tables = Vec::new();
    let slice = ctx.flow.slice_at(0.0)?;
    let n = ctx.n();
    let mu_opts = ctx.mu_options();
    let mut stream = 0;
    for &x in &ctx.cfg.basepoints {
        let nash = ctx.nash(MAIN, x, 0.0, 1.0)?;
        report.datum(&format!("nash_{}", tag(x)), nash);
        for &[a, tau] in &ctx.cfg.theorem.pairs {
            let label = format!("{}, A = {a}, tau = {tau}", x.label());
            let rhs = local_nu_bound(nash, n, a, tau);
            let region = Region::ball(&slice, x, a)?;
            let nu = nu_local(&slice, &region, tau, &ctx.cfg.solver.nu, &mu_opts)?;
            report.push(
                Assertion::ge(format!("nu >= bound, {label}"), nu.value, rhs, ctx.tol.nu_margin)
                    .converged(nu.converged),
            );
            let mut rng = ctx.rng(MAIN, stream);
            stream += 1;
            let mut worst_bound = f64::INFINITY;
            let mut worst_sound = f64::INFINITY;
            let mut worst_pair = (0.0, 0.0);
            for s in ricci_core::lsi::resolved_scales(&slice, tau, ctx.cfg.solver.nu.points) {
                let mu_s = nu
                    .table
                    .iter()
                    .find(|(t, _)| (t - s).abs() <= 1e-12 * s)
                    .map(|(_, m)| *m);
                for _ in 0..ctx.cfg.theorem.random_functions {
                    let w = random_test_function(&slice, &region, s, &mut rng)?;
                    let value = w_bar(&slice, &w.density(), s)?;
                    if value - rhs < worst_bound {
                        worst_bound = value - rhs;
                        worst_pair = (s, value);
                    }
                    if let Some(m) = mu_s {
                        worst_sound = worst_sound.min(value - m);
                    }
                }
            }
            report.push(Assertion::ge(
                format!("random W >= bound, {label} (worst at s = {:.4e})", worst_pair.0),
                worst_pair.1,
                rhs,
                ctx.tol.random_margin,
            ));
            if worst_sound.is_finite() {
                report.push(Assertion::ge(
                    format!("random W - solver mu, {label}"),
                    worst_sound,
                    0.0,
                    ctx.tol.mu_soundness,
                ));
            }
            tables.push(Table {
                name: format!("nu_{}_A{}_tau{}.csv", tag(x), fmt_time(a), fmt_time(tau)),
                csv: nu_table(&nu),
            });
        }
    }
    Ok(CheckOutput { report, tables })
}

pub fn pstar_corollary(ctx: &Context) -> Result<CheckOutput, Error> {
    let Some(p) = &ctx.cfg.pstar else {
        return Ok(CheckReport::skipped(PSTAR, "no [pstar] section").into());
    };
    need_unit_past(ctx, PSTAR)?;
    let mut report = CheckReport::new(PSTAR);
    let n = ctx.n();
    let window = PStarWindow {
        a: p.a,
        t_minus: 0.0,
        t_plus: p.a * p.a,
    };
    let mut members = 0;
    let mut csv = String::from("x0,y,s,distance,member,nu,bound\n");
    for &x0 in &ctx.cfg.basepoints {
        let nash = ctx.nash(PSTAR, x0, 0.0, 1.0)?;
        let rhs = pstar_nu_bound(nash, n, p.a, p.tau);
        for &y in &p.points {
            for &s in &p.times {
                let m = pstar_contains(ctx.flow, (x0, 0.0), window, (y, s), ctx.conjugate())?;
                let d = m.distance.unwrap_or(f64::NAN);
                if !m.member {
                    csv.push_str(&format!("{},{},{s},{d},false,,\n", x0.label(), y.label()));
                    continue;
                }
                members += 1;
                let slice = ctx.flow.slice_at(s)?;
                let region = Region::ball(&slice, y, p.a)?;
                let nu = nu_local(&slice, &region, p.tau, &ctx.cfg.solver.nu, &ctx.mu_options())?;
                report.push(
                    Assertion::ge(
                        format!("nu(B_{s}({}, {})) from {}", y.label(), p.a, x0.label()),
                        nu.value,
                        rhs,
                        ctx.tol.nu_margin,
                    )
                    .converged(nu.converged),
                );
                csv.push_str(&format!("{},{},{s},{d},true,{},{rhs}\n", x0.label(), y.label(), nu.value));
            }
        }
    }
    if members == 0 {
        report.note("no sampled point lies in the neighbourhood; the check is vacuous");
    }
    report.datum("members", members);
    Ok(CheckOutput {
        report,
        tables: vec![Table {
            name: "pstar.csv".into(),
            csv,
        }],
    })
}

/// `R_min = min(inf_B R, 0)` on a region.
fn r_min(slice: &MetricSlice, region: &Region) -> f64 {
    slice
        .curvature()
        .iter()
        .zip(region.mask())
        .filter(|(_, on)| **on)
        .fold(0.0_f64, |m, (r, _)| m.min(*r))
}

pub fn local_sobolev(ctx: &Context) -> Result<CheckOutput, Error> {
    need_unit_past(ctx, SOBOLEV)?;
    let mut report = CheckReport::new(SOBOLEV);
    let slice = ctx.flow.slice_at(0.0)?;
    let n = ctx.n();
    let c = ctx.cfg.constants.sobolev_c.unwrap_or_else(|| sobolev_constant(n.max(3)));
    let c0 = ctx.cfg.constants.cutoff_c0.unwrap_or_else(|| cutoff_constant(n));
    let c_n = ctx.cfg.constants.volume_c;
    report.constant("c(n)", c, "sharp Euclidean Sobolev constant with 10% slack");
    report.constant("C(n)", c_n, "configured volume-ratio constant");
    report.constant("c0(n)", c0, "cutoff-bump constant");
    if n < 3 {
        report.note("Sobolev form needs n >= 3; only the volume-ratio bounds run");
    }
    let samples = (ctx.cfg.theorem.random_functions / 5).max(1);
    let mut stream = 0;
    for &x in &ctx.cfg.basepoints {
        let nash = ctx.nash(SOBOLEV, x, 0.0, 1.0)?;
        let unit = slice.ball_volume(x, 1.0)?;
        if unit.clipped {
            report.note(format!("unit ball at {} exceeds the model", x.label()));
        }
        for &[a, tau] in &ctx.cfg.theorem.pairs {
            let label = format!("{}, A = {a}, tau = {tau}", x.label());
            let region = Region::ball(&slice, x, a)?;
            let nu = nu_local(&slice, &region, tau, &ctx.cfg.solver.nu, &ctx.mu_options())?;
            let from_nash = local_nu_bound(nash, n, a, tau);
            let from_volume = volume_to_nu_bound(unit.volume, a, tau, n, c_n)?;
            report.push(
                Assertion::ge(format!("nu >= volume bound, {label}"), nu.value, from_volume, ctx.tol.nu_margin)
                    .converged(nu.converged),
            );
            if n >= 3 {
                let rm = r_min(&slice, &region);
                let mut rng = ctx.rng(SOBOLEV, stream);
                stream += 1;
                let mut tests: Vec<TestFunction> = nu.minimizers.clone();
                for _ in 0..samples {
                    let s = tau * rand::Rng::gen_range(&mut rng, 0.01..=1.0);
                    tests.push(random_test_function(&slice, &region, s, &mut rng)?);
                }
                for (nu0, which) in [(from_nash, "entropy"), (from_volume, "volume")] {
                    let worst = tests
                        .iter()
                        .map(|u| sobolev_check(&slice, u, nu0, tau, rm, c))
                        .collect::<Result<Vec<_>, _>>()?
                        .into_iter()
                        .min_by(|p, q| p.margin().total_cmp(&q.margin()))
                        .expect("at least one test function");
                    report.push(Assertion::le(
                        format!("Sobolev with {which} nu0 over {} functions, {label}", tests.len()),
                        worst.lhs,
                        worst.rhs,
                        ctx.tol.inequality,
                    ));
                }
            }
            sub_balls(ctx, &mut report, &slice, x, a, from_volume, c0, &label)?;
        }
    }
    Ok(report.into())
}

/// `|B(x, ρ)| ≥ exp(ν₀ − c₀)ρⁿ` on sub-balls whose curvature allows it.
#[allow(clippy::too_many_arguments)]
fn sub_balls(
    ctx: &Context,
    report: &mut CheckReport,
    slice: &MetricSlice,
    x: Point,
    a: f64,
    nu0: f64,
    c0: f64,
    label: &str,
) -> Result<(), Error> {
    let fractions = ctx
        .cfg
        .noncollapse
        .as_ref()
        .map(|p| p.fractions.clone())
        .unwrap_or_else(|| vec![0.25, 0.5, 1.0]);
    for f in fractions {
        let rho = f * a;
        let ball = Region::ball(slice, x, rho);
        let Ok(ball) = ball else {
            report.note(format!("sub-ball of radius {rho} too small, {label}"));
            continue;
        };
        let sup_r = slice
            .curvature()
            .iter()
            .zip(ball.mask())
            .filter(|(_, on)| **on)
            .fold(f64::NEG_INFINITY, |m, (r, _)| m.max(*r));
        match noncollapse_bound(nu0, rho, sup_r, ctx.n(), c0) {
            Ok(bound) => {
                let vol = slice.ball_volume(x, rho)?.volume;
                report.push(Assertion::ge(
                    format!("|B({rho})| >= kappa rho^n, {label}"),
                    vol,
                    bound,
                    ctx.tol.inequality,
                ));
            }
            Err(Error::Precondition(m)) => report.note(format!("radius {rho} not tested: {m}")),
            Err(e) => return Err(e),
        }
    }
    Ok(())
}

/// `∫_{−1}^{0} √|t| R(x₀, t) dt` by the trapezoid rule on the stored slices.
fn curvature_integral(ctx: &Context, x: Point) -> Result<f64, Error> {
    let mut samples: Vec<(f64, f64)> = Vec::new();
    let mut push = |s: &MetricSlice| samples.push((s.time(), s.curvature()[node_of(s, x)]));
    push(&ctx.flow.slice_at(-1.0)?);
    for s in ctx.flow.slices() {
        if s.time() > -1.0 && s.time() < 0.0 {
            push(s);
        }
    }
    push(&ctx.flow.slice_at(0.0)?);
    Ok(samples
        .windows(2)
        .map(|w| {
            let f = |(t, r): (f64, f64)| t.abs().sqrt() * r;
            0.5 * (w[1].0 - w[0].0) * (f(w[0]) + f(w[1]))
        })
        .sum())
}

pub fn noncollapse_improving(ctx: &Context) -> Result<CheckOutput, Error> {
    let Some(p) = &ctx.cfg.noncollapse else {
        return Ok(CheckReport::skipped(NONCOLLAPSE, "no [noncollapse] section").into());
    };
    if !ctx.covers(-2.0, 0.0) {
        return Err(Error::Precondition("needs [-2, 0] inside the flow".into()));
    }
    let a = p.a;
    let n = ctx.n();
    let mut report = CheckReport::new(NONCOLLAPSE);
    let big_c = noncollapse_constant(n, a, ctx.cfg.constants.nash_allowance);
    let c0 = ctx.cfg.constants.cutoff_c0.unwrap_or_else(|| cutoff_constant(n));
    report.constant("C(n, A)", big_c, "local bound at scale A^2 with N(1) >= -nash_allowance");
    report.constant("c0(n)", c0, "cutoff-bump constant");
    report.note("hypotheses are checked on [-1, 0]; the flow is required on [-2, 0]");
    let past = ctx.flow.slice_at(-1.0)?;
    let now = ctx.flow.slice_at(0.0)?;
    let mut evaluated = 0;
    for &x in &ctx.cfg.basepoints {
        let integral = curvature_integral(ctx, x)?;
        let volume = past.ball_volume(x, 1.0)?.volume;
        report.datum(&format!("curvature_integral_{}", tag(x)), integral);
        report.datum(&format!("past_unit_volume_{}", tag(x)), volume);
        if integral > a || volume < 1.0 / a {
            report.note(format!(
                "{}: hypotheses fail (integral {integral:.4e} vs A = {a}, volume {volume:.4e} vs 1/A)",
                x.label()
            ));
            continue;
        }
        evaluated += 1;
        let region = Region::ball(&now, x, a)?;
        let nu = nu_local(&now, &region, a * a, &ctx.cfg.solver.nu, &ctx.mu_options())?;
        let label = format!("{}, A = {a}", x.label());
        report.push(
            Assertion::ge(format!("nu(B_0(x0, A), A^2) >= -C(n, A), {label}"), nu.value, -big_c, ctx.tol.nu_margin)
                .converged(nu.converged),
        );
        sub_balls(ctx, &mut report, &now, x, a, -big_c, c0, &label)?;
    }
    if evaluated == 0 {
        return Ok(CheckReport {
            constants: report.constants,
            notes: report.notes,
            data: report.data,
            ..CheckReport::skipped(NONCOLLAPSE, "hypotheses not met at any basepoint")
        }
        .into());
    }
    Ok(report.into())
}
