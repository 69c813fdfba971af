use ricci_core::conjugate_heat::{kernel_flow, solve_conjugate, DensityFlow};
use ricci_core::entropy::{
    curve_from_kernel, nash_derivative_identity_check, w_monotonicity_check, IdentityReport,
};
use ricci_core::flow::FlowSpacetime;
use ricci_core::geometry::{ModelKind, Point, ScalarField};
use ricci_core::lsi::{mu_local, Region};
use ricci_core::Error;

use super::{tag, terminal_field, CheckOutput, Context, Table};
use crate::report::{Assertion, CheckReport};

const CALIBRATION: &str = "entropy_calibration";
const MONOTONICITY: &str = "entropy_monotonicity";
const IDENTITY: &str = "nash_identity";

/// Basepoint time of the entropy curves.
fn base_time(ctx: &Context) -> f64 {
    ctx.flow.end().min(0.0)
}

/// Doubling scales up to `min(1, room)`, starting at 1/16 or at the first
/// scale of at least six squared grid spacings, whichever is larger.
fn default_taus(room: f64, spacing: f64) -> Vec<f64> {
    let top = room.min(1.0);
    let mut taus = Vec::new();
    let mut tau = 0.0625;
    while tau < 6.0 * spacing * spacing {
        tau *= 2.0;
    }
    while tau <= top + 1e-12 {
        taus.push(tau);
        tau *= 2.0;
    }
    taus
}

fn kernel_for(ctx: &Context, x: Point, t0: f64, taus: &[f64]) -> Result<DensityFlow, Error> {
    let record: Vec<f64> = taus.iter().map(|tau| t0 - tau).collect();
    kernel_flow(ctx.flow, x, t0, t0 - taus[taus.len() - 1], &record, ctx.conjugate())
}

pub fn calibration(ctx: &Context) -> Result<CheckOutput, Error> {
    if ctx.kind() != ModelKind::EuclideanRadial {
        return Ok(CheckReport::skipped(CALIBRATION, "calibration needs the flat model").into());
    }
    let Some(params) = &ctx.cfg.calibration else {
        return Ok(CheckReport::skipped(CALIBRATION, "no [calibration] section").into());
    };
    let mut report = CheckReport::new(CALIBRATION);
    let mut tables = Vec::new();
    let t0 = base_time(ctx);
    let tol = ctx.tol.flat_entropy;
    for &x in &ctx.cfg.basepoints {
        let kernel = kernel_for(ctx, x, t0, &params.taus)?;
        let curve = curve_from_kernel(&kernel, &params.taus)?;
        for (k, tau) in curve.tau.iter().enumerate() {
            let n = curve.nash[k] + ctx.fault(CALIBRATION);
            report.push(Assertion::le(format!("|N({tau})| at {}", x.label()), n.abs(), 0.0, tol));
            report.push(Assertion::le(format!("|W({tau})| at {}", x.label()), curve.w[k].abs(), 0.0, tol));
        }
        tables.push(Table {
            name: format!("calibration_{}.csv", tag(x)),
            csv: curve.to_csv(),
        });
    }
    let slice = ctx.flow.slice_at(t0)?;
    let region = Region::ball(&slice, Point::North, params.mu_radius)?;
    let mu = mu_local(&slice, &region, params.mu_tau, &ctx.mu_options(), None)?;
    report.push(
        Assertion::le(
            format!("|mu(B({}), {})|", params.mu_radius, params.mu_tau),
            mu.value.abs(),
            0.0,
            ctx.tol.flat_mu,
        )
        .converged(mu.converged),
    );
    report.datum("mu", &mu);
    Ok(CheckOutput { report, tables })
}

pub fn monotonicity(ctx: &Context) -> Result<CheckOutput, Error> {
    let mut report = CheckReport::new(MONOTONICITY);
    let mut tables = Vec::new();
    let t0 = base_time(ctx);
    let taus = match &ctx.cfg.calibration {
        Some(c) => c.taus.clone(),
        None => default_taus(t0 - ctx.flow.start(), ctx.initial.grid().spacing()),
    };
    if taus.len() < 2 {
        return Ok(CheckReport::skipped(MONOTONICITY, "flow too short for two scales").into());
    }
    let tol = ctx.tol.monotone;
    for &x in &ctx.cfg.basepoints {
        let kernel = kernel_for(ctx, x, t0, &taus)?;
        let curve = curve_from_kernel(&kernel, &taus)?;
        let label = x.label();
        report.push(Assertion::ge(format!("N, W nonincreasing at {label}"), curve.monotonicity_margin(), 0.0, tol));
        report.push(Assertion::ge(format!("0 >= N >= W at {label}"), curve.ordering_margin(), 0.0, tol));
        // the bump start is not yet a kernel, so only the recorded range counts
        let w = w_monotonicity_check(&kernel, t0)?;
        let last = t0 - taus[0];
        let along: Vec<f64> = w
            .times
            .iter()
            .zip(&w.values)
            .filter(|(t, _)| **t <= last + 1e-12)
            .map(|(_, v)| *v)
            .collect();
        let worst = along.windows(2).map(|p| p[1] - p[0]).fold(f64::INFINITY, f64::min);
        report.push(Assertion::ge(format!("W along the kernel flow at {label}"), worst, 0.0, tol));
        tables.push(Table {
            name: format!("entropy_{}.csv", tag(x)),
            csv: curve.to_csv(),
        });
    }
    if let Some(id) = &ctx.cfg.identity {
        let density = identity_flow(ctx, ctx.flow, &ctx.cfg.solver.conjugate)?;
        let w = w_monotonicity_check(&density, id.tau0)?;
        report.push(Assertion::ge("W along the terminal-data flow", w.worst_margin(), 0.0, tol));
    }
    Ok(CheckOutput { report, tables })
}

fn identity_flow(
    ctx: &Context,
    flow: &FlowSpacetime,
    opts: &ricci_core::conjugate_heat::ConjugateOptions,
) -> Result<DensityFlow, Error> {
    let id = ctx.cfg.identity.as_ref().expect("identity section checked");
    let slice = flow.slice_at(id.terminal_time)?;
    let terminal = ScalarField::new(terminal_field(&slice, &id.terminal)?)?;
    solve_conjugate(flow, &terminal, id.terminal_time, id.start, &[], opts)
}

fn identity_table(r: &IdentityReport) -> String {
    let mut out = String::from("t,lhs,rhs,relative_residual\n");
    for k in 0..r.times.len() {
        out.push_str(&format!("{},{},{},{}\n", r.times[k], r.lhs[k], r.rhs[k], r.relative_residual[k]));
    }
    out
}

pub fn identity(ctx: &Context) -> Result<CheckOutput, Error> {
    let Some(id) = &ctx.cfg.identity else {
        return Ok(CheckReport::skipped(IDENTITY, "no [identity] section").into());
    };
    let mut report = CheckReport::new(IDENTITY);
    let coarse = nash_derivative_identity_check(&identity_flow(ctx, ctx.flow, ctx.conjugate())?, id.tau0)?;
    let fine_flow = ctx.refined_flow(2.0)?;
    let fine_opts = ctx.conjugate().refined(2.0, ctx.flow);
    let fine = nash_derivative_identity_check(&identity_flow(ctx, &fine_flow, &fine_opts)?, id.tau0)?;
    let (rc, rf) = (coarse.max_residual(), fine.max_residual());
    report.push(Assertion::le("max relative residual", rc, 0.0, ctx.tol.identity_residual));
    report.push(Assertion::le("max relative residual, halved steps", rf, 0.0, ctx.tol.identity_residual));
    report.push(Assertion::ge("residual reduction on halving", rc / rf, ctx.tol.identity_reduction, 0.0));
    report.datum("residual_coarse", rc);
    report.datum("residual_fine", rf);
    let tables = vec![
        Table {
            name: "nash_identity.csv".into(),
            csv: identity_table(&coarse),
        },
        Table {
            name: "nash_identity_fine.csv".into(),
            csv: identity_table(&fine),
        },
    ];
    Ok(CheckOutput { report, tables })
}
