use ricci_core::conjugate_heat::kernel_flow;
use ricci_core::geometry::ModelKind;
use ricci_core::transport::{concentration_check, hn_center, w1_ladder};
use ricci_core::Error;

use super::{tag, CheckOutput, Context, Table};
use crate::report::{Assertion, CheckReport};

const NAME: &str = "transport";

pub fn check(ctx: &Context) -> Result<CheckOutput, Error> {
    let mut report = CheckReport::new(NAME);
    let mut tables = Vec::new();
    let params = &ctx.cfg.transport;
    let t0 = ctx.flow.end().min(0.0);
    let tol = ctx.tol.inequality;
    let mut centres = Vec::new();
    for &x in &ctx.cfg.basepoints {
        for &gap in &params.gaps {
            let c = hn_center(ctx.flow, x, t0, t0 - gap, ctx.conjugate())?;
            let label = format!("{} gap {gap}", x.label());
            report.push(Assertion::le(format!("Var(z, nu) <= Hn gap, {label}"), c.variance, c.h_n * gap, tol));
            report.push(Assertion::le(format!("W1(z, nu) <= sqrt(Hn gap), {label}"), c.w1, (c.h_n * gap).sqrt(), tol));
            if c.multiplicity > 1 {
                report.note(format!("{label}: {} tied centres, nearest kept", c.multiplicity));
            }
            centres.push(c);
        }
        if ctx.kind() == ModelKind::EuclideanRadial {
            let n = ctx.n() as f64;
            for &gap in &params.variance_gaps {
                let c = hn_center(ctx.flow, x, t0, t0 - gap, ctx.conjugate())?;
                let exact = 2.0 * n * gap;
                report.push(Assertion::le(
                    format!("|Var/(2n gap) - 1| at gap {gap}"),
                    (c.variance / exact - 1.0).abs(),
                    0.0,
                    ctx.tol.kernel_variance,
                ));
            }
        }
        for &a in &params.concentration {
            for &gap in &params.gaps {
                let c = concentration_check(ctx.flow, x, t0, t0 - gap, a, ctx.conjugate())?;
                report.push(Assertion::le(
                    format!("nu outside B(z, {a} sqrt gap), {} gap {gap}", x.label()),
                    c.tail,
                    c.bound,
                    tol,
                ));
            }
        }
    }
    report.datum("centres", &centres);
    if let Some(l) = &params.ladder {
        let s_min = l.times.iter().copied().fold(f64::INFINITY, f64::min);
        let a = kernel_flow(ctx.flow, l.x1, l.t1, s_min, &l.times, ctx.conjugate())?;
        let b = if (l.x1, l.t1) == (l.x2, l.t2) {
            a.clone()
        } else {
            kernel_flow(ctx.flow, l.x2, l.t2, s_min, &l.times, ctx.conjugate())?
        };
        let ladder = w1_ladder(&a, &b, &l.times)?;
        report.push(Assertion::ge(
            format!("W1 nondecreasing in s between {} and {}", l.x1.label(), l.x2.label()),
            ladder.worst_margin(),
            0.0,
            ctx.tol.w1_monotone,
        ));
        tables.push(Table {
            name: format!("w1_ladder_{}_{}.csv", tag(l.x1), tag(l.x2)),
            csv: ladder.to_csv(),
        });
    }
    Ok(CheckOutput { report, tables })
}
