use ricci_core::conjugate_heat::kernel_flow;
use ricci_core::entropy::curve_from_kernel;
use ricci_core::geometry::Point;
use ricci_core::transport::{w1, Measure};
use ricci_core::Error;

use super::{CheckOutput, Context, Table};
use crate::config::HarnackConfig;
use crate::report::{Assertion, CheckReport};

const NAME: &str = "harnack";

struct Sides {
    lhs: f64,
    rhs: f64,
    w1: f64,
    r_min: f64,
}

/// `N_{x,t}(t − s)` and the kernel measure at `t*`.
fn endpoint(ctx: &Context, x: Point, t: f64, s: f64, t_star: f64) -> Result<(f64, Measure), Error> {
    let kernel = kernel_flow(ctx.flow, x, t, s, &[t_star, s], ctx.conjugate())?;
    let nash = curve_from_kernel(&kernel, &[t - s])?.nash[0];
    let measure = if t_star == t {
        Measure::dirac(&ctx.flow.slice_at(t_star)?, x)?
    } else {
        let (slice, u) = kernel.slice_and_field(t_star)?;
        Measure::density(slice, u)?
    };
    Ok((nash, measure))
}

fn sides(ctx: &Context, h: &HarnackConfig) -> Result<Sides, Error> {
    if !(h.s < h.t_star && h.t_star <= h.t1.min(h.t2)) {
        return Err(Error::Precondition(format!(
            "need s < t* <= min(t1, t2), got s = {}, t* = {}, t1 = {}, t2 = {}",
            h.s, h.t_star, h.t1, h.t2
        )));
    }
    for t in [h.s, h.t1, h.t2] {
        if !ctx.flow.contains(t) {
            return Err(Error::Precondition(format!("time {t} is outside the flow")));
        }
    }
    let (n1, m1) = endpoint(ctx, h.x1, h.t1, h.s, h.t_star)?;
    let (n2, m2) = if (h.x1, h.t1) == (h.x2, h.t2) {
        (n1, m1.clone())
    } else {
        endpoint(ctx, h.x2, h.t2, h.s, h.t_star)?
    };
    let slice = ctx.flow.slice_at(h.t_star)?;
    let dist = w1(&slice, &m1, &m2)?;
    let n = ctx.n() as f64;
    let gap = h.t_star - h.s;
    // any smaller lower bound is still a lower bound; keep the root real
    let r_min = slice.min_curvature().min(n / (2.0 * gap));
    let rhs = (n / (2.0 * gap) - r_min).sqrt() * dist + 0.5 * n * ((h.t2 - h.s) / gap).ln();
    Ok(Sides {
        lhs: n1 + ctx.fault(NAME) - n2,
        rhs,
        w1: dist,
        r_min,
    })
}

pub fn check(ctx: &Context) -> Result<CheckOutput, Error> {
    if ctx.cfg.harnack.is_empty() {
        return Ok(CheckReport::skipped(NAME, "no [[harnack]] configurations").into());
    }
    let mut report = CheckReport::new(NAME);
    let mut csv = String::from("x1,t1,x2,t2,s,t_star,lhs,rhs,w1,r_min\n");
    for h in &ctx.cfg.harnack {
        let label = format!(
            "({}, {}) vs ({}, {}), s = {}, t* = {}",
            h.x1.label(),
            h.t1,
            h.x2.label(),
            h.t2,
            h.s,
            h.t_star
        );
        match sides(ctx, h) {
            Ok(sd) => {
                report.push(Assertion::le(label, sd.lhs, sd.rhs, ctx.tol.harnack));
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{}\n",
                    h.x1.label(),
                    h.t1,
                    h.x2.label(),
                    h.t2,
                    h.s,
                    h.t_star,
                    sd.lhs,
                    sd.rhs,
                    sd.w1,
                    sd.r_min
                ));
            }
            Err(Error::Precondition(m)) => report.note(format!("{label} not evaluated: {m}")),
            Err(e) => return Err(e),
        }
    }
    report.datum("evaluated", report.assertions.len());
    Ok(CheckOutput {
        report,
        tables: vec![Table {
            name: "harnack.csv".into(),
            csv,
        }],
    })
}
