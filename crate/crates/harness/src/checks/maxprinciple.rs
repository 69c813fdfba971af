use ricci_core::flow::curvature_lower_bound_check;
use ricci_core::Error;

use super::{CheckOutput, Context, Table};
use crate::report::{Assertion, CheckReport};

pub fn check(ctx: &Context) -> Result<CheckOutput, Error> {
    let mut report = CheckReport::new("max_principle");
    let t_min = -1.0;
    if !ctx.covers(t_min, 0.0) {
        return Err(Error::Precondition("flow does not contain [-1, 0]".into()));
    }
    let bound = curvature_lower_bound_check(ctx.flow, t_min);
    let worst = bound
        .rows
        .iter()
        .min_by(|a, b| a.margin.total_cmp(&b.margin))
        .ok_or_else(|| Error::Precondition("flow has no slices after its start".into()))?;
    report.push(Assertion::ge(
        format!("min R + n/(2(t - {t_min})) over {} slices", bound.rows.len()),
        worst.min_curvature,
        worst.bound,
        ctx.tol.max_principle,
    ));
    report.datum("worst_time", worst.time);
    let mut csv = String::from("t,min_R,bound,margin\n");
    for r in &bound.rows {
        csv.push_str(&format!("{},{},{},{}\n", r.time, r.min_curvature, r.bound, r.margin));
    }
    Ok(CheckOutput {
        report,
        tables: vec![Table {
            name: "max_principle.csv".into(),
            csv,
        }],
    })
}
