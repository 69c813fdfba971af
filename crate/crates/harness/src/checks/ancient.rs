use ricci_core::entropy::entropy_curve;
use ricci_core::geometry::ModelKind;
use ricci_core::lsi::{nu_local, Region};
use ricci_core::Error;

use super::{fmt_time, tag, CheckOutput, Context, Table};
use crate::report::{Assertion, CheckReport, Verdict};

const NAME: &str = "ancient_sobolev";

/// Aitken Δ² limit of the last three values, or the last value when the
/// differences are not geometrically shrinking.
pub fn extrapolate(values: &[f64]) -> (f64, bool) {
    let k = values.len();
    let last = values[k - 1];
    if k < 3 {
        return (last, false);
    }
    let (d1, d2) = (values[k - 2] - values[k - 3], last - values[k - 2]);
    let ratio = d2 / d1;
    if d1 != 0.0 && ratio > 0.0 && ratio < 1.0 {
        (last - d2 * d2 / (d2 - d1), true)
    } else {
        (last, false)
    }
}

pub fn check(ctx: &Context) -> Result<CheckOutput, Error> {
    if ctx.kind() == ModelKind::FlatTorusConformal {
        return Ok(CheckReport::skipped(NAME, "the torus flow is not ancient").into());
    }
    let Some(p) = &ctx.cfg.ancient else {
        return Ok(CheckReport::skipped(NAME, "no [ancient] section").into());
    };
    let mut report = CheckReport::new(NAME);
    let mut tables = Vec::new();
    let t0 = 0.0;
    for &x in &ctx.cfg.basepoints {
        let label = x.label();
        let curve = entropy_curve(ctx.flow, x, t0, &p.taus, ctx.conjugate())?;
        let nash: Vec<f64> = curve.nash.iter().map(|v| v + ctx.fault(NAME)).collect();
        let k = nash.len();
        let flatness = (nash[k - 1] - nash[k - 2]).abs();
        let mut flat = Assertion::le(format!("|N(tau_K) - N(tau_K-1)|, {label}"), flatness, 0.0, ctx.tol.plateau_flatness);
        let plateau = flat.verdict == Verdict::Pass;
        if !plateau {
            flat.verdict = Verdict::Unconverged;
        }
        report.push(flat);
        report.push(Assertion::ge(format!("0 >= N >= W, {label}"), curve.ordering_margin(), 0.0, ctx.tol.monotone));
        let (mu_inf, aitken) = extrapolate(&nash);
        if !aitken {
            report.note(format!("{label}: differences not geometric, using the last N"));
        }
        report.datum(&format!("mu_inf_{}", tag(x)), mu_inf);
        let mut csv = String::from("t,tau_max,nu,argmin\n");
        for &t in &p.times {
            let slice = ctx.flow.slice_at(t)?;
            let tau_max = match (p.tau_max, slice.scale()) {
                (Some(v), _) => v,
                (None, Some(a)) => a * a,
                (None, None) => return Err(Error::Precondition("no scale to bound τ".into())),
            };
            let region = Region::whole(&slice)?;
            let nu = nu_local(&slice, &region, tau_max, &ctx.cfg.solver.nu, &ctx.mu_options())?;
            report.push(
                Assertion::le(format!("|nu(g_{t}) - mu_inf|, {label}"), (nu.value - mu_inf).abs(), 0.0, ctx.tol.plateau)
                    .converged(nu.converged && plateau),
            );
            report.push(
                Assertion::ge(format!("nu(g_{t}) >= mu_inf, {label}"), nu.value, mu_inf, ctx.tol.nu_margin)
                    .converged(nu.converged && plateau),
            );
            csv.push_str(&format!("{t},{tau_max},{},{}\n", nu.value, nu.argmin));
        }
        tables.push(Table {
            name: format!("ancient_entropy_{}.csv", tag(x)),
            csv: curve.to_csv(),
        });
        tables.push(Table {
            name: format!("ancient_nu_{}_{}.csv", tag(x), fmt_time(t0)),
            csv,
        });
    }
    Ok(CheckOutput { report, tables })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aitken_recovers_a_geometric_limit() {
        let v: Vec<f64> = (0..5).map(|k| 2.0 + 0.5f64.powi(k)).collect();
        let (lim, used) = extrapolate(&v);
        assert!(used);
        assert!((lim - 2.0).abs() < 1e-12);
        assert_eq!(extrapolate(&[1.0, 2.0, 2.0]), (2.0, false));
    }
}
