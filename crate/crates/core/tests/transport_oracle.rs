//! Radial `W1` against a transport linear program on 64 atoms.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ricci_core::transport::{w1_radial, RadialMeasure};

const ATOMS: usize = 64;

/// Kantorovich problem with cost `|ρᵢ − ρⱼ|` over all couplings.
fn lp_w1(rho: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let n = rho.len();
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let mut plan = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            plan.push(lp.add_var((rho[i] - rho[j]).abs(), (0.0, f64::INFINITY)));
        }
    }
    for i in 0..n {
        let row: Vec<_> = (0..n).map(|j| (plan[i * n + j], 1.0)).collect();
        lp.add_constraint(row.as_slice(), ComparisonOp::Eq, a[i]);
    }
    for j in 1..n {
        let col: Vec<_> = (0..n).map(|i| (plan[i * n + j], 1.0)).collect();
        lp.add_constraint(col.as_slice(), ComparisonOp::Eq, b[j]);
    }
    lp.solve().unwrap().objective()
}

fn gaussian_shell(rho: &[f64], var: f64, center: f64) -> Vec<f64> {
    let raw: Vec<f64> = rho
        .iter()
        .map(|r| r * r * (-(r - center).powi(2) / (2.0 * var)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x / total).collect()
}

#[test]
fn discretized_gaussians_match_the_lp() {
    let rho: Vec<f64> = (0..ATOMS).map(|i| (i as f64 + 0.5) * 8.0 / ATOMS as f64).collect();
    let a = gaussian_shell(&rho, 2.0 * 0.5, 0.0);
    let b = gaussian_shell(&rho, 2.0 * 2.0, 0.0);
    let ma = RadialMeasure::new(0.0, rho.iter().copied().zip(a.clone()).collect()).unwrap();
    let mb = RadialMeasure::new(0.0, rho.iter().copied().zip(b.clone()).collect()).unwrap();
    let cdf = w1_radial(&ma, &mb).unwrap();
    let lp = lp_w1(&rho, &a, &b);
    assert!((cdf - lp).abs() < 1e-4, "{cdf} vs {lp}");
}

#[test]
fn twenty_random_pairs_match_the_lp() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let rho: Vec<f64> = (0..ATOMS).map(|i| i as f64 * 0.25).collect();
    for _ in 0..20 {
        let a = gaussian_shell(&rho, rng.gen_range(0.2..6.0), rng.gen_range(0.0..12.0));
        let b = gaussian_shell(&rho, rng.gen_range(0.2..6.0), rng.gen_range(0.0..12.0));
        let ma = RadialMeasure::new(1.0, rho.iter().copied().zip(a.clone()).collect()).unwrap();
        let mb = RadialMeasure::new(1.0, rho.iter().copied().zip(b.clone()).collect()).unwrap();
        let cdf = w1_radial(&ma, &mb).unwrap();
        let lp = lp_w1(&rho, &a, &b);
        assert!((cdf - lp).abs() < 1e-4, "{cdf} vs {lp}");
    }
}
