//! Finite-volume stiffness operators and the linear solvers that go with them.
//!
//! Every slice carries a symmetric positive semidefinite stiffness `K` with
//! zero row sums, together with a vector of volume weights `W`. The discrete
//! Laplace–Beltrami operator is `-W⁻¹K`, so `Σ (K u)_i = 0` and any scheme
//! written in terms of `W u` conserves mass exactly.

use crate::error::{Error, Result};

/// Edge couplings of the discrete Dirichlet form `uᵀKu = Σ_e k_e (u_i − u_j)²`.
#[derive(Clone, Debug, PartialEq)]
pub enum Stiffness {
    /// Nearest-neighbour chain: `couplings[i]` joins node `i` and `i + 1`.
    Chain(Vec<f64>),
    /// Doubly periodic five-point stencil on an `nx × ny` grid, row-major with
    /// `x` fastest. `cx` couples x-neighbours and `cy` couples y-neighbours.
    Periodic {
        nx: usize,
        ny: usize,
        cx: f64,
        cy: f64,
    },
}

const CG_MAX_ITERATIONS: usize = 5000;
const CG_RELATIVE_TOLERANCE: f64 = 1e-13;

impl Stiffness {
    pub fn len(&self) -> usize {
        match self {
            Stiffness::Chain(c) => c.len() + 1,
            Stiffness::Periodic { nx, ny, .. } => nx * ny,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `out = K u`.
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        match self {
            Stiffness::Chain(c) => {
                out.iter_mut().for_each(|o| *o = 0.0);
                for (i, &k) in c.iter().enumerate() {
                    let flux = k * (u[i] - u[i + 1]);
                    out[i] += flux;
                    out[i + 1] -= flux;
                }
            }
            Stiffness::Periodic { nx, ny, cx, cy } => {
                let (nx, ny) = (*nx, *ny);
                for j in 0..ny {
                    let jn = (j + 1) % ny;
                    let js = (j + ny - 1) % ny;
                    for i in 0..nx {
                        let ie = (i + 1) % nx;
                        let iw = (i + nx - 1) % nx;
                        let c = u[j * nx + i];
                        out[j * nx + i] = cx * (2.0 * c - u[j * nx + ie] - u[j * nx + iw])
                            + cy * (2.0 * c - u[jn * nx + i] - u[js * nx + i]);
                    }
                }
            }
        }
    }

    /// Discrete Dirichlet energy `uᵀKu`.
    pub fn energy(&self, u: &[f64]) -> f64 {
        self.edges_fold(u, |k, a, b| k * (a - b) * (a - b))
    }

    /// `Σ_e k_e · g(u_i, u_j)` over every edge.
    pub fn edges_fold(&self, u: &[f64], g: impl Fn(f64, f64, f64) -> f64) -> f64 {
        match self {
            Stiffness::Chain(c) => c
                .iter()
                .enumerate()
                .map(|(i, &k)| g(k, u[i], u[i + 1]))
                .sum(),
            Stiffness::Periodic { nx, ny, cx, cy } => {
                let (nx, ny) = (*nx, *ny);
                let mut acc = 0.0;
                for j in 0..ny {
                    let jn = (j + 1) % ny;
                    for i in 0..nx {
                        let ie = (i + 1) % nx;
                        let c = u[j * nx + i];
                        acc += g(*cx, c, u[j * nx + ie]) + g(*cy, c, u[jn * nx + i]);
                    }
                }
                acc
            }
        }
    }

    /// Solves `(diag(d) + coef·K) u = rhs` with `u_i = 0` wherever `active`
    /// is false. The matrix is an M-matrix whenever `d > 0` and `coef ≥ 0`.
    pub fn solve(
        &self,
        diag: &[f64],
        coef: f64,
        rhs: &[f64],
        active: Option<&[bool]>,
    ) -> Result<Vec<f64>> {
        match self {
            Stiffness::Chain(c) => Ok(solve_chain(c, diag, coef, rhs, active)),
            Stiffness::Periodic { .. } => self.solve_cg(diag, coef, rhs, active),
        }
    }

    fn solve_cg(
        &self,
        diag: &[f64],
        coef: f64,
        rhs: &[f64],
        active: Option<&[bool]>,
    ) -> Result<Vec<f64>> {
        let n = rhs.len();
        let on = |i: usize| active.is_none_or(|a| a[i]);
        let (cx, cy) = match self {
            Stiffness::Periodic { cx, cy, .. } => (*cx, *cy),
            Stiffness::Chain(_) => unreachable!(),
        };
        let precond: Vec<f64> = (0..n)
            .map(|i| {
                if on(i) {
                    1.0 / (diag[i] + coef * 2.0 * (cx + cy))
                } else {
                    0.0
                }
            })
            .collect();
        let mut scratch = vec![0.0; n];
        let matvec = |x: &[f64], out: &mut [f64], scratch: &mut [f64]| {
            self.apply(x, scratch);
            for i in 0..n {
                out[i] = if on(i) {
                    diag[i] * x[i] + coef * scratch[i]
                } else {
                    0.0
                };
            }
        };
        let b: Vec<f64> = (0..n).map(|i| if on(i) { rhs[i] } else { 0.0 }).collect();
        let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut x: Vec<f64> = (0..n).map(|i| b[i] * precond[i]).collect();
        if b_norm == 0.0 {
            return Ok(vec![0.0; n]);
        }
        let mut r = vec![0.0; n];
        matvec(&x, &mut r, &mut scratch);
        for i in 0..n {
            r[i] = b[i] - r[i];
        }
        let mut z: Vec<f64> = (0..n).map(|i| r[i] * precond[i]).collect();
        let mut p = z.clone();
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let mut ap = vec![0.0; n];
        for it in 0..CG_MAX_ITERATIONS {
            let r_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if r_norm <= CG_RELATIVE_TOLERANCE * b_norm {
                return Ok(x);
            }
            matvec(&p, &mut ap, &mut scratch);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            if pap <= 0.0 {
                return Err(Error::SolverStalled {
                    iterations: it,
                    residual: r_norm / b_norm,
                });
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
                z[i] = r[i] * precond[i];
            }
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        let r_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r_norm <= 1e-9 * b_norm {
            return Ok(x);
        }
        Err(Error::SolverStalled {
            iterations: CG_MAX_ITERATIONS,
            residual: r_norm / b_norm,
        })
    }
}

/// Thomas algorithm for the tridiagonal chain system.
fn solve_chain(
    couplings: &[f64],
    diag: &[f64],
    coef: f64,
    rhs: &[f64],
    active: Option<&[bool]>,
) -> Vec<f64> {
    let n = rhs.len();
    let on = |i: usize| active.is_none_or(|a| a[i]);
    let mut lower = vec![0.0; n];
    let mut main = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut b = vec![0.0; n];
    for i in 0..n {
        if !on(i) {
            main[i] = 1.0;
            continue;
        }
        let kl = if i > 0 { coef * couplings[i - 1] } else { 0.0 };
        let kr = if i + 1 < n { coef * couplings[i] } else { 0.0 };
        main[i] = diag[i] + kl + kr;
        if i > 0 && on(i - 1) {
            lower[i] = -kl;
        }
        if i + 1 < n && on(i + 1) {
            upper[i] = -kr;
        }
        b[i] = rhs[i];
    }
    for i in 1..n {
        let m = lower[i] / main[i - 1];
        main[i] -= m * upper[i - 1];
        b[i] -= m * b[i - 1];
    }
    let mut x = vec![0.0; n];
    x[n - 1] = b[n - 1] / main[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = (b[i] - upper[i] * x[i + 1]) / main[i];
    }
    for (i, xi) in x.iter_mut().enumerate() {
        if !on(i) {
            *xi = 0.0;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(k: &Stiffness, d: &[f64], coef: f64, u: &[f64], rhs: &[f64]) -> f64 {
        let mut ku = vec![0.0; u.len()];
        k.apply(u, &mut ku);
        (0..u.len())
            .map(|i| (d[i] * u[i] + coef * ku[i] - rhs[i]).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn chain_rows_sum_to_zero() {
        let k = Stiffness::Chain(vec![1.0, 2.0, 0.5]);
        let mut out = vec![0.0; 4];
        k.apply(&[1.0; 4], &mut out);
        assert!(out.iter().all(|v| v.abs() < 1e-15));
        assert!((k.energy(&[0.0, 1.0, 1.0, 3.0]) - (1.0 + 0.0 + 2.0)).abs() < 1e-14);
    }

    #[test]
    fn chain_solve_matches_residual() {
        let k = Stiffness::Chain((0..9).map(|i| 1.0 + i as f64).collect());
        let d: Vec<f64> = (0..10).map(|i| 0.5 + 0.1 * i as f64).collect();
        let rhs: Vec<f64> = (0..10).map(|i| (i as f64).sin()).collect();
        let u = k.solve(&d, 0.3, &rhs, None).unwrap();
        assert!(residual(&k, &d, 0.3, &u, &rhs) < 1e-12);
    }

    #[test]
    fn periodic_solve_matches_residual() {
        let k = Stiffness::Periodic {
            nx: 8,
            ny: 6,
            cx: 1.2,
            cy: 0.8,
        };
        let d: Vec<f64> = (0..48).map(|i| 0.2 + 0.01 * i as f64).collect();
        let rhs: Vec<f64> = (0..48).map(|i| (0.3 * i as f64).cos()).collect();
        let u = k.solve(&d, 2.0, &rhs, None).unwrap();
        assert!(residual(&k, &d, 2.0, &u, &rhs) < 1e-10);
        let mut ku = vec![0.0; 48];
        k.apply(&[3.0; 48], &mut ku);
        assert!(ku.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn masked_nodes_are_pinned_to_zero() {
        let k = Stiffness::Chain(vec![1.0; 7]);
        let d = vec![1.0; 8];
        let mask = [true, true, true, true, false, false, false, false];
        let u = k.solve(&d, 1.0, &[1.0; 8], Some(&mask)).unwrap();
        assert!(u[4..].iter().all(|&v| v == 0.0));
        assert!(u[..4].iter().all(|&v| v > 0.0));
    }
}
