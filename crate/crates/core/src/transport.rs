//! Wasserstein-1 distances, variances and `Hₙ`-centres of conjugate heat
//! kernels.
//!
//! On radial models every measure is rotationally symmetric about the north
//! pole, so coupling along meridians at equal angle is optimal and `W1` is the
//! one-dimensional distance between the radial marginals. On the torus the
//! distance is the lattice path metric and `W1` is solved as a min-cost flow
//! over the lattice edges.

use std::f64::consts::PI;

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use serde::Serialize;

use crate::conjugate_heat::{kernel_flow, ConjugateOptions, DensityFlow};
use crate::error::{Error, Result};
use crate::flow::FlowSpacetime;
use crate::geometry::{gauss4, torus_edge_length, Grid, MetricSlice, ModelKind, Point};

/// Mass tolerance for probability measures.
pub const MASS_TOLERANCE: f64 = 1e-6;

/// `Hₙ = (n − 1)π²/2 + 4`.
pub fn h_n(n: usize) -> f64 {
    (n as f64 - 1.0) * PI * PI / 2.0 + 4.0
}

/// Probability measure on `[0, ∞)` given by atoms at radial distances.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RadialMeasure {
    time: f64,
    atoms: Vec<(f64, f64)>,
}

impl RadialMeasure {
    /// Atoms `(ρ, mass)` at slice time `time`, sorted by `ρ`.
    pub fn new(time: f64, mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms
            .iter()
            .any(|&(r, m)| !(r >= 0.0 && r.is_finite() && m >= 0.0 && m.is_finite()))
        {
            return Err(Error::InvalidArgument(
                "atoms need finite nonnegative positions and masses".into(),
            ));
        }
        let mass: f64 = atoms.iter().map(|a| a.1).sum();
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidArgument(format!("total mass {mass} is not 1")));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(RadialMeasure { time, atoms })
    }

    pub fn dirac(time: f64, rho: f64) -> Result<Self> {
        Self::new(time, vec![(rho, 1.0)])
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    /// `(ρ, F(ρ))` after each atom.
    pub fn cdf(&self) -> Vec<(f64, f64)> {
        let mut acc = 0.0;
        self.atoms
            .iter()
            .map(|&(r, m)| {
                acc += m;
                (r, acc)
            })
            .collect()
    }
}

/// `∫|F₁ − F₂| dρ`.
pub fn w1_radial(a: &RadialMeasure, b: &RadialMeasure) -> Result<f64> {
    if a.time != b.time {
        return Err(Error::MismatchedSlices(a.time, b.time));
    }
    let (ma, mb): (f64, f64) = (a.atoms.iter().map(|x| x.1).sum(), b.atoms.iter().map(|x| x.1).sum());
    let (mut i, mut j) = (0, 0);
    let (mut fa, mut fb) = (0.0_f64, 0.0_f64);
    let mut last = 0.0;
    let mut total = 0.0;
    while i < a.atoms.len() || j < b.atoms.len() {
        let ra = a.atoms.get(i).map_or(f64::INFINITY, |x| x.0);
        let rb = b.atoms.get(j).map_or(f64::INFINITY, |x| x.0);
        let r = ra.min(rb);
        total += (fa - fb).abs() * (r - last);
        last = r;
        while i < a.atoms.len() && a.atoms[i].0 == r {
            fa += a.atoms[i].1 / ma;
            i += 1;
        }
        while j < b.atoms.len() && b.atoms[j].0 == r {
            fb += b.atoms[j].1 / mb;
            j += 1;
        }
    }
    Ok(total)
}

/// A probability measure on a slice.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Measure {
    Radial(RadialMeasure),
    /// Node masses on the torus lattice.
    Lattice { time: f64, masses: Vec<f64> },
}

impl Measure {
    /// `u dg` for a density `u` on the slice.
    pub fn density(slice: &MetricSlice, u: &[f64]) -> Result<Self> {
        if u.len() != slice.len() {
            return Err(Error::InvalidArgument("density does not match slice".into()));
        }
        if let Some((node, &value)) = u.iter().enumerate().find(|(_, v)| **v < 0.0) {
            return Err(Error::NegativeDensity { node, value });
        }
        let masses: Vec<f64> = slice.weights().iter().zip(u).map(|(w, x)| w * x).collect();
        if slice.kind().is_radial() {
            let rho = slice.distances_from(Point::North)?;
            RadialMeasure::new(slice.time(), rho.into_iter().zip(masses).collect()).map(Measure::Radial)
        } else {
            let total: f64 = masses.iter().sum();
            if (total - 1.0).abs() > MASS_TOLERANCE {
                return Err(Error::InvalidArgument(format!("total mass {total} is not 1")));
            }
            Ok(Measure::Lattice {
                time: slice.time(),
                masses,
            })
        }
    }

    pub fn dirac(slice: &MetricSlice, p: Point) -> Result<Self> {
        if slice.kind().is_radial() {
            let rho = slice.distance(Point::North, p)?;
            RadialMeasure::dirac(slice.time(), rho).map(Measure::Radial)
        } else {
            let Point::Node(i) = p else {
                return Err(Error::UnsupportedPoints(format!("{} on the torus", p.label())));
            };
            if i >= slice.len() {
                return Err(Error::UnsupportedPoints(format!("node {i} out of range")));
            }
            let mut masses = vec![0.0; slice.len()];
            masses[i] = 1.0;
            Ok(Measure::Lattice {
                time: slice.time(),
                masses,
            })
        }
    }

    pub fn time(&self) -> f64 {
        match self {
            Measure::Radial(m) => m.time,
            Measure::Lattice { time, .. } => *time,
        }
    }
}

fn check_times(slice: &MetricSlice, a: &Measure, b: &Measure) -> Result<()> {
    for m in [a, b] {
        if m.time() != slice.time() {
            return Err(Error::MismatchedSlices(m.time(), slice.time()));
        }
    }
    Ok(())
}

/// Wasserstein-1 distance on the slice.
pub fn w1(slice: &MetricSlice, a: &Measure, b: &Measure) -> Result<f64> {
    check_times(slice, a, b)?;
    match (a, b) {
        (Measure::Radial(x), Measure::Radial(y)) => w1_radial(x, y),
        (Measure::Lattice { masses: x, .. }, Measure::Lattice { masses: y, .. }) => {
            w1_lattice(slice, x, y)
        }
        _ => Err(Error::InvalidArgument("measures of different kinds".into())),
    }
}

/// Min-cost flow over the lattice edges with costs equal to edge lengths.
fn w1_lattice(slice: &MetricSlice, a: &[f64], b: &[f64]) -> Result<f64> {
    let Some(tg) = slice.grid().torus() else {
        return Err(Error::InvalidGeometry("lattice measure on a radial slice".into()));
    };
    let v = slice.conformal_exponent().expect("torus slice carries a conformal exponent");
    let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    let supply: Vec<f64> = a.iter().zip(b).map(|(x, y)| x / sa - y / sb).collect();
    if supply.iter().all(|s| s.abs() < 1e-15) {
        return Ok(0.0);
    }
    let (nx, ny) = (tg.nx, tg.ny);
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    // outgoing and incoming flux terms per node
    let mut terms: Vec<Vec<(minilp::Variable, f64)>> = vec![Vec::new(); nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let here = j * nx + i;
            for (there, h) in [(j * nx + (i + 1) % nx, tg.hx()), (((j + 1) % ny) * nx + i, tg.hy())] {
                let cost = torus_edge_length(v, h, here, there);
                for sign in [1.0, -1.0] {
                    let f = lp.add_var(cost, (0.0, f64::INFINITY));
                    terms[here].push((f, sign));
                    terms[there].push((f, -sign));
                }
            }
        }
    }
    for (k, row) in terms.iter().enumerate().skip(1) {
        lp.add_constraint(row.as_slice(), ComparisonOp::Eq, supply[k]);
    }
    let solution = lp.solve().map_err(|e| Error::Transport(e.to_string()))?;
    Ok(solution.objective())
}

/// Mean of `d²` over the relative angle between a point at polar distance
/// `zeta` and the orbit at polar distance `rho`.
fn orbit_mean_sq_distance(kind: ModelKind, radius: f64, n: usize, zeta: f64, rho: f64) -> f64 {
    match kind {
        ModelKind::SphereRadial => {
            if zeta == 0.0 {
                return rho * rho;
            }
            let (a, b) = (zeta / radius, rho / radius);
            let d2 = |theta: f64| {
                let c = (a.cos() * b.cos() + a.sin() * b.sin() * theta.cos()).clamp(-1.0, 1.0);
                let d = radius * c.acos();
                d * d
            };
            angular_average(n, d2)
        }
        // the cross term averages to zero over the orbit
        _ => zeta * zeta + rho * rho,
    }
}

const ANGULAR_PANELS: usize = 32;

/// Average of `f(θ)` against `sin^{n−2} θ dθ` on `[0, π]`.
fn angular_average(n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let weight = |t: f64| t.sin().powi(n as i32 - 2);
    let h = PI / ANGULAR_PANELS as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..ANGULAR_PANELS {
        let (a, b) = (k as f64 * h, (k + 1) as f64 * h);
        num += gauss4(a, b, |t| weight(t) * f(t));
        den += gauss4(a, b, weight);
    }
    num / den
}

/// Fraction of the angular measure `sin^{n−2} θ dθ` with `cos θ < c`.
fn angular_fraction_below(n: usize, c: f64) -> f64 {
    if c <= -1.0 {
        return 0.0;
    }
    if c > 1.0 {
        return 1.0;
    }
    let t0 = c.acos();
    let weight = |t: f64| t.sin().powi(n as i32 - 2);
    let h = PI / ANGULAR_PANELS as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..ANGULAR_PANELS {
        let (a, b) = (k as f64 * h, (k + 1) as f64 * h);
        den += gauss4(a, b, weight);
        if b > t0 {
            num += gauss4(a.max(t0), b, weight);
        }
    }
    num / den
}

fn sphere_radius(slice: &MetricSlice) -> f64 {
    slice.scale().unwrap_or(1.0)
}

/// `Var(μ₁, μ₂) = ∫∫ d(x, y)² dμ₁ dμ₂`.
pub fn variance(slice: &MetricSlice, a: &Measure, b: &Measure) -> Result<f64> {
    check_times(slice, a, b)?;
    match (a, b) {
        (Measure::Radial(x), Measure::Radial(y)) => {
            let (kind, n, radius) = (slice.kind(), slice.dim(), sphere_radius(slice));
            let mut total = 0.0;
            for &(r1, m1) in &x.atoms {
                if m1 == 0.0 {
                    continue;
                }
                for &(r2, m2) in &y.atoms {
                    if m2 != 0.0 {
                        total += m1 * m2 * orbit_mean_sq_distance(kind, radius, n, r1, r2);
                    }
                }
            }
            Ok(total)
        }
        (Measure::Lattice { masses: x, .. }, Measure::Lattice { masses: y, .. }) => {
            let mut total = 0.0;
            for (i, &m1) in x.iter().enumerate() {
                if m1 == 0.0 {
                    continue;
                }
                let d = slice.distances_from(Point::Node(i))?;
                total += m1 * y.iter().zip(&d).map(|(m2, d)| m2 * d * d).sum::<f64>();
            }
            Ok(total)
        }
        _ => Err(Error::InvalidArgument("measures of different kinds".into())),
    }
}

/// Candidate centres with `Var(δ_z, ν)` for each.
fn centre_variances(slice: &MetricSlice, nu: &Measure) -> Result<Vec<(Point, f64, f64)>> {
    match nu {
        Measure::Radial(m) => {
            let (kind, n, radius) = (slice.kind(), slice.dim(), sphere_radius(slice));
            let mut zetas = vec![(Point::North, 0.0)];
            let rho = slice.distances_from(Point::North)?;
            zetas.extend(rho.iter().enumerate().map(|(i, &r)| (Point::Node(i), r)));
            Ok(zetas
                .into_iter()
                .map(|(p, zeta)| {
                    let var = m
                        .atoms
                        .iter()
                        .filter(|a| a.1 != 0.0)
                        .map(|&(r, w)| w * orbit_mean_sq_distance(kind, radius, n, zeta, r))
                        .sum();
                    (p, zeta, var)
                })
                .collect())
        }
        Measure::Lattice { masses, .. } => (0..slice.len())
            .map(|i| {
                let d = slice.distances_from(Point::Node(i))?;
                let var = masses.iter().zip(&d).map(|(m, d)| m * d * d).sum();
                Ok((Point::Node(i), 0.0, var))
            })
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HnCenterResult {
    #[serde(serialize_with = "serialize_point")]
    pub center: Point,
    /// Distance of the centre from the reference pole or basepoint.
    pub offset: f64,
    pub variance: f64,
    pub w1: f64,
    pub h_n: f64,
    pub gap: f64,
    /// Number of candidates attaining the minimum to round-off.
    pub multiplicity: usize,
}

impl HnCenterResult {
    /// `Hₙ(t − s) − Var(δ_z, ν)`.
    pub fn variance_margin(&self) -> f64 {
        self.h_n * self.gap - self.variance
    }

    /// `√(Hₙ(t − s)) − W1(δ_z, ν)`.
    pub fn w1_margin(&self) -> f64 {
        (self.h_n * self.gap).sqrt() - self.w1
    }
}

fn serialize_point<S: serde::Serializer>(p: &Point, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&p.label())
}

/// Minimizes `z ↦ Var(δ_z, ν)` over grid points for a kernel measure `ν` on
/// the slice at `s`, with `gap = t − s`. Ties go to the candidate nearest the
/// reference point (the pole, or `reference` on the torus).
pub fn hn_center_of(
    slice: &MetricSlice,
    nu: &Measure,
    gap: f64,
    reference: Point,
) -> Result<HnCenterResult> {
    if !(gap > 0.0) {
        return Err(Error::InvalidArgument(format!("time gap {gap} must be positive")));
    }
    let mut candidates = centre_variances(slice, nu)?;
    if let Measure::Lattice { .. } = nu {
        let d = slice.distances_from(reference)?;
        for c in candidates.iter_mut() {
            if let Point::Node(i) = c.0 {
                c.1 = d[i];
            }
        }
    }
    let min = candidates.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
    let tie = 1e-12 * min.abs().max(1e-300);
    let ties: Vec<&(Point, f64, f64)> = candidates.iter().filter(|c| c.2 - min <= tie).collect();
    let &&(center, offset, variance) = ties
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one candidate");
    let dirac = Measure::dirac(slice, center)?;
    let w1 = w1(slice, &dirac, nu)?;
    Ok(HnCenterResult {
        center,
        offset,
        variance,
        w1,
        h_n: h_n(slice.dim()),
        gap,
        multiplicity: ties.len(),
    })
}

/// `Hₙ`-centre at time `s` of the kernel based at `(x0, t0)`.
pub fn hn_center(
    flow: &FlowSpacetime,
    x0: Point,
    t0: f64,
    s: f64,
    opts: &ConjugateOptions,
) -> Result<HnCenterResult> {
    let (slice, nu) = kernel_measure(flow, x0, t0, s, opts)?;
    hn_center_of(&slice, &nu, t0 - s, x0)
}

/// `ν_{x,t|s}` on the slice at `s`; a Dirac mass when `s = t`.
pub fn kernel_measure(
    flow: &FlowSpacetime,
    x: Point,
    t: f64,
    s: f64,
    opts: &ConjugateOptions,
) -> Result<(MetricSlice, Measure)> {
    if s > t {
        return Err(Error::InvalidArgument(format!("time {s} is after the basepoint time {t}")));
    }
    if s == t {
        let slice = flow.slice_at(s)?;
        let m = Measure::dirac(&slice, x)?;
        return Ok((slice, m));
    }
    let kernel = kernel_flow(flow, x, t, s, &[s], opts)?;
    let (slice, u) = kernel.slice_and_field(s)?;
    Ok((slice.clone(), Measure::density(slice, u)?))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LadderRow {
    pub time: f64,
    pub w1: f64,
    pub variance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct W1Ladder {
    pub rows: Vec<LadderRow>,
}

impl W1Ladder {
    /// `W1(s_{k+1}) − W1(s_k)` for consecutive times.
    pub fn margins(&self) -> Vec<f64> {
        self.rows.windows(2).map(|w| w[1].w1 - w[0].w1).collect()
    }

    pub fn worst_margin(&self) -> f64 {
        self.margins().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.worst_margin() >= -tolerance
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,W1,Var\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{}\n", r.time, r.w1, r.variance));
        }
        out
    }
}

/// `W1` and `Var` between two density flows at each of `times` both record.
pub fn w1_ladder(a: &DensityFlow, b: &DensityFlow, times: &[f64]) -> Result<W1Ladder> {
    let mut times = times.to_vec();
    times.sort_by(f64::total_cmp);
    let mut rows = Vec::new();
    for t in times {
        let (Some(k), Some(j)) = (a.index_of(t), b.index_of(t)) else {
            continue;
        };
        let slice = &a.slices()[k];
        let ma = Measure::density(slice, &a.fields()[k])?;
        let mb = Measure::density(&b.slices()[j], &b.fields()[j])?;
        rows.push(LadderRow {
            time: t,
            w1: w1(slice, &ma, &mb)?,
            variance: variance(slice, &ma, &mb)?,
        });
    }
    if rows.len() < 2 {
        return Err(Error::InvalidArgument("flows share fewer than two times".into()));
    }
    Ok(W1Ladder { rows })
}

/// Kernels based at `(x1, t1)` and `(x2, t1)` solved down to `s_min` on a
/// common ladder, and the `W1` distance between them along it.
pub fn w1_monotonicity_check(
    flow: &FlowSpacetime,
    x1: Point,
    x2: Point,
    t1: f64,
    ladder: &[f64],
    opts: &ConjugateOptions,
) -> Result<W1Ladder> {
    let s_min = ladder.iter().copied().fold(f64::INFINITY, f64::min);
    let a = kernel_flow(flow, x1, t1, s_min, ladder, opts)?;
    let b = if x1 == x2 {
        a.clone()
    } else {
        kernel_flow(flow, x2, t1, s_min, ladder, opts)?
    };
    w1_ladder(&a, &b, ladder)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PStarResult {
    pub member: bool,
    pub distance: Option<f64>,
    /// Distance equals `A` exactly.
    pub boundary: bool,
    pub reason: Option<String>,
}

impl PStarResult {
    fn outside(reason: String) -> Self {
        PStarResult {
            member: false,
            distance: None,
            boundary: false,
            reason: Some(reason),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PStarWindow {
    pub a: f64,
    pub t_minus: f64,
    pub t_plus: f64,
}

/// Membership of `(x, t)` in the parabolic neighbourhood of `(x0, t0)` with
/// parameters `A`, `T⁻`, `T⁺`: `W1` between the kernels on the slice at
/// `t0 − T⁻` must be strictly below `A`.
pub fn pstar_contains(
    flow: &FlowSpacetime,
    center: (Point, f64),
    window: PStarWindow,
    query: (Point, f64),
    opts: &ConjugateOptions,
) -> Result<PStarResult> {
    let ((x0, t0), (x, t)) = (center, query);
    if !(window.a >= 0.0 && window.t_minus >= 0.0 && window.t_plus >= 0.0) {
        return Err(Error::InvalidArgument("need A ≥ 0, T⁻ ≥ 0 and T⁺ ≥ 0".into()));
    }
    let s = t0 - window.t_minus;
    if t < s || t > t0 + window.t_plus {
        return Ok(PStarResult::outside(format!(
            "time {t} outside [{s}, {}]",
            t0 + window.t_plus
        )));
    }
    if !flow.contains(s) || !flow.contains(t) || !flow.contains(t0) {
        return Ok(PStarResult::outside(format!(
            "window leaves the flow interval [{}, {}]",
            flow.start(),
            flow.end()
        )));
    }
    let distance = if (x, t) == (x0, t0) {
        0.0
    } else {
        let (slice, a) = kernel_measure(flow, x0, t0, s, opts)?;
        let (_, b) = kernel_measure(flow, x, t, s, opts)?;
        w1(&slice, &a, &b)?
    };
    Ok(PStarResult {
        member: distance < window.a,
        distance: Some(distance),
        boundary: distance == window.a,
        reason: None,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcentrationResult {
    pub center: HnCenterResult,
    pub radius: f64,
    pub tail: f64,
    pub bound: f64,
}

impl ConcentrationResult {
    pub fn margin(&self) -> f64 {
        self.bound - self.tail
    }
}

/// Mass of `ν` outside `B(z, A√gap)` around its `Hₙ`-centre against `2e^{−A²/20}`.
pub fn concentration_of(slice: &MetricSlice, nu: &Measure, gap: f64, a: f64, reference: Point) -> Result<ConcentrationResult> {
    let n = slice.dim();
    if !(a > 10.0 * h_n(n).sqrt()) {
        return Err(Error::Precondition(format!(
            "A = {a} must exceed 10√Hₙ = {}",
            10.0 * h_n(n).sqrt()
        )));
    }
    let center = hn_center_of(slice, nu, gap, reference)?;
    let radius = a * gap.sqrt();
    let tail = match nu {
        Measure::Radial(m) => {
            let zeta = center.offset;
            m.atoms
                .iter()
                .map(|&(r, w)| w * orbit_fraction_outside(slice, zeta, r, radius))
                .sum()
        }
        Measure::Lattice { masses, .. } => {
            let d = slice.distances_from(center.center)?;
            masses.iter().zip(&d).filter(|(_, d)| **d > radius).map(|(m, _)| m).sum()
        }
    };
    Ok(ConcentrationResult {
        center,
        radius,
        tail,
        bound: 2.0 * (-a * a / 20.0).exp(),
    })
}

/// Fraction of the orbit at polar distance `rho` lying farther than `radius`
/// from the point at polar distance `zeta`.
fn orbit_fraction_outside(slice: &MetricSlice, zeta: f64, rho: f64, radius: f64) -> f64 {
    let n = slice.dim();
    let threshold = match slice.kind() {
        ModelKind::SphereRadial => {
            let a = sphere_radius(slice);
            if radius >= PI * a {
                return 0.0;
            }
            let (z, r) = (zeta / a, rho / a);
            let den = z.sin() * r.sin();
            let num = (radius / a).cos() - z.cos() * r.cos();
            if den <= 0.0 {
                return if num < 0.0 { 1.0 } else { 0.0 };
            }
            num / den
        }
        _ => {
            let den = 2.0 * zeta * rho;
            let num = zeta * zeta + rho * rho - radius * radius;
            if den <= 0.0 {
                return if num > 0.0 { 1.0 } else { 0.0 };
            }
            num / den
        }
    };
    angular_fraction_below(n, threshold)
}

/// [`concentration_of`] for the kernel based at `(x, t)` on the slice at `s`.
pub fn concentration_check(
    flow: &FlowSpacetime,
    x: Point,
    t: f64,
    s: f64,
    a: f64,
    opts: &ConjugateOptions,
) -> Result<ConcentrationResult> {
    let (slice, nu) = kernel_measure(flow, x, t, s, opts)?;
    concentration_of(&slice, &nu, t - s, a, x)
}

/// Lattice grids report their spacing so callers can size bump widths.
pub fn lattice_spacing(slice: &MetricSlice) -> Option<(f64, f64)> {
    match slice.grid() {
        Grid::Torus(tg) => Some((tg.hx(), tg.hy())),
        Grid::Radial(_) => None,
    }
}
