//! Reduced-symmetry model geometries and per-slice geometric quantities.
//!
//! Three models are supported:
//!
//! * `EuclideanRadial`: `dr² + r² g_{S^{n−1}}` on a ball of radius `r_max`.
//! * `SphereRadial`: the round sphere written as a warped product over a
//!   meridian `ψ ∈ [0, π]`, `a²(dψ² + sin²ψ g_{S^{n−1}})`.
//! * `FlatTorusConformal`: `e^{2v}(dx² + dy²)` on a flat rectangular torus.
//!
//! Radial models use a cell-centred grid `x_i = (i + ½)h` so that the pole is
//! a cell face rather than a node; fields are even across every pole.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::discretization::Stiffness;
use crate::error::{Error, Result};

pub const MIN_RESOLUTION: usize = 16;

/// Default bound on the normalised second-difference smoothness indicator.
pub const DEFAULT_SMOOTHNESS_BOUND: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    EuclideanRadial,
    SphereRadial,
    FlatTorusConformal,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::EuclideanRadial => "euclidean_radial",
            ModelKind::SphereRadial => "sphere_radial",
            ModelKind::FlatTorusConformal => "flat_torus_conformal",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "euclidean_radial" => Some(ModelKind::EuclideanRadial),
            "sphere_radial" => Some(ModelKind::SphereRadial),
            "flat_torus_conformal" => Some(ModelKind::FlatTorusConformal),
            _ => None,
        }
    }

    pub fn is_radial(self) -> bool {
        !matches!(self, ModelKind::FlatTorusConformal)
    }
}

/// One Fourier mode of the initial conformal exponent,
/// `amplitude · sin(2π(kx·x/Lx + ky·y/Ly) + phase)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConformalMode {
    pub amplitude: f64,
    #[serde(default)]
    pub kx: i32,
    #[serde(default)]
    pub ky: i32,
    #[serde(default)]
    pub phase: f64,
}

/// Declarative description of a model geometry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryModel {
    pub kind: ModelKind,
    /// Manifold dimension.
    pub n: usize,
    /// Sphere radius at the initial time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    /// Truncation radius of the Euclidean model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_max: Option<f64>,
    /// Fundamental-domain lengths of the torus.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periods: Option<[f64; 2]>,
    /// Radial node count, or nodes per axis on the torus.
    pub nodes: usize,
    /// Initial conformal exponent of the torus.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub modes: Vec<ConformalMode>,
}

impl GeometryModel {
    pub fn euclidean(n: usize, r_max: f64, nodes: usize) -> Self {
        GeometryModel {
            kind: ModelKind::EuclideanRadial,
            n,
            radius: None,
            r_max: Some(r_max),
            periods: None,
            nodes,
            modes: Vec::new(),
        }
    }

    pub fn sphere(n: usize, radius: f64, nodes: usize) -> Self {
        GeometryModel {
            kind: ModelKind::SphereRadial,
            n,
            radius: Some(radius),
            r_max: None,
            periods: None,
            nodes,
            modes: Vec::new(),
        }
    }

    pub fn torus(periods: [f64; 2], nodes: usize, modes: Vec<ConformalMode>) -> Self {
        GeometryModel {
            kind: ModelKind::FlatTorusConformal,
            n: 2,
            radius: None,
            r_max: None,
            periods: Some(periods),
            nodes,
            modes,
        }
    }

    /// Parses a geometry table from TOML text.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let model: GeometryModel =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidGeometry(m));
        if self.n < 2 {
            return bad(format!("dimension n = {} must be at least 2", self.n));
        }
        if self.nodes < MIN_RESOLUTION {
            return bad(format!(
                "resolution {} below minimum {MIN_RESOLUTION}",
                self.nodes
            ));
        }
        match self.kind {
            ModelKind::EuclideanRadial => match self.r_max {
                Some(r) if r > 0.0 && r.is_finite() => Ok(()),
                Some(r) => bad(format!("r_max = {r} must be positive")),
                None => bad("euclidean_radial requires r_max".into()),
            },
            ModelKind::SphereRadial => match self.radius {
                Some(a) if a > 0.0 && a.is_finite() => Ok(()),
                Some(a) => bad(format!("radius = {a} must be positive")),
                None => bad("sphere_radial requires radius".into()),
            },
            ModelKind::FlatTorusConformal => {
                if self.n != 2 {
                    return bad(format!("the conformal torus is a surface, got n = {}", self.n));
                }
                match self.periods {
                    Some([lx, ly]) if lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite() => {}
                    Some(p) => return bad(format!("periods {p:?} must be positive")),
                    None => return bad("flat_torus_conformal requires periods".into()),
                }
                if self
                    .modes
                    .iter()
                    .any(|m| !m.amplitude.is_finite() || !m.phase.is_finite())
                {
                    return bad("conformal modes must be finite".into());
                }
                Ok(())
            }
        }
    }

    /// Builds the grid and the canonical initial slice at time `t0`.
    pub fn build(&self, t0: f64) -> Result<(Arc<Grid>, MetricSlice)> {
        self.validate()?;
        let model = Arc::new(self.clone());
        let grid = Arc::new(Grid::new(self));
        let slice = match self.kind {
            ModelKind::EuclideanRadial => {
                MetricSlice::radial(model, grid.clone(), t0, 1.0)?
            }
            ModelKind::SphereRadial => {
                MetricSlice::radial(model, grid.clone(), t0, self.radius.unwrap_or(1.0))?
            }
            ModelKind::FlatTorusConformal => {
                let v = initial_conformal(self, grid.torus().expect("torus grid"));
                MetricSlice::conformal(model, grid.clone(), t0, v)?
            }
        };
        Ok((grid, slice))
    }
}

fn initial_conformal(model: &GeometryModel, grid: &TorusGrid) -> Vec<f64> {
    let mut v = vec![0.0; grid.len()];
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let (x, y) = grid.coords(j * grid.nx + i);
            v[j * grid.nx + i] = model
                .modes
                .iter()
                .map(|m| {
                    m.amplitude
                        * (2.0 * PI * (m.kx as f64 * x / grid.lx + m.ky as f64 * y / grid.ly)
                            + m.phase)
                            .sin()
                })
                .sum();
        }
    }
    v
}

/// Area of the unit sphere `S^k`.
pub fn unit_sphere_area(k: usize) -> f64 {
    match k {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (k as f64 - 1.0) * unit_sphere_area(k - 2),
    }
}

/// Cell-centred radial grid over the fixed coordinate `x ∈ [0, extent]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialGrid {
    pub spacing: f64,
    pub extent: f64,
    pub coords: Vec<f64>,
    /// True when the far end is a second pole (sphere), false for a truncation.
    pub closed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TorusGrid {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl TorusGrid {
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn coords(&self, idx: usize) -> (f64, f64) {
        let (i, j) = (idx % self.nx, idx / self.nx);
        (i as f64 * self.hx(), j as f64 * self.hy())
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        (j % self.ny) * self.nx + (i % self.nx)
    }

    /// Shortest periodic coordinate offsets from `a` to `b`.
    pub fn flat_offset(&self, a: usize, b: usize) -> (f64, f64) {
        let (ax, ay) = self.coords(a);
        let (bx, by) = self.coords(b);
        let wrap = |d: f64, l: f64| d - l * (d / l).round();
        (wrap(bx - ax, self.lx), wrap(by - ay, self.ly))
    }
}

/// Boundary role of a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryFlag {
    Interior,
    /// Adjacent to a pole (first node, or last node on the sphere).
    Pole,
    /// Last node before the Euclidean truncation radius.
    Truncation,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Grid {
    Radial(RadialGrid),
    Torus(TorusGrid),
}

impl Grid {
    pub fn new(model: &GeometryModel) -> Self {
        match model.kind {
            ModelKind::EuclideanRadial | ModelKind::SphereRadial => {
                let extent = if model.kind == ModelKind::SphereRadial {
                    PI
                } else {
                    model.r_max.unwrap_or(1.0)
                };
                let h = extent / model.nodes as f64;
                Grid::Radial(RadialGrid {
                    spacing: h,
                    extent,
                    coords: (0..model.nodes).map(|i| (i as f64 + 0.5) * h).collect(),
                    closed: model.kind == ModelKind::SphereRadial,
                })
            }
            ModelKind::FlatTorusConformal => {
                let [lx, ly] = model.periods.unwrap_or([2.0 * PI, 2.0 * PI]);
                Grid::Torus(TorusGrid {
                    nx: model.nodes,
                    ny: model.nodes,
                    lx,
                    ly,
                })
            }
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Grid::Radial(g) => g.coords.len(),
            Grid::Torus(g) => g.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn radial(&self) -> Option<&RadialGrid> {
        match self {
            Grid::Radial(g) => Some(g),
            Grid::Torus(_) => None,
        }
    }

    pub fn torus(&self) -> Option<&TorusGrid> {
        match self {
            Grid::Torus(g) => Some(g),
            Grid::Radial(_) => None,
        }
    }

    /// Smallest coordinate spacing.
    pub fn spacing(&self) -> f64 {
        match self {
            Grid::Radial(g) => g.spacing,
            Grid::Torus(g) => g.hx().min(g.hy()),
        }
    }

    /// Dimensionless coordinate quadrature weights.
    pub fn coord_weights(&self) -> Vec<f64> {
        match self {
            Grid::Radial(g) => vec![g.spacing; g.coords.len()],
            Grid::Torus(g) => vec![g.hx() * g.hy(); g.len()],
        }
    }

    pub fn boundary_flags(&self) -> Vec<BoundaryFlag> {
        match self {
            Grid::Radial(g) => {
                let n = g.coords.len();
                (0..n)
                    .map(|i| {
                        if i == 0 || (g.closed && i == n - 1) {
                            BoundaryFlag::Pole
                        } else if i == n - 1 {
                            BoundaryFlag::Truncation
                        } else {
                            BoundaryFlag::Interior
                        }
                    })
                    .collect()
            }
            Grid::Torus(g) => vec![BoundaryFlag::Interior; g.len()],
        }
    }
}

/// A grid-representable point.
///
/// On radial models `North` is the pole at `ψ = 0` (the origin of the
/// Euclidean model), `South` the antipodal pole of the sphere, and `Node(i)`
/// the point at coordinate `x_i` on the meridian through the north pole.
/// On the torus only `Node` is meaningful.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Point {
    North,
    South,
    Node(usize),
}

impl Point {
    pub fn label(&self) -> String {
        match self {
            Point::North => "north".into(),
            Point::South => "south".into(),
            Point::Node(i) => format!("node:{i}"),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "north" => Some(Point::North),
            "south" => Some(Point::South),
            _ => s.strip_prefix("node:")?.parse().ok().map(Point::Node),
        }
    }
}

/// One value per grid node.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite value at node {i}"
            )));
        }
        Ok(ScalarField { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Metric profile of one slice.
#[derive(Clone, Debug, PartialEq)]
pub enum Profile {
    /// Radial models: physical radius `r = scale · x` and warp `φ = scale · shape(x)`.
    Radial { scale: f64 },
    /// Torus: conformal exponent per node.
    Conformal { v: Vec<f64> },
}

/// One time-slice of a flow on a model geometry.
#[derive(Clone, Debug)]
pub struct MetricSlice {
    time: f64,
    model: Arc<GeometryModel>,
    grid: Arc<Grid>,
    profile: Profile,
    warp: Vec<f64>,
    curvature: Vec<f64>,
    weights: Vec<f64>,
    stiffness: Stiffness,
    dirichlet: Stiffness,
}

const GAUSS4_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GAUSS4_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_9,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_9,
];

/// Four-point Gauss–Legendre rule on `[a, b]`.
pub(crate) fn gauss4(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
    GAUSS4_NODES
        .iter()
        .zip(GAUSS4_WEIGHTS)
        .map(|(&x, w)| w * f(m + r * x))
        .sum::<f64>()
        * r
}

impl MetricSlice {
    /// Radial slice with the canonical warp of the model at the given scale.
    pub fn radial(
        model: Arc<GeometryModel>,
        grid: Arc<Grid>,
        time: f64,
        scale: f64,
    ) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "radial scale {scale} must be positive"
            )));
        }
        let rg = grid
            .radial()
            .ok_or_else(|| Error::InvalidGeometry("radial slice on a torus grid".into()))?;
        let kind = model.kind;
        let n = model.n;
        let omega = unit_sphere_area(n - 1);
        let h = rg.spacing;
        let shape = move |x: f64| radial_shape(kind, x);
        let warp: Vec<f64> = rg.coords.iter().map(|&x| scale * shape(x)).collect();
        let weights: Vec<f64> = rg
            .coords
            .iter()
            .map(|&x| {
                if n % 2 == 1 {
                    // midpoint rule: spectrally accurate on pole-even integrands
                    omega * (scale * shape(x)).powi(n as i32 - 1) * scale * h
                } else {
                    omega
                        * scale
                        * gauss4(x - 0.5 * h, x + 0.5 * h, |y| {
                            (scale * shape(y)).powi(n as i32 - 1)
                        })
                }
            })
            .collect();
        // Face couplings are the face area over the spacing, rescaled by the
        // ratio of discrete to exact volume enclosed by the face (measured
        // from the nearer pole). This makes the discrete flux of a radial
        // field through each face match the discrete mass it encloses, which
        // removes the leading near-pole error of the midpoint weights in the
        // heat operator.
        let m = rg.coords.len();
        let cell_volume = |k: usize| {
            let x = rg.coords[k];
            omega * scale * gauss4(x - 0.5 * h, x + 0.5 * h, |y| (scale * shape(y)).powi(n as i32 - 1))
        };
        let exact: Vec<f64> = (0..m).map(cell_volume).collect();
        let mut from_north = vec![(0.0, 0.0); m + 1];
        for k in 0..m {
            from_north[k + 1] = (from_north[k].0 + weights[k], from_north[k].1 + exact[k]);
        }
        let areas: Vec<f64> = (1..m)
            .map(|i| omega * (scale * shape(i as f64 * h)).powi(n as i32 - 1) / (scale * h))
            .collect();
        let couplings: Vec<f64> = (1..m)
            .map(|i| {
                let (disc, cont) = if rg.closed && 2 * i > m {
                    let (tot_d, tot_c) = from_north[m];
                    (tot_d - from_north[i].0, tot_c - from_north[i].1)
                } else {
                    from_north[i]
                };
                areas[i - 1] * disc / cont
            })
            .collect();
        let mut slice = MetricSlice {
            time,
            model,
            grid,
            profile: Profile::Radial { scale },
            warp,
            curvature: Vec::new(),
            weights,
            stiffness: Stiffness::Chain(couplings),
            dirichlet: Stiffness::Chain(areas),
        };
        slice.curvature = slice.scalar_curvature()?.into_values();
        Ok(slice)
    }

    /// Conformal torus slice with exponent `v`.
    pub fn conformal(
        model: Arc<GeometryModel>,
        grid: Arc<Grid>,
        time: f64,
        v: Vec<f64>,
    ) -> Result<Self> {
        let tg = grid
            .torus()
            .ok_or_else(|| Error::InvalidGeometry("conformal slice on a radial grid".into()))?;
        if v.len() != tg.len() {
            return Err(Error::InvalidGeometry(format!(
                "conformal exponent has {} values, grid has {}",
                v.len(),
                tg.len()
            )));
        }
        if let Some(i) = v.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "non-finite conformal exponent at node {i}"
            )));
        }
        let cell = tg.hx() * tg.hy();
        let weights = v.iter().map(|x| (2.0 * x).exp() * cell).collect();
        let stiffness = Stiffness::Periodic {
            nx: tg.nx,
            ny: tg.ny,
            cx: tg.hy() / tg.hx(),
            cy: tg.hx() / tg.hy(),
        };
        let mut slice = MetricSlice {
            time,
            model,
            grid,
            profile: Profile::Conformal { v },
            warp: Vec::new(),
            curvature: Vec::new(),
            weights,
            dirichlet: stiffness.clone(),
            stiffness,
        };
        slice.curvature = slice.scalar_curvature()?.into_values();
        Ok(slice)
    }

    /// The same geometry stamped with a different time.
    pub fn with_time(&self, time: f64) -> Self {
        MetricSlice {
            time,
            ..self.clone()
        }
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn model(&self) -> &GeometryModel {
        &self.model
    }

    pub fn model_arc(&self) -> &Arc<GeometryModel> {
        &self.model
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn kind(&self) -> ModelKind {
        self.model.kind
    }

    pub fn dim(&self) -> usize {
        self.model.n
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    /// Radial scale, `None` on the torus.
    pub fn scale(&self) -> Option<f64> {
        match self.profile {
            Profile::Radial { scale } => Some(scale),
            Profile::Conformal { .. } => None,
        }
    }

    /// Conformal exponent, `None` on radial models.
    pub fn conformal_exponent(&self) -> Option<&[f64]> {
        match &self.profile {
            Profile::Conformal { v } => Some(v),
            Profile::Radial { .. } => None,
        }
    }

    /// Warp factor `φ` at the radial nodes (empty on the torus).
    pub fn warp(&self) -> &[f64] {
        &self.warp
    }

    /// Cached scalar curvature.
    pub fn curvature(&self) -> &[f64] {
        &self.curvature
    }

    /// Volume quadrature weights: `∫ f dg ≈ Σ w_i f_i`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Stiffness of the heat operator `−W⁻¹K`.
    pub fn stiffness(&self) -> &Stiffness {
        &self.stiffness
    }

    /// Couplings of the Dirichlet energy `∫|∇w|² dg ≈ Σ k_e (w_i − w_j)²`
    /// (face area over spacing). On radial models this differs from the
    /// heat-operator stiffness by `O(h²)` near the poles.
    pub fn dirichlet_form(&self) -> &Stiffness {
        &self.dirichlet
    }

    pub fn min_curvature(&self) -> f64 {
        self.curvature.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs_curvature(&self) -> f64 {
        self.curvature.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    pub fn volume(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Recomputes the scalar curvature from the metric profile.
    ///
    /// Radial: `R = (n−1)[(n−2)(1−φ′²)/φ² − 2φ″/φ]` with fourth-order
    /// differences and odd reflection of `φ` across each pole.
    /// Torus: `R = −2e^{−2v}Δ₀v` with the five-point Laplacian.
    pub fn scalar_curvature(&self) -> Result<ScalarField> {
        self.scalar_curvature_with_bound(DEFAULT_SMOOTHNESS_BOUND)
    }

    pub fn scalar_curvature_with_bound(&self, bound: f64) -> Result<ScalarField> {
        match (&self.profile, self.grid.as_ref()) {
            (Profile::Radial { scale }, Grid::Radial(rg)) => {
                radial_curvature(&self.warp, *scale, rg, self.model.n, bound)
                    .and_then(ScalarField::new)
            }
            (Profile::Conformal { v }, Grid::Torus(tg)) => {
                conformal_curvature(v, tg, bound).and_then(ScalarField::new)
            }
            _ => Err(Error::InvalidGeometry("profile does not match grid".into())),
        }
    }

    /// Quadrature of `field` against the volume measure.
    pub fn integrate(&self, field: &[f64]) -> Result<f64> {
        if field.len() != self.len() {
            return Err(Error::InvalidArgument(format!(
                "field has {} values, slice has {} nodes",
                field.len(),
                self.len()
            )));
        }
        if let Some(i) = field.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite value at node {i}")));
        }
        Ok(self.weights.iter().zip(field).map(|(w, f)| w * f).sum())
    }

    /// Physical distance of node `i` from the north pole (radial models).
    pub fn radial_coordinate(&self, i: usize) -> Option<f64> {
        match (&self.profile, self.grid.as_ref()) {
            (Profile::Radial { scale }, Grid::Radial(rg)) => Some(scale * rg.coords[i]),
            _ => None,
        }
    }

    /// Distances of every node from the north pole (radial models).
    pub fn radial_coordinates(&self) -> Option<Vec<f64>> {
        match (&self.profile, self.grid.as_ref()) {
            (Profile::Radial { scale }, Grid::Radial(rg)) => {
                Some(rg.coords.iter().map(|x| scale * x).collect())
            }
            _ => None,
        }
    }

    /// Largest physical distance between neighbouring nodes.
    pub fn mesh_width(&self) -> f64 {
        match &self.profile {
            Profile::Radial { scale } => scale * self.grid.spacing(),
            Profile::Conformal { v } => {
                let top = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                self.grid.spacing() * top.exp()
            }
        }
    }

    /// Diameter of the model (`πa` on the sphere, truncation radius on the
    /// Euclidean model, largest graph distance on the torus).
    pub fn diameter(&self) -> f64 {
        match (&self.profile, self.grid.as_ref()) {
            (Profile::Radial { scale }, Grid::Radial(rg)) => scale * rg.extent,
            _ => self
                .distances_from(Point::Node(0))
                .map(|d| d.into_iter().fold(0.0, f64::max))
                .unwrap_or(0.0),
        }
    }

    /// Geodesic distance between two grid-representable points.
    ///
    /// On radial models at least one point must be a pole. On the torus the
    /// distance is the shortest axis-aligned lattice path with each edge
    /// weighted by the mean conformal factor of its endpoints.
    pub fn distance(&self, p: Point, q: Point) -> Result<f64> {
        if p == q {
            return Ok(0.0);
        }
        match (&self.profile, self.grid.as_ref()) {
            (Profile::Radial { scale }, Grid::Radial(rg)) => {
                let closed = rg.closed;
                let from_north = |pt: Point| -> Result<f64> {
                    match pt {
                        Point::North => Ok(0.0),
                        Point::South if closed => Ok(scale * rg.extent),
                        Point::Node(i) if i < rg.coords.len() => Ok(scale * rg.coords[i]),
                        other => Err(Error::UnsupportedPoints(format!(
                            "{} is not a point of this model",
                            other.label()
                        ))),
                    }
                };
                match (p, q) {
                    (Point::North, other) | (other, Point::North) => from_north(other),
                    (Point::South, other) | (other, Point::South) => {
                        Ok(scale * rg.extent - from_north(other)?)
                    }
                    _ => Err(Error::UnsupportedPoints(
                        "two non-pole points on a radial model".into(),
                    )),
                }
            }
            (Profile::Conformal { .. }, Grid::Torus(tg)) => match q {
                Point::Node(j) if j < tg.len() => Ok(self.distances_from(p)?[j]),
                other => Err(Error::UnsupportedPoints(format!(
                    "{} is not a torus node",
                    other.label()
                ))),
            },
            _ => Err(Error::InvalidGeometry("profile does not match grid".into())),
        }
    }

    /// Distances from `p` to every node.
    pub fn distances_from(&self, p: Point) -> Result<Vec<f64>> {
        match (&self.profile, self.grid.as_ref()) {
            (Profile::Radial { scale }, Grid::Radial(rg)) => match p {
                Point::North => Ok(rg.coords.iter().map(|x| scale * x).collect()),
                Point::South if rg.closed => {
                    Ok(rg.coords.iter().map(|x| scale * (rg.extent - x)).collect())
                }
                other => Err(Error::UnsupportedPoints(format!(
                    "distance field from {} on a radial model",
                    other.label()
                ))),
            },
            (Profile::Conformal { v }, Grid::Torus(tg)) => match p {
                Point::Node(i) if i < tg.len() => Ok(torus_dijkstra(v, tg, i)),
                other => Err(Error::UnsupportedPoints(format!(
                    "{} is not a torus node",
                    other.label()
                ))),
            },
            _ => Err(Error::InvalidGeometry("profile does not match grid".into())),
        }
    }

    /// Closed geodesic ball `{d(center, ·) ≤ ρ}` as a node mask.
    pub fn ball_mask(&self, center: Point, rho: f64) -> Result<Vec<bool>> {
        Ok(self
            .distances_from(center)?
            .into_iter()
            .map(|d| d <= rho)
            .collect())
    }

    /// Volume of the closed geodesic ball of radius `ρ`.
    pub fn ball_volume(&self, center: Point, rho: f64) -> Result<BallVolume> {
        if !(rho > 0.0) {
            return Err(Error::InvalidArgument(format!("ball radius {rho} must be positive")));
        }
        match (&self.profile, self.grid.as_ref()) {
            (Profile::Radial { scale }, Grid::Radial(rg)) => {
                if !matches!(center, Point::North) && !(rg.closed && center == Point::South) {
                    return Err(Error::UnsupportedPoints(
                        "radial balls must be centred at a pole".into(),
                    ));
                }
                let limit = scale * rg.extent;
                let clipped = rho > limit;
                let x_end = rho.min(limit) / scale;
                let n = self.model.n;
                let omega = unit_sphere_area(n - 1);
                let kind = self.model.kind;
                // integrate φ^{n−1} over [0, x_end]; the south-pole ball is the mirror image
                let panels = (x_end / rg.spacing).ceil().max(1.0) as usize;
                let dx = x_end / panels as f64;
                let mut acc = 0.0;
                for k in 0..panels {
                    acc += gauss4(k as f64 * dx, (k + 1) as f64 * dx, |x| {
                        (scale * radial_shape(kind, x)).powi(n as i32 - 1)
                    });
                }
                Ok(BallVolume {
                    volume: omega * scale * acc,
                    clipped,
                })
            }
            (Profile::Conformal { .. }, Grid::Torus(_)) => {
                let d = self.distances_from(center)?;
                let clipped = d.iter().all(|&x| x <= rho);
                let volume = d
                    .iter()
                    .zip(&self.weights)
                    .filter(|(x, _)| **x <= rho)
                    .map(|(_, w)| w)
                    .sum();
                Ok(BallVolume { volume, clipped })
            }
            _ => Err(Error::InvalidGeometry("profile does not match grid".into())),
        }
    }
}

/// Result of a ball-volume query; `clipped` flags radii beyond the model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BallVolume {
    pub volume: f64,
    pub clipped: bool,
}

/// Warp shape of the radial models in the fixed coordinate.
pub fn radial_shape(kind: ModelKind, x: f64) -> f64 {
    match kind {
        ModelKind::SphereRadial => x.sin(),
        _ => x,
    }
}

fn radial_curvature(
    warp: &[f64],
    scale: f64,
    rg: &RadialGrid,
    n: usize,
    bound: f64,
) -> Result<Vec<f64>> {
    let m = warp.len();
    if let Some(i) = warp.iter().position(|p| !(p.is_finite() && *p > 0.0)) {
        return Err(Error::InvalidGeometry(format!(
            "warp factor must be positive at interior node {i}, got {}",
            warp[i]
        )));
    }
    // padded copy with two ghost nodes on each side
    let mut p = vec![0.0; m + 4];
    p[2..m + 2].copy_from_slice(warp);
    p[1] = -warp[0];
    p[0] = -warp[1];
    if rg.closed {
        p[m + 2] = -warp[m - 1];
        p[m + 3] = -warp[m - 2];
    } else {
        let ext = |a: f64, b: f64, c: f64, d: f64| 4.0 * a - 6.0 * b + 4.0 * c - d;
        p[m + 2] = ext(p[m + 1], p[m], p[m - 1], p[m - 2]);
        p[m + 3] = ext(p[m + 2], p[m + 1], p[m], p[m - 1]);
    }
    let h = rg.spacing;
    let peak = warp.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
    let nf = n as f64;
    let mut r = vec![0.0; m];
    for i in 0..m {
        let k = i + 2;
        let second = p[k + 1] - 2.0 * p[k] + p[k - 1];
        let indicator = second.abs() / (h * peak);
        if indicator > bound {
            return Err(Error::NonSmoothProfile {
                node: i,
                indicator,
                bound,
            });
        }
        let d1 = (p[k - 2] - 8.0 * p[k - 1] + 8.0 * p[k + 1] - p[k + 2]) / (12.0 * h * scale);
        let d2 = (-p[k - 2] + 16.0 * p[k - 1] - 30.0 * p[k] + 16.0 * p[k + 1] - p[k + 2])
            / (12.0 * h * h * scale * scale);
        let phi = p[k];
        let tangential = (1.0 - d1 * d1) / (phi * phi);
        let radial = -d2 / phi;
        r[i] = (nf - 1.0) * ((nf - 2.0) * tangential + 2.0 * radial);
    }
    Ok(r)
}

fn conformal_curvature(v: &[f64], tg: &TorusGrid, bound: f64) -> Result<Vec<f64>> {
    let (nx, ny) = (tg.nx, tg.ny);
    let (hx, hy) = (tg.hx(), tg.hy());
    let scale = v.iter().fold(1.0_f64, |a, b| a.max(b.abs()));
    let mut r = vec![0.0; v.len()];
    for j in 0..ny {
        for i in 0..nx {
            let c = v[j * nx + i];
            let sx = v[j * nx + (i + 1) % nx] - 2.0 * c + v[j * nx + (i + nx - 1) % nx];
            let sy = v[((j + 1) % ny) * nx + i] - 2.0 * c + v[((j + ny - 1) % ny) * nx + i];
            let indicator = (sx.abs() + sy.abs()) / (hx.min(hy) * scale);
            if indicator > bound {
                return Err(Error::NonSmoothProfile {
                    node: j * nx + i,
                    indicator,
                    bound,
                });
            }
            let lap = sx / (hx * hx) + sy / (hy * hy);
            r[j * nx + i] = -2.0 * (-2.0 * c).exp() * lap;
        }
    }
    Ok(r)
}

#[derive(PartialEq)]
struct Frontier(f64, usize);

impl Eq for Frontier {}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

/// Torus edge lengths: `h · (e^{v_i} + e^{v_j}) / 2` along each axis.
pub(crate) fn torus_edge_length(v: &[f64], h: f64, a: usize, b: usize) -> f64 {
    0.5 * h * (v[a].exp() + v[b].exp())
}

fn torus_dijkstra(v: &[f64], tg: &TorusGrid, source: usize) -> Vec<f64> {
    let (nx, ny) = (tg.nx, tg.ny);
    let (hx, hy) = (tg.hx(), tg.hy());
    let mut dist = vec![f64::INFINITY; tg.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Frontier(0.0, source));
    while let Some(Frontier(d, idx)) = heap.pop() {
        if d > dist[idx] {
            continue;
        }
        let (i, j) = (idx % nx, idx / nx);
        let neighbours = [
            (j * nx + (i + 1) % nx, hx),
            (j * nx + (i + nx - 1) % nx, hx),
            (((j + 1) % ny) * nx + i, hy),
            (((j + ny - 1) % ny) * nx + i, hy),
        ];
        for (nb, h) in neighbours {
            let nd = d + torus_edge_length(v, h, idx, nb);
            if nd < dist[nb] {
                dist[nb] = nd;
                heap.push(Frontier(nd, nb));
            }
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_dev(values: &[f64], target: f64) -> f64 {
        values.iter().fold(0.0, |m, v| m.max((v - target).abs()))
    }

    #[test]
    fn round_sphere_curvature() {
        let (_, s3) = GeometryModel::sphere(3, 1.0, 256).build(0.0).unwrap();
        assert!(max_dev(s3.curvature(), 6.0) < 1e-3);
        let (_, s2) = GeometryModel::sphere(2, 2.0, 256).build(0.0).unwrap();
        assert!(max_dev(s2.curvature(), 0.5) < 1e-4);
    }

    #[test]
    fn flat_models_have_zero_curvature() {
        let (_, e) = GeometryModel::euclidean(3, 20.0, 512).build(0.0).unwrap();
        assert!(max_dev(e.curvature(), 0.0) < 1e-9);
        let (_, e4) = GeometryModel::euclidean(4, 5.0, 64).build(0.0).unwrap();
        assert!(max_dev(e4.curvature(), 0.0) < 1e-9);
        let (_, t) = GeometryModel::torus([2.0 * PI; 2], 32, vec![]).build(0.0).unwrap();
        assert!(max_dev(t.curvature(), 0.0) == 0.0);
    }

    #[test]
    fn conformal_curvature_spot_value() {
        let eps = 0.1;
        let modes = vec![ConformalMode {
            amplitude: eps,
            kx: 1,
            ky: 0,
            phase: 0.0,
        }];
        let (grid, t) = GeometryModel::torus([2.0 * PI; 2], 64, modes).build(0.0).unwrap();
        let tg = grid.torus().unwrap();
        // x = π/2 is node 16 on a 64-node axis
        let idx = tg.index(16, 5);
        let expected = 0.2 * (-0.2_f64).exp();
        assert!((expected - 0.163_746).abs() < 1e-5);
        assert!((t.curvature()[idx] - expected).abs() / expected < 1e-3);
    }

    #[test]
    fn curvature_converges_at_second_order() {
        let err = |nodes| {
            let (_, s) = GeometryModel::sphere(3, 1.0, nodes).build(0.0).unwrap();
            max_dev(s.curvature(), 6.0)
        };
        let (e1, e2, e3) = (err(64), err(128), err(256));
        let o1 = (e1 / e2).log2();
        let o2 = (e2 / e3).log2();
        assert!(o1 >= 1.9 && o2 >= 1.9, "orders {o1} {o2}");
    }

    #[test]
    fn volumes_and_integrals() {
        let (_, s3) = GeometryModel::sphere(3, 1.0, 256).build(0.0).unwrap();
        assert!((s3.integrate(&vec![1.0; 256]).unwrap() - 2.0 * PI * PI).abs() < 1e-6);
        let (_, t) = GeometryModel::torus([2.0 * PI; 2], 32, vec![]).build(0.0).unwrap();
        assert!((t.volume() - 4.0 * PI * PI).abs() < 1e-10);
        let (_, s2) = GeometryModel::sphere(2, 1.0, 128).build(0.0).unwrap();
        assert!((s2.volume() - 4.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn gaussian_integrates_to_one() {
        let (_, e) = GeometryModel::euclidean(3, 20.0, 512).build(0.0).unwrap();
        let tau = 1.0;
        let g: Vec<f64> = e
            .radial_coordinates()
            .unwrap()
            .iter()
            .map(|r| (4.0 * PI * tau).powf(-1.5) * (-r * r / (4.0 * tau)).exp())
            .collect();
        assert!((e.integrate(&g).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn ball_volumes() {
        let (_, e) = GeometryModel::euclidean(3, 20.0, 512).build(0.0).unwrap();
        let b = e.ball_volume(Point::North, 1.0).unwrap();
        assert!((b.volume - 4.0 * PI / 3.0).abs() < 1e-10 && !b.clipped);
        let (_, s2) = GeometryModel::sphere(2, 1.0, 128).build(0.0).unwrap();
        assert!((s2.ball_volume(Point::North, PI).unwrap().volume - 4.0 * PI).abs() < 1e-10);
        let (_, s3) = GeometryModel::sphere(3, 1.0, 128).build(0.0).unwrap();
        let hemi = s3.ball_volume(Point::South, PI / 2.0).unwrap().volume;
        assert!((hemi - PI * PI).abs() < 1e-10);
        let clipped = s3.ball_volume(Point::North, 10.0).unwrap();
        assert!(clipped.clipped && (clipped.volume - 2.0 * PI * PI).abs() < 1e-10);
        let prev = (1..60)
            .map(|k| s3.ball_volume(Point::North, 0.05 * k as f64).unwrap().volume)
            .collect::<Vec<_>>();
        assert!(prev.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn radial_distances() {
        let (_, e) = GeometryModel::euclidean(3, 20.0, 512).build(0.0).unwrap();
        let r7 = e.radial_coordinate(7).unwrap();
        assert_eq!(e.distance(Point::North, Point::Node(7)).unwrap(), r7);
        assert_eq!(e.distance(Point::Node(3), Point::Node(3)).unwrap(), 0.0);
        assert!(e.distance(Point::Node(3), Point::Node(4)).is_err());
        let (_, s) = GeometryModel::sphere(3, 2.0, 64).build(0.0).unwrap();
        assert!((s.distance(Point::North, Point::South).unwrap() - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn torus_distance_is_flat_lattice_distance() {
        let (grid, t) = GeometryModel::torus([2.0 * PI; 2], 32, vec![]).build(0.0).unwrap();
        let tg = grid.torus().unwrap();
        let h = tg.hx();
        let d = t.distance(Point::Node(0), Point::Node(tg.index(3, 30))).unwrap();
        assert!((d - 5.0 * h).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(GeometryModel::sphere(3, -1.0, 64).validate().is_err());
        assert!(GeometryModel::sphere(3, 1.0, 8).validate().is_err());
        assert!(GeometryModel::euclidean(1, 1.0, 64).validate().is_err());
        let err = GeometryModel::from_toml_str("kind = \"sphere_radial\"\nradius = 1.0\nnodes = 64\n")
            .unwrap_err();
        assert!(err.to_string().contains("n"), "{err}");
    }

    #[test]
    fn non_smooth_profile_is_signalled() {
        let (grid, s) = GeometryModel::torus([2.0 * PI; 2], 32, vec![]).build(0.0).unwrap();
        let mut v = vec![0.0; grid.len()];
        v[40] = 3.0;
        let model = s.model_arc().clone();
        let err = MetricSlice::conformal(model, grid, 0.0, v).unwrap_err();
        assert!(matches!(err, Error::NonSmoothProfile { .. }));
    }
}
