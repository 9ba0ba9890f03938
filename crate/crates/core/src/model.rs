//! Geometry, damping region, the hinged-plate sine basis and the assembled
//! modal operators.
//!
//! With hinged edges (`u = Δu = 0`) on an interval or rectangle the
//! bi-Laplacian is the square of the Dirichlet Laplacian, so the Dirichlet
//! sine functions diagonalise the elastic operator exactly. Everything
//! downstream works in these modal coordinates.

use std::f64::consts::PI;

use nalgebra::{ComplexField, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};

/// A point of the closed domain. In 1D only the first coordinate is read.
pub type Point = [f64; 2];

/// Scalar types a modal coefficient vector may carry (`f64` or `Complex<f64>`).
pub trait Coefficient: ComplexField<RealField = f64> + Copy {}
impl<T: ComplexField<RealField = f64> + Copy> Coefficient for T {}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Geometry {
    /// The interval `(0, length)`.
    Interval { length: f64 },
    /// The rectangle `(0, lx) × (0, ly)`.
    Rectangle { lx: f64, ly: f64 },
}

fn positive_length(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        config(format!("{name} must be a positive finite length, got {value}"))
    }
}

impl Geometry {
    pub fn interval(length: f64) -> Result<Self> {
        positive_length("length", length)?;
        Ok(Geometry::Interval { length })
    }

    pub fn rectangle(lx: f64, ly: f64) -> Result<Self> {
        positive_length("lx", lx)?;
        positive_length("ly", ly)?;
        Ok(Geometry::Rectangle { lx, ly })
    }

    pub fn dim(&self) -> usize {
        match self {
            Geometry::Interval { .. } => 1,
            Geometry::Rectangle { .. } => 2,
        }
    }

    /// Extent along `x` (the direction the damping strip is cut in).
    pub fn lx(&self) -> f64 {
        match *self {
            Geometry::Interval { length } => length,
            Geometry::Rectangle { lx, .. } => lx,
        }
    }

    pub fn ly(&self) -> Option<f64> {
        match *self {
            Geometry::Interval { .. } => None,
            Geometry::Rectangle { ly, .. } => Some(ly),
        }
    }

    /// Membership in the closed domain.
    pub fn contains(&self, p: Point) -> bool {
        let in_x = (0.0..=self.lx()).contains(&p[0]);
        match self.ly() {
            None => in_x,
            Some(ly) => in_x && (0.0..=ly).contains(&p[1]),
        }
    }

    /// Area (or length) of the domain.
    pub fn measure(&self) -> f64 {
        self.lx() * self.ly().unwrap_or(1.0)
    }
}

/// The damped set `ω = (0, ℓ)` (1D) or the strip `(0, ℓx) × (0, Ly)` (2D),
/// carrying the constant coefficient `d` of `a(x) = d·1_ω(x)`.
///
/// `extent = 0` or `coefficient = 0` give the undamped plate and
/// `extent = L` the fully damped one; strictly localized damping has
/// `0 < extent < L` and an interface at `x = extent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DampingRegion {
    extent: f64,
    coefficient: f64,
}

impl DampingRegion {
    pub fn new(extent: f64, coefficient: f64) -> Result<Self> {
        if !(extent.is_finite() && extent >= 0.0) {
            return config(format!("damping extent must be finite and >= 0, got {extent}"));
        }
        if !(coefficient.is_finite() && coefficient >= 0.0) {
            return config(format!(
                "damping coefficient must be finite and >= 0, got {coefficient}"
            ));
        }
        Ok(DampingRegion { extent, coefficient })
    }

    pub fn undamped() -> Self {
        DampingRegion {
            extent: 0.0,
            coefficient: 0.0,
        }
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn coefficient(&self) -> f64 {
        self.coefficient
    }

    pub fn is_empty(&self) -> bool {
        self.extent == 0.0 || self.coefficient == 0.0
    }

    /// True when `ω = Ω`.
    pub fn covers(&self, geometry: &Geometry) -> bool {
        self.extent >= geometry.lx()
    }

    /// Whether the region is a proper, nonempty subset with an interface inside `Ω`.
    pub fn is_localized(&self, geometry: &Geometry) -> bool {
        self.extent > 0.0 && self.extent < geometry.lx()
    }

    /// Open-set membership of `p` in `ω`.
    pub fn contains(&self, p: Point) -> bool {
        p[0] > 0.0 && p[0] < self.extent
    }

    pub fn check_inside(&self, geometry: &Geometry) -> Result<()> {
        if self.extent > geometry.lx() {
            return config(format!(
                "damping extent {} exceeds the domain length {}",
                self.extent,
                geometry.lx()
            ));
        }
        Ok(())
    }
}

/// Index of a Dirichlet mode: `m` along `x`, `n` along `y` (`n = 0` in 1D).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModeIndex {
    pub m: usize,
    pub n: usize,
}

/// The `N` lowest Dirichlet eigenpairs of `−Δ` on the domain, ordered by
/// eigenvalue with ties broken lexicographically on `(m, n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalBasis {
    geometry: Geometry,
    modes: Vec<ModeIndex>,
    eigenvalues: Vec<f64>,
}

/// Per-mode samples of a basis function at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ModeSample {
    pub value: f64,
    pub grad: [f64; 2],
}

impl ModalBasis {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn modes(&self) -> &[ModeIndex] {
        &self.modes
    }

    /// Dirichlet eigenvalues `λ_m` of `−Δ`; `Δ²φ_m = λ_m²φ_m`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub(crate) fn sample(&self, p: Point) -> Vec<ModeSample> {
        let lx = self.geometry.lx();
        let sx = (2.0 / lx).sqrt();
        match self.geometry.ly() {
            None => self
                .modes
                .iter()
                .map(|mode| {
                    let a = mode.m as f64 * PI / lx;
                    let (s, c) = (a * p[0]).sin_cos();
                    ModeSample {
                        value: sx * s,
                        grad: [sx * a * c, 0.0],
                    }
                })
                .collect(),
            Some(ly) => {
                let sy = (2.0 / ly).sqrt();
                self.modes
                    .iter()
                    .map(|mode| {
                        let a = mode.m as f64 * PI / lx;
                        let b = mode.n as f64 * PI / ly;
                        let (s1, c1) = (a * p[0]).sin_cos();
                        let (s2, c2) = (b * p[1]).sin_cos();
                        let fx = sx * s1;
                        let fy = sy * s2;
                        ModeSample {
                            value: fx * fy,
                            grad: [sx * a * c1 * fy, fx * sy * b * c2],
                        }
                    })
                    .collect()
            }
        }
    }
}

/// Analytic Dirichlet eigenpairs: `λ = (mπ/L)²` in 1D and
/// `λ = (mπ/Lx)² + (nπ/Ly)²` in 2D, with normalized sine eigenfunctions.
pub fn laplacian_eigenpairs(geometry: Geometry, n_modes: usize) -> Result<ModalBasis> {
    if n_modes == 0 {
        return config("n_modes must be at least 1");
    }
    let lx = geometry.lx();
    let modes: Vec<ModeIndex> = match geometry.ly() {
        None => (1..=n_modes).map(|m| ModeIndex { m, n: 0 }).collect(),
        Some(ly) => {
            // Every one of the N lowest modes has m, n <= N.
            let mut all: Vec<ModeIndex> = (1..=n_modes)
                .flat_map(|m| (1..=n_modes).map(move |n| ModeIndex { m, n }))
                .collect();
            if lx == ly {
                // Exact integer key so that symmetric pairs tie exactly.
                all.sort_by_key(|k| (k.m * k.m + k.n * k.n, k.m, k.n));
            } else {
                let key = |k: &ModeIndex| {
                    let (a, b) = (k.m as f64 / lx, k.n as f64 / ly);
                    a * a + b * b
                };
                all.sort_by(|p, q| key(p).total_cmp(&key(q)).then((p.m, p.n).cmp(&(q.m, q.n))));
            }
            all.truncate(n_modes);
            all
        }
    };
    let eigenvalues = modes
        .iter()
        .map(|k| {
            let a = k.m as f64 * PI / lx;
            let b = geometry.ly().map_or(0.0, |ly| k.n as f64 * PI / ly);
            a * a + b * b
        })
        .collect();
    Ok(ModalBasis {
        geometry,
        modes,
        eigenvalues,
    })
}

/// `sin(πx)` with exact zeros at the integers.
fn sin_pi(x: f64) -> f64 {
    let r = x.rem_euclid(2.0);
    if r.fract() == 0.0 {
        0.0
    } else {
        (PI * r).sin()
    }
}

/// Closed-form x-integrals over `(0, ℓ)` of products of the normalized 1D
/// sines `√(2/L) sin(mπx/L)` and of their derivatives.
struct StripIntegrals {
    length: f64,
    ratio: f64,
}

impl StripIntegrals {
    fn new(length: f64, extent: f64) -> Self {
        StripIntegrals {
            length,
            ratio: (extent / length).min(1.0),
        }
    }

    /// `[∫ cos((m−n)πx/L) dx, ∫ cos((m+n)πx/L) dx]` scaled by `2/L`.
    fn cos_pair(&self, m: usize, n: usize) -> (f64, f64) {
        let t = self.ratio;
        let diff = if m == n {
            2.0 * t
        } else {
            let k = m as f64 - n as f64;
            2.0 * sin_pi(k * t) / (PI * k)
        };
        let k = (m + n) as f64;
        let sum = 2.0 * sin_pi(k * t) / (PI * k);
        (diff, sum)
    }

    /// `∫_0^ℓ φ_m φ_n dx`.
    fn values(&self, m: usize, n: usize) -> f64 {
        let (diff, sum) = self.cos_pair(m, n);
        0.5 * (diff - sum)
    }

    /// `∫_0^ℓ φ_m' φ_n' dx`.
    fn derivatives(&self, m: usize, n: usize) -> f64 {
        let (diff, sum) = self.cos_pair(m, n);
        let scale = PI / self.length;
        (m as f64 * scale) * (n as f64 * scale) * 0.5 * (diff + sum)
    }
}

/// Damping Gram matrix `D_mn = d ∫_ω ∇φ_m·∇φ_n dx` in closed form.
///
/// In 2D the strip spans the full height, so the `y` factors are orthogonal
/// and `D` is block diagonal in `n`.
pub fn assemble_damping(basis: &ModalBasis, region: &DampingRegion) -> Result<DMatrix<f64>> {
    region.check_inside(basis.geometry())?;
    let size = basis.len();
    let mut damping = DMatrix::zeros(size, size);
    if region.is_empty() {
        return Ok(damping);
    }
    let geometry = basis.geometry();
    let strip = StripIntegrals::new(geometry.lx(), region.extent());
    let d = region.coefficient();
    let modes = basis.modes();
    for i in 0..size {
        for j in i..size {
            let (p, q) = (modes[i], modes[j]);
            let entry = match geometry.ly() {
                None => strip.derivatives(p.m, q.m),
                Some(ly) => {
                    if p.n != q.n {
                        continue;
                    }
                    let b = p.n as f64 * PI / ly;
                    strip.derivatives(p.m, q.m) + b * b * strip.values(p.m, q.m)
                }
            };
            damping[(i, j)] = d * entry;
            damping[(j, i)] = d * entry;
        }
    }
    Ok(damping)
}

/// `Λ` (as a diagonal) and `D`, the two blocks of the discrete generator.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalOperators {
    pub stiffness: DVector<f64>,
    pub damping: DMatrix<f64>,
}

/// The generator in energy coordinates `(Λu, v)`: `Â = [[0, Λ], [−Λ, −D]]`.
pub fn assemble_generator(operators: &ModalOperators) -> Result<DMatrix<f64>> {
    let n = operators.stiffness.len();
    if operators.damping.shape() != (n, n) {
        return config(format!(
            "generator blocks disagree: Λ has {n} entries but D is {}x{}",
            operators.damping.nrows(),
            operators.damping.ncols()
        ));
    }
    let mut generator = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        generator[(i, n + i)] = operators.stiffness[i];
        generator[(n + i, i)] = -operators.stiffness[i];
    }
    generator.view_mut((n, n), (n, n)).copy_from(&(-&operators.damping));
    Ok(generator)
}

/// A fully assembled, immutable plate model.
#[derive(Debug, Clone)]
pub struct PlateModel {
    basis: ModalBasis,
    region: DampingRegion,
    operators: ModalOperators,
    generator: DMatrix<f64>,
}

impl PlateModel {
    pub fn new(geometry: Geometry, region: DampingRegion, n_modes: usize) -> Result<Self> {
        let basis = laplacian_eigenpairs(geometry, n_modes)?;
        Self::from_basis(basis, region)
    }

    pub fn from_basis(basis: ModalBasis, region: DampingRegion) -> Result<Self> {
        let damping = assemble_damping(&basis, &region)?;
        let operators = ModalOperators {
            stiffness: DVector::from_column_slice(basis.eigenvalues()),
            damping,
        };
        let generator = assemble_generator(&operators)?;
        Ok(PlateModel {
            basis,
            region,
            operators,
            generator,
        })
    }

    pub fn basis(&self) -> &ModalBasis {
        &self.basis
    }

    pub fn region(&self) -> &DampingRegion {
        &self.region
    }

    pub fn geometry(&self) -> &Geometry {
        self.basis.geometry()
    }

    pub fn operators(&self) -> &ModalOperators {
        &self.operators
    }

    pub fn damping(&self) -> &DMatrix<f64> {
        &self.operators.damping
    }

    pub fn generator(&self) -> &DMatrix<f64> {
        &self.generator
    }

    pub fn n_modes(&self) -> usize {
        self.basis.len()
    }
}

/// Modal displacement/velocity pair: `u(x) = Σ u_m φ_m(x)`, `v = ∂t u`.
#[derive(Debug, Clone, PartialEq)]
pub struct State<T: Coefficient = f64> {
    pub u: DVector<T>,
    pub v: DVector<T>,
}

impl<T: Coefficient> State<T> {
    pub fn new(u: DVector<T>, v: DVector<T>) -> Result<Self> {
        if u.len() != v.len() {
            return config(format!("state halves differ in length: {} vs {}", u.len(), v.len()));
        }
        if u.iter().chain(v.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Numerical("state has non-finite entries".into()));
        }
        Ok(State { u, v })
    }

    pub fn zeros(n: usize) -> Self {
        State {
            u: DVector::zeros(n),
            v: DVector::zeros(n),
        }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    fn check_basis(&self, basis: &ModalBasis) -> Result<()> {
        if self.u.len() != basis.len() || self.v.len() != basis.len() {
            return config(format!(
                "state has {} modes but the basis has {}",
                self.u.len(),
                basis.len()
            ));
        }
        Ok(())
    }

    /// `z = (Λu, v)`, the coordinates in which the energy norm is Euclidean.
    pub fn to_energy_coords(&self, basis: &ModalBasis) -> Result<DVector<T>> {
        self.check_basis(basis)?;
        let n = basis.len();
        let lambda = basis.eigenvalues();
        Ok(DVector::from_fn(2 * n, |i, _| {
            if i < n {
                self.u[i] * T::from_real(lambda[i])
            } else {
                self.v[i - n]
            }
        }))
    }

    pub fn from_energy_coords(z: &DVector<T>, basis: &ModalBasis) -> Result<Self> {
        let n = basis.len();
        if z.len() != 2 * n {
            return config(format!("energy vector has length {}, expected {}", z.len(), 2 * n));
        }
        let lambda = basis.eigenvalues();
        let u = DVector::from_fn(n, |i, _| z[i] / T::from_real(lambda[i]));
        let v = z.rows(n, n).into_owned();
        Ok(State { u, v })
    }
}

/// `E = ½(∫|∂t u|² + ∫|Δu|²) = ½(Σ|v_m|² + Σ λ_m²|u_m|²)`.
pub fn energy<T: Coefficient>(state: &State<T>, basis: &ModalBasis) -> Result<f64> {
    state.check_basis(basis)?;
    let elastic: f64 = state
        .u
        .iter()
        .zip(basis.eigenvalues())
        .map(|(u, lambda)| lambda * lambda * u.modulus_squared())
        .sum();
    let kinetic: f64 = state.v.iter().map(|v| v.modulus_squared()).sum();
    Ok(0.5 * (elastic + kinetic))
}

/// Which analytic derivative of the modal sum to sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldOrder {
    Value,
    Gradient,
    Laplacian,
    GradLaplacian,
    BiLaplacian,
}

impl FieldOrder {
    pub fn components(self, dim: usize) -> usize {
        match self {
            FieldOrder::Gradient | FieldOrder::GradLaplacian => dim,
            _ => 1,
        }
    }
}

/// Samples `Σ c_m ∂^α φ_m` at `points` using exact derivatives of the sines.
///
/// Returns one row per point; vector-valued orders have `dim` columns.
pub fn evaluate_field<T: Coefficient>(
    coeffs: &DVector<T>,
    basis: &ModalBasis,
    points: &[Point],
    order: FieldOrder,
) -> Result<DMatrix<T>> {
    if coeffs.len() != basis.len() {
        return config(format!(
            "coefficient vector has {} entries, basis has {}",
            coeffs.len(),
            basis.len()
        ));
    }
    let geometry = basis.geometry();
    if let Some(p) = points.iter().find(|p| !geometry.contains(**p)) {
        return config(format!("evaluation point {p:?} lies outside the closed domain"));
    }
    let dim = geometry.dim();
    let cols = order.components(dim);
    let lambda = basis.eigenvalues();
    let mut out = DMatrix::zeros(points.len(), cols);
    for (row, p) in points.iter().enumerate() {
        let samples = basis.sample(*p);
        for (k, (s, c)) in samples.iter().zip(coeffs.iter()).enumerate() {
            let weight = match order {
                FieldOrder::Value | FieldOrder::Gradient => 1.0,
                FieldOrder::Laplacian | FieldOrder::GradLaplacian => -lambda[k],
                FieldOrder::BiLaplacian => lambda[k] * lambda[k],
            };
            let c = *c * T::from_real(weight);
            match order {
                FieldOrder::Gradient | FieldOrder::GradLaplacian => {
                    for (j, g) in s.grad.iter().take(dim).enumerate() {
                        out[(row, j)] += c * T::from_real(*g);
                    }
                }
                _ => out[(row, 0)] += c * T::from_real(s.value),
            }
        }
    }
    Ok(out)
}
