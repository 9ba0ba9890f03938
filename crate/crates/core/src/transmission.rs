//! Resolvent solves `(A − iμ)(u, v) = (f, g)` and their reading as a
//! transmission problem across the interface `I = ∂ω ∩ Ω`.
//!
//! Eliminating `v = f + iμu` leaves the modal Galerkin equation
//! `−Λ²u + μ²u − iμDu = g + iμf + Df`. On each side of `I` the substitution
//! `w₁ = Δu + (|μ| − idμ)u`, `w₂ = Δu + |μ|u` turns the plate equation into
//! `−Δw_k + |μ|w_k = Φ_k` with
//!
//! * `Φ₁ = g + iμf − dΔf − i·d·|μ|·μ·u` in `ω`,
//! * `Φ₂ = g + iμf` in `Ω∖ω̄`.
//!
//! The `−id|μ|.μu₁` source term is read as the product `−i·d·|μ|·μ·u₁`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::linalg::{complexify, solve_refined, C64};
use crate::model::{evaluate_field, FieldOrder, ModalBasis, PlateModel, Point};

/// A solve is rejected when refinement leaves a larger relative residual.
pub const MAX_SOLVE_RESIDUAL: f64 = 1e-6;

/// Interface samples in 2D.
pub const INTERFACE_SAMPLES_2D: usize = 64;

pub const DEFAULT_GRID_POINTS: usize = 64;

const REFINEMENT_SWEEPS: usize = 3;

const I: C64 = C64::new(0.0, 1.0);

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Evaluation points of a case, split by region.
///
/// Region grids are cell-centred, so every point is at least half a step
/// from the boundary of its region.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CaseGrid {
    pub inner: Vec<Point>,
    pub outer: Vec<Point>,
    pub interface: Vec<Point>,
}

fn cell_centres(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let h = (hi - lo) / n as f64;
    (0..n).map(|i| lo + (i as f64 + 0.5) * h).collect()
}

impl CaseGrid {
    /// `per_axis` cells along each direction of each nonempty region.
    pub fn new(model: &PlateModel, per_axis: usize) -> Result<Self> {
        if per_axis == 0 {
            return config("grid density must be at least 1");
        }
        let geometry = model.geometry();
        let region = model.region();
        let lx = geometry.lx();
        let ell = region.extent().min(lx);
        let ys = match geometry.ly() {
            None => vec![0.0],
            Some(ly) => cell_centres(0.0, ly, per_axis),
        };
        let tensor = |lo: f64, hi: f64| -> Vec<Point> {
            if hi <= lo {
                return Vec::new();
            }
            cell_centres(lo, hi, per_axis)
                .into_iter()
                .flat_map(|x| ys.iter().map(move |y| [x, *y]))
                .collect()
        };
        let damped = !region.is_empty();
        let inner = if damped { tensor(0.0, ell) } else { Vec::new() };
        let outer = if damped { tensor(ell, lx) } else { tensor(0.0, lx) };
        let interface = if region.is_localized(geometry) && damped {
            match geometry.ly() {
                None => vec![[ell, 0.0]],
                Some(ly) => cell_centres(0.0, ly, INTERFACE_SAMPLES_2D)
                    .into_iter()
                    .map(|y| [ell, y])
                    .collect(),
            }
        } else {
            Vec::new()
        };
        Ok(CaseGrid {
            inner,
            outer,
            interface,
        })
    }
}

/// One resolvent solve: data `(f, g)`, spectral parameter `μ`, solution `(u, v)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolventCase {
    pub mu: f64,
    pub f: DVector<C64>,
    pub g: DVector<C64>,
    pub u: DVector<C64>,
    pub v: DVector<C64>,
    pub grid: CaseGrid,
    /// `‖(Â − iμ)z − b‖/‖b‖` after refinement, in energy coordinates.
    pub solve_residual: f64,
}

fn check_len(name: &str, x: &DVector<C64>, n: usize) -> Result<()> {
    if x.len() != n {
        return config(format!("{name} has {} entries, the basis has {n}", x.len()));
    }
    if x.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return config(format!("{name} has non-finite entries"));
    }
    Ok(())
}

/// Solves `(Â − iμ)z = (Λf, g)` in energy coordinates and maps back.
pub fn solve_resolvent(model: &PlateModel, f: &DVector<C64>, g: &DVector<C64>, mu: f64) -> Result<ResolventCase> {
    let n = model.n_modes();
    if !mu.is_finite() {
        return config(format!("mu must be finite, got {mu}"));
    }
    check_len("f", f, n)?;
    check_len("g", g, n)?;
    let lambda = model.basis().eigenvalues();
    let mut shifted = complexify(model.generator());
    for i in 0..2 * n {
        shifted[(i, i)] -= I * mu;
    }
    let b = DVector::from_fn(2 * n, |i, _| if i < n { f[i] * lambda[i] } else { g[i - n] });
    let (z, rel) = solve_refined(&shifted, &b, REFINEMENT_SWEEPS)?;
    if !(rel <= MAX_SOLVE_RESIDUAL) {
        return Err(Error::Numerical(format!(
            "resolvent solve at mu = {mu} left relative residual {rel:.3e}; iμ is too close to the spectrum"
        )));
    }
    let u = DVector::from_fn(n, |i, _| z[i] / lambda[i]);
    let v = z.rows(n, n).into_owned();
    Ok(ResolventCase {
        mu,
        f: f.clone(),
        g: g.clone(),
        u,
        v,
        grid: CaseGrid::new(model, DEFAULT_GRID_POINTS)?,
        solve_residual: rel,
    })
}

impl ResolventCase {
    pub fn with_grid(mut self, grid: CaseGrid) -> Self {
        self.grid = grid;
        self
    }

    fn data_norm(&self, basis: &ModalBasis) -> f64 {
        let lambda = basis.eigenvalues();
        let f2: f64 = self.f.iter().zip(lambda).map(|(c, l)| c.norm_sqr() * l * l).sum();
        (f2 + self.g.norm_squared()).sqrt()
    }

    /// `‖v − f − iμu‖/‖(f, g)‖`, the data norm being the energy norm.
    pub fn first_line_residual(&self, basis: &ModalBasis) -> f64 {
        let r = &self.v - &self.f - &self.u * (I * self.mu);
        let scale = self.data_norm(basis);
        if scale == 0.0 {
            r.norm()
        } else {
            r.norm() / scale
        }
    }

    /// `‖(Â − iμ)z − (Λf, g)‖/‖(Λf, g)‖` recomputed from the stored solution.
    pub fn round_trip_residual(&self, model: &PlateModel) -> f64 {
        let n = model.n_modes();
        let lambda = model.basis().eigenvalues();
        let z = DVector::from_fn(2 * n, |i, _| if i < n { self.u[i] * lambda[i] } else { self.v[i - n] });
        let mut az = complexify(model.generator()) * &z;
        az -= &z * (I * self.mu);
        let b = DVector::from_fn(2 * n, |i, _| if i < n { self.f[i] * lambda[i] } else { self.g[i - n] });
        let scale = b.norm();
        let r = (az - &b).norm();
        if scale == 0.0 {
            r
        } else {
            r / scale
        }
    }
}

/// Standard complex normals for the energy coordinates `(Λf, g)`.
pub fn random_case_data(basis: &ModalBasis, seed: u64) -> (DVector<C64>, DVector<C64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = basis.len();
    let mut draw = || {
        let a: f64 = StandardNormal.sample(&mut rng);
        let b: f64 = StandardNormal.sample(&mut rng);
        C64::new(a, b)
    };
    let lambda = basis.eigenvalues();
    let f = DVector::from_fn(n, |i, _| draw() / lambda[i]);
    let g = DVector::from_fn(n, |_, _| draw());
    (f, g)
}

/// Fixed smooth data on the first eight modes:
/// `f_j = (1 + 0.5i)/j⁴`, `g_j = (0.3 − i)/j²`.
pub fn smooth_case_data(n: usize) -> (DVector<C64>, DVector<C64>) {
    let f = DVector::from_fn(n, |i, _| {
        if i < 8 {
            C64::new(1.0, 0.5) / ((i + 1) as f64).powi(4)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let g = DVector::from_fn(n, |i, _| {
        if i < 8 {
            C64::new(0.3, -1.0) / ((i + 1) as f64).powi(2)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    (f, g)
}

fn inner(a: &DVector<C64>, b: &DVector<C64>) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y.conj()).sum()
}

/// The imaginary part of the Galerkin equation tested against `u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImaginaryPartReport {
    /// `μ·uᴴDu`.
    pub lhs: f64,
    /// `−Im⟨g + iμf, u⟩ − Im(ūᵀDf)`.
    pub rhs: f64,
    /// `|lhs − rhs|` relative to the sum of the magnitudes of its terms.
    pub residual: f64,
    /// `|μ|∫a|∇u|² = |μ|·uᴴDu`.
    pub inequality_lhs: f64,
    /// `‖g + iμf‖‖u‖ + d‖∇f‖‖∇u‖`, the Cauchy–Schwarz bound.
    pub inequality_rhs: f64,
    /// `(μ²‖Δf‖² + ‖g‖²)^{1/2}(‖u‖ + ‖∇u‖)`, the coarser closing bound.
    pub closing_rhs: f64,
    /// `inequality_lhs / inequality_rhs` (zero when both vanish).
    pub ratio: f64,
}

impl ImaginaryPartReport {
    /// Whether `lhs ≤ rhs·(1 + slack)`.
    pub fn inequality_holds(&self, slack: f64) -> bool {
        self.inequality_lhs <= self.inequality_rhs * (1.0 + slack) + f64::MIN_POSITIVE
    }
}

pub fn imaginary_part_identity(case: &ResolventCase, model: &PlateModel) -> Result<ImaginaryPartReport> {
    let n = model.n_modes();
    check_len("u", &case.u, n)?;
    let mu = case.mu;
    let d = complexify(model.damping());
    let lambda = model.basis().eigenvalues();
    let du = &d * &case.u;
    let df = &d * &case.f;
    let udu = inner(&du, &case.u).re;
    let source = &case.g + &case.f * (I * mu);
    let t1 = inner(&source, &case.u);
    // ūᵀDf = ⟨Df, u⟩
    let t2 = inner(&df, &case.u);
    let lhs = mu * udu;
    let rhs = -t1.im - t2.im;
    let scale = lhs.abs() + t1.norm() + t2.norm();
    let residual = if scale == 0.0 { 0.0 } else { (lhs - rhs).abs() / scale };

    let weighted = |x: &DVector<C64>, p: i32| -> f64 {
        x.iter()
            .zip(lambda)
            .map(|(c, l)| c.norm_sqr() * l.powi(p))
            .sum::<f64>()
            .sqrt()
    };
    let coefficient = model.region().coefficient();
    let u_l2 = case.u.norm();
    let u_h1 = weighted(&case.u, 1);
    let inequality_lhs = mu.abs() * udu;
    let inequality_rhs = source.norm() * u_l2 + coefficient * weighted(&case.f, 1) * u_h1;
    let closing_rhs = (mu * mu * weighted(&case.f, 2).powi(2) + case.g.norm_squared()).sqrt() * (u_l2 + u_h1);
    let ratio = if inequality_rhs == 0.0 {
        0.0
    } else {
        inequality_lhs / inequality_rhs
    };
    Ok(ImaginaryPartReport {
        lhs,
        rhs,
        residual,
        inequality_lhs,
        inequality_rhs,
        closing_rhs,
        ratio,
    })
}

/// Sampled `w`, `Φ` and the pointwise residual `−Δw + |μ|w − Φ` on one region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionFields {
    pub points: Vec<Point>,
    pub w: Vec<C64>,
    pub phi: Vec<C64>,
    pub residual: Vec<C64>,
}

impl RegionFields {
    pub fn max_residual(&self) -> f64 {
        self.residual.iter().map(|r| r.norm()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WSystem {
    /// `ω` side (`k = 1`).
    pub inner: RegionFields,
    /// `Ω∖ω̄` side (`k = 2`).
    pub outer: RegionFields,
    /// `‖P r‖/‖P Φ‖` with `P` the modal projection by quadrature; only
    /// defined when the damping is constant on the whole domain.
    pub projected_residual: Option<f64>,
}

impl WSystem {
    pub fn max_residual(&self) -> f64 {
        self.inner.max_residual().max(self.outer.max_residual())
    }
}

/// Pointwise fields needed for the `w`-system at a set of points.
struct Sampled {
    u: Vec<C64>,
    lap_u: Vec<C64>,
    bilap_u: Vec<C64>,
    f: Vec<C64>,
    lap_f: Vec<C64>,
    g: Vec<C64>,
}

fn column(m: DMatrix<C64>) -> Vec<C64> {
    m.column(0).iter().copied().collect()
}

fn sample(case: &ResolventCase, basis: &ModalBasis, points: &[Point]) -> Result<Sampled> {
    let eval = |c: &DVector<C64>, order| evaluate_field(c, basis, points, order).map(column);
    Ok(Sampled {
        u: eval(&case.u, FieldOrder::Value)?,
        lap_u: eval(&case.u, FieldOrder::Laplacian)?,
        bilap_u: eval(&case.u, FieldOrder::BiLaplacian)?,
        f: eval(&case.f, FieldOrder::Value)?,
        lap_f: eval(&case.f, FieldOrder::Laplacian)?,
        g: eval(&case.g, FieldOrder::Value)?,
    })
}

/// `damped` selects the `ω` formulas with coefficient `d`.
fn region_fields(s: &Sampled, points: &[Point], mu: f64, d: f64, damped: bool) -> RegionFields {
    let m = mu.abs();
    let len = points.len();
    let mut out = RegionFields {
        points: points.to_vec(),
        w: Vec::with_capacity(len),
        phi: Vec::with_capacity(len),
        residual: Vec::with_capacity(len),
    };
    for k in 0..len {
        let (u, lu, llu) = (s.u[k], s.lap_u[k], s.bilap_u[k]);
        let (w, lap_w, phi) = if damped {
            let shift = re(m) - I * (d * mu);
            let phi = s.g[k] + I * mu * s.f[k] - s.lap_f[k] * d - I * (d * m * mu) * u;
            (lu + shift * u, llu + shift * lu, phi)
        } else {
            (lu + u * m, llu + lu * m, s.g[k] + I * mu * s.f[k])
        };
        out.w.push(w);
        out.phi.push(phi);
        out.residual.push(-lap_w + w * m - phi);
    }
    out
}

/// Midpoint nodes integrating products of retained modes exactly.
fn projection_nodes(basis: &ModalBasis) -> (Vec<Point>, f64) {
    let geometry = basis.geometry();
    let max_m = basis.modes().iter().map(|k| k.m).max().unwrap_or(1);
    let nx = 4 * max_m.max(1);
    let lx = geometry.lx();
    let xs = cell_centres(0.0, lx, nx);
    match geometry.ly() {
        None => (xs.into_iter().map(|x| [x, 0.0]).collect(), lx / nx as f64),
        Some(ly) => {
            let max_n = basis.modes().iter().map(|k| k.n).max().unwrap_or(1);
            let ny = 4 * max_n.max(1);
            let ys = cell_centres(0.0, ly, ny);
            let pts = xs.iter().flat_map(|x| ys.iter().map(move |y| [*x, *y])).collect();
            (pts, lx * ly / (nx * ny) as f64)
        }
    }
}

fn project(values: &[C64], modes: &DMatrix<f64>, weight: f64) -> DVector<C64> {
    let n = modes.ncols();
    DVector::from_fn(n, |m, _| {
        values
            .iter()
            .zip(modes.column(m).iter())
            .map(|(v, p)| v * (p * weight))
            .sum()
    })
}

/// Builds `w₁, w₂`, `Φ₁, Φ₂` on the case grid and the pointwise residuals.
pub fn w_substitution(case: &ResolventCase, model: &PlateModel) -> Result<WSystem> {
    let basis = model.basis();
    let d = model.region().coefficient();
    let damped = !model.region().is_empty();
    let inner_s = sample(case, basis, &case.grid.inner)?;
    let outer_s = sample(case, basis, &case.grid.outer)?;
    let inner = region_fields(&inner_s, &case.grid.inner, case.mu, d, true);
    let outer = region_fields(&outer_s, &case.grid.outer, case.mu, d, false);

    let geometry = model.geometry();
    let projected_residual = if model.region().is_localized(geometry) && damped {
        None
    } else {
        let full = damped && model.region().covers(geometry);
        let (nodes, weight) = projection_nodes(basis);
        let s = sample(case, basis, &nodes)?;
        let fields = region_fields(&s, &nodes, case.mu, d, full);
        let n = basis.len();
        let mut modes = DMatrix::zeros(nodes.len(), n);
        for (row, p) in nodes.iter().enumerate() {
            for (col, m) in basis.sample(*p).iter().enumerate() {
                modes[(row, col)] = m.value;
            }
        }
        let pr = project(&fields.residual, &modes, weight).norm();
        let pphi = project(&fields.phi, &modes, weight).norm();
        Some(if pphi == 0.0 { pr } else { pr / pphi })
    };
    Ok(WSystem {
        inner,
        outer,
        projected_residual,
    })
}

/// Transmission conditions sampled on `I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterfaceReport {
    pub points: Vec<Point>,
    /// Jumps of `u`, `∂νu`, `Δu` across `I`; a single global modal sum has
    /// identical one-sided traces, so these are exact zeros.
    pub jump_value: f64,
    pub jump_normal: f64,
    pub jump_laplacian: f64,
    /// `φ₁ = −idμ u` on `I`.
    pub phi1: Vec<C64>,
    /// `φ₂ = d ∂νf` on `I`.
    pub phi2: Vec<C64>,
    /// `r = idμ ∂νu + d ∂νf` per sample; the fourth condition reduces to `r = 0`.
    pub flux: Vec<C64>,
    /// Root mean square of `flux` over the samples.
    pub flux_rms: f64,
}

/// One-sided trace of a modal sum: both sides evaluate the same expansion.
fn trace(c: &DVector<C64>, basis: &ModalBasis, points: &[Point], order: FieldOrder) -> Result<DMatrix<C64>> {
    evaluate_field(c, basis, points, order)
}

fn max_jump(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `ν = −e_x` on `I`, the outer normal of `Ω∖ω̄`.
fn normal_derivative(grad: &DMatrix<C64>) -> Vec<C64> {
    grad.column(0).iter().map(|z| -z).collect()
}

pub fn interface_residuals(case: &ResolventCase, model: &PlateModel) -> Result<InterfaceReport> {
    let basis = model.basis();
    let pts = &case.grid.interface;
    let d = model.region().coefficient();
    let mu = case.mu;
    let jump = |order| -> Result<f64> {
        let from_inner = trace(&case.u, basis, pts, order)?;
        let from_outer = trace(&case.u, basis, pts, order)?;
        Ok(max_jump(&from_inner, &from_outer))
    };
    let jump_value = jump(FieldOrder::Value)?;
    let jump_normal = jump(FieldOrder::Gradient)?;
    let jump_laplacian = jump(FieldOrder::Laplacian)?;
    let u = column(evaluate_field(&case.u, basis, pts, FieldOrder::Value)?);
    let dn_u = normal_derivative(&evaluate_field(&case.u, basis, pts, FieldOrder::Gradient)?);
    let dn_f = normal_derivative(&evaluate_field(&case.f, basis, pts, FieldOrder::Gradient)?);
    let phi1: Vec<C64> = u.iter().map(|x| -I * (d * mu) * x).collect();
    let phi2: Vec<C64> = dn_f.iter().map(|x| x * d).collect();
    let flux: Vec<C64> = dn_u.iter().zip(&phi2).map(|(a, b)| I * (d * mu) * a + b).collect();
    let flux_rms = if flux.is_empty() {
        0.0
    } else {
        (flux.iter().map(|z| z.norm_sqr()).sum::<f64>() / flux.len() as f64).sqrt()
    };
    Ok(InterfaceReport {
        points: pts.clone(),
        jump_value,
        jump_normal,
        jump_laplacian,
        phi1,
        phi2,
        flux,
        flux_rms,
    })
}
