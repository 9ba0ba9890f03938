//! Spectrum of the quadratic pencil `λ²I + λD + Λ²` (through its
//! linearization `Â`) and resolvent norms `‖(Â − iμ)⁻¹‖` on the imaginary axis.

use nalgebra::{DMatrix, DVector, Dyn, LU};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::fit::{linear_fit, LinearFit};
use crate::linalg::{self, C64};
use crate::model::PlateModel;

/// Largest pencil size (`N`) handled by the dense solvers by default.
pub const DEFAULT_DENSE_CAP: usize = 512;

/// `|Re λ| < WEAK_BRANCH_RATIO·|Im λ|` tags an eigenvalue as weakly damped.
pub const WEAK_BRANCH_RATIO: f64 = 0.1;

/// Relative tolerance for conjugate pairing.
pub const PAIRING_TOLERANCE: f64 = 1e-8;

/// Relative slack of the resolvent lower bound `‖R(iμ)‖ ≥ 1/dist(iμ, σ)`.
pub const LOWER_BOUND_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    WeaklyDamped,
    StronglyDamped,
}

impl Branch {
    pub fn classify(z: C64) -> Self {
        if z.re.abs() < WEAK_BRANCH_RATIO * z.im.abs() {
            Branch::WeaklyDamped
        } else {
            Branch::StronglyDamped
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Branch::WeaklyDamped => "weak",
            Branch::StronglyDamped => "strong",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// Sorted by imaginary part, then real part.
    pub eigenvalues: Vec<C64>,
    pub branches: Vec<Branch>,
    pub spectral_abscissa: f64,
    /// Worst relative distance from `conj(λ)` to the nearest eigenvalue.
    pub pairing_error: f64,
    pub conjugate_paired: bool,
}

impl SpectrumReport {
    pub fn from_eigenvalues(mut eigenvalues: Vec<C64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return config("spectrum report needs at least one eigenvalue");
        }
        if eigenvalues.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical("eigensolver returned non-finite eigenvalues".into()));
        }
        eigenvalues.sort_by(|a, b| a.im.total_cmp(&b.im).then(a.re.total_cmp(&b.re)));
        let branches = eigenvalues.iter().map(|z| Branch::classify(*z)).collect();
        let spectral_abscissa = eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        let pairing_error = eigenvalues
            .iter()
            .map(|z| {
                let target = z.conj();
                let nearest = eigenvalues
                    .iter()
                    .map(|w| (w - target).norm())
                    .fold(f64::INFINITY, f64::min);
                nearest / z.norm().max(1.0)
            })
            .fold(0.0, f64::max);
        Ok(SpectrumReport {
            eigenvalues,
            branches,
            spectral_abscissa,
            pairing_error,
            conjugate_paired: pairing_error <= PAIRING_TOLERANCE,
        })
    }

    /// Eigenvalue with the largest real part (ties: smallest `|Im|`).
    pub fn least_damped(&self) -> C64 {
        *self
            .eigenvalues
            .iter()
            .max_by(|a, b| a.re.total_cmp(&b.re).then(b.im.abs().total_cmp(&a.im.abs())))
            .expect("report is never empty")
    }

    /// `dist(iμ, σ(Â))`.
    pub fn axis_distance(&self, mu: f64) -> f64 {
        let point = C64::new(0.0, mu);
        self.eigenvalues
            .iter()
            .map(|z| (z - point).norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest `|Re λ|` over the spectrum.
    pub fn axis_gap(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|z| z.re.abs())
            .fold(f64::INFINITY, f64::min)
    }
}

/// All `2N` eigenvalues of `Â` from a dense nonsymmetric solve.
pub fn pencil_spectrum(model: &PlateModel, dense_cap: usize) -> Result<SpectrumReport> {
    let n = model.n_modes();
    if n > dense_cap {
        return config(format!("N = {n} exceeds the dense eigensolver cap {dense_cap}"));
    }
    let values = linalg::real_eigenvalues(model.generator()).map_err(|e| match e {
        Error::Numerical(msg) => Error::Numerical(format!(
            "{msg} (N = {n}, d = {}, extent = {})",
            model.region().coefficient(),
            model.region().extent()
        )),
        other => other,
    })?;
    SpectrumReport::from_eigenvalues(values.iter().copied().collect())
}

pub fn spectral_abscissa(report: &SpectrumReport) -> Result<f64> {
    if report.eigenvalues.is_empty() {
        return config("empty spectrum");
    }
    Ok(report.spectral_abscissa)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SigmaMethod {
    /// Full singular value decomposition of `Â − iμI`.
    Dense,
    /// Inverse iteration on `(Â − iμ)ᴴ(Â − iμ)`, each solve reduced to the
    /// `N×N` pencil `P(μ) = μ² − Λ² − iμD`.
    InverseIteration,
}

/// Largest `N` for which [`ResolventSolver::for_model`] uses the dense SVD.
pub const DEFAULT_SVD_CAP: usize = 64;

const SIGMA_TOLERANCE: f64 = 1e-12;
const SIGMA_MAX_ITER: usize = 5000;

/// Shifted generators `Â − iμI` sharing one complexified copy of `Â`.
#[derive(Debug, Clone)]
pub struct ResolventSolver {
    generator: DMatrix<C64>,
    stiffness: DVector<f64>,
    damping: DMatrix<C64>,
    method: SigmaMethod,
}

/// LU of `P(μ)`, giving solves with `Â − iμ` and its adjoint.
struct ShiftedPencil<'a> {
    lu: LU<C64, Dyn, Dyn>,
    mu: f64,
    stiffness: &'a DVector<f64>,
    damping: &'a DMatrix<C64>,
}

impl ShiftedPencil<'_> {
    fn rhs(&self, a: &DVector<C64>, b: &DVector<C64>) -> DVector<C64> {
        let i_mu = C64::new(0.0, self.mu);
        DVector::from_fn(a.len(), |k, _| a[k] * self.stiffness[k] - b[k] * i_mu)
    }

    fn lu_solve(&self, r: &DVector<C64>) -> Result<DVector<C64>> {
        self.lu
            .solve(r)
            .ok_or_else(|| Error::Numerical(format!("iμ = {}i is on the spectrum", self.mu)))
    }

    /// `(Â − iμ)[x; y] = [a; b]`: `−P y = Λa − iμb`, `x = −Λ⁻¹(b + (D + iμ)y)`.
    fn solve(&self, z: &DVector<C64>) -> Result<DVector<C64>> {
        let n = self.stiffness.len();
        let (a, b) = (z.rows(0, n).into_owned(), z.rows(n, n).into_owned());
        let y = -self.lu_solve(&self.rhs(&a, &b))?;
        let t = b + self.damping * &y + &y * C64::new(0.0, self.mu);
        Ok(self.stack(DVector::from_fn(n, |k, _| -t[k] / self.stiffness[k]), y))
    }

    /// `(Â − iμ)ᴴ[x; y] = [a; b]`: `conj(P) y = Λa − iμb`, `x = Λ⁻¹(b + (D − iμ)y)`.
    fn solve_adjoint(&self, z: &DVector<C64>) -> Result<DVector<C64>> {
        let n = self.stiffness.len();
        let (a, b) = (z.rows(0, n).into_owned(), z.rows(n, n).into_owned());
        let y = self.lu_solve(&self.rhs(&a, &b).conjugate())?.conjugate();
        let t = b + self.damping * &y - &y * C64::new(0.0, self.mu);
        Ok(self.stack(DVector::from_fn(n, |k, _| t[k] / self.stiffness[k]), y))
    }

    fn stack(&self, x: DVector<C64>, y: DVector<C64>) -> DVector<C64> {
        let n = x.len();
        DVector::from_fn(2 * n, |k, _| if k < n { x[k] } else { y[k - n] })
    }
}

impl ResolventSolver {
    pub fn new(model: &PlateModel, method: SigmaMethod) -> Self {
        let ops = model.operators();
        ResolventSolver {
            generator: linalg::complexify(model.generator()),
            stiffness: ops.stiffness.clone(),
            damping: linalg::complexify(&ops.damping),
            method,
        }
    }

    /// Dense up to [`DEFAULT_SVD_CAP`] modes, inverse iteration above.
    pub fn for_model(model: &PlateModel) -> Self {
        Self::with_cap(model, DEFAULT_SVD_CAP)
    }

    /// Dense for `N ≤ dense_cap`, inverse iteration above it.
    pub fn with_cap(model: &PlateModel, dense_cap: usize) -> Self {
        let method = if model.n_modes() > dense_cap {
            SigmaMethod::InverseIteration
        } else {
            SigmaMethod::Dense
        };
        Self::new(model, method)
    }

    pub fn method(&self) -> SigmaMethod {
        self.method
    }

    pub fn shifted(&self, mu: f64) -> DMatrix<C64> {
        let mut m = self.generator.clone();
        for i in 0..m.nrows() {
            m[(i, i)] -= C64::new(0.0, mu);
        }
        m
    }

    fn pencil(&self, mu: f64) -> ShiftedPencil<'_> {
        let i_mu = C64::new(0.0, mu);
        let mut p = -&self.damping * i_mu;
        for k in 0..self.stiffness.len() {
            p[(k, k)] += C64::new(mu * mu - self.stiffness[k] * self.stiffness[k], 0.0);
        }
        ShiftedPencil {
            lu: p.lu(),
            mu,
            stiffness: &self.stiffness,
            damping: &self.damping,
        }
    }

    fn sigma_iterative(&self, mu: f64) -> Result<f64> {
        let pencil = self.pencil(mu);
        let n = 2 * self.stiffness.len();
        let mut x = DVector::from_fn(n, |i, _| C64::new(1.0 + (i % 7) as f64 * 0.1, (i % 3) as f64 * 0.05));
        x /= C64::new(x.norm(), 0.0);
        let mut estimate = f64::NAN;
        for _ in 0..SIGMA_MAX_ITER {
            let y = pencil.solve(&pencil.solve_adjoint(&x)?)?;
            let growth = y.norm();
            if !growth.is_finite() || growth == 0.0 {
                return Err(Error::Numerical(format!("inverse iteration broke down at μ = {mu}")));
            }
            let next = 1.0 / growth.sqrt();
            x = y / C64::new(growth, 0.0);
            if (next - estimate).abs() <= SIGMA_TOLERANCE * next {
                return Ok(next);
            }
            estimate = next;
        }
        Err(Error::Numerical(format!(
            "inverse iteration at μ = {mu} did not reach {SIGMA_TOLERANCE:e} in {SIGMA_MAX_ITER} steps"
        )))
    }

    /// `σ_min(Â − iμI)`.
    pub fn smallest_singular_value(&self, mu: f64) -> Result<f64> {
        match self.method {
            SigmaMethod::Dense => {
                let s = linalg::singular_values(&self.shifted(mu))?;
                let (hi, lo) = (s[0], s[s.len() - 1]);
                if lo <= 1e-13 * hi {
                    return Err(Error::Numerical(format!(
                        "iμ = {mu}i is numerically on the spectrum (σ_min = {lo:e}, σ_max = {hi:e})"
                    )));
                }
                Ok(lo)
            }
            SigmaMethod::InverseIteration => self.sigma_iterative(mu),
        }
    }

    /// `‖(Â − iμ)⁻¹‖₂`, the energy-norm resolvent norm.
    pub fn norm(&self, mu: f64) -> Result<f64> {
        if !mu.is_finite() {
            return config(format!("μ must be finite, got {mu}"));
        }
        Ok(1.0 / self.smallest_singular_value(mu)?)
    }
}

pub fn resolvent_norm(model: &PlateModel, mu: f64) -> Result<f64> {
    ResolventSolver::for_model(model).norm(mu)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolventSweep {
    pub mu: Vec<f64>,
    pub norms: Vec<f64>,
    /// `1/dist(iμ, σ(Â))` at each grid point.
    pub lower_bounds: Vec<f64>,
    /// `ln‖R(iμ)‖ ≈ a + b·μ`; `fit.slope` is the exponential coefficient `b`.
    pub fit: LinearFit,
}

/// Uniform grid `mu_min..=mu_max` with `n_points` points.
pub fn uniform_grid(mu_min: f64, mu_max: f64, n_points: usize) -> Vec<f64> {
    let step = (mu_max - mu_min) / (n_points - 1) as f64;
    (0..n_points)
        .map(|i| {
            if i + 1 == n_points {
                mu_max
            } else {
                mu_min + step * i as f64
            }
        })
        .collect()
}

pub fn resolvent_sweep(model: &PlateModel, mu_min: f64, mu_max: f64, n_points: usize) -> Result<ResolventSweep> {
    if !(mu_min >= 0.0 && mu_max > mu_min && mu_max.is_finite()) {
        return config(format!(
            "sweep range must satisfy 0 <= mu_min < mu_max, got [{mu_min}, {mu_max}]"
        ));
    }
    if n_points < 2 {
        return config("sweep needs at least two points");
    }
    let spectrum = pencil_spectrum(model, model.n_modes().max(DEFAULT_DENSE_CAP))?;
    let solver = ResolventSolver::for_model(model);
    sweep_with_spectrum(&solver, &spectrum, &uniform_grid(mu_min, mu_max, n_points))
}

/// Sweep over an explicit grid; points are independent and evaluated in parallel.
pub fn sweep_with_spectrum(
    solver: &ResolventSolver,
    spectrum: &SpectrumReport,
    grid: &[f64],
) -> Result<ResolventSweep> {
    let mut mu = grid.to_vec();
    mu.sort_by(f64::total_cmp);
    let norms = mu.par_iter().map(|&m| solver.norm(m)).collect::<Result<Vec<_>>>()?;
    let lower_bounds = mu.iter().map(|&m| 1.0 / spectrum.axis_distance(m)).collect();
    let logs: Vec<f64> = norms.iter().map(|r| r.ln()).collect();
    let fit = linear_fit(&mu, &logs).ok_or_else(|| Error::Config("degenerate sweep grid".into()))?;
    Ok(ResolventSweep {
        mu,
        norms,
        lower_bounds,
        fit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisDiagnostics {
    /// `norm ≥ (1 − slack)/dist` at every grid point.
    pub lower_bound_holds: bool,
    /// `min norm·dist` over the grid.
    pub min_ratio: f64,
    /// `max |norm·dist − 1|`, zero for normal generators.
    pub normality_gap: f64,
    /// Slope of `ln|Re λ|` against `|Im λ|` on the weakly damped branch (`Im λ > 0`).
    pub weak_branch_trend: Option<f64>,
    pub weak_branch_size: usize,
    /// Grid point of the largest resolvent norm.
    pub peak_mu: f64,
    /// `|Im|` of the least-damped eigenvalue.
    pub least_damped_frequency: f64,
}

/// Slope of `ln|Re λ|` against `Im λ` over weakly damped eigenvalues with
/// `Im λ > 0`, and the number of such eigenvalues.
pub fn weak_branch_trend(report: &SpectrumReport) -> (Option<f64>, usize) {
    let (xs, ys): (Vec<f64>, Vec<f64>) = report
        .eigenvalues
        .iter()
        .zip(&report.branches)
        .filter(|(z, b)| **b == Branch::WeaklyDamped && z.im > 0.0 && z.re != 0.0)
        .map(|(z, _)| (z.im, z.re.abs().ln()))
        .unzip();
    (linear_fit(&xs, &ys).map(|f| f.slope), xs.len())
}

pub fn axis_distance_check(report: &SpectrumReport, sweep: &ResolventSweep) -> AxisDiagnostics {
    let ratios: Vec<f64> = sweep
        .norms
        .iter()
        .zip(&sweep.lower_bounds)
        .map(|(n, lb)| n / lb)
        .collect();
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let normality_gap = ratios.iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max);
    let (weak_branch_trend, weak_branch_size) = weak_branch_trend(report);
    let peak = sweep
        .norms
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| sweep.mu[i])
        .unwrap_or(f64::NAN);
    AxisDiagnostics {
        lower_bound_holds: min_ratio >= 1.0 - LOWER_BOUND_SLACK,
        min_ratio,
        normality_gap,
        weak_branch_trend,
        weak_branch_size,
        peak_mu: peak,
        least_damped_frequency: report.least_damped().im.abs(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DampingRegion, Geometry};
    use std::f64::consts::PI;

    fn model(extent: f64, d: f64, n: usize) -> PlateModel {
        PlateModel::new(
            Geometry::interval(1.0).unwrap(),
            DampingRegion::new(extent, d).unwrap(),
            n,
        )
        .unwrap()
    }

    #[test]
    fn full_damping_matches_per_mode_roots() {
        let m = model(1.0, 1.0, 64);
        let report = pencil_spectrum(&m, DEFAULT_DENSE_CAP).unwrap();
        assert_eq!(report.eigenvalues.len(), 128);
        let s3 = 3f64.sqrt();
        for lambda in m.basis().eigenvalues() {
            for sign in [1.0, -1.0] {
                let root = C64::new(-lambda / 2.0, sign * lambda * s3 / 2.0);
                let nearest = report
                    .eigenvalues
                    .iter()
                    .map(|z| (z - root).norm())
                    .fold(f64::INFINITY, f64::min);
                assert!(nearest < 1e-8 * root.norm(), "root {root} off by {nearest}");
            }
        }
        assert!((report.spectral_abscissa + PI * PI / 2.0).abs() < 1e-8 * PI * PI);
        assert!(report.conjugate_paired);
    }

    #[test]
    fn undamped_spectrum_on_axis() {
        let m = model(0.0, 0.0, 16);
        let report = pencil_spectrum(&m, DEFAULT_DENSE_CAP).unwrap();
        assert!(report.spectral_abscissa.abs() < 1e-10);
        for lambda in m.basis().eigenvalues() {
            let nearest = report.axis_distance(*lambda);
            assert!(nearest < 1e-10 * lambda);
        }
    }

    #[test]
    fn localized_damping_is_stable() {
        let m = model(0.3, 1.0, 64);
        let report = pencil_spectrum(&m, DEFAULT_DENSE_CAP).unwrap();
        assert!(report.spectral_abscissa < 0.0);
        assert!(report.conjugate_paired);
    }

    #[test]
    fn cap_is_enforced() {
        let m = model(0.3, 1.0, 8);
        assert!(matches!(pencil_spectrum(&m, 4), Err(Error::Config(_))));
    }

    #[test]
    fn abscissa_of_explicit_list() {
        let r = SpectrumReport::from_eigenvalues(vec![C64::new(-1.0, 2.0), C64::new(-1.0, -2.0)]).unwrap();
        assert_eq!(spectral_abscissa(&r).unwrap(), -1.0);
        assert!(SpectrumReport::from_eigenvalues(vec![]).is_err());
    }

    #[test]
    fn resolvent_examples_single_mode() {
        let p2 = PI * PI;
        let m = model(0.0, 0.0, 1);
        assert!((resolvent_norm(&m, 0.0).unwrap() - 1.0 / p2).abs() < 1e-14);

        // Â⁻¹ = [[−1/π², −1/π²], [1/π², 0]]; its largest singular value is
        // sqrt of the largest eigenvalue of (Â⁻¹)ᵀÂ⁻¹ = (1/π⁴)[[2, 1], [1, 1]].
        let m = model(1.0, 1.0, 1);
        let sigma_max = ((3.0 + 5f64.sqrt()) / 2.0).sqrt() / p2;
        assert!((resolvent_norm(&m, 0.0).unwrap() - sigma_max).abs() < 1e-12 * sigma_max);
    }

    #[test]
    fn resolvent_on_spectrum_fails() {
        let m = model(0.0, 0.0, 2);
        let err = resolvent_norm(&m, PI * PI).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
    }

    #[test]
    fn undamped_sweep_is_normal() {
        let m = model(0.0, 0.0, 12);
        let lambda = m.basis().eigenvalues().to_vec();
        // Midpoints between consecutive eigenfrequencies.
        let grid: Vec<f64> = lambda.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let spectrum = pencil_spectrum(&m, DEFAULT_DENSE_CAP).unwrap();
        let sweep = sweep_with_spectrum(&ResolventSolver::for_model(&m), &spectrum, &grid).unwrap();
        for (mu, norm) in sweep.mu.iter().zip(&sweep.norms) {
            let dist = lambda.iter().map(|l| (l - mu).abs()).fold(f64::INFINITY, f64::min);
            assert!((norm * dist - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn near_normal_damping_tracks_distance() {
        let m = model(1.0, 1e-6, 16);
        let report = pencil_spectrum(&m, DEFAULT_DENSE_CAP).unwrap();
        let sweep = resolvent_sweep(&m, 0.0, 200.0, 101).unwrap();
        let diag = axis_distance_check(&report, &sweep);
        assert!(diag.normality_gap < 0.01, "gap {}", diag.normality_gap);
        assert!(diag.lower_bound_holds);
    }

    #[test]
    fn structured_solves_invert_the_shift() {
        let m = model(0.3, 1.0, 12);
        let solver = ResolventSolver::for_model(&m);
        let z = DVector::from_fn(24, |i, _| C64::new((i as f64).sin(), (2.0 * i as f64).cos()));
        for mu in [0.0, 0.7, 25.0] {
            let p = solver.pencil(mu);
            let shifted = solver.shifted(mu);
            let x = p.solve(&z).unwrap();
            assert!((&shifted * x - &z).norm() < 1e-12 * z.norm());
            let xa = p.solve_adjoint(&z).unwrap();
            assert!((shifted.adjoint() * xa - &z).norm() < 1e-12 * z.norm());
        }
    }

    #[test]
    fn localized_sweep_is_bounded_below() {
        let m = model(0.3, 1.0, 32);
        let report = pencil_spectrum(&m, DEFAULT_DENSE_CAP).unwrap();
        let sweep = resolvent_sweep(&m, 0.0, 60.0, 121).unwrap();
        let diag = axis_distance_check(&report, &sweep);
        assert!(diag.lower_bound_holds, "min ratio {}", diag.min_ratio);
        assert!(sweep.norms.iter().all(|r| r.is_finite() && *r > 0.0));
        let step = sweep.mu[1] - sweep.mu[0];
        assert!((diag.peak_mu - diag.least_damped_frequency).abs() <= step);
    }

    #[test]
    fn iterative_path_matches_dense() {
        let m = model(0.3, 1.0, 24);
        let dense = ResolventSolver::new(&m, SigmaMethod::Dense);
        let iterative = ResolventSolver::new(&m, SigmaMethod::InverseIteration);
        for mu in [0.0, 12.5, 80.0] {
            let a = dense.norm(mu).unwrap();
            let b = iterative.norm(mu).unwrap();
            assert!((a - b).abs() < 1e-8 * a);
        }
    }

    #[test]
    fn sweep_rejects_bad_ranges() {
        let m = model(0.3, 1.0, 4);
        assert!(resolvent_sweep(&m, -1.0, 2.0, 10).is_err());
        assert!(resolvent_sweep(&m, 2.0, 1.0, 10).is_err());
        assert!(resolvent_sweep(&m, 0.0, 1.0, 1).is_err());
    }
}
