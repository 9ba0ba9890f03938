//! The property suite run by `platelab verify`: every module invariant at
//! desk scale, each checked against an independent oracle where one exists.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use platelab_core::carleman::{
    certify, characteristic_samples, linear_family, pointwise_conditions, poisson_bracket, principal_symbol,
    weight_from_profile, CertifierGeometry, QuadraticProfile, SymbolPoint, Weight, WeightPair,
    DEFAULT_MARGIN_THRESHOLD, DEFAULT_TAUS, INTERFACE_INEQUALITY,
};
use platelab_core::evolution::{energy_trace, evolve_exact, evolve_midpoint, smooth_data, uniform_times};
use platelab_core::linalg::complexify;
use platelab_core::model::{evaluate_field, laplacian_eigenpairs, FieldOrder, ModalBasis};
use platelab_core::spectra::{
    axis_distance_check, pencil_spectrum, sweep_with_spectrum, uniform_grid, ResolventSolver, DEFAULT_DENSE_CAP,
};
use platelab_core::transmission::{
    imaginary_part_identity, interface_residuals, random_case_data, solve_resolvent, w_substitution,
};
use platelab_core::{DampingRegion, Geometry, PlateModel, State, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::output::num;
use crate::CliError;

pub const DEFAULT_SEED: u64 = 20240611;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> usize {
        self.checks.iter().filter(|c| c.passed).count()
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let verdict = if c.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(out, "{verdict} {:<44} {}", c.name, c.detail);
        }
        let _ = writeln!(out, "passed {}/{}", self.passed(), self.checks.len());
        out
    }

    fn push(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            detail,
        });
    }
}

type Res<T> = Result<T, CliError>;

fn interval(extent: f64, d: f64, n: usize) -> Res<PlateModel> {
    Ok(PlateModel::new(
        Geometry::interval(1.0)?,
        DampingRegion::new(extent, d)?,
        n,
    )?)
}

pub fn run_suite(seed: u64) -> Res<VerifyReport> {
    let mut report = VerifyReport::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    model_checks(&mut report, &mut rng)?;
    evolution_checks(&mut report, seed)?;
    spectra_checks(&mut report)?;
    transmission_checks(&mut report, seed)?;
    carleman_checks(&mut report, &mut rng)?;
    Ok(report)
}

/// Columns are the basis functions (or derivatives) sampled at `points`.
fn basis_matrix(basis: &ModalBasis, points: &[[f64; 2]], order: FieldOrder, component: usize) -> Res<DMatrix<f64>> {
    let n = basis.len();
    let mut out = DMatrix::zeros(points.len(), n);
    for m in 0..n {
        let mut e = DVector::zeros(n);
        e[m] = 1.0;
        let vals = evaluate_field(&e, basis, points, order)?;
        out.set_column(m, &vals.column(component));
    }
    Ok(out)
}

fn midpoints(a: f64, b: f64, n: usize) -> Vec<f64> {
    let h = (b - a) / n as f64;
    (0..n).map(|i| a + (i as f64 + 0.5) * h).collect()
}

fn gram_error(basis: &ModalBasis) -> Res<f64> {
    let g = basis.geometry();
    let max_m = basis.modes().iter().map(|k| k.m).max().unwrap_or(1);
    let nx = 4 * max_m;
    let xs = midpoints(0.0, g.lx(), nx);
    let (points, weight): (Vec<[f64; 2]>, f64) = match g.ly() {
        None => (xs.iter().map(|x| [*x, 0.0]).collect(), g.lx() / nx as f64),
        Some(ly) => {
            let ny = 4 * basis.modes().iter().map(|k| k.n).max().unwrap_or(1);
            let ys = midpoints(0.0, ly, ny);
            (
                xs.iter().flat_map(|x| ys.iter().map(move |y| [*x, *y])).collect(),
                g.lx() * ly / (nx * ny) as f64,
            )
        }
    };
    let phi = basis_matrix(basis, &points, FieldOrder::Value, 0)?;
    let gram = phi.transpose() * &phi * weight;
    let n = basis.len();
    Ok((gram - DMatrix::<f64>::identity(n, n)).abs().max())
}

/// Composite Simpson on `[a, b]` with `panels` (even) subintervals.
fn simpson_weights(a: f64, b: f64, panels: usize) -> (Vec<f64>, Vec<f64>) {
    let h = (b - a) / panels as f64;
    let xs = (0..=panels).map(|i| a + i as f64 * h).collect();
    let ws = (0..=panels)
        .map(|i| {
            let c = if i == 0 || i == panels {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect();
    (xs, ws)
}

fn model_checks(r: &mut VerifyReport, rng: &mut ChaCha8Rng) -> Res<()> {
    let b1 = laplacian_eigenpairs(Geometry::interval(1.0)?, 64)?;
    let b2 = laplacian_eigenpairs(Geometry::rectangle(1.0, 1.3)?, 40)?;
    let e = gram_error(&b1)?.max(gram_error(&b2)?);
    r.push("model.orthonormality", e < 1e-8, format!("max_gram_error={}", num(e)));

    let monotone = [&b1, &b2]
        .iter()
        .all(|b| b.eigenvalues().windows(2).all(|w| w[0] <= w[1]) && b.eigenvalues().iter().all(|l| *l > 0.0));
    r.push("model.eigenvalue_ordering", monotone, "1D N=64, 2D N=40".into());

    // quadrature oracle for D on ω = (0, 0.3)
    let m = interval(0.3, 1.0, 16)?;
    let (xs, ws) = simpson_weights(0.0, 0.3, 20_000);
    let pts: Vec<[f64; 2]> = xs.iter().map(|x| [*x, 0.0]).collect();
    let grads = basis_matrix(m.basis(), &pts, FieldOrder::Gradient, 0)?;
    let weighted = DMatrix::from_fn(pts.len(), 16, |i, j| grads[(i, j)] * ws[i]);
    let quad = grads.transpose() * weighted;
    let err = (&quad - m.damping()).abs().max() / m.damping().abs().max();
    r.push(
        "model.damping_quadrature",
        err < 1e-8,
        format!("relative_error={}", num(err)),
    );

    let mut worst_sym: f64 = 0.0;
    let mut worst_eig = f64::INFINITY;
    for model in [
        interval(0.3, 1.0, 64)?,
        PlateModel::new(Geometry::rectangle(1.0, 1.0)?, DampingRegion::new(0.4, 2.0)?, 64)?,
    ] {
        let d = model.damping();
        worst_sym = worst_sym.max((d - d.transpose()).abs().max());
        worst_eig = worst_eig.min(SymmetricEigen::new(d.clone()).eigenvalues.min());
    }
    r.push(
        "model.damping_symmetric_psd",
        worst_sym == 0.0 && worst_eig >= -1e-10,
        format!("asymmetry={} min_eigenvalue={}", num(worst_sym), num(worst_eig)),
    );

    let d = 1.7;
    let full = interval(1.0, d, 64)?;
    let diag = DMatrix::from_diagonal(&DVector::from_iterator(
        64,
        full.basis().eigenvalues().iter().map(|l| d * l),
    ));
    let gap = (full.damping() - diag).abs().max();
    r.push(
        "model.full_damping_collapse",
        gap < 1e-10,
        format!("max_deviation={}", num(gap)),
    );

    let model = interval(0.3, 1.0, 64)?;
    let a = complexify(model.generator());
    let dm = complexify(model.damping());
    let mut worst: f64 = 0.0;
    let mut sign_ok = true;
    for _ in 0..1000 {
        let z = DVector::from_fn(128, |_, _| {
            let x: f64 = rng.sample(StandardNormal);
            let y: f64 = rng.sample(StandardNormal);
            C64::new(x, y)
        });
        let lhs = z.dotc(&(&a * &z)).re;
        let v = z.rows(64, 64).into_owned();
        let vdv = v.dotc(&(&dm * &v)).re;
        worst = worst.max((lhs + vdv).abs() / vdv.abs());
        sign_ok &= lhs <= 0.0;
    }
    r.push(
        "model.dissipativity",
        worst < 1e-12 && sign_ok,
        format!("states=1000 max_relative_error={}", num(worst)),
    );
    Ok(())
}

fn endpoint_error(m: &PlateModel, s: &State, dt: f64) -> Res<f64> {
    let mid = evolve_midpoint(m, s, dt, 1.0)?;
    let exact = evolve_exact(m, s, &[0.0, 1.0])?;
    let a = mid.states.last().expect("nonempty").to_energy_coords(m.basis())?;
    let b = exact.states[1].to_energy_coords(m.basis())?;
    Ok((a - b).norm())
}

fn evolution_checks(r: &mut VerifyReport, seed: u64) -> Res<()> {
    let m = interval(0.3, 1.0, 32)?;
    let s = smooth_data(m.basis(), 2, seed)?;

    let exact = energy_trace(&evolve_exact(&m, &s, &uniform_times(5.0, 200))?, &m)?;
    let e0 = exact.energy[0];
    let growth = exact
        .energy
        .iter()
        .map(|e| (e - e0) / e0)
        .fold(f64::NEG_INFINITY, f64::max);
    let positive = exact.energy.iter().all(|e| *e > 0.0);
    r.push(
        "evolution.contraction_exact",
        growth <= 1e-10,
        format!("max_relative_increase={}", num(growth)),
    );

    let mid = energy_trace(&evolve_midpoint(&m, &s, 1e-3, 1.0)?, &m)?;
    let growth = mid
        .energy
        .iter()
        .map(|e| (e - e0) / e0)
        .fold(f64::NEG_INFINITY, f64::max);
    let stepwise = mid.energy.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    r.push(
        "evolution.contraction_midpoint",
        growth <= 1e-8 && stepwise,
        format!(
            "max_relative_increase={} stepwise_nonincreasing={stepwise}",
            num(growth)
        ),
    );

    let lost = e0 - mid.energy.last().expect("nonempty");
    let diss = *mid.dissipation.last().expect("nonempty");
    let balance = (lost - diss).abs() / diss.abs();
    r.push(
        "evolution.dissipation_identity",
        balance < 1e-6,
        format!("relative_error={}", num(balance)),
    );

    let free = interval(0.0, 0.0, 32)?;
    let sf = smooth_data(free.basis(), 2, seed)?;
    let trace = energy_trace(&evolve_exact(&free, &sf, &uniform_times(10.0, 100))?, &free)?;
    let drift = trace
        .energy
        .iter()
        .map(|e| (e - trace.energy[0]).abs() / trace.energy[0])
        .fold(0.0, f64::max);
    r.push(
        "evolution.conservative_limit",
        drift < 1e-10,
        format!("max_relative_drift={}", num(drift)),
    );

    let e1 = endpoint_error(&m, &s, 1e-3)?;
    let e2 = endpoint_error(&m, &s, 5e-4)?;
    let ratio = e1 / e2;
    r.push(
        "evolution.method_agreement_order",
        e1 < 1e-6 && (3.5..=4.5).contains(&ratio),
        format!("error_dt={} error_dt/2={} ratio={}", num(e1), num(e2), num(ratio)),
    );

    let abscissa = pencil_spectrum(&m, DEFAULT_DENSE_CAP)?.spectral_abscissa;
    r.push(
        "evolution.positivity",
        positive && abscissa < 0.0,
        format!("energies_positive={positive} abscissa={}", num(abscissa)),
    );
    Ok(())
}

fn spectra_checks(r: &mut VerifyReport) -> Res<()> {
    let local = interval(0.3, 1.0, 64)?;
    let spec = pencil_spectrum(&local, DEFAULT_DENSE_CAP)?;
    r.push(
        "spectra.conjugate_symmetry",
        spec.conjugate_paired,
        format!("pairing_error={}", num(spec.pairing_error)),
    );

    let mut worst = f64::NEG_INFINITY;
    let mut gap = f64::INFINITY;
    for model in [
        interval(0.3, 1.0, 32)?,
        interval(0.3, 1.0, 128)?,
        PlateModel::new(Geometry::rectangle(1.0, 1.0)?, DampingRegion::new(0.3, 1.0)?, 64)?,
    ] {
        let s = pencil_spectrum(&model, DEFAULT_DENSE_CAP)?;
        worst = worst.max(s.spectral_abscissa);
        gap = gap.min(s.axis_gap());
    }
    worst = worst.max(spec.spectral_abscissa);
    gap = gap.min(spec.axis_gap());
    r.push(
        "spectra.strong_stability",
        worst < 0.0 && gap > 1e-10,
        format!("max_abscissa={} min_axis_gap={}", num(worst), num(gap)),
    );

    let full = interval(1.0, 1.0, 64)?;
    let fs = pencil_spectrum(&full, DEFAULT_DENSE_CAP)?;
    let s3 = 3f64.sqrt();
    let mut err: f64 = 0.0;
    for l in full.basis().eigenvalues() {
        for sign in [1.0, -1.0] {
            let root = C64::new(-l / 2.0, sign * l * s3 / 2.0);
            let near = fs
                .eigenvalues
                .iter()
                .map(|z| (z - root).norm())
                .fold(f64::INFINITY, f64::min);
            err = err.max(near / root.norm());
        }
    }
    let abscissa_err = (fs.spectral_abscissa + PI * PI / 2.0).abs() / (PI * PI / 2.0);
    r.push(
        "spectra.full_damping_oracle",
        err < 1e-8 && abscissa_err < 1e-8 && fs.eigenvalues.len() == 128,
        format!("max_relative_error={} abscissa_error={}", num(err), num(abscissa_err)),
    );

    let grid = uniform_grid(0.0, 200.0, 201);
    let sweep = sweep_with_spectrum(&ResolventSolver::for_model(&local), &spec, &grid)?;
    let diag = axis_distance_check(&spec, &sweep);
    let finite = sweep.norms.iter().all(|n| n.is_finite() && *n > 0.0);
    r.push(
        "spectra.resolvent_lower_bound",
        finite && diag.lower_bound_holds,
        format!("points=201 min_norm_times_distance={}", num(diag.min_ratio)),
    );

    // the sweep maximum sits within grid resolution of the least damped mode
    let step = grid[1] - grid[0];
    let least = spec.least_damped();
    let tol = 2.0 * step + least.re.abs();
    let offset = (diag.peak_mu - diag.least_damped_frequency).abs();
    r.push(
        "spectra.peak_near_least_damped",
        offset <= tol,
        format!(
            "peak_mu={} least_damped_im={} tolerance={}",
            num(diag.peak_mu),
            num(diag.least_damped_frequency),
            num(tol)
        ),
    );
    Ok(())
}

fn transmission_checks(r: &mut VerifyReport, seed: u64) -> Res<()> {
    let m = interval(0.3, 1.0, 64)?;
    let mus = [1.0, 10.0, 100.0];
    let (mut round, mut first, mut ident) = (0.0f64, 0.0f64, 0.0f64);
    let mut jumps = 0.0f64;
    for i in 0..100u64 {
        let (f, g) = random_case_data(m.basis(), seed.wrapping_add(i));
        let case = solve_resolvent(&m, &f, &g, mus[i as usize % 3])?;
        round = round.max(case.round_trip_residual(&m));
        first = first.max(case.first_line_residual(m.basis()));
        ident = ident.max(imaginary_part_identity(&case, &m)?.residual);
        let ir = interface_residuals(&case, &m)?;
        jumps = jumps.max(ir.jump_value).max(ir.jump_normal).max(ir.jump_laplacian);
    }
    r.push(
        "transmission.round_trip",
        round < 1e-10,
        format!("cases=100 max_residual={}", num(round)),
    );
    r.push(
        "transmission.first_line_recovery",
        first < 1e-10,
        format!("max_residual={}", num(first)),
    );
    r.push(
        "transmission.imaginary_part_identity",
        ident < 1e-9,
        format!("max_residual={}", num(ident)),
    );

    let m2 = PlateModel::new(Geometry::rectangle(1.0, 1.0)?, DampingRegion::new(0.3, 1.0)?, 32)?;
    let (f, g) = random_case_data(m2.basis(), seed);
    let ir = interface_residuals(&solve_resolvent(&m2, &f, &g, 10.0)?, &m2)?;
    jumps = jumps.max(ir.jump_value).max(ir.jump_normal).max(ir.jump_laplacian);
    r.push(
        "transmission.interface_continuity",
        jumps == 0.0,
        format!("max_jump={}", num(jumps)),
    );

    let full = interval(1.0, 1.0, 64)?;
    let mut worst: f64 = 0.0;
    for (i, mu) in mus.iter().enumerate() {
        let (f, g) = random_case_data(full.basis(), seed.wrapping_add(1000 + i as u64));
        let w = w_substitution(&solve_resolvent(&full, &f, &g, *mu)?, &full)?;
        worst = worst.max(w.projected_residual.unwrap_or(f64::INFINITY));
    }
    r.push(
        "transmission.full_damping_projection",
        worst < 1e-8,
        format!("max_projected_residual={}", num(worst)),
    );
    Ok(())
}

fn random_profile(rng: &mut ChaCha8Rng) -> QuadraticProfile {
    let off = rng.random_range(-0.5..0.5);
    QuadraticProfile {
        constant: rng.random_range(-0.5..0.5),
        linear: [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
        hessian: [[rng.random_range(-1.0..1.0), off], [off, rng.random_range(-1.0..1.0)]],
    }
}

/// Central-difference Poisson bracket `Σ ∂ξ Re p ∂x Im p − ∂x Re p ∂ξ Im p`.
fn fd_bracket(w: &Weight, p: &SymbolPoint) -> f64 {
    let mut acc = 0.0;
    for j in 0..w.dim() {
        let hx = 1e-6;
        let hxi = 1e-6 * p.xi[j].abs().max(p.tau);
        let at = |dx: f64, dxi: f64| {
            let mut q = *p;
            q.x[j] += dx;
            q.xi[j] += dxi;
            principal_symbol(w, &q)
        };
        let (xp, xm) = (at(hx, 0.0), at(-hx, 0.0));
        let (kp, km) = (at(0.0, hxi), at(0.0, -hxi));
        let d_re_xi = (kp.0 - km.0) / (2.0 * hxi);
        let d_im_xi = (kp.1 - km.1) / (2.0 * hxi);
        let d_re_x = (xp.0 - xm.0) / (2.0 * hx);
        let d_im_x = (xp.1 - xm.1) / (2.0 * hx);
        acc += d_re_xi * d_im_x - d_re_x * d_im_xi;
    }
    acc
}

/// Magnitude of the terms summed in the bracket, the natural scale for a
/// relative comparison when the bracket itself is near zero.
fn bracket_scale(w: &Weight, p: &SymbolPoint) -> f64 {
    let h = w.hessian(p.x);
    let hn = h.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    let g = w.gradient(p.x);
    let xi2 = p.xi[0] * p.xi[0] + p.xi[1] * p.xi[1];
    let g2 = g[0] * g[0] + g[1] * g[1];
    4.0 * p.tau * hn * (xi2 + p.tau * p.tau * g2)
}

fn carleman_checks(r: &mut VerifyReport, rng: &mut ChaCha8Rng) -> Res<()> {
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let w = weight_from_profile(random_profile(rng), rng.random_range(0.5..2.0), 2)?;
        let p = SymbolPoint {
            x: [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)],
            xi: [rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)],
            tau: rng.random_range(1.0..10.0),
        };
        let exact = poisson_bracket(&w, &p);
        let scale = exact.abs().max(bracket_scale(&w, &p));
        worst = worst.max((exact - fd_bracket(&w, &p)).abs() / scale);
    }
    r.push(
        "carleman.bracket_closed_form",
        worst < 1e-6,
        format!("points=1000 max_relative_error={}", num(worst)),
    );

    let mut worst: f64 = 0.0;
    let h = 1e-5;
    for _ in 0..200 {
        let w = weight_from_profile(random_profile(rng), rng.random_range(0.5..3.0), 2)?;
        let p = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
        let (g, hs) = (w.gradient(p), w.hessian(p));
        let scale = w
            .value(p)
            .max(g[0].hypot(g[1]))
            .max(hs.iter().flatten().fold(0.0, |a: f64, x| a.max(x.abs())));
        for j in 0..2 {
            let (mut a, mut b) = (p, p);
            a[j] += h;
            b[j] -= h;
            worst = worst.max(((w.value(a) - w.value(b)) / (2.0 * h) - g[j]).abs() / scale);
            let (ga, gb) = (w.gradient(a), w.gradient(b));
            for i in 0..2 {
                worst = worst.max(((ga[i] - gb[i]) / (2.0 * h) - hs[i][j]).abs() / scale);
            }
        }
    }
    r.push(
        "carleman.evaluator_consistency",
        worst < 1e-6,
        format!("max_relative_error={}", num(worst)),
    );

    let geometry = CertifierGeometry::new(2, (0.0, 0.5), 1.0, 1.0)?;
    let mut margins = Vec::new();
    let mut at8 = None;
    for beta in [1.0, 2.0, 4.0, 8.0] {
        let cert = certify(
            &linear_family(&geometry, beta)?,
            &geometry,
            17,
            &DEFAULT_TAUS,
            DEFAULT_MARGIN_THRESHOLD,
        )?;
        let m = cert
            .subellipticity_inner
            .margin
            .unwrap_or(f64::NAN)
            .min(cert.subellipticity_outer.margin.unwrap_or(f64::NAN));
        margins.push(m);
        if beta == 8.0 {
            at8 = Some(cert);
        }
    }
    let increasing = margins.windows(2).all(|w| w[1] > w[0]);
    let shown: Vec<String> = margins.iter().map(|m| num(*m)).collect();
    r.push(
        "carleman.margin_monotone_in_beta",
        increasing,
        format!("margins=[{}]", shown.join(", ")),
    );
    let at8 = at8.expect("beta = 8 is in the list");
    r.push(
        "carleman.linear_family_certified",
        at8.passed,
        format!(
            "beta=8 interface_margin={}",
            num(at8.conditions.get(INTERFACE_INEQUALITY).map_or(f64::NAN, |c| c.value))
        ),
    );

    let w = weight_from_profile(QuadraticProfile::linear(1.0, [-1.0, 0.0]), 2.0, 2)?;
    let eq = pointwise_conditions(&WeightPair::new(w, w)?, &geometry.samples(17));
    let c = eq.get(INTERFACE_INEQUALITY).map_or(f64::NAN, |c| c.value);
    r.push(
        "carleman.equal_weights_rejected",
        !eq.passed && c < 0.0,
        format!("interface_margin={}", num(c)),
    );

    let (mut membership, mut homogeneity) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let w = weight_from_profile(random_profile(rng), rng.random_range(0.5..2.0), 2)?;
        let x = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
        let base = match characteristic_samples(&w, x, DEFAULT_TAUS[0], 2) {
            Ok(s) => s,
            Err(_) => continue,
        };
        let reference = poisson_bracket(&w, &base[0]) / base[0].japanese().powi(3);
        for tau in DEFAULT_TAUS {
            for p in characteristic_samples(&w, x, tau, 16)? {
                let (re, im) = principal_symbol(&w, &p);
                membership = membership.max((re.abs() + im.abs()) / p.japanese().powi(2));
                let v = poisson_bracket(&w, &p) / p.japanese().powi(3);
                homogeneity = homogeneity.max((v - reference).abs() / reference.abs().max(f64::MIN_POSITIVE));
            }
        }
    }
    r.push(
        "carleman.characteristic_membership",
        membership < 1e-10,
        format!("max_symbol={}", num(membership)),
    );
    r.push(
        "carleman.bracket_homogeneity",
        homogeneity < 1e-8,
        format!("max_relative_spread={}", num(homogeneity)),
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_integrates_cubics_exactly() {
        let (xs, ws) = simpson_weights(0.0, 2.0, 4);
        let s: f64 = xs.iter().zip(&ws).map(|(x, w)| w * x.powi(3)).sum();
        assert!((s - 4.0).abs() < 1e-14);
    }

    #[test]
    fn fd_bracket_agrees_on_a_fixed_point() {
        let w = weight_from_profile(QuadraticProfile::linear(0.0, [0.6, 0.8]), 1.5, 2).unwrap();
        let p = SymbolPoint {
            x: [0.2, 0.4],
            xi: [3.0, -1.0],
            tau: 2.0,
        };
        let exact = poisson_bracket(&w, &p);
        assert!((exact - fd_bracket(&w, &p)).abs() < 1e-6 * bracket_scale(&w, &p));
    }
}
