//! Semigroup evolution in energy coordinates and decay diagnostics.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::fit::linear_fit;
use crate::linalg::{self, C64};
use crate::model::{energy, ModalBasis, PlateModel, State};

/// Propagators refuse eigenvector bases worse conditioned than this.
pub const MAX_EIGENVECTOR_CONDITION: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Exact,
    Midpoint,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub method: Method,
    /// Cumulative dissipation at each recorded time, when the integrator
    /// tracked it step by step.
    pub dissipation: Option<Vec<f64>>,
}

/// `exp(tÂ)` through an eigendecomposition `Â = V diag(λ) V⁻¹`.
#[derive(Debug, Clone)]
pub struct Propagator {
    values: DVector<C64>,
    vectors: DMatrix<C64>,
    inverse: DMatrix<C64>,
    condition: f64,
}

impl Propagator {
    pub fn new(model: &PlateModel) -> Result<Self> {
        let (values, vectors) = if is_diagonal(model.damping()) {
            block_eigenpairs(model)
        } else {
            let e = linalg::eigen_decomposition(&linalg::complexify(model.generator()))?;
            (e.values, e.vectors)
        };
        let condition = linalg::condition_number(&vectors)?;
        if !(condition <= MAX_EIGENVECTOR_CONDITION) {
            return Err(Error::Numerical(format!(
                "eigenvector basis condition number {condition:.3e} exceeds {MAX_EIGENVECTOR_CONDITION:e}; use the midpoint integrator"
            )));
        }
        let inverse = vectors
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Numerical("eigenvector matrix is singular".into()))?;
        Ok(Propagator {
            values,
            vectors,
            inverse,
            condition,
        })
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn eigenvalues(&self) -> &DVector<C64> {
        &self.values
    }

    /// Modal coefficients of `z0` in the eigenbasis.
    pub fn coefficients(&self, z0: &DVector<f64>) -> DVector<C64> {
        &self.inverse * z0.map(|x| C64::new(x, 0.0))
    }

    pub fn apply_coefficients(&self, coefficients: &DVector<C64>, t: f64) -> DVector<f64> {
        let scaled = coefficients.zip_map(&self.values, |c, l| c * (l * t).exp());
        (&self.vectors * scaled).map(|z| z.re)
    }

    pub fn apply(&self, z0: &DVector<f64>, t: f64) -> DVector<f64> {
        if t == 0.0 {
            return z0.clone();
        }
        self.apply_coefficients(&self.coefficients(z0), t)
    }
}

fn is_diagonal(m: &DMatrix<f64>) -> bool {
    m.iter().enumerate().all(|(k, x)| k % (m.nrows() + 1) == 0 || *x == 0.0)
}

/// When `D` is diagonal the generator splits into 2×2 blocks
/// `[[0, λ], [−λ, −δ]]` whose eigenpairs are known in closed form:
/// roots of `r² + δr + λ² = 0` with eigenvector `(λ, r)`.
fn block_eigenpairs(model: &PlateModel) -> (DVector<C64>, DMatrix<C64>) {
    let n = model.n_modes();
    let lambda = model.basis().eigenvalues();
    let mut values = DVector::zeros(2 * n);
    let mut vectors = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        let delta = model.damping()[(i, i)];
        let disc = C64::new(delta * delta - 4.0 * lambda[i] * lambda[i], 0.0).sqrt();
        for (slot, sign) in [(i, 1.0), (n + i, -1.0)] {
            let r = (C64::new(-delta, 0.0) + disc * sign) * 0.5;
            let norm = (lambda[i] * lambda[i] + r.norm_sqr()).sqrt();
            values[slot] = r;
            vectors[(i, slot)] = C64::new(lambda[i] / norm, 0.0);
            vectors[(n + i, slot)] = r / norm;
        }
    }
    (values, vectors)
}

fn check_state(model: &PlateModel, state0: &State) -> Result<DVector<f64>> {
    state0.to_energy_coords(model.basis())
}

/// Exact semigroup samples `z(t) = exp(tÂ) z0` at the requested times.
pub fn evolve_exact(model: &PlateModel, state0: &State, times: &[f64]) -> Result<Trajectory> {
    check_times(times)?;
    let z0 = check_state(model, state0)?;
    let propagator = Propagator::new(model)?;
    let coefficients = propagator.coefficients(&z0);
    let states = times
        .iter()
        .map(|&t| {
            let z = if t == 0.0 {
                z0.clone()
            } else {
                propagator.apply_coefficients(&coefficients, t)
            };
            State::from_energy_coords(&z, model.basis())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        times: times.to_vec(),
        states,
        method: Method::Exact,
        dissipation: None,
    })
}

fn check_times(times: &[f64]) -> Result<()> {
    match times.first() {
        None => return config("at least one sample time is required"),
        Some(&t0) if t0 != 0.0 => return config(format!("trajectories start at t = 0, got {t0}")),
        _ => {}
    }
    if times.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
        return config("sample times must be finite and strictly increasing");
    }
    Ok(())
}

/// Recorded times, states and cumulative dissipation.
pub type CayleyRun = (Vec<f64>, Vec<DVector<f64>>, Vec<f64>);

/// Implicit-midpoint (Cayley) stepping `z ← (I − dt/2·A)⁻¹(I + dt/2·A) z`
/// for an arbitrary real generator.
///
/// Records every `stride`-th step and the exact discrete dissipation
/// `Σ −dt·z_midᵀ A z_mid`, which for the plate generator is
/// `Σ dt·v_midᵀ D v_mid`.
pub fn cayley_evolve(
    generator: &DMatrix<f64>,
    z0: &DVector<f64>,
    dt: f64,
    steps: usize,
    stride: usize,
) -> Result<CayleyRun> {
    let n = generator.nrows();
    if z0.len() != n {
        return config(format!("initial vector has length {}, generator is {n}x{n}", z0.len()));
    }
    let stride = stride.max(1);
    let identity = DMatrix::<f64>::identity(n, n);
    let half = generator * (0.5 * dt);
    let implicit = (&identity - &half).lu();
    let explicit = &identity + &half;
    let mut z = z0.clone();
    let mut dissipated = 0.0;
    let mut times = vec![0.0];
    let mut states = vec![z.clone()];
    let mut dissipation = vec![0.0];
    for step in 1..=steps {
        let next = implicit
            .solve(&(&explicit * &z))
            .ok_or_else(|| Error::Numerical("implicit midpoint system is singular".into()))?;
        if next.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!(
                "midpoint step {step} produced non-finite values"
            )));
        }
        let mid = (&z + &next) * 0.5;
        dissipated -= dt * mid.dot(&(generator * &mid));
        z = next;
        if step % stride == 0 || step == steps {
            times.push(step as f64 * dt);
            states.push(z.clone());
            dissipation.push(dissipated);
        }
    }
    Ok((times, states, dissipation))
}

fn step_count(dt: f64, t_final: f64) -> Result<usize> {
    if !(dt.is_finite() && dt > 0.0) {
        return config(format!("dt must be positive, got {dt}"));
    }
    if !(t_final.is_finite() && t_final >= dt) {
        return config(format!("final time must be at least dt, got {t_final}"));
    }
    Ok((t_final / dt - 1e-9).ceil() as usize)
}

/// Implicit midpoint over `[0, t_final]`, recording every step.
pub fn evolve_midpoint(model: &PlateModel, state0: &State, dt: f64, t_final: f64) -> Result<Trajectory> {
    evolve_midpoint_strided(model, state0, dt, t_final, 1)
}

/// Implicit midpoint recording every `stride`-th step (and the last).
pub fn evolve_midpoint_strided(
    model: &PlateModel,
    state0: &State,
    dt: f64,
    t_final: f64,
    stride: usize,
) -> Result<Trajectory> {
    let steps = step_count(dt, t_final)?;
    let z0 = check_state(model, state0)?;
    let (times, zs, dissipation) = cayley_evolve(model.generator(), &z0, dt, steps, stride)?;
    let states = zs
        .iter()
        .map(|z| State::from_energy_coords(z, model.basis()))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        times,
        states,
        method: Method::Midpoint,
        dissipation: Some(dissipation),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyTrace {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    /// `∫₀ᵗ vᵀDv`, so that `E(0) − E(t) = dissipation(t)`.
    pub dissipation: Vec<f64>,
}

/// Energies along a trajectory plus the cumulative dissipation.
///
/// Midpoint trajectories carry their own exact step-by-step dissipation;
/// otherwise it is accumulated between samples from the averaged velocity.
pub fn energy_trace(trajectory: &Trajectory, model: &PlateModel) -> Result<EnergyTrace> {
    let energies = trajectory
        .states
        .iter()
        .map(|s| energy(s, model.basis()))
        .collect::<Result<Vec<_>>>()?;
    let dissipation = match &trajectory.dissipation {
        Some(d) => d.clone(),
        None => {
            let d = model.damping();
            let mut acc = 0.0;
            let mut out = Vec::with_capacity(trajectory.states.len());
            out.push(0.0);
            for (w, t) in trajectory.states.windows(2).zip(trajectory.times.windows(2)) {
                let v = (&w[0].v + &w[1].v) * 0.5;
                acc += (t[1] - t[0]) * v.dot(&(d * &v));
                out.push(acc);
            }
            out
        }
    };
    Ok(EnergyTrace {
        times: trajectory.times.clone(),
        energy: energies,
        dissipation,
    })
}

/// A finite-dimensional stand-in for data in `D(A^k)`: energy coordinates
/// `(λ_m u_m, v_m)` are standard normals scaled by `λ_m^{-2k}`.
///
/// Draws are interleaved per mode, so the leading modes do not depend on
/// the truncation size.
pub fn smooth_data(basis: &ModalBasis, k: u32, seed: u64) -> Result<State> {
    if k == 0 {
        return config("smoothness index k must be at least 1");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = basis.len();
    let mut z = DVector::zeros(2 * n);
    for (m, lambda) in basis.eigenvalues().iter().enumerate() {
        let weight = lambda.powi(-2 * k as i32);
        let a: f64 = StandardNormal.sample(&mut rng);
        let b: f64 = StandardNormal.sample(&mut rng);
        z[m] = weight * a;
        z[n + m] = weight * b;
    }
    State::from_energy_coords(&z, basis)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFitReport {
    pub k: u32,
    /// Smallest `C` with `E(t) ≤ C/(ln(2+t))^{2k}` on the window.
    pub c_k: f64,
    /// Least-squares slope of `ln E` against `t`.
    pub exp_rate: f64,
    pub exp_intercept: f64,
    /// RMS gap between `ln` of the envelope and `ln E` (zero when the envelope is attained everywhere).
    pub envelope_residual: f64,
    /// RMS residual of the log-linear fit.
    pub exp_residual: f64,
    pub window: (f64, f64),
    pub samples: usize,
}

/// Fits the logarithmic envelope (by the max functional) and an
/// exponential rate to the trace restricted to `window`.
pub fn decay_fit(trace: &EnergyTrace, k: u32, window: (f64, f64)) -> Result<DecayFitReport> {
    if k == 0 {
        return config("smoothness index k must be at least 1");
    }
    let (t_min, t_max) = window;
    if !(t_min > 0.0 && t_max > t_min) {
        return config(format!(
            "fit window must satisfy 0 < t_min < t_max, got [{t_min}, {t_max}]"
        ));
    }
    let picked: Vec<(f64, f64)> = trace
        .times
        .iter()
        .zip(&trace.energy)
        .filter(|(t, _)| **t >= t_min && **t <= t_max)
        .map(|(t, e)| (*t, *e))
        .collect();
    if picked.len() < 10 {
        return config(format!(
            "fit window holds {} samples, at least 10 are required",
            picked.len()
        ));
    }
    if let Some((t, e)) = picked.iter().find(|(_, e)| !(*e > 0.0)) {
        return Err(Error::Numerical(format!("energy {e:e} at t = {t} is not positive")));
    }
    let power = 2 * k as i32;
    let c_k = picked
        .iter()
        .map(|(t, e)| e * (2.0 + t).ln().powi(power))
        .fold(f64::MIN, f64::max);
    let gaps: Vec<f64> = picked
        .iter()
        .map(|(t, e)| (c_k / (2.0 + t).ln().powi(power)).ln() - e.ln())
        .collect();
    let envelope_residual = (gaps.iter().map(|g| g * g).sum::<f64>() / gaps.len() as f64).sqrt();
    let ts: Vec<f64> = picked.iter().map(|p| p.0).collect();
    let logs: Vec<f64> = picked.iter().map(|p| p.1.ln()).collect();
    let line = linear_fit(&ts, &logs).ok_or_else(|| Error::Numerical("degenerate fit window".into()))?;
    Ok(DecayFitReport {
        k,
        c_k,
        exp_rate: line.slope,
        exp_intercept: line.intercept,
        envelope_residual,
        exp_residual: line.rms_residual,
        window,
        samples: picked.len(),
    })
}

/// Uniform sample times `0, h, 2h, …` up to `t_final` with `samples` intervals.
pub fn uniform_times(t_final: f64, samples: usize) -> Vec<f64> {
    let samples = samples.max(1);
    (0..=samples).map(|i| t_final * i as f64 / samples as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DampingRegion, Geometry};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn model(extent: f64, d: f64, n: usize) -> PlateModel {
        PlateModel::new(
            Geometry::interval(1.0).unwrap(),
            DampingRegion::new(extent, d).unwrap(),
            n,
        )
        .unwrap()
    }

    fn unit_state(n: usize) -> State {
        let mut s = State::zeros(n);
        s.u[0] = 1.0 / (PI * PI);
        s
    }

    #[test]
    fn exact_identity_at_zero() {
        let m = model(0.3, 1.0, 8);
        let s = smooth_data(m.basis(), 1, 5).unwrap();
        let tr = evolve_exact(&m, &s, &[0.0]).unwrap();
        assert_eq!(tr.states[0], s);
    }

    #[test]
    fn undamped_single_mode_rotates() {
        let m = model(0.0, 0.0, 1);
        let s = unit_state(1);
        let t = 0.05;
        let tr = evolve_exact(&m, &s, &[0.0, t]).unwrap();
        let z = tr.states[1].to_energy_coords(m.basis()).unwrap();
        let w = PI * PI;
        assert!((z[0] - (w * t).cos()).abs() < 1e-12);
        assert!((z[1] + (w * t).sin()).abs() < 1e-12);
        let trace = energy_trace(&tr, &m).unwrap();
        assert_relative_eq!(trace.energy[0], trace.energy[1], max_relative = 1e-12);
    }

    #[test]
    fn fully_damped_single_mode_rate() {
        // Roots π²(−1 ± i√3)/2: energy envelope decays at 2·Re λ = −π².
        let m = model(1.0, 1.0, 1);
        let times = uniform_times(4.0, 4000);
        let tr = evolve_exact(&m, &unit_state(1), &times).unwrap();
        let trace = energy_trace(&tr, &m).unwrap();
        let logs: Vec<f64> = trace.energy.iter().map(|e| e.ln()).collect();
        let fit = linear_fit(&times, &logs).unwrap();
        assert!((fit.slope + PI * PI).abs() < 0.02 * PI * PI, "slope {}", fit.slope);
        // Closed form of the 2×2 flow from the roots.
        let w = PI * PI * 3f64.sqrt() / 2.0;
        let a = -PI * PI / 2.0;
        let t = 0.3;
        let z = tr.states[300].to_energy_coords(m.basis()).unwrap();
        // x(t) = e^{at}(cos wt − (a/w) sin wt) for x(0) = 1, x'(0) = 0 of x'' + π²x' + π⁴x = 0.
        let x = (a * t).exp() * ((w * t).cos() - a / w * (w * t).sin());
        assert!((z[0] - x).abs() < 1e-12, "{} vs {x}", z[0]);
    }

    #[test]
    fn exact_contracts_and_balances() {
        let m = model(0.3, 1.0, 32);
        let s = smooth_data(m.basis(), 1, 9).unwrap();
        let tr = evolve_exact(&m, &s, &uniform_times(2.0, 200)).unwrap();
        let trace = energy_trace(&tr, &m).unwrap();
        for e in &trace.energy {
            assert!(*e <= trace.energy[0] * (1.0 + 1e-10));
            assert!(*e > 0.0);
        }
    }

    #[test]
    fn zero_generator_is_constant() {
        let g = DMatrix::zeros(4, 4);
        let z0 = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let (_, zs, diss) = cayley_evolve(&g, &z0, 0.1, 10, 1).unwrap();
        assert!(zs.iter().all(|z| *z == z0));
        assert!(diss.iter().all(|d| *d == 0.0));
    }

    #[test]
    fn midpoint_steps_contract() {
        let m = model(0.3, 1.0, 32);
        let mut s = smooth_data(m.basis(), 1, 17).unwrap();
        // Rough state: unit coefficients in energy coordinates.
        for i in 0..32 {
            s.u[i] = ((i % 5) as f64 - 2.0) / m.basis().eigenvalues()[i];
            s.v[i] = ((i % 3) as f64 - 1.0) * 0.5;
        }
        let tr = evolve_midpoint(&m, &s, 1e-3, 0.2).unwrap();
        let trace = energy_trace(&tr, &m).unwrap();
        for w in trace.energy.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn midpoint_balance_and_agreement() {
        let m = model(0.3, 1.0, 32);
        let s = smooth_data(m.basis(), 2, 23).unwrap();
        let tr = evolve_midpoint(&m, &s, 1e-3, 1.0).unwrap();
        let trace = energy_trace(&tr, &m).unwrap();
        let lost = trace.energy[0] - trace.energy.last().unwrap();
        assert_relative_eq!(lost, *trace.dissipation.last().unwrap(), max_relative = 1e-6);
        let exact = evolve_exact(&m, &s, &[0.0, 1.0]).unwrap();
        let a = tr.states.last().unwrap().to_energy_coords(m.basis()).unwrap();
        let b = exact.states[1].to_energy_coords(m.basis()).unwrap();
        assert!((a - b).norm() < 1e-6);
    }

    #[test]
    fn energy_trace_zero_and_conservative() {
        let m = model(0.3, 1.0, 8);
        let tr = evolve_exact(&m, &State::zeros(8), &[0.0, 1.0, 2.0]).unwrap();
        let trace = energy_trace(&tr, &m).unwrap();
        assert!(trace.energy.iter().all(|e| *e == 0.0));
        let m = model(0.0, 0.0, 16);
        let s = smooth_data(m.basis(), 1, 2).unwrap();
        let tr = evolve_exact(&m, &s, &uniform_times(3.0, 30)).unwrap();
        let trace = energy_trace(&tr, &m).unwrap();
        for e in &trace.energy {
            assert_relative_eq!(*e, trace.energy[0], max_relative = 1e-10);
        }
    }

    #[test]
    fn invalid_times_rejected() {
        let m = model(0.3, 1.0, 4);
        let s = State::zeros(4);
        assert!(evolve_exact(&m, &s, &[]).is_err());
        assert!(evolve_exact(&m, &s, &[0.5, 1.0]).is_err());
        assert!(evolve_exact(&m, &s, &[0.0, 1.0, 1.0]).is_err());
        assert!(evolve_midpoint(&m, &s, 0.0, 1.0).is_err());
        assert!(evolve_midpoint(&m, &s, 0.1, 0.05).is_err());
    }

    #[test]
    fn smooth_data_profile() {
        let b = crate::model::laplacian_eigenpairs(Geometry::interval(1.0).unwrap(), 64).unwrap();
        let fraction = |s: &State, lo: usize| {
            let z = s.to_energy_coords(&b).unwrap();
            let n = b.len();
            let high: f64 = (lo..n).map(|i| z[i] * z[i] + z[n + i] * z[n + i]).sum();
            high / z.norm_squared()
        };
        let s8 = smooth_data(&b, 8, 1).unwrap();
        assert!(1.0 - fraction(&s8, 4) >= 0.99);
        let s1 = smooth_data(&b, 1, 1).unwrap();
        let s2 = smooth_data(&b, 2, 1).unwrap();
        assert!(fraction(&s2, 4) < fraction(&s1, 4));
        assert_eq!(smooth_data(&b, 2, 42).unwrap(), smooth_data(&b, 2, 42).unwrap());
        assert!(smooth_data(&b, 0, 1).is_err());
    }

    #[test]
    fn decay_fit_examples() {
        let times: Vec<f64> = (0..=90).map(|i| 1.0 + 0.1 * i as f64).collect();
        let trace = EnergyTrace {
            times: times.clone(),
            energy: vec![1.0; times.len()],
            dissipation: vec![0.0; times.len()],
        };
        let r = decay_fit(&trace, 1, (1.0, 10.0)).unwrap();
        assert_relative_eq!(r.c_k, 12f64.ln().powi(2), max_relative = 1e-14);
        assert_eq!(r.exp_rate, 0.0);

        let energy: Vec<f64> = times.iter().map(|t| 1.0 / (2.0 + t).ln().powi(2)).collect();
        let trace = EnergyTrace {
            times,
            energy,
            dissipation: vec![0.0; 91],
        };
        let r = decay_fit(&trace, 1, (1.0, 10.0)).unwrap();
        assert_relative_eq!(r.c_k, 1.0, max_relative = 1e-14);
        assert!(r.envelope_residual < 1e-14);
        assert!(r.exp_rate <= 0.0);
    }

    #[test]
    fn decay_fit_rejects_bad_series() {
        let times: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let mut energy = vec![1.0; 20];
        energy[5] = 0.0;
        let trace = EnergyTrace {
            times,
            energy,
            dissipation: vec![0.0; 20],
        };
        assert!(matches!(decay_fit(&trace, 1, (1.0, 19.0)), Err(Error::Numerical(_))));
        assert!(matches!(decay_fit(&trace, 1, (0.0, 19.0)), Err(Error::Config(_))));
        assert!(matches!(decay_fit(&trace, 1, (1.0, 3.0)), Err(Error::Config(_))));
    }
}
