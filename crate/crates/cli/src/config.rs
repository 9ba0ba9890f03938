//! TOML run configuration.
//!
//! Physical parameters (`geometry`, `damping`, `discretization.n_modes`)
//! have no defaults. Command blocks are optional and default-filled. All
//! validation errors are collected before reporting.

use std::path::Path;

use platelab_core::carleman::{CertifierGeometry, QuadraticProfile, DEFAULT_MARGIN_THRESHOLD, DEFAULT_TAUS};
use platelab_core::spectra::DEFAULT_DENSE_CAP;
use platelab_core::transmission::DEFAULT_GRID_POINTS;
use platelab_core::{DampingRegion, Geometry};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    geometry: Option<RawGeometry>,
    damping: Option<RawDamping>,
    discretization: Option<RawDiscretization>,
    simulate: Option<RawSimulate>,
    sweep: Option<RawSweep>,
    resolvent_case: Option<RawCase>,
    carleman: Option<RawCarleman>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    dim: Option<i64>,
    lengths: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDamping {
    d: Option<f64>,
    ell: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDiscretization {
    n_modes: Option<i64>,
    grid: Option<i64>,
    dense_cap: Option<i64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimulate {
    method: Option<String>,
    dt: Option<f64>,
    t_final: Option<f64>,
    samples: Option<i64>,
    k: Option<i64>,
    seed: Option<u64>,
    window: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    mu_min: Option<f64>,
    mu_max: Option<f64>,
    n_points: Option<i64>,
    refine: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCase {
    mu: Option<Vec<f64>>,
    data: Option<String>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCarleman {
    dim: Option<i64>,
    inner: Option<Vec<f64>>,
    outer_end: Option<f64>,
    width: Option<f64>,
    family: Option<String>,
    betas: Option<Vec<f64>>,
    taus: Option<Vec<f64>>,
    samples_per_axis: Option<i64>,
    threshold: Option<f64>,
    psi_inner: Option<QuadraticProfile>,
    psi_outer: Option<QuadraticProfile>,
    beta_scale_inner: Option<f64>,
    beta_scale_outer: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discretization {
    pub n_modes: usize,
    /// Cells per axis of each region grid in resolvent cases.
    pub grid: usize,
    pub dense_cap: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimulateMethod {
    Exact,
    Midpoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateConfig {
    pub method: SimulateMethod,
    pub dt: f64,
    pub t_final: f64,
    /// Number of recorded intervals in the trace.
    pub samples: usize,
    pub k: u32,
    pub seed: u64,
    pub window: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub mu_min: f64,
    pub mu_max: f64,
    pub n_points: usize,
    /// Also sweep the doubled grid and report the change in `b`.
    pub refine: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseData {
    Random,
    Smooth,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseConfig {
    pub mu: Vec<f64>,
    pub data: CaseData,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightFamily {
    /// The built-in pair with unit gradients and `β₁ = 2β₂`.
    Linear,
    Custom {
        psi_inner: QuadraticProfile,
        psi_outer: QuadraticProfile,
        beta_scale_inner: f64,
        beta_scale_outer: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CarlemanConfig {
    pub geometry: CertifierGeometry,
    pub family: WeightFamily,
    pub betas: Vec<f64>,
    pub taus: Vec<f64>,
    pub samples_per_axis: usize,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub geometry: Geometry,
    pub damping: DampingRegion,
    pub discretization: Discretization,
    pub simulate: SimulateConfig,
    pub sweep: SweepConfig,
    pub resolvent_case: CaseConfig,
    pub carleman: CarlemanConfig,
}

/// Collects validation messages, each prefixed with its dotted field path.
#[derive(Default)]
struct Errors(Vec<String>);

impl Errors {
    fn push(&mut self, field: &str, msg: impl std::fmt::Display) {
        self.0.push(format!("{field}: {msg}"));
    }

    fn required<T>(&mut self, field: &str, value: Option<T>) -> Option<T> {
        if value.is_none() {
            self.push(field, "is required");
        }
        value
    }

    fn positive(&mut self, field: &str, value: f64) -> Option<f64> {
        if value.is_finite() && value > 0.0 {
            Some(value)
        } else {
            self.push(field, format!("must be a positive finite number, got {value}"));
            None
        }
    }

    fn count(&mut self, field: &str, value: i64, min: i64) -> Option<usize> {
        if value >= min {
            Some(value as usize)
        } else {
            self.push(field, format!("must be an integer >= {min}, got {value}"));
            None
        }
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig, CliError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Config(vec![e.to_string().trim().to_string()]))?;
    let mut err = Errors::default();

    let geometry = validate_geometry(&mut err, raw.geometry);
    let damping = validate_damping(&mut err, raw.damping, geometry.as_ref());
    let discretization = validate_discretization(&mut err, raw.discretization);
    let simulate = validate_simulate(&mut err, raw.simulate.unwrap_or_default());
    let sweep = validate_sweep(&mut err, raw.sweep.unwrap_or_default());
    let resolvent_case = validate_case(&mut err, raw.resolvent_case.unwrap_or_default());
    let carleman = validate_carleman(&mut err, raw.carleman.unwrap_or_default());

    if !err.0.is_empty() {
        return Err(CliError::Config(err.0));
    }
    match (
        geometry,
        damping,
        discretization,
        simulate,
        sweep,
        resolvent_case,
        carleman,
    ) {
        (
            Some(geometry),
            Some(damping),
            Some(discretization),
            Some(simulate),
            Some(sweep),
            Some(resolvent_case),
            Some(carleman),
        ) => Ok(RunConfig {
            geometry,
            damping,
            discretization,
            simulate,
            sweep,
            resolvent_case,
            carleman,
        }),
        _ => Err(CliError::Config(vec!["configuration is incomplete".into()])),
    }
}

fn validate_geometry(err: &mut Errors, raw: Option<RawGeometry>) -> Option<Geometry> {
    let raw = err.required("geometry", raw)?;
    let dim = err.required("geometry.dim", raw.dim);
    let lengths = err.required("geometry.lengths", raw.lengths);
    let dim = match dim {
        Some(d @ (1 | 2)) => Some(d as usize),
        Some(d) => {
            err.push("geometry.dim", format!("must be 1 or 2, got {d}"));
            None
        }
        None => None,
    };
    let (dim, lengths) = (dim?, lengths?);
    if lengths.len() != dim {
        err.push(
            "geometry.lengths",
            format!("needs {dim} entries for dim = {dim}, got {}", lengths.len()),
        );
        return None;
    }
    let mut ok = true;
    for (i, l) in lengths.iter().enumerate() {
        ok &= err.positive(&format!("geometry.lengths[{i}]"), *l).is_some();
    }
    if !ok {
        return None;
    }
    if dim == 1 {
        Geometry::interval(lengths[0]).ok()
    } else {
        Geometry::rectangle(lengths[0], lengths[1]).ok()
    }
}

fn validate_damping(err: &mut Errors, raw: Option<RawDamping>, geometry: Option<&Geometry>) -> Option<DampingRegion> {
    let raw = err.required("damping", raw)?;
    let d = err.required("damping.d", raw.d);
    let ell = err.required("damping.ell", raw.ell);
    let d = d.and_then(|d| {
        if d.is_finite() && d >= 0.0 {
            Some(d)
        } else {
            err.push("damping.d", format!("must be finite and >= 0, got {d}"));
            None
        }
    });
    let ell = ell.and_then(|l| {
        if !(l.is_finite() && l >= 0.0) {
            err.push("damping.ell", format!("must be finite and >= 0, got {l}"));
            return None;
        }
        if let Some(g) = geometry {
            if l > g.lx() {
                err.push(
                    "damping.ell",
                    format!("{l} exceeds the domain length {} along x", g.lx()),
                );
                return None;
            }
        }
        Some(l)
    });
    DampingRegion::new(ell?, d?).ok()
}

fn validate_discretization(err: &mut Errors, raw: Option<RawDiscretization>) -> Option<Discretization> {
    let raw = err.required("discretization", raw)?;
    let n_modes = err
        .required("discretization.n_modes", raw.n_modes)
        .and_then(|n| err.count("discretization.n_modes", n, 1));
    let grid = err.count("discretization.grid", raw.grid.unwrap_or(DEFAULT_GRID_POINTS as i64), 1);
    let dense_cap = err.count(
        "discretization.dense_cap",
        raw.dense_cap.unwrap_or(DEFAULT_DENSE_CAP as i64),
        1,
    );
    Some(Discretization {
        n_modes: n_modes?,
        grid: grid?,
        dense_cap: dense_cap?,
    })
}

fn validate_window(err: &mut Errors, field: &str, w: Vec<f64>) -> Option<(f64, f64)> {
    if w.len() != 2 || !(w[0] > 0.0 && w[1] > w[0] && w[1].is_finite()) {
        err.push(
            field,
            format!("must be [t_min, t_max] with 0 < t_min < t_max, got {w:?}"),
        );
        return None;
    }
    Some((w[0], w[1]))
}

fn validate_simulate(err: &mut Errors, raw: RawSimulate) -> Option<SimulateConfig> {
    let method = match raw.method.as_deref().unwrap_or("exact") {
        "exact" => Some(SimulateMethod::Exact),
        "midpoint" => Some(SimulateMethod::Midpoint),
        other => {
            err.push(
                "simulate.method",
                format!("must be \"exact\" or \"midpoint\", got {other:?}"),
            );
            None
        }
    };
    let dt = err.positive("simulate.dt", raw.dt.unwrap_or(1e-3));
    let t_final = err.positive("simulate.t_final", raw.t_final.unwrap_or(100.0));
    if let (Some(dt), Some(t)) = (dt, t_final) {
        if t < dt {
            err.push(
                "simulate.t_final",
                format!("must be at least simulate.dt = {dt}, got {t}"),
            );
        }
    }
    let samples = err.count("simulate.samples", raw.samples.unwrap_or(1000), 1);
    let k = err.count("simulate.k", raw.k.unwrap_or(2), 1);
    let window = validate_window(err, "simulate.window", raw.window.unwrap_or(vec![1.0, 100.0]));
    if let (Some(w), Some(t)) = (window, t_final) {
        if w.1 > t {
            err.push(
                "simulate.window",
                format!("upper end {} exceeds simulate.t_final = {t}", w.1),
            );
        }
    }
    Some(SimulateConfig {
        method: method?,
        dt: dt?,
        t_final: t_final?,
        samples: samples?,
        k: u32::try_from(k?).ok()?,
        seed: raw.seed.unwrap_or(0),
        window: window?,
    })
}

fn validate_sweep(err: &mut Errors, raw: RawSweep) -> Option<SweepConfig> {
    let mu_min = raw.mu_min.unwrap_or(0.0);
    let mu_max = raw.mu_max.unwrap_or(200.0);
    let mut ok = true;
    if !(mu_min.is_finite() && mu_min >= 0.0) {
        err.push("sweep.mu_min", format!("must be finite and >= 0, got {mu_min}"));
        ok = false;
    }
    if !(mu_max.is_finite() && mu_max > mu_min) {
        err.push(
            "sweep.mu_max",
            format!("must be finite and > sweep.mu_min, got {mu_max}"),
        );
        ok = false;
    }
    let n_points = err.count("sweep.n_points", raw.n_points.unwrap_or(201), 2);
    ok.then_some(())?;
    Some(SweepConfig {
        mu_min,
        mu_max,
        n_points: n_points?,
        refine: raw.refine.unwrap_or(false),
    })
}

fn validate_case(err: &mut Errors, raw: RawCase) -> Option<CaseConfig> {
    let mu = raw.mu.unwrap_or(vec![1.0, 10.0, 100.0]);
    let mut ok = true;
    if mu.is_empty() {
        err.push("resolvent_case.mu", "must list at least one value");
        ok = false;
    }
    if let Some(m) = mu.iter().find(|m| !m.is_finite()) {
        err.push("resolvent_case.mu", format!("values must be finite, got {m}"));
        ok = false;
    }
    let data = match raw.data.as_deref().unwrap_or("random") {
        "random" => Some(CaseData::Random),
        "smooth" => Some(CaseData::Smooth),
        other => {
            err.push(
                "resolvent_case.data",
                format!("must be \"random\" or \"smooth\", got {other:?}"),
            );
            None
        }
    };
    ok.then_some(())?;
    Some(CaseConfig {
        mu,
        data: data?,
        seed: raw.seed.unwrap_or(0),
    })
}

fn positive_list(err: &mut Errors, field: &str, values: Vec<f64>) -> Option<Vec<f64>> {
    if values.is_empty() {
        err.push(field, "must list at least one value");
        return None;
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        err.push(field, format!("values must be positive and finite, got {v}"));
        return None;
    }
    Some(values)
}

fn validate_carleman(err: &mut Errors, raw: RawCarleman) -> Option<CarlemanConfig> {
    let dim = match raw.dim.unwrap_or(2) {
        d @ (1 | 2) => Some(d as usize),
        d => {
            err.push("carleman.dim", format!("must be 1 or 2, got {d}"));
            None
        }
    };
    let inner = raw.inner.unwrap_or(vec![0.0, 0.5]);
    let outer_end = raw.outer_end.unwrap_or(1.0);
    let width = raw.width.unwrap_or(1.0);
    let geometry = match (dim, inner.as_slice()) {
        (Some(dim), [a, b]) => match CertifierGeometry::new(dim, (*a, *b), outer_end, width) {
            Ok(g) => Some(g),
            Err(e) => {
                err.push("carleman.inner", e);
                None
            }
        },
        (_, [_, _]) => None,
        _ => {
            err.push("carleman.inner", format!("must be [a, b], got {inner:?}"));
            None
        }
    };
    let family = match raw.family.as_deref().unwrap_or("linear") {
        "linear" => Some(WeightFamily::Linear),
        "custom" => {
            let psi_inner = err.required("carleman.psi_inner", raw.psi_inner);
            let psi_outer = err.required("carleman.psi_outer", raw.psi_outer);
            let s1 = err.positive("carleman.beta_scale_inner", raw.beta_scale_inner.unwrap_or(1.0));
            let s2 = err.positive("carleman.beta_scale_outer", raw.beta_scale_outer.unwrap_or(1.0));
            match (psi_inner, psi_outer, s1, s2) {
                (Some(psi_inner), Some(psi_outer), Some(beta_scale_inner), Some(beta_scale_outer)) => {
                    Some(WeightFamily::Custom {
                        psi_inner,
                        psi_outer,
                        beta_scale_inner,
                        beta_scale_outer,
                    })
                }
                _ => None,
            }
        }
        other => {
            err.push(
                "carleman.family",
                format!("must be \"linear\" or \"custom\", got {other:?}"),
            );
            None
        }
    };
    let betas = positive_list(err, "carleman.betas", raw.betas.unwrap_or(vec![1.0, 2.0, 4.0, 8.0]));
    let taus = positive_list(err, "carleman.taus", raw.taus.unwrap_or(DEFAULT_TAUS.to_vec()));
    let samples_per_axis = err.count("carleman.samples_per_axis", raw.samples_per_axis.unwrap_or(17), 2);
    let threshold = raw.threshold.unwrap_or(DEFAULT_MARGIN_THRESHOLD);
    if !threshold.is_finite() {
        err.push("carleman.threshold", format!("must be finite, got {threshold}"));
    }
    Some(CarlemanConfig {
        geometry: geometry?,
        family: family?,
        betas: betas?,
        taus: taus?,
        samples_per_axis: samples_per_axis?,
        threshold: threshold.is_finite().then_some(threshold)?,
    })
}
