//! Certification of Carleman weight pairs `φ_k = e^{β_k ψ_k}` for the
//! transmission problem across a flat interface.
//!
//! A certifier geometry is the stack `U₁ = (a, b)`, interface `γ₀ = {x = b}`,
//! `U₂ = (b, c)`, outer boundary `γ = {x = c}` (times `(0, Ly)` in 2D). The
//! normal on `γ₀` points out of `U₂` (that is `−e_x`) and the normal on `γ`
//! is `+e_x`. The hypotheses checked are
//!
//! * `|∇φ_k| > 0` on `Ū_k`,
//! * `∂νφ₂ < 0` on `γ`,
//! * `∂νφ_k > 0` on `γ₀` and `(∂νφ₁)² − (∂νφ₂)² > 1` there,
//! * `φ₁ = φ₂` on `γ₀`,
//! * `{Re p_k, Im p_k} ≥ c⟨ξ,τ⟩³` on the characteristic set of
//!   `p = |ξ|² + 2iτ ξ·∇φ − τ²|∇φ|²`.
//!
//! Margins are floating-point evaluations on finite samples, not enclosures.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::model::Point;

/// Default pass threshold for the normalized sub-ellipticity margin.
pub const DEFAULT_MARGIN_THRESHOLD: f64 = 1e-6;

/// Tolerance on `|φ₁ − φ₂|` along the interface.
pub const CONTINUITY_TOLERANCE: f64 = 1e-10;

/// Width `ε` of the near-characteristic shell used in 1D.
pub const SHELL_WIDTH: f64 = 1e-2;

pub const DEFAULT_TAUS: [f64; 3] = [10.0, 100.0, 1000.0];

/// `ψ(x) = c + g·x + ½ xᵀHx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticProfile {
    pub constant: f64,
    pub linear: [f64; 2],
    /// Symmetric part is used; an asymmetric input is symmetrized.
    #[serde(default)]
    pub hessian: [[f64; 2]; 2],
}

impl QuadraticProfile {
    pub fn linear(constant: f64, gradient: [f64; 2]) -> Self {
        QuadraticProfile {
            constant,
            linear: gradient,
            hessian: [[0.0; 2]; 2],
        }
    }

    fn sym(&self) -> [[f64; 2]; 2] {
        let off = 0.5 * (self.hessian[0][1] + self.hessian[1][0]);
        [[self.hessian[0][0], off], [off, self.hessian[1][1]]]
    }

    pub fn value(&self, p: Point) -> f64 {
        let h = self.sym();
        let quad = h[0][0] * p[0] * p[0] + 2.0 * h[0][1] * p[0] * p[1] + h[1][1] * p[1] * p[1];
        self.constant + self.linear[0] * p[0] + self.linear[1] * p[1] + 0.5 * quad
    }

    pub fn gradient(&self, p: Point) -> [f64; 2] {
        let h = self.sym();
        [
            self.linear[0] + h[0][0] * p[0] + h[0][1] * p[1],
            self.linear[1] + h[1][0] * p[0] + h[1][1] * p[1],
        ]
    }

    pub fn hessian(&self) -> [[f64; 2]; 2] {
        self.sym()
    }

    /// Drops every `y` dependence.
    fn restrict_1d(mut self) -> Self {
        self.linear[1] = 0.0;
        self.hessian = [[self.hessian[0][0], 0.0], [0.0, 0.0]];
        self
    }

    fn is_finite(&self) -> bool {
        self.constant.is_finite()
            && self.linear.iter().all(|x| x.is_finite())
            && self.hessian.iter().flatten().all(|x| x.is_finite())
    }
}

/// `φ = e^{βψ}` with closed-form derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weight {
    profile: QuadraticProfile,
    beta: f64,
    dim: usize,
}

pub fn weight_from_profile(profile: QuadraticProfile, beta: f64, dim: usize) -> Result<Weight> {
    if !(beta.is_finite() && beta > 0.0) {
        return config(format!("beta must be positive and finite, got {beta}"));
    }
    if dim != 1 && dim != 2 {
        return config(format!("dimension must be 1 or 2, got {dim}"));
    }
    if !profile.is_finite() {
        return config("weight profile has non-finite coefficients");
    }
    let profile = if dim == 1 { profile.restrict_1d() } else { profile };
    Ok(Weight { profile, beta, dim })
}

impl Weight {
    pub fn profile(&self) -> &QuadraticProfile {
        &self.profile
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, p: Point) -> f64 {
        (self.beta * self.profile.value(p)).exp()
    }

    /// `∇φ = βe^{βψ}∇ψ`.
    pub fn gradient(&self, p: Point) -> [f64; 2] {
        let s = self.beta * self.value(p);
        let g = self.profile.gradient(p);
        [s * g[0], s * g[1]]
    }

    /// `Hφ = βe^{βψ}(Hψ + β∇ψ∇ψᵀ)`.
    pub fn hessian(&self, p: Point) -> [[f64; 2]; 2] {
        let s = self.beta * self.value(p);
        let g = self.profile.gradient(p);
        let h = self.profile.hessian();
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = s * (h[i][j] + self.beta * g[i] * g[j]);
            }
        }
        out
    }
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn quad_form(h: [[f64; 2]; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * (h[0][0] * b[0] + h[0][1] * b[1]) + a[1] * (h[1][0] * b[0] + h[1][1] * b[1])
}

fn norm(a: [f64; 2]) -> f64 {
    a[0].hypot(a[1])
}

/// A phase-space point `(x, ξ, τ)`. In 1D `ξ[1]` is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymbolPoint {
    pub x: Point,
    pub xi: [f64; 2],
    pub tau: f64,
}

impl SymbolPoint {
    /// `⟨ξ,τ⟩ = (|ξ|² + τ²)^{1/2}`.
    pub fn japanese(&self) -> f64 {
        (dot(self.xi, self.xi) + self.tau * self.tau).sqrt()
    }
}

/// `(Re p, Im p)` with `p = |ξ|² + 2iτ ξ·∇φ − τ²|∇φ|²`.
pub fn principal_symbol(weight: &Weight, point: &SymbolPoint) -> (f64, f64) {
    let g = weight.gradient(point.x);
    let t = point.tau;
    (dot(point.xi, point.xi) - t * t * dot(g, g), 2.0 * t * dot(point.xi, g))
}

/// `{Re p, Im p} = 4τ(ξᵀHφ ξ + τ² ∇φᵀHφ ∇φ)`.
pub fn poisson_bracket(weight: &Weight, point: &SymbolPoint) -> f64 {
    let g = weight.gradient(point.x);
    let h = weight.hessian(point.x);
    let t = point.tau;
    4.0 * t * (quad_form(h, point.xi, point.xi) + t * t * quad_form(h, g, g))
}

/// Points of `{p = 0}` above `x`: `ξ = ±τ|∇φ| n⊥` with `n⊥ ⟂ ∇φ`.
///
/// In 2D the orthogonal "circle" is the pair `±n⊥`; the `count` samples
/// alternate between them, so adjacent angular gaps are all `π`. In 1D the
/// set is empty.
pub fn characteristic_samples(weight: &Weight, x: Point, tau: f64, count: usize) -> Result<Vec<SymbolPoint>> {
    if !(tau.is_finite() && tau > 0.0) {
        return config(format!("tau must be positive and finite, got {tau}"));
    }
    let g = weight.gradient(x);
    let gn = norm(g);
    if gn == 0.0 || !gn.is_finite() {
        return Err(Error::Degenerate(format!(
            "∇φ vanishes at {x:?}; the characteristic set is not a circle"
        )));
    }
    if weight.dim() == 1 {
        return Ok(Vec::new());
    }
    let radius = tau * gn;
    let n = [-g[1] / gn, g[0] / gn];
    Ok((0..count)
        .map(|k| {
            let s = if k % 2 == 0 { radius } else { -radius };
            let mut xi = [s * n[0], s * n[1]];
            // remove roundoff along ∇φ
            let along = dot(xi, g) / (gn * gn);
            xi = [xi[0] - along * g[0], xi[1] - along * g[1]];
            SymbolPoint { x, xi, tau }
        })
        .collect())
}

/// Minimum of `bracket/⟨ξ,τ⟩³` over characteristic samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubellipticityReport {
    /// `None` when no characteristic (or near-characteristic) sample exists.
    pub margin: Option<f64>,
    pub argmin: Option<SymbolPoint>,
    pub evaluated: usize,
    pub threshold: f64,
    pub passed: bool,
}

impl SubellipticityReport {
    pub fn is_vacuous(&self) -> bool {
        self.margin.is_none()
    }
}

fn normalized(weight: &Weight, p: &SymbolPoint) -> f64 {
    poisson_bracket(weight, p) / p.japanese().powi(3)
}

/// Frequencies `ξ = τt`, `t ∈ [−T, T]`, that land in the shell
/// `|Re p| + |Im p| ≤ ε⟨ξ,τ⟩²` above a 1D point.
fn shell_samples(weight: &Weight, x: Point, tau: f64) -> Vec<SymbolPoint> {
    const STEPS: usize = 400;
    let g = weight.gradient(x)[0].abs();
    let span = 2.0 * (g + 1.0);
    (0..=STEPS)
        .map(|i| tau * span * (2.0 * i as f64 / STEPS as f64 - 1.0))
        .chain([tau * g, -tau * g])
        .map(|xi| SymbolPoint { x, xi: [xi, 0.0], tau })
        .filter(|p| {
            let (re, im) = principal_symbol(weight, p);
            re.abs() + im.abs() <= SHELL_WIDTH * p.japanese().powi(2)
        })
        .collect()
}

fn phase_samples(weight: &Weight, x: Point, tau: f64) -> Vec<SymbolPoint> {
    if norm(weight.gradient(x)) == 0.0 {
        // p = |ξ|² so the characteristic set over x is ξ = 0
        return vec![SymbolPoint { x, xi: [0.0, 0.0], tau }];
    }
    match weight.dim() {
        1 => shell_samples(weight, x, tau),
        _ => characteristic_samples(weight, x, tau, 2).unwrap_or_default(),
    }
}

/// Sub-ellipticity over `points × taus`; in 1D on near-characteristic shells.
pub fn subellipticity_margin(
    weight: &Weight,
    points: &[Point],
    taus: &[f64],
    threshold: f64,
) -> Result<SubellipticityReport> {
    if points.is_empty() || taus.is_empty() {
        return config("sub-ellipticity needs at least one sample point and one tau");
    }
    if let Some(t) = taus.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
        return config(format!("tau values must be positive and finite, got {t}"));
    }
    let jobs: Vec<(Point, f64)> = points.iter().flat_map(|x| taus.iter().map(move |t| (*x, *t))).collect();
    let evaluated: Vec<(usize, f64, SymbolPoint)> = jobs
        .par_iter()
        .enumerate()
        .flat_map_iter(|(i, (x, t))| {
            phase_samples(weight, *x, *t)
                .into_iter()
                .map(move |p| (i, normalized(weight, &p), p))
        })
        .collect();
    let best = evaluated.iter().min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let (margin, argmin) = match best {
        Some((_, m, p)) => (Some(*m), Some(*p)),
        None => (None, None),
    };
    let passed = margin.is_none_or(|m| m >= threshold);
    Ok(SubellipticityReport {
        margin,
        argmin,
        evaluated: evaluated.len(),
        threshold,
        passed,
    })
}

/// Stacked regions `U₁ = (a, b)`, `U₂ = (b, c)` along `x`, of height
/// `width` in 2D.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifierGeometry {
    pub dim: usize,
    pub inner: (f64, f64),
    pub outer_end: f64,
    /// `Ly` in 2D; ignored in 1D.
    pub width: f64,
}

/// Sample sets of a certifier geometry: closed regions and both boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSets {
    pub region_inner: Vec<Point>,
    pub region_outer: Vec<Point>,
    pub interface: Vec<Point>,
    pub boundary: Vec<Point>,
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (a + b)];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

impl CertifierGeometry {
    pub fn new(dim: usize, inner: (f64, f64), outer_end: f64, width: f64) -> Result<Self> {
        let g = CertifierGeometry {
            dim,
            inner,
            outer_end,
            width,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = self.inner;
        let c = self.outer_end;
        if self.dim != 1 && self.dim != 2 {
            return config(format!("certifier dimension must be 1 or 2, got {}", self.dim));
        }
        if !(a.is_finite() && b.is_finite() && c.is_finite() && a < b && b < c) {
            return config(format!("certifier regions need a < b < c, got a={a}, b={b}, c={c}"));
        }
        if self.dim == 2 && !(self.width.is_finite() && self.width > 0.0) {
            return config(format!("certifier width must be positive, got {}", self.width));
        }
        Ok(())
    }

    pub fn interface_x(&self) -> f64 {
        self.inner.1
    }

    /// `per_axis` points along each direction of each closed region, and as
    /// many on each boundary line.
    pub fn samples(&self, per_axis: usize) -> SampleSets {
        let n = per_axis.max(2);
        let (a, b) = self.inner;
        let c = self.outer_end;
        let ys = if self.dim == 2 {
            linspace(0.0, self.width, n)
        } else {
            vec![0.0]
        };
        let grid = |lo: f64, hi: f64| -> Vec<Point> {
            linspace(lo, hi, n)
                .into_iter()
                .flat_map(|x| ys.iter().map(move |y| [x, *y]))
                .collect()
        };
        SampleSets {
            region_inner: grid(a, b),
            region_outer: grid(b, c),
            interface: ys.iter().map(|y| [b, *y]).collect(),
            boundary: ys.iter().map(|y| [c, *y]).collect(),
        }
    }
}

/// `φ₁` lives on `U₁`, `φ₂` on `U₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightPair {
    pub inner: Weight,
    pub outer: Weight,
}

impl WeightPair {
    pub fn new(inner: Weight, outer: Weight) -> Result<Self> {
        if inner.dim() != outer.dim() {
            return config("weights of a pair must share a dimension");
        }
        Ok(WeightPair { inner, outer })
    }
}

/// Linear pair with unit gradients `−e_x`: `ψ₂ = c − x` with `β₂ = β`, and
/// `ψ₁ = (b + c)/2 − x` with `β₁ = 2β`, so that `φ₁ = φ₂` on `γ₀`.
///
/// On `γ₀` this gives `(∂νφ₁)² − (∂νφ₂)² − 1 = 3β²φ(b)² − 1`.
pub fn linear_family(geometry: &CertifierGeometry, beta: f64) -> Result<WeightPair> {
    geometry.validate()?;
    let b = geometry.interface_x();
    let c = geometry.outer_end;
    let outer = weight_from_profile(QuadraticProfile::linear(c, [-1.0, 0.0]), beta, geometry.dim)?;
    // 2β(k − b) = β(c − b)
    let k = b + 0.5 * (c - b);
    let inner = weight_from_profile(QuadraticProfile::linear(k, [-1.0, 0.0]), 2.0 * beta, geometry.dim)?;
    WeightPair::new(inner, outer)
}

/// Minimum margin of one hypothesis over its samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionMargin {
    pub name: String,
    /// For sign conditions the minimum of the quantity that must be
    /// positive; for continuity the maximum residual.
    pub value: f64,
    pub samples: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub conditions: Vec<ConditionMargin>,
    pub passed: bool,
}

impl ConditionReport {
    pub fn get(&self, name: &str) -> Option<&ConditionMargin> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

pub const GRADIENT_INNER: &str = "gradient_nonvanishing_u1";
pub const GRADIENT_OUTER: &str = "gradient_nonvanishing_u2";
pub const OUTER_BOUNDARY_SIGN: &str = "outer_boundary_normal_negative";
pub const INTERFACE_NORMAL_INNER: &str = "interface_normal_positive_phi1";
pub const INTERFACE_NORMAL_OUTER: &str = "interface_normal_positive_phi2";
pub const INTERFACE_INEQUALITY: &str = "interface_inequality";
pub const CONTINUITY: &str = "interface_continuity";

fn min_over(points: &[Point], f: impl Fn(Point) -> f64) -> f64 {
    points.iter().map(|p| f(*p)).fold(f64::INFINITY, f64::min)
}

fn positive(name: &str, points: &[Point], f: impl Fn(Point) -> f64) -> ConditionMargin {
    let value = min_over(points, f);
    ConditionMargin {
        name: name.into(),
        value,
        samples: points.len(),
        passed: value > 0.0,
    }
}

/// Evaluates every pointwise hypothesis on the given samples.
pub fn pointwise_conditions(pair: &WeightPair, samples: &SampleSets) -> ConditionReport {
    let (w1, w2) = (&pair.inner, &pair.outer);
    // ν = −e_x on γ₀, +e_x on γ
    let dn_interface = |w: &Weight, p: Point| -w.gradient(p)[0];
    let dn_boundary = |w: &Weight, p: Point| w.gradient(p)[0];
    let continuity = samples
        .interface
        .iter()
        .map(|p| (w1.value(*p) - w2.value(*p)).abs())
        .fold(0.0, f64::max);
    let conditions = vec![
        positive(GRADIENT_INNER, &samples.region_inner, |p| norm(w1.gradient(p))),
        positive(GRADIENT_OUTER, &samples.region_outer, |p| norm(w2.gradient(p))),
        positive(OUTER_BOUNDARY_SIGN, &samples.boundary, |p| -dn_boundary(w2, p)),
        positive(INTERFACE_NORMAL_INNER, &samples.interface, |p| dn_interface(w1, p)),
        positive(INTERFACE_NORMAL_OUTER, &samples.interface, |p| dn_interface(w2, p)),
        positive(INTERFACE_INEQUALITY, &samples.interface, |p| {
            dn_interface(w1, p).powi(2) - dn_interface(w2, p).powi(2) - 1.0
        }),
        ConditionMargin {
            name: CONTINUITY.into(),
            value: continuity,
            samples: samples.interface.len(),
            passed: continuity < CONTINUITY_TOLERANCE,
        },
    ];
    let passed = conditions.iter().all(|c| c.passed);
    ConditionReport { conditions, passed }
}

/// Full certificate of one weight pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub dim: usize,
    pub beta_inner: f64,
    pub beta_outer: f64,
    pub conditions: ConditionReport,
    pub subellipticity_inner: SubellipticityReport,
    pub subellipticity_outer: SubellipticityReport,
    pub passed: bool,
}

pub fn certify(
    pair: &WeightPair,
    geometry: &CertifierGeometry,
    per_axis: usize,
    taus: &[f64],
    threshold: f64,
) -> Result<Certificate> {
    geometry.validate()?;
    if pair.inner.dim() != geometry.dim {
        return config("weight dimension differs from the certifier geometry");
    }
    let samples = geometry.samples(per_axis);
    let conditions = pointwise_conditions(pair, &samples);
    let sub1 = subellipticity_margin(&pair.inner, &samples.region_inner, taus, threshold)?;
    let sub2 = subellipticity_margin(&pair.outer, &samples.region_outer, taus, threshold)?;
    let passed = conditions.passed && sub1.passed && sub2.passed;
    Ok(Certificate {
        dim: geometry.dim,
        beta_inner: pair.inner.beta(),
        beta_outer: pair.outer.beta(),
        conditions,
        subellipticity_inner: sub1,
        subellipticity_outer: sub2,
        passed,
    })
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn render_sub(out: &mut String, label: &str, r: &SubellipticityReport, dim: usize) {
    let margin = match r.margin {
        Some(m) => format!("{m:.6e}"),
        None if dim == 1 => "vacuous (no near-characteristic samples)".into(),
        None => "vacuous".into(),
    };
    let _ = writeln!(
        out,
        "{label:<36} {} margin={margin} threshold={:.1e} samples={}",
        verdict(r.passed),
        r.threshold,
        r.evaluated
    );
}

impl Certificate {
    /// Plain-text report, one line per condition.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "carleman certificate dim={} beta1={} beta2={} result={}",
            self.dim,
            self.beta_inner,
            self.beta_outer,
            verdict(self.passed)
        );
        for c in &self.conditions.conditions {
            let kind = if c.name == CONTINUITY {
                "max_residual"
            } else {
                "min_margin"
            };
            let _ = writeln!(
                out,
                "{:<36} {} {kind}={:.6e} samples={}",
                c.name,
                verdict(c.passed),
                c.value,
                c.samples
            );
        }
        render_sub(&mut out, "subellipticity_u1", &self.subellipticity_inner, self.dim);
        render_sub(&mut out, "subellipticity_u2", &self.subellipticity_outer, self.dim);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_quadratic(rng: &mut ChaCha8Rng) -> QuadraticProfile {
        let off = rng.random_range(-0.5..0.5);
        QuadraticProfile {
            constant: rng.random_range(-0.5..0.5),
            linear: [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
            hessian: [[rng.random_range(-1.0..1.0), off], [off, rng.random_range(-1.0..1.0)]],
        }
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn formula_instance_at_origin() {
        let w = weight_from_profile(QuadraticProfile::linear(0.0, [1.0, 0.0]), 1.0, 1).unwrap();
        assert_eq!(w.value([0.0, 0.0]), 1.0);
        assert_eq!(w.gradient([0.0, 0.0])[0], 1.0);
        assert_eq!(w.hessian([0.0, 0.0])[0][0], 1.0);
        assert!(weight_from_profile(QuadraticProfile::linear(0.0, [1.0, 0.0]), 0.0, 1).is_err());
    }

    #[test]
    fn evaluators_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = 1e-5;
        for _ in 0..200 {
            let w = weight_from_profile(random_quadratic(&mut rng), rng.random_range(0.5..3.0), 2).unwrap();
            let p = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
            let g = w.gradient(p);
            let hs = w.hessian(p);
            for j in 0..2 {
                let mut a = p;
                let mut b = p;
                a[j] += h;
                b[j] -= h;
                let fd = (w.value(a) - w.value(b)) / (2.0 * h);
                assert!(rel(fd, g[j]) < 1e-6 || (fd - g[j]).abs() < 1e-8, "{fd} vs {}", g[j]);
                let (ga, gb) = (w.gradient(a), w.gradient(b));
                for i in 0..2 {
                    let fd = (ga[i] - gb[i]) / (2.0 * h);
                    let scale = hs[i][j].abs().max(norm(g)).max(w.value(p));
                    assert!((fd - hs[i][j]).abs() < 1e-6 * scale, "{fd} vs {}", hs[i][j]);
                }
            }
            assert!(w.value(p) > 0.0);
        }
    }

    #[test]
    fn linear_profile_hessian_is_rank_one() {
        let w = weight_from_profile(QuadraticProfile::linear(0.1, [0.6, 0.8]), 2.5, 2).unwrap();
        let p = [0.3, 0.7];
        let s = 2.5 * 2.5 * w.value(p);
        let hs = w.hessian(p);
        let g = [0.6, 0.8];
        for i in 0..2 {
            for j in 0..2 {
                assert!(rel(hs[i][j], s * g[i] * g[j]) < 1e-14);
            }
        }
    }

    /// `{a, b} = Σ ∂_{ξ_j}a ∂_{x_j}b − ∂_{x_j}a ∂_{ξ_j}b` by central differences.
    fn fd_bracket(w: &Weight, p: &SymbolPoint) -> f64 {
        let re = |q: &SymbolPoint| principal_symbol(w, q).0;
        let im = |q: &SymbolPoint| principal_symbol(w, q).1;
        let mut acc = 0.0;
        for j in 0..w.dim() {
            let hx = 1e-6;
            let hxi = 1e-6 * p.xi[j].abs().max(p.tau);
            let shift = |dx: f64, dxi: f64| {
                let mut q = *p;
                q.x[j] += dx;
                q.xi[j] += dxi;
                q
            };
            let d_xi = |f: &dyn Fn(&SymbolPoint) -> f64| (f(&shift(0.0, hxi)) - f(&shift(0.0, -hxi))) / (2.0 * hxi);
            let d_x = |f: &dyn Fn(&SymbolPoint) -> f64| (f(&shift(hx, 0.0)) - f(&shift(-hx, 0.0))) / (2.0 * hx);
            acc += d_xi(&re) * d_x(&im) - d_x(&re) * d_xi(&im);
        }
        acc
    }

    #[test]
    fn bracket_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..300 {
            let w = weight_from_profile(random_quadratic(&mut rng), rng.random_range(0.5..2.0), 2).unwrap();
            let tau = rng.random_range(1.0..10.0);
            let p = SymbolPoint {
                x: [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)],
                xi: [rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)],
                tau,
            };
            let exact = poisson_bracket(&w, &p);
            let fd = fd_bracket(&w, &p);
            let scale = p.japanese().powi(3) * w.value(p.x).powi(3).max(1.0);
            assert!(
                (exact - fd).abs() < 1e-6 * exact.abs().max(1e-3 * scale),
                "{exact} vs {fd}"
            );
        }
    }

    #[test]
    fn bracket_on_characteristic_set_of_linear_weight() {
        let beta = 3.0;
        let w = weight_from_profile(QuadraticProfile::linear(0.2, [0.0, -1.0]), beta, 2).unwrap();
        let x = [0.4, 0.1];
        let psi = 0.2 - 0.1;
        for p in characteristic_samples(&w, x, 7.0, 4).unwrap() {
            let expected = 4.0 * 7f64.powi(3) * beta.powi(4) * (3.0 * beta * psi).exp();
            assert!(rel(poisson_bracket(&w, &p), expected) < 1e-12);
        }
    }

    #[test]
    fn affine_weight_has_zero_bracket() {
        // β → 0 scaling: Hφ = O(β²) vanishes to roundoff at β = 1e-9.
        let w = weight_from_profile(QuadraticProfile::linear(0.0, [1.0, 0.0]), 1e-9, 2).unwrap();
        let p = SymbolPoint {
            x: [0.5, 0.5],
            xi: [1.0, 2.0],
            tau: 3.0,
        };
        assert!(poisson_bracket(&w, &p).abs() < 1e-15);
    }

    #[test]
    fn characteristic_samples_lie_on_the_set() {
        let w = weight_from_profile(QuadraticProfile::linear(0.0, [1.0, 0.0]), 1.0, 2).unwrap();
        let pts = characteristic_samples(&w, [0.0, 0.3], 1.0, 2).unwrap();
        assert!((pts[0].xi[0]).abs() < 1e-15 && (pts[0].xi[1] - 1.0).abs() < 1e-15);
        assert!((pts[1].xi[1] + 1.0).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let w = weight_from_profile(random_quadratic(&mut rng), rng.random_range(0.5..2.0), 2).unwrap();
            let x = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
            let tau = rng.random_range(1.0..100.0);
            let pts = characteristic_samples(&w, x, tau, 16).unwrap();
            assert_eq!(pts.len(), 16);
            let angle = |p: &SymbolPoint| p.xi[1].atan2(p.xi[0]);
            for pair in pts.windows(2) {
                let gap = (angle(&pair[1]) - angle(&pair[0])).rem_euclid(2.0 * std::f64::consts::PI);
                assert!((gap - std::f64::consts::PI).abs() < 1e-12);
            }
            for p in &pts {
                let (re, im) = principal_symbol(&w, p);
                let scale = p.japanese().powi(2);
                assert!(re.abs() < 1e-10 * scale && im.abs() < 1e-10 * scale);
            }
        }
    }

    #[test]
    fn critical_point_is_degenerate() {
        let profile = QuadraticProfile {
            constant: 0.0,
            linear: [-0.5, -0.5],
            hessian: [[1.0, 0.0], [0.0, 1.0]],
        };
        let w = weight_from_profile(profile, 1.0, 2).unwrap();
        let err = characteristic_samples(&w, [0.5, 0.5], 1.0, 2).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
        let r = subellipticity_margin(&w, &[[0.5, 0.5], [0.2, 0.9]], &DEFAULT_TAUS, DEFAULT_MARGIN_THRESHOLD).unwrap();
        assert!(r.margin.unwrap() <= 0.0 && !r.passed);
        assert_eq!(r.argmin.unwrap().x, [0.5, 0.5]);

        let geometry = CertifierGeometry::new(2, (0.0, 0.5), 1.0, 1.0).unwrap();
        let samples = geometry.samples(11);
        let pair = WeightPair::new(w, w).unwrap();
        let report = pointwise_conditions(&pair, &samples);
        assert!(!report.get(GRADIENT_OUTER).unwrap().passed || !report.get(GRADIENT_INNER).unwrap().passed);
    }

    #[test]
    fn linear_family_margin_matches_closed_form() {
        let beta = 8.0;
        let w = weight_from_profile(QuadraticProfile::linear(1.0, [-1.0, 0.0]), beta, 2).unwrap();
        let pts: Vec<Point> = (0..=10).map(|i| [0.5 + 0.05 * i as f64, 0.3]).collect();
        let r = subellipticity_margin(&w, &pts, &[10.0, 100.0], 0.0).unwrap();
        let closed = |psi: f64| {
            4.0 * beta.powi(4) * (3.0 * beta * psi).exp() / (1.0 + beta * beta * (2.0 * beta * psi).exp()).powf(1.5)
        };
        let expected = pts.iter().map(|p| closed(1.0 - p[0])).fold(f64::INFINITY, f64::min);
        assert!(rel(r.margin.unwrap(), expected) < 1e-10);
    }

    #[test]
    fn bracket_is_homogeneous_of_degree_three() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let w = weight_from_profile(random_quadratic(&mut rng), 1.5, 2).unwrap();
            let x = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
            let base = characteristic_samples(&w, x, 10.0, 1).unwrap()[0];
            let reference = normalized(&w, &base);
            for tau in [100.0, 1000.0] {
                let p = characteristic_samples(&w, x, tau, 1).unwrap()[0];
                assert!(rel(normalized(&w, &p), reference) < 1e-8);
            }
        }
    }

    #[test]
    fn one_dimensional_example_certifies() {
        let geometry = CertifierGeometry::new(1, (0.5, 0.7), 1.0, 0.0).unwrap();
        let inner = weight_from_profile(QuadraticProfile::linear(1.7, [-2.0, 0.0]), 1.0, 1).unwrap();
        let outer = weight_from_profile(QuadraticProfile::linear(1.0, [-1.0, 0.0]), 1.0, 1).unwrap();
        let pair = WeightPair::new(inner, outer).unwrap();
        let cert = certify(&pair, &geometry, 21, &DEFAULT_TAUS, DEFAULT_MARGIN_THRESHOLD).unwrap();
        let ineq = cert.conditions.get(INTERFACE_INEQUALITY).unwrap();
        assert!(ineq.passed && (ineq.value - (3.0 * 0.6f64.exp() - 1.0)).abs() < 1e-12);
        assert!(cert.passed, "{}", cert.render());
        assert!(cert.subellipticity_inner.is_vacuous());
    }

    #[test]
    fn equal_weights_fail_the_interface_inequality() {
        let geometry = CertifierGeometry::new(2, (0.0, 0.5), 1.0, 1.0).unwrap();
        let w = weight_from_profile(QuadraticProfile::linear(1.0, [-1.0, 0.0]), 2.0, 2).unwrap();
        let report = pointwise_conditions(&WeightPair::new(w, w).unwrap(), &geometry.samples(9));
        let c = report.get(INTERFACE_INEQUALITY).unwrap();
        assert_eq!(c.value, -1.0);
        assert!(!c.passed && !report.passed);
    }

    #[test]
    fn linear_family_passes_and_margin_grows_with_beta() {
        let geometry = CertifierGeometry::new(2, (0.0, 0.5), 1.0, 1.0).unwrap();
        let mut last = f64::NEG_INFINITY;
        for beta in [1.0, 2.0, 4.0, 8.0] {
            let pair = linear_family(&geometry, beta).unwrap();
            let cert = certify(&pair, &geometry, 9, &DEFAULT_TAUS, DEFAULT_MARGIN_THRESHOLD).unwrap();
            let m = cert
                .subellipticity_inner
                .margin
                .unwrap()
                .min(cert.subellipticity_outer.margin.unwrap());
            assert!(m > last);
            last = m;
            if beta == 8.0 {
                assert!(cert.passed, "{}", cert.render());
                let ineq = cert.conditions.get(INTERFACE_INEQUALITY).unwrap().value;
                assert!(rel(ineq, 3.0 * beta * beta * beta.exp() - 1.0) < 1e-12);
            }
        }
    }
}
