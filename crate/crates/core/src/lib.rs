//! A modal laboratory for the hinged Euler–Bernoulli plate with localized
//! structural damping `∂t²u + Δ²u − div(a(x)∇∂t u) = 0`, `a = d·1_ω`.
//!
//! * [`model`]: geometry, the sine eigenbasis, damping and generator assembly.
//! * [`evolution`]: exact and implicit-midpoint semigroup evolution, energy traces, decay fits.
//! * [`spectra`]: spectrum of the quadratic pencil and resolvent norms on the imaginary axis.
//! * [`transmission`]: resolvent solves recast as a transmission problem across the interface.
//! * [`carleman`]: certification of Carleman weight pairs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod carleman;
pub mod error;
pub mod evolution;
pub mod fit;
pub mod linalg;
pub mod model;
pub mod spectra;
pub mod transmission;

pub use carleman::{Certificate, QuadraticProfile, Weight, WeightPair};
pub use error::{Error, Result};
pub use evolution::{DecayFitReport, EnergyTrace, Method, Trajectory};
pub use linalg::C64;
pub use model::{DampingRegion, FieldOrder, Geometry, ModalBasis, ModalOperators, PlateModel, Point, State};
pub use spectra::{ResolventSweep, SpectrumReport};
pub use transmission::ResolventCase;
