//! Desk-scale simulation of the saturation attack on Gaussian-modulated
//! coherent-state CV-QKD, and of the Gaussian post-selection
//! counter-measure.
//!
//! The crate models the full loop:
//!
//! * [`units`] — shot-noise conventions, system profiles, channel geometry,
//!   reproducible RNG streams;
//! * [`protocol`] — Gaussian modulation, the linear channel, shot-noise
//!   calibration, covariance-based parameter estimation;
//! * [`detector`] — the clamp model of a practical homodyne front-end and
//!   its LO-sweep characterization;
//! * [`attack`] — the intercept-resend + displacement chain, closed-form
//!   biased estimates, and the displacement/gain solvers, each
//!   cross-validated against the Monte Carlo chain;
//! * [`keyrate`] — collective-attack key rates and null-key thresholds in
//!   the realistic model, with the closed Holevo form checked against
//!   [`symplectic`], a generic covariance-matrix oracle;
//! * [`countermeasure`] — radical and Gaussian post-selection;
//! * [`harness`] — scenario pipelines, figure reproduction and report
//!   emission behind the `cvqkd-sim` CLI;
//! * [`acceptance`] — the runnable acceptance suite.
//!
//! A narrative guide with runnable examples lives in `book/`; its code
//! blocks compile as doc-tests through the crate's internal guide module.

// `!(x > 0.0)` guards are deliberate: unlike `x <= 0.0` they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::doc_lazy_continuation)]

pub mod acceptance;
pub mod attack;
pub mod countermeasure;
pub mod detector;
pub mod error;
pub mod harness;
pub mod keyrate;
pub mod numeric;
pub mod protocol;
pub mod symplectic;
pub mod units;

mod guide;

pub use error::{Error, Result};
