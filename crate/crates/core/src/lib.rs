//! Feedback stabilization workbench for bilinear systems `x' = Ax + u(t)Bx`.
//!
//! The crate is organised bottom-up:
//!
//! * [`space`]: norms, pairings and duality-map selections for the state spaces
//!   (finite-dimensional, spectral L², wave energy space, grid L¹/L²/sup).
//! * [`models`]: the catalog of `(A, B)` pairs with exact semigroup evolution.
//! * [`feedback`]: the feedback-law families (quadratic, homogeneous, normalized,
//!   finite/fixed/prescribed-time, delayed switch, additive linear).
//! * [`integrator`]: closed-loop Lie splitting with extinction handling.
//! * [`analysis`]: decay fits, settling times, observability estimates and the
//!   lemma oracles used to check the quantitative claims.

pub mod analysis;
pub mod error;
pub mod feedback;
pub mod integrator;
pub mod models;
pub mod space;

pub use error::{Error, Result};
pub use feedback::{Control, FeedbackLaw};
pub use integrator::{simulate, step, Sample, SimOptions, Trajectory};
pub use models::{Model, ModelSpec};
pub use space::{DualityElement, SpaceDescriptor, StateVector};
