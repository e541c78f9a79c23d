//! Quantitative checks on models and trajectories.
//!
//! * [`fit`]: decay-rate regression and settling times.
//! * [`observability`]: sampled observation constants `δ̂`.
//! * [`lemmas`]: the sequence-recurrence and Parsegov oracles.
//! * [`diagnostics`]: finite-time obstruction test, `(𝒜₂)` Lipschitz check,
//!   weak-convergence and contraction-ratio reports.

pub mod diagnostics;
pub mod fit;
pub mod lemmas;
pub mod observability;

pub use diagnostics::{
    contraction_ratio_report, fts_necessary_check, noninvariant_bounds, verify_a2, weak_report, A2Report,
    ContractionReport, FtsVerdict, WeakReport,
};
pub use fit::{fit_decay, fit_decay_window, fit_series, settling_time, DecayKind, RateFit};
pub use lemmas::{parsegov_extinction_time, parsegov_numeric, sequence_lemma_oracle, LemmaVerdict};
pub use observability::{observability_estimate, observation_integral, ObservabilityEstimate};
