//! Feedback laws `u = u(x, t)` for the closed loop `x' = Ax + u·Bx`.
//!
//! `V` below always denotes `b_form(x) = ⟨Bx, J(x)⟩`. The finite-time family
//! switches the whole control off where `V = 0` (the singular power is not
//! defined there); the non-invariant law keeps its constant part.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::models::Model;
use crate::space::StateVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum FeedbackLaw {
    Zero,
    /// `u = −⟨z, Bz⟩`.
    QuadraticV0,
    /// `u = −⟨z, Bz⟩ / ‖z‖^r`, `r < 2`.
    HomogeneousVr {
        r: f64,
    },
    /// `u = −λ ⟨Bz, J(z)⟩ / ‖z‖²`.
    NormalizedBanach {
        lambda: f64,
    },
    /// `u = −shift/β − V^{−μ}`.
    FiniteTime {
        mu: f64,
        shift: f64,
    },
    /// `u = −shift/β − V^{−μ} − V^{μ}`.
    FixedTime {
        mu: f64,
        shift: f64,
    },
    /// `u = −shift/β − ρ(V^{−μ} + V^{μ})`.
    PrescribedTime {
        mu: f64,
        rho: f64,
        shift: f64,
    },
    /// `u = −α − V^{−μ}·1_{Bx≠0}`.
    NonInvariantFt {
        mu: f64,
        alpha: f64,
    },
    /// Zero on `[0, τ]`, `inner` afterwards.
    DelayedSwitch {
        tau: f64,
        inner: Box<FeedbackLaw>,
    },
    /// Additive control `v = −(ω₀/α²)L*x − ‖L*x‖^{−2μ}L*x` (and `−‖L*x‖^{2μ}L*x`
    /// when `fixed_time`), acting through `B = LL*`.
    LinearFt {
        mu: f64,
        omega0: f64,
        alpha_coerc: f64,
        fixed_time: bool,
    },
}

/// Value of a feedback law: a scalar bilinear control, or the vector control
/// of the additive linear law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Control {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Control {
    /// The scalar `u` printed in trajectories (vector controls report their norm).
    pub fn magnitude(&self) -> f64 {
        match self {
            Control::Scalar(u) => *u,
            Control::Vector(v) => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
        }
    }
}

/// Gain `ρ = π / (4 T μ β^{1−μ})` that makes the fixed-time bound equal `T`.
pub fn prescribed_rho(t_target: f64, mu: f64, beta: f64) -> f64 {
    PI / (4.0 * t_target * mu * beta.powf(1.0 - mu))
}

fn check_mu(mu: f64) -> Result<()> {
    if !(mu > 0.0 && mu < 0.5) {
        return Err(Error::validation("mu", format!("must lie in (0, 1/2), got {mu}")));
    }
    Ok(())
}

fn check_positive(field: &str, x: f64) -> Result<()> {
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::validation(field, format!("must be finite and > 0, got {x}")));
    }
    Ok(())
}

fn check_nonneg(field: &str, x: f64) -> Result<()> {
    if !(x.is_finite() && x >= 0.0) {
        return Err(Error::validation(field, format!("must be finite and ≥ 0, got {x}")));
    }
    Ok(())
}

impl FeedbackLaw {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Zero => "zero",
            Self::QuadraticV0 => "quadratic_v0",
            Self::HomogeneousVr { .. } => "homogeneous_vr",
            Self::NormalizedBanach { .. } => "normalized_banach",
            Self::FiniteTime { .. } => "finite_time",
            Self::FixedTime { .. } => "fixed_time",
            Self::PrescribedTime { .. } => "prescribed_time",
            Self::NonInvariantFt { .. } => "noninvariant_ft",
            Self::DelayedSwitch { .. } => "delayed_switch",
            Self::LinearFt { .. } => "linear_ft",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Zero | Self::QuadraticV0 => Ok(()),
            Self::HomogeneousVr { r } => {
                if !(r.is_finite() && *r < 2.0) {
                    return Err(Error::validation("r", format!("must be finite and < 2, got {r}")));
                }
                Ok(())
            }
            Self::NormalizedBanach { lambda } => check_positive("lambda", *lambda),
            Self::FiniteTime { mu, shift } | Self::FixedTime { mu, shift } => {
                check_mu(*mu)?;
                check_nonneg("shift", *shift)
            }
            Self::PrescribedTime { mu, rho, shift } => {
                check_mu(*mu)?;
                check_positive("rho", *rho)?;
                check_nonneg("shift", *shift)
            }
            Self::NonInvariantFt { mu, alpha } => {
                check_mu(*mu)?;
                if !alpha.is_finite() {
                    return Err(Error::validation("alpha", "must be finite"));
                }
                Ok(())
            }
            Self::DelayedSwitch { tau, inner } => {
                check_nonneg("tau", *tau)?;
                if matches!(**inner, Self::DelayedSwitch { .. }) {
                    return Err(Error::validation("inner", "nested delayed switches are not supported"));
                }
                inner.validate()
            }
            Self::LinearFt {
                mu,
                omega0,
                alpha_coerc,
                ..
            } => {
                check_mu(*mu)?;
                check_nonneg("omega0", *omega0)?;
                check_positive("alpha_coerc", *alpha_coerc)
            }
        }
    }

    /// Checks that the law can be evaluated on `model`.
    pub fn validate_for(&self, model: &Model) -> Result<()> {
        self.validate()?;
        match self {
            Self::FiniteTime { shift, .. } | Self::FixedTime { shift, .. } | Self::PrescribedTime { shift, .. }
                if *shift > 0.0 && model.beta() <= 0.0 =>
            {
                Err(Error::validation(
                    "shift",
                    "a positive shift needs a coercive B (β > 0) to divide by",
                ))
            }
            Self::DelayedSwitch { inner, .. } => inner.validate_for(model),
            Self::LinearFt { .. } => model.l_adjoint(&StateVector::zeros(model.space())).map(|_| ()),
            _ => Ok(()),
        }
    }

    /// The law in force at time `t` (unwraps an active delayed switch).
    pub fn active_at(&self, t: f64) -> Option<&FeedbackLaw> {
        match self {
            Self::DelayedSwitch { tau, inner } => (t > *tau).then_some(&**inner),
            other => Some(other),
        }
    }

    /// Switching instant of a delayed switch.
    pub fn switch_time(&self) -> Option<f64> {
        match self {
            Self::DelayedSwitch { tau, .. } => Some(*tau),
            _ => None,
        }
    }

    /// Whether the law belongs to the finite-time family (singular at `V → 0`).
    pub fn is_finite_time(&self) -> bool {
        match self {
            Self::FiniteTime { .. }
            | Self::FixedTime { .. }
            | Self::PrescribedTime { .. }
            | Self::NonInvariantFt { .. }
            | Self::LinearFt { .. } => true,
            Self::DelayedSwitch { inner, .. } => inner.is_finite_time(),
            _ => false,
        }
    }

    /// Closed-form remaining time to extinction for a state `x ∈ ker(B)⊥` with
    /// `‖x‖ = norm`, obtained from `d‖x‖²/dt ≤ −2ρ(β^{1−μ}‖x‖^{2−2μ} + …)`.
    ///
    /// This is an upper bound in general and exact when `B = β·Id` on
    /// `ker(B)⊥` and the shift cancels `A`. `None` when the law has no such
    /// estimate (non-finite-time laws, the non-invariant law, or an
    /// insufficient shift).
    pub fn predicted_extinction(&self, model: &Model, norm: f64, t: f64) -> Option<f64> {
        let beta = model.beta();
        if beta <= 0.0 {
            return None;
        }
        let v = norm * norm;
        let fts = |mu: f64| v.powf(mu) / (2.0 * mu * beta.powf(1.0 - mu));
        let fxts = |mu: f64, rho: f64| {
            let a = 2.0 * rho * beta.powf(1.0 - mu);
            let b = 2.0 * rho * beta.powf(1.0 + mu);
            crate::analysis::parsegov_extinction_time(a, b, mu, v).0
        };
        let shift_ok = |s: f64| s >= model.omega0();
        match self.active_at(t)? {
            Self::FiniteTime { mu, shift } if shift_ok(*shift) => Some(fts(*mu)),
            Self::FixedTime { mu, shift } if shift_ok(*shift) => Some(fxts(*mu, 1.0)),
            Self::PrescribedTime { mu, rho, shift } if shift_ok(*shift) => Some(fxts(*mu, *rho)),
            Self::LinearFt {
                mu,
                omega0,
                alpha_coerc,
                fixed_time,
            } if *omega0 / (alpha_coerc * alpha_coerc) * beta >= model.omega0() => {
                Some(if *fixed_time { fxts(*mu, 1.0) } else { fts(*mu) })
            }
            _ => None,
        }
    }

    /// Control value with the exact zero test `x = 0`.
    pub fn control_value(&self, model: &Model, x: &StateVector, t: f64) -> Result<Control> {
        model.space().check(x)?;
        self.evaluate(model, x, t, 0.0)
    }

    /// Control value where states with `‖x‖ ≤ zero_tol` count as the origin.
    pub fn evaluate(&self, model: &Model, x: &StateVector, t: f64, zero_tol: f64) -> Result<Control> {
        if let Self::LinearFt { .. } = self {
            let w = model.l_adjoint(x)?;
            let c = self.multiplier(model, x, t, zero_tol);
            return Ok(Control::Vector(w.into_iter().map(|z| c * z).collect()));
        }
        if let Self::DelayedSwitch { tau, inner } = self {
            if t <= *tau {
                return Ok(match **inner {
                    Self::LinearFt { .. } => Control::Vector(vec![0.0; model.l_adjoint(x)?.len()]),
                    _ => Control::Scalar(0.0),
                });
            }
            return inner.evaluate(model, x, t, zero_tol);
        }
        Ok(Control::Scalar(self.multiplier(model, x, t, zero_tol)))
    }

    /// The scalar `u` with `x' = Ax + u·Bx` (for the linear law, the factor
    /// `c` with `Lv = c·Bx`).
    pub fn multiplier(&self, model: &Model, x: &StateVector, t: f64, zero_tol: f64) -> f64 {
        let norm = crate::space::norm_unchecked(model.space(), x.coeffs());
        if norm <= zero_tol {
            return 0.0;
        }
        let v = || model.b_form_unchecked(x.coeffs());
        let shifted = |shift: f64| if shift == 0.0 { 0.0 } else { shift / model.beta() };
        match self {
            Self::Zero => 0.0,
            Self::QuadraticV0 => -v(),
            Self::HomogeneousVr { r } => -v() / norm.powf(*r),
            Self::NormalizedBanach { lambda } => -lambda * v() / (norm * norm),
            Self::FiniteTime { mu, shift } => {
                let v = v();
                if v <= 0.0 {
                    0.0
                } else {
                    -shifted(*shift) - v.powf(-mu)
                }
            }
            Self::FixedTime { mu, shift } => {
                let v = v();
                if v <= 0.0 {
                    0.0
                } else {
                    -shifted(*shift) - (v.powf(-mu) + v.powf(*mu))
                }
            }
            Self::PrescribedTime { mu, rho, shift } => {
                let v = v();
                if v <= 0.0 {
                    0.0
                } else {
                    -shifted(*shift) - rho * (v.powf(-mu) + v.powf(*mu))
                }
            }
            Self::NonInvariantFt { mu, alpha } => {
                let v = v();
                -alpha - if v > 0.0 { v.powf(-mu) } else { 0.0 }
            }
            Self::DelayedSwitch { tau, inner } => {
                if t <= *tau {
                    0.0
                } else {
                    inner.multiplier(model, x, t, zero_tol)
                }
            }
            Self::LinearFt {
                mu,
                omega0,
                alpha_coerc,
                fixed_time,
            } => {
                let v = v();
                if v <= 0.0 {
                    return 0.0;
                }
                let mut c = -omega0 / (alpha_coerc * alpha_coerc) - v.powf(-mu);
                if *fixed_time {
                    c -= v.powf(*mu);
                }
                c
            }
        }
    }
}
