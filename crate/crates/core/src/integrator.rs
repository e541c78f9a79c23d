//! Closed-loop time stepping by Lie splitting.
//!
//! One step of length `dt` applies the exact semigroup `S(dt)` and then solves
//! the feedback part `x' = u(x, t)·Bx` exactly along the curve `exp(θB)x`:
//! only the scalar control phase `θ' = u(exp(θB)x, t)` is integrated
//! numerically (classical RK4). Step sizes shrink as `|u|` grows, and the
//! finite-time laws land exactly on zero when their closed-form norm estimate
//! predicts extinction inside the next nominal step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feedback::FeedbackLaw;
use crate::models::{Model, ModelSpec, Propagator};
use crate::space::StateVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub dt_max: f64,
    pub horizon: f64,
    /// Relative extinction threshold (fraction of `‖x0‖`).
    pub eps_ext: f64,
    pub record_stride: usize,
    pub weak_functionals: usize,
    pub courant_cap: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            dt_max: 0.01,
            horizon: 1.0,
            eps_ext: 1e-12,
            record_stride: 1,
            weak_functionals: 5,
            courant_cap: 0.1,
        }
    }
}

impl SimOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_max.is_finite() && self.dt_max > 0.0) {
            return Err(Error::validation("dt_max", "must be finite and > 0"));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::validation("horizon", "must be finite and > 0"));
        }
        if !(self.eps_ext > 0.0 && self.eps_ext <= 1e-6) {
            return Err(Error::validation("eps_ext", "must lie in (0, 1e-6]"));
        }
        if self.record_stride == 0 {
            return Err(Error::validation("record_stride", "must be ≥ 1"));
        }
        if !(self.courant_cap.is_finite() && self.courant_cap > 0.0) {
            return Err(Error::validation("courant_cap", "must be finite and > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub norm: f64,
    pub control: f64,
    pub b_form: f64,
    pub obs: Vec<f64>,
}

/// Parameter echo attached to every trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimManifest {
    pub model: ModelSpec,
    pub law: FeedbackLaw,
    pub options: SimOptions,
    pub beta: f64,
    pub omega0: f64,
    pub x0_norm: f64,
    /// Absolute extinction threshold `eps_ext·‖x0‖`.
    pub eps_abs: f64,
    pub steps: usize,
    pub observables: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    /// First time the full state was set to zero.
    pub extinction_time: Option<f64>,
    /// First time the `ker(B)⊥` component was set to zero while a kernel
    /// component remained.
    pub b_extinction_time: Option<f64>,
    pub final_state: StateVector,
    pub manifest: SimManifest,
    /// Largest per-step increase `(‖x_{k+1}‖ − ‖x_k‖)/‖x0‖` over all steps.
    pub max_norm_increase: f64,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn norms(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.norm).collect()
    }

    pub fn final_norm(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.norm)
    }

    /// Norm at time `t`, linearly interpolated between recorded samples.
    pub fn norm_at(&self, t: f64) -> Option<f64> {
        let s = &self.samples;
        if s.is_empty() || t < s[0].t || t > s[s.len() - 1].t * (1.0 + 1e-12) + 1e-12 {
            return None;
        }
        let i = s.partition_point(|p| p.t < t);
        if i == 0 {
            return Some(s[0].norm);
        }
        if i >= s.len() {
            return Some(s[s.len() - 1].norm);
        }
        let (a, b) = (&s[i - 1], &s[i]);
        let w = (t - a.t) / (b.t - a.t);
        Some(a.norm + w * (b.norm - a.norm))
    }
}

/// Solves `x' = u·Bx` on `[t0, t0 + h]` from `y` with one RK4 step for the
/// control phase. Time-dependence of the law is sampled at the midpoint.
fn feedback_rk4(
    model: &Model,
    law: &FeedbackLaw,
    y: &StateVector,
    t0: f64,
    h: f64,
    zero_tol: f64,
) -> (StateVector, f64) {
    let tm = t0 + 0.5 * h;
    let f = |theta: f64| law.multiplier(model, &model.b_flow(y, theta), tm, zero_tol);
    let k1 = f(0.0);
    let k2 = f(0.5 * h * k1);
    let k3 = f(0.5 * h * k2);
    let k4 = f(h * k3);
    let theta = h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    (model.b_flow(y, theta), k1)
}

fn courant_dt(opts_cap: f64, u: f64, b_norm: f64) -> f64 {
    if u == 0.0 {
        f64::INFINITY
    } else {
        opts_cap / (u.abs() * b_norm.max(1.0))
    }
}

struct Stepper<'a> {
    model: &'a Model,
    law: &'a FeedbackLaw,
    cap: f64,
    zero_tol: f64,
    b_norm: f64,
    cached: Option<Propagator>,
}

impl Stepper<'_> {
    fn propagate(&mut self, x: &StateVector, dt: f64) -> Result<StateVector> {
        let hit = self.cached.as_ref().is_some_and(|p| p.dt() == dt);
        if !hit {
            self.cached = Some(self.model.propagator(dt)?);
        }
        Ok(self.cached.as_ref().expect("cached").apply(x))
    }

    /// Feedback substep on `[t0, t0 + dt]`, subdivided so that each RK4 stage
    /// respects the Courant cap and the switching instant. Returns the new state
    /// and, if the finite-time law extinguished it, the extinction instant.
    fn feedback_subdivided(&self, y: &StateVector, t0: f64, dt: f64, land: bool) -> (StateVector, Option<f64>) {
        let mut y = y.clone();
        let mut s = t0;
        let end = t0 + dt;
        while end - s > 1e-15 * end.abs().max(1.0) {
            let mut h = end - s;
            if let Some(tau) = self.law.switch_time() {
                if s < tau && tau < s + h {
                    h = tau - s;
                }
            }
            let active = self.law.active_at(s + 0.5 * h);
            if active.is_none() {
                s += h;
                continue;
            }
            let u = self.law.multiplier(self.model, &y, s + 0.5 * h, self.zero_tol);
            if land && u != 0.0 {
                if let Some(tr) = self.landing(&y, s, end - s) {
                    return (StateVector::zeros(self.model.space()), Some(s + tr));
                }
            }
            h = h.min(courant_dt(self.cap, u, self.b_norm));
            let (next, _) = feedback_rk4(self.model, self.law, &y, s, h, self.zero_tol);
            y = next;
            s += h;
            if land && self.law.active_at(s - 0.5 * h).is_some_and(|l| l.is_finite_time()) {
                let n = crate::space::norm_unchecked(self.model.space(), y.coeffs());
                if n <= self.zero_tol {
                    return (StateVector::zeros(self.model.space()), Some(s));
                }
            }
        }
        (y, None)
    }

    /// Remaining time to extinction when it falls inside `window`, for a
    /// finite-time law acting on a state in `ker(B)⊥`.
    fn landing(&self, x: &StateVector, t: f64, window: f64) -> Option<f64> {
        let active = self.law.active_at(t + 0.5 * window)?;
        if !active.is_finite_time() || !self.model.space().is_hilbert() {
            return None;
        }
        if self.model.b_form_unchecked(x.coeffs()) <= 0.0 {
            return None;
        }
        let (ker, perp) = self.model.kernel_b_projection(x).ok()?;
        if !ker.is_zero() && self.model.norm(&ker).ok()? > self.zero_tol {
            return None;
        }
        let n = self.model.norm(&perp).ok()?;
        let tr = self.law.predicted_extinction(self.model, n, t + 0.5 * window)?;
        (tr <= window).then_some(tr)
    }
}

/// One splitting step `x ↦ Φ_feedback(dt) ∘ S(dt) x` starting at time `t`.
///
/// Transport models need `dt` to be a whole number of cells.
pub fn step(model: &Model, law: &FeedbackLaw, x: &StateVector, t: f64, dt: f64) -> Result<StateVector> {
    model.space().check(x)?;
    if dt == 0.0 {
        return Ok(x.clone());
    }
    let y = model.semigroup_apply(x, dt)?;
    if matches!(law, FeedbackLaw::Zero) {
        return Ok(y);
    }
    let stepper = Stepper {
        model,
        law,
        cap: SimOptions::default().courant_cap,
        zero_tol: 0.0,
        b_norm: model.b_norm(),
        cached: None,
    };
    if model.is_transport() {
        Ok(stepper.feedback_subdivided(&y, t, dt, false).0)
    } else {
        Ok(feedback_rk4(model, law, &y, t, dt, 0.0).0)
    }
}

struct Recorder<'a> {
    model: &'a Model,
    law: &'a FeedbackLaw,
    k: usize,
    zero_tol: f64,
    samples: Vec<Sample>,
}

impl Recorder<'_> {
    fn push(&mut self, t: f64, x: &StateVector) -> Result<()> {
        if let Some(last) = self.samples.last() {
            if t <= last.t {
                return Ok(());
            }
        }
        let control = self.law.evaluate(self.model, x, t, self.zero_tol)?.magnitude();
        self.samples.push(Sample {
            t,
            norm: self.model.norm(x)?,
            control,
            b_form: self.model.b_form(x)?,
            obs: self.model.observables(x, self.k),
        });
        Ok(())
    }
}

/// Runs the closed loop from `x0` over `[0, opts.horizon]`.
pub fn simulate(model: &Model, law: &FeedbackLaw, x0: &StateVector, opts: &SimOptions) -> Result<Trajectory> {
    opts.validate()?;
    law.validate_for(model)?;
    model.space().check(x0)?;
    if !x0.is_finite() {
        return Err(Error::validation("x0", "entries must be finite"));
    }
    let x0_norm = model.norm(x0)?;
    let eps_abs = opts.eps_ext * x0_norm;
    let k = opts.weak_functionals.min(model.max_observables());
    let mut rec = Recorder {
        model,
        law,
        k,
        zero_tol: eps_abs,
        samples: Vec::new(),
    };
    let mut stepper = Stepper {
        model,
        law,
        cap: opts.courant_cap,
        zero_tol: eps_abs,
        b_norm: model.b_norm(),
        cached: None,
    };

    let mut x = x0.clone();
    let mut t = 0.0;
    let mut steps = 0usize;
    let mut extinction_time = None;
    let mut b_extinction_time = None;
    let mut max_inc = f64::NEG_INFINITY;
    let mut prev_norm = x0_norm;
    rec.push(0.0, &x)?;

    let horizon = opts.horizon;
    let transport_dx = if model.is_transport() { model.dx() } else { None };
    let done = |t: f64| horizon - t <= 1e-12 * horizon.max(1.0);

    while !done(t) {
        let mut extinct_now = None;
        let t_next;
        if let Some(dx) = transport_dx {
            // Whole-cell shift, feedback subdivided inside the cell time.
            let y = stepper.propagate(&x, dx)?;
            let (y, ext) = stepper.feedback_subdivided(&y, t, dx, extinction_time.is_none());
            x = y;
            extinct_now = ext;
            t_next = (steps + 1) as f64 * dx;
        } else {
            let nominal = opts.dt_max.min(horizon - t);
            if extinction_time.is_none() {
                if let Some(tr) = stepper.landing(&x, t, nominal) {
                    extinct_now = Some(t + tr);
                }
            }
            if let Some(te) = extinct_now {
                x = StateVector::zeros(model.space());
                t_next = te.max(t + f64::EPSILON * t.abs().max(1.0));
            } else {
                let mut dt = nominal;
                if let Some(tau) = law.switch_time() {
                    if t < tau && tau < t + dt {
                        dt = tau - t;
                    }
                }
                let active = law.active_at(t + 0.5 * dt);
                let u0 = law.multiplier(model, &x, t + 0.5 * dt, eps_abs);
                dt = dt.min(courant_dt(opts.courant_cap, u0, stepper.b_norm));
                let y = stepper.propagate(&x, dt)?;
                let (y, _) = if active.is_some() && !matches!(active, Some(FeedbackLaw::Zero)) {
                    feedback_rk4(model, law, &y, t, dt, eps_abs)
                } else {
                    (y, 0.0)
                };
                x = y;
                t_next = t + dt;
                let fts = active.is_some_and(|l| l.is_finite_time());
                if fts && extinction_time.is_none() && u0 != 0.0 {
                    let n = model.norm(&x)?;
                    if n <= eps_abs {
                        x = StateVector::zeros(model.space());
                        extinct_now = Some(t_next);
                    } else if model.space().is_hilbert() {
                        let (ker, perp) = model.kernel_b_projection(&x)?;
                        let np = model.norm(&perp)?;
                        if np > 0.0 && np <= eps_abs {
                            x = ker;
                            b_extinction_time.get_or_insert(t_next);
                        }
                    }
                }
            }
        }
        if !x.is_finite() {
            return Err(Error::BlowUp { last_valid_time: t });
        }
        steps += 1;
        let n = model.norm(&x)?;
        if !n.is_finite() {
            return Err(Error::BlowUp { last_valid_time: t });
        }
        if x0_norm > 0.0 {
            max_inc = max_inc.max((n - prev_norm) / x0_norm);
        }
        prev_norm = n;
        t = t_next;
        if let Some(te) = extinct_now {
            if extinction_time.is_none() {
                extinction_time = Some(te);
                rec.push(te, &x)?;
                if !model.is_transport() {
                    continue;
                }
            }
        }
        if steps.is_multiple_of(opts.record_stride) || done(t) {
            rec.push(t, &x)?;
        }
    }
    if let Some(last) = rec.samples.last() {
        if last.t < t {
            rec.push(t, &x)?;
        }
    }

    Ok(Trajectory {
        samples: rec.samples,
        extinction_time,
        b_extinction_time,
        final_state: x,
        manifest: SimManifest {
            model: model.spec().clone(),
            law: law.clone(),
            options: opts.clone(),
            beta: model.beta(),
            omega0: model.omega0(),
            x0_norm,
            eps_abs,
            steps,
            observables: k,
        },
        max_norm_increase: if max_inc.is_finite() { max_inc.max(0.0) } else { 0.0 },
    })
}
