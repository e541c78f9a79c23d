//! Sampled observation constants
//! `δ̂ = min_y ∫₀ᵀ |⟨B S(t)y, J(S(t)y)⟩| dt / ‖y‖²` (and `/‖S(T)y‖²`).
//!
//! Sampling only ever finds states at least as observable as the worst one,
//! so `δ̂` is an upper bound on the true infimum.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Model;
use crate::space::{self, SpaceDescriptor, StateVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservabilityEstimate {
    pub t_obs: f64,
    /// `min ∫₀ᵀ … dt / ‖y‖²` over the samples.
    pub delta_initial: f64,
    /// `min ∫₀ᵀ … dt / ‖S(T)y‖²` over samples with `S(T)y ≠ 0`.
    pub delta_final: f64,
    pub n_samples: usize,
    /// Label of the minimising sample for `delta_initial`.
    pub argmin: String,
    pub argmin_coeffs: Vec<f64>,
    /// Quadrature intervals used per sample.
    pub intervals: usize,
}

const MIXTURE_DIM_LIMIT: usize = 40;
const MAX_INTERVALS: usize = 20_000;

fn simpson_intervals(model: &Model, t_obs: f64) -> usize {
    let mut n = 200f64.max((40.0 * t_obs * model.max_frequency()).ceil());
    if let Ok((a, _)) = model.coefficient_matrices() {
        // Fast heat modes decay like e^{−2λt}; resolve that scale as well.
        if model.max_frequency() == 0.0 {
            let decay = a.diagonal().iter().fold(0.0f64, |m, x| m.max(-x));
            n = n.max((20.0 * t_obs * decay).ceil());
        }
    }
    let n = (n as usize).min(MAX_INTERVALS);
    n + n % 2
}

/// Cells available to observation samples on a truncated transport grid:
/// those that stay inside the grid for the whole window.
fn transport_support(model: &Model, t_obs: f64) -> usize {
    let dim = model.space().dim();
    let dx = model.dx().unwrap_or(1.0);
    let x_max = dim as f64 * dx;
    (0..dim).take_while(|i| (*i as f64 + 0.5) * dx < x_max - t_obs).count()
}

/// Transport: the integrand is piecewise linear in `t` between whole-cell
/// shifts, so the trapezoid rule on the `dx` grid is exact. Uses prefix sums so
/// each shift costs O(1).
fn transport_integral(model: &Model, y: &[f64], t_obs: f64) -> Result<(f64, f64)> {
    let dx = model.dx().expect("grid model");
    let steps = (t_obs / dx).round();
    if (t_obs / dx - steps).abs() > 1e-9 * steps.max(1.0) {
        return Err(Error::Domain(format!(
            "observation window {t_obs} is not a multiple of dx = {dx}"
        )));
    }
    let steps = steps as usize;
    let n = y.len();
    let l1 = matches!(model.space(), SpaceDescriptor::GridL1 { .. });
    let w: Vec<f64> = y.iter().map(|v| if l1 { v.abs() } else { v * v }).collect();
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + w[i];
    }
    // First controlled cell, recovered from B acting on the unit cells.
    let probe = StateVector::from_vec_unchecked((0..n).map(|i| i as f64 + 1.0).collect());
    let by = model.apply_b(&probe)?;
    let cut = by.coeffs().iter().position(|v| *v != 0.0).unwrap_or(n);
    let integrand = |k: usize| {
        // After k shifts cell i sits at i + k; cells with i + k ≥ n are gone.
        if k >= n {
            return 0.0;
        }
        let kept = prefix[n - k] * dx;
        let first_in = cut.saturating_sub(k).min(n - k);
        let inside = (prefix[n - k] - prefix[first_in]) * dx;
        if l1 {
            kept * inside
        } else {
            inside
        }
    };
    let mut total = 0.0;
    for k in 0..=steps {
        let wgt = if k == 0 || k == steps { 0.5 } else { 1.0 };
        total += wgt * integrand(k);
    }
    let final_norm = if steps >= n {
        0.0
    } else if l1 {
        prefix[n - steps] * dx
    } else {
        (prefix[n - steps] * dx).sqrt()
    };
    Ok((total * dx, final_norm))
}

/// `∫₀ᵀ |⟨𝓑 S(t)y, J(S(t)y)⟩| dt` and `‖S(T)y‖`.
fn integral_and_final(model: &Model, y: &StateVector, t_obs: f64, intervals: usize) -> Result<(f64, f64)> {
    if model.is_transport() {
        return transport_integral(model, y.coeffs(), t_obs);
    }
    let h = t_obs / intervals as f64;
    let prop = model.propagator(h)?;
    let mut x = y.clone();
    let mut total = 0.0;
    for i in 0..=intervals {
        let w = if i == 0 || i == intervals {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        total += w * model.pairing_b_form(&x)?.abs();
        if i < intervals {
            x = prop.apply(&x);
        }
    }
    Ok((total * h / 3.0, model.norm(&x)?))
}

/// `∫₀ᵀ |⟨𝓑 S(t)y, J(S(t)y)⟩| dt` by composite Simpson (trapezoid on the cell
/// grid for transport models).
pub fn observation_integral(model: &Model, y: &StateVector, t_obs: f64) -> Result<f64> {
    model.space().check(y)?;
    if !(t_obs.is_finite() && t_obs > 0.0) {
        return Err(Error::validation("T", "must be finite and > 0"));
    }
    Ok(integral_and_final(model, y, t_obs, simpson_intervals(model, t_obs))?.0)
}

fn unit(model: &Model, c: Vec<f64>) -> Option<StateVector> {
    let v = StateVector::from_vec_unchecked(c);
    let n = space::norm_unchecked(model.space(), v.coeffs());
    (n > 0.0).then(|| v.scaled(1.0 / n))
}

/// Samples all basis states, all `(e_i ± e_j)` mixtures when the dimension is
/// at most 40, and `n_random` Gaussian directions drawn from a ChaCha8 stream
/// seeded with `seed`. Every sample is normalised to unit norm.
pub fn observability_estimate(model: &Model, t_obs: f64, n_random: usize, seed: u64) -> Result<ObservabilityEstimate> {
    if !(t_obs.is_finite() && t_obs > 0.0) {
        return Err(Error::validation("T", "must be finite and > 0"));
    }
    if n_random == 0 {
        return Err(Error::validation("n_samples", "must be ≥ 1"));
    }
    let dim = model.space().dim();
    let support = if model.is_transport() {
        transport_support(model, t_obs)
    } else {
        dim
    };
    if support == 0 {
        return Err(Error::validation(
            "T",
            "observation window longer than the transport grid",
        ));
    }
    let intervals = simpson_intervals(model, t_obs);

    let mut samples: Vec<(String, StateVector)> = Vec::new();
    for i in 0..support {
        let mut c = vec![0.0; dim];
        c[i] = 1.0;
        samples.extend(unit(model, c).map(|v| (format!("e{}", i + 1), v)));
    }
    if support <= MIXTURE_DIM_LIMIT {
        for i in 0..support {
            for j in i + 1..support {
                for sign in [1.0, -1.0] {
                    let mut c = vec![0.0; dim];
                    c[i] = 1.0;
                    c[j] = sign;
                    let label = format!("e{}{}e{}", i + 1, if sign > 0.0 { '+' } else { '-' }, j + 1);
                    samples.extend(unit(model, c).map(|v| (label, v)));
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for r in 0..n_random {
        let mut c = vec![0.0; dim];
        for x in c.iter_mut().take(support) {
            *x = StandardNormal.sample(&mut rng);
        }
        samples.extend(unit(model, c).map(|v| (format!("random{}", r + 1), v)));
    }

    let mut best = f64::INFINITY;
    let mut best_final = f64::INFINITY;
    let mut argmin = String::new();
    let mut argmin_coeffs = Vec::new();
    for (label, y) in &samples {
        let (integral, final_norm) = integral_and_final(model, y, t_obs, intervals)?;
        if integral < best {
            best = integral;
            argmin = label.clone();
            argmin_coeffs = y.coeffs().to_vec();
        }
        if final_norm > 1e-150 {
            best_final = best_final.min(integral / (final_norm * final_norm));
        }
    }
    Ok(ObservabilityEstimate {
        t_obs,
        delta_initial: best,
        delta_final: best_final,
        n_samples: samples.len(),
        argmin,
        argmin_coeffs,
        intervals,
    })
}
