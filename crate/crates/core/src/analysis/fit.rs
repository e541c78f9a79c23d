//! Least-squares decay fits on trajectory norms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayKind {
    /// `‖x‖ ≈ M t^{−p}`.
    Polynomial,
    /// `‖x‖ ≈ M e^{−σ t}`.
    Exponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub kind: DecayKind,
    /// Exponent `p̂` (polynomial) or rate `σ̂` (exponential).
    pub rate: f64,
    pub prefactor: f64,
    pub t_lo: f64,
    pub t_hi: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

const MIN_POINTS: usize = 20;

/// Fits `(t, ‖x‖)` pairs restricted to `[t_lo, t_hi]`, skipping non-positive
/// norms (and non-positive times for the polynomial kind).
pub fn fit_series(times: &[f64], norms: &[f64], kind: DecayKind, t_lo: f64, t_hi: f64) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(norms)
        .filter(|(t, n)| **t >= t_lo && **t <= t_hi && **n > 0.0 && n.is_finite())
        .filter(|(t, _)| kind == DecayKind::Exponential || **t > 0.0)
        .map(|(t, n)| {
            let x = match kind {
                DecayKind::Polynomial => t.ln(),
                DecayKind::Exponential => *t,
            };
            (x, n.ln())
        })
        .collect();
    if pts.len() < MIN_POINTS {
        return Err(Error::InsufficientData(format!(
            "{} usable samples in [{t_lo}, {t_hi}], need at least {MIN_POINTS}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::InsufficientData("fit window has no spread in time".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r2 = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(RateFit {
        kind,
        rate: -slope,
        prefactor: intercept.exp(),
        t_lo,
        t_hi,
        r_squared: r2,
        n_points: pts.len(),
    })
}

/// Fits the last half of the pre-extinction trajectory.
///
/// Polynomial fits additionally drop the first decade of time
/// (`t < 10·t₁`, `t₁` the first positive sample) and the last decade before
/// extinction (`t > 0.9·t_ext`).
pub fn fit_decay(traj: &Trajectory, kind: DecayKind) -> Result<RateFit> {
    let times = traj.times();
    let t_end = traj
        .extinction_time
        .unwrap_or_else(|| times.last().copied().unwrap_or(0.0));
    let mut t_lo = 0.5 * t_end;
    let mut t_hi = match traj.extinction_time {
        Some(te) => te * (1.0 - 1e-12),
        None => t_end,
    };
    if kind == DecayKind::Polynomial {
        if let Some(t1) = times.iter().copied().find(|t| *t > 0.0) {
            t_lo = t_lo.max(10.0 * t1);
        }
        if let Some(te) = traj.extinction_time {
            t_hi = 0.9 * te;
        }
    }
    fit_decay_window(traj, kind, t_lo, t_hi)
}

pub fn fit_decay_window(traj: &Trajectory, kind: DecayKind, t_lo: f64, t_hi: f64) -> Result<RateFit> {
    let eps = traj.manifest.eps_abs;
    let (times, norms): (Vec<f64>, Vec<f64>) = traj
        .samples
        .iter()
        .filter(|s| s.norm > eps)
        .map(|s| (s.t, s.norm))
        .unzip();
    fit_series(&times, &norms, kind, t_lo, t_hi)
}

/// Settling time of a trajectory (its extinction instant, if any).
pub fn settling_time(traj: &Trajectory) -> Option<f64> {
    traj.extinction_time
}
