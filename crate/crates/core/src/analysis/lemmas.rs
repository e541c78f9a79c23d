//! Scalar oracles: the extremal sequence recurrence and the Parsegov settling time.

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaVerdict {
    pub c: f64,
    pub alpha: f64,
    pub s0: f64,
    pub k_max: usize,
    /// `s₁`, the first iterate.
    pub s1: f64,
    /// `max_{k≤K} s_k (k+1)^{1/(α+1)}`.
    pub sup_scaled: f64,
    pub sup_index: usize,
    /// Same maximum over `k ≤ K/10`.
    pub sup_scaled_tenth: f64,
    /// `s_K`.
    pub s_last: f64,
    pub strictly_decreasing: bool,
    pub pass: bool,
}

const BISECT_MAX: usize = 200;
const BISECT_TOL: f64 = 1e-14;

/// Solves `s + C s^{α+2} = target` for `s ∈ (0, target)` by bisection.
fn next_term(c: f64, alpha: f64, target: f64) -> Result<f64> {
    let g = |s: f64| s + c * s.powf(alpha + 2.0) - target;
    let (mut lo, mut hi) = (0.0, target);
    for _ in 0..BISECT_MAX {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= BISECT_TOL * target {
            return Ok(0.5 * (lo + hi));
        }
    }
    Err(Error::Numerical(format!(
        "bisection for s + {c}·s^{} = {target} did not converge",
        alpha + 2.0
    )))
}

/// Iterates the extremal recurrence `s_{k+1} + C s_{k+1}^{α+2} = s_k` and
/// reports the scaled supremum `max_k s_k (k+1)^{1/(α+1)}`.
///
/// The verdict passes when the supremum is finite and, for `K ≥ 10`, moves by
/// less than 1% between `K/10` and `K`.
pub fn sequence_lemma_oracle(c: f64, alpha: f64, s0: f64, k_max: usize) -> Result<LemmaVerdict> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::validation("C", "must be finite and > 0"));
    }
    if !(alpha.is_finite() && alpha > -1.0) {
        return Err(Error::validation("alpha", "must be finite and > −1"));
    }
    if !(s0.is_finite() && s0 >= 0.0) {
        return Err(Error::validation("s0", "must be finite and ≥ 0"));
    }
    if k_max == 0 {
        return Err(Error::validation("K", "must be ≥ 1"));
    }
    let p = 1.0 / (alpha + 1.0);
    let tenth = k_max / 10;
    let mut s = s0;
    let mut s1 = 0.0;
    let mut best = s0;
    let mut best_idx = 0;
    let mut best_tenth = s0;
    let mut decreasing = true;
    for k in 1..=k_max {
        let next = if s == 0.0 { 0.0 } else { next_term(c, alpha, s)? };
        if s0 > 0.0 && next >= s {
            decreasing = false;
        }
        s = next;
        if k == 1 {
            s1 = s;
        }
        let scaled = s * ((k + 1) as f64).powf(p);
        if scaled > best {
            best = scaled;
            best_idx = k;
        }
        if k <= tenth {
            best_tenth = best;
        }
    }
    let finite = best.is_finite();
    let stable = k_max < 10 || (best - best_tenth).abs() <= 0.01 * best_tenth.max(f64::MIN_POSITIVE) || best == 0.0;
    Ok(LemmaVerdict {
        c,
        alpha,
        s0,
        k_max,
        s1,
        sup_scaled: best,
        sup_index: best_idx,
        sup_scaled_tenth: best_tenth,
        s_last: s,
        strictly_decreasing: decreasing,
        pass: finite && stable,
    })
}

/// Closed-form extinction time of `V' = −aV^{1−ν} − bV^{1+ν}` from `V0`, and
/// the uniform bound `π/(2ν√(ab))`.
///
/// With `W = V^ν`, `W' = −ν(a + bW²)`, which integrates to
/// `t = arctan(√(b/a)·W0)/(ν√(ab))`.
pub fn parsegov_extinction_time(a: f64, b: f64, nu: f64, v0: f64) -> (f64, f64) {
    let sab = (a * b).sqrt();
    let bound = FRAC_PI_2 / (nu * sab);
    if v0 <= 0.0 {
        return (0.0, bound);
    }
    let exact = ((b / a).sqrt() * v0.powf(nu)).atan() / (nu * sab);
    (exact, bound)
}

/// Extinction time of `V' = −aV^{1−ν} − bV^{1+ν}` by direct time-marching.
///
/// Integrates `y = ln V` (so `y' = −a e^{−νy} − b e^{νy}`) with classical RK4,
/// choosing each step so that `y` moves by about `dy`, until `V^ν` has fallen
/// by a factor `e^{-40}`. The neglected tail is below `e^{-40}·V0^ν/(aν)`.
pub fn parsegov_numeric(a: f64, b: f64, nu: f64, v0: f64, dy: f64) -> f64 {
    if v0 <= 0.0 {
        return 0.0;
    }
    let f = |y: f64| -a * (-nu * y).exp() - b * (nu * y).exp();
    let mut y = v0.ln();
    let y_end = y - 40.0 / nu;
    let mut t = 0.0;
    while y > y_end {
        let h = dy / f(y).abs();
        let k1 = f(y);
        let k2 = f(y + 0.5 * h * k1);
        let k3 = f(y + 0.5 * h * k2);
        let k4 = f(y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += h;
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn first_iterate_is_golden_ratio_conjugate() {
        let v = sequence_lemma_oracle(1.0, 0.0, 1.0, 1).unwrap();
        assert!((v.s1 - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-13);
    }

    #[test]
    fn zero_start_stays_zero() {
        let v = sequence_lemma_oracle(1.0, 0.0, 0.0, 100).unwrap();
        assert_eq!(v.s_last, 0.0);
        assert!(v.pass);
    }

    #[test]
    fn scaled_sequence_is_bounded() {
        let v = sequence_lemma_oracle(1.0, 0.0, 1.0, 10_000).unwrap();
        assert!(v.pass, "{v:?}");
        assert!(v.strictly_decreasing);
        // 1/s_{k+1} − 1/s_k = 1/(1 + s_{k+1}) ≥ 1/2, so s_k(k+1) ≤ 2(k+1)/(k+2) < 2.
        assert!(v.sup_scaled < 2.0);
    }

    #[test]
    fn bad_parameters_are_rejected() {
        assert!(sequence_lemma_oracle(0.0, 0.0, 1.0, 10).is_err());
        assert!(sequence_lemma_oracle(1.0, -1.0, 1.0, 10).is_err());
        assert!(sequence_lemma_oracle(1.0, 0.0, 1.0, 0).is_err());
    }

    #[test]
    fn parsegov_examples() {
        let (t, bound) = parsegov_extinction_time(1.0, 1.0, 0.25, 1.0);
        assert!((t - PI).abs() < 1e-14);
        assert!((bound - 2.0 * PI).abs() < 1e-14);
        assert_eq!(parsegov_extinction_time(1.0, 1.0, 0.25, 0.0).0, 0.0);
    }

    #[test]
    fn parsegov_numeric_matches_closed_form() {
        let (t, _) = parsegov_extinction_time(2.0, 0.5, 0.3, 7.0);
        let n = parsegov_numeric(2.0, 0.5, 0.3, 7.0, 0.02);
        assert!((n - t).abs() < 1e-6 * t, "{n} vs {t}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn exact_below_bound(a in 0.01f64..100.0, b in 0.01f64..100.0, nu in 0.001f64..0.499, lv in -10.0f64..10.0) {
            let (t, bound) = parsegov_extinction_time(a, b, nu, 10f64.powf(lv));
            prop_assert!(t <= bound);
            prop_assert!(t > 0.0);
        }

        #[test]
        fn exact_tends_to_bound(a in 0.1f64..10.0, b in 0.1f64..10.0, nu in 0.1f64..0.49) {
            let (t, bound) = parsegov_extinction_time(a, b, nu, 1e300);
            prop_assert!((bound - t) / bound < 1e-3);
        }

        #[test]
        fn sequence_decreases(c in 0.1f64..5.0, alpha in -0.9f64..3.0, s0 in 0.01f64..5.0) {
            let v = sequence_lemma_oracle(c, alpha, s0, 50).unwrap();
            prop_assert!(v.strictly_decreasing);
        }
    }
}
