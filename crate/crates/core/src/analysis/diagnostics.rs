//! Structural and trajectory diagnostics.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{Sample, Trajectory};
use crate::models::{Model, ModelSpec};
use crate::space::{self, StateVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FtsVerdict {
    pub kernel_dim: usize,
    /// `ker(B)` is invariant under the generator.
    pub invariant: bool,
    /// `‖(I − QQᵀ)AQ‖ / max(‖A‖, 1)` with `Q` an orthonormal kernel basis.
    pub residual: f64,
    /// Global finite-time stabilization is ruled out.
    pub impossible: bool,
    /// A kernel state that no feedback can drive to zero.
    pub witness: Option<Vec<f64>>,
}

// Relative to the largest eigenvalue of BᵀB, i.e. singular values below 1e-6·σ_max.
const KERNEL_RTOL: f64 = 1e-12;
const INVARIANCE_TOL: f64 = 1e-9;

fn null_space(b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = b.ncols();
    // Eigen-decomposition of BᵀB gives the right singular vectors with full column count.
    let gram = b.transpose() * b;
    let eig = nalgebra::SymmetricEigen::new(gram);
    let scale = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    let cols: Vec<_> = (0..n)
        .filter(|&i| eig.eigenvalues[i].abs() <= KERNEL_RTOL * scale)
        .map(|i| eig.eigenvectors.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Tests whether `ker(B)` is invariant under the free dynamics.
///
/// Matrix exponentials are injective and never nilpotent, so an invariant
/// non-trivial kernel means every kernel state evolves freely forever and
/// global finite-time stabilization cannot happen. The witness is the kernel
/// basis vector whose leading entry comes first, signed positive.
pub fn fts_necessary_check(model: &Model) -> Result<FtsVerdict> {
    let (a, b) = model.coefficient_matrices()?;
    let q = match model.spec() {
        // Diagonal control: the kernel is spanned by coordinate vectors exactly.
        ModelSpec::HeatDirichletSpectral { .. } | ModelSpec::HeatSpectralProjection { .. } => {
            let cols: Vec<_> = (0..b.nrows())
                .filter(|&i| b[(i, i)] == 0.0)
                .map(|i| {
                    let mut c = nalgebra::DVector::zeros(b.nrows());
                    c[i] = 1.0;
                    c
                })
                .collect();
            if cols.is_empty() {
                DMatrix::zeros(b.nrows(), 0)
            } else {
                DMatrix::from_columns(&cols)
            }
        }
        _ => null_space(&b),
    };
    let k = q.ncols();
    if k == 0 {
        return Ok(FtsVerdict {
            kernel_dim: 0,
            invariant: true,
            residual: 0.0,
            impossible: false,
            witness: None,
        });
    }
    let aq = &a * &q;
    let resid = &aq - &q * (q.transpose() * &aq);
    let residual = resid.norm() / a.norm().max(1.0);
    let invariant = residual <= INVARIANCE_TOL;
    let witness = invariant.then(|| {
        let lead = |j: usize| {
            let col = q.column(j);
            let i = space::argmax_abs(col.as_slice());
            (i, col[i])
        };
        let j = (0..k).min_by_key(|&j| lead(j).0).expect("non-empty kernel");
        let sign = lead(j).1.signum();
        q.column(j).iter().map(|x| sign * x).collect()
    });
    Ok(FtsVerdict {
        kernel_dim: k,
        invariant,
        residual,
        impossible: invariant,
        witness,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct A2Report {
    /// Name of the Lipschitz modulus `𝒦(t, s)` used.
    pub kappa: String,
    /// `𝒦(1, 1)`.
    pub c_hat: f64,
    /// `max |B_J(y) − B_J(z)| / (𝒦(‖y‖, ‖z‖)·‖y − z‖)` over the samples.
    pub worst_ratio: f64,
    pub n_pairs: usize,
    pub pass: bool,
}

/// The modulus `𝒦(t, s) = c(t + s)` for each model family, as `(label, c)`.
fn kappa(model: &Model) -> (String, f64) {
    match model.spec() {
        ModelSpec::TransportL1 { .. } => ("2(t+s)".into(), 2.0),
        ModelSpec::HeatNeumannSup { a } => {
            let sup = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            (format!("‖a‖∞(t+s), ‖a‖∞ = {sup}"), sup)
        }
        _ => {
            let c = 2.0 * model.b_norm();
            (format!("2‖B‖(t+s), ‖B‖ = {}", model.b_norm()), c)
        }
    }
}

/// Empirical check of the Lipschitz condition on `y ↦ ⟨𝓑y, J(y)⟩`.
///
/// Pairs are Gaussian directions at log-uniform scales in `[1e-3, 1e3]`, half
/// of them independent and half of them small perturbations `z = y + εw`.
pub fn verify_a2(model: &Model, n_samples: usize, seed: u64) -> Result<A2Report> {
    let (label, c) = kappa(model);
    let sp = model.space();
    let dim = sp.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| {
        let c: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = space::norm_unchecked(sp, &c);
        let scale = 10f64.powf(rng.random_range(-3.0..3.0));
        StateVector::from_vec_unchecked(c.into_iter().map(|x| x * scale / n).collect())
    };
    let mut worst = 0.0f64;
    for i in 0..n_samples {
        let y = draw(&mut rng);
        let z = if i % 2 == 0 {
            draw(&mut rng)
        } else {
            let w = draw(&mut rng);
            let eps = 10f64.powf(rng.random_range(-8.0..-1.0));
            y.add(&w.scaled(eps * model.norm(&y)? / model.norm(&w)?))
        };
        let (ny, nz) = (model.norm(&y)?, model.norm(&z)?);
        let diff = model.norm(&y.sub(&z))?;
        if diff == 0.0 {
            continue;
        }
        let lhs = (model.pairing_b_form(&y)? - model.pairing_b_form(&z)?).abs();
        let rhs = c * (ny + nz) * diff;
        if rhs > 0.0 {
            worst = worst.max(lhs / rhs);
        } else if lhs > 0.0 {
            worst = f64::INFINITY;
        }
    }
    Ok(A2Report {
        kappa: label,
        c_hat: 2.0 * c,
        worst_ratio: worst,
        n_pairs: n_samples,
        pass: worst <= 1.0 + 1e-9,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakReport {
    /// `max_{last 10%} |⟨x, φ_k⟩| / max_{first 10%} |⟨x, φ_k⟩|` per functional (0/0 → 0).
    pub ratios: Vec<f64>,
    pub early_max: Vec<f64>,
    pub late_max: Vec<f64>,
}

pub(crate) fn weak_report_samples(samples: &[Sample]) -> Result<WeakReport> {
    let k = samples.first().map_or(0, |s| s.obs.len());
    if k == 0 {
        return Err(Error::InsufficientData(
            "trajectory recorded no weak observables".into(),
        ));
    }
    let t0 = samples[0].t;
    let t1 = samples[samples.len() - 1].t;
    let span = t1 - t0;
    let mut early = vec![0.0f64; k];
    let mut late = vec![0.0f64; k];
    for s in samples {
        let early_win = s.t <= t0 + 0.1 * span;
        let late_win = s.t >= t1 - 0.1 * span;
        for (j, o) in s.obs.iter().enumerate().take(k) {
            if early_win {
                early[j] = early[j].max(o.abs());
            }
            if late_win {
                late[j] = late[j].max(o.abs());
            }
        }
    }
    let ratios = early
        .iter()
        .zip(&late)
        .map(|(e, l)| if *e == 0.0 && *l == 0.0 { 0.0 } else { l / e })
        .collect();
    Ok(WeakReport {
        ratios,
        early_max: early,
        late_max: late,
    })
}

/// Compares each weak observable late in the run against its early size.
pub fn weak_report(traj: &Trajectory) -> Result<WeakReport> {
    weak_report_samples(&traj.samples)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub window: f64,
    /// `ζ̂_j = ‖x((j+1)T)‖ / ‖x(jT)‖` (0/0 → 0).
    pub zeta: Vec<f64>,
    pub max_zeta: f64,
    /// Rate `−ln ζ̄ / (4T)` implied by the worst window, when `ζ̄ ∈ (0, 1)`.
    pub implied_rate: Option<f64>,
}

pub(crate) fn contraction_from(
    norm_at: impl Fn(f64) -> Option<f64>,
    horizon: f64,
    window: f64,
) -> Result<ContractionReport> {
    if !(window.is_finite() && window > 0.0) {
        return Err(Error::validation("T", "must be finite and > 0"));
    }
    if horizon < 3.0 * window * (1.0 - 1e-12) {
        return Err(Error::InsufficientData(format!(
            "horizon {horizon} is shorter than three windows of length {window}"
        )));
    }
    let count = ((horizon / window) * (1.0 + 1e-12)).floor() as usize;
    let mut zeta = Vec::with_capacity(count);
    for j in 0..count {
        let a = norm_at(j as f64 * window).unwrap_or(0.0);
        let b = norm_at(((j + 1) as f64 * window).min(horizon)).unwrap_or(0.0);
        zeta.push(if a == 0.0 && b == 0.0 { 0.0 } else { b / a });
    }
    let max_zeta = zeta.iter().copied().fold(0.0, f64::max);
    let implied_rate = (max_zeta > 0.0 && max_zeta < 1.0).then(|| -max_zeta.ln() / (4.0 * window));
    Ok(ContractionReport {
        window,
        zeta,
        max_zeta,
        implied_rate,
    })
}

/// Per-window contraction ratios of the trajectory norm.
pub fn contraction_ratio_report(traj: &Trajectory, window: f64) -> Result<ContractionReport> {
    let horizon = traj.samples.last().map_or(0.0, |s| s.t);
    contraction_from(|t| traj.norm_at(t), horizon, window)
}

/// Settling-time bounds for the non-invariant finite-time law from `V0 = ⟨Bx0, x0⟩`:
/// `(V0^μ/(βμ), V0^{μ/2}/(2βμ))`, the stated bound and the one its argument yields.
pub fn noninvariant_bounds(v0: f64, beta: f64, mu: f64) -> (f64, f64) {
    let v0 = v0.max(0.0);
    (v0.powf(mu) / (beta * mu), v0.powf(mu / 2.0) / (2.0 * beta * mu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelSpec;

    fn custom(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>, omega0: f64) -> Model {
        Model::build(ModelSpec::FiniteDimCustom { a, b, omega0 }).unwrap()
    }

    #[test]
    fn projection_kernel_is_invariant() {
        let m = Model::build(ModelSpec::HeatSpectralProjection {
            modes: 8,
            weights: vec![2.0, 1.0, 3.0],
        })
        .unwrap();
        let v = fts_necessary_check(&m).unwrap();
        assert!(v.impossible);
        assert_eq!(v.kernel_dim, 5);
        let w = v.witness.unwrap();
        assert_eq!(w[3], 1.0);
        assert_eq!(w.iter().map(|x| x.abs()).sum::<f64>(), 1.0);
    }

    #[test]
    fn trivial_kernel_has_no_obstruction() {
        let m = custom(
            vec![vec![0.0, 1.0], vec![-1.0, 0.0]],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            0.0,
        );
        let v = fts_necessary_check(&m).unwrap();
        assert!(!v.impossible);
        assert_eq!(v.kernel_dim, 0);
    }

    #[test]
    fn r4_kernel_is_not_invariant() {
        let m = Model::build(ModelSpec::FiniteDimR4).unwrap();
        let v = fts_necessary_check(&m).unwrap();
        assert_eq!(v.kernel_dim, 1);
        assert!(!v.invariant);
        assert!(v.witness.is_none());
    }

    #[test]
    fn grids_are_unsupported() {
        let m = Model::build(ModelSpec::TransportL1 {
            cells: 10,
            dx: 0.1,
            alpha_cut: 0.5,
        })
        .unwrap();
        assert!(matches!(fts_necessary_check(&m), Err(Error::Unsupported(_))));
    }

    #[test]
    fn a2_holds_on_catalog() {
        let specs = vec![
            ModelSpec::TransportL1 {
                cells: 200,
                dx: 0.01,
                alpha_cut: 0.5,
            },
            ModelSpec::HeatNeumannSup {
                a: (0..21)
                    .map(|i| 1.0 + (i as f64 / 20.0) * (1.0 - i as f64 / 20.0))
                    .collect(),
            },
            ModelSpec::WaveDamped { modes: 8 },
            ModelSpec::WaveUndamped { modes: 8 },
            ModelSpec::FiniteDimR4,
        ];
        for spec in specs {
            let m = Model::build(spec).unwrap();
            let r = verify_a2(&m, 400, 11).unwrap();
            assert!(r.pass, "{r:?}");
            assert!(r.worst_ratio > 0.0);
        }
    }

    #[test]
    fn synthetic_contraction_ratios() {
        let r = contraction_from(|t| Some((-t).exp()), 10.0, 1.0).unwrap();
        assert_eq!(r.zeta.len(), 10);
        for z in &r.zeta {
            assert!((z - (-1f64).exp()).abs() < 1e-14);
        }
        assert!(contraction_from(|_| Some(1.0), 2.0, 1.0).is_err());
    }

    #[test]
    fn zero_observables_report_zero() {
        let samples: Vec<Sample> = (0..100)
            .map(|i| Sample {
                t: i as f64,
                norm: 0.0,
                control: 0.0,
                b_form: 0.0,
                obs: vec![0.0; 3],
            })
            .collect();
        let r = weak_report_samples(&samples).unwrap();
        assert_eq!(r.ratios, vec![0.0; 3]);
        let empty: Vec<Sample> = samples
            .iter()
            .map(|s| Sample {
                obs: vec![],
                ..s.clone()
            })
            .collect();
        assert!(weak_report_samples(&empty).is_err());
    }

    #[test]
    fn noninvariant_bound_values() {
        let (stated, proof) = noninvariant_bounds(4.0, 1.0, 0.5);
        assert!((stated - 4.0).abs() < 1e-15);
        assert!((proof - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn verdict_is_rotation_invariant() {
        let a = DMatrix::from_row_slice(3, 3, &[-1.0, 0.3, 0.0, 0.2, -2.0, 0.0, 0.0, 0.0, -0.5]);
        let b = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 0.0]));
        let th: f64 = 0.7;
        let r = DMatrix::from_row_slice(
            3,
            3,
            &[th.cos(), -th.sin(), 0.0, th.sin(), th.cos(), 0.0, 0.0, 0.0, 1.0],
        );
        let r = &r
            * DMatrix::from_row_slice(
                3,
                3,
                &[1.0, 0.0, 0.0, 0.0, th.cos(), -th.sin(), 0.0, th.sin(), th.cos()],
            );
        let rows = |m: &DMatrix<f64>| {
            (0..3)
                .map(|i| m.row(i).iter().copied().collect())
                .collect::<Vec<Vec<f64>>>()
        };
        let ra = r.transpose() * &a * &r;
        let rb = r.transpose() * &b * &r;
        let v0 = fts_necessary_check(&custom(rows(&a), rows(&b), 0.5)).unwrap();
        let v1 = fts_necessary_check(&custom(rows(&ra), rows(&rb), 0.5)).unwrap();
        assert!(v0.impossible && v1.impossible);
        assert_eq!(v0.kernel_dim, v1.kernel_dim);
    }
}
