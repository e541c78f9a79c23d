//! Model catalog: the pairs `(A, B)` with exact (or spectrally exact) semigroups.
//!
//! Every model keeps its state in coefficient form relative to the
//! [`SpaceDescriptor`] it builds. Spectral models never leave coefficient
//! space; transport models move by whole grid cells; the Neumann heat model
//! and the finite-dimensional models use a dense matrix exponential.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{self, argmax_abs, dirichlet_eigenvalues, SpaceDescriptor, StateVector};

/// Relative tolerance used to decide that an eigenvalue of `B` is zero.
const KERNEL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    /// `A = ∂ₓₓ` (Dirichlet) in the sine basis; `B = Id` or a modal multiplier.
    HeatDirichletSpectral { modes: usize, multiplier: Option<Vec<f64>> },
    /// Undamped string with `B(y, w) = (0, y)`.
    WaveUndamped { modes: usize },
    /// String with velocity feedback `B(y, w) = (0, w)`.
    WaveDamped { modes: usize },
    /// Right transport in L¹ on `[0, cells·dx]`, `B = 1_{(alpha_cut, ∞)}`.
    TransportL1 { cells: usize, dx: f64, alpha_cut: f64 },
    /// Neumann heat on `[0, 1]` sampled at `a.len()` nodes, `B = a(·)`, sup norm.
    HeatNeumannSup { a: Vec<f64> },
    /// Right transport in L² on `[0, cells·dx]`, `B = χ_(a_cut, ∞)`.
    TransportL2Fts { cells: usize, dx: f64, a_cut: f64 },
    /// Dirichlet heat with `By = Σ_{j≤q} a_j ⟨y, φ_j⟩ φ_j`, `q = weights.len()`.
    HeatSpectralProjection { modes: usize, weights: Vec<f64> },
    /// The fixed 4×4 example with `B = diag(1, 1, 1, 0)`.
    FiniteDimR4,
    /// Arbitrary square `A`, symmetric positive semidefinite `B` (row-major rows).
    FiniteDimCustom {
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        omega0: f64,
    },
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::HeatDirichletSpectral { .. } => "heat_dirichlet_spectral",
            Self::WaveUndamped { .. } => "wave_undamped",
            Self::WaveDamped { .. } => "wave_damped",
            Self::TransportL1 { .. } => "transport_l1",
            Self::HeatNeumannSup { .. } => "heat_neumann_sup",
            Self::TransportL2Fts { .. } => "transport_l2_fts",
            Self::HeatSpectralProjection { .. } => "heat_spectral_projection",
            Self::FiniteDimR4 => "finite_dim_r4",
            Self::FiniteDimCustom { .. } => "finite_dim_custom",
        }
    }
}

pub fn r4_matrices() -> (DMatrix<f64>, DMatrix<f64>) {
    let a = DMatrix::from_row_slice(
        4,
        4,
        &[
            0.0, 1.0, 0.0, 2.0, //
            1.0, 0.0, 0.0, 0.0, //
            0.0, 0.0, 1.0, 0.0, //
            0.0, 0.0, 0.0, 0.0,
        ],
    );
    let b = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 1.0, 0.0]));
    (a, b)
}

#[derive(Debug, Clone)]
enum Ops {
    /// Heat modes: `A = diag(−λ)`, `B = diag(b)`.
    Diagonal {
        lambda: Vec<f64>,
        b: Vec<f64>,
    },
    Wave {
        lambda: Vec<f64>,
        damped: bool,
    },
    /// Cells `cut..` are inside the control region.
    Shift {
        cut: usize,
    },
    Nodal {
        lap: DMatrix<f64>,
        a: Vec<f64>,
    },
    Matrix {
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        b_vals: DVector<f64>,
        b_vecs: DMatrix<f64>,
    },
}

/// A built model: spec echo, derived space, coercivity `β`, quasi-contraction type `ω₀`.
#[derive(Debug, Clone)]
pub struct Model {
    spec: ModelSpec,
    space: SpaceDescriptor,
    beta: f64,
    omega0: f64,
    ops: Ops,
}

fn positive_entries(field: &str, v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::validation(field, "must not be empty"));
    }
    if let Some(i) = v.iter().position(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(Error::validation(
            format!("{field}[{i}]"),
            "must be finite and strictly positive",
        ));
    }
    Ok(())
}

fn grid_cut(cells: usize, dx: f64, cut: f64, field: &str) -> Result<usize> {
    let x_max = cells as f64 * dx;
    if !(cut.is_finite() && cut > 0.0 && cut < x_max) {
        return Err(Error::validation(
            field,
            format!("must lie in (0, {x_max}) (the truncated domain)"),
        ));
    }
    // Cells whose midpoint lies beyond the cut are controlled.
    Ok((0..cells).find(|&i| (i as f64 + 0.5) * dx > cut).unwrap_or(cells))
}

fn matrix_from_rows(field: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::validation(field, "matrix must be non-empty"));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != n) {
        return Err(Error::validation(format!("{field}[{i}]"), "matrix must be square"));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::validation(field, "entries must be finite"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn neumann_laplacian(n: usize) -> DMatrix<f64> {
    let dx = 1.0 / (n - 1) as f64;
    let s = 1.0 / (dx * dx);
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = -2.0 * s;
        // Ghost nodes mirror the first interior neighbour.
        if i == 0 {
            m[(0, 1)] = 2.0 * s;
        } else if i == n - 1 {
            m[(i, i - 1)] = 2.0 * s;
        } else {
            m[(i, i - 1)] = s;
            m[(i, i + 1)] = s;
        }
    }
    m
}

fn matrix_ops(a: DMatrix<f64>, b: DMatrix<f64>) -> Ops {
    let eig = SymmetricEigen::new(b.clone());
    Ops::Matrix {
        a,
        b,
        b_vals: eig.eigenvalues,
        b_vecs: eig.eigenvectors,
    }
}

fn sym_max_eig(a: &DMatrix<f64>) -> f64 {
    let s = (a + a.transpose()) * 0.5;
    SymmetricEigen::new(s).eigenvalues.max()
}

impl Model {
    pub fn build(spec: ModelSpec) -> Result<Self> {
        let (space, beta, omega0, ops) = match &spec {
            ModelSpec::HeatDirichletSpectral { modes, multiplier } => {
                if *modes == 0 {
                    return Err(Error::validation("modes", "mode count must be ≥ 1"));
                }
                let b = match multiplier {
                    None => vec![1.0; *modes],
                    Some(m) => {
                        if m.len() != *modes {
                            return Err(Error::validation(
                                "multiplier",
                                format!("expected {modes} entries, got {}", m.len()),
                            ));
                        }
                        if let Some(i) = m.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
                            return Err(Error::validation(
                                format!("multiplier[{i}]"),
                                "must be finite and non-negative",
                            ));
                        }
                        m.clone()
                    }
                };
                let beta = b.iter().copied().filter(|x| *x > 0.0).fold(f64::INFINITY, f64::min);
                let beta = if beta.is_finite() { beta } else { 0.0 };
                let lambda = dirichlet_eigenvalues(*modes);
                (
                    SpaceDescriptor::dirichlet_spectral(*modes)?,
                    beta,
                    0.0,
                    Ops::Diagonal { lambda, b },
                )
            }
            ModelSpec::HeatSpectralProjection { modes, weights } => {
                positive_entries("weights", weights)?;
                if *modes < weights.len() {
                    return Err(Error::validation(
                        "modes",
                        format!("must be ≥ q = {} (number of weights)", weights.len()),
                    ));
                }
                let mut b = weights.clone();
                b.resize(*modes, 0.0);
                let beta = weights.iter().copied().fold(f64::INFINITY, f64::min);
                (
                    SpaceDescriptor::dirichlet_spectral(*modes)?,
                    beta,
                    0.0,
                    Ops::Diagonal {
                        lambda: dirichlet_eigenvalues(*modes),
                        b,
                    },
                )
            }
            ModelSpec::WaveUndamped { modes } | ModelSpec::WaveDamped { modes } => {
                if *modes == 0 {
                    return Err(Error::validation("modes", "mode count must be ≥ 1"));
                }
                let damped = matches!(spec, ModelSpec::WaveDamped { .. });
                (
                    SpaceDescriptor::dirichlet_energy(*modes)?,
                    if damped { 1.0 } else { 0.0 },
                    0.0,
                    Ops::Wave {
                        lambda: dirichlet_eigenvalues(*modes),
                        damped,
                    },
                )
            }
            ModelSpec::TransportL1 { cells, dx, alpha_cut } => {
                let space = SpaceDescriptor::grid_l1(*cells, *dx)?;
                let cut = grid_cut(*cells, *dx, *alpha_cut, "alpha_cut")?;
                (space, 1.0, 0.0, Ops::Shift { cut })
            }
            ModelSpec::TransportL2Fts { cells, dx, a_cut } => {
                let space = SpaceDescriptor::grid_l2(*cells, *dx)?;
                let cut = grid_cut(*cells, *dx, *a_cut, "a_cut")?;
                (space, 1.0, 0.0, Ops::Shift { cut })
            }
            ModelSpec::HeatNeumannSup { a } => {
                positive_entries("a", a)?;
                if a.len() < 3 {
                    return Err(Error::validation("a", "profile needs at least 3 nodes"));
                }
                let n = a.len();
                let k = a.iter().copied().fold(f64::INFINITY, f64::min);
                (
                    SpaceDescriptor::grid_sup(n, 1.0 / (n - 1) as f64)?,
                    k,
                    0.0,
                    Ops::Nodal {
                        lap: neumann_laplacian(n),
                        a: a.clone(),
                    },
                )
            }
            ModelSpec::FiniteDimR4 => {
                let (a, b) = r4_matrices();
                (SpaceDescriptor::finite_dim(4)?, 1.0, 2f64.sqrt(), matrix_ops(a, b))
            }
            ModelSpec::FiniteDimCustom { a, b, omega0 } => {
                let am = matrix_from_rows("a", a)?;
                let bm = matrix_from_rows("b", b)?;
                if am.nrows() != bm.nrows() {
                    return Err(Error::validation("b", "must have the same size as `a`"));
                }
                let scale = bm.amax().max(1.0);
                if (&bm - bm.transpose()).amax() > 1e-12 * scale {
                    return Err(Error::validation("b", "must be symmetric"));
                }
                if !omega0.is_finite() {
                    return Err(Error::validation("omega0", "must be finite"));
                }
                let ops = matrix_ops(am.clone(), bm);
                let Ops::Matrix { b_vals, .. } = &ops else {
                    unreachable!()
                };
                let tol = KERNEL_TOL * scale;
                if b_vals.min() < -tol {
                    return Err(Error::validation("b", "must be positive semidefinite"));
                }
                let w = sym_max_eig(&am);
                if w > omega0 + 1e-9 * w.abs().max(1.0) {
                    return Err(Error::validation(
                        "omega0",
                        format!("A is only quasi-dissipative of type {w:.6}; omega0 must be at least that"),
                    ));
                }
                let beta = b_vals
                    .iter()
                    .copied()
                    .filter(|x| *x > tol)
                    .fold(f64::INFINITY, f64::min);
                let beta = if beta.is_finite() { beta } else { 0.0 };
                (SpaceDescriptor::finite_dim(am.nrows())?, beta, *omega0, ops)
            }
        };
        Ok(Self {
            spec,
            space,
            beta,
            omega0,
            ops,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    /// Coercivity constant of `B` on `ker(B)⊥` (0 when there is none).
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn is_transport(&self) -> bool {
        matches!(self.ops, Ops::Shift { .. })
    }

    pub fn norm(&self, v: &StateVector) -> Result<f64> {
        space::norm(&self.space, v)
    }

    /// Operator norm of `B` on the model's space.
    pub fn b_norm(&self) -> f64 {
        match &self.ops {
            Ops::Diagonal { b, .. } => b.iter().fold(0.0, |m, x| m.max(x.abs())),
            Ops::Wave { lambda, damped } => {
                if *damped {
                    1.0
                } else {
                    1.0 / lambda[0].sqrt()
                }
            }
            Ops::Shift { .. } => 1.0,
            Ops::Nodal { a, .. } => a.iter().fold(0.0, |m, x| m.max(x.abs())),
            Ops::Matrix { b_vals, .. } => b_vals.amax(),
        }
    }

    /// Largest oscillation frequency of the free dynamics (0 for purely dissipative models).
    pub fn max_frequency(&self) -> f64 {
        match &self.ops {
            Ops::Wave { lambda, .. } => lambda.last().map_or(0.0, |l| l.sqrt()),
            Ops::Matrix { a, .. } => {
                let skew = (a - a.transpose()) * 0.5;
                skew.norm()
            }
            _ => 0.0,
        }
    }

    pub fn propagator(&self, dt: f64) -> Result<Propagator> {
        if dt.is_nan() || dt < 0.0 || !dt.is_finite() {
            return Err(Error::Domain(format!(
                "semigroup time must be finite and non-negative, got {dt}"
            )));
        }
        let kind = match &self.ops {
            Ops::Diagonal { lambda, .. } => PropKind::Diagonal(lambda.iter().map(|l| (-l * dt).exp()).collect()),
            Ops::Wave { lambda, .. } => PropKind::Wave(
                lambda
                    .iter()
                    .map(|l| {
                        let w = l.sqrt() * dt;
                        (w.cos(), w.sin())
                    })
                    .collect(),
            ),
            Ops::Shift { .. } => {
                let dx = self.grid_dx();
                let k = (dt / dx).round();
                if (dt / dx - k).abs() > 1e-9 * k.max(1.0) {
                    return Err(Error::Domain(format!(
                        "transport time {dt} is not an integer multiple of dx = {dx}"
                    )));
                }
                PropKind::Shift(k as usize)
            }
            Ops::Nodal { lap, .. } => PropKind::Dense((lap * dt).exp()),
            Ops::Matrix { a, .. } => PropKind::Dense((a * dt).exp()),
        };
        Ok(Propagator { dt, kind })
    }

    fn grid_dx(&self) -> f64 {
        match self.space {
            SpaceDescriptor::GridL1 { dx, .. }
            | SpaceDescriptor::GridL2 { dx, .. }
            | SpaceDescriptor::GridSup { dx, .. } => dx,
            _ => 1.0,
        }
    }

    /// Grid spacing for grid-based models.
    pub fn dx(&self) -> Option<f64> {
        match self.space {
            SpaceDescriptor::GridL1 { dx, .. }
            | SpaceDescriptor::GridL2 { dx, .. }
            | SpaceDescriptor::GridSup { dx, .. } => Some(dx),
            _ => None,
        }
    }

    /// `S(t)v`.
    pub fn semigroup_apply(&self, v: &StateVector, t: f64) -> Result<StateVector> {
        self.space.check(v)?;
        Ok(self.propagator(t)?.apply(v))
    }

    pub fn apply_b(&self, v: &StateVector) -> Result<StateVector> {
        self.space.check(v)?;
        let c = v.coeffs();
        let out = match &self.ops {
            Ops::Diagonal { b, .. } => c.iter().zip(b).map(|(x, w)| x * w).collect(),
            Ops::Wave { lambda, damped } => {
                let mut out = vec![0.0; c.len()];
                for (j, l) in lambda.iter().enumerate() {
                    out[2 * j + 1] = if *damped { c[2 * j + 1] } else { c[2 * j] / l.sqrt() };
                }
                out
            }
            Ops::Shift { cut } => c
                .iter()
                .enumerate()
                .map(|(i, x)| if i >= *cut { *x } else { 0.0 })
                .collect(),
            Ops::Nodal { a, .. } => c.iter().zip(a).map(|(x, w)| x * w).collect(),
            Ops::Matrix { b, .. } => (b * DVector::from_column_slice(c)).as_slice().to_vec(),
        };
        Ok(StateVector::from_vec_unchecked(out))
    }

    /// `⟨Bv, J(v)⟩` with the deterministic duality selection.
    pub fn b_form(&self, v: &StateVector) -> Result<f64> {
        self.space.check(v)?;
        Ok(self.b_form_unchecked(v.coeffs()))
    }

    pub(crate) fn b_form_unchecked(&self, c: &[f64]) -> f64 {
        match &self.ops {
            Ops::Diagonal { b, .. } => c.iter().zip(b).map(|(x, w)| w * x * x).sum(),
            Ops::Wave { lambda, damped } => lambda
                .iter()
                .enumerate()
                .map(|(j, l)| {
                    let (a, b) = (c[2 * j], c[2 * j + 1]);
                    if *damped {
                        l * b * b
                    } else {
                        l.sqrt() * a * b
                    }
                })
                .sum(),
            Ops::Shift { cut } => {
                let dx = self.grid_dx();
                match self.space {
                    SpaceDescriptor::GridL1 { .. } => {
                        let total: f64 = c.iter().map(|x| x.abs()).sum::<f64>() * dx;
                        let inside: f64 = c[*cut..].iter().map(|x| x.abs()).sum::<f64>() * dx;
                        total * inside
                    }
                    _ => c[*cut..].iter().map(|x| x * x).sum::<f64>() * dx,
                }
            }
            Ops::Nodal { a, .. } => {
                let i = argmax_abs(c);
                a[i] * c[i] * c[i]
            }
            Ops::Matrix { b, .. } => {
                let v = DVector::from_column_slice(c);
                v.dot(&(b * &v))
            }
        }
    }

    /// The pairing `⟨𝓑v, J(v)⟩` used by the exponential-stability assumptions.
    ///
    /// Equal to [`Model::b_form`] except on the sup-norm heat model, where the
    /// single-valued surrogate `𝓑 = k·Id` replaces the multiplier `a(·)`.
    pub fn pairing_b_form(&self, v: &StateVector) -> Result<f64> {
        self.space.check(v)?;
        Ok(self.pairing_b_form_unchecked(v.coeffs()))
    }

    pub(crate) fn pairing_b_form_unchecked(&self, c: &[f64]) -> f64 {
        match &self.ops {
            Ops::Nodal { .. } => {
                let n = space::norm_unchecked(&self.space, c);
                self.beta * n * n
            }
            _ => self.b_form_unchecked(c),
        }
    }

    /// Orthogonal split `v = v_ker + v_perp` along `ker(B)`.
    pub fn kernel_b_projection(&self, v: &StateVector) -> Result<(StateVector, StateVector)> {
        self.space.check(v)?;
        if !self.space.is_hilbert() {
            return Err(Error::Unsupported(format!(
                "kernel projection needs a Hilbert structure, model lives in a {} space",
                self.space.kind()
            )));
        }
        let c = v.coeffs();
        let mut ker = vec![0.0; c.len()];
        match &self.ops {
            Ops::Diagonal { b, .. } => {
                for (i, w) in b.iter().enumerate() {
                    if *w == 0.0 {
                        ker[i] = c[i];
                    }
                }
            }
            Ops::Wave { lambda, damped } => {
                // Damped: ker B = {β = 0}. Undamped: ker B = {α = 0}.
                for j in 0..lambda.len() {
                    let i = if *damped { 2 * j } else { 2 * j + 1 };
                    ker[i] = c[i];
                }
            }
            Ops::Shift { cut } => ker[..*cut].copy_from_slice(&c[..*cut]),
            Ops::Matrix { b_vals, b_vecs, .. } => {
                let q = self.kernel_basis_matrix(b_vals, b_vecs);
                if q.ncols() > 0 {
                    let x = DVector::from_column_slice(c);
                    let p = &q * (q.transpose() * x);
                    ker.copy_from_slice(p.as_slice());
                }
            }
            Ops::Nodal { .. } => unreachable!("sup-norm model is not Hilbert"),
        }
        let perp: Vec<f64> = c.iter().zip(&ker).map(|(x, k)| x - k).collect();
        Ok((
            StateVector::from_vec_unchecked(ker),
            StateVector::from_vec_unchecked(perp),
        ))
    }

    fn kernel_basis_matrix(&self, vals: &DVector<f64>, vecs: &DMatrix<f64>) -> DMatrix<f64> {
        let tol = KERNEL_TOL * vals.amax().max(1.0);
        let cols: Vec<DVector<f64>> = (0..vals.len())
            .filter(|&i| vals[i].abs() <= tol)
            .map(|i| vecs.column(i).into_owned())
            .collect();
        if cols.is_empty() {
            DMatrix::zeros(vals.len(), 0)
        } else {
            DMatrix::from_columns(&cols)
        }
    }

    /// `exp(θB)v`, the exact flow of `x' = θ'·Bx` along the control phase θ.
    pub fn b_flow(&self, v: &StateVector, theta: f64) -> StateVector {
        if theta == 0.0 {
            return v.clone();
        }
        let c = v.coeffs();
        let out = match &self.ops {
            Ops::Diagonal { b, .. } => c.iter().zip(b).map(|(x, w)| x * (theta * w).exp()).collect(),
            Ops::Wave { lambda, damped } => {
                let mut out = c.to_vec();
                let e = theta.exp();
                for (j, l) in lambda.iter().enumerate() {
                    if *damped {
                        out[2 * j + 1] *= e;
                    } else {
                        // B² = 0, so exp(θB) = I + θB.
                        out[2 * j + 1] += theta * c[2 * j] / l.sqrt();
                    }
                }
                out
            }
            Ops::Shift { cut } => {
                let e = theta.exp();
                c.iter()
                    .enumerate()
                    .map(|(i, x)| if i >= *cut { x * e } else { *x })
                    .collect()
            }
            Ops::Nodal { a, .. } => c.iter().zip(a).map(|(x, w)| x * (theta * w).exp()).collect(),
            Ops::Matrix { b_vals, b_vecs, .. } => {
                let x = DVector::from_column_slice(c);
                let mut y = b_vecs.transpose() * x;
                for (yi, l) in y.iter_mut().zip(b_vals.iter()) {
                    *yi *= (theta * l).exp();
                }
                (b_vecs * y).as_slice().to_vec()
            }
        };
        StateVector::from_vec_unchecked(out)
    }

    /// `L*x` with `B = LL*`, `L = B^{1/2}`, expressed in an orthonormal frame
    /// (so that `‖L*x‖² = ⟨Bx, x⟩`). Hilbert models with symmetric `B` only.
    pub fn l_adjoint(&self, v: &StateVector) -> Result<Vec<f64>> {
        self.space.check(v)?;
        let c = v.coeffs();
        match &self.ops {
            Ops::Diagonal { b, .. } => Ok(c.iter().zip(b).map(|(x, w)| w.sqrt() * x).collect()),
            Ops::Wave { lambda, damped: true } => Ok(lambda
                .iter()
                .enumerate()
                .map(|(j, l)| l.sqrt() * c[2 * j + 1])
                .collect()),
            Ops::Shift { cut } if self.space.is_hilbert() => {
                let s = self.grid_dx().sqrt();
                Ok(c.iter()
                    .enumerate()
                    .map(|(i, x)| if i >= *cut { s * x } else { 0.0 })
                    .collect())
            }
            Ops::Matrix { b_vals, b_vecs, .. } => {
                let x = DVector::from_column_slice(c);
                let mut y = b_vecs.transpose() * x;
                for (yi, l) in y.iter_mut().zip(b_vals.iter()) {
                    *yi *= l.max(0.0).sqrt();
                }
                Ok(y.as_slice().to_vec())
            }
            _ => Err(Error::Unsupported(format!(
                "no factorisation B = LL* for model `{}`",
                self.spec.name()
            ))),
        }
    }

    /// Generator and control operator in coefficient coordinates, for the
    /// finite-dimensional and spectral models.
    pub fn coefficient_matrices(&self) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        match &self.ops {
            Ops::Diagonal { lambda, b } => Ok((
                DMatrix::from_diagonal(&DVector::from_iterator(lambda.len(), lambda.iter().map(|l| -l))),
                DMatrix::from_diagonal(&DVector::from_column_slice(b)),
            )),
            Ops::Wave { lambda, damped } => {
                let n = 2 * lambda.len();
                let mut a = DMatrix::zeros(n, n);
                let mut b = DMatrix::zeros(n, n);
                for (j, l) in lambda.iter().enumerate() {
                    let w = l.sqrt();
                    a[(2 * j, 2 * j + 1)] = w;
                    a[(2 * j + 1, 2 * j)] = -w;
                    if *damped {
                        b[(2 * j + 1, 2 * j + 1)] = 1.0;
                    } else {
                        b[(2 * j + 1, 2 * j)] = 1.0 / w;
                    }
                }
                Ok((a, b))
            }
            Ops::Matrix { a, b, .. } => Ok((a.clone(), b.clone())),
            _ => Err(Error::Unsupported(format!(
                "model `{}` has no finite coefficient representation",
                self.spec.name()
            ))),
        }
    }

    /// Weak observables `⟨x, φ_k⟩`, `k = 1..=K` (clipped to what the model offers).
    ///
    /// Spectral heat: coefficient `k`. Wave: `√λ_k α_k`. Finite: coordinate `k`.
    /// Grids: `K` hat functionals centred at `k·L/(K+1)` with half-width `L/(K+1)`.
    pub fn observables(&self, v: &StateVector, k: usize) -> Vec<f64> {
        let c = v.coeffs();
        match &self.ops {
            Ops::Diagonal { .. } | Ops::Matrix { .. } => c.iter().take(k).copied().collect(),
            Ops::Wave { lambda, .. } => lambda
                .iter()
                .take(k)
                .enumerate()
                .map(|(j, l)| l.sqrt() * c[2 * j])
                .collect(),
            Ops::Shift { .. } | Ops::Nodal { .. } => {
                if k == 0 {
                    return Vec::new();
                }
                let n = c.len();
                let dx = self.grid_dx();
                let nodal = matches!(self.ops, Ops::Nodal { .. });
                let len = if nodal { (n - 1) as f64 * dx } else { n as f64 * dx };
                let h = len / (k + 1) as f64;
                (1..=k)
                    .map(|m| {
                        let centre = m as f64 * h;
                        c.iter()
                            .enumerate()
                            .map(|(i, x)| {
                                let pos = if nodal { i as f64 * dx } else { (i as f64 + 0.5) * dx };
                                let hat = (1.0 - (pos - centre).abs() / h).max(0.0);
                                x * hat * dx
                            })
                            .sum()
                    })
                    .collect()
            }
        }
    }

    /// Number of weak observables the model can provide.
    pub fn max_observables(&self) -> usize {
        match &self.ops {
            Ops::Wave { lambda, .. } => lambda.len(),
            _ => self.space.dim(),
        }
    }
}

/// Cached action of `S(dt)` for a fixed step.
#[derive(Debug, Clone)]
pub struct Propagator {
    dt: f64,
    kind: PropKind,
}

#[derive(Debug, Clone)]
enum PropKind {
    Diagonal(Vec<f64>),
    Wave(Vec<(f64, f64)>),
    Shift(usize),
    Dense(DMatrix<f64>),
}

impl Propagator {
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn apply(&self, v: &StateVector) -> StateVector {
        let c = v.coeffs();
        let out = match &self.kind {
            PropKind::Diagonal(f) => c.iter().zip(f).map(|(x, e)| x * e).collect(),
            PropKind::Wave(cs) => {
                let mut out = vec![0.0; c.len()];
                for (j, (co, si)) in cs.iter().enumerate() {
                    let (a, b) = (c[2 * j], c[2 * j + 1]);
                    out[2 * j] = a * co + b * si;
                    out[2 * j + 1] = -a * si + b * co;
                }
                out
            }
            PropKind::Shift(k) => {
                let n = c.len();
                let mut out = vec![0.0; n];
                if *k < n {
                    out[*k..].copy_from_slice(&c[..n - k]);
                }
                out
            }
            PropKind::Dense(m) => (m * DVector::from_column_slice(c)).as_slice().to_vec(),
        };
        StateVector::from_vec_unchecked(out)
    }
}
