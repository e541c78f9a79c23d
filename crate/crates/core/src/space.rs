//! State-space structures: norms, duality pairings and duality-map selections.
//!
//! Six concrete structures are supported:
//!
//! | variant       | coefficients                         | norm                                  |
//! |---------------|--------------------------------------|---------------------------------------|
//! | `FiniteDim`   | `x ∈ ℝⁿ`                             | Euclidean                             |
//! | `SpectralL2`  | `⟨y, φ_j⟩`, `φ_j = √2 sin(jπx)`      | `(Σ c_j²)^½`                          |
//! | `EnergyWave`  | interleaved `(α_j, β_j)` mode pairs  | `(Σ λ_j (α_j² + β_j²))^½`             |
//! | `GridL1`      | cell values (midpoint rule)          | `Σ |v_i| dx`                          |
//! | `GridL2`      | cell values (midpoint rule)          | `(Σ v_i² dx)^½`                       |
//! | `GridSup`     | nodal values                         | `max |v_i|`                           |
//!
//! For the wave energy space the pair `(α_j, β_j)` encodes
//! `y₁ = Σ α_j φ_j` and `y₂ = Σ √λ_j β_j φ_j`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SpaceDescriptor {
    FiniteDim { n: usize },
    SpectralL2 { eigenvalues: Vec<f64> },
    EnergyWave { eigenvalues: Vec<f64> },
    GridL1 { n: usize, dx: f64 },
    GridL2 { n: usize, dx: f64 },
    GridSup { n: usize, dx: f64 },
}

/// Eigenvalues `(jπ)²`, `j = 1..=n`, of the Dirichlet Laplacian on (0, 1).
pub fn dirichlet_eigenvalues(n: usize) -> Vec<f64> {
    (1..=n).map(|j| (j as f64 * PI).powi(2)).collect()
}

impl SpaceDescriptor {
    pub fn finite_dim(n: usize) -> Result<Self> {
        Self::FiniteDim { n }.validated()
    }

    pub fn dirichlet_spectral(modes: usize) -> Result<Self> {
        Self::SpectralL2 {
            eigenvalues: dirichlet_eigenvalues(modes),
        }
        .validated()
    }

    pub fn dirichlet_energy(modes: usize) -> Result<Self> {
        Self::EnergyWave {
            eigenvalues: dirichlet_eigenvalues(modes),
        }
        .validated()
    }

    pub fn grid_l1(n: usize, dx: f64) -> Result<Self> {
        Self::GridL1 { n, dx }.validated()
    }

    pub fn grid_l2(n: usize, dx: f64) -> Result<Self> {
        Self::GridL2 { n, dx }.validated()
    }

    pub fn grid_sup(n: usize, dx: f64) -> Result<Self> {
        Self::GridSup { n, dx }.validated()
    }

    /// Checks the structural invariants and returns `self` unchanged.
    pub fn validated(self) -> Result<Self> {
        match &self {
            Self::FiniteDim { n } if *n == 0 => Err(Error::validation("n", "dimension must be ≥ 1")),
            Self::SpectralL2 { eigenvalues } | Self::EnergyWave { eigenvalues } => {
                if eigenvalues.is_empty() {
                    return Err(Error::validation("eigenvalues", "mode count must be ≥ 1"));
                }
                if eigenvalues.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
                    return Err(Error::validation("eigenvalues", "must be finite and positive"));
                }
                if eigenvalues.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::validation("eigenvalues", "must be strictly increasing"));
                }
                Ok(self)
            }
            Self::GridL1 { n, dx } | Self::GridL2 { n, dx } | Self::GridSup { n, dx } => {
                if *n == 0 {
                    Err(Error::validation("n", "grid size must be ≥ 1"))
                } else if !(dx.is_finite() && *dx > 0.0) {
                    Err(Error::validation("dx", "spacing must be finite and positive"))
                } else {
                    Ok(self)
                }
            }
            _ => Ok(self),
        }
    }

    /// Number of stored coefficients (2N for the wave energy space).
    pub fn dim(&self) -> usize {
        match self {
            Self::FiniteDim { n } => *n,
            Self::SpectralL2 { eigenvalues } => eigenvalues.len(),
            Self::EnergyWave { eigenvalues } => 2 * eigenvalues.len(),
            Self::GridL1 { n, .. } | Self::GridL2 { n, .. } | Self::GridSup { n, .. } => *n,
        }
    }

    pub fn is_hilbert(&self) -> bool {
        !matches!(self, Self::GridL1 { .. } | Self::GridSup { .. })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::FiniteDim { .. } => "finite-dimensional",
            Self::SpectralL2 { .. } => "spectral L2",
            Self::EnergyWave { .. } => "wave energy",
            Self::GridL1 { .. } => "grid L1",
            Self::GridL2 { .. } => "grid L2",
            Self::GridSup { .. } => "grid sup-norm",
        }
    }

    /// Weight of coefficient `i` in the Hilbert inner product (`⟨v, w⟩ = Σ wᵢ vᵢ wᵢ`).
    /// `None` for the non-Hilbert grid spaces.
    pub(crate) fn hilbert_weight(&self, i: usize) -> Option<f64> {
        match self {
            Self::FiniteDim { .. } | Self::SpectralL2 { .. } => Some(1.0),
            Self::EnergyWave { eigenvalues } => Some(eigenvalues[i / 2]),
            Self::GridL2 { dx, .. } => Some(*dx),
            Self::GridL1 { .. } | Self::GridSup { .. } => None,
        }
    }

    pub(crate) fn check(&self, v: &StateVector) -> Result<()> {
        if v.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: v.dim(),
            });
        }
        Ok(())
    }
}

/// Coefficient array of a state, interpreted relative to a [`SpaceDescriptor`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    coeffs: Vec<f64>,
}

impl StateVector {
    pub fn new(space: &SpaceDescriptor, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                got: coeffs.len(),
            });
        }
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::validation(format!("coeffs[{i}]"), "entries must be finite"));
        }
        Ok(Self { coeffs })
    }

    pub fn zeros(space: &SpaceDescriptor) -> Self {
        Self {
            coeffs: vec![0.0; space.dim()],
        }
    }

    /// Unit coefficient vector `e_i`.
    pub fn basis(space: &SpaceDescriptor, i: usize) -> Self {
        let mut v = Self::zeros(space);
        v.coeffs[i] = 1.0;
        v
    }

    pub(crate) fn from_vec_unchecked(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::from_vec_unchecked(self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_vec_unchecked(self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::from_vec_unchecked(self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect())
    }
}

/// A selected element of the duality map `J(v)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DualityElement {
    /// Hilbert identification `J(v) = v`.
    SameSpace(Vec<f64>),
    /// Bounded function on the L¹ grid (cell values).
    BoundedFn(Vec<f64>),
    /// `weight · δ_{node}` on the sup-norm grid.
    PointMass { index: usize, weight: f64 },
}

impl DualityElement {
    fn kind(&self) -> &'static str {
        match self {
            Self::SameSpace(_) => "same-space",
            Self::BoundedFn(_) => "bounded function",
            Self::PointMass { .. } => "point mass",
        }
    }
}

pub fn norm(space: &SpaceDescriptor, v: &StateVector) -> Result<f64> {
    space.check(v)?;
    Ok(norm_unchecked(space, v.coeffs()))
}

pub(crate) fn norm_unchecked(space: &SpaceDescriptor, c: &[f64]) -> f64 {
    match space {
        SpaceDescriptor::FiniteDim { .. } | SpaceDescriptor::SpectralL2 { .. } => {
            c.iter().map(|x| x * x).sum::<f64>().sqrt()
        }
        SpaceDescriptor::EnergyWave { eigenvalues } => c
            .chunks_exact(2)
            .zip(eigenvalues)
            .map(|(ab, l)| l * (ab[0] * ab[0] + ab[1] * ab[1]))
            .sum::<f64>()
            .sqrt(),
        SpaceDescriptor::GridL1 { dx, .. } => c.iter().map(|x| x.abs()).sum::<f64>() * dx,
        SpaceDescriptor::GridL2 { dx, .. } => (c.iter().map(|x| x * x).sum::<f64>() * dx).sqrt(),
        SpaceDescriptor::GridSup { .. } => c.iter().fold(0.0, |m, x| m.max(x.abs())),
    }
}

/// Hilbert inner product of two states; errors on L¹/sup spaces.
pub fn inner(space: &SpaceDescriptor, v: &StateVector, w: &StateVector) -> Result<f64> {
    space.check(v)?;
    space.check(w)?;
    if !space.is_hilbert() {
        return Err(Error::Unsupported(format!(
            "{} space has no inner product",
            space.kind()
        )));
    }
    Ok(inner_unchecked(space, v.coeffs(), w.coeffs()))
}

pub(crate) fn inner_unchecked(space: &SpaceDescriptor, v: &[f64], w: &[f64]) -> f64 {
    v.iter()
        .zip(w)
        .enumerate()
        .map(|(i, (a, b))| space.hilbert_weight(i).unwrap_or(1.0) * a * b)
        .sum()
}

/// Duality pairing `⟨v, w⟩` between a state and a dual element.
pub fn pairing(space: &SpaceDescriptor, v: &StateVector, w: &DualityElement) -> Result<f64> {
    space.check(v)?;
    let incompatible = || Error::IncompatibleDual {
        dual: w.kind(),
        space: space.kind(),
    };
    match (space, w) {
        (s, DualityElement::SameSpace(c)) if s.is_hilbert() => {
            if c.len() != s.dim() {
                return Err(Error::DimensionMismatch {
                    expected: s.dim(),
                    got: c.len(),
                });
            }
            Ok(inner_unchecked(s, v.coeffs(), c))
        }
        (SpaceDescriptor::GridL1 { dx, n }, DualityElement::BoundedFn(xi)) => {
            if xi.len() != *n {
                return Err(Error::DimensionMismatch {
                    expected: *n,
                    got: xi.len(),
                });
            }
            Ok(v.coeffs().iter().zip(xi).map(|(a, b)| a * b).sum::<f64>() * dx)
        }
        (SpaceDescriptor::GridSup { n, .. }, DualityElement::PointMass { index, weight }) => {
            if index >= n {
                return Err(Error::DimensionMismatch {
                    expected: *n,
                    got: index + 1,
                });
            }
            Ok(v.coeffs()[*index] * weight)
        }
        _ => Err(incompatible()),
    }
}

/// Norm of a dual element in the dual space.
pub fn dual_norm(space: &SpaceDescriptor, w: &DualityElement) -> Result<f64> {
    match (space, w) {
        (s, DualityElement::SameSpace(c)) if s.is_hilbert() => Ok(norm_unchecked(s, c)),
        (SpaceDescriptor::GridL1 { .. }, DualityElement::BoundedFn(xi)) => {
            Ok(xi.iter().fold(0.0, |m, x| m.max(x.abs())))
        }
        (SpaceDescriptor::GridSup { .. }, DualityElement::PointMass { weight, .. }) => Ok(weight.abs()),
        _ => Err(Error::IncompatibleDual {
            dual: w.kind(),
            space: space.kind(),
        }),
    }
}

/// Smallest index attaining `max |v_i|`.
pub(crate) fn argmax_abs(c: &[f64]) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, x) in c.iter().enumerate() {
        if x.abs() > best_val {
            best = i;
            best_val = x.abs();
        }
    }
    best
}

/// Deterministic selection from the duality map `J(v)`.
///
/// L¹ uses `sign(0) := 0`; the sup-norm selection puts the point mass on the
/// smallest index where `|v|` is maximal.
pub fn duality_select(space: &SpaceDescriptor, v: &StateVector) -> Result<DualityElement> {
    space.check(v)?;
    let c = v.coeffs();
    Ok(match space {
        SpaceDescriptor::GridL1 { .. } => {
            let nv = norm_unchecked(space, c);
            DualityElement::BoundedFn(c.iter().map(|x| nv * sign0(*x)).collect())
        }
        SpaceDescriptor::GridSup { .. } => {
            let i = argmax_abs(c);
            DualityElement::PointMass { index: i, weight: c[i] }
        }
        _ => DualityElement::SameSpace(c.to_vec()),
    })
}

fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}
