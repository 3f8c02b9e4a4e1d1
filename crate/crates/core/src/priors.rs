//! Priors on the second-level covariance `A`.
//!
//! The uniform shrinkage prior (USP) with shape `V₀` has density proportional
//! to `|V₀ + A|^{-(p+1)}` on positive definite `A`; the improper flat prior is
//! Lebesgue measure on the same cone. `β` always carries a flat prior.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SpdMatrix;
use crate::model::{log_usp_density, Dataset};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PriorKind {
    Usp { v0: SpdMatrix },
    ImproperFlat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    #[serde(flatten)]
    pub kind: PriorKind,
    pub description: String,
}

impl PriorSpec {
    pub fn usp(v0: SpdMatrix, description: impl Into<String>) -> Self {
        PriorSpec {
            kind: PriorKind::Usp { v0 },
            description: description.into(),
        }
    }

    pub fn flat() -> Self {
        PriorSpec {
            kind: PriorKind::ImproperFlat,
            description: "improper flat".into(),
        }
    }

    pub fn shape(&self) -> Option<&SpdMatrix> {
        match &self.kind {
            PriorKind::Usp { v0 } => Some(v0),
            PriorKind::ImproperFlat => None,
        }
    }

    pub fn is_flat(&self) -> bool {
        matches!(self.kind, PriorKind::ImproperFlat)
    }

    /// Unnormalized log prior density at `a`.
    pub fn log_density(&self, a: &SpdMatrix) -> Result<f64> {
        match &self.kind {
            PriorKind::Usp { v0 } => log_usp_density(a, v0),
            PriorKind::ImproperFlat => Ok(0.0),
        }
    }
}

/// `k (Σ_j V_j⁻¹)⁻¹`; for `p = 1` this is `k / Σ_j (1/V_j)`.
pub fn v0_harmonic_mean(dataset: &Dataset) -> Result<SpdMatrix> {
    let p = dataset.p();
    let eye = DMatrix::identity(p, p);
    let mut precision = DMatrix::zeros(p, p);
    for g in dataset.groups() {
        precision += g.v.solve_matrix(&eye);
    }
    let total = SpdMatrix::new(precision)?;
    SpdMatrix::new(total.solve_matrix(&eye) * dataset.k() as f64)
}

/// `(Σ_j V_j) / k`.
pub fn v0_arithmetic_mean(dataset: &Dataset) -> Result<SpdMatrix> {
    let p = dataset.p();
    let mut sum = DMatrix::zeros(p, p);
    for g in dataset.groups() {
        sum += g.v.matrix();
    }
    SpdMatrix::new(sum / dataset.k() as f64)
}

/// `δ · diag(base)`.
pub fn v0_scaled_diag(base: &SpdMatrix, delta: f64) -> Result<SpdMatrix> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    base.diagonal().scale(delta)
}
