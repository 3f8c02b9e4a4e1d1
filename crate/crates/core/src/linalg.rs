//! Symmetric positive definite matrices backed by a cached Cholesky factor.
//!
//! Every determinant, inverse product and solve in the crate goes through the
//! lower factor `L` with `M = L Lᵀ`; no explicit inverse is ever formed.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Asymmetry above this absolute level is reported when a matrix is ingested.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct SpdMatrix {
    matrix: DMatrix<f64>,
    lower: DMatrix<f64>,
}

/// Lower Cholesky factor of a symmetric matrix, or `None` when it is not
/// positive definite.
pub fn cholesky_lower(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if m.nrows() == 1 {
        let v = m[(0, 0)];
        return (v > 0.0 && v.is_finite()).then(|| DMatrix::from_element(1, 1, v.sqrt()));
    }
    Cholesky::new(m.clone()).map(Cholesky::unpack)
}

/// Solves `L x = b` in place for lower-triangular `L`.
pub fn forward_substitute(l: &DMatrix<f64>, b: &mut DVector<f64>) {
    l.solve_lower_triangular_unchecked_mut(b);
}

/// Solves `Lᵀ x = b` in place for lower-triangular `L`.
pub fn back_substitute(l: &DMatrix<f64>, b: &mut DVector<f64>) {
    l.tr_solve_lower_triangular_unchecked_mut(b);
}

impl SpdMatrix {
    /// Validates `m`, symmetrizing it as `(M + Mᵀ)/2` first.
    pub fn new(mut m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
                context: "square matrix",
            });
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidArgument("empty matrix".into()));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotPositiveDefinite("non-finite entry"));
        }
        let n = m.nrows();
        let mut asym = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (m[(i, j)], m[(j, i)]);
                asym = asym.max((a - b).abs());
                let avg = 0.5 * (a + b);
                m[(i, j)] = avg;
                m[(j, i)] = avg;
            }
        }
        if asym > SYMMETRY_TOLERANCE {
            log::warn!("symmetrizing matrix with asymmetry {asym:.3e}");
        }
        let lower = cholesky_lower(&m).ok_or(Error::NotPositiveDefinite("cholesky failed"))?;
        Ok(SpdMatrix { matrix: m, lower })
    }

    pub fn scalar(v: f64) -> Result<Self> {
        Self::new(DMatrix::from_element(1, 1, v))
    }

    pub fn from_row_slice(p: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != p * p {
            return Err(Error::DimensionMismatch {
                expected: p * p,
                found: entries.len(),
                context: "matrix entries",
            });
        }
        Self::new(DMatrix::from_row_slice(p, p, entries))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.len();
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::InvalidArgument("matrix rows must all have length p".into()));
        }
        Self::from_row_slice(p, &flat)
    }

    pub fn identity(p: usize) -> Self {
        SpdMatrix {
            matrix: DMatrix::identity(p, p),
            lower: DMatrix::identity(p, p),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Lower Cholesky factor.
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.lower
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    /// The single entry of a 1×1 matrix.
    pub fn as_scalar(&self) -> Option<f64> {
        (self.dim() == 1).then(|| self.matrix[(0, 0)])
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.lower.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// `c·M`. The factor is recomputed so that it always equals the one a
    /// deserialized copy of the matrix would get.
    pub fn scale(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::InvalidArgument(format!("scale factor must be positive, got {c}")));
        }
        Self::new(&self.matrix * c)
    }

    pub fn add(&self, other: &SpdMatrix) -> Result<Self> {
        self.check_dim(other.dim(), "matrix sum")?;
        Self::new(&self.matrix + &other.matrix)
    }

    /// Diagonal part of the matrix, as an SPD matrix.
    pub fn diagonal(&self) -> Self {
        let d = DMatrix::from_diagonal(&self.matrix.diagonal());
        let l = DMatrix::from_diagonal(&self.matrix.diagonal().map(f64::sqrt));
        SpdMatrix { matrix: d, lower: l }
    }

    pub fn check_dim(&self, p: usize, context: &'static str) -> Result<()> {
        if self.dim() != p {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: p,
                context,
            });
        }
        Ok(())
    }

    /// `M⁻¹ b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        forward_substitute(&self.lower, &mut x);
        back_substitute(&self.lower, &mut x);
        x
    }

    /// `M⁻¹ B`, column by column.
    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = b.clone();
        for mut col in out.column_iter_mut() {
            let mut c = DVector::from_iterator(col.len(), col.iter().copied());
            forward_substitute(&self.lower, &mut c);
            back_substitute(&self.lower, &mut c);
            col.copy_from(&c);
        }
        out
    }

    /// `bᵀ M⁻¹ b`.
    pub fn inverse_quadratic_form(&self, b: &DVector<f64>) -> f64 {
        let mut z = b.clone();
        forward_substitute(&self.lower, &mut z);
        z.norm_squared()
    }

    /// `tr(M⁻¹ S)` for symmetric `S`.
    pub fn inverse_trace_product(&self, s: &DMatrix<f64>) -> f64 {
        self.solve_matrix(s).trace()
    }
}

impl Serialize for SpdMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        matrix_rows(&self.matrix).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SpdMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(deserializer)?;
        SpdMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rejects_indefinite() {
        assert!(SpdMatrix::from_row_slice(2, &[1.0, 2.0, 2.0, 1.0]).is_err());
        assert!(SpdMatrix::scalar(0.0).is_err());
        assert!(SpdMatrix::scalar(f64::NAN).is_err());
    }

    #[test]
    fn symmetrizes_on_ingestion() {
        let m = SpdMatrix::from_row_slice(2, &[2.0, 1.0, 0.5, 3.0]).unwrap();
        assert_eq!(m.matrix()[(0, 1)], 0.75);
        assert_eq!(m.matrix()[(1, 0)], 0.75);
    }

    #[test]
    fn factor_reproduces_matrix() {
        let m = SpdMatrix::from_row_slice(3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]).unwrap();
        let l = m.factor();
        let back = l * l.transpose();
        assert_relative_eq!(back, m.matrix().clone(), epsilon = 1e-12);
        let det = m.matrix().clone().determinant();
        assert_relative_eq!(m.log_det(), det.ln(), epsilon = 1e-12);
    }

    #[test]
    fn solves_agree_with_dense_inverse() {
        let m = SpdMatrix::from_row_slice(2, &[2.0, 0.3, 0.3, 1.0]).unwrap();
        let b = DVector::from_vec(vec![1.0, -2.0]);
        let inv = m.matrix().clone().try_inverse().unwrap();
        assert_relative_eq!(m.solve(&b), &inv * &b, epsilon = 1e-12);
        assert_relative_eq!(m.inverse_quadratic_form(&b), (b.transpose() * &inv * &b)[0], epsilon = 1e-12);
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 4.0]);
        assert_relative_eq!(m.inverse_trace_product(&s), (&inv * &s).trace(), epsilon = 1e-12);
    }

    #[test]
    fn scale_keeps_factor_consistent() {
        let m = SpdMatrix::from_row_slice(2, &[2.0, 0.3, 0.3, 1.0]).unwrap();
        let s = m.scale(9.0).unwrap();
        let l = s.factor();
        assert_relative_eq!(l * l.transpose(), s.matrix().clone(), epsilon = 1e-12);
        assert!(m.scale(-1.0).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let m = SpdMatrix::from_row_slice(2, &[2.0, 0.3, 0.3, 1.0]).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(json, "[[2.0,0.3],[0.3,1.0]]");
        let back: SpdMatrix = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<SpdMatrix>("[[1.0,2.0],[2.0,1.0]]").is_err());
    }
}
