//! Normal-Normal model algebra.
//!
//! Two-level structure for groups `j = 1..k`:
//!
//! ```text
//! y_j | θ_j    ~ N_p(θ_j, V_j)
//! θ_j | A, β   ~ N_p(X_jᵀ β, A)
//! ```
//!
//! `X_j` is the `mp × p` block-diagonal design with the covariate vector `x_j`
//! repeated along its diagonal, so `β` is laid out component-major: entries
//! `l*m .. (l+1)*m` are the regression coefficients of component `l`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::SpdMatrix;
use crate::priors::PriorSpec;

#[derive(Clone, Debug, PartialEq)]
pub struct GroupObservation {
    pub y: DVector<f64>,
    pub v: SpdMatrix,
    pub x: DVector<f64>,
}

impl GroupObservation {
    pub fn new(y: DVector<f64>, v: SpdMatrix, x: DVector<f64>) -> Result<Self> {
        if y.is_empty() || x.is_empty() {
            return Err(Error::InvalidArgument("need p >= 1 and m >= 1".into()));
        }
        v.check_dim(y.len(), "sampling covariance vs estimate")?;
        if y.iter().chain(x.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite observation".into()));
        }
        Ok(GroupObservation { y, v, x })
    }

    /// Univariate group with an intercept-only design.
    pub fn scalar(y: f64, v: f64) -> Result<Self> {
        Self::new(
            DVector::from_element(1, y),
            SpdMatrix::scalar(v)?,
            DVector::from_element(1, 1.0),
        )
    }

    pub fn dim(&self) -> usize {
        self.y.len()
    }

    pub fn covariates(&self) -> usize {
        self.x.len()
    }

    /// `X_jᵀ β`.
    pub fn regression_mean(&self, beta: &DVector<f64>) -> DVector<f64> {
        let (p, m) = (self.dim(), self.covariates());
        DVector::from_fn(p, |l, _| {
            (0..m).map(|i| self.x[i] * beta[l * m + i]).sum::<f64>()
        })
    }

    /// The explicit `mp × p` design matrix `X_j`.
    pub fn design(&self) -> DMatrix<f64> {
        let (p, m) = (self.dim(), self.covariates());
        let mut d = DMatrix::zeros(m * p, p);
        for l in 0..p {
            for i in 0..m {
                d[(l * m + i, l)] = self.x[i];
            }
        }
        d
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    label: String,
    groups: Vec<GroupObservation>,
}

impl Dataset {
    pub fn new(label: impl Into<String>, groups: Vec<GroupObservation>) -> Result<Self> {
        if groups.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "a dataset needs at least 2 groups, got {}",
                groups.len()
            )));
        }
        let (p, m) = (groups[0].dim(), groups[0].covariates());
        for (j, g) in groups.iter().enumerate() {
            if g.dim() != p || g.covariates() != m {
                return Err(Error::InvalidGroup {
                    group: j + 1,
                    message: format!(
                        "shape (p={}, m={}) differs from group 1 (p={p}, m={m})",
                        g.dim(),
                        g.covariates()
                    ),
                });
            }
        }
        Ok(Dataset {
            label: label.into(),
            groups,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn groups(&self) -> &[GroupObservation] {
        &self.groups
    }

    pub fn k(&self) -> usize {
        self.groups.len()
    }

    pub fn p(&self) -> usize {
        self.groups[0].dim()
    }

    pub fn m(&self) -> usize {
        self.groups[0].covariates()
    }

    /// Same covariances and covariates, new estimates.
    pub fn with_estimates(&self, ys: Vec<DVector<f64>>) -> Result<Dataset> {
        if ys.len() != self.k() {
            return Err(Error::DimensionMismatch {
                expected: self.k(),
                found: ys.len(),
                context: "number of groups",
            });
        }
        let groups = self
            .groups
            .iter()
            .zip(ys)
            .map(|(g, y)| GroupObservation::new(y, g.v.clone(), g.x.clone()))
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(self.label.clone(), groups)
    }
}

/// Second-level parameters `(A, β)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperState {
    pub a: SpdMatrix,
    pub beta: DVector<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianMoments {
    pub mean: DVector<f64>,
    pub cov: SpdMatrix,
}

impl GaussianMoments {
    pub fn new(mean: DVector<f64>, cov: SpdMatrix) -> Result<Self> {
        cov.check_dim(mean.len(), "mean vs covariance")?;
        Ok(GaussianMoments { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// `B = V (V + A)⁻¹`.
pub fn shrinkage_matrix(v: &SpdMatrix, a: &SpdMatrix) -> Result<DMatrix<f64>> {
    let total = v.add(a)?;
    // V and V + A are symmetric, so B = ((V + A)⁻¹ V)ᵀ.
    Ok(total.solve_matrix(v.matrix()).transpose())
}

/// Conditional posterior of `θ_j` given `(A, β)` and `y_j`:
/// mean `(I − B)y + B Xᵀβ`, covariance `(I − B)V`.
pub fn conditional_theta_moments(obs: &GroupObservation, state: &HyperState) -> Result<GaussianMoments> {
    let p = obs.dim();
    state.a.check_dim(p, "A vs group dimension")?;
    if state.beta.len() != p * obs.covariates() {
        return Err(Error::DimensionMismatch {
            expected: p * obs.covariates(),
            found: state.beta.len(),
            context: "beta length",
        });
    }
    let prior_mean = obs.regression_mean(&state.beta);
    if p == 1 {
        let (v, a) = (obs.v.matrix()[(0, 0)], state.a.matrix()[(0, 0)]);
        let total = v + a;
        let mean = (a * obs.y[0] + v * prior_mean[0]) / total;
        let var = a * v / total;
        return GaussianMoments::new(DVector::from_element(1, mean), SpdMatrix::scalar(var)?);
    }
    let total = obs.v.add(&state.a)?;
    // I − B = A (V + A)⁻¹, which avoids cancellation when A is small.
    let mean = state.a.matrix() * total.solve(&obs.y) + obs.v.matrix() * total.solve(&prior_mean);
    let cov = state.a.matrix() * total.solve_matrix(obs.v.matrix());
    GaussianMoments::new(mean, SpdMatrix::new(cov)?)
}

/// `G = Σ_j x_j x_jᵀ`; singular when the covariates are collinear.
pub fn covariate_gram(dataset: &Dataset) -> Result<SpdMatrix> {
    let m = dataset.m();
    let mut g = DMatrix::zeros(m, m);
    for grp in dataset.groups() {
        g += &grp.x * grp.x.transpose();
    }
    SpdMatrix::new(g).map_err(|_| Error::RankDeficientDesign)
}

/// Conditional posterior of `β` given `θ` and `A` under a flat prior on `β`.
///
/// Because every `X_j` is `I_p ⊗ x_j`, the precision `Σ_j X_j A⁻¹ X_jᵀ`
/// factors as `A⁻¹ ⊗ G`, giving `Σ_β = A ⊗ G⁻¹` and a mean that is the
/// per-component least-squares fit `G⁻¹ Σ_j x_j θ_lj`.
pub fn conditional_beta_moments(
    dataset: &Dataset,
    thetas: &[DVector<f64>],
    a: &SpdMatrix,
) -> Result<GaussianMoments> {
    let (p, m) = (dataset.p(), dataset.m());
    check_thetas(dataset, thetas)?;
    a.check_dim(p, "A vs dataset dimension")?;
    let gram = covariate_gram(dataset)?;

    let mut mean = DVector::zeros(m * p);
    for l in 0..p {
        let mut rhs = DVector::zeros(m);
        for (grp, theta) in dataset.groups().iter().zip(thetas) {
            rhs.axpy(theta[l], &grp.x, 1.0);
        }
        mean.rows_mut(l * m, m).copy_from(&gram.solve(&rhs));
    }

    let gram_inv = gram.solve_matrix(&DMatrix::identity(m, m));
    let cov = a.matrix().kronecker(&gram_inv);
    GaussianMoments::new(mean, SpdMatrix::new(cov)?)
}

pub(crate) fn check_thetas(dataset: &Dataset, thetas: &[DVector<f64>]) -> Result<()> {
    if thetas.len() != dataset.k() {
        return Err(Error::DimensionMismatch {
            expected: dataset.k(),
            found: thetas.len(),
            context: "number of random effects",
        });
    }
    if let Some(t) = thetas.iter().find(|t| t.len() != dataset.p()) {
        return Err(Error::DimensionMismatch {
            expected: dataset.p(),
            found: t.len(),
            context: "random effect length",
        });
    }
    Ok(())
}

/// Log USP density `−(p+1) log|V₀ + A|`, without its normalizing constant.
pub fn log_usp_density(a: &SpdMatrix, v0: &SpdMatrix) -> Result<f64> {
    let p = a.dim() as f64;
    Ok(-(p + 1.0) * v0.add(a)?.log_det())
}

/// `S = Σ_j (θ_j − X_jᵀβ)(θ_j − X_jᵀβ)ᵀ`.
pub fn residual_scatter(dataset: &Dataset, thetas: &[DVector<f64>], beta: &DVector<f64>) -> Result<DMatrix<f64>> {
    check_thetas(dataset, thetas)?;
    let p = dataset.p();
    if beta.len() != p * dataset.m() {
        return Err(Error::DimensionMismatch {
            expected: p * dataset.m(),
            found: beta.len(),
            context: "beta length",
        });
    }
    let mut s = DMatrix::zeros(p, p);
    for (grp, theta) in dataset.groups().iter().zip(thetas) {
        let r = theta - grp.regression_mean(beta);
        s.ger(1.0, &r, &r, 1.0);
    }
    Ok(s)
}

/// Log conditional density of `A` from a precomputed residual scatter `S`
/// over `k` groups: `Σ_j log N_p(θ_j | X_jᵀβ, A)` plus the prior term.
pub fn log_conditional_a_from_scatter(a: &SpdMatrix, scatter: &DMatrix<f64>, k: usize, prior: &PriorSpec) -> Result<f64> {
    let p = a.dim();
    if scatter.nrows() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: scatter.nrows(),
            context: "scatter vs A",
        });
    }
    let k = k as f64;
    let likelihood = -0.5 * k * (p as f64 * (2.0 * PI).ln() + a.log_det()) - 0.5 * a.inverse_trace_product(scatter);
    Ok(likelihood + prior.log_density(a)?)
}

/// Log of the conditional density of `A` given `θ`, `β` and the data, up to
/// a constant that does not depend on `A`.
pub fn log_conditional_a_density(
    a: &SpdMatrix,
    dataset: &Dataset,
    thetas: &[DVector<f64>],
    beta: &DVector<f64>,
    prior: &PriorSpec,
) -> Result<f64> {
    let s = residual_scatter(dataset, thetas, beta)?;
    log_conditional_a_from_scatter(a, &s, dataset.k(), prior)
}

/// `A = (1 − B₀) V₀ / B₀`.
pub fn b0_to_a_univariate(b0: f64, v0: f64) -> Result<f64> {
    if !(b0 > 0.0 && b0 <= 1.0) {
        return Err(Error::InvalidArgument(format!("B0 must lie in (0, 1], got {b0}")));
    }
    if !(v0 > 0.0) {
        return Err(Error::InvalidArgument(format!("V0 must be positive, got {v0}")));
    }
    Ok((1.0 - b0) * v0 / b0)
}

/// `B₀ = V₀ / (V₀ + A)`.
pub fn a_to_b0_univariate(a: f64, v0: f64) -> f64 {
    v0 / (v0 + a)
}

/// The joint posterior is proper iff `k > p + m + 1`.
pub fn propriety_check(k: usize, p: usize, m: usize) -> bool {
    k > p + m + 1
}
