use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::linalg::SpdMatrix;

/// `ln Γ_p(a)`.
pub fn ln_multivariate_gamma(p: usize, a: f64) -> f64 {
    let pf = p as f64;
    pf * (pf - 1.0) / 4.0 * PI.ln() + (1..=p).map(|i| ln_gamma(a + (1.0 - i as f64) / 2.0)).sum::<f64>()
}

fn check_dof(nu: f64, p: usize) -> Result<()> {
    if !(nu > p as f64 - 1.0) || !nu.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "degrees of freedom {nu} must exceed p - 1 = {}",
            p as f64 - 1.0
        )));
    }
    Ok(())
}

/// Draws `A ~ IW(ν, Ψ)`, i.e. `A⁻¹ ~ Wishart(ν, Ψ⁻¹)`, with mean `Ψ/(ν − p − 1)`.
///
/// With `Ψ = U Uᵀ` and the Bartlett factor `T` (lower, `T_ii² ~ χ²_{ν−i+1}`,
/// `T_ij ~ N(0,1)` below the diagonal), `A⁻¹ = U⁻ᵀ T Tᵀ U⁻¹`, so
/// `A = Wᵀ W` with `W = T⁻¹ Uᵀ` obtained by forward substitution.
pub fn sample_inverse_wishart<R: Rng + ?Sized>(nu: f64, scale: &SpdMatrix, rng: &mut R) -> Result<SpdMatrix> {
    let p = scale.dim();
    check_dof(nu, p)?;
    let mut t = DMatrix::<f64>::zeros(p, p);
    for i in 0..p {
        let chi = ChiSquared::new(nu - i as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        t[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            t[(i, j)] = rng.sample(StandardNormal);
        }
    }
    if p == 1 {
        let s = scale.matrix()[(0, 0)];
        return SpdMatrix::scalar(s / (t[(0, 0)] * t[(0, 0)]));
    }
    let mut w = scale.factor().transpose();
    if !t.solve_lower_triangular_mut(&mut w) {
        return Err(Error::NotPositiveDefinite("singular Bartlett factor"));
    }
    SpdMatrix::new(w.transpose() * w)
}

/// Fully normalized log density of `IW(ν, Ψ)` at `a`.
pub fn log_inverse_wishart_density(a: &SpdMatrix, nu: f64, scale: &SpdMatrix) -> Result<f64> {
    let p = a.dim();
    check_dof(nu, p)?;
    scale.check_dim(p, "inverse Wishart scale")?;
    let pf = p as f64;
    Ok(0.5 * nu * scale.log_det()
        - 0.5 * nu * pf * 2f64.ln()
        - ln_multivariate_gamma(p, 0.5 * nu)
        - 0.5 * (nu + pf + 1.0) * a.log_det()
        - 0.5 * a.inverse_trace_product(scale.matrix()))
}
