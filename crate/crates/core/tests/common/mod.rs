//! Independent reference computations for the integration tests. These use
//! explicit inverses and dense designs rather than the factorized forms of
//! the library.

#![allow(dead_code, clippy::excessive_precision)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use usp_core::model::Dataset;

/// `P(X < h, Y < k)` for correlation `r`, from a 30-digit Plackett
/// integral `Φ(h)Φ(k) + ∫₀ʳ φ₂(h, k; ρ) dρ`.
pub const BVN_REFERENCE: [(f64, f64, f64, f64); 12] = [
    (0.0, 0.0, 0.5, 0.33333333333333333),
    (1.0, -0.5, 0.3, 0.28313842024448095),
    (-1.5, 0.7, -0.6, 0.019372920128727256),
    (2.0, 2.0, 0.9, 0.96786099223066087),
    (-2.5, -1.0, 0.95, 0.0062096598647374827),
    (0.3, 1.2, -0.97, 0.50284175197355977),
    (1.96, 1.96, 0.52, 0.95491662846486439),
    (-1.96, 1.96, 0.52, 0.024994746983387344),
    (0.5, -0.5, 0.999, 0.3085375387259869),
    (-3.0, 2.5, -0.2, 0.0013091917357814223),
    (1.0, 1.0, -0.999, 0.6826894921370859),
    (0.1, 0.2, 0.0, 0.3127005161682312),
];

pub fn inv(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().try_inverse().expect("invertible")
}

/// Dense `mp × p` design `I_p ⊗ x_j`.
pub fn design(x: &DVector<f64>, p: usize) -> DMatrix<f64> {
    let m = x.len();
    let mut d = DMatrix::zeros(m * p, p);
    for l in 0..p {
        for i in 0..m {
            d[(l * m + i, l)] = x[i];
        }
    }
    d
}

/// Precision-weighted conditional of `θ_j`:
/// `Σ = (V⁻¹ + A⁻¹)⁻¹`, `μ = Σ (V⁻¹ y + A⁻¹ Xᵀβ)`.
pub fn theta_conditional(y: &DVector<f64>, v: &DMatrix<f64>, a: &DMatrix<f64>, prior_mean: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let (vi, ai) = (inv(v), inv(a));
    let cov = inv(&(&vi + &ai));
    let mean = &cov * (vi * y + ai * prior_mean);
    (mean, cov)
}

/// Generalized least squares conditional of `β` under a flat prior.
pub fn beta_conditional(ds: &Dataset, thetas: &[DVector<f64>], a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let p = ds.p();
    let ai = inv(a);
    let dim = p * ds.m();
    let mut prec = DMatrix::zeros(dim, dim);
    let mut rhs = DVector::zeros(dim);
    for (g, t) in ds.groups().iter().zip(thetas) {
        let x = design(&g.x, p);
        prec += &x * &ai * x.transpose();
        rhs += &x * &ai * t;
    }
    let cov = inv(&prec);
    (&cov * rhs, cov)
}

pub fn log_mvn(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let d = x - mean;
    let p = x.len() as f64;
    -0.5 * (p * (2.0 * PI).ln() + cov.determinant().ln() + (d.transpose() * inv(cov) * &d)[(0, 0)])
}

/// `log p(A | θ, β)` up to a constant: Gaussian likelihood of the random
/// effects plus `−(p+1) log|V₀ + A|` (omitted when `v0` is `None`).
pub fn log_a_conditional(ds: &Dataset, thetas: &[DVector<f64>], beta: &DVector<f64>, a: &DMatrix<f64>, v0: Option<&DMatrix<f64>>) -> f64 {
    let p = ds.p();
    let lik: f64 = ds
        .groups()
        .iter()
        .zip(thetas)
        .map(|(g, t)| log_mvn(t, &(design(&g.x, p).transpose() * beta), a))
        .sum();
    let prior = v0.map(|v| -((p + 1) as f64) * (v + a).determinant().ln()).unwrap_or(0.0);
    lik + prior
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}
