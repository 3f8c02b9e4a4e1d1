use std::f64::consts::PI;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::SpdMatrix;
use crate::model::GaussianMoments;

pub fn standard_normal_vector<R: Rng + ?Sized>(p: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(p, |_, _| rng.sample(StandardNormal))
}

/// Draws `mean + L z` with `L` the lower Cholesky factor of the covariance.
pub fn sample_mvn<R: Rng + ?Sized>(moments: &GaussianMoments, rng: &mut R) -> DVector<f64> {
    let z = standard_normal_vector(moments.dim(), rng);
    &moments.mean + moments.cov.factor() * z
}

/// Fully normalized `log N_p(x | mean, cov)`.
pub fn log_mvn_density(x: &DVector<f64>, mean: &DVector<f64>, cov: &SpdMatrix) -> f64 {
    let p = x.len() as f64;
    let r = x - mean;
    -0.5 * (p * (2.0 * PI).ln() + cov.log_det() + cov.inverse_quadratic_form(&r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochastics::RngStream;
    use nalgebra::DMatrix;

    #[test]
    fn vanishing_covariance_returns_mean() {
        let m = GaussianMoments::new(
            DVector::from_vec(vec![1.5, -2.0]),
            SpdMatrix::identity(2).scale(1e-30).unwrap(),
        )
        .unwrap();
        let x = sample_mvn(&m, &mut RngStream::new(1, 0));
        assert!((x - &m.mean).amax() < 1e-10);
    }

    #[test]
    fn sample_covariance_matches_target() {
        let cov = SpdMatrix::from_row_slice(2, &[1.0, 0.5, 0.5, 1.0]).unwrap();
        let m = GaussianMoments::new(DVector::zeros(2), cov).unwrap();
        let mut rng = RngStream::new(11, 0);
        let n = 100_000;
        let mut sum = DVector::zeros(2);
        let mut outer = DMatrix::zeros(2, 2);
        for _ in 0..n {
            let x = sample_mvn(&m, &mut rng);
            sum += &x;
            outer += &x * x.transpose();
        }
        let mean = &sum / n as f64;
        let c = outer / n as f64 - &mean * mean.transpose();
        let target = [1.0, 0.5, 0.5, 1.0];
        for (got, want) in c.transpose().iter().zip(target) {
            assert!((got - want).abs() < 0.02, "{got} vs {want}");
        }
    }

    #[test]
    fn fixed_stream_is_bit_identical() {
        let m = GaussianMoments::new(DVector::zeros(3), SpdMatrix::identity(3)).unwrap();
        let a = sample_mvn(&m, &mut RngStream::new(5, 9));
        let b = sample_mvn(&m, &mut RngStream::new(5, 9));
        assert_eq!(a, b);
    }

    #[test]
    fn density_matches_univariate_formula() {
        let x = DVector::from_element(1, 1.3);
        let mu = DVector::from_element(1, 0.2);
        let v = 2.5;
        let got = log_mvn_density(&x, &mu, &SpdMatrix::scalar(v).unwrap());
        let want = -0.5 * (2.0 * PI * v).ln() - (1.1f64 * 1.1) / (2.0 * v);
        assert!((got - want).abs() < 1e-14);
    }
}
