use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use usp_core::coverage::{coverage_indicator, rb_component_terms, rb_coverage_term, univariate_generative_grid};
use usp_core::datasets::{eight_schools, hospital_27};
use usp_core::linalg::SpdMatrix;
use usp_core::model::residual_scatter;
use usp_core::priors::{v0_arithmetic_mean, v0_harmonic_mean, PriorSpec};
use usp_core::sampler::{inverse_wishart_log_ratio, InitA, SamplerConfig};
use usp_core::stochastics::{bivariate_normal_cdf, derive_seed, quantile_sorted, std_normal_cdf};
use usp_core::{evaluate_cell, CellSeeds, GenerativeConfig, GroupObservation};

fn spd2() -> impl Strategy<Value = SpdMatrix> {
    (0.2f64..20.0, -5.0f64..5.0, 0.2f64..20.0).prop_map(|(a, b, c)| {
        let l = DMatrix::from_row_slice(2, 2, &[a.sqrt(), 0.0, b, c.sqrt()]);
        SpdMatrix::new(&l * l.transpose()).unwrap()
    })
}

fn spd3() -> impl Strategy<Value = SpdMatrix> {
    proptest::collection::vec(-3.0f64..3.0, 6).prop_map(|v| {
        let l = DMatrix::from_row_slice(3, 3, &[v[0].abs() + 0.5, 0.0, 0.0, v[1], v[2].abs() + 0.5, 0.0, v[3], v[4], v[5].abs() + 0.5]);
        SpdMatrix::new(&l * l.transpose()).unwrap()
    })
}

fn tiny_chain() -> SamplerConfig {
    SamplerConfig {
        total_iterations: 500,
        burn_in: 100,
        thin: 2,
        ..SamplerConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spd_solve_and_log_det(m in spd3(), b in proptest::collection::vec(-10.0f64..10.0, 3)) {
        let b = DVector::from_vec(b);
        let x = m.solve(&b);
        let resid = (m.matrix() * &x - &b).norm();
        prop_assert!(resid < 1e-9 * (1.0 + b.norm()));
        prop_assert!((m.log_det() - m.matrix().determinant().ln()).abs() < 1e-10);
        let q = m.inverse_quadratic_form(&b);
        prop_assert!((q - b.dot(&x)).abs() < 1e-9 * (1.0 + q.abs()));
    }

    #[test]
    fn bivariate_cdf_is_a_bounded_symmetric_copula(h in -6.0f64..6.0, k in -6.0f64..6.0, r in -0.999f64..0.999) {
        let p = bivariate_normal_cdf(h, k, r);
        let (ph, pk) = (std_normal_cdf(h), std_normal_cdf(k));
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!(p >= (ph + pk - 1.0).max(0.0) - 1e-14);
        prop_assert!(p <= ph.min(pk) + 1e-14);
        prop_assert!((p - bivariate_normal_cdf(k, h, r)).abs() < 1e-14);
        // Complement: P(X < h, Y < k) + P(X < h, Y > k) = Φ(h).
        prop_assert!((p + bivariate_normal_cdf(h, -k, -r) - ph).abs() < 1e-13);
        prop_assert!(bivariate_normal_cdf(h + 0.3, k, r) >= p - 1e-15);
    }

    #[test]
    fn quantiles_are_monotone_and_bounded(mut v in proptest::collection::vec(-1e3f64..1e3, 1..200), q1 in 0.0f64..=1.0, q2 in 0.0f64..=1.0) {
        v.sort_by(f64::total_cmp);
        let (lo, hi) = (q1.min(q2), q1.max(q2));
        let (a, b) = (quantile_sorted(&v, lo).unwrap(), quantile_sorted(&v, hi).unwrap());
        prop_assert!(a <= b);
        prop_assert!(v[0] <= a && b <= v[v.len() - 1]);
        prop_assert_eq!(quantile_sorted(&v, 0.0).unwrap(), v[0]);
        prop_assert_eq!(quantile_sorted(&v, 1.0).unwrap(), v[v.len() - 1]);
    }

    #[test]
    fn derived_seeds_are_distinct(master in any::<u64>(), a in 0u64..1000, b in 0u64..1000) {
        prop_assume!(a != b);
        prop_assert_ne!(derive_seed(master, &[a]), derive_seed(master, &[b]));
        prop_assert_ne!(derive_seed(master, &[a, b]), derive_seed(master, &[b, a]));
        prop_assert_eq!(derive_seed(master, &[a, b]), derive_seed(master, &[a, b]));
        let c = CellSeeds::derive(master, a as usize, b as usize);
        prop_assert_ne!(c.data_seed, c.chain_seed);
    }

    #[test]
    fn inverse_wishart_ratio_is_antisymmetric(a in spd2(), b in spd2(), nu in 3.5f64..80.0, usp in any::<bool>()) {
        let h = hospital_27();
        let thetas: Vec<DVector<f64>> = h.groups().iter().map(|g| g.y.clone()).collect();
        let beta = DVector::from_vec(vec![12.0, 2.0, 12.0, 6.0]);
        let scatter = residual_scatter(&h, &thetas, &beta).unwrap();
        let prior = if usp { PriorSpec::usp(v0_arithmetic_mean(&h).unwrap(), "usp") } else { PriorSpec::flat() };
        let fwd = inverse_wishart_log_ratio(&a, &b, &scatter, h.k(), &prior, nu).unwrap();
        let rev = inverse_wishart_log_ratio(&b, &a, &scatter, h.k(), &prior, nu).unwrap();
        prop_assert!((fwd + rev).abs() < 1e-10 * (1.0 + fwd.abs()), "{} vs {}", fwd, rev);
        prop_assert!(inverse_wishart_log_ratio(&a, &a, &scatter, h.k(), &prior, nu).unwrap().abs() < 1e-12);
    }

    #[test]
    fn joint_term_is_below_each_marginal(
        a in spd2(),
        y in proptest::collection::vec(5.0f64..25.0, 2),
        half in proptest::collection::vec(0.1f64..10.0, 2),
        shift in proptest::collection::vec(-5.0f64..5.0, 2),
    ) {
        let h = hospital_27();
        let obs = &h.groups()[3];
        let obs = GroupObservation::new(DVector::from_vec(y), obs.v.clone(), obs.x.clone()).unwrap();
        let gen = GenerativeConfig::new(a.into_matrix(), vec![12.0, 2.0, 12.0, 6.0], 2, "g").unwrap();
        let centre = obs.y.clone();
        let intervals: Vec<(f64, f64)> = (0..2).map(|l| (centre[l] + shift[l] - half[l], centre[l] + shift[l] + half[l])).collect();
        let joint = rb_coverage_term(&obs, &gen, &intervals).unwrap();
        let comps = rb_component_terms(&obs, &gen, &intervals).unwrap();
        prop_assert!((0.0..=1.0).contains(&joint));
        for c in &comps {
            prop_assert!(joint <= c + 1e-12);
        }
        // Fréchet lower bound.
        prop_assert!(joint >= comps[0] + comps[1] - 1.0 - 1e-12);
    }
}

#[test]
fn indicator_uses_strict_inequalities() {
    let t = DVector::from_vec(vec![1.0, 2.0]);
    assert_eq!(coverage_indicator(&t, &[(0.0, 1.5), (1.0, 3.0)]), 1);
    assert_eq!(coverage_indicator(&t, &[(1.0, 1.5), (1.0, 3.0)]), 0);
    assert_eq!(coverage_indicator(&t, &[(0.0, 1.5), (1.0, 2.0)]), 0);
    assert_eq!(coverage_indicator(&t, &[(0.0, 1.5)]), 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    /// Intervals at 0.90 are nested in those at 0.95 built from the same
    /// draws, so every per-group RB estimate is ordered at matched seeds.
    #[test]
    fn rb_is_monotone_in_level(master in any::<u64>(), b0 in 0.05f64..0.95) {
        let es = eight_schools();
        let v0 = v0_harmonic_mean(&es).unwrap();
        let gen = univariate_generative_grid(v0.as_scalar().unwrap(), &[b0], &[7.95], 4).unwrap().remove(0);
        let prior = PriorSpec::usp(v0, "usp");
        let chain = SamplerConfig { init_a: InitA::HarmonicMean, ..tiny_chain() };
        let seeds = CellSeeds::derive(master, 0, 0);
        let lo = evaluate_cell(&es, &prior, &gen, &chain, 0.90, seeds).unwrap();
        let hi = evaluate_cell(&es, &prior, &gen, &chain, 0.95, seeds).unwrap();
        for (a, b) in lo.per_group_rb.iter().zip(&hi.per_group_rb) {
            prop_assert!(a <= b);
        }
        prop_assert!(lo.overall_naive <= hi.overall_naive);
        prop_assert!(lo.overall_component_rb <= hi.overall_component_rb);
    }
}
