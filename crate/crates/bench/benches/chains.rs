use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use usp_core::coverage::{evaluate_cell, CellSeeds};
use usp_core::datasets::{eight_schools, hospital_27};
use usp_core::experiments::{preset, Experiment, Scale};
use usp_core::linalg::SpdMatrix;
use usp_core::priors::{v0_arithmetic_mean, v0_harmonic_mean, PriorSpec};
use usp_core::sampler::SamplerConfig;
use usp_core::stochastics::{bivariate_normal_cdf, sample_inverse_wishart};
use usp_core::{run_chain, RngStream};

fn desk_chain(experiment: Experiment) -> SamplerConfig {
    let mut s = preset(experiment, Scale::Desk, 0).sampler;
    s.init_beta = usp_core::sampler::InitBeta::PooledMean;
    s
}

fn chains(c: &mut Criterion) {
    let es = eight_schools();
    let prior = PriorSpec::usp(v0_harmonic_mean(&es).unwrap(), "usp");
    let config = desk_chain(Experiment::EightSchools);
    c.bench_function("eight_schools_desk_chain", |b| {
        let mut seed = 0;
        b.iter(|| {
            seed += 1;
            run_chain(&es, &prior, &config, &mut RngStream::new(seed, 0)).unwrap()
        })
    });

    let h = hospital_27();
    let prior = PriorSpec::usp(v0_arithmetic_mean(&h).unwrap(), "usp");
    let config = desk_chain(Experiment::Hospital);
    let mut group = c.benchmark_group("hospital");
    group.sample_size(10);
    group.bench_function("hospital_desk_chain", |b| {
        let mut seed = 0;
        b.iter(|| {
            seed += 1;
            run_chain(&h, &prior, &config, &mut RngStream::new(seed, 0)).unwrap()
        })
    });
    group.finish();
}

fn primitives(c: &mut Criterion) {
    c.bench_function("bivariate_normal_cdf", |b| {
        b.iter(|| bivariate_normal_cdf(black_box(1.2), black_box(-0.4), black_box(0.52)) + bivariate_normal_cdf(black_box(0.3), black_box(0.9), black_box(0.95)))
    });
    let scale = SpdMatrix::from_row_slice(2, &[250.0, 80.0, 80.0, 430.0]).unwrap();
    let mut rng = RngStream::new(1, 0);
    c.bench_function("inverse_wishart_draw_2x2", |b| b.iter(|| sample_inverse_wishart(black_box(40.0), &scale, &mut rng).unwrap()));
}

fn small_cell(c: &mut Criterion) {
    let run = preset(Experiment::EightSchools, Scale::Desk, 1).resolve().unwrap();
    let mut gen = run.grid[2].clone();
    gen.n_sim = 10;
    let mut group = c.benchmark_group("cell");
    group.sample_size(10);
    group.bench_function("eight_schools_cell_10_sims", |b| {
        b.iter(|| evaluate_cell(&run.dataset, &run.priors[0], &gen, &run.config.sampler, 0.95, CellSeeds::derive(1, 0, 2)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, chains, primitives, small_cell);
criterion_main!(benches);
