//! Repeated-sampling frequency coverage of random-effect intervals.
//!
//! For one generative cell `(A_gen, β_gen)`, each of `n_sim` simulations draws
//! `θ_j ~ N(X_jᵀβ_gen, A_gen)` and `y_j ~ N(θ_j, V_j)`, fits the model, and
//! forms per-component posterior intervals. Coverage of group `j` is
//! estimated two ways: the naive indicator that every component of the true
//! `θ_j` lies inside its interval, and the Rao-Blackwellized term
//! `P(θ_j ∈ intervals | A_gen, β_gen, y_j)` computed from the exact
//! conditional posterior. The RB estimator is unbiased for the same coverage
//! probability and never has larger variance.
//!
//! For `p > 1` a second estimand is reported alongside: the per-component
//! marginal coverage `P(θ_lj ∈ interval_l | …)` averaged over `l`. For
//! `p = 1` the two coincide.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{matrix_rows, SpdMatrix};
use crate::model::{b0_to_a_univariate, conditional_theta_moments, propriety_check, Dataset, GroupObservation, HyperState};
use crate::priors::PriorSpec;
use crate::sampler::{interval_from_sorted, run_chain, InitBeta, SamplerConfig};
use crate::stochastics::{derive_seed, mvn_rectangle_prob, standard_normal_vector, std_normal_cdf, RngStream};

/// Shrinkage values `B₀ ∈ {0.05, 0.15, …, 0.95}` of the generative grids.
pub const B0_GRID: [f64; 10] = [0.05, 0.15, 0.25, 0.35, 0.45, 0.55, 0.65, 0.75, 0.85, 0.95];

/// Divisors `u_i` of the bivariate grid; with `A = V₀/u` each gives
/// `|V₀(V₀ + A)⁻¹| = (u/(1+u))²` close to the matching `B0_GRID` entry.
pub const U_GRID: [f64; 10] = [0.29, 0.63, 1.00, 1.45, 2.04, 2.87, 4.16, 6.47, 11.82, 38.50];

const DATA_STREAM_TAG: u64 = 0xDA7A;
const CHAIN_STREAM_TAG: u64 = 0xC4A1;

/// Generative `(A_gen, β_gen)` for one coverage cell. `A_gen` may be the zero
/// matrix, in which case every `θ_j` equals `X_jᵀβ_gen`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GenerativeRecord", into = "GenerativeRecord")]
pub struct GenerativeConfig {
    a_gen: Option<SpdMatrix>,
    dim: usize,
    pub beta_gen: Vec<f64>,
    pub n_sim: usize,
    pub label: String,
    /// Reference shrinkage (`B₀` or `|B₀|`) used as the x-axis of figures.
    pub shrinkage: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenerativeRecord {
    a_gen: Vec<Vec<f64>>,
    beta_gen: Vec<f64>,
    n_sim: usize,
    label: String,
    #[serde(default)]
    shrinkage: Option<f64>,
}

impl TryFrom<GenerativeRecord> for GenerativeConfig {
    type Error = Error;

    fn try_from(r: GenerativeRecord) -> Result<Self> {
        let p = r.a_gen.len();
        if r.a_gen.iter().any(|row| row.len() != p) {
            return Err(Error::InvalidArgument("a_gen must be square".into()));
        }
        let flat: Vec<f64> = r.a_gen.into_iter().flatten().collect();
        let mut g = GenerativeConfig::new(DMatrix::from_row_slice(p, p, &flat), r.beta_gen, r.n_sim, r.label)?;
        g.shrinkage = r.shrinkage;
        Ok(g)
    }
}

impl From<GenerativeConfig> for GenerativeRecord {
    fn from(g: GenerativeConfig) -> Self {
        GenerativeRecord {
            a_gen: matrix_rows(&g.a_gen_matrix()),
            beta_gen: g.beta_gen,
            n_sim: g.n_sim,
            label: g.label,
            shrinkage: g.shrinkage,
        }
    }
}

impl GenerativeConfig {
    pub fn new(a_gen: DMatrix<f64>, beta_gen: Vec<f64>, n_sim: usize, label: impl Into<String>) -> Result<Self> {
        let dim = a_gen.nrows();
        if dim == 0 || a_gen.ncols() != dim {
            return Err(Error::InvalidArgument("a_gen must be a non-empty square matrix".into()));
        }
        if n_sim == 0 {
            return Err(Error::InvalidArgument("n_sim must be positive".into()));
        }
        if beta_gen.is_empty() || !beta_gen.len().is_multiple_of(dim) {
            return Err(Error::InvalidArgument(format!(
                "beta_gen length {} is not a multiple of p = {dim}",
                beta_gen.len()
            )));
        }
        let a_gen = if a_gen.iter().all(|&v| v == 0.0) { None } else { Some(SpdMatrix::new(a_gen)?) };
        Ok(GenerativeConfig {
            a_gen,
            dim,
            beta_gen,
            n_sim,
            label: label.into(),
            shrinkage: None,
        })
    }

    pub fn with_shrinkage(mut self, shrinkage: f64) -> Self {
        self.shrinkage = Some(shrinkage);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `None` for the degenerate `A_gen = 0`.
    pub fn a_gen(&self) -> Option<&SpdMatrix> {
        self.a_gen.as_ref()
    }

    pub fn a_gen_matrix(&self) -> DMatrix<f64> {
        self.a_gen
            .as_ref()
            .map(|a| a.matrix().clone())
            .unwrap_or_else(|| DMatrix::zeros(self.dim, self.dim))
    }

    pub fn beta(&self) -> DVector<f64> {
        DVector::from_vec(self.beta_gen.clone())
    }

    fn check_template(&self, template: &Dataset) -> Result<()> {
        if template.p() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: template.p(),
                found: self.dim,
                context: "A_gen vs dataset dimension",
            });
        }
        if self.beta_gen.len() != template.p() * template.m() {
            return Err(Error::DimensionMismatch {
                expected: template.p() * template.m(),
                found: self.beta_gen.len(),
                context: "beta_gen length",
            });
        }
        Ok(())
    }
}

/// Draws true random effects and a mock dataset sharing the template's
/// `V_j` and covariates. All `θ_j` are drawn before any `y_j`.
pub fn generate_mock_dataset(
    template: &Dataset,
    gen: &GenerativeConfig,
    rng: &mut RngStream,
) -> Result<(Vec<DVector<f64>>, Dataset)> {
    gen.check_template(template)?;
    let beta = gen.beta();
    let thetas: Vec<DVector<f64>> = template
        .groups()
        .iter()
        .map(|g| {
            let mean = g.regression_mean(&beta);
            match gen.a_gen() {
                Some(a) => mean + a.factor() * standard_normal_vector(g.dim(), rng),
                None => mean,
            }
        })
        .collect();
    let ys = template
        .groups()
        .iter()
        .zip(&thetas)
        .map(|(g, theta)| theta + g.v.factor() * standard_normal_vector(g.dim(), rng))
        .collect();
    let mock = template.with_estimates(ys)?;
    Ok((thetas, mock))
}

/// 1 iff every component lies strictly inside its interval.
pub fn coverage_indicator(theta: &DVector<f64>, intervals: &[(f64, f64)]) -> u8 {
    let inside = theta.len() == intervals.len() && theta.iter().zip(intervals).all(|(&t, &(lo, hi))| lo < t && t < hi);
    inside as u8
}

/// Conditional probability, given `A_gen`, `β_gen` and the realized `y_j`,
/// that `θ_j` falls inside the intervals. The true `θ_j` does not enter.
pub fn rb_coverage_term(obs: &GroupObservation, gen: &GenerativeConfig, intervals: &[(f64, f64)]) -> Result<f64> {
    if intervals.len() != obs.dim() {
        return Err(Error::DimensionMismatch {
            expected: obs.dim(),
            found: intervals.len(),
            context: "intervals per group",
        });
    }
    let beta = gen.beta();
    let Some(a) = gen.a_gen() else {
        // Zero A_gen: the conditional posterior is a point mass at X_jᵀβ.
        return Ok(coverage_indicator(&obs.regression_mean(&beta), intervals) as f64);
    };
    let moments = conditional_theta_moments(obs, &HyperState { a: a.clone(), beta })?;
    let (lower, upper): (Vec<f64>, Vec<f64>) = intervals.iter().copied().unzip();
    if lower.iter().zip(&upper).any(|(l, u)| l >= u) {
        // A degenerate interval has probability zero under a continuous law.
        return Ok(0.0);
    }
    mvn_rectangle_prob(&moments, &lower, &upper)
}

/// Per-component marginal conditional coverage probabilities of `θ_j`.
pub fn rb_component_terms(obs: &GroupObservation, gen: &GenerativeConfig, intervals: &[(f64, f64)]) -> Result<Vec<f64>> {
    if intervals.len() != obs.dim() {
        return Err(Error::DimensionMismatch {
            expected: obs.dim(),
            found: intervals.len(),
            context: "intervals per group",
        });
    }
    let beta = gen.beta();
    let Some(a) = gen.a_gen() else {
        let mean = obs.regression_mean(&beta);
        return Ok(intervals
            .iter()
            .zip(mean.iter())
            .map(|(&(lo, hi), &t)| (lo < t && t < hi) as u8 as f64)
            .collect());
    };
    let moments = conditional_theta_moments(obs, &HyperState { a: a.clone(), beta })?;
    Ok(intervals
        .iter()
        .enumerate()
        .map(|(l, &(lo, hi))| {
            if lo >= hi {
                return 0.0;
            }
            let sd = moments.cov.matrix()[(l, l)].sqrt();
            let z = |v: f64| (v - moments.mean[l]) / sd;
            (std_normal_cdf(z(hi)) - std_normal_cdf(z(lo))).max(0.0)
        })
        .collect())
}

/// Seeds of one cell: mock data come from `(data_seed, i)` and the fit of
/// simulation `i` from `(chain_seed, i)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellSeeds {
    pub data_seed: u64,
    pub chain_seed: u64,
}

impl CellSeeds {
    /// Mock data depend only on the grid point, so every prior at the same
    /// grid point is evaluated on identical datasets.
    pub fn derive(master_seed: u64, prior_index: usize, grid_index: usize) -> Self {
        CellSeeds {
            data_seed: derive_seed(master_seed, &[DATA_STREAM_TAG, grid_index as u64]),
            chain_seed: derive_seed(master_seed, &[CHAIN_STREAM_TAG, prior_index as u64, grid_index as u64]),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellMetadata {
    pub prior: String,
    pub generative: String,
    pub shrinkage: Option<f64>,
    pub seeds: CellSeeds,
    pub n_sim: usize,
    pub chain: SamplerConfig,
    pub mean_acceptance_rate: f64,
    pub mean_theta_ess: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageResult {
    pub level: f64,
    pub per_group_rb: Vec<f64>,
    pub per_group_rb_var: Vec<f64>,
    pub per_group_naive: Vec<f64>,
    pub per_group_naive_var: Vec<f64>,
    pub overall_rb: f64,
    pub overall_rb_var: f64,
    pub overall_naive: f64,
    pub overall_naive_var: f64,
    /// Component-mean estimand, per group.
    pub per_group_component_rb: Vec<f64>,
    pub per_group_component_rb_var: Vec<f64>,
    pub overall_component_rb: f64,
    pub overall_component_rb_var: f64,
    pub overall_component_naive: f64,
    pub overall_component_naive_var: f64,
    pub metadata: CellMetadata,
}

impl CoverageResult {
    pub fn overall_rb_se(&self) -> f64 {
        self.overall_rb_var.sqrt()
    }

    pub fn overall_component_rb_se(&self) -> f64 {
        self.overall_component_rb_var.sqrt()
    }
}

struct SimulationOutcome {
    rb_terms: Vec<f64>,
    indicators: Vec<u8>,
    component_rb: Vec<f64>,
    component_naive: Vec<f64>,
    acceptance_rate: f64,
    mean_theta_ess: Option<f64>,
}

fn run_simulation(
    template: &Dataset,
    prior: &PriorSpec,
    gen: &GenerativeConfig,
    config: &SamplerConfig,
    level: f64,
    seeds: CellSeeds,
    index: usize,
) -> Result<SimulationOutcome> {
    let mut data_rng = RngStream::new(seeds.data_seed, index as u64);
    let mut chain_rng = RngStream::new(seeds.chain_seed, index as u64);
    let (truth, mock) = generate_mock_dataset(template, gen, &mut data_rng)?;
    let samples = run_chain(&mock, prior, config, &mut chain_rng)?;
    let mut rb_terms = Vec::with_capacity(mock.k());
    let mut indicators = Vec::with_capacity(mock.k());
    let mut component_rb = Vec::with_capacity(mock.k());
    let mut component_naive = Vec::with_capacity(mock.k());
    for (j, (obs, theta)) in mock.groups().iter().zip(&truth).enumerate() {
        let intervals = samples.thetas[j]
            .iter()
            .map(|draws| {
                let mut sorted = draws.clone();
                sorted.sort_by(f64::total_cmp);
                interval_from_sorted(&sorted, level)
            })
            .collect::<Result<Vec<_>>>()?;
        rb_terms.push(rb_coverage_term(obs, gen, &intervals)?);
        indicators.push(coverage_indicator(theta, &intervals));
        let p = obs.dim() as f64;
        component_rb.push(rb_component_terms(obs, gen, &intervals)?.iter().sum::<f64>() / p);
        let inside = theta.iter().zip(&intervals).filter(|(&t, &(lo, hi))| lo < t && t < hi).count();
        component_naive.push(inside as f64 / p);
    }
    Ok(SimulationOutcome {
        rb_terms,
        indicators,
        component_rb,
        component_naive,
        acceptance_rate: samples.acceptance_rate,
        mean_theta_ess: samples.mean_theta_ess(),
    })
}

/// Mean and the variance estimate `Σ(t − t̄)² / (n(n − 1))` of the mean.
fn mean_and_variance(terms: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = terms.clone().count() as f64;
    let mean = terms.clone().sum::<f64>() / n;
    let ss: f64 = terms.map(|t| (t - mean).powi(2)).sum();
    (mean, ss / (n * (n - 1.0)))
}

/// Evaluates one `(prior, generative)` cell. Simulations run on the current
/// rayon pool; the result does not depend on how they are scheduled.
pub fn evaluate_cell(
    template: &Dataset,
    prior: &PriorSpec,
    gen: &GenerativeConfig,
    chain_config: &SamplerConfig,
    level: f64,
    seeds: CellSeeds,
) -> Result<CoverageResult> {
    let (k, p, m) = (template.k(), template.p(), template.m());
    if !propriety_check(k, p, m) {
        return Err(Error::ImproperPosterior { k, p, m });
    }
    if gen.n_sim < 2 {
        return Err(Error::InvalidArgument(format!(
            "n_sim must be at least 2 for a variance estimate, got {}",
            gen.n_sim
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("level must lie in (0, 1), got {level}")));
    }
    gen.check_template(template)?;
    chain_config.validate(p)?;
    let mut config = chain_config.clone();
    if config.init_beta == InitBeta::Generative {
        config.init_beta = InitBeta::Explicit(gen.beta_gen.clone());
    }

    let outcomes: Vec<Result<SimulationOutcome>> = (0..gen.n_sim)
        .into_par_iter()
        .map(|i| run_simulation(template, prior, gen, &config, level, seeds, i))
        .collect();
    let outcomes = outcomes
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| Error::Simulation { index: i, source: Box::new(e) }))
        .collect::<Result<Vec<_>>>()?;

    let n = outcomes.len() as f64;
    let mut per_group_rb = Vec::with_capacity(k);
    let mut per_group_rb_var = Vec::with_capacity(k);
    let mut per_group_naive = Vec::with_capacity(k);
    let mut per_group_naive_var = Vec::with_capacity(k);
    let mut per_group_component_rb = Vec::with_capacity(k);
    let mut per_group_component_rb_var = Vec::with_capacity(k);
    let (mut component_naive, mut component_naive_var) = (0.0, 0.0);
    for j in 0..k {
        let (rb, rb_var) = mean_and_variance(outcomes.iter().map(|o| o.rb_terms[j]));
        let (naive, naive_var) = mean_and_variance(outcomes.iter().map(|o| o.indicators[j] as f64));
        per_group_rb.push(rb);
        per_group_rb_var.push(rb_var);
        per_group_naive.push(naive);
        per_group_naive_var.push(naive_var);
        let (c, c_var) = mean_and_variance(outcomes.iter().map(|o| o.component_rb[j]));
        per_group_component_rb.push(c);
        per_group_component_rb_var.push(c_var);
        let (c, c_var) = mean_and_variance(outcomes.iter().map(|o| o.component_naive[j]));
        component_naive += c;
        component_naive_var += c_var;
    }
    let kf = k as f64;
    let ess: Vec<f64> = outcomes.iter().filter_map(|o| o.mean_theta_ess).collect();
    Ok(CoverageResult {
        level,
        overall_rb: per_group_rb.iter().sum::<f64>() / kf,
        overall_rb_var: per_group_rb_var.iter().sum::<f64>() / (kf * kf),
        overall_naive: per_group_naive.iter().sum::<f64>() / kf,
        overall_naive_var: per_group_naive_var.iter().sum::<f64>() / (kf * kf),
        per_group_rb,
        per_group_rb_var,
        per_group_naive,
        per_group_naive_var,
        overall_component_rb: per_group_component_rb.iter().sum::<f64>() / kf,
        overall_component_rb_var: per_group_component_rb_var.iter().sum::<f64>() / (kf * kf),
        overall_component_naive: component_naive / kf,
        overall_component_naive_var: component_naive_var / (kf * kf),
        per_group_component_rb,
        per_group_component_rb_var,
        metadata: CellMetadata {
            prior: prior.description.clone(),
            generative: gen.label.clone(),
            shrinkage: gen.shrinkage,
            seeds,
            n_sim: gen.n_sim,
            chain: chain_config.clone(),
            mean_acceptance_rate: outcomes.iter().map(|o| o.acceptance_rate).sum::<f64>() / n,
            mean_theta_ess: (!ess.is_empty()).then(|| ess.iter().sum::<f64>() / ess.len() as f64),
        },
    })
}

/// `A_gen,i = (1 − B₀,i) V₀ / B₀,i`.
pub fn univariate_generative_grid(v0: f64, b0_list: &[f64], beta_gen: &[f64], n_sim: usize) -> Result<Vec<GenerativeConfig>> {
    b0_list
        .iter()
        .map(|&b0| {
            let a = b0_to_a_univariate(b0, v0)?;
            Ok(GenerativeConfig::new(DMatrix::from_element(1, 1, a), beta_gen.to_vec(), n_sim, format!("B0={b0}"))?
                .with_shrinkage(b0))
        })
        .collect()
}

/// `A_gen,i = base / u_i`, labelled by `|base (base + A_gen,i)⁻¹|`.
pub fn bivariate_generative_grid(
    base: &SpdMatrix,
    u_list: &[f64],
    beta_gen: &[f64],
    n_sim: usize,
) -> Result<Vec<GenerativeConfig>> {
    u_list
        .iter()
        .map(|&u| {
            if !(u > 0.0) || !u.is_finite() {
                return Err(Error::InvalidArgument(format!("grid divisor must be positive, got {u}")));
            }
            let a = base.scale(1.0 / u)?;
            let det_b0 = (base.log_det() - base.add(&a)?.log_det()).exp();
            Ok(GenerativeConfig::new(a.into_matrix(), beta_gen.to_vec(), n_sim, format!("|B0|={det_b0:.2}"))?
                .with_shrinkage(det_b0))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignCell {
    pub prior_index: usize,
    pub grid_index: usize,
    pub result: CoverageResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub prior_index: usize,
    pub grid_index: usize,
    pub seeds: CellSeeds,
    pub message: String,
    /// Whether the error was numerical rather than a configuration problem.
    #[serde(default)]
    pub numeric: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub master_seed: u64,
    /// Prior-major order: all grid points of prior 0, then prior 1, ...
    pub cells: Vec<CampaignCell>,
    pub failures: Vec<CellFailure>,
}

impl CampaignResult {
    pub fn cell(&self, prior_index: usize, grid_index: usize) -> Option<&CoverageResult> {
        self.cells
            .iter()
            .find(|c| c.prior_index == prior_index && c.grid_index == grid_index)
            .map(|c| &c.result)
    }
}

/// Evaluates every `(prior, grid point)` pair on a pool of `parallelism`
/// threads. Failing cells are recorded and the campaign continues.
pub fn run_campaign(
    template: &Dataset,
    priors: &[PriorSpec],
    grid: &[GenerativeConfig],
    chain_config: &SamplerConfig,
    level: f64,
    master_seed: u64,
    parallelism: usize,
) -> Result<CampaignResult> {
    if priors.is_empty() || grid.is_empty() {
        return Err(Error::InvalidArgument("a campaign needs at least one prior and one grid point".into()));
    }
    in_pool(parallelism, || {
        let mut cells = Vec::new();
        let mut failures = Vec::new();
        for (pi, prior) in priors.iter().enumerate() {
            for (gi, gen) in grid.iter().enumerate() {
                let seeds = CellSeeds::derive(master_seed, pi, gi);
                log::info!("cell prior={} grid={}", prior.description, gen.label);
                match evaluate_cell(template, prior, gen, chain_config, level, seeds) {
                    Ok(result) => cells.push(CampaignCell {
                        prior_index: pi,
                        grid_index: gi,
                        result,
                    }),
                    Err(e) => {
                        log::warn!("cell ({pi}, {gi}) failed: {e}");
                        failures.push(CellFailure {
                            prior_index: pi,
                            grid_index: gi,
                            seeds,
                            message: e.to_string(),
                            numeric: e.is_numeric(),
                        })
                    }
                }
            }
        }
        Ok(CampaignResult {
            master_seed,
            cells,
            failures,
        })
    })?
}

/// Runs `f` on a dedicated pool of `parallelism` threads.
pub fn in_pool<T: Send>(parallelism: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(pool.install(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_template(vs: &[f64]) -> Dataset {
        let groups = vs.iter().map(|&v| GroupObservation::scalar(0.0, v).unwrap()).collect();
        Dataset::new("t", groups).unwrap()
    }

    #[test]
    fn indicator_product_and_open_intervals() {
        let t = DVector::from_vec(vec![0.5, 1.5]);
        assert_eq!(coverage_indicator(&t, &[(0.0, 1.0), (1.0, 2.0)]), 1);
        assert_eq!(coverage_indicator(&t, &[(0.0, 1.0), (2.0, 3.0)]), 0);
        assert_eq!(coverage_indicator(&t, &[(0.5, 1.0), (1.0, 2.0)]), 0);
    }

    #[test]
    fn rb_term_cases() {
        let obs = GroupObservation::scalar(2.0, 1.0).unwrap();
        // A = 1 with V = 1 gives B = 0.5: conditional N(1, 0.5).
        let gen = GenerativeConfig::new(DMatrix::from_element(1, 1, 1.0), vec![0.0], 10, "t").unwrap();
        let half_width = 1.959963984540054 * 0.5f64.sqrt();
        let p = rb_coverage_term(&obs, &gen, &[(1.0 - half_width, 1.0 + half_width)]).unwrap();
        assert!((p - 0.95).abs() < 1e-6, "{p}");
        let full = rb_coverage_term(&obs, &gen, &[(f64::NEG_INFINITY, f64::INFINITY)]).unwrap();
        assert!((full - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_a_gen_pins_thetas() {
        let template = scalar_template(&[1.0, 2.0, 3.0]);
        let gen = GenerativeConfig::new(DMatrix::zeros(1, 1), vec![4.0], 5, "zero").unwrap();
        assert!(gen.a_gen().is_none());
        let (thetas, _) = generate_mock_dataset(&template, &gen, &mut RngStream::new(0, 0)).unwrap();
        assert!(thetas.iter().all(|t| t[0] == 4.0));
    }

    #[test]
    fn tiny_sampling_variance_gives_y_equal_theta() {
        let template = scalar_template(&[1e-30, 1e-30, 1e-30]);
        let gen = GenerativeConfig::new(DMatrix::from_element(1, 1, 10.0), vec![0.0], 5, "t").unwrap();
        let (thetas, mock) = generate_mock_dataset(&template, &gen, &mut RngStream::new(3, 1)).unwrap();
        for (t, g) in thetas.iter().zip(mock.groups()) {
            assert!((t[0] - g.y[0]).abs() < 1e-10);
        }
    }

    #[test]
    fn grid_round_trip() {
        let v0 = 132.6456;
        let grid = univariate_generative_grid(v0, &B0_GRID, &[7.95], 10).unwrap();
        for (g, b0) in grid.iter().zip(B0_GRID) {
            let a = g.a_gen().unwrap().as_scalar().unwrap();
            assert!((v0 / (v0 + a) - b0).abs() < 1e-10);
        }
        let one = univariate_generative_grid(v0, &[1.0], &[7.95], 10).unwrap();
        assert!(one[0].a_gen().is_none());
    }

    #[test]
    fn bivariate_grid_unit_divisor() {
        let base = SpdMatrix::from_row_slice(2, &[2.0, 0.5, 0.5, 3.0]).unwrap();
        let grid = bivariate_generative_grid(&base, &[1.0, 1e12], &[0.0; 4], 10).unwrap();
        assert_eq!(grid[0].a_gen().unwrap().matrix(), base.matrix());
        assert!(grid[1].a_gen().unwrap().matrix().amax() < 1e-11);
        assert!((grid[0].shrinkage.unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn generative_serde_round_trip() {
        let gen = GenerativeConfig::new(DMatrix::zeros(2, 2), vec![1.0, 2.0, 3.0, 4.0], 7, "zero")
            .unwrap()
            .with_shrinkage(1.0);
        let json = serde_json::to_string(&gen).unwrap();
        let back: GenerativeConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, gen);
    }

    #[test]
    fn single_simulation_is_rejected() {
        let template = scalar_template(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let gen = GenerativeConfig::new(DMatrix::from_element(1, 1, 1.0), vec![0.0], 1, "t").unwrap();
        let err = evaluate_cell(
            &template,
            &PriorSpec::flat(),
            &gen,
            &SamplerConfig::desk(),
            0.95,
            CellSeeds::derive(0, 0, 0),
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn seeds_share_data_across_priors() {
        let a = CellSeeds::derive(5, 0, 3);
        let b = CellSeeds::derive(5, 4, 3);
        assert_eq!(a.data_seed, b.data_seed);
        assert_ne!(a.chain_seed, b.chain_seed);
        assert_ne!(a.data_seed, CellSeeds::derive(5, 0, 4).data_seed);
    }
}
