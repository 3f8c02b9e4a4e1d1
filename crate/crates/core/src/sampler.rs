//! Metropolis-Hastings within Gibbs for the Normal-Normal model.
//!
//! Each sweep draws `θ | A, β`, then `β | A, θ`, then `A | β, θ`. The `A` step
//! is a random walk on `log A` for `p = 1`, an inverse-Wishart independence
//! style proposal centred (at its mode) on the current value for `p ≥ 2`, or,
//! under the flat prior, an exact inverse-Wishart draw.

use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SpdMatrix;
use crate::model::{
    check_thetas, conditional_beta_moments, conditional_theta_moments, log_conditional_a_from_scatter, propriety_check,
    residual_scatter, Dataset, HyperState,
};
use crate::priors::{v0_arithmetic_mean, v0_harmonic_mean, PriorSpec};
use crate::stochastics::{
    effective_sample_size, log_inverse_wishart_density, quantile_sorted, sample_inverse_wishart, sample_mvn, Chain,
};

/// Proposals that fail to factor are redrawn this many times before the
/// update is counted as a rejection.
pub const MAX_PROPOSAL_RETRIES: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AStep {
    /// Log random walk for `p = 1`, inverse-Wishart proposal otherwise.
    #[default]
    Auto,
    LogRandomWalk,
    InverseWishart,
    /// Exact conditional draw; only valid under the improper flat prior.
    ExactFlat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitTheta {
    /// `θ⁽⁰⁾ = y`.
    #[default]
    Data,
    Explicit(Vec<Vec<f64>>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitBeta {
    /// Least-squares fit of `θ⁽⁰⁾` on the design (`ȳ` for intercept-only).
    #[default]
    PooledMean,
    /// Generative `β`; resolved to `Explicit` by the coverage harness.
    Generative,
    Explicit(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitA {
    /// The prior's `V₀`, or the harmonic mean of the `V_j` for the flat prior.
    #[default]
    PriorShape,
    HarmonicMean,
    ArithmeticMean,
    Explicit(SpdMatrix),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub total_iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub proposal_sigma: f64,
    pub proposal_nu: f64,
    pub a_step: AStep,
    /// Keep `A` and `β` at their initial values and only draw `θ`.
    pub hold_hyper: bool,
    pub init_theta: InitTheta,
    pub init_beta: InitBeta,
    pub init_a: InitA,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            total_iterations: 42_000,
            burn_in: 2_000,
            thin: 2,
            proposal_sigma: 2.0,
            proposal_nu: 40.0,
            a_step: AStep::Auto,
            hold_hyper: false,
            init_theta: InitTheta::Data,
            init_beta: InitBeta::PooledMean,
            init_a: InitA::PriorShape,
        }
    }
}

impl SamplerConfig {
    /// 12 000 sweeps, 2 000 burn-in, every other draw kept.
    pub fn desk() -> Self {
        SamplerConfig {
            total_iterations: 12_000,
            ..Self::default()
        }
    }

    pub fn retained(&self) -> usize {
        (self.total_iterations - self.burn_in) / self.thin
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.total_iterations == 0 || self.thin == 0 {
            return bad("total_iterations and thin must be positive".into());
        }
        if self.burn_in >= self.total_iterations {
            return bad(format!(
                "burn_in ({}) must be below total_iterations ({})",
                self.burn_in, self.total_iterations
            ));
        }
        if !(self.total_iterations - self.burn_in).is_multiple_of(self.thin) {
            return bad("total_iterations - burn_in must be divisible by thin".into());
        }
        if !(self.proposal_sigma > 0.0) {
            return bad(format!("proposal_sigma must be positive, got {}", self.proposal_sigma));
        }
        if !(self.proposal_nu > p as f64 - 1.0) {
            return bad(format!("proposal_nu must exceed p - 1, got {}", self.proposal_nu));
        }
        if self.a_step == AStep::LogRandomWalk && p != 1 {
            return bad("the log random walk A step needs p = 1".into());
        }
        Ok(())
    }

    fn resolved_a_step(&self, p: usize) -> AStep {
        match self.a_step {
            AStep::Auto if p == 1 => AStep::LogRandomWalk,
            AStep::Auto => AStep::InverseWishart,
            s => s,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSamples {
    /// `thetas[j][l]` holds the retained draws of component `l` of `θ_j`.
    pub thetas: Vec<Vec<Vec<f64>>>,
    pub a_draws: Vec<SpdMatrix>,
    pub beta_draws: Vec<Vec<f64>>,
    pub acceptance_rate: f64,
    pub ess_per_parameter: BTreeMap<String, f64>,
}

impl PosteriorSamples {
    pub fn len(&self) -> usize {
        self.a_draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a_draws.is_empty()
    }

    pub fn theta_chain(&self, group: usize, component: usize) -> Result<Chain> {
        Chain::new(self.thetas[group][component].clone())
    }

    pub fn a_chain(&self, row: usize, col: usize) -> Result<Chain> {
        Chain::new(self.a_draws.iter().map(|a| a.matrix()[(row, col)]).collect())
    }

    pub fn beta_chain(&self, index: usize) -> Result<Chain> {
        Chain::new(self.beta_draws.iter().map(|b| b[index]).collect())
    }

    /// Mean ESS over all random-effect components.
    pub fn mean_theta_ess(&self) -> Option<f64> {
        let v: Vec<f64> = self
            .ess_per_parameter
            .iter()
            .filter(|(k, _)| k.starts_with("theta"))
            .map(|(_, &v)| v)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Posterior summary of one scalar parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub label: String,
    pub mean: f64,
    pub sd: f64,
    pub lower: f64,
    pub upper: f64,
    pub ess: Option<f64>,
}

impl PosteriorSamples {
    /// Mean, standard deviation, equal-tailed interval and ESS of every
    /// `θ`, `A` and `β` coordinate, in that order.
    pub fn summarize(&self, level: f64) -> Result<Vec<ParameterSummary>> {
        let k = self.thetas.len();
        let p = self.a_draws.first().map(SpdMatrix::dim).unwrap_or(1);
        let mut chains: Vec<(String, Chain)> = Vec::new();
        for j in 0..k {
            for l in 0..p {
                chains.push((theta_label(j, l, p), self.theta_chain(j, l)?));
            }
        }
        for r in 0..p {
            for c in r..p {
                chains.push((a_label(r, c, p), self.a_chain(r, c)?));
            }
        }
        let dim = self.beta_draws.first().map(Vec::len).unwrap_or(0);
        for i in 0..dim {
            chains.push((beta_label(i), self.beta_chain(i)?));
        }
        chains
            .into_iter()
            .map(|(label, chain)| {
                let (lower, upper) = posterior_interval(&chain, level)?;
                Ok(ParameterSummary {
                    ess: self.ess_per_parameter.get(&label).copied(),
                    mean: chain.mean(),
                    sd: chain.variance().sqrt(),
                    lower,
                    upper,
                    label,
                })
            })
            .collect()
    }
}

pub fn theta_label(group: usize, component: usize, p: usize) -> String {
    if p == 1 {
        format!("theta[{}]", group + 1)
    } else {
        format!("theta[{},{}]", group + 1, component + 1)
    }
}

pub fn a_label(row: usize, col: usize, p: usize) -> String {
    if p == 1 {
        "A".into()
    } else {
        format!("A[{},{}]", row + 1, col + 1)
    }
}

pub fn beta_label(index: usize) -> String {
    format!("beta[{}]", index + 1)
}

/// One draw of every `θ_j` from its conditional posterior.
pub fn gibbs_update_theta<R: Rng + ?Sized>(dataset: &Dataset, state: &HyperState, rng: &mut R) -> Result<Vec<DVector<f64>>> {
    dataset
        .groups()
        .iter()
        .map(|g| conditional_theta_moments(g, state).map(|m| sample_mvn(&m, rng)))
        .collect()
}

/// One draw of `β` from its conditional posterior.
pub fn gibbs_update_beta<R: Rng + ?Sized>(
    dataset: &Dataset,
    thetas: &[DVector<f64>],
    a: &SpdMatrix,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let m = conditional_beta_moments(dataset, thetas, a)?;
    Ok(sample_mvn(&m, rng))
}

fn accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    let u: f64 = rng.random();
    log_ratio >= 0.0 || u.ln() < log_ratio
}

/// Random-walk Metropolis-Hastings on `log A` for scalar `A`; the Jacobian
/// of the log transform contributes the Hastings factor `A*/A`.
#[allow(clippy::too_many_arguments)]
pub fn mh_update_a_univariate<R: Rng + ?Sized>(
    current: f64,
    dataset: &Dataset,
    thetas: &[DVector<f64>],
    beta: &DVector<f64>,
    prior: &PriorSpec,
    sigma: f64,
    rng: &mut R,
) -> Result<(f64, bool)> {
    if dataset.p() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: dataset.p(),
            context: "univariate A update",
        });
    }
    if !(current > 0.0) {
        return Err(Error::InvalidArgument(format!("current A must be positive, got {current}")));
    }
    let scatter = residual_scatter(dataset, thetas, beta)?;
    let k = dataset.k();
    let z: f64 = rng.sample(StandardNormal);
    let proposal = (current.ln() + sigma * z).exp();
    let proposal_spd = match SpdMatrix::scalar(proposal) {
        Ok(a) => a,
        Err(_) => {
            let _: f64 = rng.random();
            return Ok((current, false));
        }
    };
    let current_spd = SpdMatrix::scalar(current)?;
    let log_ratio = log_conditional_a_from_scatter(&proposal_spd, &scatter, k, prior)?
        - log_conditional_a_from_scatter(&current_spd, &scatter, k, prior)?
        + (proposal.ln() - current.ln());
    Ok(if accept(log_ratio, rng) { (proposal, true) } else { (current, false) })
}

/// Log Metropolis-Hastings ratio for moving from `current` to `proposal`
/// under the proposal `IW(ν, (ν + p + 1)·A)`, whose mode is `A`.
pub fn inverse_wishart_log_ratio(
    current: &SpdMatrix,
    proposal: &SpdMatrix,
    scatter: &nalgebra::DMatrix<f64>,
    k: usize,
    prior: &PriorSpec,
    nu: f64,
) -> Result<f64> {
    let c = nu + current.dim() as f64 + 1.0;
    let target = log_conditional_a_from_scatter(proposal, scatter, k, prior)?
        - log_conditional_a_from_scatter(current, scatter, k, prior)?;
    let reverse = log_inverse_wishart_density(current, nu, &proposal.scale(c)?)?;
    let forward = log_inverse_wishart_density(proposal, nu, &current.scale(c)?)?;
    Ok(target + reverse - forward)
}

#[allow(clippy::too_many_arguments)]
pub fn mh_update_a_multivariate<R: Rng + ?Sized>(
    current: &SpdMatrix,
    dataset: &Dataset,
    thetas: &[DVector<f64>],
    beta: &DVector<f64>,
    prior: &PriorSpec,
    nu: f64,
    rng: &mut R,
) -> Result<(SpdMatrix, bool)> {
    let p = current.dim();
    current.check_dim(dataset.p(), "A vs dataset dimension")?;
    let scatter = residual_scatter(dataset, thetas, beta)?;
    let proposal_scale = current.scale(nu + p as f64 + 1.0)?;
    let mut proposal = None;
    for _ in 0..MAX_PROPOSAL_RETRIES {
        match sample_inverse_wishart(nu, &proposal_scale, rng) {
            Ok(a) => {
                proposal = Some(a);
                break;
            }
            Err(Error::NotPositiveDefinite(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    let Some(proposal) = proposal else {
        log::warn!("inverse-Wishart proposal failed to factor {MAX_PROPOSAL_RETRIES} times; rejecting");
        return Ok((current.clone(), false));
    };
    let log_ratio = inverse_wishart_log_ratio(current, &proposal, &scatter, dataset.k(), prior, nu)?;
    Ok(if accept(log_ratio, rng) { (proposal, true) } else { (current.clone(), false) })
}

/// Exact draw `A ~ IW(k − p − 1, S)` under the improper flat prior.
pub fn gibbs_update_a_flat_exact<R: Rng + ?Sized>(
    dataset: &Dataset,
    thetas: &[DVector<f64>],
    beta: &DVector<f64>,
    rng: &mut R,
) -> Result<SpdMatrix> {
    let (k, p) = (dataset.k(), dataset.p());
    let scatter = residual_scatter(dataset, thetas, beta)?;
    let scale = SpdMatrix::new(scatter).map_err(|_| Error::SingularScatter(p))?;
    sample_inverse_wishart(k as f64 - p as f64 - 1.0, &scale, rng)
}

fn initial_state(dataset: &Dataset, prior: &PriorSpec, config: &SamplerConfig) -> Result<(Vec<DVector<f64>>, HyperState)> {
    let (k, p, m) = (dataset.k(), dataset.p(), dataset.m());
    let thetas: Vec<DVector<f64>> = match &config.init_theta {
        InitTheta::Data => dataset.groups().iter().map(|g| g.y.clone()).collect(),
        InitTheta::Explicit(v) => v.iter().map(|t| DVector::from_vec(t.clone())).collect(),
    };
    check_thetas(dataset, &thetas)?;
    let a = match &config.init_a {
        InitA::PriorShape => match prior.shape() {
            Some(v0) => v0.clone(),
            None => v0_harmonic_mean(dataset)?,
        },
        InitA::HarmonicMean => v0_harmonic_mean(dataset)?,
        InitA::ArithmeticMean => v0_arithmetic_mean(dataset)?,
        InitA::Explicit(a) => a.clone(),
    };
    a.check_dim(p, "initial A")?;
    let beta = match &config.init_beta {
        InitBeta::PooledMean => conditional_beta_moments(dataset, &thetas, &a)?.mean,
        InitBeta::Explicit(b) => DVector::from_vec(b.clone()),
        InitBeta::Generative => {
            return Err(Error::Config("generative beta initialization needs a generative config".into()))
        }
    };
    if beta.len() != m * p {
        return Err(Error::DimensionMismatch {
            expected: m * p,
            found: beta.len(),
            context: "initial beta",
        });
    }
    debug_assert_eq!(thetas.len(), k);
    Ok((thetas, HyperState { a, beta }))
}

/// Runs one chain. Iteration `t` (1-based) is kept when `t > burn_in` and
/// `(t − burn_in)` is a multiple of `thin`. The acceptance rate counts every
/// Metropolis `A` update, burn-in included.
pub fn run_chain<R: Rng + ?Sized>(
    dataset: &Dataset,
    prior: &PriorSpec,
    config: &SamplerConfig,
    rng: &mut R,
) -> Result<PosteriorSamples> {
    let (k, p, m) = (dataset.k(), dataset.p(), dataset.m());
    if !propriety_check(k, p, m) {
        return Err(Error::ImproperPosterior { k, p, m });
    }
    config.validate(p)?;
    if let Some(v0) = prior.shape() {
        v0.check_dim(p, "prior V0 vs dataset dimension")?;
    }
    let step = config.resolved_a_step(p);
    if step == AStep::ExactFlat && !prior.is_flat() {
        return Err(Error::Config("the exact A step is only valid under the flat prior".into()));
    }

    let (mut thetas, mut state) = initial_state(dataset, prior, config)?;
    let keep = config.retained();
    let mut theta_draws = vec![vec![Vec::with_capacity(keep); p]; k];
    let mut a_draws = Vec::with_capacity(keep);
    let mut beta_draws = Vec::with_capacity(keep);
    let mut accepted = 0usize;
    let mut proposals = 0usize;

    for t in 1..=config.total_iterations {
        let sweep = |thetas: &mut Vec<DVector<f64>>, state: &mut HyperState, rng: &mut R| -> Result<Option<bool>> {
            *thetas = gibbs_update_theta(dataset, state, rng)?;
            if config.hold_hyper {
                return Ok(None);
            }
            state.beta = gibbs_update_beta(dataset, thetas, &state.a, rng)?;
            Ok(match step {
                AStep::LogRandomWalk => {
                    let current = state.a.matrix()[(0, 0)];
                    let (a, ok) =
                        mh_update_a_univariate(current, dataset, thetas, &state.beta, prior, config.proposal_sigma, rng)?;
                    if ok {
                        state.a = SpdMatrix::scalar(a)?;
                    }
                    Some(ok)
                }
                AStep::InverseWishart => {
                    let (a, ok) =
                        mh_update_a_multivariate(&state.a, dataset, thetas, &state.beta, prior, config.proposal_nu, rng)?;
                    state.a = a;
                    Some(ok)
                }
                AStep::ExactFlat => {
                    state.a = gibbs_update_a_flat_exact(dataset, thetas, &state.beta, rng)?;
                    None
                }
                AStep::Auto => unreachable!("resolved above"),
            })
        };
        if let Some(ok) = sweep(&mut thetas, &mut state, rng).map_err(|e| e.at_iteration(t))? {
            proposals += 1;
            accepted += ok as usize;
        }
        if t > config.burn_in && (t - config.burn_in).is_multiple_of(config.thin) {
            for (j, theta) in thetas.iter().enumerate() {
                for l in 0..p {
                    theta_draws[j][l].push(theta[l]);
                }
            }
            a_draws.push(state.a.clone());
            beta_draws.push(state.beta.iter().copied().collect());
        }
    }

    let mut samples = PosteriorSamples {
        thetas: theta_draws,
        a_draws,
        beta_draws,
        acceptance_rate: if proposals == 0 { 1.0 } else { accepted as f64 / proposals as f64 },
        ess_per_parameter: BTreeMap::new(),
    };
    samples.ess_per_parameter = chain_ess(&samples, p, m);
    Ok(samples)
}

fn chain_ess(samples: &PosteriorSamples, p: usize, m: usize) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    if samples.len() < 10 {
        return out;
    }
    let mut record = |label: String, values: Vec<f64>| {
        if let Ok(ess) = Chain::new(values).and_then(|c| effective_sample_size(&c)) {
            out.insert(label, ess);
        }
    };
    for (j, comps) in samples.thetas.iter().enumerate() {
        for (l, draws) in comps.iter().enumerate() {
            record(theta_label(j, l, p), draws.clone());
        }
    }
    for r in 0..p {
        for c in r..p {
            record(a_label(r, c, p), samples.a_draws.iter().map(|a| a.matrix()[(r, c)]).collect());
        }
    }
    for i in 0..m * p {
        record(beta_label(i), samples.beta_draws.iter().map(|b| b[i]).collect());
    }
    out
}

/// Equal-tailed interval `(q_{(1−level)/2}, q_{1−(1−level)/2})`.
pub fn posterior_interval(samples: &Chain, level: f64) -> Result<(f64, f64)> {
    let mut sorted = samples.values().to_vec();
    sorted.sort_by(f64::total_cmp);
    interval_from_sorted(&sorted, level)
}

pub(crate) fn interval_from_sorted(sorted: &[f64], level: f64) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("interval level must lie in (0, 1), got {level}")));
    }
    let tail = (1.0 - level) / 2.0;
    Ok((quantile_sorted(sorted, tail)?, quantile_sorted(sorted, 1.0 - tail)?))
}
