//! Preset campaigns for the two builtin datasets, at full scale and at a
//! reduced desk scale.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::coverage::{B0_GRID, U_GRID};
use crate::datasets::{EIGHT_SCHOOLS, HOSPITAL_27};
use crate::error::{Error, Result};
use crate::io::{GridSpec, Mode, PriorRule, RunConfig, V0Base};
use crate::model::Dataset;
use crate::priors::PriorSpec;
use crate::sampler::{run_chain, InitA, InitBeta, SamplerConfig};
use crate::stochastics::RngStream;

/// Multipliers of the shape parameter compared in both experiments.
pub const DELTAS: [f64; 5] = [1.0, 1e1, 1e2, 1e3, 1e4];

/// Posterior mean of `β₁` under USP `V₀,DM` from 100,000 draws.
pub const EIGHT_SCHOOLS_BETA_GEN: [f64; 1] = [7.95];

/// Posterior mean of `β` under USP `V₀,E&M` from 100,000 retained draws,
/// component-major (intercept and slope of the first outcome, then the
/// second); produced by [`derive_beta_gen`] with [`HOSPITAL_BETA_GEN_SEED`].
pub const HOSPITAL_BETA_GEN: [f64; 4] = [12.231703270325998, 1.9415628617743126, 12.438600503336763, 6.048062651712681];
pub const HOSPITAL_BETA_GEN_SEED: u64 = 20_000;

/// Retained draws of the fit that fixes `β_gen`.
pub const BETA_GEN_DRAWS: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    EightSchools,
    Hospital,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    /// 200 simulations of 12,000-iteration chains per cell.
    Desk,
    /// 1,000 simulations of 42,000-iteration chains per cell.
    Full,
}

impl Scale {
    pub fn n_sim(self) -> usize {
        match self {
            Scale::Desk => 200,
            Scale::Full => 1000,
        }
    }

    pub fn sampler(self) -> SamplerConfig {
        match self {
            Scale::Desk => SamplerConfig::desk(),
            Scale::Full => SamplerConfig::default(),
        }
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eight-schools" => Ok(Experiment::EightSchools),
            "hospital" | "hospital-27" => Ok(Experiment::Hospital),
            _ => Err(Error::Config(format!("unknown experiment {s:?}; expected eight-schools or hospital"))),
        }
    }
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Scale::Desk),
            "full" => Ok(Scale::Full),
            _ => Err(Error::Config(format!("unknown scale {s:?}; expected desk or full"))),
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Experiment::EightSchools => "eight-schools",
            Experiment::Hospital => "hospital",
        })
    }
}

/// Frozen `β_gen` of a builtin dataset.
pub fn frozen_beta_gen(dataset: &str) -> Option<Vec<f64>> {
    match dataset {
        EIGHT_SCHOOLS => Some(EIGHT_SCHOOLS_BETA_GEN.to_vec()),
        HOSPITAL_27 => Some(HOSPITAL_BETA_GEN.to_vec()),
        _ => None,
    }
}

pub fn eight_schools_priors() -> Vec<PriorRule> {
    DELTAS
        .iter()
        .map(|&delta| PriorRule::Harmonic { delta })
        .chain([PriorRule::Flat {}])
        .collect()
}

pub fn hospital_priors() -> Vec<PriorRule> {
    std::iter::once(PriorRule::Arithmetic { delta: 1.0 })
        .chain(DELTAS[1..].iter().map(|&delta| PriorRule::ArithmeticDiag { delta }))
        .chain([PriorRule::Flat {}])
        .collect()
}

/// The full six-prior, ten-point campaign of one experiment.
pub fn preset(experiment: Experiment, scale: Scale, master_seed: u64) -> RunConfig {
    let mut sampler = scale.sampler();
    let (dataset, priors, grid) = match experiment {
        Experiment::EightSchools => {
            sampler.init_a = InitA::HarmonicMean;
            (
                EIGHT_SCHOOLS,
                eight_schools_priors(),
                GridSpec::B0 {
                    values: B0_GRID.to_vec(),
                    base: V0Base::Harmonic,
                },
            )
        }
        Experiment::Hospital => {
            sampler.init_a = InitA::ArithmeticMean;
            sampler.init_beta = InitBeta::Generative;
            sampler.proposal_nu = 40.0;
            (
                HOSPITAL_27,
                hospital_priors(),
                GridSpec::Divisor {
                    values: U_GRID.to_vec(),
                    base: V0Base::Arithmetic,
                },
            )
        }
    };
    RunConfig {
        mode: Mode::Reproduce,
        dataset: dataset.into(),
        priors,
        grid: Some(grid),
        beta_gen: frozen_beta_gen(dataset),
        sampler,
        level: 0.95,
        n_sim: scale.n_sim(),
        master_seed,
        parallelism: 1,
        output_dir: None,
    }
}

/// Posterior mean of `β` from one long chain with `draws` retained
/// iterations, pooled-mean initialization.
pub fn derive_beta_gen(dataset: &Dataset, prior: &PriorSpec, draws: usize, seed: u64) -> Result<Vec<f64>> {
    let base = SamplerConfig::default();
    let config = SamplerConfig {
        total_iterations: base.burn_in + draws * base.thin,
        init_beta: InitBeta::PooledMean,
        ..base
    };
    let samples = run_chain(dataset, prior, &config, &mut RngStream::new(seed, 0))?;
    let n = samples.beta_draws.len() as f64;
    let dim = dataset.p() * dataset.m();
    Ok((0..dim)
        .map(|i| samples.beta_draws.iter().map(|b| b[i]).sum::<f64>() / n)
        .collect())
}
