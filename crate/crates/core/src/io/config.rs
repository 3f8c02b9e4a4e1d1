use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::coverage::{bivariate_generative_grid, univariate_generative_grid, GenerativeConfig};
use crate::error::{Error, Result};
use crate::experiments;
use crate::io::data::load_dataset;
use crate::linalg::SpdMatrix;
use crate::model::Dataset;
use crate::priors::{v0_arithmetic_mean, v0_harmonic_mean, v0_scaled_diag, PriorSpec};
use crate::sampler::SamplerConfig;

/// JSON Schema of [`RunConfig`]. Parsing enforces the same rules: unknown
/// keys and mistyped values are errors.
pub const RUN_CONFIG_SCHEMA: &str = r##"{
  "$schema": "https://json-schema.org/draft/2020-12/schema",
  "title": "RunConfig",
  "type": "object",
  "additionalProperties": false,
  "required": ["mode", "dataset"],
  "properties": {
    "mode": { "enum": ["fit", "evaluate-cell", "campaign", "reproduce"] },
    "dataset": { "type": "string", "description": "builtin name (eight-schools, hospital-27) or CSV path" },
    "priors": { "type": "array", "items": { "$ref": "#/$defs/prior" } },
    "grid": { "$ref": "#/$defs/grid" },
    "beta_gen": { "type": "array", "items": { "type": "number" } },
    "sampler": { "$ref": "#/$defs/sampler" },
    "level": { "type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1, "default": 0.95 },
    "n_sim": { "type": "integer", "minimum": 2, "default": 200 },
    "master_seed": { "type": "integer", "minimum": 0, "default": 0 },
    "parallelism": { "type": "integer", "minimum": 1, "default": 1 },
    "output_dir": { "type": ["string", "null"] }
  },
  "$defs": {
    "matrix": { "type": "array", "items": { "type": "array", "items": { "type": "number" } } },
    "base": { "enum": ["harmonic", "arithmetic", "sigma"] },
    "prior": {
      "oneOf": [
        { "type": "object", "additionalProperties": false, "required": ["rule"],
          "properties": { "rule": { "enum": ["harmonic", "arithmetic", "harmonic-diag", "arithmetic-diag"] },
                          "delta": { "type": "number", "exclusiveMinimum": 0, "default": 1 } } },
        { "type": "object", "additionalProperties": false, "required": ["rule", "v0"],
          "properties": { "rule": { "const": "explicit" }, "v0": { "$ref": "#/$defs/matrix" },
                          "delta": { "type": "number", "exclusiveMinimum": 0, "default": 1 } } },
        { "type": "object", "additionalProperties": false, "required": ["rule"],
          "properties": { "rule": { "const": "flat" } } }
      ]
    },
    "grid": {
      "oneOf": [
        { "type": "object", "additionalProperties": false, "required": ["rule", "values"],
          "properties": { "rule": { "enum": ["b0", "divisor"] },
                          "values": { "type": "array", "items": { "type": "number" } },
                          "base": { "$ref": "#/$defs/base" } } },
        { "type": "object", "additionalProperties": false, "required": ["rule", "cells"],
          "properties": { "rule": { "const": "explicit" },
                          "cells": { "type": "array", "items": {
                            "type": "object", "additionalProperties": false, "required": ["a_gen", "label"],
                            "properties": { "a_gen": { "$ref": "#/$defs/matrix" }, "label": { "type": "string" },
                                            "shrinkage": { "type": ["number", "null"] } } } } } }
      ]
    },
    "sampler": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "total_iterations": { "type": "integer", "minimum": 1, "default": 42000 },
        "burn_in": { "type": "integer", "minimum": 0, "default": 2000 },
        "thin": { "type": "integer", "minimum": 1, "default": 2 },
        "proposal_sigma": { "type": "number", "exclusiveMinimum": 0, "default": 2.0 },
        "proposal_nu": { "type": "number", "default": 40.0 },
        "a_step": { "enum": ["auto", "log-random-walk", "inverse-wishart", "exact-flat"] },
        "hold_hyper": { "type": "boolean", "default": false },
        "init_theta": { "oneOf": [ { "const": "data" },
                                   { "type": "object", "properties": { "explicit": { "$ref": "#/$defs/matrix" } } } ] },
        "init_beta": { "oneOf": [ { "enum": ["pooled-mean", "generative"] },
                                  { "type": "object", "properties": { "explicit": { "type": "array", "items": { "type": "number" } } } } ] },
        "init_a": { "oneOf": [ { "enum": ["prior-shape", "harmonic-mean", "arithmetic-mean"] },
                               { "type": "object", "properties": { "explicit": { "$ref": "#/$defs/matrix" } } } ] }
      }
    }
  }
}"##;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Fit,
    EvaluateCell,
    Campaign,
    Reproduce,
}

fn one() -> f64 {
    1.0
}

fn is_one(v: &f64) -> bool {
    *v == 1.0
}

/// Shape-parameter rule, resolved against the dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PriorRule {
    /// `δ V₀` with `V₀` the harmonic mean of the `V_j`.
    Harmonic {
        #[serde(default = "one", skip_serializing_if = "is_one")]
        delta: f64,
    },
    /// `δ V₀` with `V₀` the arithmetic mean of the `V_j`.
    Arithmetic {
        #[serde(default = "one", skip_serializing_if = "is_one")]
        delta: f64,
    },
    HarmonicDiag {
        #[serde(default = "one", skip_serializing_if = "is_one")]
        delta: f64,
    },
    ArithmeticDiag {
        #[serde(default = "one", skip_serializing_if = "is_one")]
        delta: f64,
    },
    Explicit {
        v0: SpdMatrix,
        #[serde(default = "one", skip_serializing_if = "is_one")]
        delta: f64,
    },
    Flat {},
}

fn delta_prefix(delta: f64) -> String {
    if delta == 1.0 {
        String::new()
    } else {
        format!("{delta:e}*")
    }
}

impl PriorRule {
    pub fn delta(&self) -> Option<f64> {
        match self {
            PriorRule::Harmonic { delta }
            | PriorRule::Arithmetic { delta }
            | PriorRule::HarmonicDiag { delta }
            | PriorRule::ArithmeticDiag { delta }
            | PriorRule::Explicit { delta, .. } => Some(*delta),
            PriorRule::Flat {} => None,
        }
    }

    pub fn label(&self) -> String {
        let d = self.delta().map(delta_prefix).unwrap_or_default();
        match self {
            PriorRule::Harmonic { .. } => format!("USP V0={d}V0,DM"),
            PriorRule::Arithmetic { .. } => format!("USP V0={d}V0,E&M"),
            PriorRule::HarmonicDiag { .. } => format!("USP V0={d}diag(V0,DM)"),
            PriorRule::ArithmeticDiag { .. } => format!("USP V0={d}diag(V0,E&M)"),
            PriorRule::Explicit { .. } => format!("USP V0={d}explicit"),
            PriorRule::Flat {} => "flat".into(),
        }
    }

    pub fn resolve(&self, dataset: &Dataset) -> Result<PriorSpec> {
        if let Some(delta) = self.delta() {
            if !(delta > 0.0) || !delta.is_finite() {
                return Err(Error::Config(format!("prior delta must be positive, got {delta}")));
            }
        }
        let v0 = match self {
            PriorRule::Harmonic { delta } => v0_harmonic_mean(dataset)?.scale(*delta)?,
            PriorRule::Arithmetic { delta } => v0_arithmetic_mean(dataset)?.scale(*delta)?,
            PriorRule::HarmonicDiag { delta } => v0_scaled_diag(&v0_harmonic_mean(dataset)?, *delta)?,
            PriorRule::ArithmeticDiag { delta } => v0_scaled_diag(&v0_arithmetic_mean(dataset)?, *delta)?,
            PriorRule::Explicit { v0, delta } => {
                v0.check_dim(dataset.p(), "explicit V0")?;
                v0.scale(*delta)?
            }
            PriorRule::Flat {} => return Ok(PriorSpec::flat()),
        };
        Ok(PriorSpec::usp(v0, self.label()))
    }
}

impl fmt::Display for PriorRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Shorthands `usp-dm`, `usp-em`, `usp-dm-diag`, `usp-em-diag` with an
/// optional `:δ` suffix (`usp-em-diag:1e4`), and `flat`.
impl FromStr for PriorRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, delta) = match s.split_once(':') {
            Some((n, d)) => (
                n,
                d.parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad delta in prior {s:?}")))?,
            ),
            None => (s, 1.0),
        };
        let rule = match name {
            "usp-dm" => PriorRule::Harmonic { delta },
            "usp-em" => PriorRule::Arithmetic { delta },
            "usp-dm-diag" => PriorRule::HarmonicDiag { delta },
            "usp-em-diag" => PriorRule::ArithmeticDiag { delta },
            "flat" if delta == 1.0 && !s.contains(':') => PriorRule::Flat {},
            _ => {
                return Err(Error::Config(format!(
                    "unknown prior {s:?}; expected usp-dm, usp-em, usp-dm-diag, usp-em-diag (optionally :delta) or flat"
                )))
            }
        };
        Ok(rule)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum V0Base {
    #[default]
    Harmonic,
    Arithmetic,
    /// The per-unit covariance carried by the hospital builtin.
    Sigma,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitCell {
    pub a_gen: Vec<Vec<f64>>,
    pub label: String,
    #[serde(default)]
    pub shrinkage: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GridSpec {
    /// `p = 1`: `A_gen = (1 − B₀) V₀ / B₀` for each listed `B₀`.
    B0 {
        values: Vec<f64>,
        #[serde(default)]
        base: V0Base,
    },
    /// `A_gen = base / u` for each listed `u`.
    Divisor {
        values: Vec<f64>,
        #[serde(default)]
        base: V0Base,
    },
    Explicit { cells: Vec<ExplicitCell> },
}

fn default_level() -> f64 {
    0.95
}

fn default_n_sim() -> usize {
    200
}

fn default_parallelism() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub dataset: String,
    #[serde(default)]
    pub priors: Vec<PriorRule>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    /// Defaults to the frozen value of a builtin dataset.
    #[serde(default)]
    pub beta_gen: Option<Vec<f64>>,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default = "default_n_sim")]
    pub n_sim: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

/// A config with its dataset loaded and every rule turned into values.
#[derive(Clone, Debug)]
pub struct ResolvedRun {
    pub config: RunConfig,
    pub dataset: Dataset,
    pub priors: Vec<PriorSpec>,
    pub grid: Vec<GenerativeConfig>,
}

impl RunConfig {
    pub fn new(mode: Mode, dataset: impl Into<String>) -> Self {
        RunConfig {
            mode,
            dataset: dataset.into(),
            priors: Vec::new(),
            grid: None,
            beta_gen: None,
            sampler: SamplerConfig::default(),
            level: default_level(),
            n_sim: default_n_sim(),
            master_seed: 0,
            parallelism: default_parallelism(),
            output_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    fn needs_grid(&self) -> bool {
        self.mode != Mode::Fit
    }

    pub fn resolve(&self) -> Result<ResolvedRun> {
        let loaded = load_dataset(&self.dataset)?;
        let dataset = loaded.dataset;
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("level must lie in (0, 1), got {}", self.level)));
        }
        if self.parallelism == 0 {
            return Err(Error::Config("parallelism must be at least 1".into()));
        }
        self.sampler.validate(dataset.p())?;
        if self.priors.is_empty() {
            return Err(Error::Config("at least one prior is required".into()));
        }
        if self.mode == Mode::EvaluateCell && self.priors.len() != 1 {
            return Err(Error::Config("evaluate-cell takes exactly one prior".into()));
        }
        let priors = self.priors.iter().map(|r| r.resolve(&dataset)).collect::<Result<Vec<_>>>()?;

        let grid = if self.needs_grid() {
            if self.n_sim < 2 {
                return Err(Error::Config(format!("n_sim must be at least 2, got {}", self.n_sim)));
            }
            let spec = self.grid.as_ref().ok_or_else(|| Error::Config("a generative grid is required".into()))?;
            let beta_gen = match &self.beta_gen {
                Some(b) => b.clone(),
                None => experiments::frozen_beta_gen(&self.dataset)
                    .ok_or_else(|| Error::Config("beta_gen is required for non-builtin datasets".into()))?,
            };
            let base = |b: V0Base| -> Result<SpdMatrix> {
                match b {
                    V0Base::Harmonic => v0_harmonic_mean(&dataset),
                    V0Base::Arithmetic => v0_arithmetic_mean(&dataset),
                    V0Base::Sigma => loaded
                        .sigma
                        .clone()
                        .ok_or_else(|| Error::Config(format!("dataset {} carries no sigma", self.dataset))),
                }
            };
            let grid = match spec {
                GridSpec::B0 { values, base: b } => {
                    let v0 = base(*b)?
                        .as_scalar()
                        .ok_or_else(|| Error::Config("the b0 grid rule needs p = 1; use divisor".into()))?;
                    univariate_generative_grid(v0, values, &beta_gen, self.n_sim)?
                }
                GridSpec::Divisor { values, base: b } => {
                    bivariate_generative_grid(&base(*b)?, values, &beta_gen, self.n_sim)?
                }
                GridSpec::Explicit { cells } => cells
                    .iter()
                    .map(|c| {
                        let a = SpdMatrix::from_rows(&c.a_gen)
                            .map(SpdMatrix::into_matrix)
                            .or_else(|e| {
                                // The zero matrix is a valid generative value.
                                if c.a_gen.iter().flatten().all(|&v| v == 0.0) {
                                    Ok(nalgebra::DMatrix::zeros(c.a_gen.len(), c.a_gen.len()))
                                } else {
                                    Err(e)
                                }
                            })?;
                        let g = GenerativeConfig::new(a, beta_gen.clone(), self.n_sim, c.label.clone())?;
                        Ok(match c.shrinkage {
                            Some(s) => g.with_shrinkage(s),
                            None => g,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?,
            };
            if grid.is_empty() {
                return Err(Error::Config("generative grid is empty".into()));
            }
            if self.mode == Mode::EvaluateCell && grid.len() != 1 {
                return Err(Error::Config("evaluate-cell takes exactly one grid point".into()));
            }
            grid
        } else {
            Vec::new()
        };
        Ok(ResolvedRun {
            config: self.clone(),
            dataset,
            priors,
            grid,
        })
    }
}
