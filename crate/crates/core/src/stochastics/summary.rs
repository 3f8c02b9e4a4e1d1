use crate::error::{Error, Result};

/// Draws of one scalar functional of an MCMC run.
#[derive(Clone, Debug, PartialEq)]
pub struct Chain(Vec<f64>);

impl Chain {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("chain must be non-empty".into()));
        }
        Ok(Chain(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }

    /// Sample variance with denominator `n − 1` (0 for a single draw).
    pub fn variance(&self) -> f64 {
        let n = self.0.len();
        if n < 2 {
            return 0.0;
        }
        let mu = self.mean();
        self.0.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1) as f64
    }
}

impl TryFrom<Vec<f64>> for Chain {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Chain::new(values)
    }
}

/// Type-7 quantile: linear interpolation at `h = (n − 1)q` of the sorted draws.
pub fn empirical_quantile(samples: &Chain, q: f64) -> Result<f64> {
    let mut sorted = samples.0.clone();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, q)
}

/// Type-7 quantile of already sorted values.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidArgument(format!("quantile level must lie in [0, 1], got {q}")));
    }
    if sorted.is_empty() {
        return Err(Error::InvalidArgument("chain must be non-empty".into()));
    }
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    Ok(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

/// Effective sample size `n / τ` with `τ = 1 + 2 Σ ρ̂_t`, the autocorrelation
/// sum truncated by Geyer's initial positive sequence: lag pairs
/// `ρ̂_{2m} + ρ̂_{2m+1}` are accumulated while they stay positive.
///
/// Capped at `1.5 n`, which also covers chains with `τ ≤ 0`.
pub fn effective_sample_size(samples: &Chain) -> Result<f64> {
    let x = samples.values();
    let n = x.len();
    if n < 10 {
        return Err(Error::InvalidArgument(format!("ESS needs at least 10 draws, got {n}")));
    }
    let mu = samples.mean();
    let centered: Vec<f64> = x.iter().map(|v| v - mu).collect();
    let autocov = |lag: usize| -> f64 {
        centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64
    };
    let gamma0 = autocov(0);
    if !(gamma0 > 0.0) {
        return Err(Error::DegenerateChain);
    }
    let mut pair_sum = 0.0;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = (autocov(lag) + autocov(lag + 1)) / gamma0;
        if pair <= 0.0 {
            break;
        }
        pair_sum += pair;
        lag += 2;
    }
    let tau = -1.0 + 2.0 * pair_sum;
    let cap = 1.5 * n as f64;
    Ok(if tau > 0.0 { (n as f64 / tau).min(cap) } else { cap })
}
