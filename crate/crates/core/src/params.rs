//! Model parameters `(eta, gamma, beta)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SUM_TOL: f64 = 1e-9;

/// Copy probability `eta`, extant-node count distribution `gamma` and novel-node count
/// distribution `beta`. Both distributions are indexed `0..=kbar` and share one length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ModelParams {
    eta: f64,
    gamma: Vec<f64>,
    beta: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    eta: f64,
    gamma: Vec<f64>,
    beta: Vec<f64>,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        ModelParams::new(raw.eta, raw.gamma, raw.beta)
    }
}

impl From<ModelParams> for RawParams {
    fn from(p: ModelParams) -> Self {
        RawParams { eta: p.eta, gamma: p.gamma, beta: p.beta }
    }
}

fn check_distribution(name: &str, p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidParams(format!("{name} is empty")));
    }
    if let Some(x) = p.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(Error::InvalidParams(format!("{name} has invalid entry {x}")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > SUM_TOL {
        return Err(Error::InvalidParams(format!("{name} sums to {total}, not 1")));
    }
    Ok(())
}

impl ModelParams {
    /// Validates and zero-pads `gamma` and `beta` to a common length.
    pub fn new(eta: f64, mut gamma: Vec<f64>, mut beta: Vec<f64>) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::InvalidParams(format!("eta = {eta} is outside [0, 1]")));
        }
        check_distribution("gamma", &gamma)?;
        check_distribution("beta", &beta)?;
        let len = gamma.len().max(beta.len());
        gamma.resize(len, 0.0);
        beta.resize(len, 0.0);
        Ok(Self { eta, gamma, beta })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// Largest count index of `gamma` and `beta`.
    pub fn kbar(&self) -> usize {
        self.gamma.len() - 1
    }

    /// `gamma[i]`, zero outside the stored range.
    #[inline]
    pub fn gamma_at(&self, i: usize) -> f64 {
        self.gamma.get(i).copied().unwrap_or(0.0)
    }

    #[inline]
    pub fn beta_at(&self, i: usize) -> f64 {
        self.beta.get(i).copied().unwrap_or(0.0)
    }

    pub fn mu_gamma(&self) -> f64 {
        mean(&self.gamma)
    }

    pub fn mu_beta(&self) -> f64 {
        mean(&self.beta)
    }

    /// Same parameters with `gamma` and `beta` zero-padded to `kbar + 1` entries.
    pub fn padded(&self, kbar: usize) -> Self {
        let mut p = self.clone();
        let len = (kbar + 1).max(p.gamma.len());
        p.gamma.resize(len, 0.0);
        p.beta.resize(len, 0.0);
        p
    }
}

pub fn mean(p: &[f64]) -> f64 {
    p.iter().enumerate().map(|(i, x)| i as f64 * x).sum()
}

/// Poisson(`mean`) probabilities on `0..=kmax`, renormalized after truncation.
pub fn truncated_poisson(mean: f64, kmax: usize) -> Vec<f64> {
    let mut p = Vec::with_capacity(kmax + 1);
    let mut term = (-mean).exp();
    for k in 0..=kmax {
        if k > 0 {
            term *= mean / k as f64;
        }
        p.push(term);
    }
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    p
}

/// Kullback-Leibler divergence `KL(p || q)` in nats; infinite when `q` misses mass of `p`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    let len = p.len().max(q.len());
    (0..len)
        .map(|i| {
            let pi = p.get(i).copied().unwrap_or(0.0);
            let qi = q.get(i).copied().unwrap_or(0.0);
            if pi == 0.0 {
                0.0
            } else if qi == 0.0 {
                f64::INFINITY
            } else {
                pi * (pi / qi).ln()
            }
        })
        .sum()
}
