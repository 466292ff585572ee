//! Closed-form asymptotics of the copy model.
//!
//! Mean edge size, mean degree and the degree power-law exponent have closed forms.
//! The stationary edge-size distribution is the Perron vector of the one-step size
//! transition matrix `W`, and the pairwise intersection profile is the Perron vector of
//! the linear system assembled in [`intersection`].

pub mod intersection;
pub mod perron;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::ModelParams;

pub use intersection::{
    intersection_coefficients, intersection_profile, predicted_rk, IntersectionCoefficients, IntersectionProfile,
    PsiScaling,
};
pub use perron::{perron_vector, CsrMatrix, DenseMatrix, LinearOperator, PerronResult};

/// Binomial coefficient as a float; zero when `k > n`.
pub(crate) fn choose(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `C(n, k) p^k (1-p)^(n-k)` with `0^0 = 1`.
pub(crate) fn binomial_pmf(n: usize, k: usize, p: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    choose(n, k) * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticSummary {
    pub mean_edge_size: f64,
    pub mean_degree: f64,
    pub zeta: f64,
}

/// `(1 - eta + mu_gamma + mu_beta) / (1 - eta)`.
pub fn mean_edge_size(params: &ModelParams) -> Result<f64> {
    let eta = params.eta();
    if eta >= 1.0 {
        return Err(Error::Divergent("edge size is nonstationary when eta = 1".into()));
    }
    Ok((1.0 - eta + params.mu_gamma() + params.mu_beta()) / (1.0 - eta))
}

/// Mean edge size divided by the mean number of novel nodes per edge.
pub fn mean_degree(params: &ModelParams) -> Result<f64> {
    let k = mean_edge_size(params)?;
    let mu_beta = params.mu_beta();
    if mu_beta <= 0.0 {
        return Err(Error::Divergent("mean degree is unbounded when no novel nodes are added".into()));
    }
    Ok(k / mu_beta)
}

/// Exponent `zeta` of the degree tail `p_d ~ d^-zeta`.
pub fn powerlaw_exponent(params: &ModelParams) -> Result<f64> {
    let eta = params.eta();
    if eta >= 1.0 {
        return Err(Error::Divergent("power-law exponent undefined when eta = 1".into()));
    }
    let (mg, mb) = (params.mu_gamma(), params.mu_beta());
    let denom = 1.0 - eta * (1.0 - mg - mb);
    if denom <= 0.0 {
        return Err(Error::Divergent(format!("exponent formula invalid: 1 - eta(1 - mu_gamma - mu_beta) = {denom}")));
    }
    Ok(1.0 + (1.0 - eta + mg + mb) / denom)
}

pub fn summarize(params: &ModelParams) -> Result<AsymptoticSummary> {
    Ok(AsymptoticSummary {
        mean_edge_size: mean_edge_size(params)?,
        mean_degree: mean_degree(params)?,
        zeta: powerlaw_exponent(params)?,
    })
}

/// One-step edge-size transition matrix truncated at `kmax`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSizeMatrix {
    /// `w[(i - 1, j - 1)] = P(|e| = i | |f| = j)` for sizes `1..=kmax`.
    pub w: DenseMatrix,
    pub kmax: usize,
}

impl EdgeSizeMatrix {
    /// `P(|e| = i | |f| = j)` with 1-based sizes.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.w.get(i - 1, j - 1)
    }

    /// Largest probability mass lost by any column to sizes above `kmax`.
    pub fn truncation_mass(&self) -> f64 {
        (0..self.kmax).map(|j| 1.0 - self.w.column_sum(j)).fold(0.0, f64::max).max(0.0)
    }

    /// Copy with every nonzero column scaled to sum to one.
    pub fn renormalized(&self) -> Self {
        let mut w = self.w.clone();
        for j in 0..self.kmax {
            let s = w.column_sum(j);
            if s > 0.0 {
                for i in 0..self.kmax {
                    w.set(i, j, w.get(i, j) / s);
                }
            }
        }
        Self { w, kmax: self.kmax }
    }
}

/// `w_ij = sum_l sum_h C(j-1, l) eta^l (1-eta)^(j-1-l) gamma_h beta_(i-1-l-h)`: the new edge
/// holds the seed, `l` copied nodes, `h` extant nodes and the rest novel.
pub fn edge_size_matrix(params: &ModelParams, kmax: usize) -> Result<EdgeSizeMatrix> {
    if kmax < 2 {
        return Err(Error::InvalidInput(format!("kmax must be at least 2, got {kmax}")));
    }
    let eta = params.eta();
    let mut w = DenseMatrix::zeros(kmax);
    for j in 1..=kmax {
        for i in 1..=kmax {
            let mut total = 0.0;
            for l in 0..=(j - 1).min(i - 1) {
                let copy = binomial_pmf(j - 1, l, eta);
                for h in 0..=(i - 1 - l) {
                    total += copy * params.gamma_at(h) * params.beta_at(i - 1 - l - h);
                }
            }
            w.set(i - 1, j - 1, total);
        }
    }
    Ok(EdgeSizeMatrix { w, kmax })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizeDistribution {
    /// `p[i - 1]` is the stationary probability of edge size `i`.
    pub p: Vec<f64>,
    pub eigenvalue: f64,
    pub residual: f64,
    /// Column mass dropped by truncation before renormalization.
    pub truncation_mass: f64,
}

impl SizeDistribution {
    pub fn mean(&self) -> f64 {
        self.p.iter().enumerate().map(|(i, x)| (i + 1) as f64 * x).sum()
    }
}

/// Perron vector of the column-renormalized `W`.
pub fn stationary_edge_size_dist(params: &ModelParams, kmax: usize) -> Result<SizeDistribution> {
    stationary_edge_size_dist_with(params, kmax, perron::DEFAULT_TOL, perron::DEFAULT_MAX_ITER)
}

pub fn stationary_edge_size_dist_with(
    params: &ModelParams,
    kmax: usize,
    tol: f64,
    max_iter: usize,
) -> Result<SizeDistribution> {
    if params.eta() >= 1.0 {
        return Err(Error::Divergent("edge size is nonstationary when eta = 1".into()));
    }
    let w = edge_size_matrix(params, kmax)?;
    let truncation_mass = w.truncation_mass();
    let r = perron_vector(&w.renormalized().w, tol, max_iter)?;
    Ok(SizeDistribution { p: r.vector, eigenvalue: r.eigenvalue, residual: r.residual, truncation_mass })
}
