//! Parameter inference by stochastic expectation-maximization.
//!
//! The latent variable for each observed edge `e` is its source edge `f`. Given `f`, the
//! probability that one copy step produces exactly `e` has a closed form, so the
//! posterior over sources and the expected sufficient statistics are exact sums over the
//! earlier edges that share at least one node with `e`.

use std::time::Instant;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hypergraph::{intersection_size, NodeId, TemporalHypergraph};
use crate::params::ModelParams;

/// `x ln y` with `0 ln 0 = 0`.
#[inline]
fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

/// `ln C(n, k)` as a sum of `k` logs; `-inf` when `k > n`.
pub fn ln_choose(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64 / (i + 1) as f64).ln()).sum()
}

/// How an edge `e` splits against a candidate source `f` and the prior node set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decomposition {
    /// `|e & f|`, the copied nodes including the seed.
    pub copied: usize,
    /// `|f|`.
    pub source_len: usize,
    /// Extant nodes of `e` outside `f`.
    pub extant: usize,
    /// Nodes of `e` unseen before (id `>= n_prior`).
    pub novel: usize,
}

/// Nodes with dense id below `n_prior` existed before the edge; the rest are novel.
pub fn split_known(e: &[NodeId], n_prior: usize) -> (&[NodeId], usize) {
    let cut = e.partition_point(|v| v.index() < n_prior);
    (&e[..cut], e.len() - cut)
}

pub fn decompose(e: &[NodeId], f: &[NodeId], n_prior: usize) -> Decomposition {
    let (known, novel) = split_known(e, n_prior);
    let copied = intersection_size(known, f);
    Decomposition { copied, source_len: f.len(), extant: known.len() - copied, novel }
}

/// Log-probability of the copy and extant draws (everything except `beta_b`).
fn log_source_factor(d: &Decomposition, n_prior: usize, params: &ModelParams) -> f64 {
    let (c, j, g) = (d.copied, d.source_len, d.extant);
    if c == 0 || g > params.kbar() || j > n_prior || g > n_prior - j {
        return f64::NEG_INFINITY;
    }
    let eta = params.eta();
    let gamma = params.gamma_at(g);
    if gamma == 0.0 {
        return f64::NEG_INFINITY;
    }
    (c as f64 / j as f64).ln() + xlogy((c - 1) as f64, eta) + xlogy((j - c) as f64, 1.0 - eta) + gamma.ln()
        - ln_choose(n_prior - j, g)
}

/// `ln` of [`edge_generation_likelihood`]; `-inf` for an impossible draw.
pub fn log_edge_likelihood(e: &[NodeId], f: &[NodeId], n_prior: usize, params: &ModelParams) -> f64 {
    let d = decompose(e, f, n_prior);
    if d.novel > params.kbar() {
        return f64::NEG_INFINITY;
    }
    let beta = params.beta_at(d.novel);
    if beta == 0.0 {
        return f64::NEG_INFINITY;
    }
    log_source_factor(&d, n_prior, params) + beta.ln()
}

/// Probability that one copy step with source `f`, against `n_prior` existing nodes,
/// produces exactly the node set `e`:
/// `(c/j) eta^(c-1) (1-eta)^(j-c) gamma_g / C(n_prior - j, g) beta_b`.
pub fn edge_generation_likelihood(e: &[NodeId], f: &[NodeId], n_prior: usize, params: &ModelParams) -> f64 {
    log_edge_likelihood(e, f, n_prior, params).exp()
}

/// Sparse posterior over source edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    pub sources: Vec<usize>,
    pub probs: Vec<f64>,
    /// Copy/extant split of `e` against each source.
    decomps: Vec<Decomposition>,
}

/// Normalized posterior `p(f | e)` over edges before index `upto`. `None` when no
/// candidate has positive likelihood; the caller skips such samples.
pub fn posterior_over_sources(
    e: &[NodeId],
    h: &TemporalHypergraph,
    upto: usize,
    params: &ModelParams,
) -> Option<Posterior> {
    let n_prior = h.nodes_before(upto);
    let (_, novel) = split_known(e, n_prior);
    // beta_b is common to every source, so it is left out (a zero estimate must not
    // lock out edges with that many novel nodes)
    if novel > params.kbar() {
        return None;
    }
    let mut sources = Vec::new();
    let mut decomps = Vec::new();
    let mut logw = Vec::new();
    for f in h.candidate_sources(e, upto) {
        let d = decompose(e, &h.edge(f).nodes, n_prior);
        let w = log_source_factor(&d, n_prior, params);
        if w > f64::NEG_INFINITY {
            sources.push(f);
            decomps.push(d);
            logw.push(w);
        }
    }
    if sources.is_empty() {
        return None;
    }
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = logw.iter().map(|w| (w - max).exp()).collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    Some(Posterior { sources, probs, decomps })
}

/// Expected sufficient statistics of one observation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuffStats {
    /// Expected `|f & e|`.
    pub s1: f64,
    /// Expected `|f \ e|`.
    pub s2: f64,
    /// Indicator expectations of the novel-node count.
    pub s3: Vec<f64>,
    /// Indicator expectations of the extant-node count.
    pub s4: Vec<f64>,
}

impl SuffStats {
    pub fn zeros(kbar: usize) -> Self {
        Self { s1: 0.0, s2: 0.0, s3: vec![0.0; kbar + 1], s4: vec![0.0; kbar + 1] }
    }

    fn from_posterior(post: &Posterior, kbar: usize) -> Self {
        let mut s = Self::zeros(kbar);
        for (p, d) in post.probs.iter().zip(&post.decomps) {
            s.s1 += p * d.copied as f64;
            s.s2 += p * (d.source_len - d.copied) as f64;
            s.s4[d.extant] += p;
        }
        s.s3[post.decomps[0].novel] = 1.0;
        s
    }

    /// `self = (1 - rho) self + rho other`.
    pub fn blend(&mut self, other: &SuffStats, rho: f64) {
        self.s1 = (1.0 - rho) * self.s1 + rho * other.s1;
        self.s2 = (1.0 - rho) * self.s2 + rho * other.s2;
        for (a, b) in self.s3.iter_mut().zip(&other.s3) {
            *a = (1.0 - rho) * *a + rho * b;
        }
        for (a, b) in self.s4.iter_mut().zip(&other.s4) {
            *a = (1.0 - rho) * *a + rho * b;
        }
    }

    fn add(&mut self, other: &SuffStats) {
        self.s1 += other.s1;
        self.s2 += other.s2;
        self.s3.iter_mut().zip(&other.s3).for_each(|(a, b)| *a += b);
        self.s4.iter_mut().zip(&other.s4).for_each(|(a, b)| *a += b);
    }

    fn scale(&mut self, w: f64) {
        self.s1 *= w;
        self.s2 *= w;
        self.s3.iter_mut().for_each(|a| *a *= w);
        self.s4.iter_mut().for_each(|a| *a *= w);
    }
}

/// Posterior expectations for edge `e` observed at index `upto`.
pub fn expected_sufficient_stats(
    e: &[NodeId],
    h: &TemporalHypergraph,
    upto: usize,
    params: &ModelParams,
) -> Option<SuffStats> {
    posterior_over_sources(e, h, upto, params).map(|p| SuffStats::from_posterior(&p, params.kbar()))
}

/// Closed-form maximizer: `eta = (s1 - 1) / (s1 + s2 - 1)` (0 when both sides vanish),
/// `gamma = s4`, `beta = s3`.
pub fn m_step(stats: &SuffStats) -> Result<ModelParams> {
    let num = stats.s1 - 1.0;
    let den = stats.s1 + stats.s2 - 1.0;
    let eta = if den <= 0.0 { 0.0 } else { (num / den).clamp(0.0, 1.0) };
    ModelParams::new(eta, stats.s4.clone(), stats.s3.clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Ordering {
    /// Sources come from strictly earlier edges; edges may be resampled across batches.
    Temporal,
    /// Edges are placed in a random pseudo-temporal order and each is sampled at most once.
    Shuffled,
}

impl std::str::FromStr for Ordering {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "temporal" => Ok(Ordering::Temporal),
            "shuffled" => Ok(Ordering::Shuffled),
            other => Err(format!("unknown ordering `{other}` (expected temporal or shuffled)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SemConfig {
    pub kbar: usize,
    pub batch_size: usize,
    /// Steps between convergence checks.
    pub check_interval: usize,
    /// Length of each of the two compared windows of eta estimates.
    pub window: usize,
    pub rel_tol: f64,
    pub ordering: Ordering,
    pub max_steps: usize,
    /// Starting parameters; `eta = 0.5` with uniform `gamma` and `beta` when absent.
    pub initial: Option<ModelParams>,
}

impl SemConfig {
    pub fn new(kbar: usize) -> Self {
        Self {
            kbar,
            batch_size: 30,
            check_interval: 100,
            window: 100,
            rel_tol: 1e-2,
            ordering: Ordering::Temporal,
            max_steps: 50_000,
            initial: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub tau: usize,
    pub eta: f64,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitTrace {
    pub records: Vec<TraceRecord>,
    /// Wall-clock seconds since the start of the fit, one per record.
    pub seconds: Vec<f64>,
    pub converged: bool,
    /// Sampled edges whose posterior was empty.
    pub skipped: u64,
    pub sampled: u64,
}

impl FitTrace {
    pub fn skipped_fraction(&self) -> f64 {
        if self.sampled == 0 {
            0.0
        } else {
            self.skipped as f64 / self.sampled as f64
        }
    }
}

fn uniform_params(kbar: usize) -> ModelParams {
    let u = vec![1.0 / (kbar + 1) as f64; kbar + 1];
    ModelParams::new(0.5, u.clone(), u).expect("uniform distributions are valid")
}

/// Relative change of the mean eta between the last two disjoint windows.
fn window_change(records: &[TraceRecord], window: usize) -> Option<f64> {
    if records.len() < 2 * window {
        return None;
    }
    let tail = &records[records.len() - 2 * window..];
    let mean = |r: &[TraceRecord]| r.iter().map(|x| x.eta).sum::<f64>() / r.len() as f64;
    let (a, b) = (mean(&tail[..window]), mean(&tail[window..]));
    Some(if a == 0.0 {
        if b == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (b - a).abs() / a.abs()
    })
}

/// Fits `(eta, gamma, beta)` with batch stochastic EM and schedule `rho(tau) = 1 / tau`.
///
/// Each step averages the sufficient statistics of a batch of edges sampled without
/// replacement (edge 0 has no possible source and is never sampled), blends the batch
/// mean into the running estimate and applies the M-step.
pub fn sem_fit(h: &TemporalHypergraph, config: &SemConfig, rng_seed: u64) -> Result<(ModelParams, FitTrace)> {
    if h.num_edges() < 2 {
        return Err(Error::InvalidInput("fitting needs at least two edges".into()));
    }
    if config.batch_size == 0 || config.window == 0 || config.check_interval == 0 {
        return Err(Error::InvalidInput("batch size, window and check interval must be positive".into()));
    }
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let shuffled;
    let (graph, mut pool) = match config.ordering {
        Ordering::Temporal => (h, Vec::new()),
        Ordering::Shuffled => {
            let mut order: Vec<usize> = (0..h.num_edges()).collect();
            order.shuffle(&mut rng);
            shuffled = h.reordered(&order).0;
            let mut pool: Vec<usize> = (1..shuffled.num_edges()).collect();
            pool.shuffle(&mut rng);
            pool.reverse();
            (&shuffled, pool)
        }
    };
    let kbar = config.kbar;
    let mut theta = match &config.initial {
        Some(p) => p.padded(kbar),
        None => uniform_params(kbar),
    };
    let mut s_hat = SuffStats::zeros(kbar);
    let mut trace = FitTrace { records: Vec::new(), seconds: Vec::new(), converged: false, skipped: 0, sampled: 0 };
    let mut tau = 0usize;
    let candidates = graph.num_edges() - 1;
    while tau < config.max_steps {
        let batch: Vec<usize> = match config.ordering {
            Ordering::Temporal => index::sample(&mut rng, candidates, config.batch_size.min(candidates))
                .into_iter()
                .map(|i| i + 1)
                .collect(),
            Ordering::Shuffled => {
                if pool.is_empty() {
                    break;
                }
                let take = config.batch_size.min(pool.len());
                pool.split_off(pool.len() - take)
            }
        };
        let stats: Vec<Option<SuffStats>> = batch
            .par_iter()
            .map(|&t| expected_sufficient_stats(&graph.edge(t).nodes, graph, t, &theta))
            .collect();
        trace.sampled += stats.len() as u64;
        let mut mean = SuffStats::zeros(kbar);
        let mut used = 0usize;
        for s in stats {
            match s {
                Some(s) => {
                    mean.add(&s);
                    used += 1;
                }
                None => trace.skipped += 1,
            }
        }
        if used == 0 {
            continue;
        }
        mean.scale(1.0 / used as f64);
        tau += 1;
        s_hat.blend(&mean, 1.0 / tau as f64);
        theta = m_step(&s_hat)?;
        trace.records.push(TraceRecord {
            tau,
            eta: theta.eta(),
            gamma: theta.gamma().to_vec(),
            beta: theta.beta().to_vec(),
        });
        trace.seconds.push(start.elapsed().as_secs_f64());
        if tau.is_multiple_of(config.check_interval) {
            if let Some(change) = window_change(&trace.records, config.window) {
                if change < config.rel_tol {
                    trace.converged = true;
                    break;
                }
            }
        }
    }
    if trace.records.is_empty() {
        return Err(Error::InvalidInput("no sampled edge had a possible source".into()));
    }
    Ok((theta, trace))
}
