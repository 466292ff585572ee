//! Hyperedge link prediction: negative sampling, marginal-likelihood scoring of candidate
//! edges, and AUC / F1 evaluation.

use std::collections::{HashMap, HashSet};
use std::time::Instant;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gen::sample_degree_weighted_distinct;
use crate::hypergraph::{NodeId, TemporalHypergraph};
use crate::params::ModelParams;
use crate::sem::{log_edge_likelihood, sem_fit, Ordering, SemConfig};

/// Rejections allowed per matched negative before giving up.
pub const REJECTION_BUDGET: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredCandidate {
    pub nodes: Vec<NodeId>,
    pub label: bool,
    /// Log marginal likelihood; `-inf` when no source can produce the candidate.
    pub log_score: f64,
}

/// `ln((1/m) sum_f L(e, f))` over the training edges `f` sharing a node with `e`. Nodes
/// of `e` with id `>= n_train` count as novel. `e` must be sorted.
pub fn candidate_score(e: &[NodeId], h_train: &TemporalHypergraph, params: &ModelParams) -> f64 {
    candidate_score_capped(e, h_train, params, usize::MAX).expect("no cap")
}

/// [`candidate_score`] that refuses candidates with more than `cap` possible sources.
pub fn candidate_score_capped(
    e: &[NodeId],
    h_train: &TemporalHypergraph,
    params: &ModelParams,
    cap: usize,
) -> Result<f64> {
    let m = h_train.num_edges();
    let n = h_train.num_nodes();
    let sources = h_train.candidate_sources(e, m);
    if sources.len() > cap {
        return Err(Error::SourceCap { sources: sources.len(), cap });
    }
    let logs: Vec<f64> = sources.iter().map(|&f| log_edge_likelihood(e, &h_train.edge(f).nodes, n, params)).collect();
    Ok(log_sum_exp(&logs) - (m as f64).ln())
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Negatives matching the empirical edge-size and degree distributions of `h`: a size
/// from a uniformly chosen edge, then that many distinct nodes drawn proportionally to
/// degree. Sets equal to an observed edge are redrawn.
pub fn sample_negatives_matched(h: &TemporalHypergraph, count: usize, rng_seed: u64) -> Result<Vec<Vec<NodeId>>> {
    if h.is_empty() {
        return Err(Error::NoEdges);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let observed: HashSet<&[NodeId]> = h.edges().iter().map(|e| e.nodes.as_slice()).collect();
    let memberships: Vec<NodeId> = h.edges().iter().flat_map(|e| e.nodes.iter().copied()).collect();
    let n = h.num_nodes();
    let mut out = Vec::with_capacity(count);
    for index in 0..count {
        let mut rejections = 0;
        loop {
            let k = h.edge(rng.random_range(0..h.num_edges())).len();
            if k <= n {
                let mut nodes = sample_degree_weighted_distinct(&mut rng, &memberships, n, k);
                nodes.sort_unstable();
                if !observed.contains(nodes.as_slice()) {
                    out.push(nodes);
                    break;
                }
            }
            rejections += 1;
            if rejections >= REJECTION_BUDGET {
                return Err(Error::RejectionBudget { budget: REJECTION_BUDGET, index });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HalfSwap {
    /// One negative per usable positive, in positive order.
    pub negatives: Vec<Vec<NodeId>>,
    /// Index of the positive each negative came from.
    pub origin: Vec<usize>,
    /// Positives of size 1, or with too few outside nodes, that produced no negative.
    pub skipped: usize,
}

/// For each positive of size `k >= 2`, replaces `k / 2` uniformly chosen members with
/// distinct uniformly chosen non-members from the nodes of `h`.
pub fn sample_negatives_halfswap(positives: &[Vec<NodeId>], h: &TemporalHypergraph, rng_seed: u64) -> HalfSwap {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let n = h.num_nodes();
    let mut result = HalfSwap { negatives: Vec::new(), origin: Vec::new(), skipped: 0 };
    for (i, pos) in positives.iter().enumerate() {
        let k = pos.len();
        let swap = k / 2;
        let members_in_range = pos.iter().filter(|v| v.index() < n).count();
        if swap == 0 || n - members_in_range < swap {
            result.skipped += 1;
            continue;
        }
        let drop = index::sample(&mut rng, k, swap).into_vec();
        let mut nodes: Vec<NodeId> =
            pos.iter().enumerate().filter(|(j, _)| !drop.contains(j)).map(|(_, &v)| v).collect();
        let mut added = 0;
        while added < swap {
            let v = NodeId(rng.random_range(0..n) as u32);
            if !pos.contains(&v) && !nodes.contains(&v) {
                nodes.push(v);
                added += 1;
            }
        }
        nodes.sort_unstable();
        result.negatives.push(nodes);
        result.origin.push(i);
    }
    result
}

fn check_classes(labels: &[bool]) -> Result<(usize, usize)> {
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::InvalidInput("need at least one positive and one negative".into()));
    }
    Ok((pos, neg))
}

/// Mann-Whitney AUC with midranks: ties count one half, and `-inf` scores rank below
/// every finite score.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidInput("scores and labels differ in length".into()));
    }
    let (pos, neg) = check_classes(labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += midrank * order[i..=j].iter().filter(|&&x| labels[x]).count() as f64;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Median of the values; the mean of the two middle values for an even count.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    })
}

/// F1 of predicting positive exactly when `score > threshold`; 0 without predicted positives.
pub fn f1_at_threshold(scores: &[f64], labels: &[bool], threshold: f64) -> Result<f64> {
    check_classes(labels)?;
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s > threshold, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (false, false) => {}
        }
    }
    if tp == 0 {
        return Ok(0.0);
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fneg) as f64;
    Ok(2.0 * precision * recall / (precision + recall))
}

/// F1 with the threshold at the median of all candidate scores.
pub fn f1_at_median(scores: &[f64], labels: &[bool]) -> Result<(f64, f64)> {
    check_classes(labels)?;
    let threshold = median(scores).expect("nonempty");
    Ok((f1_at_threshold(scores, labels, threshold)?, threshold))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NegativeSampler {
    Matched,
    Halfswap,
}

impl std::str::FromStr for NegativeSampler {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "matched" => Ok(NegativeSampler::Matched),
            "halfswap" => Ok(NegativeSampler::Halfswap),
            other => Err(format!("unknown negative sampler `{other}` (expected matched or halfswap)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// Median over the pooled evaluation candidates.
    Pooled,
    /// Median over the scores of training edges.
    Training,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalConfig {
    pub train_frac: f64,
    pub ordering: Ordering,
    pub negatives: NegativeSampler,
    pub max_pos: usize,
    pub rng_seed: u64,
    pub threshold: ThresholdMode,
    /// Largest number of possible source edges a candidate may have.
    pub source_cap: usize,
    /// Count-distribution length for the fit; the largest training edge size when absent.
    pub kbar: Option<usize>,
    pub batch_size: usize,
    pub max_sem_steps: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            train_frac: 0.2,
            ordering: Ordering::Temporal,
            negatives: NegativeSampler::Matched,
            max_pos: 100_000,
            rng_seed: 0,
            threshold: ThresholdMode::Pooled,
            source_cap: 1_000_000,
            kbar: None,
            batch_size: 30,
            max_sem_steps: 50_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub auc: f64,
    pub f1: f64,
    pub threshold: f64,
    pub positives: usize,
    pub negatives: usize,
    /// Positives skipped by the half-swap sampler.
    pub skipped_positives: usize,
    /// Positives containing at least one node absent from the training edges.
    pub unseen_node_fraction: f64,
    /// AUC after randomly permuting the labels.
    pub shuffled_label_auc: f64,
    pub train_edges: usize,
    pub params: ModelParams,
    pub sem_converged: bool,
    pub sem_steps: usize,
    pub config: EvalConfig,
    #[serde(skip)]
    pub candidates: Vec<ScoredCandidate>,
    #[serde(skip)]
    pub seconds: f64,
}

/// Maps a node set from the full graph into the training id space; nodes absent from
/// training get fresh ids above the training node count.
fn to_training_ids(nodes: &[NodeId], map: &HashMap<NodeId, NodeId>, n_train: usize) -> (Vec<NodeId>, bool) {
    let mut next = n_train;
    let mut unseen = false;
    let mut out: Vec<NodeId> = nodes
        .iter()
        .map(|v| {
            map.get(v).copied().unwrap_or_else(|| {
                unseen = true;
                next += 1;
                NodeId((next - 1) as u32)
            })
        })
        .collect();
    out.sort_unstable();
    (out, unseen)
}

/// Fits on a training split and scores held-out positives against sampled negatives.
pub fn evaluate(h: &TemporalHypergraph, config: &EvalConfig) -> Result<EvalReport> {
    let start = Instant::now();
    let m = h.num_edges();
    if !(config.train_frac > 0.0 && config.train_frac < 1.0) {
        return Err(Error::InvalidInput(format!("train fraction {} is outside (0, 1)", config.train_frac)));
    }
    let m_train = ((config.train_frac * m as f64).round() as usize).max(2);
    if m_train >= m {
        return Err(Error::InvalidInput(format!("{m} edges leave nothing to hold out")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let order: Vec<usize> = match config.ordering {
        Ordering::Temporal => (0..m).collect(),
        Ordering::Shuffled => {
            let mut o: Vec<usize> = (0..m).collect();
            o.shuffle(&mut rng);
            o
        }
    };
    let (train, map) = h.reordered(&order[..m_train]);
    let n_train = train.num_nodes();
    let positives: Vec<Vec<NodeId>> =
        order[m_train..].iter().take(config.max_pos).map(|&t| h.edge(t).nodes.clone()).collect();

    let kbar = config.kbar.unwrap_or_else(|| train.edges().iter().map(|e| e.len()).max().unwrap_or(1));
    let mut sem = SemConfig::new(kbar);
    sem.batch_size = config.batch_size;
    sem.max_steps = config.max_sem_steps;
    let (params, trace) = sem_fit(&train, &sem, rng.random())?;

    let neg_seed: u64 = rng.random();
    let (positives, negatives, skipped) = match config.negatives {
        NegativeSampler::Matched => {
            let neg = sample_negatives_matched(h, positives.len(), neg_seed)?;
            (positives, neg, 0)
        }
        NegativeSampler::Halfswap => {
            let hs = sample_negatives_halfswap(&positives, h, neg_seed);
            (positives, hs.negatives, hs.skipped)
        }
    };

    let mut unseen_pos = 0usize;
    let mut candidates: Vec<(Vec<NodeId>, bool)> = Vec::with_capacity(positives.len() + negatives.len());
    for p in &positives {
        let (nodes, unseen) = to_training_ids(p, &map, n_train);
        unseen_pos += unseen as usize;
        candidates.push((nodes, true));
    }
    for q in &negatives {
        candidates.push((to_training_ids(q, &map, n_train).0, false));
    }
    let scores: Vec<f64> = candidates
        .par_iter()
        .map(|(nodes, _)| candidate_score_capped(nodes, &train, &params, config.source_cap))
        .collect::<Result<Vec<f64>>>()?;
    let labels: Vec<bool> = candidates.iter().map(|c| c.1).collect();

    let auc_value = auc(&scores, &labels)?;
    let threshold = match config.threshold {
        ThresholdMode::Pooled => median(&scores).expect("nonempty"),
        ThresholdMode::Training => {
            let sample: Vec<f64> = train
                .edges()
                .par_iter()
                .take(config.max_pos)
                .map(|e| candidate_score(&e.nodes, &train, &params))
                .collect();
            median(&sample).expect("training is nonempty")
        }
    };
    let f1 = f1_at_threshold(&scores, &labels, threshold)?;
    let mut shuffled_labels = labels.clone();
    shuffled_labels.shuffle(&mut rng);
    let shuffled_label_auc = auc(&scores, &shuffled_labels)?;

    let candidates = candidates
        .into_iter()
        .zip(&scores)
        .map(|((nodes, label), &log_score)| ScoredCandidate { nodes, label, log_score })
        .collect();
    Ok(EvalReport {
        auc: auc_value,
        f1,
        threshold,
        positives: positives.len(),
        negatives: negatives.len(),
        skipped_positives: skipped,
        unseen_node_fraction: unseen_pos as f64 / positives.len().max(1) as f64,
        shuffled_label_auc,
        train_edges: m_train,
        params,
        sem_converged: trace.converged,
        sem_steps: trace.records.len(),
        config: config.clone(),
        candidates,
        seconds: start.elapsed().as_secs_f64(),
    })
}
