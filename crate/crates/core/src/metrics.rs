//! Empirical structural measurements: intersection-size densities over time, degree and
//! edge-size histograms, and power-law tail exponents.

use std::collections::BTreeMap;
use std::ops::Range;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hypergraph::TemporalHypergraph;

pub const DEFAULT_KMAX: usize = 12;
pub const DEFAULT_DMIN: usize = 10;

/// Exact pair counts at a prefix of `m` edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RkRow {
    pub m: usize,
    /// `counts[k]` is the number of unordered pairs meeting in exactly `k` nodes, for
    /// `1 <= k <= kmax`; `counts[0]` holds the disjoint pairs.
    pub counts: Vec<u64>,
    /// Pairs meeting in more than `kmax` nodes.
    pub overflow: u64,
}

impl RkRow {
    pub fn pairs(&self) -> u64 {
        let m = self.m as u64;
        m * m.saturating_sub(1) / 2
    }

    /// Densities `r_0..=r_kmax`; `r_0` is the complement of every overlapping pair.
    pub fn densities(&self) -> Vec<f64> {
        let total = self.pairs() as f64;
        self.counts.iter().map(|&c| c as f64 / total).collect()
    }

    pub fn overflow_density(&self) -> f64 {
        self.overflow as f64 / self.pairs() as f64
    }

    fn from_overlaps(m: usize, overlaps: &[u64]) -> Self {
        let kmax = overlaps.len() - 2;
        let mut counts = overlaps[..=kmax].to_vec();
        let overlapping: u64 = overlaps[1..].iter().sum();
        let row = RkRow { m, counts: Vec::new(), overflow: overlaps[kmax + 1] };
        counts[0] = row.pairs() - overlapping;
        RkRow { counts, ..row }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RkSeries {
    pub kmax: usize,
    pub rows: Vec<RkRow>,
}

/// Histogram over `1..=kmax + 1` (last slot is overflow) of intersection sizes between
/// each edge in `range` and every earlier edge it meets.
fn overlap_counts(h: &TemporalHypergraph, range: Range<usize>, kmax: usize) -> Vec<u64> {
    let end = range.end;
    let blank = || vec![0u64; kmax + 2];
    range
        .into_par_iter()
        .fold(
            || (blank(), vec![0u32; end], Vec::<usize>::new()),
            |(mut hist, mut seen, mut touched), t| {
                for &v in &h.edge(t).nodes {
                    for &s in h.incidence(v) {
                        if s >= t {
                            break;
                        }
                        if seen[s] == 0 {
                            touched.push(s);
                        }
                        seen[s] += 1;
                    }
                }
                for &s in &touched {
                    hist[(seen[s] as usize).min(kmax + 1)] += 1;
                    seen[s] = 0;
                }
                touched.clear();
                (hist, seen, touched)
            },
        )
        .map(|(hist, _, _)| hist)
        .reduce(blank, |mut a, b| {
            a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
            a
        })
}

/// Pair counts over the first `upto + 1` edges.
pub fn intersection_density(h: &TemporalHypergraph, upto: usize, kmax: usize) -> Result<RkRow> {
    let m = (upto + 1).min(h.num_edges());
    if m < 2 {
        return Err(Error::InvalidInput("intersection density needs at least two edges".into()));
    }
    Ok(RkRow::from_overlaps(m, &overlap_counts(h, 0..m, kmax)))
}

/// Pair counts at each prefix length in `checkpoints`, in one pass over co-incident
/// pairs. Checkpoints below 2 or above the edge count are dropped.
pub fn rk_timeseries(h: &TemporalHypergraph, checkpoints: &[usize], kmax: usize) -> Result<RkSeries> {
    if checkpoints.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidInput("checkpoints must be sorted ascending".into()));
    }
    let mut marks: Vec<usize> = checkpoints.iter().copied().filter(|&c| c >= 2 && c <= h.num_edges()).collect();
    marks.dedup();
    let mut running = vec![0u64; kmax + 2];
    let mut start = 0;
    let mut rows = Vec::with_capacity(marks.len());
    for m in marks {
        let part = overlap_counts(h, start..m, kmax);
        running.iter_mut().zip(&part).for_each(|(x, y)| *x += y);
        rows.push(RkRow::from_overlaps(m, &running));
        start = m;
    }
    Ok(RkSeries { kmax, rows })
}

/// `per_decade` log-spaced prefix lengths from 2 up to `m`, always ending at `m`.
pub fn log_checkpoints(m: usize, per_decade: usize) -> Vec<usize> {
    let mut out = Vec::new();
    if m < 2 || per_decade == 0 {
        return out;
    }
    let top = (m as f64).log10();
    let steps = (top * per_decade as f64).floor() as usize;
    for s in 0..=steps {
        let c = 10f64.powf(s as f64 / per_decade as f64).round() as usize;
        if c >= 2 && c < m {
            out.push(c);
        }
    }
    out.push(m);
    out.dedup();
    out
}

/// Degree counts over the nodes present in the first `upto + 1` edges.
pub fn degree_histogram(h: &TemporalHypergraph, upto: usize) -> BTreeMap<usize, u64> {
    let (n, _) = h.snapshot_counts(upto);
    let mut hist = BTreeMap::new();
    for v in 0..n {
        let d = h.degree(crate::hypergraph::NodeId(v as u32), upto);
        *hist.entry(d).or_insert(0) += 1;
    }
    hist
}

pub fn edge_size_histogram(h: &TemporalHypergraph, upto: usize) -> BTreeMap<usize, u64> {
    let mut hist = BTreeMap::new();
    for e in h.edges().iter().take(upto.saturating_add(1)) {
        *hist.entry(e.len()).or_insert(0) += 1;
    }
    hist
}

/// Hill estimate `1 + N / sum ln(d / dmin)` over histogram entries `d >= dmin`.
/// Requires at least 10 distinct values in the tail.
pub fn tail_slope(hist: &BTreeMap<usize, u64>, dmin: usize) -> Result<f64> {
    if dmin == 0 {
        return Err(Error::InvalidInput("dmin must be positive".into()));
    }
    let tail: Vec<(usize, u64)> = hist.range(dmin..).filter(|(_, &c)| c > 0).map(|(&d, &c)| (d, c)).collect();
    if tail.len() < 10 {
        return Err(Error::InvalidInput(format!(
            "only {} distinct values at or above dmin = {dmin}; need at least 10",
            tail.len()
        )));
    }
    let n: u64 = tail.iter().map(|&(_, c)| c).sum();
    let log_sum: f64 = tail.iter().map(|&(d, c)| c as f64 * (d as f64 / dmin as f64).ln()).sum();
    Ok(1.0 + n as f64 / log_sum)
}

/// Continuous Hill estimate over raw observations `x >= xmin`.
pub fn hill_exponent(values: &[f64], xmin: f64) -> Result<f64> {
    let (n, log_sum) = values
        .iter()
        .filter(|&&x| x >= xmin)
        .fold((0usize, 0.0), |(n, s), &x| (n + 1, s + (x / xmin).ln()));
    if n == 0 || log_sum <= 0.0 {
        return Err(Error::InvalidInput("no spread in the tail above xmin".into()));
    }
    Ok(1.0 + n as f64 / log_sum)
}

/// Least-squares slope of `ln y` against `ln x` over the points with positive values.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let pts: Vec<(f64, f64)> =
        xs.iter().zip(ys).filter(|(x, y)| **x > 0.0 && **y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return Err(Error::InvalidInput("need at least two positive points for a slope".into()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("x values are all equal".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(sxy / sxx)
}
