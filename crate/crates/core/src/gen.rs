//! Forward simulation of the hyperedge copy model (HCM) and two baseline growth
//! models: a uniform (Erdős–Rényi-like) extant-node model and a degree-proportional
//! (preferential-attachment-like) model.
//!
//! # Randomness
//!
//! Every simulation is a pure function of `(params, steps, seed hypergraph, rng_seed)`.
//! Step `s` (counted from 0 for the first generated edge) draws exclusively from
//! stream `s` of a ChaCha8 generator keyed by `rng_seed`, so the randomness consumed
//! by one step never shifts the draws of another.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hypergraph::{EdgeRecord, NodeId, TemporalHypergraph};
use crate::params::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Hcm,
    Er,
    Pa,
}

impl std::str::FromStr for Model {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "hcm" => Ok(Model::Hcm),
            "er" => Ok(Model::Er),
            "pa" => Ok(Model::Pa),
            other => Err(format!("unknown model `{other}` (expected hcm, er or pa)")),
        }
    }
}

/// Counters for the places where a draw had to be truncated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct GrowthDiagnostics {
    /// Extant-node draws reduced because too few eligible nodes existed.
    pub extant_clamps: u64,
    /// Degree-proportional or uniform seed-set draws reduced to the node count.
    pub alpha_clamps: u64,
    /// Poisson novel-node draws capped at `4 * kbar`.
    pub poisson_caps: u64,
}

/// Samples counts from a probability vector.
#[derive(Debug, Clone)]
struct CountSampler {
    cumulative: Vec<f64>,
}

impl CountSampler {
    fn new(p: &[f64]) -> Self {
        let mut acc = 0.0;
        let cumulative = p
            .iter()
            .map(|x| {
                acc += x;
                acc
            })
            .collect();
        Self { cumulative }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().expect("nonempty distribution");
        let u = rng.random::<f64>() * total;
        let i = self.cumulative.partition_point(|&c| c <= u);
        // rounding can push u past the last positive entry
        i.min(self.cumulative.len() - 1)
    }
}

struct Samplers {
    gamma: CountSampler,
    beta: CountSampler,
}

impl Samplers {
    fn new(params: &ModelParams) -> Self {
        Self { gamma: CountSampler::new(params.gamma()), beta: CountSampler::new(params.beta()) }
    }
}

/// A hypergraph being grown one edge per step, with its random stream.
#[derive(Debug, Clone)]
pub struct GrowthState {
    graph: TemporalHypergraph,
    rng_seed: u64,
    steps: u64,
    next_timestamp: f64,
    diagnostics: GrowthDiagnostics,
    memberships: Option<Vec<NodeId>>,
}

impl GrowthState {
    /// Starts from `seed`, which must contain at least one edge.
    pub fn new(seed: TemporalHypergraph, rng_seed: u64) -> Result<Self> {
        if seed.is_empty() {
            return Err(Error::InvalidInput("seed hypergraph has no edges".into()));
        }
        let mut graph = seed;
        graph.clear_names();
        let next_timestamp = graph.edges().last().map_or(0.0, |e| e.timestamp) + 1.0;
        Ok(Self {
            graph,
            rng_seed,
            steps: 0,
            next_timestamp,
            diagnostics: GrowthDiagnostics::default(),
            memberships: None,
        })
    }

    /// Starts from the default seed: one edge of `ceil(kbar / 2) + 1` nodes.
    pub fn with_default_seed(params: &ModelParams, rng_seed: u64) -> Self {
        Self::new(default_seed(params), rng_seed).expect("default seed is nonempty")
    }

    pub fn graph(&self) -> &TemporalHypergraph {
        &self.graph
    }

    pub fn into_graph(self) -> TemporalHypergraph {
        self.graph
    }

    pub fn diagnostics(&self) -> GrowthDiagnostics {
        self.diagnostics
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    fn step_rng(&self) -> ChaCha8Rng {
        step_rng(self.rng_seed, self.steps)
    }

    fn commit(&mut self, mut nodes: Vec<NodeId>) -> Result<EdgeRecord> {
        nodes.sort_unstable();
        if let Some(members) = self.memberships.as_mut() {
            members.extend_from_slice(&nodes);
        }
        let ts = self.next_timestamp;
        self.next_timestamp += 1.0;
        self.steps += 1;
        Ok(self.graph.push_edge(ts, nodes)?.clone())
    }

    fn memberships(&mut self) -> &[NodeId] {
        let graph = &self.graph;
        self.memberships
            .get_or_insert_with(|| graph.edges().iter().flat_map(|e| e.nodes.iter().copied()).collect())
    }
}

/// Random stream for step `step` of a simulation keyed by `seed`.
pub fn step_rng(seed: u64, step: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step);
    rng
}

pub fn default_seed(params: &ModelParams) -> TemporalHypergraph {
    let size = params.kbar().div_ceil(2) + 1;
    let mut graph = TemporalHypergraph::default();
    graph
        .push_edge(0.0, (0..size as u32).map(NodeId).collect())
        .expect("fresh dense ids");
    graph
}

/// The pieces of one HCM draw.
#[derive(Debug, Clone, PartialEq)]
pub struct HcmDraw {
    /// Index of the source edge `f`.
    pub source: usize,
    pub seed_node: NodeId,
    /// Nodes copied from `f`, seed included, sorted.
    pub copied: Vec<NodeId>,
    /// Extant nodes from outside `f`.
    pub extant: Vec<NodeId>,
    /// Number of novel nodes (they take the next dense ids).
    pub novel: usize,
    /// True when the extant count drawn from `gamma` exceeded the eligible pool.
    pub clamped: bool,
}

impl HcmDraw {
    /// Node set of the new edge, given the node count before the step.
    pub fn nodes(&self, n: usize) -> Vec<NodeId> {
        let mut nodes: Vec<NodeId> = self.copied.iter().chain(&self.extant).copied().collect();
        nodes.extend((n..n + self.novel).map(|v| NodeId(v as u32)));
        nodes.sort_unstable();
        nodes
    }
}

/// Maps rank `r` within the complement of sorted `excluded` (inside `0..n`) to a node.
fn complement_node(r: usize, excluded: &[NodeId]) -> NodeId {
    let mut node = r;
    for x in excluded {
        if x.index() <= node {
            node += 1;
        } else {
            break;
        }
    }
    NodeId(node as u32)
}

/// `count` distinct nodes drawn uniformly from `0..n` minus sorted `excluded`.
fn uniform_excluding<R: Rng>(rng: &mut R, n: usize, excluded: &[NodeId], count: usize) -> Vec<NodeId> {
    let available = n - excluded.len();
    index::sample(rng, available, count.min(available))
        .into_iter()
        .map(|r| complement_node(r, excluded))
        .collect()
}

fn draw_hcm_with<R: Rng>(
    graph: &TemporalHypergraph,
    params: &ModelParams,
    samplers: &Samplers,
    rng: &mut R,
) -> Result<HcmDraw> {
    let m = graph.num_edges();
    if m == 0 {
        return Err(Error::InvalidInput("HCM step needs at least one edge".into()));
    }
    let source = rng.random_range(0..m);
    let f = &graph.edge(source).nodes;
    let seed_pos = rng.random_range(0..f.len());
    let eta = params.eta();
    let copied: Vec<NodeId> = f
        .iter()
        .enumerate()
        .filter_map(|(i, &v)| {
            if i == seed_pos {
                Some(v)
            } else {
                (rng.random::<f64>() < eta).then_some(v)
            }
        })
        .collect();
    let g = samplers.gamma.sample(rng);
    let available = graph.num_nodes() - f.len();
    let extant = uniform_excluding(rng, graph.num_nodes(), f, g);
    let novel = samplers.beta.sample(rng);
    Ok(HcmDraw { source, seed_node: f[seed_pos], copied, extant, novel, clamped: g > available })
}

/// One HCM draw against `graph` without modifying it.
pub fn draw_hcm_edge<R: Rng>(graph: &TemporalHypergraph, params: &ModelParams, rng: &mut R) -> Result<HcmDraw> {
    draw_hcm_with(graph, params, &Samplers::new(params), rng)
}

/// Executes one HCM update step and returns the draw that produced the new edge.
pub fn hcm_step(state: &mut GrowthState, params: &ModelParams) -> Result<HcmDraw> {
    hcm_step_with(state, params, &Samplers::new(params))
}

fn hcm_step_with(state: &mut GrowthState, params: &ModelParams, samplers: &Samplers) -> Result<HcmDraw> {
    let mut rng = state.step_rng();
    let draw = draw_hcm_with(&state.graph, params, samplers, &mut rng)?;
    if draw.clamped {
        state.diagnostics.extant_clamps += 1;
    }
    let nodes = draw.nodes(state.graph.num_nodes());
    state.commit(nodes)?;
    Ok(draw)
}

/// Counts shared by the two baseline models: `alpha` (seed plus binomial copies of a
/// uniformly chosen edge), `g ~ gamma` and `b_hat ~ Poisson(b)` with `b ~ beta`.
fn baseline_counts<R: Rng>(
    state: &mut GrowthState,
    params: &ModelParams,
    samplers: &Samplers,
    rng: &mut R,
) -> (usize, usize, usize) {
    let m = state.graph.num_edges();
    let f_len = state.graph.edge(rng.random_range(0..m)).len();
    let eta = params.eta();
    let alpha = 1 + (1..f_len).filter(|_| rng.random::<f64>() < eta).count();
    let g = samplers.gamma.sample(rng);
    let b = samplers.beta.sample(rng);
    let b_hat = if b == 0 {
        0
    } else {
        let draw = Poisson::new(b as f64).expect("positive mean").sample(rng) as usize;
        let cap = 4 * params.kbar();
        if draw > cap {
            state.diagnostics.poisson_caps += 1;
            cap
        } else {
            draw
        }
    };
    (alpha, g, b_hat)
}

/// One step of the uniform baseline: `alpha + g` extant nodes drawn uniformly without
/// replacement, plus `b_hat` novel nodes.
pub fn er_step(state: &mut GrowthState, params: &ModelParams) -> Result<EdgeRecord> {
    er_step_with(state, params, &Samplers::new(params))
}

fn er_step_with(state: &mut GrowthState, params: &ModelParams, samplers: &Samplers) -> Result<EdgeRecord> {
    let mut rng = state.step_rng();
    let (alpha, g, b_hat) = baseline_counts(state, params, samplers, &mut rng);
    let n = state.graph.num_nodes();
    if alpha + g > n {
        state.diagnostics.alpha_clamps += 1;
    }
    let mut nodes = uniform_excluding(&mut rng, n, &[], alpha + g);
    nodes.extend((n..n + b_hat).map(|v| NodeId(v as u32)));
    state.commit(nodes)
}

/// One step of the degree-proportional baseline: `alpha` distinct nodes drawn with
/// probability proportional to degree, `g` uniform nodes from the rest, plus `b_hat`
/// novel nodes.
pub fn pa_step(state: &mut GrowthState, params: &ModelParams) -> Result<EdgeRecord> {
    pa_step_with(state, params, &Samplers::new(params))
}

fn pa_step_with(state: &mut GrowthState, params: &ModelParams, samplers: &Samplers) -> Result<EdgeRecord> {
    let mut rng = state.step_rng();
    let (alpha, g, b_hat) = baseline_counts(state, params, samplers, &mut rng);
    let n = state.graph.num_nodes();
    let alpha = if alpha > n {
        state.diagnostics.alpha_clamps += 1;
        n
    } else {
        alpha
    };
    let mut chosen = sample_degree_weighted_distinct(&mut rng, state.memberships(), n, alpha);
    chosen.sort_unstable();
    if g > n - alpha {
        state.diagnostics.extant_clamps += 1;
    }
    let extant = uniform_excluding(&mut rng, n, &chosen, g);
    let mut nodes = chosen;
    nodes.extend(extant);
    nodes.extend((n..n + b_hat).map(|v| NodeId(v as u32)));
    state.commit(nodes)
}

/// Draws `k` distinct nodes with probability proportional to their multiplicity in
/// `memberships` (that is, their degree), by repeated draws with rejection of repeats.
/// Falls back to exact sequential weighted sampling when rejections pile up.
/// `k` must not exceed the number of distinct nodes in `memberships`.
pub(crate) fn sample_degree_weighted_distinct<R: Rng>(
    rng: &mut R,
    memberships: &[NodeId],
    n: usize,
    k: usize,
) -> Vec<NodeId> {
    let mut chosen: Vec<NodeId> = Vec::with_capacity(k);
    if k == 0 || memberships.is_empty() {
        return chosen;
    }
    let budget = 32 * (k + 1);
    let mut failures = 0;
    while chosen.len() < k && failures < budget {
        let v = memberships[rng.random_range(0..memberships.len())];
        if chosen.contains(&v) {
            failures += 1;
        } else {
            chosen.push(v);
        }
    }
    if chosen.len() < k {
        let mut weight = vec![0usize; n];
        for v in memberships {
            weight[v.index()] += 1;
        }
        for v in &chosen {
            weight[v.index()] = 0;
        }
        while chosen.len() < k {
            let total: usize = weight.iter().sum();
            if total == 0 {
                break;
            }
            let mut r = rng.random_range(0..total);
            let v = weight
                .iter()
                .position(|&w| {
                    if r < w {
                        true
                    } else {
                        r -= w;
                        false
                    }
                })
                .expect("r < total");
            weight[v] = 0;
            chosen.push(NodeId(v as u32));
        }
    }
    chosen
}

/// Output of a simulation run.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub graph: TemporalHypergraph,
    pub diagnostics: GrowthDiagnostics,
}

/// Grows `steps` edges under `model`, starting from `seed` (or the default seed).
pub fn simulate(
    model: Model,
    params: &ModelParams,
    steps: usize,
    seed: Option<TemporalHypergraph>,
    rng_seed: u64,
) -> Result<Simulation> {
    let mut state = match seed {
        Some(seed) => GrowthState::new(seed, rng_seed)?,
        None => GrowthState::with_default_seed(params, rng_seed),
    };
    let samplers = Samplers::new(params);
    for _ in 0..steps {
        match model {
            Model::Hcm => {
                hcm_step_with(&mut state, params, &samplers)?;
            }
            Model::Er => {
                er_step_with(&mut state, params, &samplers)?;
            }
            Model::Pa => {
                pa_step_with(&mut state, params, &samplers)?;
            }
        }
    }
    let diagnostics = state.diagnostics();
    Ok(Simulation { graph: state.into_graph(), diagnostics })
}

pub fn simulate_hcm(
    params: &ModelParams,
    steps: usize,
    seed: Option<TemporalHypergraph>,
    rng_seed: u64,
) -> Result<Simulation> {
    simulate(Model::Hcm, params, steps, seed, rng_seed)
}

pub fn simulate_er(
    params: &ModelParams,
    steps: usize,
    seed: Option<TemporalHypergraph>,
    rng_seed: u64,
) -> Result<Simulation> {
    simulate(Model::Er, params, steps, seed, rng_seed)
}

pub fn simulate_pa(
    params: &ModelParams,
    steps: usize,
    seed: Option<TemporalHypergraph>,
    rng_seed: u64,
) -> Result<Simulation> {
    simulate(Model::Pa, params, steps, seed, rng_seed)
}
