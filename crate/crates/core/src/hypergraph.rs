//! Temporal hypergraph storage, TSV ingestion and indexed queries.
//!
//! Node identifiers are dense and assigned in order of first appearance along the
//! temporal edge order, so the node set present before edge `t` is always the id
//! range `0..n` for some `n`. Several hot paths (novel-node detection, extant-node
//! counts) rely on that.

use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// One hyperedge with its position in the temporal order.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRecord {
    pub index: usize,
    pub timestamp: f64,
    /// Sorted ascending, no duplicates, never empty.
    pub nodes: Vec<NodeId>,
}

impl EdgeRecord {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.nodes.binary_search(&v).is_ok()
    }
}

/// Size of the intersection of two sorted node lists.
pub fn intersection_size(a: &[NodeId], b: &[NodeId]) -> usize {
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

/// An ordered sequence of timestamped hyperedges over a growing node set.
///
/// Multiedges are allowed. The structure is immutable once built, except through
/// the crate-internal growth path used by the simulators.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TemporalHypergraph {
    edges: Vec<EdgeRecord>,
    /// node -> index of the edge where it first appears
    first_seen: Vec<usize>,
    /// node -> sorted indices of the edges containing it
    incidence: Vec<Vec<usize>>,
    /// edge index -> number of nodes present after that edge was added
    nodes_after: Vec<usize>,
    names: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadOptions {
    /// When false, lines carry only the node list and the edge index is used as timestamp.
    pub timestamps: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self { timestamps: true }
    }
}

impl TemporalHypergraph {
    /// Builds a hypergraph from `(timestamp, labels)` records.
    ///
    /// Records are sorted stably by timestamp and labels are remapped to dense ids in
    /// order of first appearance along that order. The original labels are kept as
    /// node names.
    pub fn from_records<L, I>(records: I) -> Result<Self>
    where
        L: Eq + Hash + Clone + fmt::Display,
        I: IntoIterator<Item = (f64, Vec<L>)>,
    {
        let records: Vec<(usize, f64, Vec<L>)> = records
            .into_iter()
            .enumerate()
            .map(|(line, (ts, nodes))| (line + 1, ts, nodes))
            .collect();
        Self::build(records)
    }

    fn build<L>(mut records: Vec<(usize, f64, Vec<L>)>) -> Result<Self>
    where
        L: Eq + Hash + Clone + fmt::Display,
    {
        if records.is_empty() {
            return Err(Error::NoEdges);
        }
        for (line, ts, nodes) in &records {
            if !ts.is_finite() {
                return Err(Error::Parse { line: *line, message: format!("non-finite timestamp {ts}") });
            }
            if nodes.is_empty() {
                return Err(Error::EmptyEdge { line: *line });
            }
        }
        records.sort_by(|a, b| a.1.total_cmp(&b.1));

        let mut ids: HashMap<L, NodeId> = HashMap::new();
        let mut names = Vec::new();
        let mut graph = TemporalHypergraph::default();
        for (line, ts, labels) in records {
            let mut nodes = Vec::with_capacity(labels.len());
            for label in labels {
                let id = *ids.entry(label.clone()).or_insert_with(|| {
                    names.push(label.to_string());
                    NodeId(names.len() as u32 - 1)
                });
                nodes.push(id);
            }
            nodes.sort_unstable();
            if let Some(w) = nodes.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::DuplicateNode { line, node: names[w[0].index()].clone() });
            }
            graph.push_edge_unchecked(ts, nodes);
        }
        graph.names = Some(names);
        Ok(graph)
    }

    /// Appends an edge whose node list is sorted, duplicate-free, nonempty, and whose
    /// unseen nodes are exactly the next dense ids.
    pub(crate) fn push_edge(&mut self, timestamp: f64, nodes: Vec<NodeId>) -> Result<&EdgeRecord> {
        if nodes.is_empty() {
            return Err(Error::InvalidInput("empty edge".into()));
        }
        if nodes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("edge nodes must be sorted and distinct".into()));
        }
        let n = self.num_nodes();
        let fresh: Vec<usize> = nodes.iter().map(|v| v.index()).filter(|&v| v >= n).collect();
        if fresh.iter().enumerate().any(|(i, &v)| v != n + i) {
            return Err(Error::InvalidInput("new nodes must take the next dense ids".into()));
        }
        if let Some(names) = self.names.as_mut() {
            names.extend(fresh.iter().map(|v| v.to_string()));
        }
        self.push_edge_unchecked(timestamp, nodes);
        Ok(self.edges.last().expect("just pushed"))
    }

    fn push_edge_unchecked(&mut self, timestamp: f64, nodes: Vec<NodeId>) {
        let index = self.edges.len();
        for &v in &nodes {
            let v = v.index();
            if v >= self.incidence.len() {
                self.incidence.resize_with(v + 1, Vec::new);
                self.first_seen.resize(v + 1, index);
            }
            self.incidence[v].push(index);
        }
        self.nodes_after.push(self.incidence.len());
        self.edges.push(EdgeRecord { index, timestamp, nodes });
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.incidence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn edges(&self) -> &[EdgeRecord] {
        &self.edges
    }

    pub fn edge(&self, index: usize) -> &EdgeRecord {
        &self.edges[index]
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    pub(crate) fn clear_names(&mut self) {
        self.names = None;
    }

    /// Index of the edge in which `v` first appears.
    pub fn first_seen(&self, v: NodeId) -> Option<usize> {
        self.first_seen.get(v.index()).copied()
    }

    /// Sorted indices of all edges containing `v` (empty for unknown nodes).
    pub fn incidence(&self, v: NodeId) -> &[usize] {
        self.incidence.get(v.index()).map_or(&[], |l| l.as_slice())
    }

    /// Number of edges among `edges[0..=upto]` containing `v`.
    ///
    /// Unknown nodes have degree 0 and `upto` is clamped to the last edge.
    pub fn degree(&self, v: NodeId, upto: usize) -> usize {
        let list = self.incidence(v);
        list.partition_point(|&e| e <= upto)
    }

    /// Current degree of every node.
    pub fn degrees(&self) -> Vec<usize> {
        self.incidence.iter().map(Vec::len).collect()
    }

    /// `(n, m)` after edge `upto` has been added (clamped to the last edge).
    pub fn snapshot_counts(&self, upto: usize) -> (usize, usize) {
        if self.edges.is_empty() {
            return (0, 0);
        }
        let upto = upto.min(self.edges.len() - 1);
        (self.nodes_after[upto], upto + 1)
    }

    /// Number of nodes present strictly before edge `t` is added, i.e. `|N(t)|`.
    pub fn nodes_before(&self, t: usize) -> usize {
        match t {
            0 => 0,
            t => self.nodes_after[(t - 1).min(self.nodes_after.len() - 1)],
        }
    }

    /// Edges with index `< upto` sharing at least one node with `nodes`, sorted and deduplicated.
    pub fn candidate_sources(&self, nodes: &[NodeId], upto: usize) -> Vec<usize> {
        let mut out: Vec<usize> = Vec::new();
        for &v in nodes {
            let list = self.incidence(v);
            let end = list.partition_point(|&e| e < upto);
            out.extend_from_slice(&list[..end]);
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Hypergraph made of the edges at `indices`, in the given order, with nodes
    /// relabeled by first appearance. Returns the relabeled graph and the map from old
    /// node ids to new ones.
    pub fn reordered(&self, indices: &[usize]) -> (TemporalHypergraph, HashMap<NodeId, NodeId>) {
        let mut map: HashMap<NodeId, NodeId> = HashMap::new();
        let mut names = Vec::new();
        let mut graph = TemporalHypergraph::default();
        for (pos, &i) in indices.iter().enumerate() {
            let mut nodes: Vec<NodeId> = self.edges[i]
                .nodes
                .iter()
                .map(|&v| {
                    let next = NodeId(map.len() as u32);
                    *map.entry(v).or_insert_with(|| {
                        names.push(self.names.as_ref().map_or_else(|| v.to_string(), |n| n[v.index()].clone()));
                        next
                    })
                })
                .collect();
            nodes.sort_unstable();
            graph.push_edge_unchecked(pos as f64, nodes);
        }
        graph.names = Some(names);
        (graph, map)
    }

    /// Prefix of the first `m` edges.
    pub fn prefix(&self, m: usize) -> TemporalHypergraph {
        let m = m.min(self.edges.len());
        let mut graph = TemporalHypergraph::default();
        for e in &self.edges[..m] {
            graph.push_edge_unchecked(e.timestamp, e.nodes.clone());
        }
        graph.names = self.names.as_ref().map(|n| n[..graph.num_nodes()].to_vec());
        graph
    }
}

/// Reads the canonical TSV format: `<timestamp>\t<node>,<node>,...` per line,
/// `#` comment lines and blank lines ignored.
pub fn load_tsv<R: BufRead>(reader: R, options: LoadOptions) -> Result<TemporalHypergraph> {
    let mut records: Vec<(usize, f64, Vec<String>)> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (timestamp, node_field) = if options.timestamps {
            let (ts, rest) = line.split_once('\t').ok_or_else(|| Error::Parse {
                line: line_no,
                message: "expected `<timestamp>\\t<node>,<node>,...`".into(),
            })?;
            let ts: f64 = ts.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("invalid timestamp `{ts}`"),
            })?;
            (ts, rest)
        } else {
            (records.len() as f64, line)
        };
        if node_field.is_empty() {
            return Err(Error::EmptyEdge { line: line_no });
        }
        if node_field.contains('\t') {
            return Err(Error::Parse { line: line_no, message: "unexpected extra field".into() });
        }
        let mut nodes = Vec::new();
        for token in node_field.split(',') {
            if token.is_empty() {
                return Err(Error::Parse { line: line_no, message: "empty node token".into() });
            }
            nodes.push(token.to_string());
        }
        let mut seen = nodes.clone();
        seen.sort_unstable();
        if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateNode { line: line_no, node: w[0].clone() });
        }
        records.push((line_no, timestamp, nodes));
    }
    TemporalHypergraph::build(records)
}

/// Writes the canonical TSV format using dense node ids.
pub fn write_tsv<W: Write>(h: &TemporalHypergraph, mut writer: W) -> Result<()> {
    let mut line = String::new();
    for e in h.edges() {
        line.clear();
        use std::fmt::Write as _;
        let _ = write!(line, "{}\t", e.timestamp);
        for (i, v) in e.nodes.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            let _ = write!(line, "{v}");
        }
        line.push('\n');
        writer.write_all(line.as_bytes())?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes the `.names` sidecar: line `i` holds the original label of node `i`.
pub fn write_names<W: Write>(h: &TemporalHypergraph, mut writer: W) -> Result<()> {
    for v in 0..h.num_nodes() {
        match h.names() {
            Some(names) => writeln!(writer, "{}", names[v])?,
            None => writeln!(writer, "{v}")?,
        }
    }
    writer.flush()?;
    Ok(())
}
