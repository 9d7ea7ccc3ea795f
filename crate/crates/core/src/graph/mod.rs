//! Interaction hypergraphs and their Markov transition matrices.
//!
//! Raw interactions arrive as a tab-separated hyperedge list, one hyperedge
//! per line. Hyperedges are turned into a row-stochastic transition matrix
//! stored as COO triplets, either by implicit clique expansion (pairs are
//! written straight into the matrix) or by explicit star expansion through
//! one virtual hub node per hyperedge.

mod io;

use std::collections::HashMap;
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use thiserror::Error;

use crate::codec::FormatError;

pub use self::io::{read_graph, write_graph};

/// Prefix of the virtual hub labels created by star expansion.
pub const STAR_PREFIX: &str = "__star::";

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("no valid hyperedges in input ({malformed} malformed lines skipped)")]
    EmptyInput { malformed: usize },
    #[error("invalid node label {0:?}: labels must be non-empty and free of tabs and newlines")]
    InvalidLabel(String),
    #[error("hyperedge needs at least 2 distinct nodes, got {0}")]
    Cardinality(usize),
    #[error("hyperedge weight must be finite and positive, got {0}")]
    InvalidWeight(f64),
    #[error("label {0:?} is not in the node index")]
    UnknownLabel(String),
    #[error("triplet ({row}, {col}) outside a {n_rows}x{n_cols} matrix")]
    OutOfBounds {
        row: u32,
        col: u32,
        n_rows: usize,
        n_cols: usize,
    },
    #[error("unknown expansion mode {0:?} (expected clique or star)")]
    UnknownMode(String),
    #[error(transparent)]
    Format(#[from] FormatError),
}

pub type Result<T> = std::result::Result<T, GraphError>;

/// Identity of a node. Optionally namespaced as `<column>::<value>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeLabel(String);

impl NodeLabel {
    pub fn new(text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        if text.is_empty() || text.contains(['\t', '\n', '\r']) {
            return Err(GraphError::InvalidLabel(text));
        }
        Ok(Self(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The `<column>` part of a namespaced label, if any.
    pub fn namespace(&self) -> Option<&str> {
        self.0.split_once("::").map(|(ns, _)| ns)
    }
}

impl fmt::Display for NodeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for NodeLabel {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl std::borrow::Borrow<str> for NodeLabel {
    fn borrow(&self) -> &str {
        &self.0
    }
}

/// An edge joining two or more distinct nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperedge {
    nodes: Vec<NodeLabel>,
    weight: f64,
}

impl Hyperedge {
    /// Repeated labels are dropped (first occurrence kept); the remaining
    /// cardinality must be at least 2.
    pub fn new(nodes: Vec<NodeLabel>, weight: f64) -> Result<Self> {
        if !(weight.is_finite() && weight > 0.0) {
            return Err(GraphError::InvalidWeight(weight));
        }
        let mut deduped: Vec<NodeLabel> = Vec::with_capacity(nodes.len());
        for n in nodes {
            if !deduped.contains(&n) {
                deduped.push(n);
            }
        }
        if deduped.len() < 2 {
            return Err(GraphError::Cardinality(deduped.len()));
        }
        Ok(Self {
            nodes: deduped,
            weight,
        })
    }

    /// Convenience constructor from string labels.
    pub fn from_labels<S: AsRef<str>>(labels: &[S], weight: f64) -> Result<Self> {
        let nodes = labels
            .iter()
            .map(|s| NodeLabel::new(s.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(nodes, weight)
    }

    pub fn nodes(&self) -> &[NodeLabel] {
        &self.nodes
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn cardinality(&self) -> usize {
        self.nodes.len()
    }

    pub fn with_weight(&self, weight: f64) -> Result<Self> {
        Self::new(self.nodes.clone(), weight)
    }
}

/// Bijection between labels and dense ids `0..N`, assigned in first-appearance order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeIndex {
    labels: Vec<NodeLabel>,
    is_virtual: Vec<bool>,
    ids: HashMap<NodeLabel, u32>,
}

impl NodeIndex {
    pub fn new() -> Self {
        Self::default()
    }

    /// Every node of `edges`, numbered in order of first appearance.
    pub fn from_edges(edges: &[Hyperedge]) -> Self {
        let mut index = Self::new();
        for n in edges.iter().flat_map(|e| e.nodes()) {
            index.insert(n);
        }
        index
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn id(&self, label: &str) -> Option<u32> {
        self.ids.get(label).copied()
    }

    pub fn label(&self, id: u32) -> &NodeLabel {
        &self.labels[id as usize]
    }

    pub fn labels(&self) -> &[NodeLabel] {
        &self.labels
    }

    pub fn is_virtual(&self, id: u32) -> bool {
        self.is_virtual[id as usize]
    }

    /// Returns the id of `label`, inserting it if new.
    pub fn insert(&mut self, label: &NodeLabel) -> u32 {
        self.insert_flagged(label, false)
    }

    /// Inserts a virtual (star hub) node; virtual nodes are dropped from exports.
    pub fn insert_virtual(&mut self, label: &NodeLabel) -> u32 {
        self.insert_flagged(label, true)
    }

    fn insert_flagged(&mut self, label: &NodeLabel, is_virtual: bool) -> u32 {
        if let Some(&id) = self.ids.get(label) {
            return id;
        }
        let id = u32::try_from(self.labels.len()).expect("node index exceeds u32 ids");
        self.labels.push(label.clone());
        self.is_virtual.push(is_virtual);
        self.ids.insert(label.clone(), id);
        id
    }

    /// Number of non-virtual nodes.
    pub fn real_len(&self) -> usize {
        self.is_virtual.iter().filter(|v| !**v).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &NodeLabel, bool)> + '_ {
        self.labels
            .iter()
            .zip(&self.is_virtual)
            .enumerate()
            .map(|(i, (l, v))| (i as u32, l, *v))
    }
}

/// How raw lines are split into hyperedges.
#[derive(Debug, Clone)]
pub struct ParseConfig {
    pub delimiter: char,
    /// When set, the last field of each line is a positive weight.
    pub weighted: bool,
}

impl Default for ParseConfig {
    fn default() -> Self {
        Self {
            delimiter: '\t',
            weighted: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParsedInteractions {
    pub edges: Vec<Hyperedge>,
    pub index: NodeIndex,
    pub malformed: usize,
}

/// Reads a line-oriented hyperedge list.
///
/// Blank lines are ignored. Lines with fewer than two distinct node fields,
/// empty fields, or an unparsable weight are skipped and counted.
pub fn parse_interactions<R: BufRead>(
    reader: R,
    config: &ParseConfig,
) -> Result<ParsedInteractions> {
    let mut edges = Vec::new();
    let mut index = NodeIndex::new();
    let mut malformed = 0usize;
    for line in reader.lines() {
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(line, config) {
            Some(edge) => {
                for n in edge.nodes() {
                    index.insert(n);
                }
                edges.push(edge);
            }
            None => malformed += 1,
        }
    }
    if edges.is_empty() {
        return Err(GraphError::EmptyInput { malformed });
    }
    Ok(ParsedInteractions {
        edges,
        index,
        malformed,
    })
}

fn parse_line(line: &str, config: &ParseConfig) -> Option<Hyperedge> {
    let mut fields: Vec<&str> = line.split(config.delimiter).collect();
    let weight = if config.weighted {
        fields.pop()?.trim().parse::<f64>().ok()?
    } else {
        1.0
    };
    let nodes = fields
        .into_iter()
        .map(NodeLabel::new)
        .collect::<Result<Vec<_>>>()
        .ok()?;
    Hyperedge::new(nodes, weight).ok()
}

/// All unordered member pairs of a hyperedge, each carrying the edge weight.
pub fn clique_expand(edge: &Hyperedge) -> Vec<(NodeLabel, NodeLabel, f64)> {
    let nodes = edge.nodes();
    let mut pairs = Vec::with_capacity(nodes.len() * (nodes.len() - 1) / 2);
    for (i, a) in nodes.iter().enumerate() {
        for b in &nodes[i + 1..] {
            pairs.push((a.clone(), b.clone(), edge.weight()));
        }
    }
    pairs
}

pub fn virtual_star_label(edge_position: usize) -> NodeLabel {
    NodeLabel(format!("{STAR_PREFIX}{edge_position}"))
}

#[derive(Debug, Clone)]
pub struct StarExpansion {
    /// Cardinality-2 edges `(member, hub)`, grouped by source hyperedge.
    pub edges: Vec<Hyperedge>,
    /// Hub label of hyperedge `i` at position `i`.
    pub virtual_labels: Vec<NodeLabel>,
}

/// Replaces hyperedge `i` by edges from each member to the hub `__star::i`.
pub fn star_expand(edges: &[Hyperedge]) -> StarExpansion {
    let mut out = Vec::with_capacity(edges.iter().map(Hyperedge::cardinality).sum());
    let mut virtual_labels = Vec::with_capacity(edges.len());
    for (i, edge) in edges.iter().enumerate() {
        let hub = virtual_star_label(i);
        for n in edge.nodes() {
            out.push(Hyperedge {
                nodes: vec![n.clone(), hub.clone()],
                weight: edge.weight(),
            });
        }
        virtual_labels.push(hub);
    }
    StarExpansion {
        edges: out,
        virtual_labels,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExpansionMode {
    #[default]
    Clique,
    Star,
}

impl FromStr for ExpansionMode {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "clique" => Ok(Self::Clique),
            "star" => Ok(Self::Star),
            _ => Err(GraphError::UnknownMode(s.to_string())),
        }
    }
}

impl fmt::Display for ExpansionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Clique => "clique",
            Self::Star => "star",
        })
    }
}

/// Row-stochastic sparse matrix in COO layout, sorted by `(row, col)`.
///
/// Rows with no entries are allowed and act as identity rows during
/// propagation.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    n_rows: usize,
    n_cols: usize,
    rows: Vec<u32>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    row_ptr: Vec<usize>,
    /// Raw weight sum of each row before normalization.
    weighted_degree: Vec<f64>,
}

impl TransitionMatrix {
    /// Aggregates duplicate `(row, col)` weights by summation and normalizes
    /// each non-empty row to sum 1.
    ///
    /// Summation order is canonical (duplicates and row entries are summed in
    /// ascending weight order), so the result depends only on the multiset of
    /// triplets, never on their input order.
    pub fn from_weighted_triplets(
        n_rows: usize,
        n_cols: usize,
        mut triplets: Vec<(u32, u32, f64)>,
    ) -> Result<Self> {
        for &(r, c, w) in &triplets {
            if r as usize >= n_rows || c as usize >= n_cols {
                return Err(GraphError::OutOfBounds {
                    row: r,
                    col: c,
                    n_rows,
                    n_cols,
                });
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(GraphError::InvalidWeight(w));
            }
        }
        // positive finite f64 order matches bit-pattern order
        triplets.sort_unstable_by_key(|&(r, c, w)| (r, c, w.to_bits()));

        let mut rows = Vec::with_capacity(triplets.len());
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        for (r, c, w) in triplets {
            if rows.last() == Some(&r) && cols.last() == Some(&c) {
                *vals.last_mut().unwrap() += w;
            } else {
                rows.push(r);
                cols.push(c);
                vals.push(w);
            }
        }

        let mut row_ptr = vec![0usize; n_rows + 1];
        for &r in &rows {
            row_ptr[r as usize + 1] += 1;
        }
        for i in 0..n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }

        let mut weighted_degree = vec![0.0; n_rows];
        let mut scratch = Vec::new();
        for r in 0..n_rows {
            let span = row_ptr[r]..row_ptr[r + 1];
            if span.is_empty() {
                continue;
            }
            scratch.clear();
            scratch.extend_from_slice(&vals[span.clone()]);
            scratch.sort_unstable_by(f64::total_cmp);
            let sum: f64 = scratch.iter().sum();
            weighted_degree[r] = sum;
            for v in &mut vals[span] {
                *v /= sum;
            }
        }

        Ok(Self {
            n_rows,
            n_cols,
            rows,
            cols,
            vals,
            row_ptr,
            weighted_degree,
        })
    }

    pub(crate) fn from_normalized_parts(
        n_rows: usize,
        n_cols: usize,
        rows: Vec<u32>,
        cols: Vec<u32>,
        vals: Vec<f64>,
        weighted_degree: Vec<f64>,
    ) -> std::result::Result<Self, String> {
        if rows.len() != cols.len() || rows.len() != vals.len() || weighted_degree.len() != n_rows {
            return Err("inconsistent triplet array lengths".into());
        }
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut prev: Option<(u32, u32)> = None;
        for (&r, &c) in rows.iter().zip(&cols) {
            if r as usize >= n_rows || c as usize >= n_cols {
                return Err(format!("triplet ({r}, {c}) out of bounds"));
            }
            if prev.is_some_and(|p| p >= (r, c)) {
                return Err("triplets not strictly sorted by (row, col)".into());
            }
            prev = Some((r, c));
            row_ptr[r as usize + 1] += 1;
        }
        for i in 0..n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            n_rows,
            n_cols,
            rows,
            cols,
            vals,
            row_ptr,
            weighted_degree,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Column ids and normalized weights of row `r`, ascending by column.
    pub fn row(&self, r: usize) -> (&[u32], &[f64]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.cols[span.clone()], &self.vals[span])
    }

    pub fn is_row_empty(&self, r: usize) -> bool {
        self.row_ptr[r] == self.row_ptr[r + 1]
    }

    pub fn weighted_degree(&self, r: usize) -> f64 {
        self.weighted_degree[r]
    }

    pub fn row_sum(&self, r: usize) -> f64 {
        self.row(r).1.iter().sum()
    }

    pub fn triplets(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        self.rows
            .iter()
            .zip(&self.cols)
            .zip(&self.vals)
            .map(|((&r, &c), &v)| (r, c, v))
    }

    pub(crate) fn raw_parts(&self) -> (&[u32], &[u32], &[f64], &[f64]) {
        (&self.rows, &self.cols, &self.vals, &self.weighted_degree)
    }

    /// Dense row-major copy; meant for small matrices and tests.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n_rows * self.n_cols];
        for (r, c, v) in self.triplets() {
            d[r as usize * self.n_cols + c as usize] = v;
        }
        d
    }
}

/// A node index together with its transition matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    pub index: NodeIndex,
    pub matrix: TransitionMatrix,
    pub mode: ExpansionMode,
}

impl Graph {
    /// `(row label, col label) -> weight`, independent of id assignment.
    pub fn labeled_weights(&self) -> HashMap<(String, String), f64> {
        self.matrix
            .triplets()
            .map(|(r, c, v)| {
                (
                    (
                        self.index.label(r).as_str().to_owned(),
                        self.index.label(c).as_str().to_owned(),
                    ),
                    v,
                )
            })
            .collect()
    }
}

/// Builds the transition matrix over `index` (extended with hub nodes in
/// star mode). Both directions of every pair are inserted.
pub fn build_transition(
    edges: &[Hyperedge],
    index: &NodeIndex,
    mode: ExpansionMode,
) -> Result<Graph> {
    if edges.is_empty() {
        return Err(GraphError::EmptyInput { malformed: 0 });
    }
    let mut index = index.clone();
    let lookup = |index: &NodeIndex, l: &NodeLabel| {
        index
            .id(l.as_str())
            .ok_or_else(|| GraphError::UnknownLabel(l.to_string()))
    };
    let mut triplets = Vec::new();
    match mode {
        ExpansionMode::Clique => {
            let pairs: usize = edges
                .iter()
                .map(|e| e.cardinality() * (e.cardinality() - 1))
                .sum();
            triplets.reserve(pairs);
            let mut ids = Vec::new();
            for edge in edges {
                ids.clear();
                for n in edge.nodes() {
                    ids.push(lookup(&index, n)?);
                }
                for (i, &a) in ids.iter().enumerate() {
                    for &b in &ids[i + 1..] {
                        triplets.push((a, b, edge.weight()));
                        triplets.push((b, a, edge.weight()));
                    }
                }
            }
        }
        ExpansionMode::Star => {
            let expansion = star_expand(edges);
            for hub in &expansion.virtual_labels {
                index.insert_virtual(hub);
            }
            triplets.reserve(expansion.edges.len() * 2);
            for edge in &expansion.edges {
                let a = lookup(&index, &edge.nodes()[0])?;
                let b = lookup(&index, &edge.nodes()[1])?;
                triplets.push((a, b, edge.weight()));
                triplets.push((b, a, edge.weight()));
            }
        }
    }
    let n = index.len();
    let matrix = TransitionMatrix::from_weighted_triplets(n, n, triplets)?;
    Ok(Graph {
        index,
        matrix,
        mode,
    })
}
