//! Deterministic node embeddings by iterated transition-matrix propagation.
//!
//! `Q` starts as hash-derived uniform noise in `(-1, 1)` (one independent
//! hash per coordinate, keyed by the node label), then `Q <- M * Q`
//! followed by row-wise L2 normalization is applied a fixed number of
//! times. Work is split across embedding dimensions; every per-element sum
//! runs in a fixed order, so the output is bit-identical for any number of
//! workers.

mod io;

use std::collections::HashMap;
use std::io::BufRead;

use rayon::prelude::*;
use thiserror::Error;

use crate::codec::FormatError;
use crate::graph::{Graph, GraphError, NodeIndex, NodeLabel, TransitionMatrix};
use crate::hashing::{fnv1a64, hash_init_from_label_hash};

pub use self::io::{export_binary, export_text, import_binary, import_text};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("invalid embedding config: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: matrix has {m_cols} columns but embedding has {q_rows} rows")]
    DimensionMismatch { m_cols: usize, q_rows: usize },
    #[error("link references unknown base node {0:?}")]
    UnknownBaseLabel(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

pub type Result<T> = std::result::Result<T, EmbedError>;

pub const DEFAULT_DIM: usize = 1024;
pub const DEFAULT_ITERATIONS: usize = 4;
pub const MAX_ITERATIONS: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbedConfig {
    pub dim: usize,
    pub iterations: usize,
    pub seed: u64,
    /// Worker threads for propagation; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        Self {
            dim: DEFAULT_DIM,
            iterations: DEFAULT_ITERATIONS,
            seed: 0,
            workers: None,
        }
    }
}

impl EmbedConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(EmbedError::InvalidConfig("dim must be >= 1".into()));
        }
        if !(1..=MAX_ITERATIONS).contains(&self.iterations) {
            return Err(EmbedError::InvalidConfig(format!(
                "iterations must be in 1..={MAX_ITERATIONS}, got {}",
                self.iterations
            )));
        }
        if self.workers == Some(0) {
            return Err(EmbedError::InvalidConfig("workers must be >= 1".into()));
        }
        Ok(())
    }
}

/// Dense row-major `n_rows x dim` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    n_rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn zeros(n_rows: usize, dim: usize) -> Self {
        Self {
            n_rows,
            dim,
            data: vec![0.0; n_rows * dim],
        }
    }

    pub fn from_row_major(n_rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() != n_rows * dim {
            return Err(EmbedError::InvalidConfig(format!(
                "{} values do not form a {n_rows}x{dim} matrix",
                data.len()
            )));
        }
        Ok(Self { n_rows, dim, data })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    /// Bitwise equality, distinguishing `-0.0` from `0.0`.
    pub fn bit_eq(&self, other: &Self) -> bool {
        self.n_rows == other.n_rows
            && self.dim == other.dim
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }

    fn to_column_major(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.data.len()];
        for (r, row) in self.rows().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                out[c * self.n_rows + r] = v;
            }
        }
        out
    }

    fn from_column_major(n_rows: usize, dim: usize, cols: &[f64]) -> Self {
        let mut data = vec![0.0; n_rows * dim];
        for (c, col) in cols.chunks_exact(n_rows.max(1)).enumerate().take(dim) {
            for (r, &v) in col.iter().enumerate() {
                data[r * dim + c] = v;
            }
        }
        Self { n_rows, dim, data }
    }
}

/// Embedding rows keyed by node label.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeEmbeddings {
    pub index: NodeIndex,
    pub matrix: EmbeddingMatrix,
}

impl NodeEmbeddings {
    pub fn vector(&self, label: &str) -> Option<&[f64]> {
        self.index.id(label).map(|id| self.matrix.row(id as usize))
    }

    /// Drops virtual (star hub) rows.
    pub fn without_virtual(&self) -> NodeEmbeddings {
        let mut index = NodeIndex::new();
        let mut data = Vec::with_capacity(self.matrix.data.len());
        for (id, label, is_virtual) in self.index.iter() {
            if !is_virtual {
                index.insert(label);
                data.extend_from_slice(self.matrix.row(id as usize));
            }
        }
        let matrix = EmbeddingMatrix {
            n_rows: index.len(),
            dim: self.matrix.dim,
            data,
        };
        NodeEmbeddings { index, matrix }
    }
}

/// `Q[i][j] = hash_init_value(label(i), j, seed)`; rows are not normalized.
pub fn init_matrix(index: &NodeIndex, config: &EmbedConfig) -> EmbeddingMatrix {
    let dim = config.dim;
    let mut data = vec![0.0; index.len() * dim];
    data.par_chunks_mut(dim.max(1))
        .zip(index.labels().par_iter())
        .for_each(|(row, label)| {
            let h = fnv1a64(label.as_str().as_bytes());
            for (j, v) in row.iter_mut().enumerate() {
                *v = hash_init_from_label_hash(h, j as u64, config.seed);
            }
        });
    EmbeddingMatrix {
        n_rows: index.len(),
        dim,
        data,
    }
}

fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| EmbedError::ThreadPool(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// One `M * Q` product over column-major buffers. Empty rows copy the
/// input row (square matrices only).
fn multiply_columns(m: &TransitionMatrix, input: &[f64], output: &mut [f64]) {
    let n_in = m.n_cols();
    let n_out = m.n_rows();
    output
        .par_chunks_mut(n_out)
        .zip(input.par_chunks(n_in))
        .for_each(|(out_col, in_col)| {
            for (r, out) in out_col.iter_mut().enumerate() {
                let (cols, vals) = m.row(r);
                *out = if cols.is_empty() {
                    in_col[r]
                } else {
                    let mut acc = 0.0;
                    for (&c, &v) in cols.iter().zip(vals) {
                        acc += v * in_col[c as usize];
                    }
                    acc
                };
            }
        });
}

const NORM_BLOCK: usize = 2048;

/// Row-wise L2 normalization of a column-major buffer. Squares are summed
/// over dimensions in ascending order; zero rows stay zero.
fn normalize_columns(buf: &mut [f64], n_rows: usize, dim: usize) {
    if n_rows == 0 {
        return;
    }
    let mut norms = vec![0.0f64; n_rows];
    {
        let buf: &[f64] = buf;
        norms
            .par_chunks_mut(NORM_BLOCK)
            .enumerate()
            .for_each(|(b, block)| {
                let r0 = b * NORM_BLOCK;
                for c in 0..dim {
                    let col = &buf[c * n_rows + r0..c * n_rows + r0 + block.len()];
                    for (acc, &v) in block.iter_mut().zip(col) {
                        *acc += v * v;
                    }
                }
                for acc in block.iter_mut() {
                    *acc = acc.sqrt();
                }
            });
    }
    buf.par_chunks_mut(n_rows).for_each(|col| {
        for (v, &n) in col.iter_mut().zip(&norms) {
            if n > 0.0 {
                *v /= n;
            }
        }
    });
}

/// Applies `Q <- normalize_rows(M * Q)` exactly `iterations` times.
pub fn propagate(
    m: &TransitionMatrix,
    q: &EmbeddingMatrix,
    iterations: usize,
    workers: Option<usize>,
) -> Result<EmbeddingMatrix> {
    if m.n_cols() != q.n_rows() || m.n_rows() != m.n_cols() {
        return Err(EmbedError::DimensionMismatch {
            m_cols: m.n_cols(),
            q_rows: q.n_rows(),
        });
    }
    if iterations == 0 {
        return Err(EmbedError::InvalidConfig("iterations must be >= 1".into()));
    }
    let n = q.n_rows();
    let dim = q.dim();
    with_workers(workers, || {
        let mut cur = q.to_column_major();
        let mut next = vec![0.0; cur.len()];
        if n > 0 {
            for _ in 0..iterations {
                multiply_columns(m, &cur, &mut next);
                normalize_columns(&mut next, n, dim);
                std::mem::swap(&mut cur, &mut next);
            }
        }
        EmbeddingMatrix::from_column_major(n, dim, &cur)
    })
}

/// Hash initialization followed by propagation over the graph.
pub fn embed(graph: &Graph, config: &EmbedConfig) -> Result<NodeEmbeddings> {
    config.validate()?;
    let q0 = init_matrix(&graph.index, config);
    let matrix = propagate(&graph.matrix, &q0, config.iterations, config.workers)?;
    Ok(NodeEmbeddings {
        index: graph.index.clone(),
        matrix,
    })
}

/// Row-stochastic links from new nodes (rows) to existing nodes (columns).
#[derive(Debug, Clone)]
pub struct InductiveLinks {
    labels: Vec<NodeLabel>,
    matrix: TransitionMatrix,
}

impl InductiveLinks {
    /// Builds links from `(new label, existing label, weight)` triples.
    /// Each new node's weights are normalized to sum 1.
    pub fn from_triples<I, S1, S2>(triples: I, base: &NodeIndex) -> Result<Self>
    where
        I: IntoIterator<Item = (S1, S2, f64)>,
        S1: AsRef<str>,
        S2: AsRef<str>,
    {
        let mut labels = Vec::new();
        let mut rows: HashMap<String, u32> = HashMap::new();
        let mut triplets = Vec::new();
        for (new, existing, w) in triples {
            let col = base
                .id(existing.as_ref())
                .ok_or_else(|| EmbedError::UnknownBaseLabel(existing.as_ref().to_string()))?;
            let row = match rows.get(new.as_ref()) {
                Some(&r) => r,
                None => {
                    let label = NodeLabel::new(new.as_ref())?;
                    let r = labels.len() as u32;
                    rows.insert(label.as_str().to_owned(), r);
                    labels.push(label);
                    r
                }
            };
            triplets.push((row, col, w));
        }
        let matrix = TransitionMatrix::from_weighted_triplets(labels.len(), base.len(), triplets)?;
        Ok(Self { labels, matrix })
    }

    /// Parses `new<TAB>existing[<TAB>weight]` lines.
    pub fn parse<R: BufRead>(reader: R, base: &NodeIndex) -> Result<Self> {
        let mut triples = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let weight = match fields.len() {
                2 => 1.0,
                3 => fields[2]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| EmbedError::Parse {
                        line: i + 1,
                        msg: format!("bad weight {:?}: {e}", fields[2]),
                    })?,
                n => {
                    return Err(EmbedError::Parse {
                        line: i + 1,
                        msg: format!("expected 2 or 3 fields, got {n}"),
                    })
                }
            };
            triples.push((fields[0].to_string(), fields[1].to_string(), weight));
        }
        Self::from_triples(triples, base)
    }

    pub fn labels(&self) -> &[NodeLabel] {
        &self.labels
    }

    pub fn matrix(&self) -> &TransitionMatrix {
        &self.matrix
    }
}

/// `normalize_rows(M' * Q)` for new nodes; `q` is left untouched.
pub fn embed_inductive(links: &InductiveLinks, q: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
    let m = &links.matrix;
    if m.n_cols() != q.n_rows() {
        return Err(EmbedError::DimensionMismatch {
            m_cols: m.n_cols(),
            q_rows: q.n_rows(),
        });
    }
    let dim = q.dim();
    let mut data = vec![0.0; m.n_rows() * dim];
    data.par_chunks_mut(dim).enumerate().for_each(|(r, out)| {
        let (cols, vals) = m.row(r);
        for (&c, &v) in cols.iter().zip(vals) {
            for (o, &x) in out.iter_mut().zip(q.row(c as usize)) {
                *o += v * x;
            }
        }
        let norm = out.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            out.iter_mut().for_each(|x| *x /= norm);
        }
    });
    Ok(EmbeddingMatrix {
        n_rows: m.n_rows(),
        dim,
        data,
    })
}

/// Inductive embeddings keyed by the new labels.
pub fn embed_inductive_labeled(
    links: &InductiveLinks,
    base: &NodeEmbeddings,
) -> Result<NodeEmbeddings> {
    let matrix = embed_inductive(links, &base.matrix)?;
    let mut index = NodeIndex::new();
    for l in &links.labels {
        index.insert(l);
    }
    Ok(NodeEmbeddings { index, matrix })
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}
