//! Additive sketches of dense vectors.
//!
//! A [`SketchLayout`] holds `D` independent partitionings of the input
//! space, each made of `b` random hyperplanes. A vector's bucket in a
//! partitioning is the bit pattern of the signs of its projections, so the
//! `W = 2^b` buckets of one partitioning are LSH cells. A set of items is
//! summarized by adding each item's weight into its `D` cells; the sketch
//! of a union is the sum of the sketches. Item scores are read back from
//! the cells an item hashes to, either with the Count-Min minimum or with a
//! geometric mean (mean of logs).

pub(crate) mod io;

use std::collections::HashSet;

use thiserror::Error;

use crate::codec::FormatError;
use crate::hashing::{counter_gaussian, stream, stream_key};

pub use self::io::{
    read_item_codes, read_sketch, read_user_sketches, write_item_codes, write_sketch,
    write_user_sketches, ItemCodes,
};

/// Floor added inside logarithms.
pub const LOG_EPSILON: f64 = 1e-9;
/// Largest supported number of hyperplanes per partitioning.
pub const MAX_BITS: u32 = 24;

pub const DEFAULT_DEPTH: usize = 8;
pub const DEFAULT_BITS: u32 = 7;

#[derive(Debug, Error)]
pub enum SketchError {
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
    #[error("vector has {found} entries, layout expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error("operation needs a {expected} sketch")]
    KindMismatch { expected: &'static str },
    #[error("depth row {0} sums to zero and cannot be normalized")]
    DegenerateRow(usize),
    #[error("duplicate modality tag {0:?}")]
    DuplicateTag(String),
    #[error("{items} code sets but {weights} weights")]
    LengthMismatch { items: usize, weights: usize },
    #[error("weight must be finite and positive, got {0}")]
    InvalidWeight(f64),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Format(#[from] FormatError),
}

pub type Result<T> = std::result::Result<T, SketchError>;

/// The parameters that fully determine a layout's hyperplanes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LayoutKey {
    pub depth: usize,
    pub bits: u32,
    pub input_dim: usize,
    pub seed: u64,
}

impl LayoutKey {
    pub fn width(&self) -> usize {
        1usize << self.bits
    }

    pub fn cells(&self) -> usize {
        self.depth * self.width()
    }
}

/// `D * b` hyperplane normals of length `input_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchLayout {
    key: LayoutKey,
    planes: Vec<f64>,
}

fn check_shape(depth: usize, bits: u32, input_dim: usize) -> Result<()> {
    if depth == 0 || bits == 0 || input_dim == 0 {
        return Err(SketchError::InvalidLayout(format!(
            "depth, bits and input_dim must be positive (got D={depth}, b={bits}, dim={input_dim})"
        )));
    }
    if bits > MAX_BITS {
        return Err(SketchError::InvalidLayout(format!(
            "bits must be <= {MAX_BITS}, got {bits}"
        )));
    }
    Ok(())
}

/// Samples Gaussian hyperplanes from the `(seed, partition, plane, coordinate)`
/// counter stream.
pub fn make_layout(depth: usize, bits: u32, input_dim: usize, seed: u64) -> Result<SketchLayout> {
    check_shape(depth, bits, input_dim)?;
    let key = stream_key(seed, stream::HYPERPLANES);
    let n = depth * bits as usize * input_dim;
    let planes = (0..n as u64).map(|i| counter_gaussian(key, i)).collect();
    Ok(SketchLayout {
        key: LayoutKey {
            depth,
            bits,
            input_dim,
            seed,
        },
        planes,
    })
}

impl SketchLayout {
    pub fn from_key(key: LayoutKey) -> Result<Self> {
        make_layout(key.depth, key.bits, key.input_dim, key.seed)
    }

    /// Layout with caller-supplied hyperplanes, laid out partition-major then
    /// plane-major. `seed` only tags the layout for compatibility checks.
    pub fn from_hyperplanes(
        depth: usize,
        bits: u32,
        input_dim: usize,
        seed: u64,
        planes: Vec<f64>,
    ) -> Result<Self> {
        check_shape(depth, bits, input_dim)?;
        if planes.len() != depth * bits as usize * input_dim {
            return Err(SketchError::InvalidLayout(format!(
                "expected {} hyperplane coordinates, got {}",
                depth * bits as usize * input_dim,
                planes.len()
            )));
        }
        Ok(Self {
            key: LayoutKey {
                depth,
                bits,
                input_dim,
                seed,
            },
            planes,
        })
    }

    pub fn key(&self) -> LayoutKey {
        self.key
    }

    pub fn depth(&self) -> usize {
        self.key.depth
    }

    pub fn bits(&self) -> u32 {
        self.key.bits
    }

    pub fn width(&self) -> usize {
        self.key.width()
    }

    pub fn input_dim(&self) -> usize {
        self.key.input_dim
    }

    pub fn hyperplane(&self, partition: usize, plane: usize) -> &[f64] {
        let d = self.key.input_dim;
        let start = (partition * self.key.bits as usize + plane) * d;
        &self.planes[start..start + d]
    }

    /// Sign-LSH code of `v`: the first hyperplane of each partitioning is the
    /// most significant bit; a zero projection counts as a 1 bit.
    pub fn encode(&self, v: &[f64]) -> Result<CodeSet> {
        if v.len() != self.key.input_dim {
            return Err(SketchError::DimensionMismatch {
                expected: self.key.input_dim,
                found: v.len(),
            });
        }
        let bits = self.key.bits as usize;
        let buckets = (0..self.key.depth)
            .map(|p| {
                (0..bits).fold(0u32, |acc, i| {
                    let dot: f64 = self
                        .hyperplane(p, i)
                        .iter()
                        .zip(v)
                        .map(|(h, x)| h * x)
                        .sum();
                    (acc << 1) | u32::from(dot >= 0.0)
                })
            })
            .collect();
        Ok(CodeSet(buckets))
    }
}

/// One bucket index per partitioning.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CodeSet(Vec<u32>);

impl CodeSet {
    pub fn new(buckets: Vec<u32>) -> Self {
        Self(buckets)
    }

    pub fn buckets(&self) -> &[u32] {
        &self.0
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    /// Number of partitionings in which two code sets share a bucket.
    pub fn shared_buckets(&self, other: &CodeSet) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a == b).count()
    }

    fn check(&self, key: &LayoutKey) -> Result<()> {
        if self.0.len() != key.depth {
            return Err(SketchError::LayoutMismatch(format!(
                "code set has depth {}, sketch has depth {}",
                self.0.len(),
                key.depth
            )));
        }
        if let Some(b) = self.0.iter().find(|&&b| b as usize >= key.width()) {
            return Err(SketchError::LayoutMismatch(format!(
                "bucket {b} outside width {}",
                key.width()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SketchKind {
    Counts,
    Probabilities,
}

/// `D x W` non-negative cells, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Sketch {
    key: LayoutKey,
    kind: SketchKind,
    cells: Vec<f64>,
}

impl Sketch {
    pub fn zeros(key: LayoutKey) -> Self {
        Self {
            key,
            kind: SketchKind::Counts,
            cells: vec![0.0; key.cells()],
        }
    }

    /// Wraps raw cells; probability sketches must have rows summing to 1.
    pub fn from_cells(key: LayoutKey, kind: SketchKind, cells: Vec<f64>) -> Result<Self> {
        if cells.len() != key.cells() {
            return Err(SketchError::LayoutMismatch(format!(
                "{} cells for a {}x{} sketch",
                cells.len(),
                key.depth,
                key.width()
            )));
        }
        if cells.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(SketchError::InvalidLayout(
                "cells must be finite and non-negative".into(),
            ));
        }
        let s = Self { key, kind, cells };
        if kind == SketchKind::Probabilities {
            for p in 0..key.depth {
                let sum: f64 = s.row(p).iter().sum();
                if (sum - 1.0).abs() > 1e-6 {
                    return Err(SketchError::InvalidLayout(format!(
                        "probability row {p} sums to {sum}"
                    )));
                }
            }
        }
        Ok(s)
    }

    pub(crate) fn from_cells_unchecked(key: LayoutKey, kind: SketchKind, cells: Vec<f64>) -> Self {
        Self { key, kind, cells }
    }

    pub fn key(&self) -> LayoutKey {
        self.key
    }

    pub fn kind(&self) -> SketchKind {
        self.kind
    }

    pub fn depth(&self) -> usize {
        self.key.depth
    }

    pub fn width(&self) -> usize {
        self.key.width()
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn into_cells(self) -> Vec<f64> {
        self.cells
    }

    pub fn row(&self, p: usize) -> &[f64] {
        let w = self.width();
        &self.cells[p * w..(p + 1) * w]
    }

    pub fn cell(&self, p: usize, bucket: usize) -> f64 {
        self.cells[p * self.width() + bucket]
    }

    /// Adds `weight` to the item's cell in every partitioning.
    pub fn insert(&mut self, codes: &CodeSet, weight: f64) -> Result<()> {
        if self.kind != SketchKind::Counts {
            return Err(SketchError::KindMismatch { expected: "counts" });
        }
        if !(weight.is_finite() && weight > 0.0) {
            return Err(SketchError::InvalidWeight(weight));
        }
        codes.check(&self.key)?;
        let w = self.width();
        for (p, &b) in codes.buckets().iter().enumerate() {
            self.cells[p * w + b as usize] += weight;
        }
        Ok(())
    }

    /// The item's cell values, one per partitioning.
    pub fn selected_cells<'a>(
        &'a self,
        codes: &'a CodeSet,
    ) -> Result<impl Iterator<Item = f64> + 'a> {
        codes.check(&self.key)?;
        let w = self.width();
        Ok(codes
            .buckets()
            .iter()
            .enumerate()
            .map(move |(p, &b)| self.cells[p * w + b as usize]))
    }
}

/// Sketch of a weighted item multiset.
pub fn sketch_of_items(
    codes: &[CodeSet],
    weights: &[f64],
    layout: &SketchLayout,
) -> Result<Sketch> {
    if codes.len() != weights.len() {
        return Err(SketchError::LengthMismatch {
            items: codes.len(),
            weights: weights.len(),
        });
    }
    let mut s = Sketch::zeros(layout.key());
    for (c, &w) in codes.iter().zip(weights) {
        s.insert(c, w)?;
    }
    Ok(s)
}

/// Elementwise sum of two count sketches over the same layout.
pub fn sketch_add(a: &Sketch, b: &Sketch) -> Result<Sketch> {
    if a.kind != SketchKind::Counts || b.kind != SketchKind::Counts {
        return Err(SketchError::KindMismatch { expected: "counts" });
    }
    if a.key != b.key {
        return Err(SketchError::LayoutMismatch(format!(
            "{:?} vs {:?}",
            a.key, b.key
        )));
    }
    let cells = a.cells.iter().zip(&b.cells).map(|(x, y)| x + y).collect();
    Ok(Sketch {
        key: a.key,
        kind: SketchKind::Counts,
        cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Readout {
    /// Count-Min: minimum over partitionings; never underestimates.
    Min,
    /// `exp(mean_p ln(cell_p + 1e-9))`.
    GeoMean,
}

pub fn readout(s: &Sketch, codes: &CodeSet, mode: Readout) -> Result<f64> {
    let cells = s.selected_cells(codes)?;
    Ok(match mode {
        Readout::Min => cells.fold(f64::INFINITY, f64::min),
        Readout::GeoMean => {
            let d = s.depth() as f64;
            (cells.map(|c| (c + LOG_EPSILON).ln()).sum::<f64>() / d).exp()
        }
    })
}

/// Divides each depth row of a count sketch by its sum.
pub fn normalize_rows(s: &Sketch) -> Result<Sketch> {
    if s.kind != SketchKind::Counts {
        return Err(SketchError::KindMismatch { expected: "counts" });
    }
    let w = s.width();
    let mut cells = s.cells.clone();
    for (p, row) in cells.chunks_exact_mut(w).enumerate() {
        let sum: f64 = row.iter().sum();
        if sum <= 0.0 {
            return Err(SketchError::DegenerateRow(p));
        }
        row.iter_mut().for_each(|c| *c /= sum);
    }
    Ok(Sketch {
        key: s.key,
        kind: SketchKind::Probabilities,
        cells,
    })
}

/// Ordered, tagged list of sketches (one per modality or view).
#[derive(Debug, Clone, PartialEq)]
pub struct ConcatSketch {
    parts: Vec<(String, Sketch)>,
}

pub fn sketch_concat(parts: Vec<(String, Sketch)>) -> Result<ConcatSketch> {
    let mut seen = HashSet::new();
    for (tag, _) in &parts {
        if !seen.insert(tag.as_str()) {
            return Err(SketchError::DuplicateTag(tag.clone()));
        }
    }
    Ok(ConcatSketch { parts })
}

impl ConcatSketch {
    pub fn parts(&self) -> &[(String, Sketch)] {
        &self.parts
    }

    pub fn flat_len(&self) -> usize {
        self.parts.iter().map(|(_, s)| s.cells.len()).sum()
    }

    /// Row-major cells of every part, in declared order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.flat_len());
        for (_, s) in &self.parts {
            out.extend_from_slice(&s.cells);
        }
        out
    }
}
