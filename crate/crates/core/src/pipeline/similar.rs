use std::collections::HashMap;

use super::{PipelineError, Result};
use crate::embedding::NodeEmbeddings;
use crate::iql::{Bitset, CandidateSet};

/// Item vectors for cosine search. Rows can be aligned to an external id
/// space (such as catalog positions) with some rows left empty.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityIndex {
    labels: Vec<String>,
    positions: HashMap<String, u32>,
    dim: usize,
    vectors: Vec<f64>,
    norms: Vec<f64>,
    present: Bitset,
}

impl SimilarityIndex {
    /// Every non-virtual node, in node-id order.
    pub fn from_embeddings(emb: &NodeEmbeddings) -> Self {
        let labels: Vec<String> = emb
            .index
            .iter()
            .filter(|(_, _, v)| !v)
            .map(|(_, l, _)| l.as_str().to_string())
            .collect();
        Self::aligned(emb, &labels)
    }

    /// One row per entry of `ids`; ids without an embedding get no vector.
    pub fn aligned(emb: &NodeEmbeddings, ids: &[String]) -> Self {
        let dim = emb.matrix.dim();
        let mut vectors = vec![0.0; ids.len() * dim];
        let mut present = Bitset::new(ids.len());
        for (i, id) in ids.iter().enumerate() {
            let Some(node) = emb.index.id(id).filter(|&n| !emb.index.is_virtual(n)) else {
                continue;
            };
            vectors[i * dim..(i + 1) * dim].copy_from_slice(emb.matrix.row(node as usize));
            present.set(i, true);
        }
        let norms = vectors
            .chunks_exact(dim.max(1))
            .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect();
        let positions = ids
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as u32))
            .collect();
        Self {
            labels: ids.to_vec(),
            positions,
            dim,
            vectors,
            norms,
            present,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn position(&self, label: &str) -> Option<u32> {
        self.positions.get(label).copied()
    }

    /// Rows that carry a vector.
    pub fn present(&self) -> &Bitset {
        &self.present
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    fn cosine(&self, a: usize, b: usize) -> f64 {
        let dot: f64 = self
            .row(a)
            .iter()
            .zip(self.row(b))
            .map(|(x, y)| x * y)
            .sum();
        let (na, nb) = (self.norms[a], self.norms[b]);
        if na == 0.0 || nb == 0.0 {
            0.0
        } else {
            dot / (na * nb)
        }
    }

    /// Top `k` rows by cosine similarity to row `query`, excluding `query`
    /// itself and rows outside `filter`; ties by ascending row.
    pub fn similar(
        &self,
        query: u32,
        k: usize,
        filter: Option<&CandidateSet>,
    ) -> Result<Vec<(u32, f64)>> {
        let q = query as usize;
        if !self.present.get(q) {
            return Err(PipelineError::UnknownItem(
                self.labels
                    .get(q)
                    .cloned()
                    .unwrap_or_else(|| format!("#{q}")),
            ));
        }
        let scored: Vec<(u32, f64)> = self
            .present
            .iter_ones()
            .filter(|&i| i != q && filter.is_none_or(|f| f.contains(i)))
            .map(|i| (i as u32, self.cosine(q, i)))
            .collect();
        Ok(top_k(scored, k))
    }
}

/// The `k` best entries by descending score, ties by ascending id.
pub fn top_k(mut scored: Vec<(u32, f64)>, k: usize) -> Vec<(u32, f64)> {
    let order = |a: &(u32, f64), b: &(u32, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
    if k == 0 {
        return Vec::new();
    }
    if scored.len() > k {
        scored.select_nth_unstable_by(k - 1, order);
        scored.truncate(k);
    }
    scored.sort_by(order);
    scored
}

/// Cosine neighbours of `item` by label.
pub fn similar_items(
    item: &str,
    index: &SimilarityIndex,
    k: usize,
    filter: Option<&CandidateSet>,
) -> Result<Vec<(String, f64)>> {
    let q = index
        .position(item)
        .ok_or_else(|| PipelineError::UnknownItem(item.to_string()))?;
    Ok(index
        .similar(q, k, filter)?
        .into_iter()
        .map(|(i, s)| (index.labels[i as usize].clone(), s))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{cosine, EmbeddingMatrix};
    use crate::graph::{NodeIndex, NodeLabel};
    use crate::hashing::CounterRng;

    fn embeddings(rows: &[Vec<f64>]) -> NodeEmbeddings {
        let mut index = NodeIndex::new();
        for i in 0..rows.len() {
            index.insert(&NodeLabel::new(format!("v{i}")).unwrap());
        }
        let dim = rows[0].len();
        NodeEmbeddings {
            index,
            matrix: EmbeddingMatrix::from_row_major(rows.len(), dim, rows.concat()).unwrap(),
        }
    }

    #[test]
    fn two_items() {
        let idx = SimilarityIndex::from_embeddings(&embeddings(&[vec![1.0, 0.0], vec![0.0, 1.0]]));
        assert_eq!(
            similar_items("v0", &idx, 1, None).unwrap(),
            [("v1".to_string(), 0.0)]
        );
        assert!(matches!(
            similar_items("nope", &idx, 1, None),
            Err(PipelineError::UnknownItem(_))
        ));
    }

    #[test]
    fn query_excluded_even_if_it_passes_filter() {
        let idx = SimilarityIndex::from_embeddings(&embeddings(&[
            vec![1.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
        ]));
        let filter = CandidateSet::from_ids(3, [0, 2]);
        assert_eq!(idx.similar(0, 5, Some(&filter)).unwrap(), [(2, 0.0)]);
        assert_eq!(idx.similar(0, 5, None).unwrap()[0], (1, 1.0));
    }

    #[test]
    fn matches_brute_force() {
        let mut r = CounterRng::new(4, 4);
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|_| {
                let v: Vec<f64> = (0..8).map(|_| r.next_symmetric()).collect();
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.iter().map(|x| x / n).collect()
            })
            .collect();
        let idx = SimilarityIndex::from_embeddings(&embeddings(&rows));
        for q in [0usize, 17, 199] {
            let mut brute: Vec<(u32, f64)> = (0..200)
                .filter(|&i| i != q)
                .map(|i| (i as u32, cosine(&rows[q], &rows[i])))
                .collect();
            brute.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            brute.truncate(10);
            assert_eq!(idx.similar(q as u32, 10, None).unwrap(), brute);
        }
    }

    #[test]
    fn aligned_rows_and_ties() {
        let emb = embeddings(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![1.0, 0.0]]);
        let ids: Vec<String> = ["v2", "missing", "v0", "v1"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let idx = SimilarityIndex::aligned(&emb, &ids);
        assert_eq!(idx.present().count_ones(), 3);
        assert_eq!(idx.similar(0, 3, None).unwrap(), [(2, 1.0), (3, 1.0)]);
        assert!(idx.similar(1, 3, None).is_err());
    }
}
