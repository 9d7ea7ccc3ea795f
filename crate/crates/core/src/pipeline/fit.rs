use super::ranker::ScorerRanker;
use super::sessions::{session_examples, ExampleMode, ProfileBuilder};
use super::Result;
use crate::embedding::{embed, EmbedConfig, NodeEmbeddings};
use crate::graph::{build_transition, ExpansionMode, Hyperedge, NodeIndex};
use crate::scorer::{train, MlpConfig, TrainReport};
use crate::sketch::{make_layout, ItemCodes};
use crate::synth::Session;

/// Settings for training a session scorer from raw sessions.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub mode: ExpansionMode,
    pub embed: EmbedConfig,
    pub depth: usize,
    pub bits: u32,
    pub layout_seed: u64,
    pub recent: usize,
    pub examples: ExampleMode,
    pub n_layers: usize,
    pub hidden_size: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            mode: ExpansionMode::Clique,
            embed: EmbedConfig {
                dim: 64,
                ..EmbedConfig::default()
            },
            depth: 4,
            bits: 6,
            layout_seed: 0,
            recent: 1,
            examples: ExampleMode::AllPrefixes,
            n_layers: 2,
            hidden_size: 128,
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FittedScorer {
    pub embeddings: NodeEmbeddings,
    pub codes: ItemCodes,
    pub config: MlpConfig,
    pub report: TrainReport,
    pub recent: usize,
}

impl FittedScorer {
    pub fn ranker(&self) -> Result<ScorerRanker<'_>> {
        ScorerRanker::new(&self.report.params, &self.codes, self.recent)
    }
}

/// One hyperedge per session with at least two distinct items.
pub fn session_hyperedges(sessions: &[Session]) -> Vec<Hyperedge> {
    sessions
        .iter()
        .filter_map(|s| Hyperedge::from_labels(&s.items, 1.0).ok())
        .collect()
}

/// Sessions to graph, embeddings, item codes and a trained scorer.
pub fn fit_sessions(sessions: &[Session], config: &FitConfig) -> Result<FittedScorer> {
    let edges = session_hyperedges(sessions);
    let graph = build_transition(&edges, &NodeIndex::from_edges(&edges), config.mode)?;
    let embeddings = embed(&graph, &config.embed)?.without_virtual();
    let layout = make_layout(
        config.depth,
        config.bits,
        embeddings.matrix.dim(),
        config.layout_seed,
    )?;
    let codes = ItemCodes::encode_embeddings(&embeddings, &layout)?;
    let builder = ProfileBuilder::new(codes.key(), config.recent);
    let examples = session_examples(sessions, &codes, &builder, config.examples)?;
    let mlp = MlpConfig {
        n_layers: config.n_layers,
        hidden_size: config.hidden_size,
        learning_rate: config.learning_rate,
        batch_size: config.batch_size,
        epochs: config.epochs,
        seed: config.seed,
        ..MlpConfig::new(builder.input_size(), codes.key())
    };
    let report = train(&examples, &mlp)?;
    Ok(FittedScorer {
        embeddings,
        codes,
        config: mlp,
        report,
        recent: builder.recent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::PlantedClusters;

    #[test]
    fn small_fit_learns() {
        let data = PlantedClusters {
            n_clusters: 2,
            items_per_cluster: 20,
            n_sessions: 200,
            seed: 1,
            ..Default::default()
        };
        let config = FitConfig {
            embed: EmbedConfig {
                dim: 16,
                ..EmbedConfig::default()
            },
            hidden_size: 16,
            epochs: 5,
            ..FitConfig::default()
        };
        let fitted = fit_sessions(&data.sessions(), &config).unwrap();
        assert_eq!(fitted.codes.len(), 40);
        assert!(fitted.report.final_loss < fitted.report.initial_loss);
        let top = fitted
            .ranker()
            .unwrap()
            .rank(&[data.item_label(0, 3)], 10)
            .unwrap();
        assert_eq!(top.len(), 10);
    }
}
