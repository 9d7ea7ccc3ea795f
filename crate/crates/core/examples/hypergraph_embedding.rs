//! Baskets as hyperedges, clique vs star expansion, and nearest neighbours
//! by cosine similarity of the propagated embeddings.

use fusionrec::embedding::{embed, EmbedConfig};
use fusionrec::graph::{build_transition, parse_interactions, ExpansionMode, ParseConfig};
use fusionrec::pipeline::{similar_items, SimilarityIndex};

const BASKETS: &str = "\
milk\tbread\tbutter
milk\tbread\tjam
bread\tbutter\tjam
beer\tchips\tsalsa
beer\tchips
chips\tsalsa\tguacamole
milk\tcereal
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let parsed = parse_interactions(BASKETS.as_bytes(), &ParseConfig::default())?;
    let config = EmbedConfig {
        dim: 64,
        iterations: 3,
        seed: 1,
        workers: None,
    };
    for mode in [ExpansionMode::Clique, ExpansionMode::Star] {
        let graph = build_transition(&parsed.edges, &parsed.index, mode)?;
        let emb = embed(&graph, &config)?;
        let index = SimilarityIndex::from_embeddings(&emb);
        println!(
            "{mode}: {} nodes, {} transitions",
            graph.index.len(),
            graph.matrix.nnz()
        );
        for item in ["milk", "beer"] {
            let near: Vec<String> = similar_items(item, &index, 3, None)?
                .into_iter()
                .map(|(id, s)| format!("{id} ({s:.3})"))
                .collect();
            println!("  {item}: {}", near.join(", "));
        }
    }
    Ok(())
}
