//! Embedding a product that did not exist when the graph was embedded,
//! from its links to known products.

use fusionrec::embedding::{cosine, embed, embed_inductive_labeled, EmbedConfig, InductiveLinks};
use fusionrec::graph::{build_transition, parse_interactions, ExpansionMode, ParseConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let baskets = "tent\tstove\tlantern\ntent\tsleeping_bag\nstove\tpot\tlantern\nkettle\tmug\tteapot\nmug\tteapot\n";
    let parsed = parse_interactions(baskets.as_bytes(), &ParseConfig::default())?;
    let graph = build_transition(&parsed.edges, &parsed.index, ExpansionMode::Clique)?;
    let base = embed(
        &graph,
        &EmbedConfig {
            dim: 128,
            ..EmbedConfig::default()
        },
    )?;

    let links = InductiveLinks::parse(
        "hammock\ttent\t2\nhammock\tlantern\n".as_bytes(),
        &base.index,
    )?;
    let fresh = embed_inductive_labeled(&links, &base)?;
    let v = fresh.vector("hammock").expect("embedded");
    for known in ["tent", "lantern", "teapot"] {
        println!(
            "cos(hammock, {known}) = {:.3}",
            cosine(v, base.vector(known).unwrap())
        );
    }
    Ok(())
}
