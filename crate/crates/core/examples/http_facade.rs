//! Serving a small catalog over HTTP. Writes a demo store to a temporary
//! directory and serves it on 127.0.0.1:8080 until Ctrl-C.
//!
//! ```text
//! curl -s localhost:8080/health
//! curl -s -XPOST localhost:8080/recommend -d '{"campaign":"home","history":["i00001","i00002"]}'
//! curl -s -XPOST localhost:8080/feedback -d '{"campaign":"home","variant":"mlp","reward":1}'
//! ```

use std::fs::File;
use std::io::BufWriter;

use fusionrec::embedding::export_binary;
use fusionrec::pipeline::{fit_sessions, serve::serve, FitConfig};
use fusionrec::scorer::write_model;
use fusionrec::sketch::write_item_codes;
use fusionrec::synth::{sessions_tsv, PlantedClusters};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let data = PlantedClusters {
        n_sessions: 1000,
        ..PlantedClusters::default()
    };
    let sessions = data.sessions();
    let fitted = fit_sessions(
        &sessions,
        &FitConfig {
            epochs: 3,
            ..FitConfig::default()
        },
    )?;
    write_model(
        &fitted.config,
        &fitted.report.params,
        BufWriter::new(File::create(dir.path().join("model.bin"))?),
    )?;
    write_item_codes(
        &fitted.codes,
        BufWriter::new(File::create(dir.path().join("codes.bin"))?),
    )?;
    export_binary(
        &fitted.embeddings,
        BufWriter::new(File::create(dir.path().join("emb.bin"))?),
    )?;
    std::fs::write(dir.path().join("sessions.tsv"), sessions_tsv(&sessions))?;
    std::fs::write(dir.path().join("schema.json"), r#"{"price": "numeric"}"#)?;
    let items: String = data
        .all_items()
        .iter()
        .enumerate()
        .map(|(i, id)| format!("{{\"id\":\"{id}\",\"price\":{}}}\n", i % 100))
        .collect();
    std::fs::write(dir.path().join("items.jsonl"), items)?;
    std::fs::write(
        dir.path().join("campaigns.json"),
        r#"{
  "catalog": "items.jsonl", "schema": "schema.json", "interactions": "sessions.tsv",
  "models": {
    "mlp": {"type": "scorer", "model": "model.bin", "codes": "codes.bin"},
    "emb": {"type": "similarity", "embeddings": "emb.bin"}
  },
  "campaigns": [
    {"name": "home", "type": "personalized", "filter": "price < 50", "k": 10, "variants": ["mlp"]},
    {"name": "pdp", "type": "similar_items", "k": 5, "variants": ["emb"]}
  ]
}"#,
    )?;
    println!("serving on http://127.0.0.1:8080 (Ctrl-C to stop)");
    tokio::runtime::Runtime::new()?.block_on(serve(
        ([127, 0, 0, 1], 8080).into(),
        dir.path().join("campaigns.json"),
    ))?;
    Ok(())
}
