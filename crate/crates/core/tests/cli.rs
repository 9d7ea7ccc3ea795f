use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fusionrec::pipeline::{session_hyperedges, Engine, RecommendRequest};
use fusionrec::synth::{interactions_tsv, sessions_tsv, PlantedClusters};

fn fusionrec(dir: &Path, args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_fusionrec"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "fusionrec {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn full_command_line_flow() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let data = PlantedClusters {
        n_clusters: 3,
        items_per_cluster: 40,
        n_sessions: 600,
        seed: 3,
        ..Default::default()
    };
    let sessions = data.sessions();
    let (train, test) = sessions.split_at(500);
    fs::write(
        dir.join("edges.tsv"),
        interactions_tsv(&session_hyperedges(train)),
    )
    .unwrap();
    fs::write(dir.join("train.tsv"), sessions_tsv(train)).unwrap();
    fs::write(dir.join("test.tsv"), sessions_tsv(test)).unwrap();
    fs::write(
        dir.join("schema.json"),
        r#"{"price": "numeric", "in_stock": "boolean"}"#,
    )
    .unwrap();
    let items: String = data
        .all_items()
        .iter()
        .enumerate()
        .map(|(i, id)| {
            format!(
                "{{\"id\":\"{id}\",\"price\":{},\"in_stock\":{}}}\n",
                i % 50,
                i % 3 != 0
            )
        })
        .collect();
    fs::write(dir.join("items.jsonl"), items + "not json\n").unwrap();

    fusionrec(
        dir,
        &[
            "graph",
            "build",
            "--input",
            "edges.tsv",
            "--mode",
            "clique",
            "--out",
            "graph.bin",
        ],
    );
    fusionrec(
        dir,
        &[
            "graph",
            "build",
            "--input",
            "edges.tsv",
            "--mode",
            "star",
            "--out",
            "star.bin",
        ],
    );
    fusionrec(
        dir,
        &[
            "embed",
            "--graph",
            "graph.bin",
            "--dim",
            "32",
            "--seed",
            "1",
            "--out",
            "emb.bin",
        ],
    );
    fusionrec(
        dir,
        &[
            "embed", "--graph", "star.bin", "--dim", "8", "--out", "star.tsv",
        ],
    );
    let text = fs::read_to_string(dir.join("star.tsv")).unwrap();
    assert!(text.starts_with("120 8\n"), "virtual hubs are not exported");

    fs::write(dir.join("links.tsv"), "fresh\ti00001\t2\nfresh\ti00002\n").unwrap();
    fusionrec(
        dir,
        &[
            "embed",
            "inductive",
            "--links",
            "links.tsv",
            "--base",
            "emb.bin",
            "--out",
            "fresh.tsv",
        ],
    );
    assert!(fs::read_to_string(dir.join("fresh.tsv"))
        .unwrap()
        .contains("fresh\t"));

    fusionrec(
        dir,
        &[
            "sketch",
            "build",
            "--embeddings",
            "emb.bin",
            "--layout",
            "D=4,b=5,seed=2",
            "--out",
            "codes.bin",
        ],
    );
    fusionrec(
        dir,
        &[
            "sketch",
            "user",
            "--history",
            "train.tsv",
            "--codes",
            "codes.bin",
            "--out",
            "users.bin",
        ],
    );
    fusionrec(
        dir,
        &[
            "sketch",
            "examples",
            "--sessions",
            "train.tsv",
            "--codes",
            "codes.bin",
            "--out",
            "train.bin",
        ],
    );
    fusionrec(
        dir,
        &[
            "train",
            "--examples",
            "train.bin",
            "--hidden",
            "32",
            "--epochs",
            "5",
            "--lr",
            "0.003",
            "--out",
            "model.bin",
        ],
    );

    let out = fusionrec(
        dir,
        &[
            "eval",
            "--sessions",
            "test.tsv",
            "--model",
            "model.bin",
            "--codes",
            "codes.bin",
            "--popularity",
            "train.tsv",
        ],
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    let hr = |line: &str| -> f64 {
        line.split_whitespace()
            .find_map(|f| f.strip_prefix("HR@20="))
            .unwrap()
            .parse()
            .unwrap()
    };
    let mut lines = stdout.lines();
    let (model, baseline) = (hr(lines.next().unwrap()), hr(lines.next().unwrap()));
    assert!(model > baseline, "{stdout}");

    let out = fusionrec(
        dir,
        &[
            "filter",
            "--catalog",
            "items.jsonl",
            "--schema",
            "schema.json",
            "--query",
            "price < 2 and in_stock",
        ],
    );
    let ids: Vec<String> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect();
    let expected: Vec<String> = (0..120)
        .filter(|i| i % 50 < 2 && i % 3 != 0)
        .map(|i| format!("i{i:05}"))
        .collect();
    assert_eq!(ids, expected);
    assert!(String::from_utf8_lossy(&out.stderr).contains("1 malformed"));

    fs::write(
        dir.join("events.csv"),
        "timestamp,campaign,event\n0,home,impression\n1,home,impression\n2,home,click\n",
    )
    .unwrap();
    let out = fusionrec(dir, &["report", "--events", "events.csv"]);
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .contains("home,total,2,1,0.500000"));

    fs::write(
        dir.join("campaigns.json"),
        r#"{
  "catalog": "items.jsonl",
  "schema": "schema.json",
  "interactions": "train.tsv",
  "models": {
    "mlp": {"type": "scorer", "model": "model.bin", "codes": "codes.bin"},
    "emb": {"type": "similarity", "embeddings": "emb.bin"}
  },
  "campaigns": [
    {"name": "home", "type": "personalized", "filter": "in_stock", "k": 5, "variants": ["mlp"]},
    {"name": "pdp", "type": "similar_items", "k": 3, "variants": ["emb"]}
  ]
}"#,
    )
    .unwrap();
    let engine = Engine::load(&dir.join("campaigns.json")).unwrap();
    let history = test[0].items[..2].to_vec();
    let rec = engine
        .recommend(&RecommendRequest {
            campaign: "home".into(),
            history: history.clone(),
            ..Default::default()
        })
        .unwrap();
    assert_eq!(rec.items.len(), 5);
    assert_eq!(rec.variant.as_deref(), Some("mlp"));
    let rec = engine
        .recommend(&RecommendRequest {
            campaign: "pdp".into(),
            item: Some(history[0].clone()),
            ..Default::default()
        })
        .unwrap();
    assert_eq!(rec.items.len(), 3);

    fs::write(dir.join("broken.json"), r#"{"catalog": "missing.jsonl"}"#).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_fusionrec"))
        .args(["serve", "--port", "0", "--campaigns", "broken.json"])
        .current_dir(dir)
        .output()
        .unwrap();
    assert!(!out.status.success());
}
