//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

use std::time::{Duration, Instant};

use fusionrec::embedding::{embed, embed_inductive, export_binary, EmbedConfig, InductiveLinks};
use fusionrec::graph::{
    build_transition, virtual_star_label, ExpansionMode, Graph, Hyperedge, NodeIndex,
};
use fusionrec::hashing::{hash_init_value, CounterRng};
use fusionrec::iql::{compile, filter, filter_naive, typecheck, CompressedCatalog};
use fusionrec::pipeline::{
    evaluate, fit_sessions, hold_out_last, session_metrics, simulate, EvalSession, ExampleMode,
    FitConfig, Popularity,
};
use fusionrec::scorer::{gradient_check, MlpConfig, MlpParams, TrainingExample};
use fusionrec::sketch::{
    make_layout, normalize_rows, readout, sketch_add, sketch_of_items, CodeSet, LayoutKey, Readout,
    Sketch, SketchKind,
};
use fusionrec::synth::{
    grouped_users, random_catalog, random_hyperedges, random_query, PlantedClusters,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn graph_of(edges: &[Hyperedge], mode: ExpansionMode) -> Graph {
    build_transition(edges, &NodeIndex::from_edges(edges), mode).unwrap()
}

fn embed_bytes(graph: &Graph, workers: usize, dir: &std::path::Path, name: &str) -> Vec<u8> {
    let config = EmbedConfig {
        workers: Some(workers),
        ..EmbedConfig::default()
    };
    let emb = embed(graph, &config).unwrap();
    let path = dir.join(name);
    export_binary(
        &emb,
        std::io::BufWriter::new(std::fs::File::create(&path).unwrap()),
    )
    .unwrap();
    std::fs::read(path).unwrap()
}

fn determinism() -> Outcome {
    let t = Instant::now();
    let edges = random_hyperedges(20_000, 100_000, 4, 1);
    let graph = graph_of(&edges, ExpansionMode::Clique);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let a = embed_bytes(&graph, 1, dir.path(), "a.bin");
    let b = embed_bytes(&graph, 1, dir.path(), "b.bin");
    let c = embed_bytes(&graph, 8, dir.path(), "c.bin");
    let elapsed = t.elapsed();
    check(
        a == b && a == c && elapsed < Duration::from_secs(60),
        format!(
            "1e5 edges, {} nodes, {} transitions, dim 1024: repeat identical {}, 1 vs 8 workers identical {}, {} bytes, {elapsed:.1?}",
            graph.index.len(),
            graph.matrix.nnz(),
            a == b,
            a == c,
            a.len()
        ),
    )
}

/// Dense adjacency built straight from the hyperedges, indexed like `graph`.
fn dense_weights(edges: &[Hyperedge], graph: &Graph) -> Vec<Vec<f64>> {
    let n = graph.index.len();
    let id = |l: &str| graph.index.id(l).unwrap() as usize;
    let mut w = vec![vec![0.0; n]; n];
    for (e, edge) in edges.iter().enumerate() {
        match graph.mode {
            ExpansionMode::Clique => {
                for a in edge.nodes() {
                    for b in edge.nodes() {
                        if a != b {
                            w[id(a.as_str())][id(b.as_str())] += edge.weight();
                        }
                    }
                }
            }
            ExpansionMode::Star => {
                let hub = id(virtual_star_label(e).as_str());
                for a in edge.nodes() {
                    w[id(a.as_str())][hub] += edge.weight();
                    w[hub][id(a.as_str())] += edge.weight();
                }
            }
        }
    }
    w
}

fn dense_step(w: &[Vec<f64>], q: &[Vec<f64>]) -> Vec<Vec<f64>> {
    w.iter()
        .enumerate()
        .map(|(i, row)| {
            let total: f64 = row.iter().sum();
            let mut out = vec![0.0; q[0].len()];
            if total == 0.0 {
                out.clone_from(&q[i]);
            } else {
                for (j, &x) in row.iter().enumerate() {
                    if x != 0.0 {
                        for (o, v) in out.iter_mut().zip(&q[j]) {
                            *o += x / total * v;
                        }
                    }
                }
            }
            let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                out.iter_mut().for_each(|v| *v /= norm);
            }
            out
        })
        .collect()
}

fn dense_embedding(edges: &[Hyperedge], graph: &Graph, config: &EmbedConfig) -> Vec<Vec<f64>> {
    let w = dense_weights(edges, graph);
    let mut q: Vec<Vec<f64>> = graph
        .index
        .labels()
        .iter()
        .map(|l| {
            (0..config.dim)
                .map(|j| hash_init_value(l.as_str(), j as u64, config.seed))
                .collect()
        })
        .collect();
    for _ in 0..config.iterations {
        q = dense_step(&w, &q);
    }
    q
}

fn weighted_edges(n_nodes: usize, n_edges: usize, seed: u64) -> Vec<Hyperedge> {
    let mut r = CounterRng::new(seed, 77);
    random_hyperedges(n_nodes, n_edges, 5, seed)
        .into_iter()
        .map(|e| e.with_weight(0.5 + r.next_f64() * 3.0).unwrap())
        .collect()
}

fn oracle_equivalence() -> Outcome {
    let mut worst = 0.0f64;
    for g in 0..100u64 {
        let mut r = CounterRng::new(g, 3);
        let n_nodes = 2 + r.next_below(49) as usize;
        let edges = weighted_edges(n_nodes, 1 + r.next_below(60) as usize, g);
        let mode = if g % 2 == 0 {
            ExpansionMode::Clique
        } else {
            ExpansionMode::Star
        };
        let graph = graph_of(&edges, mode);
        let config = EmbedConfig {
            dim: 16,
            iterations: 1 + (g % 5) as usize,
            seed: g,
            workers: None,
        };
        let sparse = embed(&graph, &config).unwrap();
        let dense = dense_embedding(&edges, &graph, &config);
        for (i, row) in dense.iter().enumerate() {
            for (a, b) in sparse.matrix.row(i).iter().zip(row) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    check(
        worst <= 1e-6,
        format!("100 graphs (clique and star, <= 50 nodes): max abs diff {worst:.2e}"),
    )
}

fn inductive_consistency() -> Outcome {
    let edges = weighted_edges(200, 600, 9);
    let graph = graph_of(&edges, ExpansionMode::Clique);
    let config = EmbedConfig {
        dim: 32,
        iterations: 3,
        seed: 5,
        workers: None,
    };
    let base = embed(&graph, &config).unwrap();
    let w = dense_weights(&edges, &graph);
    let q: Vec<Vec<f64>> = base.matrix.rows().map(<[f64]>::to_vec).collect();
    let next = dense_step(&w, &q);
    let mut r = CounterRng::new(1, 1);
    let mut worst = 0.0f64;
    for s in 0..20 {
        let i = r.next_below(graph.index.len() as u64) as usize;
        let triples: Vec<(String, String, f64)> = w[i]
            .iter()
            .enumerate()
            .filter(|(_, &x)| x > 0.0)
            .map(|(j, &x)| {
                (
                    format!("new{s}"),
                    graph.index.label(j as u32).as_str().to_string(),
                    x,
                )
            })
            .collect();
        let links = InductiveLinks::from_triples(triples, &graph.index).unwrap();
        let got = embed_inductive(&links, &base.matrix).unwrap();
        for (a, b) in got.row(0).iter().zip(&next[i]) {
            worst = worst.max((a - b).abs());
        }
    }
    check(
        worst <= 1e-6,
        format!("20 nodes vs one extra dense step: max abs diff {worst:.2e}"),
    )
}

fn sketch_laws() -> Outcome {
    let layout = make_layout(4, 5, 8, 3).unwrap();
    let mut r = CounterRng::new(4, 4);
    let items: Vec<CodeSet> = (0..300)
        .map(|_| {
            layout
                .encode(&(0..8).map(|_| r.next_symmetric()).collect::<Vec<_>>())
                .unwrap()
        })
        .collect();
    let mut additive = 0;
    for _ in 0..1000 {
        let pick = |r: &mut CounterRng| -> (Vec<CodeSet>, Vec<f64>) {
            let n = 1 + r.next_below(20) as usize;
            (0..n)
                .map(|_| {
                    (
                        items[r.next_below(300) as usize].clone(),
                        1.0 + r.next_below(5) as f64,
                    )
                })
                .unzip()
        };
        let (ca, wa) = pick(&mut r);
        let (cb, wb) = pick(&mut r);
        let union = sketch_of_items(
            &[ca.clone(), cb.clone()].concat(),
            &[wa.clone(), wb.clone()].concat(),
            &layout,
        )
        .unwrap();
        let sum = sketch_add(
            &sketch_of_items(&ca, &wa, &layout).unwrap(),
            &sketch_of_items(&cb, &wb, &layout).unwrap(),
        )
        .unwrap();
        additive += usize::from(union == sum);
    }

    let mut never_under = 0;
    for _ in 0..10_000 {
        let n = 1 + r.next_below(50) as usize;
        let chosen: Vec<usize> = (0..n).map(|_| r.next_below(300) as usize).collect();
        let codes: Vec<CodeSet> = chosen.iter().map(|&i| items[i].clone()).collect();
        let s = sketch_of_items(&codes, &vec![1.0; n], &layout).unwrap();
        let q = chosen[r.next_below(n as u64) as usize];
        let truth = chosen.iter().filter(|&&i| i == q).count() as f64;
        never_under += usize::from(readout(&s, &items[q], Readout::Min).unwrap() >= truth);
    }

    let key = LayoutKey {
        depth: 2,
        bits: 1,
        input_dim: 1,
        seed: 0,
    };
    let s = Sketch::from_cells(key, SketchKind::Counts, vec![4.0, 0.0, 0.0, 9.0]).unwrap();
    let geo = readout(&s, &CodeSet::new(vec![0, 1]), Readout::GeoMean).unwrap();
    check(
        additive == 1000 && never_under == 10_000 && (geo - 6.0).abs() <= 1e-8,
        format!("additivity {additive}/1000 exact, min readout >= truth {never_under}/10000, geomean {{4,9}} = {geo:.10}"),
    )
}

fn gradients() -> Outcome {
    let key = LayoutKey {
        depth: 2,
        bits: 2,
        input_dim: 1,
        seed: 0,
    };
    let mut worst = 0.0f64;
    for seed in 0..5u64 {
        let config = MlpConfig {
            n_layers: 2,
            hidden_size: 5,
            seed,
            ..MlpConfig::new(6, key)
        };
        let mut params = MlpParams::init(&config).unwrap();
        let mut r = CounterRng::new(seed, 9);
        let flat: Vec<f64> = params
            .flat()
            .iter()
            .map(|w| w + 0.1 * r.next_symmetric())
            .collect();
        params.set_flat(&flat);
        let input: Vec<f64> = (0..6).map(|_| r.next_symmetric() * 2.0).collect();
        let mut target = Sketch::zeros(key);
        target.insert(&CodeSet::new(vec![1, 2]), 1.0).unwrap();
        target.insert(&CodeSet::new(vec![3, 2]), 2.0).unwrap();
        let example = TrainingExample::new(input, normalize_rows(&target).unwrap()).unwrap();
        worst = worst.max(gradient_check(&params, &example, 1e-5, 1e-8).unwrap());
    }
    check(
        worst < 1e-4,
        format!(
            "6 -> 5 -> 2x4 network, all {} parameters, 5 seeds: max rel err {worst:.2e}",
            6 * 5 + 5 + 5 * 8 + 8
        ),
    )
}

fn iql() -> Outcome {
    let (schema, rows) = random_catalog(10_000, 21);
    let mut catalog = CompressedCatalog::empty(schema.clone());
    rows.iter().for_each(|r| {
        catalog.push(r).unwrap();
    });
    let mut r = CounterRng::new(6, 6);
    let mut equal = 0;
    for _ in 0..1000 {
        let q = typecheck(&random_query(&mut r, 4), &schema).unwrap();
        equal += usize::from(filter(&catalog, &q).unwrap() == filter_naive(&rows, &q));
    }
    drop(rows);

    let (schema, big) = random_catalog(1_000_000, 22);
    let mut catalog = CompressedCatalog::empty(schema.clone());
    big.iter().for_each(|r| {
        catalog.push(r).unwrap();
    });
    drop(big);
    let q = compile("price > 250", &schema).unwrap();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let (hits, elapsed) = pool.install(|| {
        let _ = filter(&catalog, &q).unwrap();
        let t = Instant::now();
        let hits = filter(&catalog, &q).unwrap();
        (hits, t.elapsed())
    });
    check(
        equal == 1000 && elapsed < Duration::from_millis(100),
        format!(
            "1000 queries x 10k items: {equal}/1000 identical to row oracle; `price > 250` over 1e6 items on one thread: {} hits in {elapsed:.1?}",
            hits.count()
        ),
    )
}

fn end_to_end() -> Outcome {
    let t = Instant::now();
    let data = PlantedClusters {
        seed: 7,
        ..PlantedClusters::default()
    };
    let sessions = data.sessions();
    let (train, test) = sessions.split_at(sessions.len() * 4 / 5);
    let fitted = fit_sessions(train, &FitConfig::default()).map_err(|e| e.to_string())?;
    let popularity = Popularity::from_sessions(train);
    let ranker = fitted
        .ranker()
        .map_err(|e| e.to_string())?
        .with_fallback(&popularity);
    let held_out = hold_out_last(test);
    let model = evaluate(&held_out, 20, |h, k| ranker.rank(h, k)).map_err(|e| e.to_string())?;
    let top = popularity.top(20);
    let baseline = evaluate(&held_out, 20, |_, _| Ok(top.clone())).map_err(|e| e.to_string())?;
    let elapsed = t.elapsed();
    check(
        model.hit_rate - baseline.hit_rate >= 0.10 && elapsed < Duration::from_secs(600),
        format!(
            "5x200 items, 5000 sessions: scorer HR@20 {:.4} vs popularity {:.4} on {} held-out sessions, {elapsed:.1?}",
            model.hit_rate, baseline.hit_rate, model.sessions
        ),
    )
}

fn bandit() -> Outcome {
    let pulls = simulate(&[0.9, 0.1], 10_000, 8).map_err(|e| e.to_string())?;
    let best = pulls[9000..].iter().filter(|&&a| a == 0).count();
    check(
        best > 950,
        format!("0.9 vs 0.1 arms: best arm pulled {best}/1000 in the final 1000 of 10000 rounds"),
    )
}

fn metrics() -> Outcome {
    let fixture: serde_json::Value =
        serde_json::from_str(include_str!("data/metric_oracle.json")).unwrap();
    let strings = |v: &serde_json::Value| -> Vec<String> {
        v.as_array()
            .unwrap()
            .iter()
            .map(|s| s.as_str().unwrap().to_string())
            .collect()
    };
    let lists: Vec<(Vec<String>, Vec<String>)> = fixture["sessions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| (strings(&s["ranked"]), strings(&s["relevant"])))
        .collect();
    let sessions: Vec<EvalSession> = lists
        .iter()
        .enumerate()
        .map(|(i, (_, rel))| EvalSession {
            history: vec![i.to_string()],
            held_out: rel.clone(),
        })
        .collect();
    let report = evaluate(&sessions, 20, |h, _| {
        Ok(lists[h[0].parse::<usize>().unwrap()].0.clone())
    })
    .unwrap();
    let e = &fixture["expected"];
    let worst = [
        report.map - e["map"].as_f64().unwrap(),
        report.precision - e["precision"].as_f64().unwrap(),
        report.recall - e["recall"].as_f64().unwrap(),
        report.hit_rate - e["hit_rate"].as_f64().unwrap(),
        report.mrr - e["mrr"].as_f64().unwrap(),
    ]
    .iter()
    .fold(0.0f64, |m, d| m.max(d.abs()));
    let ranked: Vec<u32> = (0..20).collect();
    let m = session_metrics(&ranked, &[3], 20);
    let hand = m.reciprocal_rank == 0.25 && m.hit == 1.0 && m.recall == 1.0 && m.precision == 0.05;
    check(
        worst <= 1e-12 && hand && report.sessions == 50,
        format!("50 sessions vs reference script: max abs diff {worst:.1e}; rank-4 hit gives MRR {} exactly: {hand}", m.reciprocal_rank),
    )
}

fn timing() -> Outcome {
    let users = grouped_users(6000, 4000, 40, 10, 12);
    let config = FitConfig {
        examples: ExampleMode::AllPrefixes,
        epochs: 5,
        ..FitConfig::default()
    };
    let t = Instant::now();
    let fitted = fit_sessions(&users, &config).map_err(|e| e.to_string())?;
    let train_time = t.elapsed();
    let ranker = fitted.ranker().map_err(|e| e.to_string())?;
    let t = Instant::now();
    let histories: Vec<EvalSession> = users
        .iter()
        .map(|u| EvalSession {
            history: u.items.clone(),
            held_out: vec![u.items[0].clone()],
        })
        .collect();
    let report = evaluate(&histories, 20, |h, k| ranker.rank(h, k)).map_err(|e| e.to_string())?;
    let predict_time = t.elapsed();
    check(
        train_time < Duration::from_secs(200) && predict_time < Duration::from_secs(140),
        format!(
            "6000 users x {} items on {} thread(s): train {train_time:.1?} (graph, embedding, codes, {} epochs), predict top-20 for {} users {predict_time:.1?}",
            fitted.codes.len(),
            rayon::current_num_threads(),
            config.epochs,
            report.sessions
        ),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("determinism", determinism),
        ("oracle equivalence", oracle_equivalence),
        ("inductive consistency", inductive_consistency),
        ("sketch laws", sketch_laws),
        ("gradient check", gradients),
        ("iql differential", iql),
        ("end-to-end synthetic", end_to_end),
        ("bandit convergence", bandit),
        ("metric correctness", metrics),
        ("timing", timing),
    ];
    let only: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for (n, (name, run)) in criteria.iter().enumerate().map(|(i, c)| (i + 1, c)) {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let line = match outcome {
            Ok(detail) => format!("criterion {n:>2} PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                format!("criterion {n:>2} FAIL {name}: {detail}")
            }
        };
        println!("{line}");
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
