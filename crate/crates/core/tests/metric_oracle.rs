use fusionrec::pipeline::{evaluate, session_metrics, EvalSession};
use serde_json::Value;

#[test]
fn matches_reference_script() {
    let fixture: Value =
        serde_json::from_str(include_str!("data/metric_oracle.json")).expect("fixture parses");
    let k = fixture["k"].as_u64().unwrap() as usize;
    let strings = |v: &Value| -> Vec<String> {
        v.as_array()
            .unwrap()
            .iter()
            .map(|s| s.as_str().unwrap().to_string())
            .collect()
    };
    let sessions: Vec<(Vec<String>, Vec<String>)> = fixture["sessions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| (strings(&s["ranked"]), strings(&s["relevant"])))
        .collect();
    assert_eq!(sessions.len(), 50);
    let eval: Vec<EvalSession> = sessions
        .iter()
        .enumerate()
        .map(|(i, (_, relevant))| EvalSession {
            history: vec![i.to_string()],
            held_out: relevant.clone(),
        })
        .collect();
    let report = evaluate(&eval, k, |h, _| {
        Ok(sessions[h[0].parse::<usize>().unwrap()].0.clone())
    })
    .unwrap();
    let expected = &fixture["expected"];
    for (name, got) in [
        ("map", report.map),
        ("precision", report.precision),
        ("recall", report.recall),
        ("hit_rate", report.hit_rate),
        ("mrr", report.mrr),
    ] {
        let want = expected[name].as_f64().unwrap();
        assert!((got - want).abs() <= 1e-12, "{name}: {got} vs {want}");
    }
    assert_eq!(report.sessions, 50);
}

#[test]
fn hand_cases() {
    let ranked: Vec<String> = (0..20).map(|i| format!("x{i}")).collect();
    let m = session_metrics(&ranked, &["x3".to_string()], 20);
    assert_eq!(
        (m.reciprocal_rank, m.hit, m.recall, m.precision),
        (0.25, 1.0, 1.0, 0.05)
    );
    let none = session_metrics(&ranked, &["zz".to_string()], 20);
    assert_eq!(
        (
            none.reciprocal_rank,
            none.hit,
            none.recall,
            none.precision,
            none.average_precision
        ),
        (0.0, 0.0, 0.0, 0.0, 0.0)
    );
}
