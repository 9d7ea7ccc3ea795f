//! Planted-cluster sessions: train a sketch scorer on 80% of sessions and
//! compare it with item popularity on the held-out last items of the rest.

use std::time::Instant;

use fusionrec::pipeline::{evaluate, fit_sessions, hold_out_last, FitConfig, Popularity};
use fusionrec::synth::PlantedClusters;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = PlantedClusters {
        seed: 7,
        ..PlantedClusters::default()
    };
    let sessions = data.sessions();
    let (train, test) = sessions.split_at(sessions.len() * 4 / 5);

    let t = Instant::now();
    let fitted = fit_sessions(train, &FitConfig::default())?;
    println!(
        "trained on {} sessions in {:.1?}: loss {:.4} -> {:.4}",
        train.len(),
        t.elapsed(),
        fitted.report.initial_loss,
        fitted.report.final_loss
    );

    let popularity = Popularity::from_sessions(train);
    let ranker = fitted.ranker()?.with_fallback(&popularity);
    let held_out = hold_out_last(test);
    let model = evaluate(&held_out, 20, |h, k| ranker.rank(h, k))?;
    let top = popularity.top(20);
    let baseline = evaluate(&held_out, 20, |_, _| Ok(top.clone()))?;
    println!("model      {model}");
    println!("popularity {baseline}");
    Ok(())
}
