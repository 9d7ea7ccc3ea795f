//! Training the sketch-to-sketch scorer on user histories and ranking
//! candidates by the geometric mean of predicted probabilities.

use fusionrec::hashing::CounterRng;
use fusionrec::pipeline::{session_examples, ExampleMode, ProfileBuilder, ScorerRanker};
use fusionrec::scorer::{gradient_check, train, MlpConfig};
use fusionrec::sketch::{make_layout, ItemCodes};
use fusionrec::synth::grouped_users;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let users = grouped_users(400, 200, 4, 8, 1);
    let layout = make_layout(4, 5, 8, 0)?;
    let mut r = CounterRng::new(2, 2);
    // items in the same group share a direction
    let labels: Vec<String> = (0..200).map(|i| format!("m{i:05}")).collect();
    let centers: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..8).map(|_| r.next_symmetric()).collect())
        .collect();
    let codes = (0..200)
        .map(|i| {
            let v: Vec<f64> = centers[i / 50]
                .iter()
                .map(|c| c + 0.3 * r.next_symmetric())
                .collect();
            layout.encode(&v)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let codes = ItemCodes::new(layout.key(), labels, codes);

    let builder = ProfileBuilder::new(codes.key(), 2);
    let examples = session_examples(&users, &codes, &builder, ExampleMode::AllPrefixes)?;
    let config = MlpConfig {
        hidden_size: 64,
        epochs: 8,
        learning_rate: 3e-3,
        ..MlpConfig::new(builder.input_size(), codes.key())
    };
    let report = train(&examples, &config)?;
    println!(
        "{} examples, loss by epoch: {:.3?}",
        examples.len(),
        report.epoch_losses
    );
    println!(
        "gradient check: max rel err {:.2e}",
        gradient_check(&report.params, &examples[0], 1e-5, 1e-8)?
    );

    let ranker = ScorerRanker::new(&report.params, &codes, 2)?;
    let history = &users[0].items;
    println!(
        "history {:?}\ntop 5   {:?}",
        &history[..4],
        ranker.rank(history, 5)?
    );
    Ok(())
}
