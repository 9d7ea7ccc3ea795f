//! Thompson sampling across model variants with binary feedback.

use fusionrec::pipeline::{simulate, BanditState};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pulls = simulate(&[0.05, 0.08, 0.03], 20_000, 11)?;
    for window in pulls.chunks(5000) {
        let share: Vec<String> = (0..3)
            .map(|a| {
                format!(
                    "{:.3}",
                    window.iter().filter(|&&p| p == a).count() as f64 / window.len() as f64
                )
            })
            .collect();
        println!("pull share {}", share.join(" "));
    }

    let mut state = BanditState::new(vec!["mlp".into(), "cosine".into()], 1)?;
    state.record_feedback(0, 1)?;
    state.record_feedback(1, 0)?;
    let pick = state.select_variant();
    println!("{:?} -> next pick {}", state.arms(), state.variants()[pick]);
    Ok(())
}
