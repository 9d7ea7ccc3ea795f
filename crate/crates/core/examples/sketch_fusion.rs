//! Item codes from embeddings, additive user sketches, and Count-Min vs
//! geometric-mean readouts.

use fusionrec::hashing::CounterRng;
use fusionrec::sketch::{
    make_layout, normalize_rows, readout, sketch_add, sketch_concat, sketch_of_items, Readout,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let layout = make_layout(4, 4, 16, 7)?;
    let mut r = CounterRng::new(3, 3);
    let items: Vec<Vec<f64>> = (0..50)
        .map(|_| (0..16).map(|_| r.next_symmetric()).collect())
        .collect();
    let codes = items
        .iter()
        .map(|v| layout.encode(v))
        .collect::<Result<Vec<_>, _>>()?;

    let morning = sketch_of_items(&codes[..5], &[1.0; 5], &layout)?;
    let evening = sketch_of_items(&codes[3..8], &[2.0; 5], &layout)?;
    let day = sketch_add(&morning, &evening)?;
    for i in [0, 4, 7, 30] {
        println!(
            "item {i:>2}: min {:>4.1}  geomean {:>6.3}",
            readout(&day, &codes[i], Readout::Min)?,
            readout(&day, &codes[i], Readout::GeoMean)?
        );
    }

    let profile = sketch_concat(vec![
        ("history".into(), normalize_rows(&day)?),
        ("recent".into(), normalize_rows(&evening)?),
    ])?;
    println!(
        "fused profile: {} views, {} inputs",
        profile.parts().len(),
        profile.flat_len()
    );
    Ok(())
}
