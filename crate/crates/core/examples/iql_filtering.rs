//! Parsing, type-checking and evaluating item queries over a columnar
//! catalog.

use std::time::Instant;

use fusionrec::iql::{compile, filter, parse, CompressedCatalog};
use fusionrec::synth::random_catalog;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (schema, rows) = random_catalog(200_000, 4);
    let mut catalog = CompressedCatalog::empty(schema.clone());
    for r in &rows {
        catalog.push(r)?;
    }
    println!("schema {}", schema.to_json());

    for q in [
        "price < 20 and in_stock",
        r#"brand in ["acme", "hooli"] and not featured"#,
        r#"tags contains "usb" or title contains "lamp""#,
        "rating >= 4.5 and price > rating",
    ] {
        let t = Instant::now();
        let hits = filter(&catalog, &compile(q, &schema)?)?;
        println!(
            "{:>7} hits in {:>9.2?}  {}",
            hits.count(),
            t.elapsed(),
            parse(q)?
        );
    }

    for bad in ["price >", "price > \"cheap\"", "colour == \"red\""] {
        println!("{bad:?}: {}", compile(bad, &schema).unwrap_err());
    }
    Ok(())
}
