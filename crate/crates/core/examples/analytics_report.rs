//! Per-campaign impressions, clicks and CTR from an event log.

use fusionrec::pipeline::report;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let log = "\
timestamp,campaign,event
2024-03-01T09:00:00Z,home,impression
2024-03-01T09:00:05Z,home,impression
2024-03-01T09:01:00Z,home,click
2024-03-02T10:00:00Z,home,impression
1709373600,pdp,impression
1709373660,pdp,click
1709373700,promo,click
oops,home,impression
";
    let agg = report(log.as_bytes())?;
    agg.write_csv(std::io::stdout().lock())?;
    eprintln!("{} malformed rows", agg.malformed);
    Ok(())
}
