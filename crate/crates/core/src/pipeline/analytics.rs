use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{DateTime, NaiveDate};

use super::sessions::parse_timestamp;
use super::Result;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counts {
    pub impressions: u64,
    pub clicks: u64,
}

impl Counts {
    /// Clicks over impressions; 0 without impressions.
    pub fn ctr(&self) -> f64 {
        if self.impressions == 0 {
            0.0
        } else {
            self.clicks as f64 / self.impressions as f64
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CampaignStats {
    pub total: Counts,
    pub days: BTreeMap<NaiveDate, Counts>,
}

/// Impressions and clicks per campaign and UTC day. Clicks are counted as
/// they come, without matching them to impressions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnalyticsAggregate {
    pub campaigns: BTreeMap<String, CampaignStats>,
    pub malformed: usize,
}

fn parse_date(ts: &str) -> Option<NaiveDate> {
    let secs = parse_timestamp(ts)?;
    DateTime::from_timestamp(secs.floor() as i64, 0).map(|t| t.date_naive())
}

/// Aggregates `timestamp,campaign,event` rows (event is `impression` or
/// `click`; timestamp in epoch seconds or RFC 3339). A header row is
/// optional; rows that do not parse are skipped and counted.
pub fn report<R: Read>(events: R) -> Result<AnalyticsAggregate> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(events);
    let mut agg = AnalyticsAggregate::default();
    for (n, rec) in rdr.records().enumerate() {
        let Ok(rec) = rec else {
            agg.malformed += 1;
            continue;
        };
        if n == 0 && rec.get(0) == Some("timestamp") {
            continue;
        }
        let parsed = match (rec.len(), rec.get(0), rec.get(1), rec.get(2)) {
            (3, Some(ts), Some(c), Some(e)) if !c.is_empty() => parse_date(ts)
                .zip(match e {
                    "impression" => Some(false),
                    "click" => Some(true),
                    _ => None,
                })
                .map(|(d, click)| (d, c, click)),
            _ => None,
        };
        let Some((day, campaign, click)) = parsed else {
            agg.malformed += 1;
            continue;
        };
        let stats = agg.campaigns.entry(campaign.to_string()).or_default();
        let day = stats.days.entry(day).or_default();
        if click {
            stats.total.clicks += 1;
            day.clicks += 1;
        } else {
            stats.total.impressions += 1;
            day.impressions += 1;
        }
    }
    Ok(agg)
}

impl AnalyticsAggregate {
    /// `campaign,date,impressions,clicks,ctr`: one row per campaign and day,
    /// then a `total` row per campaign.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["campaign", "date", "impressions", "clicks", "ctr"])?;
        let row = |out: &mut csv::Writer<W>, c: &str, date: &str, n: &Counts| {
            out.write_record([
                c,
                date,
                &n.impressions.to_string(),
                &n.clicks.to_string(),
                &format!("{:.6}", n.ctr()),
            ])
        };
        for (name, stats) in &self.campaigns {
            for (day, counts) in &stats.days {
                row(&mut out, name, &day.to_string(), counts)?;
            }
            row(&mut out, name, "total", &stats.total)?;
        }
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ctr_and_days() {
        let mut log = String::from("timestamp,campaign,event\n");
        for i in 0..10 {
            log.push_str(&format!("{},home,impression\n", 86_400 * (i % 2)));
        }
        log.push_str("1970-01-01T05:00:00Z,home,click\n100,home,click\n");
        log.push_str("garbage\n5,home,scroll\n");
        let agg = report(log.as_bytes()).unwrap();
        assert_eq!(agg.malformed, 2);
        let home = &agg.campaigns["home"];
        assert_eq!(
            home.total,
            Counts {
                impressions: 10,
                clicks: 2
            }
        );
        assert_eq!(home.total.ctr(), 0.2);
        assert_eq!(home.days.len(), 2);

        let mut csv = Vec::new();
        agg.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(
            text,
            "campaign,date,impressions,clicks,ctr\nhome,1970-01-01,5,2,0.400000\nhome,1970-01-02,5,0,0.000000\nhome,total,10,2,0.200000\n"
        );
    }

    #[test]
    fn clicks_without_impressions() {
        let agg = report("0,promo,click\n".as_bytes()).unwrap();
        let promo = &agg.campaigns["promo"];
        assert_eq!(
            promo.total,
            Counts {
                impressions: 0,
                clicks: 1
            }
        );
        assert_eq!(promo.total.ctr(), 0.0);
    }
}
