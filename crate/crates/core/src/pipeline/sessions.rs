use std::collections::HashMap;
use std::io::BufRead;

use chrono::DateTime;

use super::metrics::EvalSession;
use super::{PipelineError, Result};
use crate::scorer::TrainingExample;
use crate::sketch::{
    normalize_rows, sketch_concat, CodeSet, ConcatSketch, ItemCodes, LayoutKey, Sketch,
};
use crate::synth::Session;

/// Seconds since the epoch from either a number or an RFC 3339 timestamp.
pub fn parse_timestamp(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<f64>() {
        return v.is_finite().then_some(v);
    }
    let t = DateTime::parse_from_rfc3339(s).ok()?;
    Some(t.timestamp() as f64 + f64::from(t.timestamp_subsec_nanos()) * 1e-9)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SessionLog {
    /// Sessions in order of first appearance, events sorted by timestamp.
    pub sessions: Vec<Session>,
    pub malformed: usize,
}

/// Reads `session_id TAB item_id TAB timestamp` lines. Events with equal
/// timestamps keep their file order.
pub fn read_sessions<R: BufRead>(r: R) -> Result<SessionLog> {
    let mut order: Vec<String> = Vec::new();
    let mut events: HashMap<String, Vec<(f64, usize, String)>> = HashMap::new();
    let mut malformed = 0;
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let parsed = match fields.as_slice() {
            [s, i, t] if !s.is_empty() && !i.is_empty() => parse_timestamp(t).map(|t| (*s, *i, t)),
            _ => None,
        };
        let Some((s, item, t)) = parsed else {
            malformed += 1;
            continue;
        };
        let entry = events.entry(s.to_string()).or_insert_with(|| {
            order.push(s.to_string());
            Vec::new()
        });
        entry.push((t, n, item.to_string()));
    }
    let sessions = order
        .into_iter()
        .map(|id| {
            let mut ev = events.remove(&id).unwrap_or_default();
            ev.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            Session {
                id,
                items: ev.into_iter().map(|(_, _, i)| i).collect(),
            }
        })
        .collect();
    Ok(SessionLog {
        sessions,
        malformed,
    })
}

/// Splits every session with at least two items into its history and its
/// last item.
pub fn hold_out_last(sessions: &[Session]) -> Vec<EvalSession> {
    sessions
        .iter()
        .filter(|s| s.items.len() >= 2)
        .map(|s| {
            let (last, history) = s.items.split_last().expect("two or more items");
            EvalSession {
                history: history.to_vec(),
                held_out: vec![last.clone()],
            }
        })
        .collect()
}

/// Number of input views in a user profile.
pub const PROFILE_VIEWS: usize = 2;

/// Builds the scorer input for a user: the row-normalized sketch of the
/// whole history followed by that of the most recent `recent` items.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileBuilder {
    pub key: LayoutKey,
    pub recent: usize,
}

impl ProfileBuilder {
    pub fn new(key: LayoutKey, recent: usize) -> Self {
        Self {
            key,
            recent: recent.max(1),
        }
    }

    pub fn input_size(&self) -> usize {
        PROFILE_VIEWS * self.key.cells()
    }

    fn view(&self, items: &[&CodeSet]) -> Result<Sketch> {
        let mut s = Sketch::zeros(self.key);
        for c in items {
            s.insert(c, 1.0)?;
        }
        Ok(normalize_rows(&s)?)
    }

    pub fn profile(&self, history: &[&CodeSet]) -> Result<ConcatSketch> {
        if history.is_empty() {
            return Err(PipelineError::InvalidRequest("empty history".into()));
        }
        let recent = &history[history.len().saturating_sub(self.recent)..];
        Ok(sketch_concat(vec![
            ("history".to_string(), self.view(history)?),
            ("recent".to_string(), self.view(recent)?),
        ])?)
    }

    pub fn input(&self, history: &[&CodeSet]) -> Result<Vec<f64>> {
        Ok(self.profile(history)?.flatten())
    }

    /// Row-normalized sketch of the items to predict.
    pub fn target(&self, items: &[&CodeSet]) -> Result<Sketch> {
        self.view(items)
    }
}

/// Which positions of a session become training examples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExampleMode {
    /// Every prefix predicts the item after it.
    AllPrefixes,
    /// Only the full history predicts the last item.
    LastOnly,
}

/// Training examples from sessions; items without codes are dropped first.
pub fn session_examples(
    sessions: &[Session],
    codes: &ItemCodes,
    builder: &ProfileBuilder,
    mode: ExampleMode,
) -> Result<Vec<TrainingExample>> {
    let mut out = Vec::new();
    for s in sessions {
        let known: Vec<&CodeSet> = s.items.iter().filter_map(|i| codes.get(i)).collect();
        if known.len() < 2 {
            continue;
        }
        let first = match mode {
            ExampleMode::AllPrefixes => 1,
            ExampleMode::LastOnly => known.len() - 1,
        };
        for t in first..known.len() {
            let input = builder.input(&known[..t])?;
            out.push(TrainingExample::new(input, builder.target(&known[t..=t])?)?);
        }
    }
    Ok(out)
}

/// Item interaction counts, ranked by count then ascending id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Popularity {
    ranked: Vec<(String, usize)>,
}

impl Popularity {
    pub fn from_sessions(sessions: &[Session]) -> Self {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for s in sessions {
            for i in &s.items {
                *counts.entry(i.as_str()).or_default() += 1;
            }
        }
        let mut ranked: Vec<(String, usize)> = counts
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Self { ranked }
    }

    pub fn ranked(&self) -> &[(String, usize)] {
        &self.ranked
    }

    pub fn count(&self, item: &str) -> usize {
        self.ranked
            .iter()
            .find(|(i, _)| i == item)
            .map_or(0, |(_, c)| *c)
    }

    pub fn top(&self, k: usize) -> Vec<String> {
        self.ranked.iter().take(k).map(|(i, _)| i.clone()).collect()
    }
}
