use std::collections::HashSet;
use std::hash::Hash;

use rayon::prelude::*;
use serde::Serialize;

use super::{PipelineError, Result};

/// Metrics of one ranked list against the items that actually followed.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct SessionMetrics {
    pub average_precision: f64,
    pub precision: f64,
    pub recall: f64,
    pub hit: f64,
    pub reciprocal_rank: f64,
}

/// Scores the top `k` of `ranked`.
///
/// Precision is hits / k, recall hits / |relevant|, reciprocal rank 1 / rank
/// of the first hit, and average precision sums precision-at-i over hit
/// positions i <= k divided by min(|relevant|, k). Duplicate relevant items
/// count once.
pub fn session_metrics<T: Eq + Hash>(ranked: &[T], relevant: &[T], k: usize) -> SessionMetrics {
    let relevant: HashSet<&T> = relevant.iter().collect();
    if relevant.is_empty() || k == 0 {
        return SessionMetrics::default();
    }
    let mut hits = 0usize;
    let mut ap = 0.0;
    let mut rr = 0.0;
    for (i, item) in ranked.iter().take(k).enumerate() {
        if relevant.contains(item) {
            hits += 1;
            ap += hits as f64 / (i + 1) as f64;
            if hits == 1 {
                rr = 1.0 / (i + 1) as f64;
            }
        }
    }
    SessionMetrics {
        average_precision: ap / relevant.len().min(k) as f64,
        precision: hits as f64 / k as f64,
        recall: hits as f64 / relevant.len() as f64,
        hit: if hits > 0 { 1.0 } else { 0.0 },
        reciprocal_rank: rr,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub k: usize,
    pub sessions: usize,
    pub map: f64,
    pub precision: f64,
    pub recall: f64,
    pub hit_rate: f64,
    pub mrr: f64,
}

impl EvalReport {
    pub fn from_sessions(k: usize, per_session: &[SessionMetrics]) -> Result<Self> {
        if per_session.is_empty() {
            return Err(PipelineError::EmptySessions);
        }
        let n = per_session.len() as f64;
        let mean = |f: fn(&SessionMetrics) -> f64| per_session.iter().map(f).sum::<f64>() / n;
        Ok(Self {
            k,
            sessions: per_session.len(),
            map: mean(|m| m.average_precision),
            precision: mean(|m| m.precision),
            recall: mean(|m| m.recall),
            hit_rate: mean(|m| m.hit),
            mrr: mean(|m| m.reciprocal_rank),
        })
    }
}

impl std::fmt::Display for EvalReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let k = self.k;
        write!(
            f,
            "sessions={} MAP@{k}={:.4} P@{k}={:.4} R@{k}={:.4} HR@{k}={:.4} MRR@{k}={:.4}",
            self.sessions, self.map, self.precision, self.recall, self.hit_rate, self.mrr
        )
    }
}

/// A history and the items held out after it.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSession {
    pub history: Vec<String>,
    pub held_out: Vec<String>,
}

/// Ranks every session with `rank(history, k)` and averages the metrics.
pub fn evaluate<F>(sessions: &[EvalSession], k: usize, rank: F) -> Result<EvalReport>
where
    F: Fn(&[String], usize) -> Result<Vec<String>> + Sync,
{
    if sessions.is_empty() {
        return Err(PipelineError::EmptySessions);
    }
    if k == 0 {
        return Err(PipelineError::InvalidRequest("k must be at least 1".into()));
    }
    if let Some(i) = sessions.iter().position(|s| s.held_out.is_empty()) {
        return Err(PipelineError::InvalidRequest(format!(
            "session {i} has no held-out item"
        )));
    }
    let per_session = sessions
        .par_iter()
        .map(|s| Ok(session_metrics(&rank(&s.history, k)?, &s.held_out, k)))
        .collect::<Result<Vec<_>>>()?;
    EvalReport::from_sessions(k, &per_session)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hit_at_rank_four() {
        let ranked: Vec<u32> = (0..20).collect();
        let m = session_metrics(&ranked, &[3], 20);
        assert_eq!(m.reciprocal_rank, 0.25);
        assert_eq!(m.hit, 1.0);
        assert_eq!(m.recall, 1.0);
        assert_eq!(m.precision, 0.05);
        assert_eq!(m.average_precision, 0.25);
    }

    #[test]
    fn no_hits() {
        let m = session_metrics(&[1, 2, 3], &[9], 20);
        assert_eq!(m, SessionMetrics::default());
    }

    #[test]
    fn multiple_relevant() {
        let m = session_metrics(&[5, 1, 7, 2], &[1, 2, 2, 8], 3);
        assert_eq!(m.precision, 1.0 / 3.0);
        assert_eq!(m.recall, 1.0 / 3.0);
        assert_eq!(m.reciprocal_rank, 0.5);
        assert_eq!(m.average_precision, 0.5 / 3.0);
    }

    #[test]
    fn report_bounds_and_errors() {
        let sessions = vec![
            EvalSession {
                history: vec!["a".into()],
                held_out: vec!["b".into()],
            },
            EvalSession {
                history: vec!["c".into()],
                held_out: vec!["z".into()],
            },
        ];
        let r = evaluate(&sessions, 2, |_, _| {
            Ok(vec!["b".to_string(), "x".to_string()])
        })
        .unwrap();
        assert_eq!(r.hit_rate, 0.5);
        assert_eq!(r.mrr, 0.5);
        assert!(r.mrr <= r.hit_rate && r.recall <= r.hit_rate);
        assert!(evaluate(&[], 20, |_, _| Ok(vec![])).is_err());
        let bad = vec![EvalSession {
            history: vec![],
            held_out: vec![],
        }];
        assert!(evaluate(&bad, 20, |_, _| Ok(vec![])).is_err());
    }
}
