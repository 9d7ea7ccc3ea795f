use super::sessions::{Popularity, ProfileBuilder};
use super::similar::top_k;
use super::{PipelineError, Result};
use crate::scorer::{forward, LogSketch, MlpParams};
use crate::sketch::{CodeSet, ItemCodes};

/// Ranks every coded item for a history with a trained scorer. Histories
/// without any coded item fall back to popularity.
#[derive(Debug, Clone)]
pub struct ScorerRanker<'a> {
    params: &'a MlpParams,
    codes: &'a ItemCodes,
    builder: ProfileBuilder,
    fallback: Vec<String>,
}

impl<'a> ScorerRanker<'a> {
    pub fn new(params: &'a MlpParams, codes: &'a ItemCodes, recent: usize) -> Result<Self> {
        let builder = ProfileBuilder::new(codes.key(), recent);
        if params.output != codes.key() {
            return Err(PipelineError::Config(
                "model output layout differs from the item codes".into(),
            ));
        }
        if params.input_size() != builder.input_size() {
            return Err(PipelineError::Config(format!(
                "model expects {} inputs, user profiles have {}",
                params.input_size(),
                builder.input_size()
            )));
        }
        Ok(Self {
            params,
            codes,
            builder,
            fallback: Vec::new(),
        })
    }

    pub fn with_fallback(mut self, popularity: &Popularity) -> Self {
        self.fallback = popularity.ranked().iter().map(|(i, _)| i.clone()).collect();
        self
    }

    /// Scores of all coded items, by position in the code table; `None`
    /// when no history item has codes.
    pub fn scores(&self, history: &[String]) -> Result<Option<Vec<(u32, f64)>>> {
        let known: Vec<&CodeSet> = history.iter().filter_map(|h| self.codes.get(h)).collect();
        if known.is_empty() {
            return Ok(None);
        }
        let logs = LogSketch::new(&forward(self.params, &self.builder.input(&known)?)?);
        let scored = self
            .codes
            .codes()
            .iter()
            .enumerate()
            .map(|(i, c)| Ok((i as u32, logs.score(c)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Some(scored))
    }

    pub fn rank(&self, history: &[String], k: usize) -> Result<Vec<String>> {
        Ok(match self.scores(history)? {
            Some(scored) => top_k(scored, k)
                .into_iter()
                .map(|(i, _)| self.codes.labels()[i as usize].clone())
                .collect(),
            None => self.fallback.iter().take(k).cloned().collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorer::MlpConfig;
    use crate::sketch::LayoutKey;
    use crate::synth::Session;

    #[test]
    fn ranks_all_items_or_falls_back() {
        let key = LayoutKey {
            depth: 2,
            bits: 2,
            input_dim: 2,
            seed: 0,
        };
        let labels: Vec<String> = (0..5).map(|i| format!("x{i}")).collect();
        let codes = ItemCodes::new(
            key,
            labels,
            (0..5u32)
                .map(|i| CodeSet::new(vec![i % 4, 3 - i % 4]))
                .collect(),
        );
        let config = MlpConfig {
            hidden_size: 3,
            ..MlpConfig::new(2 * key.cells(), key)
        };
        let params = MlpParams::init(&config).unwrap();
        let pop = Popularity::from_sessions(&[Session {
            id: "s".into(),
            items: vec!["x3".into(), "x3".into(), "x1".into()],
        }]);
        let r = ScorerRanker::new(&params, &codes, 1)
            .unwrap()
            .with_fallback(&pop);
        assert_eq!(r.rank(&["x0".into()], 10).unwrap().len(), 5);
        assert_eq!(r.rank(&["unknown".into()], 10).unwrap(), ["x3", "x1"]);
        assert!(ScorerRanker::new(&params, &codes, 1)
            .unwrap()
            .scores(&[])
            .unwrap()
            .is_none());
        let bad = MlpParams::init(&MlpConfig::new(3, key)).unwrap();
        assert!(ScorerRanker::new(&bad, &codes, 1).is_err());
    }
}
