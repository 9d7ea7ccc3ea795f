//! Campaign configuration and the recommendation engine behind the CLI and
//! the HTTP facade.
//!
//! `campaigns.json` (paths are relative to the file):
//!
//! ```json
//! {
//!   "catalog": "items.jsonl",
//!   "schema": "schema.json",
//!   "interactions": "sessions.tsv",
//!   "bandit_seed": 0,
//!   "models": {
//!     "mlp": {"type": "scorer", "model": "model.bin", "codes": "codes.bin", "recent": 1},
//!     "emb": {"type": "similarity", "embeddings": "emb.bin"}
//!   },
//!   "campaigns": [
//!     {"name": "home", "type": "personalized", "filter": "in_stock", "k": 10, "variants": ["mlp"]},
//!     {"name": "pdp", "type": "similar_items", "k": 5, "variants": ["emb"]}
//!   ]
//! }
//! ```
//!
//! `interactions` (a session file feeding the popularity fallback) and
//! `filter` are optional.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::bandit::BanditState;
use super::sessions::{read_sessions, Popularity, ProfileBuilder};
use super::similar::{top_k, SimilarityIndex};
use super::{PipelineError, Result};
use crate::embedding::{import_binary, NodeEmbeddings};
use crate::hashing::{fnv1a64, mix64};
use crate::iql::{
    compile, filter, load_catalog, CandidateSet, CatalogSchema, CompressedCatalog, TypedQuery,
};
use crate::scorer::{read_model, LogSketch, MlpConfig, MlpParams};
use crate::sketch::{read_item_codes, CodeSet, ItemCodes};
use crate::synth::Session;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecommendationType {
    SimilarItems,
    Personalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: RecommendationType,
    #[serde(default)]
    pub filter: Option<String>,
    pub k: usize,
    pub variants: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelSpec {
    Scorer {
        model: PathBuf,
        codes: PathBuf,
        #[serde(default = "default_recent")]
        recent: usize,
    },
    Similarity {
        embeddings: PathBuf,
    },
}

fn default_recent() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignsFile {
    pub catalog: PathBuf,
    pub schema: PathBuf,
    #[serde(default)]
    pub interactions: Option<PathBuf>,
    #[serde(default)]
    pub bandit_seed: u64,
    pub models: BTreeMap<String, ModelSpec>,
    pub campaigns: Vec<CampaignSpec>,
}

/// A scorer with its item codes mapped onto catalog positions.
#[derive(Debug, Clone)]
pub struct ScorerModel {
    pub config: MlpConfig,
    pub params: MlpParams,
    pub builder: ProfileBuilder,
    codes: Vec<Option<CodeSet>>,
}

#[derive(Debug, Clone)]
pub enum Model {
    Scorer(Box<ScorerModel>),
    Similarity(SimilarityIndex),
}

impl Model {
    pub fn scorer(
        config: MlpConfig,
        params: MlpParams,
        codes: &ItemCodes,
        recent: usize,
        catalog: &CompressedCatalog,
    ) -> Result<Self> {
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
        let codes = catalog
            .ids()
            .iter()
            .map(|id| codes.get(id).cloned())
            .collect();
        Ok(Model::Scorer(Box::new(ScorerModel {
            config,
            params,
            builder,
            codes,
        })))
    }

    pub fn similarity(emb: &NodeEmbeddings, catalog: &CompressedCatalog) -> Self {
        Model::Similarity(SimilarityIndex::aligned(emb, catalog.ids()))
    }
}

#[derive(Debug)]
pub struct Campaign {
    pub spec: CampaignSpec,
    pub query: Option<TypedQuery>,
    candidates: CandidateSet,
    bandit: Mutex<BanditState>,
}

impl Campaign {
    pub fn candidates(&self) -> &CandidateSet {
        &self.candidates
    }

    pub fn bandit(&self) -> BanditState {
        self.bandit.lock().expect("bandit lock").clone()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RecommendRequest {
    pub campaign: String,
    #[serde(default)]
    pub user: Option<String>,
    #[serde(default)]
    pub history: Vec<String>,
    /// Anchor item for similar-item campaigns; defaults to the last history item.
    #[serde(default)]
    pub item: Option<String>,
    #[serde(default)]
    pub k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredItem {
    pub id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub campaign: String,
    pub items: Vec<ScoredItem>,
    pub variant: Option<String>,
    pub reason: Option<String>,
}

pub const REASON_FILTER_EXHAUSTED: &str = "filter_exhausted";
pub const REASON_COLD_START: &str = "cold_start_popularity";

/// Immutable catalog and models plus per-campaign bandit state.
#[derive(Debug)]
pub struct Engine {
    catalog: CompressedCatalog,
    models: BTreeMap<String, Model>,
    campaigns: BTreeMap<String, Campaign>,
    popularity: Vec<(u32, f64)>,
}

fn campaign_seed(seed: u64, name: &str) -> u64 {
    mix64(seed ^ fnv1a64(name.as_bytes()))
}

impl Engine {
    /// Checks every campaign (filter compiles, variants exist and fit the
    /// campaign type) and precomputes its candidate set.
    pub fn new(
        catalog: CompressedCatalog,
        models: BTreeMap<String, Model>,
        specs: Vec<CampaignSpec>,
        interactions: &[Session],
        bandit_seed: u64,
    ) -> Result<Self> {
        let mut campaigns = BTreeMap::new();
        for spec in specs {
            if spec.k == 0 {
                return Err(PipelineError::Config(format!(
                    "campaign {:?}: k must be at least 1",
                    spec.name
                )));
            }
            for v in &spec.variants {
                let ok = matches!(
                    (models.get(v), spec.kind),
                    (Some(Model::Scorer(_)), RecommendationType::Personalized)
                        | (Some(Model::Similarity(_)), RecommendationType::SimilarItems)
                );
                if !ok {
                    return Err(PipelineError::Config(format!(
                        "campaign {:?}: variant {v:?} is missing or does not fit a {:?} campaign",
                        spec.name, spec.kind
                    )));
                }
            }
            let query = spec
                .filter
                .as_deref()
                .map(|f| compile(f, catalog.schema()))
                .transpose()?;
            let candidates = match &query {
                Some(q) => filter(&catalog, q)?,
                None => CandidateSet::all(catalog.len()),
            };
            let bandit = Mutex::new(BanditState::new(
                spec.variants.clone(),
                campaign_seed(bandit_seed, &spec.name),
            )?);
            if campaigns.contains_key(&spec.name) {
                return Err(PipelineError::Config(format!(
                    "duplicate campaign {:?}",
                    spec.name
                )));
            }
            campaigns.insert(
                spec.name.clone(),
                Campaign {
                    spec,
                    query,
                    candidates,
                    bandit,
                },
            );
        }
        let counts = Popularity::from_sessions(interactions);
        let mut popularity: Vec<(u32, f64)> = counts
            .ranked()
            .iter()
            .filter_map(|(id, c)| catalog.position(id).map(|p| (p, *c as f64)))
            .collect();
        let mut seen = vec![false; catalog.len()];
        popularity
            .iter()
            .for_each(|(p, _)| seen[*p as usize] = true);
        popularity.extend(
            (0..catalog.len() as u32)
                .filter(|&p| !seen[p as usize])
                .map(|p| (p, 0.0)),
        );
        let popularity = top_k(popularity, catalog.len());
        Ok(Self {
            catalog,
            models,
            campaigns,
            popularity,
        })
    }

    /// Loads everything named in a campaigns file.
    pub fn load(path: &Path) -> Result<Self> {
        let base = path.parent().unwrap_or(Path::new("."));
        let file: CampaignsFile = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        let open = |p: &Path| -> Result<BufReader<File>> {
            let full = base.join(p);
            File::open(&full)
                .map(BufReader::new)
                .map_err(|e| PipelineError::Config(format!("cannot open {}: {e}", full.display())))
        };
        let schema = CatalogSchema::from_json(&std::fs::read_to_string(base.join(&file.schema))?)?;
        let (catalog, stats) = load_catalog(open(&file.catalog)?, &schema)?;
        if stats.malformed > 0 {
            log::warn!("catalog: skipped {} malformed lines", stats.malformed);
        }
        let interactions = match &file.interactions {
            Some(p) => read_sessions(open(p)?)?.sessions,
            None => Vec::new(),
        };
        let mut models = BTreeMap::new();
        for (name, spec) in &file.models {
            let model = match spec {
                ModelSpec::Scorer {
                    model,
                    codes,
                    recent,
                } => {
                    let (config, params) = read_model(open(model)?)?;
                    let codes = read_item_codes(open(codes)?)?;
                    Model::scorer(config, params, &codes, *recent, &catalog)?
                }
                ModelSpec::Similarity { embeddings } => {
                    Model::similarity(&import_binary(open(embeddings)?)?, &catalog)
                }
            };
            models.insert(name.clone(), model);
        }
        Self::new(
            catalog,
            models,
            file.campaigns,
            &interactions,
            file.bandit_seed,
        )
    }

    pub fn catalog(&self) -> &CompressedCatalog {
        &self.catalog
    }

    pub fn campaign(&self, name: &str) -> Option<&Campaign> {
        self.campaigns.get(name)
    }

    pub fn campaign_names(&self) -> impl Iterator<Item = &str> {
        self.campaigns.keys().map(String::as_str)
    }

    fn items(&self, ranked: Vec<(u32, f64)>) -> Vec<ScoredItem> {
        ranked
            .into_iter()
            .map(|(p, score)| ScoredItem {
                id: self.catalog.ids()[p as usize].clone(),
                score,
            })
            .collect()
    }

    /// Filter, then profile, then variant choice, then scoring.
    ///
    /// An empty candidate set gives an empty answer with reason
    /// `filter_exhausted`. A request with no usable history (or anchor item)
    /// gets the unfiltered popularity ranking with reason
    /// `cold_start_popularity` and does not draw a variant.
    pub fn recommend(&self, req: &RecommendRequest) -> Result<Recommendation> {
        let campaign = self
            .campaigns
            .get(&req.campaign)
            .ok_or_else(|| PipelineError::UnknownCampaign(req.campaign.clone()))?;
        let k = req.k.unwrap_or(campaign.spec.k);
        if k == 0 {
            return Err(PipelineError::InvalidRequest("k must be at least 1".into()));
        }
        let answer = |items, variant: Option<&str>, reason: Option<&str>| Recommendation {
            campaign: campaign.spec.name.clone(),
            items,
            variant: variant.map(str::to_string),
            reason: reason.map(str::to_string),
        };
        if campaign.candidates.is_empty() {
            return Ok(answer(Vec::new(), None, Some(REASON_FILTER_EXHAUSTED)));
        }
        let history: Vec<u32> = req
            .history
            .iter()
            .filter_map(|h| self.catalog.position(h))
            .collect();
        let anchor = match (&req.item, campaign.spec.kind) {
            (Some(item), _) => Some(
                self.catalog
                    .position(item)
                    .ok_or_else(|| PipelineError::UnknownItem(item.clone()))?,
            ),
            (None, RecommendationType::SimilarItems) => history.last().copied(),
            (None, RecommendationType::Personalized) => None,
        };
        let cold = match campaign.spec.kind {
            RecommendationType::SimilarItems => anchor.is_none(),
            RecommendationType::Personalized => history.is_empty(),
        };
        if cold {
            let top = self.popularity.iter().take(k).copied().collect();
            return Ok(answer(self.items(top), None, Some(REASON_COLD_START)));
        }

        let variant = campaign
            .bandit
            .lock()
            .expect("bandit lock")
            .select_variant();
        let variant_name = &campaign.spec.variants[variant];
        let ranked = match &self.models[variant_name] {
            Model::Similarity(index) => {
                let q = anchor.expect("warm similar-items request has an anchor");
                if !index.present().get(q as usize) {
                    let top = self.popularity.iter().take(k).copied().collect();
                    return Ok(answer(self.items(top), None, Some(REASON_COLD_START)));
                }
                index.similar(q, k, Some(&campaign.candidates))?
            }
            Model::Scorer(m) => {
                let known: Vec<&CodeSet> = history
                    .iter()
                    .filter_map(|&p| m.codes[p as usize].as_ref())
                    .collect();
                if known.is_empty() {
                    let top = self.popularity.iter().take(k).copied().collect();
                    return Ok(answer(self.items(top), None, Some(REASON_COLD_START)));
                }
                let logs = LogSketch::new(&crate::scorer::forward(
                    &m.params,
                    &m.builder.input(&known)?,
                )?);
                let scored = campaign
                    .candidates
                    .iter()
                    .filter_map(|p| m.codes[p].as_ref().map(|c| Ok((p as u32, logs.score(c)?))))
                    .collect::<Result<Vec<_>>>()?;
                top_k(scored, k)
            }
        };
        Ok(answer(self.items(ranked), Some(variant_name), None))
    }

    /// Records a binary reward for a campaign's variant; returns its new
    /// `(alpha, beta)`.
    pub fn feedback(&self, campaign: &str, variant: &str, reward: u8) -> Result<(f64, f64)> {
        let c = self
            .campaigns
            .get(campaign)
            .ok_or_else(|| PipelineError::UnknownCampaign(campaign.to_string()))?;
        let mut bandit = c.bandit.lock().expect("bandit lock");
        let v = bandit
            .index_of(variant)
            .ok_or_else(|| PipelineError::UnknownVariant(variant.to_string()))?;
        let arm = bandit.record_feedback(v, reward)?;
        Ok((arm.alpha, arm.beta))
    }

    /// Popularity order over the whole catalog.
    pub fn popularity(&self) -> impl Iterator<Item = (&str, f64)> {
        self.popularity
            .iter()
            .map(|&(p, c)| (self.catalog.ids()[p as usize].as_str(), c))
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::iql::{AttrType, ItemRecord, Value};
    use crate::sketch::LayoutKey;

    pub(crate) fn small_engine(filter: Option<&str>) -> Engine {
        let schema = CatalogSchema::new([("price".to_string(), AttrType::Numeric)]).unwrap();
        let mut catalog = CompressedCatalog::empty(schema);
        for i in 0..6 {
            catalog
                .push(&ItemRecord {
                    id: format!("it{i}"),
                    values: vec![Some(Value::Number(i as f64))],
                })
                .unwrap();
        }
        let key = LayoutKey {
            depth: 2,
            bits: 2,
            input_dim: 2,
            seed: 0,
        };
        let labels: Vec<String> = (0..6).map(|i| format!("it{i}")).collect();
        let codes = ItemCodes::new(
            key,
            labels,
            (0..6u32)
                .map(|i| CodeSet::new(vec![i % 4, (i / 2) % 4]))
                .collect(),
        );
        let config = MlpConfig {
            hidden_size: 4,
            seed: 3,
            ..MlpConfig::new(2 * key.cells(), key)
        };
        let params = MlpParams::init(&config).unwrap();
        let mut models = BTreeMap::new();
        models.insert(
            "mlp".to_string(),
            Model::scorer(config, params, &codes, 1, &catalog).unwrap(),
        );
        let spec = CampaignSpec {
            name: "home".into(),
            kind: RecommendationType::Personalized,
            filter: filter.map(str::to_string),
            k: 3,
            variants: vec!["mlp".into()],
        };
        let interactions = vec![
            Session {
                id: "a".into(),
                items: vec!["it4".into(), "it4".into(), "it2".into()],
            },
            Session {
                id: "b".into(),
                items: vec!["it2".into()],
            },
        ];
        Engine::new(catalog, models, vec![spec], &interactions, 9).unwrap()
    }

    fn req(history: &[&str]) -> RecommendRequest {
        RecommendRequest {
            campaign: "home".into(),
            history: history.iter().map(|s| s.to_string()).collect(),
            ..Default::default()
        }
    }

    #[test]
    fn filter_exhausted() {
        let e = small_engine(Some("price > 100"));
        let r = e.recommend(&req(&["it1"])).unwrap();
        assert!(r.items.is_empty());
        assert_eq!(r.reason.as_deref(), Some(REASON_FILTER_EXHAUSTED));
    }

    #[test]
    fn cold_start_uses_popularity() {
        let e = small_engine(Some("price < 3"));
        let r = e.recommend(&req(&[])).unwrap();
        let ids: Vec<&str> = r.items.iter().map(|i| i.id.as_str()).collect();
        assert_eq!(ids, ["it2", "it4", "it0"]);
        assert_eq!(r.reason.as_deref(), Some(REASON_COLD_START));
        assert_eq!(r.variant, None);
    }

    #[test]
    fn personalized_respects_filter_and_k() {
        let e = small_engine(Some("price >= 2"));
        let r = e
            .recommend(&RecommendRequest {
                k: Some(2),
                ..req(&["it0", "it1"])
            })
            .unwrap();
        assert_eq!(r.items.len(), 2);
        assert!(r
            .items
            .iter()
            .all(|i| e.catalog().position(&i.id).unwrap() >= 2));
        assert_eq!(r.variant.as_deref(), Some("mlp"));
        assert!(r.items[0].score >= r.items[1].score);
    }

    #[test]
    fn unknown_campaign_and_feedback() {
        let e = small_engine(None);
        assert!(matches!(
            e.recommend(&RecommendRequest {
                campaign: "nope".into(),
                ..Default::default()
            }),
            Err(PipelineError::UnknownCampaign(_))
        ));
        assert_eq!(e.feedback("home", "mlp", 1).unwrap(), (2.0, 1.0));
        assert_eq!(e.feedback("home", "mlp", 0).unwrap(), (2.0, 2.0));
        assert!(e.feedback("home", "other", 1).is_err());
    }

    #[test]
    fn invalid_campaigns_rejected() {
        let e = small_engine(None);
        let bad = CampaignSpec {
            name: "x".into(),
            kind: RecommendationType::SimilarItems,
            filter: None,
            k: 1,
            variants: vec!["mlp".into()],
        };
        let models = e.models.clone();
        assert!(Engine::new(e.catalog.clone(), models.clone(), vec![bad.clone()], &[], 0).is_err());
        let bad_filter = CampaignSpec {
            kind: RecommendationType::Personalized,
            filter: Some("price >".into()),
            ..bad.clone()
        };
        assert!(Engine::new(e.catalog.clone(), models.clone(), vec![bad_filter], &[], 0).is_err());
        let zero_k = CampaignSpec {
            kind: RecommendationType::Personalized,
            k: 0,
            ..bad
        };
        assert!(Engine::new(e.catalog.clone(), models, vec![zero_k], &[], 0).is_err());
    }
}
