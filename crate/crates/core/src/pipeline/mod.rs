//! Recommendation facade: campaigns, variant selection, recommendation
//! flows, offline evaluation, analytics and the HTTP service.

mod analytics;
mod bandit;
mod engine;
mod fit;
mod metrics;
mod ranker;
pub mod serve;
mod sessions;
mod similar;

use thiserror::Error;

use crate::codec::FormatError;
use crate::embedding::EmbedError;
use crate::graph::GraphError;
use crate::iql::IqlError;
use crate::scorer::ScorerError;
use crate::sketch::SketchError;

pub use self::analytics::{report, AnalyticsAggregate, CampaignStats, Counts};
pub use self::bandit::{simulate, Arm, BanditState};
pub use self::engine::{
    Campaign, CampaignSpec, CampaignsFile, Engine, Model, ModelSpec, RecommendRequest,
    Recommendation, RecommendationType, ScoredItem, ScorerModel, REASON_COLD_START,
    REASON_FILTER_EXHAUSTED,
};
pub use self::fit::{fit_sessions, session_hyperedges, FitConfig, FittedScorer};
pub use self::metrics::{evaluate, session_metrics, EvalReport, EvalSession, SessionMetrics};
pub use self::ranker::ScorerRanker;
pub use self::sessions::{
    hold_out_last, parse_timestamp, read_sessions, session_examples, ExampleMode, Popularity,
    ProfileBuilder, SessionLog, PROFILE_VIEWS,
};
pub use self::similar::{similar_items, top_k, SimilarityIndex};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("no variants configured")]
    EmptyVariants,
    #[error("unknown variant {0:?}")]
    UnknownVariant(String),
    #[error("unknown campaign {0:?}")]
    UnknownCampaign(String),
    #[error("unknown item {0:?}")]
    UnknownItem(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("no sessions to evaluate")]
    EmptySessions,
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Iql(#[from] IqlError),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error(transparent)]
    Sketch(#[from] SketchError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PipelineError>;
