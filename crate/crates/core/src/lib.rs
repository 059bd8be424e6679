//! Building, scoring and stress-testing pooled ad hoc retrieval test collections.
//!
//! The crate covers the whole life of a collection:
//!
//! * [`trec_io`]: corpora, topics, runs and qrels in the usual TREC text formats
//! * [`baseline_search`]: an in-memory BM25 index with RM3 expansion for baseline runs
//! * [`judging`]: topic selection, depth-k pooling and the active-learning judging
//!   process with its stopping and eligibility rules
//! * [`relevance_model`]: the classifier that picks the next document to judge
//! * [`metrics`]: NDCG, NCG, RR, AP and P@10 under task-specific relevance policies
//! * [`rank_analysis`]: Kendall's tau, maximum drop and other system-ranking comparisons
//! * [`simulation`]: replaying the judging process against known judgments for
//!   leave-out-uniques and stopping-rule experiments
//!
//! Numeric code in `metrics`, `rank_analysis` and `baseline_search` is generic over
//! [`Scalar`] (`f32` or `f64`); the aliases below fix it to `f64`.

pub mod baseline_search;
pub mod judging;
pub mod metrics;
pub mod rank_analysis;
pub mod relevance_model;
pub mod scalar;
pub mod simulation;
pub mod synthetic;
pub mod trec_io;

pub use scalar::Scalar;

pub type MetricReport = metrics::MetricReport<f64>;
pub type TopicMetrics = metrics::TopicMetrics<f64>;
pub type SystemRanking = rank_analysis::SystemRanking<f64>;
pub type Bm25Params = baseline_search::Bm25Params<f64>;
pub type Rm3Params = baseline_search::Rm3Params<f64>;
