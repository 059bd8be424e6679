//! Building a judged collection: choosing topics, pooling, the judging state
//! machine with its stopping rules, topic eligibility and the final qrels.
//!
//! A topic goes through these phases:
//!
//! 1. `PoolJudging`: every document in the depth-k pool plus the sparse-judged
//!    documents (`P` of them) is judged, in doc id order.
//! 2. `FirstBatch`: `first_batch` more documents chosen by active learning.
//!    Then, with `R` relevant among `J` judged: stop if `2R < P`, discard if
//!    `R > max_ratio * J`, otherwise ask for `G = 2R + 100 - J` more.
//! 3. `Extension` round 0 judges those `G`. Stop if `2R + 100 < J`, discard on
//!    the ratio test, otherwise add `increment_factor * R` and keep going.
//! 4. Later `Extension` rounds stop once `2R < J`, with the same discard test.
//!
//! A per-topic cap and an exhausted global budget both finish a topic where
//! it stands.

mod learner;
mod session;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{reciprocal_rank, RelevancePolicy};
use crate::trec_io::{QrelsSet, RunFile, TopicId, TopicQrels};

pub use learner::{batch_seed, select_batch};
pub use session::{record_judgment, DecisionRecord, GradeEntry, JudgmentOutcome, JudgmentRecord, JudgmentStore, TopicSession};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum JudgingError {
    #[error("grade {0} is outside 0..=3")]
    GradeOutOfRange(i64),
    #[error("document `{doc}` was never issued for topic {topic}")]
    NotIssued { topic: TopicId, doc: String },
    #[error("document `{doc}` was already issued for topic {topic}")]
    AlreadyIssued { topic: TopicId, doc: String },
    #[error("topic {0} has no room left in the current batch")]
    BatchFull(TopicId),
    #[error("topic {0} is still in the middle of a batch")]
    MidBatch(TopicId),
    #[error("topic {0} is already {1}")]
    Terminal(TopicId, Phase),
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub pool_depth: usize,
    pub first_batch: usize,
    pub min_relevant: usize,
    pub max_ratio: f64,
    pub per_topic_cap: Option<usize>,
    pub increment_factor: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            pool_depth: 10,
            first_batch: 100,
            min_relevant: 3,
            max_ratio: 0.6,
            per_topic_cap: None,
            increment_factor: 1.0,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), JudgingError> {
        if self.pool_depth == 0 || self.first_batch == 0 || self.min_relevant == 0 {
            return Err(JudgingError::Config("pool_depth, first_batch and min_relevant must be positive".into()));
        }
        if !(self.max_ratio > 0.0 && self.max_ratio < 1.0) {
            return Err(JudgingError::Config(format!("max_ratio {} must lie in (0, 1)", self.max_ratio)));
        }
        if !(self.increment_factor > 0.0 && self.increment_factor.is_finite()) {
            return Err(JudgingError::Config("increment_factor must be positive".into()));
        }
        if self.per_topic_cap == Some(0) {
            return Err(JudgingError::Config("per_topic_cap must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    PoolJudging,
    FirstBatch,
    Extension,
    Finished,
    Discarded,
}

impl Phase {
    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::Finished | Phase::Discarded)
    }
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Phase::PoolJudging => "pool_judging",
            Phase::FirstBatch => "first_batch",
            Phase::Extension => "extension",
            Phase::Finished => "finished",
            Phase::Discarded => "discarded",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "decision", content = "next_batch")]
pub enum StoppingDecision {
    Continue(usize),
    Finished,
    Discarded,
}

/// Which stopping test applies at a batch boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Checkpoint {
    /// After the pool and the first active-learning batch.
    AfterFirstBatch,
    /// After the `G` documents of the first extension.
    AfterGap,
    /// After any later increment.
    AfterIncrement,
}

/// The stopping rules on bare counters. Caps and budgets are not considered.
pub fn stopping_rule(at: Checkpoint, p: usize, r: usize, j: usize, config: &SessionConfig) -> StoppingDecision {
    let discard = r as f64 > config.max_ratio * j as f64;
    match at {
        Checkpoint::AfterFirstBatch => {
            if 2 * r < p {
                StoppingDecision::Finished
            } else if discard {
                StoppingDecision::Discarded
            } else {
                StoppingDecision::Continue((2 * r + 100).saturating_sub(j))
            }
        }
        Checkpoint::AfterGap | Checkpoint::AfterIncrement => {
            let done = match at {
                Checkpoint::AfterGap => 2 * r + 100 < j,
                _ => 2 * r < j,
            };
            if done {
                StoppingDecision::Finished
            } else if discard {
                StoppingDecision::Discarded
            } else {
                StoppingDecision::Continue(increment(r, config))
            }
        }
    }
}

fn increment(r: usize, config: &SessionConfig) -> usize {
    ((config.increment_factor * r as f64).round() as usize).max(1)
}

/// Whether a topic's judgments make it into the evaluation set.
pub fn eligibility(relevant: usize, judged: usize, config: &SessionConfig) -> bool {
    judged > 0 && relevant >= config.min_relevant && (relevant as f64) < config.max_ratio * judged as f64
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Median reciprocal rank of the sparse positives across `runs`, per topic.
pub fn median_reciprocal_ranks(
    runs: &[RunFile],
    sparse: &QrelsSet,
    policy: &RelevancePolicy,
    cutoff: Option<usize>,
) -> Vec<(TopicId, f64)> {
    let empty = TopicQrels::new();
    sparse
        .topic_ids()
        .map(|t| {
            let q = sparse.topic(t).unwrap_or(&empty);
            let mut rrs: Vec<f64> = runs.iter().map(|r| reciprocal_rank(&r.ranked_docs(t), q, policy, cutoff)).collect();
            (t.clone(), median(&mut rrs))
        })
        .collect()
}

/// Topics that are neither trivially easy nor hopeless for the runs: median
/// RR `m` against the sparse labels with `0 < m <= 0.5`.
pub fn select_candidate_topics(runs: &[RunFile], sparse: &QrelsSet, policy: &RelevancePolicy) -> Vec<TopicId> {
    median_reciprocal_ranks(runs, sparse, policy, None)
        .into_iter()
        .filter(|&(_, m)| m > 0.0 && m <= 0.5)
        .map(|(t, _)| t)
        .collect()
}

/// Union of every run's top-`depth` documents and the sparse-judged documents,
/// in doc id order.
pub fn build_pool<'a>(
    runs: impl IntoIterator<Item = &'a RunFile>,
    depth: usize,
    sparse: &QrelsSet,
    topic: &TopicId,
) -> Vec<String> {
    let mut pool: BTreeSet<String> = BTreeSet::new();
    for run in runs {
        pool.extend(run.topic(topic).iter().take(depth.max(1)).map(|e| e.doc_id.clone()));
    }
    if let Some(q) = sparse.topic(topic) {
        pool.extend(q.iter().map(|(d, _)| d.to_owned()));
    }
    pool.into_iter().collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicStats {
    pub topic_id: TopicId,
    pub relevant: usize,
    pub judged: usize,
    pub phase: Phase,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicOutcome {
    #[serde(flatten)]
    pub stats: TopicStats,
    pub included: bool,
    pub reason: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalizeSummary {
    pub topics: Vec<TopicOutcome>,
    /// Judgments over all topics.
    pub total_judged: usize,
    /// Judgments over included topics.
    pub final_size: usize,
}

impl FinalizeSummary {
    pub fn included(&self) -> impl Iterator<Item = &TopicId> {
        self.topics.iter().filter(|t| t.included).map(|t| &t.stats.topic_id)
    }

    pub fn excluded(&self) -> impl Iterator<Item = &TopicId> {
        self.topics.iter().filter(|t| !t.included).map(|t| &t.stats.topic_id)
    }
}

/// Apply eligibility to per-topic counts.
pub fn summarize(stats: impl IntoIterator<Item = TopicStats>, config: &SessionConfig) -> FinalizeSummary {
    let mut topics: Vec<TopicOutcome> = stats
        .into_iter()
        .map(|s| {
            let reason = if s.phase == Phase::Discarded {
                Some("discarded while judging".to_owned())
            } else if s.relevant < config.min_relevant {
                Some(format!("fewer than {} relevant", config.min_relevant))
            } else if !eligibility(s.relevant, s.judged, config) {
                Some(format!("relevant/judged ratio is at least {}", config.max_ratio))
            } else {
                None
            };
            TopicOutcome {
                included: reason.is_none(),
                stats: s,
                reason,
            }
        })
        .collect();
    topics.sort_by(|a, b| a.stats.topic_id.cmp(&b.stats.topic_id));
    FinalizeSummary {
        total_judged: topics.iter().map(|t| t.stats.judged).sum(),
        final_size: topics.iter().filter(|t| t.included).map(|t| t.stats.judged).sum(),
        topics,
    }
}

/// Every latest judgment of every included topic, plus the summary.
pub fn finalize_qrels(store: &JudgmentStore, sessions: &[TopicSession], config: &SessionConfig) -> (QrelsSet, FinalizeSummary) {
    let summary = summarize(sessions.iter().map(TopicSession::stats), config);
    let mut qrels = QrelsSet::new();
    for s in sessions {
        if !summary.included().any(|t| t == &s.topic_id) {
            continue;
        }
        let mut q = TopicQrels::new();
        for doc in s.judged_docs() {
            let grade = store.grade(&s.topic_id, doc).or_else(|| s.grade(doc)).expect("judged doc has a grade");
            q.set(doc, grade);
        }
        qrels.insert_topic(s.topic_id.clone(), q);
    }
    (qrels, summary)
}
