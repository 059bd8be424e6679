//! Request and response bodies. Every body carries `schema_version`.

use serde::{Deserialize, Serialize};
use trecdl::judging::{DecisionRecord, FinalizeSummary, Phase, SessionConfig, TopicSession};
use trecdl::trec_io::{CorpusRecord, TaskKind, TopicId};

pub const SCHEMA_VERSION: u32 = 1;

/// How the topics of a new session are chosen from the topics file.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopicSelection {
    /// Keep topics whose median reciprocal rank of the sparse positives is in (0, 0.5].
    #[default]
    MedianRr,
    All,
}

/// `POST /sessions`. Paths are absolute or relative to the data directory.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CreateSessionRequest {
    pub schema_version: u32,
    pub task: TaskKind,
    pub corpus: String,
    pub runs: Vec<String>,
    pub topics: String,
    pub sparse_qrels: String,
    #[serde(default)]
    pub config: Option<SessionConfig>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub topic_selection: TopicSelection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicStatus {
    pub topic_id: TopicId,
    pub query: String,
    pub phase: Phase,
    pub pool_size: usize,
    pub relevant: usize,
    pub judged: usize,
    /// `relevant / judged`, 0 before the first judgment.
    pub ratio: f64,
    pub gap: Option<usize>,
    /// Issued documents still waiting for a grade.
    pub pending: usize,
}

impl TopicStatus {
    pub fn of(s: &TopicSession) -> Self {
        let judged = s.judged_count();
        Self {
            topic_id: s.topic_id.clone(),
            query: s.query.clone(),
            phase: s.phase(),
            pool_size: s.pool_size(),
            relevant: s.relevant(),
            judged,
            ratio: if judged == 0 { 0.0 } else { s.relevant() as f64 / judged as f64 },
            gap: s.gap(),
            pending: s.pending().count(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub total_judged: usize,
    pub final_size: usize,
    pub included_topics: usize,
    /// Some topic is still being judged.
    pub partial: bool,
}

impl Totals {
    pub fn of(summary: &FinalizeSummary) -> Self {
        Self {
            total_judged: summary.total_judged,
            final_size: summary.final_size,
            included_topics: summary.included().count(),
            partial: summary.topics.iter().any(|t| !t.stats.phase.is_terminal()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionHandle {
    pub schema_version: u32,
    pub session_id: String,
    pub task: TaskKind,
    pub seed: u64,
    pub config: SessionConfig,
    pub topics: Vec<TopicStatus>,
    pub totals: Totals,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionList {
    pub schema_version: u32,
    pub sessions: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    /// `title`, `url`, `body` or `passage`.
    pub kind: String,
    pub text: String,
}

pub fn render(record: &CorpusRecord) -> Vec<Segment> {
    let seg = |kind: &str, text: &str| Segment {
        kind: kind.to_owned(),
        text: text.to_owned(),
    };
    match record {
        CorpusRecord::Document(d) => vec![seg("title", &d.title), seg("url", &d.url), seg("body", &d.body)],
        CorpusRecord::Passage(p) => vec![seg("passage", &p.text)],
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub phase: Phase,
    /// 1-based position of the document among those issued in this phase.
    pub index: usize,
    /// Documents the phase may issue in total.
    pub quota: usize,
}

/// `GET /sessions/{id}/topics/{t}/next`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NextDocument {
    pub schema_version: u32,
    pub session_id: String,
    pub topic_id: TopicId,
    pub doc_id: String,
    pub segments: Vec<Segment>,
    pub position: Position,
    pub status: TopicStatus,
}

/// `POST` (new) and `PATCH` (revision) `/sessions/{id}/judgments`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JudgmentRequest {
    pub schema_version: u32,
    pub topic_id: TopicId,
    pub doc_id: String,
    pub grade: i64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    New,
    Revision,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JudgmentResponse {
    pub schema_version: u32,
    pub outcome: Outcome,
    pub previous_grade: Option<u8>,
    pub status: TopicStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub grade: u8,
    /// Event sequence number of the judgment.
    pub at: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JudgedDocument {
    pub doc_id: String,
    pub grade: u8,
    pub history: Vec<HistoryEntry>,
}

/// `GET /sessions/{id}/topics/{t}`: status plus the judgment history panel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicDetail {
    pub schema_version: u32,
    pub status: TopicStatus,
    pub judgments: Vec<JudgedDocument>,
    pub decisions: Vec<DecisionRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryResponse {
    pub schema_version: u32,
    pub totals: Totals,
    pub summary: FinalizeSummary,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleLevel {
    pub grade: u8,
    pub label: String,
    pub description: String,
}

/// Grade labels shown to assessors. Overridable per task with
/// `<data dir>/scale-<task>.json` holding this same shape.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scale {
    pub schema_version: u32,
    pub task: TaskKind,
    /// Lowest grade that counts as relevant for this task.
    pub relevant_from: u8,
    pub levels: Vec<ScaleLevel>,
}

impl Scale {
    pub fn default_for(task: TaskKind) -> Self {
        let unit = match task {
            TaskKind::Document => "document",
            TaskKind::Passage => "passage",
        };
        let level = |grade: u8, label: &str, description: String| ScaleLevel {
            grade,
            label: label.to_owned(),
            description,
        };
        Self {
            schema_version: SCHEMA_VERSION,
            task,
            relevant_from: trecdl::metrics::RelevancePolicy::for_task(task).binary_threshold,
            levels: vec![
                level(0, "Irrelevant", format!("The {unit} has nothing to do with the question.")),
                level(1, "Related", format!("The {unit} is on topic but does not help answer the question.")),
                level(2, "Highly relevant", format!("The {unit} helps answer the question, partly or with effort.")),
                level(3, "Perfectly relevant", format!("The {unit} is focused on the question and answers it.")),
            ],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub schema_version: u32,
    pub error: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub status: Option<TopicStatus>,
}
