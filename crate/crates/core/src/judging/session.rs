use std::collections::BTreeMap;

use indexmap::{IndexMap, IndexSet};
use serde::{Deserialize, Serialize};

use super::{
    learner::{batch_seed, select_batch},
    stopping_rule, Checkpoint, JudgingError, Phase, SessionConfig, StoppingDecision, TopicStats,
};
use crate::metrics::RelevancePolicy;
use crate::relevance_model::Scorer;
use crate::trec_io::{Grade, TopicId};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradeEntry {
    pub grade: Grade,
    /// Caller-supplied time, e.g. milliseconds since the epoch or a sequence number.
    pub at: u64,
}

/// Every grade ever given to one (topic, doc); the last one counts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgmentRecord {
    pub history: Vec<GradeEntry>,
}

impl JudgmentRecord {
    pub fn grade(&self) -> Grade {
        self.history.last().expect("a record holds at least one grade").grade
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgmentStore {
    topics: BTreeMap<TopicId, IndexMap<String, JudgmentRecord>>,
}

impl JudgmentStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the previous grade, if any.
    pub fn record(&mut self, topic: &TopicId, doc: &str, grade: Grade, at: u64) -> Option<Grade> {
        let entry = GradeEntry { grade, at };
        let docs = self.topics.entry(topic.clone()).or_default();
        match docs.get_mut(doc) {
            Some(r) => {
                let prev = r.grade();
                r.history.push(entry);
                Some(prev)
            }
            None => {
                docs.insert(doc.to_owned(), JudgmentRecord { history: vec![entry] });
                None
            }
        }
    }

    pub fn grade(&self, topic: &TopicId, doc: &str) -> Option<Grade> {
        self.get(topic, doc).map(JudgmentRecord::grade)
    }

    pub fn get(&self, topic: &TopicId, doc: &str) -> Option<&JudgmentRecord> {
        self.topics.get(topic).and_then(|d| d.get(doc))
    }

    pub fn topic(&self, topic: &TopicId) -> impl Iterator<Item = (&str, &JudgmentRecord)> {
        self.topics.get(topic).into_iter().flat_map(|d| d.iter().map(|(k, v)| (k.as_str(), v)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "previous")]
pub enum JudgmentOutcome {
    New,
    Revision(Grade),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub checkpoint: Option<Checkpoint>,
    pub judged: usize,
    pub relevant: usize,
    pub decision: StoppingDecision,
}

/// Live judging state of one topic. Serialises to JSON as a snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicSession {
    pub topic_id: TopicId,
    pub query: String,
    config: SessionConfig,
    policy: RelevancePolicy,
    pool: Vec<String>,
    issued: IndexSet<String>,
    judged: IndexMap<String, Grade>,
    relevant: usize,
    phase: Phase,
    /// Extension rounds entered so far.
    rounds: usize,
    gap: Option<usize>,
    phase_issue_start: usize,
    phase_quota: usize,
    next_batch: usize,
    batches: usize,
    exhausted: bool,
    decisions: Vec<DecisionRecord>,
}

impl TopicSession {
    /// Start a topic. Every pool document is issued at once, in doc id order.
    pub fn new(
        topic_id: TopicId,
        query: impl Into<String>,
        pool: impl IntoIterator<Item = String>,
        policy: RelevancePolicy,
        config: SessionConfig,
    ) -> Result<Self, JudgingError> {
        config.validate()?;
        let mut pool: Vec<String> = pool.into_iter().collect();
        pool.sort();
        pool.dedup();
        let mut s = Self {
            topic_id,
            query: query.into(),
            config,
            policy,
            issued: pool.iter().cloned().collect(),
            phase_quota: pool.len(),
            pool,
            judged: IndexMap::new(),
            relevant: 0,
            phase: Phase::PoolJudging,
            rounds: 0,
            gap: None,
            phase_issue_start: 0,
            next_batch: 1,
            batches: 0,
            exhausted: false,
            decisions: Vec::new(),
        };
        s.leave_pool_if_done();
        Ok(s)
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn policy(&self) -> &RelevancePolicy {
        &self.policy
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn pool(&self) -> &[String] {
        &self.pool
    }

    /// `P`
    pub fn pool_size(&self) -> usize {
        self.pool.len()
    }

    /// `R`: binary-relevant judged documents under their latest grades.
    pub fn relevant(&self) -> usize {
        self.relevant
    }

    /// `J`
    pub fn judged_count(&self) -> usize {
        self.judged.len()
    }

    /// `G`, once the first checkpoint has asked for it.
    pub fn gap(&self) -> Option<usize> {
        self.gap
    }

    pub fn issued(&self) -> impl Iterator<Item = &str> {
        self.issued.iter().map(String::as_str)
    }

    pub fn judged_docs(&self) -> impl Iterator<Item = &str> {
        self.judged.keys().map(String::as_str)
    }

    pub fn judgments(&self) -> &IndexMap<String, Grade> {
        &self.judged
    }

    pub fn grade(&self, doc: &str) -> Option<Grade> {
        self.judged.get(doc).copied()
    }

    pub fn decisions(&self) -> &[DecisionRecord] {
        &self.decisions
    }

    /// Issued documents still waiting for a grade, in issue order.
    pub fn pending(&self) -> impl Iterator<Item = &str> {
        self.issued.iter().filter(|d| !self.judged.contains_key(*d)).map(String::as_str)
    }

    pub fn stats(&self) -> TopicStats {
        TopicStats {
            topic_id: self.topic_id.clone(),
            relevant: self.relevant,
            judged: self.judged.len(),
            phase: self.phase,
        }
    }

    /// Documents the current phase may still issue.
    pub fn remaining_to_issue(&self) -> usize {
        if self.phase.is_terminal() {
            return 0;
        }
        self.phase_quota.saturating_sub(self.issued.len() - self.phase_issue_start)
    }

    /// `(issued so far, quota)` for the current phase.
    pub fn phase_progress(&self) -> (usize, usize) {
        (self.issued.len() - self.phase_issue_start, self.phase_quota)
    }

    /// The current phase has issued its quota and every issued document is judged.
    pub fn batch_complete(&self) -> bool {
        !self.phase.is_terminal() && self.remaining_to_issue() == 0 && self.pending().next().is_none()
    }

    pub fn issue(&mut self, doc: &str) -> Result<(), JudgingError> {
        if self.phase.is_terminal() {
            return Err(JudgingError::Terminal(self.topic_id.clone(), self.phase));
        }
        if self.issued.contains(doc) {
            return Err(JudgingError::AlreadyIssued {
                topic: self.topic_id.clone(),
                doc: doc.to_owned(),
            });
        }
        if self.remaining_to_issue() == 0 {
            return Err(JudgingError::BatchFull(self.topic_id.clone()));
        }
        self.issued.insert(doc.to_owned());
        Ok(())
    }

    /// Store a grade for an issued document. Re-grading a judged document is
    /// a revision: `J` stays, `R` is recounted. Revisions are accepted in any
    /// phase, including terminal ones.
    pub fn record(&mut self, doc: &str, grade: Grade) -> Result<JudgmentOutcome, JudgingError> {
        if !self.issued.contains(doc) {
            return Err(JudgingError::NotIssued {
                topic: self.topic_id.clone(),
                doc: doc.to_owned(),
            });
        }
        let outcome = match self.judged.insert(doc.to_owned(), grade) {
            Some(prev) => JudgmentOutcome::Revision(prev),
            None => JudgmentOutcome::New,
        };
        if let JudgmentOutcome::Revision(prev) = outcome {
            if self.policy.is_relevant(Some(prev)) {
                self.relevant -= 1;
            }
        }
        if self.policy.is_relevant(Some(grade)) {
            self.relevant += 1;
        }
        self.leave_pool_if_done();
        Ok(outcome)
    }

    fn leave_pool_if_done(&mut self) {
        if self.phase == Phase::PoolJudging && self.pending().next().is_none() {
            let room = self.room(self.config.first_batch);
            self.enter(Phase::FirstBatch, room);
        }
    }

    /// Clip a quota to the per-topic cap.
    fn room(&self, wanted: usize) -> usize {
        match self.config.per_topic_cap {
            Some(cap) => wanted.min(cap.saturating_sub(self.issued.len())),
            None => wanted,
        }
    }

    fn enter(&mut self, phase: Phase, quota: usize) {
        self.phase = phase;
        self.phase_issue_start = self.issued.len();
        self.phase_quota = quota;
    }

    fn checkpoint(&self) -> Checkpoint {
        match (self.phase, self.rounds) {
            (Phase::FirstBatch, _) => Checkpoint::AfterFirstBatch,
            (Phase::Extension, 1) => Checkpoint::AfterGap,
            _ => Checkpoint::AfterIncrement,
        }
    }

    /// The decision due at the end of the current batch.
    pub fn check_stopping(&self) -> Result<StoppingDecision, JudgingError> {
        if self.phase.is_terminal() {
            return Err(JudgingError::Terminal(self.topic_id.clone(), self.phase));
        }
        if !self.batch_complete() {
            return Err(JudgingError::MidBatch(self.topic_id.clone()));
        }
        let j = self.judged.len();
        if self.config.per_topic_cap.is_some_and(|cap| j >= cap) {
            return Ok(StoppingDecision::Finished);
        }
        let decision = stopping_rule(self.checkpoint(), self.pool.len(), self.relevant, j, &self.config);
        Ok(match decision {
            StoppingDecision::Continue(_) if self.exhausted => StoppingDecision::Finished,
            StoppingDecision::Continue(n) => StoppingDecision::Continue(self.room(n)),
            other => other,
        })
    }

    pub fn apply(&mut self, decision: StoppingDecision) -> Result<(), JudgingError> {
        if self.phase.is_terminal() {
            return Err(JudgingError::Terminal(self.topic_id.clone(), self.phase));
        }
        if !self.batch_complete() {
            return Err(JudgingError::MidBatch(self.topic_id.clone()));
        }
        self.decisions.push(DecisionRecord {
            checkpoint: Some(self.checkpoint()),
            judged: self.judged.len(),
            relevant: self.relevant,
            decision,
        });
        match decision {
            StoppingDecision::Continue(n) => {
                if self.phase == Phase::FirstBatch {
                    self.gap = Some(n);
                }
                self.rounds += 1;
                self.enter(Phase::Extension, n);
            }
            StoppingDecision::Finished => self.phase = Phase::Finished,
            StoppingDecision::Discarded => self.phase = Phase::Discarded,
        }
        Ok(())
    }

    /// If the current batch is complete, decide and apply.
    pub fn advance(&mut self) -> Result<Option<StoppingDecision>, JudgingError> {
        if !self.batch_complete() {
            return Ok(None);
        }
        let d = self.check_stopping()?;
        self.apply(d)?;
        Ok(Some(d))
    }

    /// Nothing is left to judge: the current batch ends with what was issued
    /// and the topic finishes at its next checkpoint instead of continuing.
    pub fn exhaust(&mut self) {
        self.exhausted = true;
        if !self.phase.is_terminal() && self.phase != Phase::PoolJudging {
            self.phase_quota = self.issued.len() - self.phase_issue_start;
        }
    }

    /// Out of assessor time: finish where the topic stands.
    pub fn finish_for_budget(&mut self) {
        if !self.phase.is_terminal() {
            self.decisions.push(DecisionRecord {
                checkpoint: None,
                judged: self.judged.len(),
                relevant: self.relevant,
                decision: StoppingDecision::Finished,
            });
            self.phase = Phase::Finished;
        }
    }

    /// Issue the next active-learning batch if the queue is empty and the
    /// phase has room. Batch sizes grow by a tenth each time, starting at 1.
    /// Returns the number of documents issued.
    pub fn fill<S: Scorer + ?Sized>(&mut self, scorer: &S, universe: &[String], seed: u64) -> usize {
        if self.phase.is_terminal() || self.pending().next().is_some() {
            return 0;
        }
        let n = self.next_batch.min(self.remaining_to_issue());
        if n == 0 {
            return 0;
        }
        let batch = select_batch(
            scorer,
            &self.query,
            &self.judged,
            &self.policy,
            universe,
            &self.issued,
            n,
            batch_seed(seed, self.batches),
        );
        if batch.is_empty() {
            self.exhaust();
            return 0;
        }
        self.batches += 1;
        self.next_batch += self.next_batch.div_ceil(10);
        let issued = batch.len();
        self.issued.extend(batch);
        issued
    }

    /// The document the assessor should judge next, or `None` once the
    /// topic is terminal. Asking again without judging returns the same
    /// document. Stopping decisions are taken automatically at batch ends.
    pub fn next_document<S: Scorer + ?Sized>(
        &mut self,
        scorer: &S,
        universe: &[String],
        seed: u64,
    ) -> Result<Option<String>, JudgingError> {
        loop {
            if let Some(d) = self.pending().next() {
                return Ok(Some(d.to_owned()));
            }
            if self.phase.is_terminal() {
                return Ok(None);
            }
            if self.batch_complete() {
                self.advance()?;
            } else {
                self.fill(scorer, universe, seed);
            }
        }
    }
}

/// Validate the grade, update the session and append to the store.
pub fn record_judgment(
    store: &mut JudgmentStore,
    session: &mut TopicSession,
    doc: &str,
    grade: i64,
    at: u64,
) -> Result<JudgmentOutcome, JudgingError> {
    let grade = Grade::try_from(grade).map_err(|_| JudgingError::GradeOutOfRange(grade))?;
    let outcome = session.record(doc, grade)?;
    store.record(&session.topic_id, doc, grade, at);
    Ok(outcome)
}
