//! One judging session: per-topic state behind its own lock, a shared
//! judgment store and an append-only event log.
//!
//! The log holds one JSON object per line:
//!
//! * `created`: the resolved setup (task, corpus path, seed, config, topics with their pools)
//! * `issued`: a `next` request changed a topic, with the documents it issued
//! * `judged`: a grade, with `revision` set for re-grades
//!
//! Replaying the log re-runs the same steps. Document selection is
//! deterministic, so every `issued` line must reproduce exactly.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, MutexGuard};

use serde::{Deserialize, Serialize};
use trecdl::judging::{
    build_pool, finalize_qrels, record_judgment, select_candidate_topics, FinalizeSummary, JudgingError, JudgmentStore,
    Phase, SessionConfig, TopicSession,
};
use trecdl::metrics::RelevancePolicy;
use trecdl::relevance_model::{FeatureSpace, TfIdfLogistic};
use trecdl::simulation::topic_seed;
use trecdl::trec_io::{
    parse_qrels, parse_run, parse_topics, write_qrels, Corpus, Grade, MemoryCorpus, TaskKind, TopicId,
};

use crate::api::{
    self, CreateSessionRequest, HistoryEntry, JudgedDocument, JudgmentRequest, JudgmentResponse, NextDocument, Outcome,
    Position, SessionHandle, TopicDetail, TopicSelection, TopicStatus, Totals, SCHEMA_VERSION,
};
use crate::error::ServiceError;

pub const LOG_FILE: &str = "events.jsonl";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicSetup {
    pub topic_id: TopicId,
    pub query: String,
    pub pool: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Created {
    pub session_id: String,
    pub task: TaskKind,
    pub corpus: PathBuf,
    pub seed: u64,
    pub config: SessionConfig,
    pub topics: Vec<TopicSetup>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Created(Created),
    Issued {
        topic_id: TopicId,
        docs: Vec<String>,
        phase: Phase,
    },
    Judged {
        topic_id: TopicId,
        doc_id: String,
        grade: Grade,
        revision: bool,
    },
}

#[derive(Serialize, Deserialize)]
struct LogLine {
    seq: u64,
    #[serde(flatten)]
    event: Event,
}

struct EventLog {
    file: File,
    next_seq: u64,
}

impl EventLog {
    fn append(&mut self, event: Event) -> Result<u64, ServiceError> {
        let seq = self.next_seq;
        let mut line = serde_json::to_vec(&LogLine { seq, event }).map_err(|e| ServiceError::Internal(e.to_string()))?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.flush()?;
        self.next_seq += 1;
        Ok(seq)
    }
}

pub struct LiveSession {
    pub id: String,
    created: Created,
    corpus: MemoryCorpus,
    scorer: TfIdfLogistic,
    universe: Vec<String>,
    topics: BTreeMap<TopicId, Mutex<TopicSession>>,
    store: Mutex<JudgmentStore>,
    log: Mutex<EventLog>,
}

fn lock<T>(m: &Mutex<T>) -> Result<MutexGuard<'_, T>, ServiceError> {
    m.lock().map_err(|_| ServiceError::Internal("a previous request panicked while holding this lock".into()))
}

fn bad(what: &str, e: impl std::fmt::Display) -> ServiceError {
    ServiceError::BadRequest(format!("{what}: {e}"))
}

fn resolve(data_dir: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        data_dir.join(p)
    }
}

fn judging_conflict(e: JudgingError, status: Option<TopicStatus>) -> ServiceError {
    let code = match e {
        JudgingError::NotIssued { .. } => "not_issued",
        JudgingError::Terminal(..) => "topic_terminal",
        JudgingError::GradeOutOfRange(_) => return ServiceError::Unprocessable(e.to_string()),
        _ => "judging_state",
    };
    ServiceError::conflict(code, e.to_string(), status)
}

/// The topic after serving one `next` request: the document to show and the
/// documents newly issued on the way.
struct Step {
    session: TopicSession,
    doc: Option<String>,
    issued: Vec<String>,
}

/// Apply stopping decisions while the current batch is complete.
fn settle(s: &mut TopicSession) -> Result<(), JudgingError> {
    while s.batch_complete() {
        s.advance()?;
    }
    Ok(())
}

impl LiveSession {
    /// Validate a create request and resolve it into the `created` event.
    pub fn prepare(
        id: String,
        req: &CreateSessionRequest,
        data_dir: &Path,
    ) -> Result<(Created, MemoryCorpus), ServiceError> {
        if req.schema_version != SCHEMA_VERSION {
            return Err(ServiceError::SchemaVersion(req.schema_version));
        }
        if req.runs.is_empty() {
            return Err(ServiceError::BadRequest("at least one run is required".into()));
        }
        let config = req.config.unwrap_or_default();
        config.validate().map_err(|e| bad("config", e))?;
        let runs = req
            .runs
            .iter()
            .map(|p| parse_run(&resolve(data_dir, p)).map(|(r, _)| r).map_err(|e| bad("run", e)))
            .collect::<Result<Vec<_>, _>>()?;
        let topics: BTreeMap<TopicId, String> = parse_topics(&resolve(data_dir, &req.topics))
            .map_err(|e| bad("topics", e))?
            .into_iter()
            .map(|t| (t.topic_id, t.text))
            .collect();
        let sparse = parse_qrels(&resolve(data_dir, &req.sparse_qrels)).map_err(|e| bad("sparse qrels", e))?;
        let corpus_path = resolve(data_dir, &req.corpus);
        let corpus = MemoryCorpus::load(&corpus_path, req.task).map_err(|e| bad("corpus", e))?;

        let chosen: Vec<TopicId> = match req.topic_selection {
            TopicSelection::MedianRr => select_candidate_topics(&runs, &sparse, &RelevancePolicy::sparse(req.task)),
            TopicSelection::All => topics.keys().cloned().collect(),
        };
        let mut setups = Vec::new();
        for t in chosen {
            let Some(query) = topics.get(&t) else { continue };
            let pool = build_pool(&runs, config.pool_depth, &sparse, &t);
            if let Some(missing) = pool.iter().find(|d| corpus.record(d).is_none()) {
                return Err(ServiceError::BadRequest(format!("pool document `{missing}` of topic {t} is not in the corpus")));
            }
            setups.push(TopicSetup {
                topic_id: t,
                query: query.clone(),
                pool,
            });
        }
        if setups.is_empty() {
            return Err(ServiceError::BadRequest("no candidate topics".into()));
        }
        setups.sort_by(|a, b| a.topic_id.cmp(&b.topic_id));
        let created = Created {
            session_id: id,
            task: req.task,
            corpus: corpus_path,
            seed: req.seed,
            config,
            topics: setups,
        };
        Ok((created, corpus))
    }

    /// Start a new session in `dir`, writing its first log line.
    pub fn create(dir: &Path, created: Created, corpus: MemoryCorpus) -> Result<Self, ServiceError> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(LOG_FILE);
        let file = OpenOptions::new().create_new(true).append(true).open(&path)?;
        let mut log = EventLog { file, next_seq: 0 };
        log.append(Event::Created(created.clone()))?;
        Self::build(created, corpus, log).map_err(|e| match e {
            ServiceError::Replay { message, .. } => ServiceError::BadRequest(message),
            e => e,
        })
    }

    fn build(created: Created, corpus: MemoryCorpus, log: EventLog) -> Result<Self, ServiceError> {
        let replay = |message: String| ServiceError::Replay {
            path: created.session_id.clone(),
            message,
        };
        let policy = RelevancePolicy::for_task(created.task);
        let topics = created
            .topics
            .iter()
            .map(|t| {
                TopicSession::new(t.topic_id.clone(), t.query.clone(), t.pool.iter().cloned(), policy.clone(), created.config)
                    .map(|s| (t.topic_id.clone(), Mutex::new(s)))
                    .map_err(|e| replay(e.to_string()))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            id: created.session_id.clone(),
            scorer: TfIdfLogistic::new(FeatureSpace::from_corpus(&corpus)),
            universe: corpus.ids(),
            corpus,
            created,
            topics,
            store: Mutex::new(JudgmentStore::new()),
            log: Mutex::new(log),
        })
    }

    /// Rebuild a session from its event log.
    pub fn open(dir: &Path) -> Result<Self, ServiceError> {
        let path = dir.join(LOG_FILE);
        let err = |message: String| ServiceError::Replay {
            path: path.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(&path)?;
        let complete = text.ends_with('\n');
        let raw: Vec<&str> = text.lines().collect();
        let mut lines = Vec::with_capacity(raw.len());
        for (i, l) in raw.iter().enumerate() {
            match serde_json::from_str::<LogLine>(l) {
                Ok(line) => lines.push(line),
                // a torn final write from a crash is dropped
                Err(_) if i + 1 == raw.len() && !complete => {}
                Err(e) => return Err(err(format!("line {}: {e}", i + 1))),
            }
        }
        let parsed = lines.len();
        let mut lines = lines.into_iter();
        let Some(LogLine {
            event: Event::Created(created),
            ..
        }) = lines.next()
        else {
            return Err(err("first line is not a `created` event".into()));
        };
        // rewrite without a torn tail so appends start on a fresh line
        if !complete {
            let keep: String = raw[..parsed].iter().map(|l| format!("{l}\n")).collect();
            std::fs::write(&path, keep)?;
        }
        let file = OpenOptions::new().append(true).open(&path)?;
        let corpus = MemoryCorpus::load(&created.corpus, created.task).map_err(|e| err(e.to_string()))?;
        let mut session = Self::build(created, corpus, EventLog { file, next_seq: 1 })?;
        let mut next_seq = 1;
        for LogLine { seq, event } in lines {
            session.replay(seq, event).map_err(|e| err(format!("event {seq}: {e}")))?;
            next_seq = seq + 1;
        }
        session.log.get_mut().expect("not shared yet").next_seq = next_seq;
        Ok(session)
    }

    fn replay(&mut self, seq: u64, event: Event) -> Result<(), ServiceError> {
        match event {
            Event::Created(_) => Err(ServiceError::Internal("a second `created` event".into())),
            Event::Issued { topic_id, docs, phase } => {
                let s = self
                    .topics
                    .get_mut(&topic_id)
                    .ok_or_else(|| ServiceError::NotFound(format!("topic {topic_id}")))?
                    .get_mut()
                    .expect("not shared yet");
                let step = step(s, &self.scorer, &self.universe, topic_seed(self.created.seed, &topic_id))?;
                if step.issued != docs || step.session.phase() != phase {
                    return Err(ServiceError::Internal(format!(
                        "topic {topic_id} now issues {:?} in phase {}, the log says {docs:?} in phase {phase}",
                        step.issued,
                        step.session.phase()
                    )));
                }
                *s = step.session;
                Ok(())
            }
            Event::Judged {
                topic_id,
                doc_id,
                grade,
                ..
            } => {
                let s = self.topics.get_mut(&topic_id).ok_or_else(|| ServiceError::NotFound(format!("topic {topic_id}")))?;
                let s = s.get_mut().expect("not shared yet");
                let store = self.store.get_mut().expect("not shared yet");
                record_judgment(store, s, &doc_id, grade.value() as i64, seq).map_err(|e| judging_conflict(e, None))?;
                settle(s).map_err(|e| judging_conflict(e, None))
            }
        }
    }

    pub fn task(&self) -> TaskKind {
        self.created.task
    }

    pub fn created(&self) -> &Created {
        &self.created
    }

    fn topic(&self, t: &TopicId) -> Result<&Mutex<TopicSession>, ServiceError> {
        self.topics
            .get(t)
            .ok_or_else(|| ServiceError::NotFound(format!("topic {t} is not part of session {}", self.id)))
    }

    /// All topics locked in id order, then the store. Judgments lock one
    /// topic and then the store, so this order cannot deadlock.
    fn snapshot(&self) -> Result<(Vec<TopicSession>, FinalizeSummary, trecdl::trec_io::QrelsSet), ServiceError> {
        let guards = self.topics.values().map(lock).collect::<Result<Vec<_>, _>>()?;
        let sessions: Vec<TopicSession> = guards.iter().map(|g| (**g).clone()).collect();
        let store = lock(&self.store)?;
        let (qrels, summary) = finalize_qrels(&store, &sessions, &self.created.config);
        Ok((sessions, summary, qrels))
    }

    pub fn handle(&self) -> Result<SessionHandle, ServiceError> {
        let (sessions, summary, _) = self.snapshot()?;
        Ok(SessionHandle {
            schema_version: SCHEMA_VERSION,
            session_id: self.id.clone(),
            task: self.created.task,
            seed: self.created.seed,
            config: self.created.config,
            topics: sessions.iter().map(TopicStatus::of).collect(),
            totals: Totals::of(&summary),
        })
    }

    pub fn summary(&self) -> Result<FinalizeSummary, ServiceError> {
        Ok(self.snapshot()?.1)
    }

    /// Canonical qrels of the included topics, with the summary they came from.
    pub fn export(&self) -> Result<(Vec<u8>, FinalizeSummary), ServiceError> {
        let (_, summary, qrels) = self.snapshot()?;
        let mut out = Vec::new();
        write_qrels(&qrels, &mut out).map_err(|e| ServiceError::Internal(e.to_string()))?;
        Ok((out, summary))
    }

    pub fn detail(&self, t: &TopicId) -> Result<TopicDetail, ServiceError> {
        let s = lock(self.topic(t)?)?;
        let store = lock(&self.store)?;
        let judgments = s
            .judged_docs()
            .map(|d| {
                let history = store
                    .get(t, d)
                    .map(|r| r.history.iter().map(|h| HistoryEntry { grade: h.grade.value(), at: h.at }).collect())
                    .unwrap_or_default();
                JudgedDocument {
                    doc_id: d.to_owned(),
                    grade: s.grade(d).map_or(0, Grade::value),
                    history,
                }
            })
            .collect();
        Ok(TopicDetail {
            schema_version: SCHEMA_VERSION,
            status: TopicStatus::of(&s),
            judgments,
            decisions: s.decisions().to_vec(),
        })
    }

    /// The document the assessor should judge next. Repeated calls without a
    /// judgment in between return the same document.
    pub fn next(&self, t: &TopicId) -> Result<NextDocument, ServiceError> {
        let mut s = lock(self.topic(t)?)?;
        let step = step(&s, &self.scorer, &self.universe, topic_seed(self.created.seed, t))?;
        if !step.issued.is_empty() || step.session.phase() != s.phase() {
            lock(&self.log)?.append(Event::Issued {
                topic_id: t.clone(),
                docs: step.issued.clone(),
                phase: step.session.phase(),
            })?;
        }
        *s = step.session;
        let status = TopicStatus::of(&s);
        let Some(doc) = step.doc else {
            return Err(ServiceError::conflict(
                "topic_terminal",
                format!("judging of topic {t} is {}", s.phase()),
                Some(status),
            ));
        };
        let record = self
            .corpus
            .record(&doc)
            .ok_or_else(|| ServiceError::Internal(format!("issued document `{doc}` is not in the corpus")))?;
        let (issued_in_phase, quota) = s.phase_progress();
        let total = s.issued().count();
        let at = s.issued().position(|d| d == doc).expect("issued");
        Ok(NextDocument {
            schema_version: SCHEMA_VERSION,
            session_id: self.id.clone(),
            topic_id: t.clone(),
            segments: api::render(record),
            position: Position {
                phase: s.phase(),
                index: at + 1 + issued_in_phase - total,
                quota,
            },
            doc_id: doc,
            status,
        })
    }

    /// Record a grade: `revision = false` for `POST`, `true` for `PATCH`.
    pub fn judge(&self, req: &JudgmentRequest, revision: bool) -> Result<JudgmentResponse, ServiceError> {
        if req.schema_version != SCHEMA_VERSION {
            return Err(ServiceError::SchemaVersion(req.schema_version));
        }
        let grade = Grade::try_from(req.grade)
            .map_err(|_| ServiceError::Unprocessable(format!("grade {} is outside 0..=3", req.grade)))?;
        let t = &req.topic_id;
        let mut s = lock(self.topic(t)?)?;
        let previous = s.grade(&req.doc_id);
        if !s.issued().any(|d| d == req.doc_id) {
            return Err(ServiceError::conflict(
                "not_issued",
                format!("document `{}` was not issued for topic {t}", req.doc_id),
                Some(TopicStatus::of(&s)),
            ));
        }
        match (revision, previous) {
            (false, Some(_)) => {
                return Err(ServiceError::conflict(
                    "already_judged",
                    format!("document `{}` is already judged, revise it with PATCH", req.doc_id),
                    Some(TopicStatus::of(&s)),
                ))
            }
            (true, None) => {
                return Err(ServiceError::conflict(
                    "not_judged",
                    format!("document `{}` has no judgment to revise, use POST", req.doc_id),
                    Some(TopicStatus::of(&s)),
                ))
            }
            _ => {}
        }
        let seq = lock(&self.log)?.append(Event::Judged {
            topic_id: t.clone(),
            doc_id: req.doc_id.clone(),
            grade,
            revision,
        })?;
        let mut store = lock(&self.store)?;
        record_judgment(&mut store, &mut s, &req.doc_id, req.grade, seq).map_err(|e| judging_conflict(e, None))?;
        settle(&mut s).map_err(|e| judging_conflict(e, None))?;
        Ok(JudgmentResponse {
            schema_version: SCHEMA_VERSION,
            outcome: if previous.is_some() { Outcome::Revision } else { Outcome::New },
            previous_grade: previous.map(Grade::value),
            status: TopicStatus::of(&s),
        })
    }
}

fn step(s: &TopicSession, scorer: &TfIdfLogistic, universe: &[String], seed: u64) -> Result<Step, ServiceError> {
    let mut session = s.clone();
    let before = session.issued().count();
    let doc = session
        .next_document(scorer, universe, seed)
        .map_err(|e| judging_conflict(e, Some(TopicStatus::of(s))))?;
    let issued = session.issued().skip(before).map(str::to_owned).collect();
    Ok(Step { session, doc, issued })
}

/// Session directories under `<data dir>/sessions`, in id order.
pub fn session_dirs(data_dir: &Path) -> std::io::Result<Vec<(String, PathBuf)>> {
    let root = data_dir.join("sessions");
    if !root.is_dir() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for entry in std::fs::read_dir(&root)? {
        let entry = entry?;
        if entry.path().join(LOG_FILE).is_file() {
            out.push((entry.file_name().to_string_lossy().into_owned(), entry.path()));
        }
    }
    out.sort();
    Ok(out)
}
