//! Replaying collection building against known judgments.
//!
//! A trial builds, for every topic, a trace: the pool in doc id order and
//! then the documents the active learner picks, judged by an [`OracleJudge`].
//! A stopping criterion turns the traces into a qrels, which is compared with
//! the official qrels by the system rankings it induces (MAP and P@10).
//!
//! Every topic gets its own seed, hashed from the trial seed and the topic
//! id, so a topic's trace does not depend on which other topics run.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use indexmap::{IndexMap, IndexSet};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::judging::{batch_seed, build_pool, eligibility, select_batch, JudgingError, Phase, SessionConfig, TopicSession};
use crate::metrics::{evaluate_run, Metric, MetricsError, RelevancePolicy};
use crate::rank_analysis::{kendall_tau, max_drop, RankError, SystemRanking};
use crate::relevance_model::Scorer;
use crate::trec_io::{Grade, QrelsSet, RunFile, TopicId, TopicQrels};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("topic {topic}: asked for {size} judgments but the trace has only {len}")]
    TraceTooShort { topic: TopicId, size: usize, len: usize },
    #[error("no runs to pool")]
    NoRuns,
    #[error("need at least two teams, found {0}")]
    TooFewTeams(usize),
    #[error("trial {seed} kept no evaluation topics")]
    NoEvalTopics { seed: u64 },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Rank(#[from] RankError),
    #[error(transparent)]
    Judging(#[from] JudgingError),
}

/// Looks grades up in reference qrels; anything it lacks is grade 0.
#[derive(Clone, Copy, Debug)]
pub struct OracleJudge<'a> {
    qrels: &'a QrelsSet,
}

impl<'a> OracleJudge<'a> {
    pub fn new(qrels: &'a QrelsSet) -> Self {
        Self { qrels }
    }

    pub fn grade(&self, topic: &TopicId, doc: &str) -> Grade {
        self.qrels.grade(topic, doc).unwrap_or(Grade::IRRELEVANT)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StoppingCriterion {
    /// Judge exactly `sizes[t]` documents of topic `t`; evaluate on `eval_topics`.
    OriginalSize {
        sizes: BTreeMap<TopicId, usize>,
        eval_topics: BTreeSet<TopicId>,
    },
    /// The same number of judgments for every topic (never less than its pool);
    /// topics with too few relevant found are dropped.
    FixedBudget { budget: usize },
    /// The judging state machine itself, with a per-topic cap.
    Heuristic { cap: usize },
}

impl StoppingCriterion {
    /// Sizes and evaluation topics taken from an official qrels: every topic
    /// in it is both judged and evaluated.
    pub fn original_size(official: &QrelsSet) -> Self {
        let sizes: BTreeMap<TopicId, usize> = official.topics().map(|(t, q)| (t.clone(), q.len())).collect();
        StoppingCriterion::OriginalSize {
            eval_topics: sizes.keys().cloned().collect(),
            sizes,
        }
    }

    pub fn label(&self) -> String {
        match self {
            StoppingCriterion::OriginalSize { .. } => "original_size".into(),
            StoppingCriterion::FixedBudget { budget } => format!("budget_{budget}"),
            StoppingCriterion::Heuristic { .. } => "heuristic".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub seed: u64,
    /// Longest trace kept per topic. Traces stop earlier once the criterion
    /// cannot use more documents; the kept part is a prefix of the longer trace.
    pub trace_length: usize,
    pub criterion: StoppingCriterion,
    pub session: SessionConfig,
}

impl TrialConfig {
    pub fn new(seed: u64, criterion: StoppingCriterion) -> Self {
        Self {
            seed,
            trace_length: 2500,
            criterion,
            session: SessionConfig::default(),
        }
    }
}

/// Everything a trial reads. Nothing here is mutated.
pub struct SimulationInput<'a, S: Scorer + ?Sized> {
    pub runs: &'a [RunFile],
    /// Run tag to team, for leave-one-team-out pools.
    pub teams: &'a BTreeMap<String, String>,
    /// Topics that start the process, with their query text.
    pub topics: &'a BTreeMap<TopicId, String>,
    pub sparse: &'a QrelsSet,
    pub oracle: OracleJudge<'a>,
    /// Every document the learner may pick.
    pub universe: &'a [String],
    pub scorer: &'a S,
    pub policy: &'a RelevancePolicy,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicTrace {
    pub topic_id: TopicId,
    pub pool_size: usize,
    pub docs: Vec<String>,
}

impl TopicTrace {
    pub fn pool(&self) -> &[String] {
        &self.docs[..self.pool_size]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicOutcome {
    pub topic_id: TopicId,
    pub pool_size: usize,
    pub judged: usize,
    pub relevant: usize,
    pub included: bool,
    /// Terminal phase for the heuristic criterion.
    pub phase: Option<Phase>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub map_tau: f64,
    pub map_drop: usize,
    pub p10_tau: f64,
    pub p10_drop: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub seed: u64,
    pub criterion: String,
    pub omitted_team: Option<String>,
    pub topics: Vec<TopicOutcome>,
    pub total_judgments: usize,
    pub eval_topics: Vec<TopicId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<Comparison>,
    #[serde(skip)]
    pub qrels: QrelsSet,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub traces: Vec<TopicTrace>,
}

impl TrialResult {
    pub fn to_json(&self, with_traces: bool) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("trial results serialise");
        if !with_traces {
            if let Some(o) = v.as_object_mut() {
                o.remove("traces");
            }
        }
        v
    }
}

/// First eight bytes of `sha256(seed_le || topic_id)`.
pub fn topic_seed(seed: u64, topic: &TopicId) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(topic.as_str().as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest is 32 bytes"))
}

/// Pool first, then active-learning picks until `length` documents or the
/// universe runs out. The pool is always complete even past `length`.
#[allow(clippy::too_many_arguments)]
pub fn build_trace<S: Scorer + ?Sized>(
    topic: &TopicId,
    query: &str,
    pool: Vec<String>,
    oracle: OracleJudge<'_>,
    policy: &RelevancePolicy,
    scorer: &S,
    universe: &[String],
    length: usize,
    seed: u64,
) -> TopicTrace {
    let mut issued: IndexSet<String> = pool.into_iter().collect();
    issued.sort();
    let pool_size = issued.len();
    let mut judged: IndexMap<String, Grade> = issued.iter().map(|d| (d.clone(), oracle.grade(topic, d))).collect();
    let (mut next_batch, mut batches) = (1usize, 0usize);
    while issued.len() < length {
        let n = next_batch.min(length - issued.len());
        let batch = select_batch(scorer, query, &judged, policy, universe, &issued, n, batch_seed(seed, batches));
        if batch.is_empty() {
            break;
        }
        for d in batch {
            judged.insert(d.clone(), oracle.grade(topic, &d));
            issued.insert(d);
        }
        batches += 1;
        next_batch += next_batch.div_ceil(10);
    }
    TopicTrace {
        topic_id: topic.clone(),
        pool_size,
        docs: issued.into_iter().collect(),
    }
}

/// Oracle grades of the first `sizes[t]` documents of each trace. Topics
/// without an entry in `sizes` are left out.
pub fn qrels_from_trace(
    traces: &[TopicTrace],
    sizes: &BTreeMap<TopicId, usize>,
    oracle: OracleJudge<'_>,
) -> Result<QrelsSet, SimError> {
    let mut qrels = QrelsSet::new();
    for trace in traces {
        let Some(&size) = sizes.get(&trace.topic_id) else {
            continue;
        };
        if size > trace.docs.len() {
            return Err(SimError::TraceTooShort {
                topic: trace.topic_id.clone(),
                size,
                len: trace.docs.len(),
            });
        }
        let q: TopicQrels = trace.docs[..size].iter().map(|d| (d.as_str(), oracle.grade(&trace.topic_id, d))).collect();
        qrels.insert_topic(trace.topic_id.clone(), q);
    }
    Ok(qrels)
}

fn relevant_in(trace: &TopicTrace, k: usize, oracle: OracleJudge<'_>, policy: &RelevancePolicy) -> usize {
    trace.docs[..k]
        .iter()
        .filter(|d| policy.is_relevant(Some(oracle.grade(&trace.topic_id, d))))
        .count()
}

/// Run the judging state machine over a trace, judging documents in trace order.
pub fn replay_heuristic(
    trace: &TopicTrace,
    oracle: OracleJudge<'_>,
    policy: &RelevancePolicy,
    config: &SessionConfig,
) -> Result<TopicSession, SimError> {
    let topic = &trace.topic_id;
    let mut s = TopicSession::new(topic.clone(), "", trace.pool().to_vec(), policy.clone(), *config)?;
    for d in trace.pool() {
        s.record(d, oracle.grade(topic, d))?;
    }
    let mut next = trace.pool_size;
    while !s.phase().is_terminal() {
        if s.batch_complete() {
            s.advance()?;
        } else if next < trace.docs.len() {
            let d = &trace.docs[next];
            s.issue(d)?;
            s.record(d, oracle.grade(topic, d))?;
            next += 1;
        } else {
            s.exhaust();
        }
    }
    Ok(s)
}

fn trace_target(criterion: &StoppingCriterion, topic: &TopicId, trace_length: usize) -> usize {
    match criterion {
        StoppingCriterion::OriginalSize { sizes, .. } => sizes.get(topic).copied().unwrap_or(0),
        StoppingCriterion::FixedBudget { budget } => (*budget).min(trace_length),
        StoppingCriterion::Heuristic { cap } => (*cap).min(trace_length),
    }
}

/// One trial. Pure function of its arguments.
pub fn simulate_trial<S: Scorer + ?Sized>(
    input: &SimulationInput<'_, S>,
    config: &TrialConfig,
    omitted_team: Option<&str>,
) -> Result<TrialResult, SimError> {
    if input.runs.is_empty() {
        return Err(SimError::NoRuns);
    }
    let pooled: Vec<&RunFile> = input
        .runs
        .iter()
        .filter(|r| omitted_team.is_none_or(|team| input.teams.get(r.tag()).map(String::as_str) != Some(team)))
        .collect();
    let started: Vec<(&TopicId, &String)> = match &config.criterion {
        StoppingCriterion::OriginalSize { sizes, .. } => input.topics.iter().filter(|(t, _)| sizes.contains_key(*t)).collect(),
        _ => input.topics.iter().collect(),
    };

    let mut traces = Vec::with_capacity(started.len());
    let mut outcomes = Vec::with_capacity(started.len());
    let mut sizes: BTreeMap<TopicId, usize> = BTreeMap::new();
    for (topic, query) in started {
        let pool = build_pool(pooled.iter().copied(), config.session.pool_depth, input.sparse, topic);
        let target = trace_target(&config.criterion, topic, config.trace_length);
        let trace = build_trace(
            topic,
            query,
            pool,
            input.oracle,
            input.policy,
            input.scorer,
            input.universe,
            target,
            topic_seed(config.seed, topic),
        );
        let (judged, included, phase) = match &config.criterion {
            StoppingCriterion::OriginalSize { sizes, eval_topics } => (sizes[topic], eval_topics.contains(topic), None),
            StoppingCriterion::FixedBudget { budget } => {
                let k = (*budget).max(trace.pool_size).min(trace.docs.len());
                let rel = relevant_in(&trace, k, input.oracle, input.policy);
                (k, rel >= config.session.min_relevant, None)
            }
            StoppingCriterion::Heuristic { cap } => {
                let session_config = SessionConfig {
                    per_topic_cap: Some(*cap),
                    ..config.session
                };
                let s = replay_heuristic(&trace, input.oracle, input.policy, &session_config)?;
                let ok = s.phase() == Phase::Finished && eligibility(s.relevant(), s.judged_count(), &config.session);
                (s.judged_count(), ok, Some(s.phase()))
            }
        };
        if judged > trace.docs.len() {
            return Err(SimError::TraceTooShort {
                topic: topic.clone(),
                size: judged,
                len: trace.docs.len(),
            });
        }
        let relevant = relevant_in(&trace, judged, input.oracle, input.policy);
        if included {
            sizes.insert(topic.clone(), judged);
        }
        outcomes.push(TopicOutcome {
            topic_id: topic.clone(),
            pool_size: trace.pool_size,
            judged,
            relevant,
            included,
            phase,
        });
        traces.push(trace);
    }

    let qrels = qrels_from_trace(&traces, &sizes, input.oracle)?;
    Ok(TrialResult {
        seed: config.seed,
        criterion: config.criterion.label(),
        omitted_team: omitted_team.map(str::to_owned),
        total_judgments: outcomes.iter().map(|o| o.judged).sum(),
        eval_topics: outcomes.iter().filter(|o| o.included).map(|o| o.topic_id.clone()).collect(),
        topics: outcomes,
        comparison: None,
        qrels,
        traces,
    })
}

/// MAP and P@10 system rankings under a qrels.
pub fn rankings(
    runs: &[RunFile],
    qrels: &QrelsSet,
    eval_topics: &[TopicId],
    policy: &RelevancePolicy,
) -> Result<(SystemRanking<f64>, SystemRanking<f64>), SimError> {
    let reports = runs
        .iter()
        .map(|r| evaluate_run::<f64>(r, qrels, None, policy, eval_topics))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((
        SystemRanking::by_metric(&reports, Metric::Ap)?,
        SystemRanking::by_metric(&reports, Metric::P10)?,
    ))
}

/// Rankings under the official qrels, computed once per experiment.
#[derive(Clone, Debug)]
pub struct OfficialReference {
    pub eval_topics: Vec<TopicId>,
    pub total_judged: usize,
    pub map: SystemRanking<f64>,
    pub p10: SystemRanking<f64>,
}

impl OfficialReference {
    /// `total_judged` defaults to the size of `qrels` when `None`.
    pub fn new(
        runs: &[RunFile],
        qrels: &QrelsSet,
        policy: &RelevancePolicy,
        total_judged: Option<usize>,
    ) -> Result<Self, SimError> {
        let eval_topics: Vec<TopicId> = qrels.topic_ids().cloned().collect();
        let (map, p10) = rankings(runs, qrels, &eval_topics, policy)?;
        Ok(Self {
            total_judged: total_judged.unwrap_or_else(|| qrels.len()),
            eval_topics,
            map,
            p10,
        })
    }

    pub fn compare(&self, runs: &[RunFile], trial: &TrialResult, policy: &RelevancePolicy) -> Result<Comparison, SimError> {
        if trial.eval_topics.is_empty() {
            return Err(SimError::NoEvalTopics { seed: trial.seed });
        }
        let (map, p10) = rankings(runs, &trial.qrels, &trial.eval_topics, policy)?;
        Ok(Comparison {
            map_tau: kendall_tau(&self.map, &map)?,
            map_drop: max_drop(&self.map, &map)?,
            p10_tau: kendall_tau(&self.p10, &p10)?,
            p10_drop: max_drop(&self.p10, &p10)?,
        })
    }
}

/// Simulate and attach the comparison with the official rankings.
pub fn compared_trial<S: Scorer + ?Sized>(
    input: &SimulationInput<'_, S>,
    official: &OfficialReference,
    config: &TrialConfig,
    omitted_team: Option<&str>,
) -> Result<TrialResult, SimError> {
    let mut t = simulate_trial(input, config, omitted_team)?;
    t.comparison = Some(official.compare(input.runs, &t, input.policy)?);
    Ok(t)
}

/// One row per trial: all teams pooled, then the worst case over omitted teams.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LouRow {
    pub trial: usize,
    pub seed: u64,
    pub all_map_tau: f64,
    pub all_map_drop: usize,
    pub omit_map_tau: f64,
    pub omit_map_drop: usize,
    pub omit_p10_tau: f64,
    pub omit_p10_drop: usize,
    /// Team behind `omit_map_tau`.
    pub worst_team: String,
}

pub fn write_lou_tsv<W: Write>(rows: &[LouRow], w: &mut W) -> std::io::Result<()> {
    writeln!(
        w,
        "trial\tseed\tall_map_tau\tall_map_drop\tomit_map_tau\tomit_map_drop\tomit_p10_tau\tomit_p10_drop\tworst_team"
    )?;
    for r in rows {
        writeln!(
            w,
            "{}\t{}\t{:.4}\t{}\t{:.4}\t{}\t{:.4}\t{}\t{}",
            r.trial, r.seed, r.all_map_tau, r.all_map_drop, r.omit_map_tau, r.omit_map_drop, r.omit_p10_tau, r.omit_p10_drop, r.worst_team
        )?;
    }
    Ok(())
}

/// Leave-one-team-out trials with Original Size qrels. Trials per seed are
/// returned too, for rank-position analysis.
pub fn lou_experiment<S: Scorer + ?Sized>(
    input: &SimulationInput<'_, S>,
    official: &OfficialReference,
    criterion: &StoppingCriterion,
    seeds: &[u64],
    session: &SessionConfig,
) -> Result<(Vec<LouRow>, Vec<TrialResult>), SimError> {
    let teams: BTreeSet<&str> = input
        .runs
        .iter()
        .map(|r| input.teams.get(r.tag()).map_or(r.tag(), String::as_str))
        .collect();
    if teams.len() < 2 {
        return Err(SimError::TooFewTeams(teams.len()));
    }
    let mut rows = Vec::with_capacity(seeds.len());
    let mut trials = Vec::new();
    for (i, &seed) in seeds.iter().enumerate() {
        let config = TrialConfig {
            session: *session,
            ..TrialConfig::new(seed, criterion.clone())
        };
        let all = compared_trial(input, official, &config, None)?;
        let all_cmp = all.comparison.clone().expect("compared");
        let mut row = LouRow {
            trial: i + 1,
            seed,
            all_map_tau: all_cmp.map_tau,
            all_map_drop: all_cmp.map_drop,
            omit_map_tau: f64::INFINITY,
            omit_map_drop: 0,
            omit_p10_tau: f64::INFINITY,
            omit_p10_drop: 0,
            worst_team: String::new(),
        };
        trials.push(all);
        for team in &teams {
            let t = compared_trial(input, official, &config, Some(team))?;
            let c = t.comparison.as_ref().expect("compared");
            if c.map_tau < row.omit_map_tau {
                row.omit_map_tau = c.map_tau;
                row.worst_team = (*team).to_owned();
            }
            row.omit_map_drop = row.omit_map_drop.max(c.map_drop);
            row.omit_p10_tau = row.omit_p10_tau.min(c.p10_tau);
            row.omit_p10_drop = row.omit_p10_drop.max(c.p10_drop);
            trials.push(t);
        }
        rows.push(row);
    }
    Ok((rows, trials))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetRow {
    pub criterion: String,
    pub mean_judgments: f64,
    pub min_judgments: usize,
    pub max_judgments: usize,
    pub mean_eval_topics: f64,
    /// Mean over seeds.
    pub map_tau: Option<f64>,
    /// Worst over seeds.
    pub map_drop: Option<usize>,
    pub p10_tau: Option<f64>,
    pub p10_drop: Option<usize>,
}

impl BudgetRow {
    pub fn official(official: &OfficialReference) -> Self {
        Self {
            criterion: "official".into(),
            mean_judgments: official.total_judged as f64,
            min_judgments: official.total_judged,
            max_judgments: official.total_judged,
            mean_eval_topics: official.eval_topics.len() as f64,
            map_tau: None,
            map_drop: None,
            p10_tau: None,
            p10_drop: None,
        }
    }
}

pub fn write_budget_tsv<W: Write>(rows: &[BudgetRow], w: &mut W) -> std::io::Result<()> {
    let opt_f = |v: Option<f64>| v.map_or("-".to_owned(), |v| format!("{v:.4}"));
    let opt_u = |v: Option<usize>| v.map_or("-".to_owned(), |v| v.to_string());
    writeln!(w, "criterion\tjudgments\tmin_judgments\tmax_judgments\teval_topics\tmap_tau\tmap_drop\tp10_tau\tp10_drop")?;
    for r in rows {
        writeln!(
            w,
            "{}\t{:.1}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.criterion,
            r.mean_judgments,
            r.min_judgments,
            r.max_judgments,
            r.mean_eval_topics,
            opt_f(r.map_tau),
            opt_u(r.map_drop),
            opt_f(r.p10_tau),
            opt_u(r.p10_drop)
        )?;
    }
    Ok(())
}

/// One summary row for a stopping criterion over several seeds.
pub fn budget_experiment<S: Scorer + ?Sized>(
    input: &SimulationInput<'_, S>,
    official: &OfficialReference,
    criterion: &StoppingCriterion,
    seeds: &[u64],
    session: &SessionConfig,
) -> Result<(BudgetRow, Vec<TrialResult>), SimError> {
    let mut trials = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let config = TrialConfig {
            session: *session,
            ..TrialConfig::new(seed, criterion.clone())
        };
        trials.push(compared_trial(input, official, &config, None)?);
    }
    let n = trials.len().max(1) as f64;
    let judgments: Vec<usize> = trials.iter().map(|t| t.total_judgments).collect();
    let cmps: Vec<&Comparison> = trials.iter().filter_map(|t| t.comparison.as_ref()).collect();
    let row = BudgetRow {
        criterion: criterion.label(),
        mean_judgments: judgments.iter().sum::<usize>() as f64 / n,
        min_judgments: judgments.iter().copied().min().unwrap_or(0),
        max_judgments: judgments.iter().copied().max().unwrap_or(0),
        mean_eval_topics: trials.iter().map(|t| t.eval_topics.len()).sum::<usize>() as f64 / n,
        map_tau: (!cmps.is_empty()).then(|| cmps.iter().map(|c| c.map_tau).sum::<f64>() / n),
        map_drop: cmps.iter().map(|c| c.map_drop).max(),
        p10_tau: (!cmps.is_empty()).then(|| cmps.iter().map(|c| c.p10_tau).sum::<f64>() / n),
        p10_drop: cmps.iter().map(|c| c.p10_drop).max(),
    };
    Ok((row, trials))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relevance_model::ConstantScorer;

    fn g(v: u8) -> Grade {
        Grade::new(v).unwrap()
    }

    #[test]
    fn oracle_defaults_to_zero() {
        let mut q = QrelsSet::new();
        q.set("1".into(), "a", g(2));
        let o = OracleJudge::new(&q);
        assert_eq!(o.grade(&"1".into(), "a"), g(2));
        assert_eq!(o.grade(&"1".into(), "b"), g(0));
    }

    #[test]
    fn prefix_qrels() {
        let mut q = QrelsSet::new();
        q.set("1".into(), "d9", g(1));
        let o = OracleJudge::new(&q);
        let trace = TopicTrace {
            topic_id: "1".into(),
            pool_size: 1,
            docs: vec!["d5".into(), "d2".into(), "d9".into()],
        };
        let sizes = |k| BTreeMap::from([(TopicId::from("1"), k)]);
        let two = qrels_from_trace(std::slice::from_ref(&trace), &sizes(2), o).unwrap();
        let docs: Vec<&str> = two.topic(&"1".into()).unwrap().iter().map(|(d, _)| d).collect();
        assert_eq!(docs, ["d5", "d2"]);
        let zero = qrels_from_trace(std::slice::from_ref(&trace), &sizes(0), o).unwrap();
        assert!(zero.topic(&"1".into()).unwrap().is_empty());
        assert!(matches!(
            qrels_from_trace(std::slice::from_ref(&trace), &sizes(4), o),
            Err(SimError::TraceTooShort { .. })
        ));
    }

    #[test]
    fn trace_starts_with_sorted_pool() {
        let q = QrelsSet::new();
        let universe: Vec<String> = (0..30).map(|i| format!("u{i:02}")).collect();
        let t = build_trace(
            &"1".into(),
            "q",
            vec!["u07".into(), "u03".into()],
            OracleJudge::new(&q),
            &RelevancePolicy::document(),
            &ConstantScorer,
            &universe,
            12,
            5,
        );
        assert_eq!(t.pool(), ["u03", "u07"]);
        assert_eq!(t.docs.len(), 12);
        let unique: BTreeSet<&String> = t.docs.iter().collect();
        assert_eq!(unique.len(), 12);
        let longer = build_trace(
            &"1".into(),
            "q",
            vec!["u07".into(), "u03".into()],
            OracleJudge::new(&q),
            &RelevancePolicy::document(),
            &ConstantScorer,
            &universe,
            40,
            5,
        );
        assert_eq!(longer.docs.len(), 30);
        assert_eq!(&longer.docs[..12], &t.docs[..]);
    }

    #[test]
    fn topic_seeds_differ() {
        assert_ne!(topic_seed(1, &"a".into()), topic_seed(1, &"b".into()));
        assert_ne!(topic_seed(1, &"a".into()), topic_seed(2, &"a".into()));
        assert_eq!(topic_seed(1, &"a".into()), topic_seed(1, &"a".into()));
    }
}
