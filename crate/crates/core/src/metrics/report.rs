use std::collections::{BTreeMap, HashSet};
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    average_precision, ncg_at_k, ndcg_at_k, precision_at_k, reciprocal_rank, relevant_count, RelevancePolicy,
};
use crate::scalar::Scalar;
use crate::trec_io::{QrelsSet, RunFile, TopicId, TopicQrels};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("evaluation topic set is empty")]
    EmptyEvalTopics,
    #[error("evaluation topic {0} has no judgments")]
    UnjudgedTopic(TopicId),
    #[error("invalid relevance policy: {0}")]
    Policy(String),
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
}

/// Measures for one topic of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct TopicMetrics<F> {
    pub ndcg_10: F,
    pub ncg: F,
    pub rr: F,
    /// Reciprocal rank against the sparse labels, when they were supplied.
    pub rr_ms: Option<F>,
    pub ap: F,
    pub p_10: F,
}

/// The measures a report carries, addressable by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Ndcg10,
    Ncg,
    Rr,
    RrMs,
    Ap,
    P10,
}

impl Metric {
    pub const ALL: [Metric; 6] = [Metric::Ndcg10, Metric::Ncg, Metric::Rr, Metric::RrMs, Metric::Ap, Metric::P10];

    pub fn of<F: Scalar>(self, m: &TopicMetrics<F>) -> Option<F> {
        match self {
            Metric::Ndcg10 => Some(m.ndcg_10),
            Metric::Ncg => Some(m.ncg),
            Metric::Rr => Some(m.rr),
            Metric::RrMs => m.rr_ms,
            Metric::Ap => Some(m.ap),
            Metric::P10 => Some(m.p_10),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Ndcg10 => "ndcg@10",
            Metric::Ncg => "ncg",
            Metric::Rr => "rr",
            Metric::RrMs => "rr_ms",
            Metric::Ap => "ap",
            Metric::P10 => "p@10",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "ndcg@10" | "ndcg_10" | "ndcg" => Metric::Ndcg10,
            "ncg" | "ncg@k" => Metric::Ncg,
            "rr" | "mrr" => Metric::Rr,
            "rr_ms" | "rr(ms)" => Metric::RrMs,
            "ap" | "map" => Metric::Ap,
            "p@10" | "p_10" | "p10" | "prec(10)" => Metric::P10,
            _ => return Err(MetricsError::UnknownMetric(s.to_owned())),
        })
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-topic and mean measures of one run under one relevance policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct MetricReport<F> {
    pub run_tag: String,
    pub ncg_depth: usize,
    pub per_topic: BTreeMap<TopicId, TopicMetrics<F>>,
    /// Means over the evaluation topics. MAP skips topics without any relevant document.
    pub mean: TopicMetrics<F>,
}

impl<F: Scalar> MetricReport<F> {
    pub fn topic_value(&self, topic: &TopicId, metric: Metric) -> Option<F> {
        self.per_topic.get(topic).and_then(|m| metric.of(m))
    }

    pub fn mean_value(&self, metric: Metric) -> Option<F> {
        metric.of(&self.mean)
    }
}

/// Evaluate a run over `eval_topics`. Topics the run skipped score 0.
pub fn evaluate_run<F: Scalar>(
    run: &RunFile,
    qrels: &QrelsSet,
    sparse_qrels: Option<&QrelsSet>,
    policy: &RelevancePolicy,
    eval_topics: &[TopicId],
) -> Result<MetricReport<F>, MetricsError> {
    policy.validate().map_err(MetricsError::Policy)?;
    if eval_topics.is_empty() {
        return Err(MetricsError::EmptyEvalTopics);
    }
    let sparse_policy = RelevancePolicy::sparse(policy.task);
    let empty = TopicQrels::new();
    let mut per_topic = BTreeMap::new();
    let mut map_topics = Vec::new();
    let mut seen = HashSet::new();
    for topic in eval_topics {
        if !seen.insert(topic) {
            continue;
        }
        let judged = qrels.topic(topic).ok_or_else(|| MetricsError::UnjudgedTopic(topic.clone()))?;
        let ranked = run.ranked_docs(topic);
        let rr_ms = sparse_qrels.map(|s| {
            reciprocal_rank(&ranked, s.topic(topic).unwrap_or(&empty), &sparse_policy, None)
        });
        let m = TopicMetrics {
            ndcg_10: ndcg_at_k(&ranked, judged, policy, 10),
            ncg: ncg_at_k(&ranked, judged, policy, policy.ncg_depth),
            rr: reciprocal_rank(&ranked, judged, policy, None),
            rr_ms,
            ap: average_precision(&ranked, judged, policy),
            p_10: precision_at_k(&ranked, judged, policy, 10),
        };
        if relevant_count(judged, policy) > 0 {
            map_topics.push(m.ap);
        }
        per_topic.insert(topic.clone(), m);
    }

    let mean_of = |f: &dyn Fn(&TopicMetrics<F>) -> F| -> F {
        let sum = per_topic.values().fold(F::zero(), |acc, m| acc + f(m));
        sum / F::from_count(per_topic.len())
    };
    let mean = TopicMetrics {
        ndcg_10: mean_of(&|m| m.ndcg_10),
        ncg: mean_of(&|m| m.ncg),
        rr: mean_of(&|m| m.rr),
        rr_ms: sparse_qrels.map(|_| mean_of(&|m| m.rr_ms.unwrap_or_else(F::zero))),
        ap: if map_topics.is_empty() {
            F::zero()
        } else {
            map_topics.iter().fold(F::zero(), |a, &b| a + b) / F::from_count(map_topics.len())
        },
        p_10: mean_of(&|m| m.p_10),
    };
    Ok(MetricReport {
        run_tag: run.tag().to_owned(),
        ncg_depth: policy.ncg_depth,
        per_topic,
        mean,
    })
}

fn fmt_value<F: Scalar>(v: Option<F>) -> String {
    match v {
        Some(v) => format!("{:.4}", v.to_f64().unwrap_or(f64::NAN)),
        None => "NA".to_owned(),
    }
}

/// One row per run × topic and one `all` row of means per run.
pub fn write_reports_tsv<F: Scalar, W: Write>(reports: &[MetricReport<F>], w: &mut W) -> std::io::Result<()> {
    let depth = reports.first().map_or(100, |r| r.ncg_depth);
    writeln!(w, "run\ttopic\tndcg@10\tncg@{depth}\trr\trr_ms\tap\tp@10")?;
    for r in reports {
        let rows = r
            .per_topic
            .iter()
            .map(|(t, m)| (t.as_str(), m))
            .chain(std::iter::once(("all", &r.mean)));
        for (topic, m) in rows {
            write!(w, "{}\t{topic}", r.run_tag)?;
            for metric in Metric::ALL {
                write!(w, "\t{}", fmt_value(metric.of(m)))?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trec_io::{read_qrels, Grade};
    use approx::assert_abs_diff_eq;

    fn ids(v: &[&str]) -> Vec<TopicId> {
        v.iter().map(|&s| TopicId::from(s)).collect()
    }

    #[test]
    fn empty_eval_topics_is_an_error() {
        let run = RunFile::from_scored("r", [("1", "a", 1.0)]).unwrap();
        let q = read_qrels("1 0 a 1\n".as_bytes()).unwrap();
        let err = evaluate_run::<f64>(&run, &q, None, &RelevancePolicy::document(), &[]).unwrap_err();
        assert_eq!(err, MetricsError::EmptyEvalTopics);
        let err = evaluate_run::<f64>(&run, &q, None, &RelevancePolicy::document(), &ids(&["2"])).unwrap_err();
        assert_eq!(err, MetricsError::UnjudgedTopic("2".into()));
    }

    #[test]
    fn ideal_run_scores_one() {
        let q = read_qrels("1 0 a 3\n1 0 b 2\n1 0 c 0\n2 0 x 1\n2 0 y 3\n".as_bytes()).unwrap();
        let run = RunFile::from_scored("ideal", [("1", "a", 3.0), ("1", "b", 2.0), ("2", "y", 2.0), ("2", "x", 1.0)]).unwrap();
        let r = evaluate_run::<f64>(&run, &q, None, &RelevancePolicy::document(), &ids(&["1", "2"])).unwrap();
        for m in r.per_topic.values() {
            assert_abs_diff_eq!(m.ndcg_10, 1.0, epsilon = 1e-12);
        }
        assert!(r.mean.rr_ms.is_none());
    }

    #[test]
    fn three_topic_fixture_by_hand() {
        // topic 1: run [a, n, b]; qrels a=2, b=1, n=0
        // topic 2: run [z, y]; qrels y=3
        // topic 3: not in the run; qrels q=1
        let q = read_qrels("1 0 a 2\n1 0 b 1\n1 0 n 0\n2 0 y 3\n3 0 q 1\n".as_bytes()).unwrap();
        let sparse = read_qrels("1 0 b 1\n2 0 y 1\n".as_bytes()).unwrap();
        let run = RunFile::from_scored(
            "hand",
            [("1", "a", 3.0), ("1", "n", 2.0), ("1", "b", 1.0), ("2", "z", 2.0), ("2", "y", 1.0)],
        )
        .unwrap();
        let r = evaluate_run::<f64>(&run, &q, Some(&sparse), &RelevancePolicy::document(), &ids(&["1", "2", "3"])).unwrap();

        let l3 = 3f64.log2();
        let ndcg1 = (2.0 + 1.0 / 2.0) / (2.0 + 1.0 / l3);
        let ndcg2 = (3.0 / l3) / 3.0;
        assert_abs_diff_eq!(r.mean.ndcg_10, (ndcg1 + ndcg2 + 0.0) / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.mean.rr, (1.0 + 0.5 + 0.0) / 3.0, epsilon = 1e-12);
        let ap1 = (1.0 + 2.0 / 3.0) / 2.0;
        let ap2 = 0.5;
        assert_abs_diff_eq!(r.mean.ap, (ap1 + ap2 + 0.0) / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.mean.p_10, (0.2 + 0.1 + 0.0) / 3.0, epsilon = 1e-12);
        // sparse: topic 1 positive b at rank 3, topic 2 y at rank 2, topic 3 none
        assert_abs_diff_eq!(r.mean.rr_ms.unwrap(), (1.0 / 3.0 + 0.5) / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.mean.ncg, (1.0 + 1.0 + 0.0) / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn map_skips_topics_without_relevant() {
        let mut q = QrelsSet::new();
        q.set("1".into(), "a", Grade::new(1).unwrap());
        q.set("2".into(), "b", Grade::new(0).unwrap());
        let run = RunFile::from_scored("r", [("1", "a", 1.0), ("2", "b", 1.0)]).unwrap();
        let r = evaluate_run::<f64>(&run, &q, None, &RelevancePolicy::document(), &ids(&["1", "2"])).unwrap();
        assert_eq!(r.mean.ap, 1.0);
        assert_eq!(r.mean.rr, 0.5);
    }

    #[test]
    fn means_cover_only_eval_topics() {
        // 52 judged topics, 9 left out of evaluation
        let mut q = QrelsSet::new();
        let mut scored = Vec::new();
        for t in 0..52 {
            q.set(TopicId::from(t.to_string()), "d", Grade::new(2).unwrap());
            let score = if t < 43 { 1.0 } else { -1.0 };
            scored.push((t.to_string(), "d".to_string(), score));
            if t >= 43 {
                scored.pop();
            }
        }
        let run = RunFile::from_scored("r", scored).unwrap();
        let eval: Vec<TopicId> = (0..43).map(|t| TopicId::from(t.to_string())).collect();
        let r = evaluate_run::<f64>(&run, &q, None, &RelevancePolicy::document(), &eval).unwrap();
        assert_eq!(r.per_topic.len(), 43);
        assert_eq!(r.mean.rr, 1.0);
    }

    #[test]
    fn tsv_has_means_row() {
        let q = read_qrels("1 0 a 1\n".as_bytes()).unwrap();
        let run = RunFile::from_scored("r", [("1", "a", 1.0)]).unwrap();
        let r = evaluate_run::<f64>(&run, &q, None, &RelevancePolicy::passage(), &ids(&["1"])).unwrap();
        let mut out = Vec::new();
        write_reports_tsv(&[r], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "run\ttopic\tndcg@10\tncg@1000\trr\trr_ms\tap\tp@10");
        assert_eq!(lines[2], "r\tall\t1.0000\t1.0000\t0.0000\tNA\t0.0000\t0.0000");
    }

    #[test]
    fn metric_names_parse() {
        for m in Metric::ALL {
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
        }
        assert!("bpref".parse::<Metric>().is_err());
    }
}
