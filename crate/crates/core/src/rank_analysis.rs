//! Comparing system rankings.
//!
//! A [`SystemRanking`] orders runs by score, highest first, with exact score
//! ties resolved by run tag ascending. Since the order is total, Kendall's
//! tau is computed with the no-ties formula.

use std::collections::{BTreeSet, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{Metric, MetricReport};
use crate::scalar::Scalar;
use crate::trec_io::TopicId;

#[derive(Debug, Error, PartialEq)]
pub enum RankError {
    #[error("rankings cover different runs")]
    MismatchedRuns,
    #[error("run `{0}` appears twice in a ranking")]
    DuplicateRun(String),
    #[error("reports cover different topics")]
    MismatchedTopics,
    #[error("metric {0} is missing from a report")]
    MissingMetric(Metric),
    #[error("need at least {0} runs")]
    TooFewRuns(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct SystemRanking<F> {
    entries: Vec<(String, F)>,
}

impl<F: Scalar> SystemRanking<F> {
    pub fn from_scores<S: Into<String>>(scores: impl IntoIterator<Item = (S, F)>) -> Result<Self, RankError> {
        let mut entries: Vec<(String, F)> = scores.into_iter().map(|(t, s)| (t.into(), s)).collect();
        let mut seen = BTreeSet::new();
        for (tag, _) in &entries {
            if !seen.insert(tag.as_str()) {
                return Err(RankError::DuplicateRun(tag.clone()));
            }
        }
        entries.sort_by(|a, b| F::cmp_desc(&a.1, &b.1).then_with(|| a.0.cmp(&b.0)));
        Ok(Self { entries })
    }

    /// Rank systems by the mean of `metric` in each report.
    pub fn by_metric(reports: &[MetricReport<F>], metric: Metric) -> Result<Self, RankError> {
        let scores = reports
            .iter()
            .map(|r| {
                r.mean_value(metric)
                    .map(|v| (r.run_tag.clone(), v))
                    .ok_or(RankError::MissingMetric(metric))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_scores(scores)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Run tags, best first.
    pub fn runs(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(t, _)| t.as_str())
    }

    pub fn entries(&self) -> &[(String, F)] {
        &self.entries
    }

    /// 1-based rank of every run.
    pub fn positions(&self) -> HashMap<&str, usize> {
        self.runs().enumerate().map(|(i, t)| (t, i + 1)).collect()
    }

    fn same_runs(&self, other: &Self) -> bool {
        self.len() == other.len() && {
            let a: BTreeSet<&str> = self.runs().collect();
            other.runs().all(|t| a.contains(t))
        }
    }
}

/// `(concordant - discordant) / C(n, 2)` over all run pairs. Defined as 1
/// for fewer than two runs.
pub fn kendall_tau<F: Scalar>(a: &SystemRanking<F>, b: &SystemRanking<F>) -> Result<F, RankError> {
    if !a.same_runs(b) {
        return Err(RankError::MismatchedRuns);
    }
    let n = a.len();
    if n < 2 {
        return Ok(F::one());
    }
    let pos_b = b.positions();
    let order_b: Vec<usize> = a.runs().map(|t| pos_b[t]).collect();
    let mut concordant = 0i64;
    let mut discordant = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            if order_b[i] < order_b[j] {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    let pairs = (n * (n - 1) / 2) as f64;
    Ok(F::lit((concordant - discordant) as f64 / pairs))
}

/// Largest rank decrease any run suffers going from `official` to `alternative`.
pub fn max_drop<F: Scalar>(official: &SystemRanking<F>, alternative: &SystemRanking<F>) -> Result<usize, RankError> {
    if !official.same_runs(alternative) {
        return Err(RankError::MismatchedRuns);
    }
    let alt = alternative.positions();
    Ok(official
        .runs()
        .enumerate()
        .map(|(i, t)| alt[t].saturating_sub(i + 1))
        .max()
        .unwrap_or(0))
}

/// How often each run landed at each rank over a set of trials. Rows follow
/// the official order; column `r` counts rank `r + 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PositionCounts {
    pub runs: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

impl PositionCounts {
    pub fn write_tsv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        write!(w, "run")?;
        for r in 1..=self.runs.len() {
            write!(w, "\t{r}")?;
        }
        writeln!(w)?;
        for (run, row) in self.runs.iter().zip(&self.counts) {
            write!(w, "{run}")?;
            for c in row {
                write!(w, "\t{c}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

pub fn rank_position_counts<F: Scalar>(
    official: &SystemRanking<F>,
    trials: &[SystemRanking<F>],
) -> Result<PositionCounts, RankError> {
    let n = official.len();
    let row_of: HashMap<&str, usize> = official.runs().enumerate().map(|(i, t)| (t, i)).collect();
    let mut counts = vec![vec![0usize; n]; n];
    for trial in trials {
        if !official.same_runs(trial) {
            return Err(RankError::MismatchedRuns);
        }
        for (rank, tag) in trial.runs().enumerate() {
            counts[row_of[tag]][rank] += 1;
        }
    }
    Ok(PositionCounts {
        runs: official.runs().map(str::to_owned).collect(),
        counts,
    })
}

/// Per-topic differences between two runs on one metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct QueryDeltas<F> {
    pub metric: Metric,
    /// `(topic, a - b)`, largest difference first.
    pub deltas: Vec<(TopicId, F)>,
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
}

impl<F: Scalar> QueryDeltas<F> {
    pub fn sum(&self) -> F {
        self.deltas.iter().fold(F::zero(), |acc, (_, d)| acc + *d)
    }

    pub fn write_tsv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "topic\tdelta_{}", self.metric)?;
        for (t, d) in &self.deltas {
            writeln!(w, "{t}\t{:.4}", d.to_f64().unwrap_or(f64::NAN))?;
        }
        Ok(())
    }
}

pub fn per_query_delta<F: Scalar>(
    a: &MetricReport<F>,
    b: &MetricReport<F>,
    metric: Metric,
) -> Result<QueryDeltas<F>, RankError> {
    if a.per_topic.len() != b.per_topic.len() || a.per_topic.keys().any(|t| !b.per_topic.contains_key(t)) {
        return Err(RankError::MismatchedTopics);
    }
    let mut deltas = Vec::with_capacity(a.per_topic.len());
    for (topic, ma) in &a.per_topic {
        let va = metric.of(ma).ok_or(RankError::MissingMetric(metric))?;
        let vb = metric.of(&b.per_topic[topic]).ok_or(RankError::MissingMetric(metric))?;
        deltas.push((topic.clone(), va - vb));
    }
    deltas.sort_by(|x, y| F::cmp_desc(&x.1, &y.1).then_with(|| x.0.cmp(&y.0)));
    let wins = deltas.iter().filter(|(_, d)| *d > F::zero()).count();
    let losses = deltas.iter().filter(|(_, d)| *d < F::zero()).count();
    Ok(QueryDeltas {
        metric,
        ties: deltas.len() - wins - losses,
        deltas,
        wins,
        losses,
    })
}

/// Kendall's tau between the system orderings two metrics induce.
pub fn metric_agreement<F: Scalar>(reports: &[MetricReport<F>], x: Metric, y: Metric) -> Result<F, RankError> {
    if reports.len() < 2 {
        return Err(RankError::TooFewRuns(2));
    }
    kendall_tau(&SystemRanking::by_metric(reports, x)?, &SystemRanking::by_metric(reports, y)?)
}

/// Runs × topics matrix of NDCG@10, rows in report order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct RunTopicMatrix<F> {
    pub runs: Vec<String>,
    pub topics: Vec<TopicId>,
    pub values: Vec<Vec<F>>,
}

impl<F: Scalar> RunTopicMatrix<F> {
    pub fn shape(&self) -> (usize, usize) {
        (self.runs.len(), self.topics.len())
    }

    pub fn column_means(&self) -> Vec<F> {
        (0..self.topics.len())
            .map(|j| {
                self.values.iter().fold(F::zero(), |acc, row| acc + row[j]) / F::from_count(self.runs.len().max(1))
            })
            .collect()
    }

    pub fn write_tsv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        write!(w, "run")?;
        for t in &self.topics {
            write!(w, "\t{t}")?;
        }
        writeln!(w)?;
        for (run, row) in self.runs.iter().zip(&self.values) {
            write!(w, "{run}")?;
            for v in row {
                write!(w, "\t{}", v.to_f64().unwrap_or(f64::NAN))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

pub fn ndcg_vector_matrix<F: Scalar>(reports: &[MetricReport<F>]) -> Result<RunTopicMatrix<F>, RankError> {
    let topics: Vec<TopicId> = reports.first().map(|r| r.per_topic.keys().cloned().collect()).unwrap_or_default();
    let mut values = Vec::with_capacity(reports.len());
    for r in reports {
        if r.per_topic.len() != topics.len() {
            return Err(RankError::MismatchedTopics);
        }
        let row = topics
            .iter()
            .map(|t| r.per_topic.get(t).map(|m| m.ndcg_10).ok_or(RankError::MismatchedTopics))
            .collect::<Result<Vec<F>, _>>()?;
        values.push(row);
    }
    Ok(RunTopicMatrix {
        runs: reports.iter().map(|r| r.run_tag.clone()).collect(),
        topics,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::TopicMetrics;
    use approx::assert_abs_diff_eq;
    use std::collections::BTreeMap;

    fn ranking(order: &[&str]) -> SystemRanking<f64> {
        let n = order.len() as f64;
        SystemRanking::from_scores(order.iter().enumerate().map(|(i, t)| (*t, n - i as f64))).unwrap()
    }

    fn report(tag: &str, ndcg: &[(&str, f64)]) -> MetricReport<f64> {
        let per_topic: BTreeMap<TopicId, TopicMetrics<f64>> = ndcg
            .iter()
            .map(|&(t, v)| {
                (
                    TopicId::from(t),
                    TopicMetrics {
                        ndcg_10: v,
                        ncg: 1.0 - v,
                        rr: v,
                        rr_ms: None,
                        ap: v,
                        p_10: v,
                    },
                )
            })
            .collect();
        let n = per_topic.len() as f64;
        let mean_v = per_topic.values().map(|m| m.ndcg_10).sum::<f64>() / n;
        MetricReport {
            run_tag: tag.into(),
            ncg_depth: 100,
            per_topic,
            mean: TopicMetrics {
                ndcg_10: mean_v,
                ncg: 1.0 - mean_v,
                rr: mean_v,
                rr_ms: None,
                ap: mean_v,
                p_10: mean_v,
            },
        }
    }

    #[test]
    fn tau_identity_reversal_and_swap() {
        let a = ranking(&["r1", "r2", "r3", "r4"]);
        assert_eq!(kendall_tau(&a, &a).unwrap(), 1.0);
        let rev = ranking(&["r4", "r3", "r2", "r1"]);
        assert_eq!(kendall_tau(&a, &rev).unwrap(), -1.0);
        let swap = ranking(&["r1", "r3", "r2", "r4"]);
        assert_abs_diff_eq!(kendall_tau(&a, &swap).unwrap(), 4.0 / 6.0, epsilon = 1e-12);
    }

    #[test]
    fn mismatched_runs_rejected() {
        let a = ranking(&["r1", "r2"]);
        let b = ranking(&["r1", "r3"]);
        assert_eq!(kendall_tau(&a, &b), Err(RankError::MismatchedRuns));
        assert_eq!(max_drop(&a, &ranking(&["r1"])), Err(RankError::MismatchedRuns));
    }

    #[test]
    fn ties_resolve_by_tag() {
        let r = SystemRanking::from_scores([("b", 0.5), ("a", 0.5), ("c", 0.9)]).unwrap();
        assert_eq!(r.runs().collect::<Vec<_>>(), ["c", "a", "b"]);
        assert!(SystemRanking::from_scores([("a", 1.0), ("a", 2.0)]).is_err());
    }

    #[test]
    fn drop_cases() {
        let official = ranking(&["r1", "r2", "r3"]);
        assert_eq!(max_drop(&official, &official).unwrap(), 0);
        assert_eq!(max_drop(&official, &ranking(&["r2", "r3", "r1"])).unwrap(), 2);
        // r3 rises two places, r1 and r2 each fall one
        assert_eq!(max_drop(&official, &ranking(&["r3", "r1", "r2"])).unwrap(), 1);
    }

    #[test]
    fn position_counts() {
        let official = ranking(&["a", "b", "c", "d"]);
        let t1 = ranking(&["a", "b", "c", "d"]);
        let t2 = ranking(&["a", "b", "d", "c"]);
        let pc = rank_position_counts(&official, &[t1.clone(), t1]).unwrap();
        for row in &pc.counts {
            assert_eq!(row.iter().filter(|&&c| c > 0).count(), 1);
        }
        let pc = rank_position_counts(&official, &[ranking(&["a", "b", "c", "d"]), t2]).unwrap();
        assert_eq!(pc.counts[2], [0, 0, 1, 1]);
        assert_eq!(pc.counts[3], [0, 0, 1, 1]);
    }

    #[test]
    fn deltas_sorted_with_tally() {
        let a = report("a", &[("1", 0.5), ("2", 0.9), ("3", 0.1)]);
        let b = report("b", &[("1", 0.5), ("2", 0.2), ("3", 0.4)]);
        let d = per_query_delta(&a, &b, Metric::Ndcg10).unwrap();
        let topics: Vec<&str> = d.deltas.iter().map(|(t, _)| t.as_str()).collect();
        assert_eq!(topics, ["2", "1", "3"]);
        assert_eq!((d.wins, d.losses, d.ties), (1, 1, 1));
        assert_abs_diff_eq!(d.sum(), 3.0 * (a.mean.ndcg_10 - b.mean.ndcg_10), epsilon = 1e-12);
        let same = per_query_delta(&a, &a, Metric::Ndcg10).unwrap();
        assert!(same.deltas.iter().all(|(_, v)| *v == 0.0));
        let other = report("c", &[("9", 0.5)]);
        assert_eq!(per_query_delta(&a, &other, Metric::Ap), Err(RankError::MismatchedTopics));
        assert_eq!(per_query_delta(&a, &b, Metric::RrMs), Err(RankError::MissingMetric(Metric::RrMs)));
    }

    #[test]
    fn agreement_same_and_inverse() {
        let reports: Vec<_> = [0.1, 0.4, 0.3, 0.8]
            .iter()
            .enumerate()
            .map(|(i, &v)| report(&format!("r{i}"), &[("1", v)]))
            .collect();
        assert_eq!(metric_agreement(&reports, Metric::Ndcg10, Metric::Ap).unwrap(), 1.0);
        // ncg is 1 - ndcg in the fixture
        assert_eq!(metric_agreement(&reports, Metric::Ndcg10, Metric::Ncg).unwrap(), -1.0);
        assert_eq!(metric_agreement(&reports[..1], Metric::Ndcg10, Metric::Ap), Err(RankError::TooFewRuns(2)));
    }

    #[test]
    fn matrix_projection() {
        let a = report("a", &[("1", 0.5), ("2", 0.9)]);
        let b = report("b", &[("1", 0.1), ("2", 0.3)]);
        let m = ndcg_vector_matrix(&[a, b]).unwrap();
        assert_eq!(m.shape(), (2, 2));
        assert_eq!(m.values[1], [0.1, 0.3]);
        let means = m.column_means();
        assert_abs_diff_eq!(means[0], 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(means[1], 0.6, epsilon = 1e-12);
    }
}
