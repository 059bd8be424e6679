//! Per-topic effectiveness measures and run reports.
//!
//! Every measure takes a ranking already in canonical order (as stored in a
//! [`RunFile`](crate::trec_io::RunFile)) and the judgments of one topic. Unjudged documents carry
//! zero gain and are never relevant.

mod policy;
mod report;

use crate::scalar::Scalar;
use crate::trec_io::{Grade, TopicQrels};

pub use policy::RelevancePolicy;
pub use report::{evaluate_run, write_reports_tsv, Metric, MetricReport, MetricsError, TopicMetrics};

fn discount<F: Scalar>(rank: usize) -> F {
    // rank is 1-based
    F::one() / F::from_count(rank + 1).log2()
}

/// Gains of every judged document of the topic, largest first.
fn ideal_gains<F: Scalar>(qrels: &TopicQrels, policy: &RelevancePolicy) -> Vec<F> {
    let mut gains: Vec<F> = qrels.iter().map(|(_, g)| policy.gain::<F>(Some(g))).collect();
    gains.sort_by(F::cmp_desc);
    gains
}

fn grade_of<D: AsRef<str>>(qrels: &TopicQrels, doc: &D) -> Option<Grade> {
    qrels.grade(doc.as_ref())
}

/// NDCG@k with discount `1/log2(rank+1)`. The ideal ordering is built from
/// all judged documents of the topic. Returns 0 when nothing has positive gain.
pub fn ndcg_at_k<F: Scalar, D: AsRef<str>>(
    ranked: &[D],
    qrels: &TopicQrels,
    policy: &RelevancePolicy,
    k: usize,
) -> F {
    let dcg = ranked
        .iter()
        .take(k)
        .enumerate()
        .fold(F::zero(), |acc, (i, d)| acc + policy.gain::<F>(grade_of(qrels, d)) * discount(i + 1));
    let idcg = ideal_gains::<F>(qrels, policy)
        .into_iter()
        .take(k)
        .enumerate()
        .fold(F::zero(), |acc, (i, g)| acc + g * discount(i + 1));
    if idcg > F::zero() {
        dcg / idcg
    } else {
        F::zero()
    }
}

/// Normalized cumulative gain at k: undiscounted gain of the top k over the
/// sum of the k largest judged gains.
pub fn ncg_at_k<F: Scalar, D: AsRef<str>>(
    ranked: &[D],
    qrels: &TopicQrels,
    policy: &RelevancePolicy,
    k: usize,
) -> F {
    let cg = ranked
        .iter()
        .take(k)
        .fold(F::zero(), |acc, d| acc + policy.gain::<F>(grade_of(qrels, d)));
    let ideal = ideal_gains::<F>(qrels, policy)
        .into_iter()
        .take(k)
        .fold(F::zero(), |acc, g| acc + g);
    if ideal > F::zero() {
        cg / ideal
    } else {
        F::zero()
    }
}

/// `1/rank` of the first binary-relevant document, optionally only within the
/// first `cutoff` positions; 0 when there is none.
pub fn reciprocal_rank<F: Scalar, D: AsRef<str>>(
    ranked: &[D],
    qrels: &TopicQrels,
    policy: &RelevancePolicy,
    cutoff: Option<usize>,
) -> F {
    let depth = cutoff.unwrap_or(usize::MAX);
    ranked
        .iter()
        .take(depth)
        .position(|d| policy.is_relevant(grade_of(qrels, d)))
        .map_or(F::zero(), |i| F::one() / F::from_count(i + 1))
}

/// Number of binary-relevant judged documents of a topic.
pub fn relevant_count(qrels: &TopicQrels, policy: &RelevancePolicy) -> usize {
    qrels.iter().filter(|(_, g)| policy.is_relevant(Some(*g))).count()
}

/// Average precision over all relevant documents in the judgments.
///
/// 0 when the topic has no relevant documents; [`evaluate_run`] leaves such
/// topics out of MAP.
pub fn average_precision<F: Scalar, D: AsRef<str>>(
    ranked: &[D],
    qrels: &TopicQrels,
    policy: &RelevancePolicy,
) -> F {
    let total_relevant = relevant_count(qrels, policy);
    if total_relevant == 0 {
        return F::zero();
    }
    let mut hits = 0usize;
    let mut sum = F::zero();
    for (i, d) in ranked.iter().enumerate() {
        if policy.is_relevant(grade_of(qrels, d)) {
            hits += 1;
            sum = sum + F::from_count(hits) / F::from_count(i + 1);
        }
    }
    sum / F::from_count(total_relevant)
}

/// Fraction of the top k that is relevant. The denominator is always k, even
/// for shorter rankings.
pub fn precision_at_k<F: Scalar, D: AsRef<str>>(
    ranked: &[D],
    qrels: &TopicQrels,
    policy: &RelevancePolicy,
    k: usize,
) -> F {
    if k == 0 {
        return F::zero();
    }
    let hits = ranked
        .iter()
        .take(k)
        .filter(|d| policy.is_relevant(grade_of(qrels, *d)))
        .count();
    F::from_count(hits) / F::from_count(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn qrels(pairs: &[(&str, u8)]) -> TopicQrels {
        pairs.iter().map(|&(d, g)| (d, Grade::new(g).unwrap())).collect()
    }

    #[test]
    fn ndcg_single_perfect_doc() {
        let q = qrels(&[("d1", 3)]);
        let v: f64 = ndcg_at_k(&["d1", "x", "y"], &q, &RelevancePolicy::document(), 10);
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ndcg_swapped_pair() {
        let q = qrels(&[("d1", 3), ("d2", 1)]);
        let v: f64 = ndcg_at_k(&["d2", "d1"], &q, &RelevancePolicy::document(), 2);
        let l3 = 3f64.log2();
        let expected = (1.0 + 3.0 / l3) / (3.0 + 1.0 / l3);
        assert_abs_diff_eq!(v, expected, epsilon = 1e-12);
        assert_abs_diff_eq!(v, 0.7967, epsilon = 1e-4);
    }

    #[test]
    fn ndcg_of_unjudged_only_is_zero() {
        let q = qrels(&[("d1", 2)]);
        let v: f64 = ndcg_at_k(&["a", "b"], &q, &RelevancePolicy::document(), 10);
        assert_eq!(v, 0.0);
    }

    #[test]
    fn ncg_partial_recall() {
        let q = qrels(&[("a", 3), ("b", 2), ("c", 1)]);
        let p = RelevancePolicy::document();
        let v: f64 = ncg_at_k(&["b", "x", "c"], &q, &p, 100);
        assert_abs_diff_eq!(v, 0.5, epsilon = 1e-12);
        let full: f64 = ncg_at_k(&["c", "a", "b"], &q, &p, 100);
        assert_abs_diff_eq!(full, 1.0, epsilon = 1e-12);
        let empty: f64 = ncg_at_k::<f64, &str>(&[], &q, &p, 100);
        assert_eq!(empty, 0.0);
    }

    #[test]
    fn rr_cases() {
        let q = qrels(&[("d", 1)]);
        let p = RelevancePolicy::document();
        let v: f64 = reciprocal_rank(&["a", "b", "c", "d"], &q, &p, None);
        assert_abs_diff_eq!(v, 0.25);
        let none: f64 = reciprocal_rank(&["a", "b"], &q, &p, None);
        assert_eq!(none, 0.0);
        let cut: f64 = reciprocal_rank(&["a", "b", "c", "d"], &q, &p, Some(3));
        assert_eq!(cut, 0.0);
    }

    #[test]
    fn rr_passage_ignores_related() {
        let q = qrels(&[("r", 1), ("h", 2)]);
        let v: f64 = reciprocal_rank(&["r", "x", "h"], &q, &RelevancePolicy::passage(), None);
        assert_abs_diff_eq!(v, 1.0 / 3.0);
    }

    #[test]
    fn ap_cases() {
        let p = RelevancePolicy::document();
        let q = qrels(&[("a", 1), ("b", 2), ("n", 0)]);
        let v: f64 = average_precision(&["a", "x", "b"], &q, &p);
        assert_abs_diff_eq!(v, (1.0 + 2.0 / 3.0) / 2.0, epsilon = 1e-12);
        let perfect: f64 = average_precision(&["b", "a", "n"], &q, &p);
        assert_abs_diff_eq!(perfect, 1.0);
        let none: f64 = average_precision(&["a"], &qrels(&[("a", 0)]), &p);
        assert_eq!(none, 0.0);
    }

    #[test]
    fn precision_denominator_is_k() {
        let p = RelevancePolicy::document();
        let q = qrels(&[("a", 1), ("b", 1), ("c", 1)]);
        let v: f64 = precision_at_k(&["a", "b", "c"], &q, &p, 10);
        assert_abs_diff_eq!(v, 0.3);
        let docs: Vec<String> = (0..10).map(|i| format!("r{i}")).collect();
        let all: TopicQrels = docs.iter().map(|d| (d.clone(), Grade::new(1).unwrap())).collect();
        let one: f64 = precision_at_k(&docs, &all, &p, 10);
        assert_eq!(one, 1.0);
    }

    #[test]
    fn passage_grade_one_only() {
        // Only "related" passages judged: binary measures are zero, NDCG is not.
        let q = qrels(&[("a", 1), ("b", 1)]);
        let p = RelevancePolicy::passage();
        let ranked = ["a", "b"];
        assert_eq!(reciprocal_rank::<f64, _>(&ranked, &q, &p, None), 0.0);
        assert_eq!(average_precision::<f64, _>(&ranked, &q, &p), 0.0);
        assert_eq!(precision_at_k::<f64, _>(&ranked, &q, &p, 10), 0.0);
        assert!(ndcg_at_k::<f64, _>(&ranked, &q, &p, 10) > 0.0);
    }

    #[test]
    fn works_in_single_precision() {
        let q = qrels(&[("d1", 3), ("d2", 1)]);
        let v: f32 = ndcg_at_k(&["d2", "d1"], &q, &RelevancePolicy::document(), 2);
        assert!((v - 0.7967).abs() < 1e-4);
    }
}
