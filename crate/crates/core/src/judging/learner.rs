use indexmap::{IndexMap, IndexSet};

use crate::metrics::RelevancePolicy;
use crate::relevance_model::{select_next, Scorer};
use crate::trec_io::Grade;

/// Seed for the `batch`-th selection of a topic whose seed is `seed`.
pub fn batch_seed(seed: u64, batch: usize) -> u64 {
    // splitmix64 finaliser
    let mut z = seed.wrapping_add((batch as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Train on `judged` and return up to `n` of the highest-scoring documents of
/// `universe` that are not in `issued`.
#[allow(clippy::too_many_arguments)]
pub fn select_batch<S: Scorer + ?Sized>(
    scorer: &S,
    query: &str,
    judged: &IndexMap<String, Grade>,
    policy: &RelevancePolicy,
    universe: &[String],
    issued: &IndexSet<String>,
    n: usize,
    seed: u64,
) -> Vec<String> {
    if n == 0 {
        return Vec::new();
    }
    let candidates: Vec<&str> = universe.iter().map(String::as_str).filter(|d| !issued.contains(*d)).collect();
    if candidates.is_empty() {
        return Vec::new();
    }
    let (mut positives, mut negatives) = (Vec::new(), Vec::new());
    for (doc, g) in judged {
        if policy.is_relevant(Some(*g)) {
            positives.push(doc.as_str());
        } else {
            negatives.push(doc.as_str());
        }
    }
    let scores = scorer.score_candidates(query, &positives, &negatives, &candidates);
    let scored: Vec<(&str, f64)> = candidates.into_iter().zip(scores).collect();
    let mut order = select_next(&scored, seed).expect("candidates are non-empty");
    order.truncate(n);
    order.into_iter().map(str::to_owned).collect()
}
