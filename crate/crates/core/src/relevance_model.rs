//! The classifier that decides which unjudged document an assessor sees next.
//!
//! Documents become L2-normalised tf-idf vectors (`log(1 + tf) * idf`). A
//! model is an L2-regularised logistic regression fitted by full-batch
//! gradient descent, so fitting is deterministic. The topic's query text is
//! always added to the training set as one extra positive example; with no
//! judgments at all the query vector itself is the model.
//!
//! Other scoring strategies plug in through [`Scorer`].

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trec_io::Corpus;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("no candidates to select from")]
    NoCandidates,
}

/// Lowercase, split on anything that is not alphanumeric, drop empties.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Sparse vector keyed by term id, sorted by id.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    entries: Vec<(u32, f64)>,
}

impl FeatureVector {
    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.entries
            .iter()
            .map(|&(t, w)| dense.get(t as usize).copied().unwrap_or(0.0) * w)
            .sum()
    }
}

/// Vocabulary and document frequencies of a corpus, plus the vector of every
/// document in it.
#[derive(Clone, Debug)]
pub struct FeatureSpace {
    vocab: HashMap<String, u32>,
    idf: Vec<f64>,
    docs: HashMap<String, FeatureVector>,
}

impl FeatureSpace {
    /// Build from `(id, text)` pairs.
    pub fn from_texts<I, S, T>(texts: I) -> Self
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: AsRef<str>,
    {
        let mut vocab: HashMap<String, u32> = HashMap::new();
        let mut df: Vec<u32> = Vec::new();
        let mut counted: Vec<(String, Vec<(u32, u32)>)> = Vec::new();
        for (id, text) in texts {
            let mut tf: HashMap<u32, u32> = HashMap::new();
            for tok in tokenize(text.as_ref()) {
                let next = vocab.len() as u32;
                let t = *vocab.entry(tok).or_insert(next);
                if t as usize == df.len() {
                    df.push(0);
                }
                *tf.entry(t).or_default() += 1;
            }
            for &t in tf.keys() {
                df[t as usize] += 1;
            }
            counted.push((id.into(), tf.into_iter().collect()));
        }
        let n = counted.len() as f64;
        let idf = df.iter().map(|&d| ((n + 1.0) / (d as f64 + 1.0)).ln() + 1.0).collect();
        let mut space = FeatureSpace {
            vocab,
            idf,
            docs: HashMap::with_capacity(counted.len()),
        };
        for (id, tf) in counted {
            let v = space.weigh(tf);
            space.docs.insert(id, v);
        }
        space
    }

    /// Vectorise every record of a corpus (title and body for documents).
    pub fn from_corpus(corpus: &dyn Corpus) -> Self {
        Self::from_texts(
            corpus
                .ids()
                .into_iter()
                .filter_map(|id| corpus.get(&id).map(|r| (id, r.index_text()))),
        )
    }

    pub fn dim(&self) -> usize {
        self.idf.len()
    }

    pub fn term_id(&self, term: &str) -> Option<u32> {
        self.vocab.get(term).copied()
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.term_id(term).map(|t| self.idf[t as usize])
    }

    pub fn doc(&self, id: &str) -> Option<&FeatureVector> {
        self.docs.get(id)
    }

    pub fn doc_count(&self) -> usize {
        self.docs.len()
    }

    /// Vectorise arbitrary text. Terms outside the vocabulary are dropped.
    pub fn vectorize(&self, text: &str) -> FeatureVector {
        let mut tf: HashMap<u32, u32> = HashMap::new();
        for tok in tokenize(text) {
            if let Some(t) = self.term_id(&tok) {
                *tf.entry(t).or_default() += 1;
            }
        }
        self.weigh(tf.into_iter().collect())
    }

    fn weigh(&self, mut tf: Vec<(u32, u32)>) -> FeatureVector {
        tf.sort_unstable_by_key(|&(t, _)| t);
        let mut entries: Vec<(u32, f64)> = tf
            .into_iter()
            .map(|(t, c)| (t, (1.0 + c as f64).ln() * self.idf[t as usize]))
            .collect();
        let norm = entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, w) in &mut entries {
                *w /= norm;
            }
        }
        FeatureVector { entries }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    /// L2 penalty on the coefficients (not the bias).
    pub l2: f64,
    pub learning_rate: f64,
    pub iterations: usize,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            l2: 1e-3,
            learning_rate: 2.0,
            iterations: 60,
        }
    }
}

/// A linear scorer over a [`FeatureSpace`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelevanceModel {
    weights: Vec<f64>,
    bias: f64,
    /// Number of training examples, judged documents only.
    pub trained_on: usize,
}

impl RelevanceModel {
    pub fn score(&self, v: &FeatureVector) -> f64 {
        v.dot(&self.weights) + self.bias
    }

    pub fn coefficient(&self, space: &FeatureSpace, term: &str) -> f64 {
        space
            .term_id(term)
            .and_then(|t| self.weights.get(t as usize).copied())
            .unwrap_or(0.0)
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    /// Multiply every coefficient and the bias by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            weights: self.weights.iter().map(|w| w * c).collect(),
            bias: self.bias * c,
            trained_on: self.trained_on,
        }
    }
}

/// Fit a model on judged document ids. Ids missing from `space` are skipped.
/// With no usable judgments the query's own vector is returned as the model.
pub fn fit(
    space: &FeatureSpace,
    positives: &[&str],
    negatives: &[&str],
    query: &str,
    params: &LogisticParams,
) -> RelevanceModel {
    let q = space.vectorize(query);
    let mut examples: Vec<(&FeatureVector, f64)> = Vec::new();
    examples.extend(positives.iter().filter_map(|d| space.doc(d)).map(|v| (v, 1.0)));
    examples.extend(negatives.iter().filter_map(|d| space.doc(d)).map(|v| (v, 0.0)));
    let trained_on = examples.len();
    if trained_on == 0 {
        let mut weights = vec![0.0; space.dim()];
        for &(t, w) in q.entries() {
            weights[t as usize] = w;
        }
        return RelevanceModel {
            weights,
            bias: 0.0,
            trained_on,
        };
    }
    examples.push((&q, 1.0));

    let n = examples.len() as f64;
    let mut weights = vec![0.0; space.dim()];
    let mut bias = 0.0;
    let mut grad = vec![0.0; space.dim()];
    for _ in 0..params.iterations {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_bias = 0.0;
        for &(v, y) in &examples {
            let p = sigmoid(v.dot(&weights) + bias);
            let err = (p - y) / n;
            for &(t, x) in v.entries() {
                grad[t as usize] += err * x;
            }
            grad_bias += err;
        }
        for (w, g) in weights.iter_mut().zip(&grad) {
            *w -= params.learning_rate * (g + params.l2 * *w);
        }
        bias -= params.learning_rate * grad_bias;
    }
    RelevanceModel {
        weights,
        bias,
        trained_on,
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Order candidates by score, highest first. Exact ties are broken by a
/// shuffle seeded from `seed`, so the result is reproducible.
pub fn select_next<D: AsRef<str> + Clone>(scored: &[(D, f64)], seed: u64) -> Result<Vec<D>, ModelError> {
    if scored.is_empty() {
        return Err(ModelError::NoCandidates);
    }
    let mut order: Vec<&(D, f64)> = scored.iter().collect();
    order.sort_by(|a, b| a.0.as_ref().cmp(b.0.as_ref()));
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(order.into_iter().map(|(d, _)| d.clone()).collect())
}

/// Anything that can rank candidate documents given the current judgments.
pub trait Scorer: Send + Sync {
    /// Scores for `candidates`, in the same order.
    fn score_candidates(&self, query: &str, positives: &[&str], negatives: &[&str], candidates: &[&str]) -> Vec<f64>;
}

/// The default scorer: [`fit`] over a prebuilt feature space.
#[derive(Clone, Debug)]
pub struct TfIdfLogistic {
    pub space: FeatureSpace,
    pub params: LogisticParams,
}

impl TfIdfLogistic {
    pub fn new(space: FeatureSpace) -> Self {
        Self {
            space,
            params: LogisticParams::default(),
        }
    }
}

impl Scorer for TfIdfLogistic {
    fn score_candidates(&self, query: &str, positives: &[&str], negatives: &[&str], candidates: &[&str]) -> Vec<f64> {
        let model = fit(&self.space, positives, negatives, query, &self.params);
        candidates
            .iter()
            .map(|d| self.space.doc(d).map(|v| model.score(v)).unwrap_or(f64::NEG_INFINITY))
            .collect()
    }
}

/// Gives every candidate the same score, so selection order is decided by
/// the seeded tie-break alone.
#[derive(Clone, Copy, Debug, Default)]
pub struct ConstantScorer;

impl Scorer for ConstantScorer {
    fn score_candidates(&self, _: &str, _: &[&str], _: &[&str], candidates: &[&str]) -> Vec<f64> {
        vec![0.0; candidates.len()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space() -> FeatureSpace {
        FeatureSpace::from_texts([
            ("d1", "solar panels on the roof"),
            ("d2", "solar energy and solar panels"),
            ("d3", "the cat sat on the mat"),
            ("d4", "panels of judges"),
            ("d5", "wind energy farms"),
        ])
    }

    #[test]
    fn tokenizer_rules() {
        assert_eq!(tokenize("Dog, dog RUNS!"), ["dog", "dog", "runs"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("a1-b2_c3"), ["a1", "b2", "c3"]);
    }

    #[test]
    fn vectors_are_unit_length() {
        let s = space();
        for id in ["d1", "d2", "d3"] {
            let n: f64 = s.doc(id).unwrap().entries().iter().map(|(_, w)| w * w).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
        assert!(s.vectorize("").is_empty());
        assert!(s.vectorize("unseen words").is_empty());
    }

    #[test]
    fn separable_case() {
        let s = FeatureSpace::from_texts([("p", "t"), ("n", "u")]);
        let m = fit(&s, &["p"], &["n"], "", &LogisticParams::default());
        assert!(m.coefficient(&s, "t") > 0.0);
        assert!(m.coefficient(&s, "u") < 0.0);
    }

    #[test]
    fn cold_start_follows_query_similarity() {
        let s = space();
        let m = fit(&s, &[], &[], "solar panels", &LogisticParams::default());
        let score = |d: &str| m.score(s.doc(d).unwrap());
        assert!(score("d2") > score("d4"));
        assert!(score("d1") > score("d4"));
        assert!(score("d4") > score("d3"));
        assert_eq!(score("d3"), 0.0);
    }

    #[test]
    fn revision_moves_doc_between_classes() {
        let s = space();
        let p = LogisticParams::default();
        let before = fit(&s, &["d1", "d4"], &["d3"], "solar", &p);
        let after = fit(&s, &["d1"], &["d3", "d4"], "solar", &p);
        let v = s.doc("d4").unwrap();
        assert!(after.score(v) < before.score(v));
        assert_eq!(before.trained_on, after.trained_on);
    }

    #[test]
    fn selection_order() {
        assert_eq!(select_next(&[("A", 0.9), ("B", 0.1)], 7).unwrap(), ["A", "B"]);
        assert_eq!(select_next::<&str>(&[], 7), Err(ModelError::NoCandidates));
    }

    #[test]
    fn tied_selection_is_seeded() {
        let tied: Vec<(String, f64)> = (0..20).map(|i| (format!("d{i}"), 0.5)).collect();
        let a = select_next(&tied, 11).unwrap();
        assert_eq!(a, select_next(&tied, 11).unwrap());
        let b = select_next(&tied, 12).unwrap();
        assert_eq!(b, select_next(&tied, 12).unwrap());
        assert_ne!(a, b);
        // input order does not matter
        let mut rev = tied.clone();
        rev.reverse();
        assert_eq!(select_next(&rev, 11).unwrap(), a);
    }

    #[test]
    fn scaling_keeps_order() {
        let s = space();
        let m = fit(&s, &["d2"], &["d3", "d5"], "solar", &LogisticParams::default());
        let rank = |m: &RelevanceModel| {
            let scored: Vec<(&str, f64)> =
                ["d1", "d2", "d3", "d4", "d5"].iter().map(|d| (*d, m.score(s.doc(d).unwrap()))).collect();
            select_next(&scored, 0).unwrap()
        };
        assert_eq!(rank(&m), rank(&m.scaled(3.5)));
    }
}
