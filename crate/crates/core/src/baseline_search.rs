//! In-memory inverted index with BM25 ranking and RM3 query expansion, used
//! to produce baseline runs and rerank candidate lists.
//!
//! Text goes through [`tokenize`](crate::relevance_model::tokenize): no
//! stemming, no stopword list.
//!
//! # Index file layout
//!
//! [`InvertedIndex::save`] writes one JSON object:
//!
//! ```text
//! { "format": "trecdl-index", "version": 1, "kind": "document" | "passage",
//!   "docs": [[doc_id, length], ...],            // sorted by doc_id
//!   "postings": { term: [[doc_number, tf], ...] } // doc_number indexes "docs"
//! }
//! ```

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::relevance_model::tokenize;
use crate::scalar::Scalar;
use crate::trec_io::{Corpus, RunFile, TaskKind, TopicRecord, TrecIoError};

const FORMAT: &str = "trecdl-index";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("cannot index an empty corpus")]
    EmptyCorpus,
    #[error("index file: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Trec(#[from] TrecIoError),
    #[error("invalid parameters: {0}")]
    Params(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct InvertedIndex {
    kind: TaskKind,
    doc_ids: Vec<String>,
    doc_lens: Vec<u32>,
    postings: HashMap<String, Vec<(u32, u32)>>,
    /// Per-document term counts, rebuilt from the postings.
    forward: Vec<Vec<(String, u32)>>,
    total_len: u64,
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    format: String,
    version: u32,
    kind: TaskKind,
    docs: Vec<(String, u32)>,
    postings: BTreeMap<String, Vec<(u32, u32)>>,
}

impl InvertedIndex {
    /// Index `(id, text)` pairs. Ids must be unique.
    pub fn from_texts<S: Into<String>, T: AsRef<str>>(
        kind: TaskKind,
        texts: impl IntoIterator<Item = (S, T)>,
    ) -> Result<Self, SearchError> {
        let mut docs: Vec<(String, Vec<String>)> =
            texts.into_iter().map(|(id, t)| (id.into(), tokenize(t.as_ref()))).collect();
        if docs.is_empty() {
            return Err(SearchError::EmptyCorpus);
        }
        docs.sort_by(|a, b| a.0.cmp(&b.0));
        if let Some(w) = docs.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(SearchError::Format(format!("duplicate doc id `{}`", w[0].0)));
        }
        let mut postings: HashMap<String, Vec<(u32, u32)>> = HashMap::new();
        let mut doc_lens = Vec::with_capacity(docs.len());
        for (n, (_, toks)) in docs.iter().enumerate() {
            doc_lens.push(toks.len() as u32);
            let mut tf: BTreeMap<&str, u32> = BTreeMap::new();
            for t in toks {
                *tf.entry(t).or_default() += 1;
            }
            for (t, c) in tf {
                postings.entry(t.to_owned()).or_default().push((n as u32, c));
            }
        }
        let doc_ids = docs.into_iter().map(|(id, _)| id).collect();
        Ok(Self::assemble(kind, doc_ids, doc_lens, postings))
    }

    pub fn build(corpus: &dyn Corpus) -> Result<Self, SearchError> {
        let ids = corpus.ids();
        let texts = ids.into_iter().filter_map(|id| corpus.get(&id).map(|r| (id, r.index_text())));
        Self::from_texts(corpus.kind(), texts)
    }

    fn assemble(
        kind: TaskKind,
        doc_ids: Vec<String>,
        doc_lens: Vec<u32>,
        postings: HashMap<String, Vec<(u32, u32)>>,
    ) -> Self {
        let mut forward: Vec<Vec<(String, u32)>> = vec![Vec::new(); doc_ids.len()];
        for (term, list) in &postings {
            for &(d, tf) in list {
                forward[d as usize].push((term.clone(), tf));
            }
        }
        for f in &mut forward {
            f.sort();
        }
        let total_len = doc_lens.iter().map(|&l| l as u64).sum();
        Self {
            kind,
            doc_ids,
            doc_lens,
            postings,
            forward,
            total_len,
        }
    }

    pub fn kind(&self) -> TaskKind {
        self.kind
    }

    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn avg_doc_len(&self) -> f64 {
        self.total_len as f64 / self.doc_count() as f64
    }

    pub fn doc_len(&self, doc: &str) -> Option<u32> {
        self.doc_number(doc).map(|n| self.doc_lens[n])
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    /// `(doc_id, tf)` pairs for a term, sorted by doc id.
    pub fn postings(&self, term: &str) -> Vec<(&str, u32)> {
        self.postings
            .get(term)
            .map(|l| l.iter().map(|&(d, tf)| (self.doc_ids[d as usize].as_str(), tf)).collect())
            .unwrap_or_default()
    }

    pub fn vocabulary_size(&self) -> usize {
        self.postings.len()
    }

    fn doc_number(&self, doc: &str) -> Option<usize> {
        self.doc_ids.binary_search_by(|d| d.as_str().cmp(doc)).ok()
    }

    pub fn write<W: Write>(&self, w: W) -> Result<(), SearchError> {
        let file = IndexFile {
            format: FORMAT.into(),
            version: VERSION,
            kind: self.kind,
            docs: self.doc_ids.iter().cloned().zip(self.doc_lens.iter().copied()).collect(),
            postings: self.postings.iter().map(|(t, l)| (t.clone(), l.clone())).collect(),
        };
        serde_json::to_writer(w, &file)?;
        Ok(())
    }

    pub fn read<R: Read>(r: R) -> Result<Self, SearchError> {
        let file: IndexFile = serde_json::from_reader(r)?;
        if file.format != FORMAT {
            return Err(SearchError::Format(format!("unexpected format `{}`", file.format)));
        }
        if file.version != VERSION {
            return Err(SearchError::Format(format!("unsupported version {}", file.version)));
        }
        if file.docs.is_empty() {
            return Err(SearchError::EmptyCorpus);
        }
        if file.docs.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(SearchError::Format("docs are not sorted by id".into()));
        }
        let n = file.docs.len() as u32;
        for (term, list) in &file.postings {
            if list.iter().any(|&(d, tf)| d >= n || tf == 0) || list.windows(2).any(|w| w[0].0 >= w[1].0) {
                return Err(SearchError::Format(format!("bad posting list for `{term}`")));
            }
        }
        let (doc_ids, doc_lens) = file.docs.into_iter().unzip();
        Ok(Self::assemble(file.kind, doc_ids, doc_lens, file.postings.into_iter().collect()))
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), SearchError> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, SearchError> {
        Self::read(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Bm25Params<F> {
    pub k1: F,
    pub b: F,
}

impl<F: Scalar> Default for Bm25Params<F> {
    fn default() -> Self {
        Self {
            k1: F::lit(0.9),
            b: F::lit(0.4),
        }
    }
}

impl<F: Scalar> Bm25Params<F> {
    pub fn validate(&self) -> Result<(), SearchError> {
        if self.k1.is_nan() || self.k1 < F::zero() {
            return Err(SearchError::Params(format!("k1 = {} must be >= 0", self.k1)));
        }
        if self.b.is_nan() || self.b < F::zero() || self.b > F::one() {
            return Err(SearchError::Params(format!("b = {} must be in [0, 1]", self.b)));
        }
        Ok(())
    }
}

/// A query as term weights. Plain text queries weigh each term by its count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct WeightedQuery<F> {
    pub terms: Vec<(String, F)>,
}

impl<F: Scalar> WeightedQuery<F> {
    pub fn from_text(text: &str) -> Self {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for t in tokenize(text) {
            *counts.entry(t).or_default() += 1;
        }
        Self {
            terms: counts.into_iter().map(|(t, c)| (t, F::from_count(c))).collect(),
        }
    }

    /// Same terms, weights rescaled to sum to 1.
    pub fn normalized(&self) -> Self {
        let total = self.terms.iter().fold(F::zero(), |acc, (_, w)| acc + *w);
        if total <= F::zero() {
            return self.clone();
        }
        Self {
            terms: self.terms.iter().map(|(t, w)| (t.clone(), *w / total)).collect(),
        }
    }

    pub fn weight(&self, term: &str) -> F {
        self.terms.iter().find(|(t, _)| t == term).map_or(F::zero(), |(_, w)| *w)
    }
}

pub fn bm25_idf<F: Scalar>(n: usize, df: usize) -> F {
    let (n, df) = (F::from_count(n), F::from_count(df));
    let half = F::lit(0.5);
    ((n - df + half) / (df + half) + F::one()).ln()
}

/// Top `k` documents for a text query, canonical order.
pub fn bm25_search<F: Scalar>(index: &InvertedIndex, query: &str, k: usize, params: &Bm25Params<F>) -> Vec<(String, F)> {
    bm25_search_weighted(index, &WeightedQuery::from_text(query), k, params)
}

/// Documents sharing no term with the query are never returned.
pub fn bm25_search_weighted<F: Scalar>(
    index: &InvertedIndex,
    query: &WeightedQuery<F>,
    k: usize,
    params: &Bm25Params<F>,
) -> Vec<(String, F)> {
    let n = index.doc_count();
    let avg = F::lit(index.avg_doc_len());
    let mut acc: HashMap<u32, F> = HashMap::new();
    for (term, qw) in &query.terms {
        let Some(list) = index.postings.get(term) else {
            continue;
        };
        let idf: F = bm25_idf(n, list.len());
        for &(d, tf) in list {
            let tf = F::from_count(tf as usize);
            let len = F::from_count(index.doc_lens[d as usize] as usize);
            let norm = if avg > F::zero() {
                F::one() - params.b + params.b * len / avg
            } else {
                F::one()
            };
            let s = idf * tf * (params.k1 + F::one()) / (tf + params.k1 * norm);
            let e = acc.entry(d).or_insert_with(F::zero);
            *e = *e + *qw * s;
        }
    }
    let mut hits: Vec<(String, F)> = acc.into_iter().map(|(d, s)| (index.doc_ids[d as usize].clone(), s)).collect();
    hits.sort_by(|a, b| F::cmp_desc(&a.1, &b.1).then_with(|| b.0.cmp(&a.0)));
    hits.truncate(k);
    hits
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Rm3Params<F> {
    pub fb_docs: usize,
    pub fb_terms: usize,
    /// Weight of the original query in the interpolation.
    pub lambda: F,
}

impl<F: Scalar> Default for Rm3Params<F> {
    fn default() -> Self {
        Self {
            fb_docs: 10,
            fb_terms: 10,
            lambda: F::lit(0.5),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Expansion<F> {
    /// The query to run.
    pub query: WeightedQuery<F>,
    /// Feedback term weights before interpolation; they sum to 1 when non-empty.
    pub feedback: Vec<(String, F)>,
    pub warning: Option<String>,
}

/// Expand a query with a relevance model estimated from the top BM25 results.
pub fn rm3_expand<F: Scalar>(
    index: &InvertedIndex,
    query: &str,
    bm25: &Bm25Params<F>,
    rm3: &Rm3Params<F>,
) -> Expansion<F> {
    let original = WeightedQuery::<F>::from_text(query).normalized();
    if rm3.lambda >= F::one() || rm3.fb_terms == 0 || rm3.fb_docs == 0 {
        return Expansion {
            query: original,
            feedback: Vec::new(),
            warning: None,
        };
    }
    let top = bm25_search(index, query, rm3.fb_docs, bm25);
    let total = top.iter().fold(F::zero(), |acc, (_, s)| acc + *s);
    if top.is_empty() || total <= F::zero() {
        return Expansion {
            query: original,
            feedback: Vec::new(),
            warning: Some("no documents retrieved for feedback; using the original query".into()),
        };
    }
    let mut rel: BTreeMap<&str, F> = BTreeMap::new();
    for (doc, score) in &top {
        let d = index.doc_number(doc).expect("hit comes from the index");
        let len = F::from_count(index.doc_lens[d] as usize);
        let doc_w = *score / total;
        for (term, tf) in &index.forward[d] {
            let e = rel.entry(term).or_insert_with(F::zero);
            *e = *e + doc_w * F::from_count(*tf as usize) / len;
        }
    }
    let mut feedback: Vec<(String, F)> = rel.into_iter().map(|(t, w)| (t.to_owned(), w)).collect();
    feedback.sort_by(|a, b| F::cmp_desc(&a.1, &b.1).then_with(|| a.0.cmp(&b.0)));
    feedback.truncate(rm3.fb_terms);
    let mass = feedback.iter().fold(F::zero(), |acc, (_, w)| acc + *w);
    for (_, w) in &mut feedback {
        *w = *w / mass;
    }

    let mut mixed: BTreeMap<String, F> = BTreeMap::new();
    for (t, w) in &original.terms {
        mixed.insert(t.clone(), rm3.lambda * *w);
    }
    for (t, w) in &feedback {
        let e = mixed.entry(t.clone()).or_insert_with(F::zero);
        *e = *e + (F::one() - rm3.lambda) * *w;
    }
    Expansion {
        query: WeightedQuery {
            terms: mixed.into_iter().filter(|(_, w)| *w > F::zero()).collect(),
        },
        feedback,
        warning: None,
    }
}

/// Score every topic and return the top `k` per topic as a run. With `rm3`
/// set, retrieval uses the expanded query.
pub fn generate_candidates<F: Scalar>(
    index: &InvertedIndex,
    topics: &[TopicRecord],
    k: usize,
    tag: &str,
    bm25: &Bm25Params<F>,
    rm3: Option<&Rm3Params<F>>,
) -> Result<(RunFile, Vec<String>), SearchError> {
    bm25.validate()?;
    let mut warnings = Vec::new();
    let mut scored = Vec::new();
    for topic in topics {
        let hits = match rm3 {
            Some(p) => {
                let e = rm3_expand(index, &topic.text, bm25, p);
                if let Some(w) = e.warning {
                    warnings.push(format!("topic {}: {w}", topic.topic_id));
                }
                bm25_search_weighted(index, &e.query, k, bm25)
            }
            None => bm25_search(index, &topic.text, k, bm25),
        };
        for (doc, s) in hits {
            scored.push((topic.topic_id.clone(), doc, s.to_f64().unwrap_or(0.0)));
        }
    }
    Ok((RunFile::from_scored(tag, scored)?, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn toy() -> InvertedIndex {
        InvertedIndex::from_texts(
            TaskKind::Passage,
            [("a", "apple banana apple cherry"), ("b", "banana cherry date elder"), ("c", "fig grape honey kiwi")],
        )
        .unwrap()
    }

    #[test]
    fn statistics() {
        let idx = toy();
        assert_eq!(idx.doc_count(), 3);
        assert_eq!(idx.doc_freq("banana"), 2);
        assert_eq!(idx.postings("cherry"), [("a", 1), ("b", 1)]);
        assert_eq!(idx.avg_doc_len(), 4.0);
        assert!(InvertedIndex::from_texts::<&str, &str>(TaskKind::Passage, []).is_err());
    }

    #[test]
    fn hand_computed_score() {
        // N = 3, df = 1, tf = 2, len = avglen
        let idx = toy();
        let hits = bm25_search::<f64>(&idx, "apple", 10, &Bm25Params::default());
        assert_eq!(hits.len(), 1);
        let expect = (2.5f64 / 1.5 + 1.0).ln() * 2.0 * 1.9 / (2.0 + 0.9);
        assert_abs_diff_eq!(hits[0].1, expect, epsilon = 1e-9);
    }

    #[test]
    fn no_shared_terms_no_hit() {
        let hits = bm25_search::<f64>(&toy(), "zebra", 10, &Bm25Params::default());
        assert!(hits.is_empty());
    }

    #[test]
    fn serialization_round_trip() {
        let idx = toy();
        let mut buf = Vec::new();
        idx.write(&mut buf).unwrap();
        assert_eq!(InvertedIndex::read(buf.as_slice()).unwrap(), idx);
        let bad = String::from_utf8(buf).unwrap().replace("\"version\":1", "\"version\":9");
        assert!(InvertedIndex::read(bad.as_bytes()).is_err());
    }

    #[test]
    fn rm3_identity_cases() {
        let idx = toy();
        let bm25 = Bm25Params::<f64>::default();
        let plain = bm25_search(&idx, "banana cherry", 10, &bm25);
        let order = |q: &WeightedQuery<f64>| {
            bm25_search_weighted(&idx, q, 10, &bm25).into_iter().map(|(d, _)| d).collect::<Vec<_>>()
        };
        let e = rm3_expand(&idx, "banana cherry", &bm25, &Rm3Params { lambda: 1.0, ..Default::default() });
        assert_eq!(order(&e.query), plain.iter().map(|(d, _)| d.clone()).collect::<Vec<_>>());
        let e = rm3_expand(&idx, "banana cherry", &bm25, &Rm3Params { fb_terms: 0, ..Default::default() });
        assert_eq!(e.query, WeightedQuery::from_text("banana cherry").normalized());
    }

    #[test]
    fn rm3_feedback_is_a_distribution() {
        let idx = toy();
        let e = rm3_expand::<f64>(&idx, "banana", &Bm25Params::default(), &Rm3Params::default());
        let sum: f64 = e.feedback.iter().map(|(_, w)| w).sum();
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
        let total: f64 = e.query.terms.iter().map(|(_, w)| w).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        let e = rm3_expand::<f64>(&idx, "zebra", &Bm25Params::default(), &Rm3Params::default());
        assert!(e.warning.is_some());
    }

    #[test]
    fn candidates_short_lists_and_round_trip() {
        let idx = toy();
        let topics = vec![
            TopicRecord { topic_id: "1".into(), text: "banana".into() },
            TopicRecord { topic_id: "2".into(), text: "kiwi".into() },
        ];
        let (run, warnings) = generate_candidates::<f64>(&idx, &topics, 100, "bm25", &Bm25Params::default(), None).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(run.topic(&"1".into()).len(), 2);
        assert_eq!(run.topic(&"2".into()).len(), 1);
        let mut out = Vec::new();
        crate::trec_io::write_run(&run, &mut out).unwrap();
        let (back, w) = crate::trec_io::read_run(out.as_slice()).unwrap();
        assert!(w.is_empty());
        assert_eq!(back, run);
    }
}
