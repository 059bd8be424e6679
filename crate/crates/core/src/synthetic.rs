//! A small generated collection for tests and demos.
//!
//! Each topic owns a handful of key terms. Relevant documents repeat those
//! terms more often the higher their grade; a few distractors mention one key
//! term in passing. Every (topic, document) pair is graded, so the qrels can
//! stand in for an assessor that never gets tired.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::baseline_search::{generate_candidates, Bm25Params, InvertedIndex, Rm3Params, SearchError};
use crate::trec_io::{
    save_qrels, save_run, write_corpus, write_topics, Category, CorpusRecord, DocRecord, Grade, MemoryCorpus, QrelsSet,
    RunFile, RunMetadata, Subtask, TaskKind, TopicId, TopicRecord, TrecIoError,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SyntheticSpec {
    pub docs: usize,
    pub topics: usize,
    pub seed: u64,
    /// Depth of the generated runs.
    pub run_depth: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            docs: 1000,
            topics: 20,
            seed: 2019,
            run_depth: 100,
        }
    }
}

/// Relevant documents per topic, cycled. A few topics get too few relevant to
/// be usable and one gets so many that judging cannot keep up.
const RELEVANT_PER_TOPIC: [usize; 10] = [14, 30, 2, 22, 45, 18, 160, 26, 36, 10];
const KEY_TERMS: usize = 6;
const BACKGROUND: usize = 400;

pub struct SyntheticCollection {
    pub corpus: MemoryCorpus,
    pub topics: Vec<TopicRecord>,
    /// Grades for every (topic, doc).
    pub oracle: QrelsSet,
    /// One grade-2-or-better document per topic, grade 1, MS MARCO style.
    pub sparse: QrelsSet,
    pub runs: Vec<RunFile>,
    pub metadata: Vec<RunMetadata>,
}

fn key_term(topic: usize, k: usize) -> String {
    format!("k{topic}{}", (b'a' + k as u8) as char)
}

fn background(rng: &mut ChaCha8Rng) -> String {
    let u: f64 = rng.random();
    format!("w{:03}", ((u * u) * BACKGROUND as f64) as usize)
}

fn words(rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    (0..n).map(|_| background(rng)).collect()
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticCollection, SearchError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut ids: Vec<usize> = (0..spec.docs).collect();
    ids.shuffle(&mut rng);

    // (topic, grade) per document slot; None for background-only documents
    let mut owner: Vec<Option<(usize, u8)>> = vec![None; spec.docs];
    let mut slot = 0;
    for t in 0..spec.topics {
        let n = RELEVANT_PER_TOPIC[t % RELEVANT_PER_TOPIC.len()];
        for _ in 0..n {
            if slot >= spec.docs {
                break;
            }
            let u: f64 = rng.random();
            let grade = if u < 0.2 { 3 } else if u < 0.5 { 2 } else { 1 };
            owner[ids[slot]] = Some((t, grade));
            slot += 1;
        }
    }

    let mut records = Vec::with_capacity(spec.docs);
    let mut oracle = QrelsSet::new();
    let mut sparse = QrelsSet::new();
    for (d, &own) in owner.iter().enumerate() {
        let doc_id = format!("D{:05}", d * 7 + 3);
        let body_len = rng.random_range(40..90);
        let mut body = words(&mut rng, body_len);
        let title_len = rng.random_range(2..5);
        let mut title = words(&mut rng, title_len);
        if let Some((t, grade)) = own {
            let mentions = match grade {
                3 => rng.random_range(8..12),
                2 => rng.random_range(4..8),
                _ => rng.random_range(1..4),
            };
            for _ in 0..mentions {
                let at = rng.random_range(0..=body.len());
                body.insert(at, key_term(t, rng.random_range(0..KEY_TERMS)));
            }
            if grade >= 2 {
                title.push(key_term(t, 0));
            }
        } else if spec.topics > 0 && rng.random_bool(0.3) {
            // distractor: one passing mention of some topic's term
            let t = rng.random_range(0..spec.topics);
            let at = rng.random_range(0..=body.len());
            body.insert(at, key_term(t, rng.random_range(0..KEY_TERMS)));
        }
        for t in 0..spec.topics {
            let g = match own {
                Some((o, g)) if o == t => g,
                _ => 0,
            };
            oracle.set(topic_id(t), doc_id.clone(), Grade::new(g).expect("grade in range"));
            if g >= 2 && sparse.topic(&topic_id(t)).is_none() {
                sparse.set(topic_id(t), doc_id.clone(), Grade::new(1).expect("grade in range"));
            }
        }
        records.push(CorpusRecord::Document(DocRecord {
            url: format!("http://example.org/{doc_id}"),
            doc_id,
            title: title.join(" "),
            body: body.join(" "),
        }));
    }
    let corpus = MemoryCorpus::new(TaskKind::Document, records).map_err(SearchError::Trec)?;

    let topics: Vec<TopicRecord> = (0..spec.topics)
        .map(|t| TopicRecord {
            topic_id: topic_id(t),
            text: (0..3).map(|k| key_term(t, k)).collect::<Vec<_>>().join(" "),
        })
        .collect();

    let index = InvertedIndex::build(&corpus)?;
    let short = |n: usize| -> Vec<TopicRecord> {
        topics
            .iter()
            .map(|t| TopicRecord {
                topic_id: t.topic_id.clone(),
                text: t.text.split(' ').take(n).collect::<Vec<_>>().join(" "),
            })
            .collect()
    };
    let default = Bm25Params::<f64>::default();
    let tuned = Bm25Params { k1: 1.2, b: 0.75 };
    let depth = spec.run_depth;
    let runs = vec![
        generate_candidates(&index, &topics, depth, "bm25_base", &default, None)?.0,
        generate_candidates(&index, &topics, depth, "bm25_rm3", &tuned, Some(&Rm3Params::default()))?.0,
        generate_candidates(&index, &short(2), depth, "bm25_two", &tuned, None)?.0,
        generate_candidates(&index, &short(1), depth, "bm25_one", &default, None)?.0,
        generate_candidates(&index, &topics, depth, "bm25_copy", &default, None)?.0,
    ];
    let team_of = [("bm25_base", "alpha"), ("bm25_rm3", "beta"), ("bm25_two", "beta"), ("bm25_one", "gamma"), ("bm25_copy", "delta")];
    let metadata = team_of
        .iter()
        .map(|(tag, team)| RunMetadata {
            run_tag: (*tag).into(),
            group: (*team).into(),
            subtask: Subtask::Fullrank,
            category: Category::Trad,
        })
        .collect();

    Ok(SyntheticCollection {
        corpus,
        topics,
        oracle,
        sparse,
        runs,
        metadata,
    })
}

fn topic_id(t: usize) -> TopicId {
    TopicId::from(format!("{}", 1000 + t * 37))
}

impl SyntheticCollection {
    pub fn teams(&self) -> BTreeMap<String, String> {
        self.metadata.iter().map(|m| (m.run_tag.clone(), m.group.clone())).collect()
    }

    pub fn topic_texts(&self) -> BTreeMap<TopicId, String> {
        self.topics.iter().map(|t| (t.topic_id.clone(), t.text.clone())).collect()
    }

    /// Write `corpus.tsv`, `topics.tsv`, `oracle.qrels`, `sparse.qrels`,
    /// `runs.meta` and `runs/<tag>.run` under `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(), TrecIoError> {
        fn io(path: &Path) -> impl Fn(std::io::Error) -> TrecIoError + '_ {
            move |source| TrecIoError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
        std::fs::create_dir_all(dir.join("runs")).map_err(io(dir))?;
        let corpus_path = dir.join("corpus.tsv");
        let mut w = std::io::BufWriter::new(std::fs::File::create(&corpus_path).map_err(io(&corpus_path))?);
        write_corpus(self.corpus.records(), &mut w)?;
        w.flush().map_err(io(&corpus_path))?;

        let topics_path = dir.join("topics.tsv");
        let mut w = std::io::BufWriter::new(std::fs::File::create(&topics_path).map_err(io(&topics_path))?);
        write_topics(&self.topics, &mut w)?;
        w.flush().map_err(io(&topics_path))?;

        save_qrels(&self.oracle, &dir.join("oracle.qrels"))?;
        save_qrels(&self.sparse, &dir.join("sparse.qrels"))?;
        for run in &self.runs {
            save_run(run, &dir.join("runs").join(format!("{}.run", run.tag())))?;
        }
        let meta_path = dir.join("runs.meta");
        let mut meta = String::from("# run_tag group subtask category\n");
        for m in &self.metadata {
            meta.push_str(&format!("{} {} fullrank trad\n", m.run_tag, m.group));
        }
        std::fs::write(&meta_path, meta).map_err(io(&meta_path))?;
        Ok(())
    }
}
