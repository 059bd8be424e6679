use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{open, trim_eol, Result, TopicId, TrecIoError};

/// One ranked result of a run for a topic. The topic and run tag live on the
/// enclosing [`RunFile`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub doc_id: String,
    pub rank: u32,
    pub score: f64,
}

/// Canonical result order: score descending, then doc id descending.
pub fn canonical_cmp(a_score: f64, a_doc: &str, b_score: f64, b_doc: &str) -> Ordering {
    b_score.total_cmp(&a_score).then_with(|| b_doc.cmp(a_doc))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subtask {
    Rerank,
    Fullrank,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Nnlm,
    Nn,
    Trad,
}

impl std::str::FromStr for Subtask {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "rerank" => Ok(Subtask::Rerank),
            "fullrank" => Ok(Subtask::Fullrank),
            _ => Err(format!("unknown subtask `{s}` (expected rerank|fullrank)")),
        }
    }
}

impl std::str::FromStr for Category {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "nnlm" => Ok(Category::Nnlm),
            "nn" => Ok(Category::Nn),
            "trad" => Ok(Category::Trad),
            _ => Err(format!("unknown category `{s}` (expected nnlm|nn|trad)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub run_tag: String,
    pub group: String,
    pub subtask: Subtask,
    pub category: Category,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunWarning {
    pub topic_id: TopicId,
    pub message: String,
}

impl fmt::Display for RunWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "topic {}: {}", self.topic_id, self.message)
    }
}

/// A system's ranked results for every topic it answered.
///
/// Entries of each topic are kept in canonical order with ranks `1..=n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunFile {
    tag: String,
    topics: BTreeMap<TopicId, Vec<RunEntry>>,
}

impl RunFile {
    pub fn new(tag: impl Into<String>) -> Self {
        Self {
            tag: tag.into(),
            topics: BTreeMap::new(),
        }
    }

    /// Build a run from unordered `(topic, doc, score)` triples.
    /// Fails on a repeated `(topic, doc)` pair.
    pub fn from_scored<T, D>(
        tag: impl Into<String>,
        scored: impl IntoIterator<Item = (T, D, f64)>,
    ) -> Result<Self>
    where
        T: Into<TopicId>,
        D: Into<String>,
    {
        let mut run = RunFile::new(tag);
        let mut seen: HashSet<(TopicId, String)> = HashSet::new();
        for (i, (t, d, score)) in scored.into_iter().enumerate() {
            let (t, d) = (t.into(), d.into());
            if !seen.insert((t.clone(), d.clone())) {
                return Err(TrecIoError::Duplicate {
                    line: i + 1,
                    what: "(topic, doc) pair",
                    id: format!("{t} {d}"),
                });
            }
            run.topics.entry(t).or_default().push(RunEntry {
                doc_id: d,
                rank: 0,
                score,
            });
        }
        for entries in run.topics.values_mut() {
            canonicalize(entries);
        }
        Ok(run)
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.tag = tag.into();
        self
    }

    pub fn topic_ids(&self) -> impl Iterator<Item = &TopicId> {
        self.topics.keys()
    }

    pub fn topics(&self) -> impl Iterator<Item = (&TopicId, &[RunEntry])> {
        self.topics.iter().map(|(t, e)| (t, e.as_slice()))
    }

    /// Entries of a topic in canonical order; empty when the run skipped the topic.
    pub fn topic(&self, topic: &TopicId) -> &[RunEntry] {
        self.topics.get(topic).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn ranked_docs(&self, topic: &TopicId) -> Vec<&str> {
        self.topic(topic).iter().map(|e| e.doc_id.as_str()).collect()
    }

    /// Total number of entries over all topics.
    pub fn len(&self) -> usize {
        self.topics.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Keep the top `k` entries of every topic. `k = 0` is treated as 1.
    pub fn truncate(&self, k: usize) -> RunFile {
        let k = k.max(1);
        RunFile {
            tag: self.tag.clone(),
            topics: self
                .topics
                .iter()
                .map(|(t, e)| (t.clone(), e.iter().take(k).cloned().collect()))
                .collect(),
        }
    }
}

fn canonicalize(entries: &mut [RunEntry]) {
    entries.sort_by(|a, b| canonical_cmp(a.score, &a.doc_id, b.score, &b.doc_id));
    for (i, e) in entries.iter_mut().enumerate() {
        e.rank = i as u32 + 1;
    }
}

/// Read a run. Scores are authoritative: when the file's ranks disagree with
/// the canonical score order (or are not `1..=n`), the topic is re-ranked and
/// a warning is returned.
pub fn read_run<R: BufRead>(reader: R) -> Result<(RunFile, Vec<RunWarning>)> {
    let mut tag: Option<String> = None;
    let mut topics: BTreeMap<TopicId, Vec<RunEntry>> = BTreeMap::new();
    let mut seen: HashSet<(TopicId, String)> = HashSet::new();

    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        let line = trim_eol(&line);
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 6 {
            return Err(TrecIoError::malformed(
                line_no,
                format!("expected 6 columns `topic Q0 doc rank score tag`, found {}", cols.len()),
            ));
        }
        let topic = TopicId::from(cols[0]);
        let doc = cols[2];
        let rank: u32 = cols[3]
            .parse()
            .map_err(|_| TrecIoError::malformed(line_no, format!("rank `{}` is not a non-negative integer", cols[3])))?;
        let score: f64 = cols[4]
            .parse()
            .map_err(|_| TrecIoError::malformed(line_no, format!("score `{}` is not numeric", cols[4])))?;
        if !score.is_finite() {
            return Err(TrecIoError::malformed(line_no, format!("score `{}` is not finite", cols[4])));
        }
        match &tag {
            None => tag = Some(cols[5].to_owned()),
            Some(t) if t != cols[5] => {
                return Err(TrecIoError::malformed(
                    line_no,
                    format!("run tag `{}` differs from `{t}` used earlier", cols[5]),
                ))
            }
            Some(_) => {}
        }
        if !seen.insert((topic.clone(), doc.to_owned())) {
            return Err(TrecIoError::Duplicate {
                line: line_no,
                what: "(topic, doc) pair",
                id: format!("{topic} {doc}"),
            });
        }
        topics.entry(topic).or_default().push(RunEntry {
            doc_id: doc.to_owned(),
            rank,
            score,
        });
    }

    let tag = tag.ok_or_else(|| TrecIoError::malformed(0, "run file has no entries"))?;
    let mut warnings = Vec::new();
    for (topic, entries) in topics.iter_mut() {
        canonicalize_with_ranks(entries, topic, &mut warnings);
    }
    Ok((RunFile { tag, topics }, warnings))
}

fn canonicalize_with_ranks(entries: &mut [RunEntry], topic: &TopicId, warnings: &mut Vec<RunWarning>) {
    let stated: Vec<u32> = {
        let mut v = entries.to_vec();
        v.sort_by(|a, b| canonical_cmp(a.score, &a.doc_id, b.score, &b.doc_id));
        v.iter().map(|e| e.rank).collect()
    };
    let consistent = stated.iter().enumerate().all(|(i, &r)| r as usize == i + 1);
    canonicalize(entries);
    if !consistent {
        warnings.push(RunWarning {
            topic_id: topic.clone(),
            message: format!(
                "ranks disagree with score order or are not 1..{}; re-ranked by score",
                entries.len()
            ),
        });
    }
}

pub fn parse_run(path: &Path) -> Result<(RunFile, Vec<RunWarning>)> {
    read_run(open(path)?).map_err(|e| e.at(path))
}

pub fn write_run<W: Write>(run: &RunFile, w: &mut W) -> Result<()> {
    if run.tag.is_empty() || run.tag.contains(char::is_whitespace) {
        return Err(TrecIoError::Unrepresentable {
            what: "run",
            reason: format!("run tag `{}` is empty or contains whitespace", run.tag),
        });
    }
    for (topic, entries) in &run.topics {
        for e in entries {
            writeln!(w, "{topic} Q0 {} {} {} {}", e.doc_id, e.rank, e.score, run.tag)?;
        }
    }
    Ok(())
}

pub fn save_run(run: &RunFile, path: &Path) -> Result<()> {
    let mut w = super::create(path)?;
    write_run(run, &mut w).and_then(|_| w.flush().map_err(Into::into)).map_err(|e| e.at(path))
}

/// Read run metadata lines `tag group subtask category` (whitespace separated).
pub fn read_run_metadata<R: BufRead>(reader: R) -> Result<Vec<RunMetadata>> {
    let mut out = Vec::new();
    let mut seen = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        let line = trim_eol(&line);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 4 {
            return Err(TrecIoError::malformed(
                line_no,
                "expected 4 columns `tag group subtask category`",
            ));
        }
        let subtask = cols[2].parse().map_err(|e: String| TrecIoError::malformed(line_no, e))?;
        let category = cols[3].parse().map_err(|e: String| TrecIoError::malformed(line_no, e))?;
        if seen.insert(cols[0].to_owned(), line_no).is_some() {
            return Err(TrecIoError::Duplicate {
                line: line_no,
                what: "run tag",
                id: cols[0].to_owned(),
            });
        }
        out.push(RunMetadata {
            run_tag: cols[0].to_owned(),
            group: cols[1].to_owned(),
            subtask,
            category,
        });
    }
    Ok(out)
}

pub fn parse_run_metadata(path: &Path) -> Result<Vec<RunMetadata>> {
    read_run_metadata(open(path)?).map_err(|e| e.at(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<(RunFile, Vec<RunWarning>)> {
        read_run(text.as_bytes())
    }

    #[test]
    fn single_line() {
        let (run, warnings) = parse("123 Q0 D456 1 7.5 mytag\n").unwrap();
        assert!(warnings.is_empty());
        assert_eq!(run.tag(), "mytag");
        let entries = run.topic(&TopicId::from("123"));
        assert_eq!(
            entries,
            [RunEntry {
                doc_id: "D456".into(),
                rank: 1,
                score: 7.5
            }]
        );
    }

    #[test]
    fn duplicate_topic_doc_is_an_error() {
        let err = parse("1 Q0 D1 1 2.0 t\n1 Q0 D1 2 1.0 t\n").unwrap_err();
        assert!(matches!(err, TrecIoError::Duplicate { line: 2, .. }));
    }

    #[test]
    fn non_numeric_score_is_an_error() {
        let err = parse("1 Q0 D1 1 high t\n").unwrap_err();
        assert!(matches!(err, TrecIoError::Malformed { line: 1, .. }));
        assert!(parse("1 Q0 D1 1 NaN t\n").is_err());
    }

    #[test]
    fn inconsistent_ranks_are_renormalized_by_score() {
        // ranks [2,1] against scores [9.0, 1.0]; sorting by score puts D1 first.
        let (run, warnings) = parse("1 Q0 D1 2 9.0 t\n1 Q0 D2 1 1.0 t\n").unwrap();
        assert_eq!(warnings.len(), 1);
        let entries = run.topic(&TopicId::from("1"));
        let got: Vec<(&str, u32)> = entries.iter().map(|e| (e.doc_id.as_str(), e.rank)).collect();
        assert_eq!(got, [("D1", 1), ("D2", 2)]);
    }

    #[test]
    fn zero_based_ranks_warn() {
        let (_, warnings) = parse("1 Q0 D1 0 9.0 t\n1 Q0 D2 1 1.0 t\n").unwrap();
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn mixed_tags_rejected() {
        assert!(parse("1 Q0 D1 1 9.0 a\n1 Q0 D2 2 1.0 b\n").is_err());
    }

    #[test]
    fn equal_scores_break_ties_by_doc_id_descending() {
        let run = RunFile::from_scored("t", [("1", "a", 1.0), ("1", "c", 1.0), ("1", "b", 1.0), ("1", "z", 0.5)]).unwrap();
        assert_eq!(run.ranked_docs(&"1".into()), ["c", "b", "a", "z"]);
    }

    #[test]
    fn truncate_keeps_prefix() {
        let scored: Vec<_> = (0..1000).map(|i| ("7", format!("D{i}"), f64::from(i % 37))).collect();
        let run = RunFile::from_scored("t", scored).unwrap();
        let top = run.truncate(100);
        assert_eq!(top.topic(&"7".into()).len(), 100);
        assert_eq!(top.topic(&"7".into()), &run.topic(&"7".into())[..100]);
        assert_eq!(run.truncate(5000), run);
    }

    #[test]
    fn metadata_lines() {
        let md = read_run_metadata("# tag group subtask category\nbm25base BASELINE fullrank trad\nidst_bert_r1 IDST rerank nnlm\n".as_bytes()).unwrap();
        assert_eq!(md.len(), 2);
        assert_eq!(md[1].category, Category::Nnlm);
        assert!(read_run_metadata("x g sometimes trad\n".as_bytes()).is_err());
    }
}
