use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{open, trim_eol, Grade, Result, TopicId, TrecIoError};

/// Judgments for one topic, in insertion order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TopicQrels(IndexMap<String, Grade>);

impl TopicQrels {
    pub fn new() -> Self {
        Self::default()
    }

    /// `None` means unjudged, which is not the same as `Some(Grade 0)`.
    pub fn grade(&self, doc: &str) -> Option<Grade> {
        self.0.get(doc).copied()
    }

    /// Insert or revise a judgment. A revision keeps the original position.
    pub fn set(&mut self, doc: impl Into<String>, grade: Grade) -> Option<Grade> {
        self.0.insert(doc.into(), grade)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Grade)> {
        self.0.iter().map(|(d, g)| (d.as_str(), *g))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<D: Into<String>> FromIterator<(D, Grade)> for TopicQrels {
    fn from_iter<I: IntoIterator<Item = (D, Grade)>>(iter: I) -> Self {
        let mut q = TopicQrels::new();
        for (d, g) in iter {
            q.set(d, g);
        }
        q
    }
}

/// Graded judgments for a set of topics.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QrelsSet {
    topics: BTreeMap<TopicId, TopicQrels>,
}

impl QrelsSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn grade(&self, topic: &TopicId, doc: &str) -> Option<Grade> {
        self.topics.get(topic).and_then(|q| q.grade(doc))
    }

    pub fn set(&mut self, topic: TopicId, doc: impl Into<String>, grade: Grade) -> Option<Grade> {
        self.topics.entry(topic).or_default().set(doc, grade)
    }

    pub fn topic(&self, topic: &TopicId) -> Option<&TopicQrels> {
        self.topics.get(topic)
    }

    pub fn insert_topic(&mut self, topic: TopicId, qrels: TopicQrels) {
        self.topics.insert(topic, qrels);
    }

    pub fn topics(&self) -> impl Iterator<Item = (&TopicId, &TopicQrels)> {
        self.topics.iter()
    }

    pub fn topic_ids(&self) -> impl Iterator<Item = &TopicId> {
        self.topics.keys()
    }

    /// Total number of judgments.
    pub fn len(&self) -> usize {
        self.topics.values().map(TopicQrels::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Keep only the listed topics.
    pub fn restrict<'a>(&self, keep: impl IntoIterator<Item = &'a TopicId>) -> QrelsSet {
        let keep: HashSet<&TopicId> = keep.into_iter().collect();
        QrelsSet {
            topics: self
                .topics
                .iter()
                .filter(|(t, _)| keep.contains(t))
                .map(|(t, q)| (t.clone(), q.clone()))
                .collect(),
        }
    }
}

pub fn read_qrels<R: BufRead>(reader: R) -> Result<QrelsSet> {
    let mut qrels = QrelsSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        let line = trim_eol(&line);
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 4 {
            return Err(TrecIoError::malformed(
                line_no,
                format!("expected 4 columns `topic iteration doc grade`, found {}", cols.len()),
            ));
        }
        let raw: i64 = cols[3]
            .parse()
            .map_err(|_| TrecIoError::malformed(line_no, format!("grade `{}` is not an integer", cols[3])))?;
        let grade = Grade::try_from(raw).map_err(|e| TrecIoError::malformed(line_no, e))?;
        let topic = TopicId::from(cols[0]);
        if qrels.grade(&topic, cols[2]).is_some() {
            return Err(TrecIoError::Duplicate {
                line: line_no,
                what: "(topic, doc) judgment",
                id: format!("{topic} {}", cols[2]),
            });
        }
        qrels.set(topic, cols[2], grade);
    }
    Ok(qrels)
}

pub fn parse_qrels(path: &Path) -> Result<QrelsSet> {
    read_qrels(open(path)?).map_err(|e| e.at(path))
}

/// Canonical form: `topic 0 doc grade`, topics ascending, docs in insertion order.
pub fn write_qrels<W: Write>(qrels: &QrelsSet, w: &mut W) -> Result<()> {
    for (topic, judged) in qrels.topics() {
        for (doc, grade) in judged.iter() {
            if doc.is_empty() || doc.contains(char::is_whitespace) {
                return Err(TrecIoError::Unrepresentable {
                    what: "qrels",
                    reason: format!("doc id `{doc}` is empty or contains whitespace"),
                });
            }
            writeln!(w, "{topic} 0 {doc} {grade}")?;
        }
    }
    Ok(())
}

pub fn save_qrels(qrels: &QrelsSet, path: &Path) -> Result<()> {
    let mut w = super::create(path)?;
    write_qrels(qrels, &mut w).and_then(|_| w.flush().map_err(Into::into)).map_err(|e| e.at(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grade_lookup() {
        let q = read_qrels("7 0 D1 3\n".as_bytes()).unwrap();
        assert_eq!(q.grade(&"7".into(), "D1"), Grade::new(3));
    }

    #[test]
    fn unlisted_doc_is_unjudged_not_zero() {
        let q = read_qrels("7 0 D1 0\n".as_bytes()).unwrap();
        assert_eq!(q.grade(&"7".into(), "D1"), Some(Grade::IRRELEVANT));
        assert_eq!(q.grade(&"7".into(), "D2"), None);
        assert_eq!(q.grade(&"8".into(), "D1"), None);
    }

    #[test]
    fn out_of_range_grades_rejected() {
        assert!(read_qrels("7 0 D1 4\n".as_bytes()).is_err());
        assert!(read_qrels("7 0 D1 -1\n".as_bytes()).is_err());
        assert!(read_qrels("7 0 D1 x\n".as_bytes()).is_err());
    }

    #[test]
    fn sparse_marco_style_has_one_positive_per_topic() {
        let text = "1030303 0 D3041218 1\n1037496 0 D3084734 1\n1043135 0 D3180911 1\n";
        let q = read_qrels(text.as_bytes()).unwrap();
        assert_eq!(q.topic_ids().count(), 3);
        for (_, t) in q.topics() {
            assert_eq!(t.iter().filter(|(_, g)| g.value() >= 1).count(), 1);
        }
    }

    #[test]
    fn empty_qrels_writes_empty_file() {
        let mut out = Vec::new();
        write_qrels(&QrelsSet::new(), &mut out).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn canonical_topic_order_and_insertion_order() {
        let q = read_qrels("20 0 b 1\n3 0 z 2\n20 0 a 0\n".as_bytes()).unwrap();
        let mut out = Vec::new();
        write_qrels(&q, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "3 0 z 2\n20 0 b 1\n20 0 a 0\n");
    }

    #[test]
    fn revision_keeps_position() {
        let mut q = QrelsSet::new();
        q.set("1".into(), "a", Grade::new(1).unwrap());
        q.set("1".into(), "b", Grade::new(2).unwrap());
        assert_eq!(q.set("1".into(), "a", Grade::new(0).unwrap()), Grade::new(1));
        let docs: Vec<_> = q.topic(&"1".into()).unwrap().iter().map(|(d, _)| d).collect();
        assert_eq!(docs, ["a", "b"]);
    }
}
