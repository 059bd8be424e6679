use std::collections::HashSet;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{open, trim_eol, Result, TopicId, TrecIoError};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicRecord {
    pub topic_id: TopicId,
    pub text: String,
}

pub fn read_topics<R: BufRead>(reader: R) -> Result<Vec<TopicRecord>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = trim_eol(&line);
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (id, text) = line
            .split_once('\t')
            .ok_or_else(|| TrecIoError::malformed(line_no, "expected `id<TAB>text`"))?;
        if id.is_empty() {
            return Err(TrecIoError::malformed(line_no, "empty topic id"));
        }
        if !seen.insert(id.to_owned()) {
            return Err(TrecIoError::Duplicate {
                line: line_no,
                what: "topic",
                id: id.to_owned(),
            });
        }
        out.push(TopicRecord {
            topic_id: TopicId::from(id),
            text: text.to_owned(),
        });
    }
    Ok(out)
}

pub fn parse_topics(path: &Path) -> Result<Vec<TopicRecord>> {
    read_topics(open(path)?).map_err(|e| e.at(path))
}

pub fn write_topics<W: Write>(topics: &[TopicRecord], w: &mut W) -> Result<()> {
    for t in topics {
        if t.text.contains(['\n', '\r']) || t.topic_id.as_str().contains(['\t', '\n']) {
            return Err(TrecIoError::Unrepresentable {
                what: "topic",
                reason: format!("topic {} contains a line break or tab in its id", t.topic_id),
            });
        }
        writeln!(w, "{}\t{}", t.topic_id, t.text)?;
    }
    Ok(())
}
