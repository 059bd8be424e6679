use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{open, trim_eol, Result, TaskKind, TrecIoError};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocRecord {
    pub doc_id: String,
    pub url: String,
    pub title: String,
    pub body: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassageRecord {
    pub passage_id: String,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CorpusRecord {
    Document(DocRecord),
    Passage(PassageRecord),
}

impl CorpusRecord {
    pub fn id(&self) -> &str {
        match self {
            CorpusRecord::Document(d) => &d.doc_id,
            CorpusRecord::Passage(p) => &p.passage_id,
        }
    }

    pub fn kind(&self) -> TaskKind {
        match self {
            CorpusRecord::Document(_) => TaskKind::Document,
            CorpusRecord::Passage(_) => TaskKind::Passage,
        }
    }

    /// The text that gets indexed: title and body for documents, the passage itself otherwise.
    pub fn index_text(&self) -> String {
        match self {
            CorpusRecord::Document(d) => format!("{} {}", d.title, d.body),
            CorpusRecord::Passage(p) => p.text.clone(),
        }
    }

    fn field_count(kind: TaskKind) -> usize {
        match kind {
            TaskKind::Document => 4,
            TaskKind::Passage => 2,
        }
    }

    fn parse_line(kind: TaskKind, line: &str, line_no: usize) -> Result<Self> {
        let fields: Vec<&str> = line.split('\t').collect();
        let expected = Self::field_count(kind);
        if fields.len() != expected {
            let names = match kind {
                TaskKind::Document => "id, url, title, body",
                TaskKind::Passage => "id, text",
            };
            return Err(TrecIoError::malformed(
                line_no,
                format!(
                    "expected {expected} tab-separated fields ({names}), found {}",
                    fields.len()
                ),
            ));
        }
        if fields[0].is_empty() {
            return Err(TrecIoError::malformed(line_no, "empty record id"));
        }
        Ok(match kind {
            TaskKind::Document => CorpusRecord::Document(DocRecord {
                doc_id: fields[0].to_owned(),
                url: fields[1].to_owned(),
                title: fields[2].to_owned(),
                body: fields[3].to_owned(),
            }),
            TaskKind::Passage => CorpusRecord::Passage(PassageRecord {
                passage_id: fields[0].to_owned(),
                text: fields[1].to_owned(),
            }),
        })
    }

    fn write_line<W: Write>(&self, w: &mut W) -> Result<()> {
        let fields: Vec<&str> = match self {
            CorpusRecord::Document(d) => vec![&d.doc_id, &d.url, &d.title, &d.body],
            CorpusRecord::Passage(p) => vec![&p.passage_id, &p.text],
        };
        if self.id().is_empty() {
            return Err(TrecIoError::Unrepresentable {
                what: "corpus record",
                reason: "empty id".into(),
            });
        }
        if let Some(bad) = fields.iter().find(|f| f.contains(['\t', '\n', '\r'])) {
            return Err(TrecIoError::Unrepresentable {
                what: "corpus record",
                reason: format!("field of `{}` contains a tab or line break: {bad:?}", self.id()),
            });
        }
        writeln!(w, "{}", fields.join("\t"))?;
        Ok(())
    }
}

/// Streaming reader over a corpus file. Yields records in file order and
/// rejects malformed lines and repeated ids.
pub struct CorpusReader<R> {
    reader: R,
    kind: TaskKind,
    line_no: usize,
    seen: HashSet<String>,
    buf: String,
}

impl<R: BufRead> CorpusReader<R> {
    pub fn new(reader: R, kind: TaskKind) -> Self {
        Self {
            reader,
            kind,
            line_no: 0,
            seen: HashSet::new(),
            buf: String::new(),
        }
    }

    /// Number of records yielded so far.
    pub fn records_read(&self) -> usize {
        self.seen.len()
    }
}

impl<R: BufRead> Iterator for CorpusReader<R> {
    type Item = Result<CorpusRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.reader.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(e.into())),
            }
            self.line_no += 1;
            let line = trim_eol(self.buf.strip_suffix('\n').unwrap_or(&self.buf));
            if line.is_empty() {
                continue;
            }
            let record = match CorpusRecord::parse_line(self.kind, line, self.line_no) {
                Ok(r) => r,
                Err(e) => return Some(Err(e)),
            };
            if !self.seen.insert(record.id().to_owned()) {
                return Some(Err(TrecIoError::Duplicate {
                    line: self.line_no,
                    what: "corpus id",
                    id: record.id().to_owned(),
                }));
            }
            return Some(Ok(record));
        }
    }
}

pub fn parse_corpus(path: &Path, kind: TaskKind) -> Result<CorpusReader<BufReader<std::fs::File>>> {
    Ok(CorpusReader::new(open(path)?, kind))
}

pub fn read_corpus<R: BufRead>(reader: R, kind: TaskKind) -> Result<Vec<CorpusRecord>> {
    CorpusReader::new(reader, kind).collect()
}

pub fn write_corpus<'a, W: Write>(
    records: impl IntoIterator<Item = &'a CorpusRecord>,
    w: &mut W,
) -> Result<()> {
    for r in records {
        r.write_line(w)?;
    }
    Ok(())
}

/// Id-addressed access to corpus records, so that judging and indexing do
/// not care whether the corpus lives in memory or on disk.
pub trait Corpus: Send + Sync {
    fn kind(&self) -> TaskKind;
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn get(&self, id: &str) -> Option<CorpusRecord>;
    /// All ids, in file order.
    fn ids(&self) -> Vec<String>;
}

#[derive(Clone, Debug)]
pub struct MemoryCorpus {
    kind: TaskKind,
    records: Vec<CorpusRecord>,
    by_id: HashMap<String, usize>,
}

impl MemoryCorpus {
    pub fn new(kind: TaskKind, records: Vec<CorpusRecord>) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if r.kind() != kind {
                return Err(TrecIoError::malformed(i + 1, format!("record kind {} in a {kind} corpus", r.kind())));
            }
            if by_id.insert(r.id().to_owned(), i).is_some() {
                return Err(TrecIoError::Duplicate {
                    line: i + 1,
                    what: "corpus id",
                    id: r.id().to_owned(),
                });
            }
        }
        Ok(Self { kind, records, by_id })
    }

    pub fn load(path: &Path, kind: TaskKind) -> Result<Self> {
        let records = parse_corpus(path, kind)?
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.at(path))?;
        Self::new(kind, records)
    }

    pub fn records(&self) -> &[CorpusRecord] {
        &self.records
    }

    pub fn record(&self, id: &str) -> Option<&CorpusRecord> {
        self.by_id.get(id).map(|&i| &self.records[i])
    }
}

impl Corpus for MemoryCorpus {
    fn kind(&self) -> TaskKind {
        self.kind
    }

    fn len(&self) -> usize {
        self.records.len()
    }

    fn get(&self, id: &str) -> Option<CorpusRecord> {
        self.record(id).cloned()
    }

    fn ids(&self) -> Vec<String> {
        self.records.iter().map(|r| r.id().to_owned()).collect()
    }
}

/// A corpus that keeps only an id → byte offset table in memory and reads
/// records from the file on demand.
#[derive(Debug)]
pub struct FileCorpus {
    kind: TaskKind,
    path: PathBuf,
    order: Vec<String>,
    offsets: HashMap<String, (u64, usize)>,
    file: Mutex<std::fs::File>,
}

impl FileCorpus {
    pub fn open(path: &Path, kind: TaskKind) -> Result<Self> {
        let mut reader = open(path)?;
        let mut order = Vec::new();
        let mut offsets = HashMap::new();
        let mut offset = 0u64;
        let mut line_no = 0;
        let mut buf = String::new();
        loop {
            buf.clear();
            let n = reader.read_line(&mut buf).map_err(|e| TrecIoError::from(e).at(path))?;
            if n == 0 {
                break;
            }
            line_no += 1;
            let line = trim_eol(buf.strip_suffix('\n').unwrap_or(&buf));
            if !line.is_empty() {
                let record = CorpusRecord::parse_line(kind, line, line_no)?;
                let id = record.id().to_owned();
                if offsets.insert(id.clone(), (offset, line.len())).is_some() {
                    return Err(TrecIoError::Duplicate {
                        line: line_no,
                        what: "corpus id",
                        id,
                    });
                }
                order.push(id);
            }
            offset += n as u64;
        }
        let file = std::fs::File::open(path).map_err(|source| TrecIoError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Self {
            kind,
            path: path.to_path_buf(),
            order,
            offsets,
            file: Mutex::new(file),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl Corpus for FileCorpus {
    fn kind(&self) -> TaskKind {
        self.kind
    }

    fn len(&self) -> usize {
        self.order.len()
    }

    fn get(&self, id: &str) -> Option<CorpusRecord> {
        let &(offset, len) = self.offsets.get(id)?;
        let mut file = self.file.lock().ok()?;
        file.seek(SeekFrom::Start(offset)).ok()?;
        let mut bytes = vec![0u8; len];
        file.read_exact(&mut bytes).ok()?;
        let line = String::from_utf8(bytes).ok()?;
        CorpusRecord::parse_line(self.kind, &line, 0).ok()
    }

    fn ids(&self) -> Vec<String> {
        self.order.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_passages_in_order() {
        let text = "p1\tfirst passage\np2\tsecond\np3\tthird one\n";
        let records = read_corpus(text.as_bytes(), TaskKind::Passage).unwrap();
        let ids: Vec<_> = records.iter().map(CorpusRecord::id).collect();
        assert_eq!(ids, ["p1", "p2", "p3"]);
    }

    #[test]
    fn missing_body_names_the_line() {
        let text = "D1\thttp://a\ttitle\tbody\nD2\thttp://b\tno body here\n";
        let err = read_corpus(text.as_bytes(), TaskKind::Document).unwrap_err();
        match err {
            TrecIoError::Malformed { line, reason } => {
                assert_eq!(line, 2);
                assert!(reason.contains("expected 4"), "{reason}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_id_rejected() {
        let text = "p1\ta\np1\tb\n";
        let err = read_corpus(text.as_bytes(), TaskKind::Passage).unwrap_err();
        assert!(matches!(err, TrecIoError::Duplicate { line: 2, .. }));
    }

    #[test]
    fn reader_reports_count() {
        let text = "p1\ta\n\np2\tb\n";
        let mut reader = CorpusReader::new(text.as_bytes(), TaskKind::Passage);
        for r in reader.by_ref() {
            r.unwrap();
        }
        assert_eq!(reader.records_read(), 2);
    }

    #[test]
    fn tabs_in_fields_cannot_be_written() {
        let r = CorpusRecord::Passage(PassageRecord {
            passage_id: "p".into(),
            text: "a\tb".into(),
        });
        let mut out = Vec::new();
        assert!(write_corpus([&r], &mut out).is_err());
    }

    #[test]
    fn file_corpus_matches_memory_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("docs.tsv");
        std::fs::write(
            &path,
            "D1\thttp://a\tAlpha\tfirst body\r\nD2\thttp://b\tBeta\tsecond body ü\n",
        )
        .unwrap();
        let mem = MemoryCorpus::load(&path, TaskKind::Document).unwrap();
        let file = FileCorpus::open(&path, TaskKind::Document).unwrap();
        assert_eq!(mem.ids(), file.ids());
        for id in mem.ids() {
            assert_eq!(mem.get(&id), file.get(&id));
        }
        assert!(file.get("D3").is_none());
    }
}
