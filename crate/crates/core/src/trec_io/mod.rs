//! Readers and writers for the track's plain-text formats.
//!
//! * corpora: tab-separated, `id url title body` (documents) or `id text` (passages)
//! * topics: `id<TAB>query text`
//! * runs: six whitespace-separated columns, `topic Q0 doc rank score tag`
//! * qrels: four columns, `topic iteration doc grade`
//!
//! Everything is UTF-8. Parsed structures are immutable values and can be
//! shared freely between threads.

mod corpus;
mod ids;
mod qrels;
mod run;
mod topics;

use std::path::PathBuf;

use thiserror::Error;

pub use corpus::{
    parse_corpus, read_corpus, write_corpus, Corpus, CorpusReader, CorpusRecord, DocRecord,
    FileCorpus, MemoryCorpus, PassageRecord,
};
pub use ids::{Grade, TaskKind, TopicId};
pub use qrels::{parse_qrels, read_qrels, save_qrels, write_qrels, QrelsSet, TopicQrels};
pub use run::{
    canonical_cmp, parse_run, parse_run_metadata, read_run, read_run_metadata, save_run, write_run,
    Category, RunEntry, RunFile, RunMetadata, RunWarning, Subtask,
};
pub use topics::{parse_topics, read_topics, write_topics, TopicRecord};

#[derive(Debug, Error)]
pub enum TrecIoError {
    #[error("{path}: {source}", path = .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("I/O error: {0}")]
    Stream(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: duplicate {what} `{id}`")]
    Duplicate {
        line: usize,
        what: &'static str,
        id: String,
    },
    #[error("cannot write {what}: {reason}")]
    Unrepresentable { what: &'static str, reason: String },
}

impl TrecIoError {
    pub(crate) fn malformed(line: usize, reason: impl Into<String>) -> Self {
        TrecIoError::Malformed {
            line,
            reason: reason.into(),
        }
    }

    /// Attach a file path to a bare stream error.
    pub(crate) fn at(self, path: &std::path::Path) -> Self {
        match self {
            TrecIoError::Stream(source) => TrecIoError::Io {
                path: path.to_path_buf(),
                source,
            },
            other => other,
        }
    }
}

pub type Result<T, E = TrecIoError> = std::result::Result<T, E>;

pub(crate) fn open(path: &std::path::Path) -> Result<std::io::BufReader<std::fs::File>> {
    std::fs::File::open(path)
        .map(std::io::BufReader::new)
        .map_err(|source| TrecIoError::Io {
            path: path.to_path_buf(),
            source,
        })
}

pub(crate) fn create(path: &std::path::Path) -> Result<std::io::BufWriter<std::fs::File>> {
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|source| TrecIoError::Io {
            path: path.to_path_buf(),
            source,
        })
}

/// Strip a trailing `\r` so files written on Windows parse the same.
pub(crate) fn trim_eol(line: &str) -> &str {
    line.strip_suffix('\r').unwrap_or(line)
}
