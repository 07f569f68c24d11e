//! Sentences, BIO2 tags, entity spans and dataset-level utilities.

mod bio2;
mod dataset;
mod sentence;
mod tags;

pub use bio2::{parse_bio2, read_jsonl, serialize_bio2, write_jsonl};
pub use dataset::{dataset_stats, split_dataset, DatasetStats, EntityCounts, Split, MIN_SPLIT_SIZE};
pub use sentence::{
    derive_boundary_targets, derive_span_tag_targets, entities_from_tags, extract_entities,
    repair_bio2, tags_from_entities, validate_bio2, BoundaryTargets, EntitySpan, LabeledSentence,
    Provenance, SentenceId, SpanTagTargets,
};
pub use tags::{EntityType, NerLabel, SpanTag, TagSet};

use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: unknown tag `{tag}`")]
    UnknownTag { line: usize, tag: String },
    #[error("{}illegal transition to `{tag}` at token {position}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    IllegalTransition {
        line: Option<usize>,
        position: usize,
        tag: String,
    },
    #[error("empty sentence{}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    EmptySentence { line: Option<usize> },
    #[error("line {line}: expected `token<ws>tag`, got `{content}`")]
    MalformedLine { line: usize, content: String },
    #[error("{tokens} tokens but {tags} tags")]
    LengthMismatch { tokens: usize, tags: usize },
    #[error("invalid token `{0}` (empty or contains whitespace)")]
    InvalidToken(String),
    #[error("need at least 10 sentences to split, found {found}")]
    TooFewSentences { found: usize },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Reads a dataset, picking the format by extension: `.jsonl` snapshots keep
/// ids and provenance, anything else is parsed as BIO2 columns.
pub fn read_dataset(path: &Path, provenance: Provenance) -> Result<Vec<LabeledSentence>, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|e| CorpusError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    if path.extension().is_some_and(|e| e == "jsonl") {
        read_jsonl(&text)
    } else {
        let source = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "input".into());
        parse_bio2(&text, &source, provenance)
    }
}

pub fn write_dataset(path: &Path, data: &[LabeledSentence]) -> Result<(), CorpusError> {
    let body = if path.extension().is_some_and(|e| e == "jsonl") {
        write_jsonl(data)
    } else {
        serialize_bio2(data)
    };
    std::fs::write(path, body).map_err(|e| CorpusError::Io {
        path: path.display().to_string(),
        source: e,
    })
}
