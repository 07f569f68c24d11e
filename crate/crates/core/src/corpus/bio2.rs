//! Column-format BIO2 reading and writing.
//!
//! One `token<ws>tag` pair per line, sentences separated by blank lines. Any
//! run of spaces or tabs separates the columns on read; a single tab is
//! written.

use super::sentence::{validate_bio2, LabeledSentence, Provenance, SentenceId};
use super::tags::NerLabel;
use super::CorpusError;

fn is_horizontal_ws(c: char) -> bool {
    c == ' ' || c == '\t'
}

/// Parses a BIO2 document. Sentence ids are `source:ordinal`, counting from 0.
pub fn parse_bio2(
    text: &str,
    source: &str,
    provenance: Provenance,
) -> Result<Vec<LabeledSentence>, CorpusError> {
    let mut sentences = Vec::new();
    let mut tokens: Vec<String> = Vec::new();
    let mut tags: Vec<NerLabel> = Vec::new();

    let mut flush = |tokens: &mut Vec<String>, tags: &mut Vec<NerLabel>| {
        if tokens.is_empty() {
            return;
        }
        sentences.push(LabeledSentence {
            id: SentenceId::new(source, sentences.len()),
            tokens: std::mem::take(tokens),
            tags: std::mem::take(tags),
            provenance,
        });
    };

    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim_matches(is_horizontal_ws).is_empty() {
            flush(&mut tokens, &mut tags);
            continue;
        }
        let mut fields = line.split(is_horizontal_ws).filter(|f| !f.is_empty());
        let (token, tag) = match (fields.next(), fields.next(), fields.next()) {
            (Some(tok), Some(tag), None) => (tok, tag),
            _ => {
                return Err(CorpusError::MalformedLine {
                    line: line_no,
                    content: line.to_string(),
                })
            }
        };
        let label: NerLabel = tag.parse().map_err(|_| CorpusError::UnknownTag {
            line: line_no,
            tag: tag.to_string(),
        })?;
        if !label.may_follow(tags.last().copied()) {
            return Err(CorpusError::IllegalTransition {
                line: Some(line_no),
                position: tags.len(),
                tag: tag.to_string(),
            });
        }
        tokens.push(token.to_string());
        tags.push(label);
    }
    flush(&mut tokens, &mut tags);
    Ok(sentences)
}

pub fn serialize_bio2(sentences: &[LabeledSentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        debug_assert!(validate_bio2(&s.tags).is_ok());
        for (tok, tag) in s.tokens.iter().zip(&s.tags) {
            out.push_str(tok);
            out.push('\t');
            out.push_str(tag.as_str());
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

/// Full-fidelity dataset snapshot: one JSON sentence record per line,
/// keeping ids and provenance that the column format cannot carry.
pub fn write_jsonl(sentences: &[LabeledSentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        out.push_str(&serde_json::to_string(s).expect("sentence serializes"));
        out.push('\n');
    }
    out
}

pub fn read_jsonl(text: &str) -> Result<Vec<LabeledSentence>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let raw: LabeledSentence =
            serde_json::from_str(line).map_err(|e| CorpusError::MalformedLine {
                line: i + 1,
                content: e.to_string(),
            })?;
        // re-validate through the checked constructor
        out.push(LabeledSentence::new(raw.id, raw.tokens, raw.tags, raw.provenance)?);
    }
    Ok(out)
}
