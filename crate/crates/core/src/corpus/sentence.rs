use serde::{Deserialize, Serialize};
use std::fmt;

use super::tags::{EntityType, NerLabel, SpanTag};
use super::CorpusError;

/// Stable sentence identity, assigned at parse time as `source:ordinal`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SentenceId(pub String);

impl SentenceId {
    pub fn new(source: &str, ordinal: usize) -> SentenceId {
        SentenceId(format!("{source}:{ordinal}"))
    }
}

impl fmt::Display for SentenceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Where a sentence's labels came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Homologous,
    Rule,
    Audited,
    Synthetic,
    #[default]
    External,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSentence {
    pub id: SentenceId,
    pub tokens: Vec<String>,
    pub tags: Vec<NerLabel>,
    #[serde(default)]
    pub provenance: Provenance,
}

impl LabeledSentence {
    /// Builds a sentence, checking length agreement, token shape and BIO2 validity.
    pub fn new(
        id: SentenceId,
        tokens: Vec<String>,
        tags: Vec<NerLabel>,
        provenance: Provenance,
    ) -> Result<LabeledSentence, CorpusError> {
        if tokens.is_empty() {
            return Err(CorpusError::EmptySentence { line: None });
        }
        if tokens.len() != tags.len() {
            return Err(CorpusError::LengthMismatch {
                tokens: tokens.len(),
                tags: tags.len(),
            });
        }
        if let Some(bad) = tokens
            .iter()
            .find(|t| t.is_empty() || t.chars().any(char::is_whitespace))
        {
            return Err(CorpusError::InvalidToken(bad.clone()));
        }
        if let Err(pos) = validate_bio2(&tags) {
            return Err(CorpusError::IllegalTransition {
                line: None,
                position: pos,
                tag: tags[pos].to_string(),
            });
        }
        Ok(LabeledSentence {
            id,
            tokens,
            tags,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// An entity mention with inclusive token bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub etype: EntityType,
}

impl EntitySpan {
    pub fn new(start: usize, end: usize, etype: EntityType) -> EntitySpan {
        debug_assert!(start <= end);
        EntitySpan { start, end, etype }
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn overlaps(&self, other: &EntitySpan) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

/// Per-token start/end flags for the boundary detection task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryTargets {
    pub start_flags: Vec<u8>,
    pub end_flags: Vec<u8>,
}

/// Per-token 4-way tags for the span classification task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanTagTargets(pub Vec<SpanTag>);

/// Returns `Err(position)` of the first illegal `I-X`.
pub fn validate_bio2(tags: &[NerLabel]) -> Result<(), usize> {
    let mut prev = None;
    for (i, &tag) in tags.iter().enumerate() {
        if !tag.may_follow(prev) {
            return Err(i);
        }
        prev = Some(tag);
    }
    Ok(())
}

/// Decodes maximal `B-X (I-X)*` runs. Input must be valid BIO2.
pub fn entities_from_tags(tags: &[NerLabel]) -> Vec<EntitySpan> {
    let mut spans = Vec::new();
    let mut open: Option<(usize, EntityType)> = None;
    for (i, &tag) in tags.iter().enumerate() {
        if tag.is_inside() {
            continue;
        }
        if let Some((start, etype)) = open.take() {
            spans.push(EntitySpan::new(start, i - 1, etype));
        }
        if tag.is_begin() {
            open = tag.entity_type().map(|t| (i, t));
        }
    }
    if let Some((start, etype)) = open {
        spans.push(EntitySpan::new(start, tags.len() - 1, etype));
    }
    spans
}

pub fn extract_entities(s: &LabeledSentence) -> Vec<EntitySpan> {
    entities_from_tags(&s.tags)
}

/// Inverse of [`entities_from_tags`] for non-overlapping spans.
pub fn tags_from_entities(len: usize, spans: &[EntitySpan]) -> Vec<NerLabel> {
    let mut tags = vec![NerLabel::O; len];
    for span in spans {
        tags[span.start] = span.etype.begin();
        for tag in &mut tags[span.start + 1..=span.end] {
            *tag = span.etype.inside();
        }
    }
    tags
}

pub fn derive_boundary_targets(s: &LabeledSentence) -> BoundaryTargets {
    let mut start_flags = vec![0u8; s.len()];
    let mut end_flags = vec![0u8; s.len()];
    for span in extract_entities(s) {
        start_flags[span.start] = 1;
        end_flags[span.end] = 1;
    }
    BoundaryTargets {
        start_flags,
        end_flags,
    }
}

pub fn derive_span_tag_targets(s: &LabeledSentence) -> SpanTagTargets {
    SpanTagTargets(s.tags.iter().map(|&t| SpanTag::from_label(t)).collect())
}

/// Rewrites every `I-X` lacking a legal predecessor to `B-X`.
pub fn repair_bio2(tags: &[NerLabel]) -> Vec<NerLabel> {
    let mut out = Vec::with_capacity(tags.len());
    let mut prev = None;
    for &tag in tags {
        let fixed = if tag.may_follow(prev) {
            tag
        } else {
            // only inside tags can be illegal, and they always have a type
            tag.entity_type().map_or(tag, EntityType::begin)
        };
        out.push(fixed);
        prev = Some(fixed);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use NerLabel::*;

    fn sent(tags: &[NerLabel]) -> LabeledSentence {
        let tokens = (0..tags.len()).map(|i| format!("w{i}")).collect();
        LabeledSentence::new(SentenceId::new("t", 0), tokens, tags.to_vec(), Provenance::External)
            .unwrap()
    }

    #[test]
    fn extract_examples() {
        assert_eq!(
            extract_entities(&sent(&[BPer, IPer, O])),
            vec![EntitySpan::new(0, 1, EntityType::Per)]
        );
        assert!(extract_entities(&sent(&[O, O, O])).is_empty());
        assert_eq!(
            extract_entities(&sent(&[BLoc, BLoc, ILoc])),
            vec![
                EntitySpan::new(0, 0, EntityType::Loc),
                EntitySpan::new(1, 2, EntityType::Loc)
            ]
        );
    }

    #[test]
    fn boundary_target_examples() {
        let bt = derive_boundary_targets(&sent(&[BPer, IPer, O]));
        assert_eq!(bt.start_flags, [1, 0, 0]);
        assert_eq!(bt.end_flags, [0, 1, 0]);
        let bt = derive_boundary_targets(&sent(&[O, O]));
        assert_eq!(bt.start_flags, [0, 0]);
        assert_eq!(bt.end_flags, [0, 0]);
        let bt = derive_boundary_targets(&sent(&[BLoc]));
        assert_eq!(bt.start_flags, [1]);
        assert_eq!(bt.end_flags, [1]);
    }

    #[test]
    fn span_tag_examples() {
        use SpanTag as S;
        assert_eq!(derive_span_tag_targets(&sent(&[BPer, IPer, O])).0, [S::Per, S::Per, S::O]);
        assert_eq!(derive_span_tag_targets(&sent(&[O])).0, [S::O]);
        assert_eq!(derive_span_tag_targets(&sent(&[BOrg, BLoc])).0, [S::Org, S::Loc]);
    }

    #[test]
    fn repair_examples() {
        assert_eq!(repair_bio2(&[IPer, IPer]), [BPer, IPer]);
        assert_eq!(repair_bio2(&[BLoc, ILoc]), [BLoc, ILoc]);
        assert_eq!(repair_bio2(&[O, IOrg]), [O, BOrg]);
        assert_eq!(repair_bio2(&[BPer, ILoc, ILoc]), [BPer, BLoc, ILoc]);
    }

    #[test]
    fn constructor_rejects_bad_input() {
        let id = SentenceId::new("t", 0);
        assert!(matches!(
            LabeledSentence::new(id.clone(), vec![], vec![], Provenance::Rule),
            Err(CorpusError::EmptySentence { .. })
        ));
        assert!(matches!(
            LabeledSentence::new(id.clone(), vec!["a".into()], vec![O, O], Provenance::Rule),
            Err(CorpusError::LengthMismatch { .. })
        ));
        assert!(matches!(
            LabeledSentence::new(id.clone(), vec!["a b".into()], vec![O], Provenance::Rule),
            Err(CorpusError::InvalidToken(_))
        ));
        assert!(matches!(
            LabeledSentence::new(id, vec!["a".into()], vec![IPer], Provenance::Rule),
            Err(CorpusError::IllegalTransition { position: 0, .. })
        ));
    }
}
