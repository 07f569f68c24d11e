//! The fixed label inventory.
//!
//! Every probability vector in the crate is indexed by these orders, so the
//! discriminants below are load-bearing and must never be reordered.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Entity categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EntityType {
    #[serde(rename = "PER")]
    Per,
    #[serde(rename = "LOC")]
    Loc,
    #[serde(rename = "ORG")]
    Org,
}

impl EntityType {
    pub const ALL: [EntityType; 3] = [EntityType::Per, EntityType::Loc, EntityType::Org];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityType::Per => "PER",
            EntityType::Loc => "LOC",
            EntityType::Org => "ORG",
        }
    }

    pub fn begin(self) -> NerLabel {
        match self {
            EntityType::Per => NerLabel::BPer,
            EntityType::Loc => NerLabel::BLoc,
            EntityType::Org => NerLabel::BOrg,
        }
    }

    pub fn inside(self) -> NerLabel {
        match self {
            EntityType::Per => NerLabel::IPer,
            EntityType::Loc => NerLabel::ILoc,
            EntityType::Org => NerLabel::IOrg,
        }
    }

    pub fn span_tag(self) -> SpanTag {
        match self {
            EntityType::Per => SpanTag::Per,
            EntityType::Loc => SpanTag::Loc,
            EntityType::Org => SpanTag::Org,
        }
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntityType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "PER" => Ok(EntityType::Per),
            "LOC" => Ok(EntityType::Loc),
            "ORG" => Ok(EntityType::Org),
            other => Err(format!("unknown entity type `{other}`")),
        }
    }
}

/// The 7-way BIO2 token label, in probability-vector order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum NerLabel {
    BPer = 0,
    IPer = 1,
    BLoc = 2,
    ILoc = 3,
    BOrg = 4,
    IOrg = 5,
    O = 6,
}

impl NerLabel {
    pub const COUNT: usize = 7;
    pub const ALL: [NerLabel; 7] = [
        NerLabel::BPer,
        NerLabel::IPer,
        NerLabel::BLoc,
        NerLabel::ILoc,
        NerLabel::BOrg,
        NerLabel::IOrg,
        NerLabel::O,
    ];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<NerLabel> {
        Self::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NerLabel::BPer => "B-PER",
            NerLabel::IPer => "I-PER",
            NerLabel::BLoc => "B-LOC",
            NerLabel::ILoc => "I-LOC",
            NerLabel::BOrg => "B-ORG",
            NerLabel::IOrg => "I-ORG",
            NerLabel::O => "O",
        }
    }

    pub fn entity_type(self) -> Option<EntityType> {
        match self {
            NerLabel::BPer | NerLabel::IPer => Some(EntityType::Per),
            NerLabel::BLoc | NerLabel::ILoc => Some(EntityType::Loc),
            NerLabel::BOrg | NerLabel::IOrg => Some(EntityType::Org),
            NerLabel::O => None,
        }
    }

    pub fn is_begin(self) -> bool {
        matches!(self, NerLabel::BPer | NerLabel::BLoc | NerLabel::BOrg)
    }

    pub fn is_inside(self) -> bool {
        matches!(self, NerLabel::IPer | NerLabel::ILoc | NerLabel::IOrg)
    }

    /// Whether `self` may directly follow `prev` (`None` = sentence start).
    pub fn may_follow(self, prev: Option<NerLabel>) -> bool {
        if !self.is_inside() {
            return true;
        }
        match prev {
            Some(p) => p != NerLabel::O && p.entity_type() == self.entity_type(),
            None => false,
        }
    }
}

impl fmt::Display for NerLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NerLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NerLabel::ALL
            .iter()
            .copied()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| format!("unknown tag `{s}`"))
    }
}

impl Serialize for NerLabel {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for NerLabel {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The 4-way span classification tag, in probability-vector order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum SpanTag {
    #[serde(rename = "PER")]
    Per = 0,
    #[serde(rename = "LOC")]
    Loc = 1,
    #[serde(rename = "ORG")]
    Org = 2,
    O = 3,
}

impl SpanTag {
    pub const COUNT: usize = 4;
    pub const ALL: [SpanTag; 4] = [SpanTag::Per, SpanTag::Loc, SpanTag::Org, SpanTag::O];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SpanTag::Per => "PER",
            SpanTag::Loc => "LOC",
            SpanTag::Org => "ORG",
            SpanTag::O => "O",
        }
    }

    pub fn entity_type(self) -> Option<EntityType> {
        match self {
            SpanTag::Per => Some(EntityType::Per),
            SpanTag::Loc => Some(EntityType::Loc),
            SpanTag::Org => Some(EntityType::Org),
            SpanTag::O => None,
        }
    }

    pub fn from_label(label: NerLabel) -> SpanTag {
        label.entity_type().map_or(SpanTag::O, EntityType::span_tag)
    }
}

/// Serializable description of the label orders, stored in checkpoints so a
/// model trained under a different inventory is rejected on load.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagSet {
    pub ner_labels: Vec<String>,
    pub span_tags: Vec<String>,
}

impl TagSet {
    pub fn standard() -> TagSet {
        TagSet {
            ner_labels: NerLabel::ALL.iter().map(|l| l.as_str().to_string()).collect(),
            span_tags: SpanTag::ALL.iter().map(|t| t.as_str().to_string()).collect(),
        }
    }

    pub fn is_standard(&self) -> bool {
        *self == TagSet::standard()
    }
}

impl Default for TagSet {
    fn default() -> Self {
        TagSet::standard()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orders_are_frozen() {
        let ts = TagSet::standard();
        assert_eq!(
            ts.ner_labels,
            ["B-PER", "I-PER", "B-LOC", "I-LOC", "B-ORG", "I-ORG", "O"]
        );
        assert_eq!(ts.span_tags, ["PER", "LOC", "ORG", "O"]);
        for (i, l) in NerLabel::ALL.iter().enumerate() {
            assert_eq!(l.index(), i);
            assert_eq!(NerLabel::from_index(i), Some(*l));
        }
        assert_eq!(NerLabel::from_index(7), None);
    }

    #[test]
    fn each_type_maps_to_two_labels() {
        for t in EntityType::ALL {
            let forms: Vec<_> = NerLabel::ALL
                .iter()
                .filter(|l| l.entity_type() == Some(t))
                .collect();
            assert_eq!(forms, [&t.begin(), &t.inside()]);
        }
    }

    #[test]
    fn transitions() {
        assert!(!NerLabel::IPer.may_follow(None));
        assert!(!NerLabel::IPer.may_follow(Some(NerLabel::O)));
        assert!(!NerLabel::IPer.may_follow(Some(NerLabel::BLoc)));
        assert!(NerLabel::IPer.may_follow(Some(NerLabel::BPer)));
        assert!(NerLabel::IPer.may_follow(Some(NerLabel::IPer)));
        assert!(NerLabel::BOrg.may_follow(None));
    }
}
