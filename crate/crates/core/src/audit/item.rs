use serde::{Deserialize, Serialize};

use super::AuditError;
use crate::corpus::{validate_bio2, NerLabel, SentenceId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemStatus {
    Pending,
    OneDecision,
    Conflicted,
    Resolved,
}

impl ItemStatus {
    pub fn parse(s: &str) -> Option<ItemStatus> {
        match s {
            "pending" => Some(ItemStatus::Pending),
            "one_decision" => Some(ItemStatus::OneDecision),
            "conflicted" => Some(ItemStatus::Conflicted),
            "resolved" => Some(ItemStatus::Resolved),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub auditor_id: String,
    pub tags: Vec<NerLabel>,
    /// RFC 3339.
    pub timestamp: String,
    /// Set for the manual override of an escalated item.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub manual_override: bool,
}

/// One sentence whose stored and predicted tags disagree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditItem {
    pub item_id: u64,
    pub sentence_id: SentenceId,
    pub tokens: Vec<String>,
    pub stored_tags: Vec<NerLabel>,
    pub predicted_tags: Vec<NerLabel>,
    pub status: ItemStatus,
    pub decisions: Vec<Decision>,
    pub resolution: Option<Vec<NerLabel>>,
    /// Three different decisions were recorded; only a manual override
    /// or a later matching decision resolves it.
    #[serde(default)]
    pub escalated: bool,
    /// Iteration that queued the item.
    pub iteration: usize,
    /// Bumped on every accepted change; clients may send it back to detect
    /// concurrent edits.
    pub version: u64,
}

impl AuditItem {
    pub fn new(
        item_id: u64,
        sentence_id: SentenceId,
        tokens: Vec<String>,
        stored_tags: Vec<NerLabel>,
        predicted_tags: Vec<NerLabel>,
        iteration: usize,
    ) -> AuditItem {
        AuditItem {
            item_id,
            sentence_id,
            tokens,
            stored_tags,
            predicted_tags,
            status: ItemStatus::Pending,
            decisions: Vec::new(),
            resolution: None,
            escalated: false,
            iteration,
            version: 0,
        }
    }

    pub fn is_open(&self) -> bool {
        self.status != ItemStatus::Resolved
    }

    fn check_tags(&self, tags: &[NerLabel]) -> Result<(), AuditError> {
        if tags.len() != self.tokens.len() {
            return Err(AuditError::InvalidTags(format!(
                "expected {} tags, got {}",
                self.tokens.len(),
                tags.len()
            )));
        }
        validate_bio2(tags).map_err(|pos| {
            AuditError::InvalidTags(format!("`{}` cannot follow the previous tag at token {pos}", tags[pos]))
        })
    }

    /// Checks that `decision` would be accepted, without changing the item.
    pub fn check_decision(&self, decision: &Decision) -> Result<(), AuditError> {
        if self.status == ItemStatus::Resolved {
            return Err(AuditError::AlreadyResolved(self.item_id));
        }
        self.check_tags(&decision.tags)?;
        if decision.manual_override {
            if !self.escalated {
                return Err(AuditError::NotEscalated(self.item_id));
            }
        } else if self.decisions.iter().any(|d| d.auditor_id == decision.auditor_id) {
            return Err(AuditError::DuplicateAuditor {
                item: self.item_id,
                auditor: decision.auditor_id.clone(),
            });
        }
        Ok(())
    }

    /// Records a decision and advances the status:
    /// one decision waits for a second; two agreeing decisions resolve; two
    /// disagreeing ones conflict; in conflict, a decision matching any
    /// earlier one resolves, and a third distinct one escalates. A manual
    /// override on an escalated item resolves it directly.
    pub fn apply_decision(&mut self, decision: Decision) -> Result<(), AuditError> {
        self.check_decision(&decision)?;
        let tags = decision.tags.clone();
        let manual = decision.manual_override;
        let matches_earlier = self.decisions.iter().any(|d| d.tags == tags);
        self.decisions.push(decision);
        self.version += 1;
        match self.decisions.len() {
            1 if !manual => self.status = ItemStatus::OneDecision,
            _ if manual || matches_earlier => {
                self.status = ItemStatus::Resolved;
                self.resolution = Some(tags);
            }
            2 => self.status = ItemStatus::Conflicted,
            _ => {
                self.status = ItemStatus::Conflicted;
                self.escalated = true;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use NerLabel::*;

    fn item() -> AuditItem {
        AuditItem::new(1, SentenceId::new("s", 0), vec!["Ali".into(), "pergi".into()], vec![O, O], vec![BPer, O], 1)
    }

    fn d(who: &str, tags: &[NerLabel]) -> Decision {
        Decision {
            auditor_id: who.into(),
            tags: tags.to_vec(),
            timestamp: "2024-01-01T00:00:00Z".into(),
            manual_override: false,
        }
    }

    #[test]
    fn two_agreeing_decisions_resolve() {
        let mut it = item();
        it.apply_decision(d("a", &[BPer, O])).unwrap();
        assert_eq!(it.status, ItemStatus::OneDecision);
        it.apply_decision(d("b", &[BPer, O])).unwrap();
        assert_eq!(it.status, ItemStatus::Resolved);
        assert_eq!(it.resolution, Some(vec![BPer, O]));
        assert!(matches!(it.apply_decision(d("c", &[O, O])), Err(AuditError::AlreadyResolved(1))));
    }

    #[test]
    fn conflict_then_majority() {
        let mut it = item();
        it.apply_decision(d("a", &[BPer, O])).unwrap();
        it.apply_decision(d("b", &[O, O])).unwrap();
        assert_eq!(it.status, ItemStatus::Conflicted);
        it.apply_decision(d("c", &[BPer, O])).unwrap();
        assert_eq!(it.resolution, Some(vec![BPer, O]));
    }

    #[test]
    fn three_way_split_escalates_until_override() {
        let mut it = item();
        it.apply_decision(d("a", &[BPer, O])).unwrap();
        it.apply_decision(d("b", &[O, O])).unwrap();
        it.apply_decision(d("c", &[BLoc, O])).unwrap();
        assert_eq!(it.status, ItemStatus::Conflicted);
        assert!(it.escalated);
        let mut o = d("lead", &[BOrg, O]);
        o.manual_override = true;
        it.apply_decision(o).unwrap();
        assert_eq!(it.resolution, Some(vec![BOrg, O]));
        assert_eq!(it.version, 4);
    }

    #[test]
    fn rejections_leave_the_item_unchanged() {
        let mut it = item();
        it.apply_decision(d("a", &[BPer, O])).unwrap();
        let before = it.clone();
        assert!(matches!(it.apply_decision(d("a", &[O, O])), Err(AuditError::DuplicateAuditor { .. })));
        assert!(matches!(it.apply_decision(d("b", &[O, IPer])), Err(AuditError::InvalidTags(_))));
        assert!(matches!(it.apply_decision(d("b", &[O])), Err(AuditError::InvalidTags(_))));
        let mut o = d("lead", &[O, O]);
        o.manual_override = true;
        assert!(matches!(it.apply_decision(o), Err(AuditError::NotEscalated(1))));
        assert_eq!(it, before);
    }
}
