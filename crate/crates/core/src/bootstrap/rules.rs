//! Declarative lexical rules plus a longest-match gazetteer.
//!
//! Config is a TOML document:
//!
//! ```toml
//! case_fold = true
//!
//! [[rule]]
//! id = "title-cue"
//! triggers = ["Encik", "Datuk"]
//! position = "precedes_entity"
//! type = "PER"
//! capitalization_required = true
//! max_span_len = 3
//!
//! [[gazetteer]]
//! surface = "Kuala Lumpur"
//! type = "LOC"
//! ```

use log::warn;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

use crate::corpus::{
    tags_from_entities, EntitySpan, EntityType, LabeledSentence, Provenance, SentenceId,
};

#[derive(Debug, Error)]
pub enum RuleError {
    #[error("rule config: {0}")]
    Config(String),
    #[error("rules {first} and {second} assign {first_type} and {second_type} to tokens {start}..={end}")]
    RuleConflict {
        start: usize,
        end: usize,
        first: String,
        first_type: EntityType,
        second: String,
        second_type: EntityType,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RulePosition {
    /// Trigger sits right before the entity (`Encik Ali`).
    PrecedesEntity,
    /// Trigger sits right after the entity (`Ali bin ...` style suffix cues).
    FollowsEntity,
    /// Trigger is the first token of the entity (`Sungai Klang`).
    IsPrefixToken,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rule {
    pub id: String,
    pub triggers: Vec<String>,
    pub position: RulePosition,
    #[serde(rename = "type")]
    pub assigned_type: EntityType,
    #[serde(default = "default_true")]
    pub capitalization_required: bool,
    #[serde(default = "default_max_span")]
    pub max_span_len: usize,
}

fn default_true() -> bool {
    true
}

fn default_max_span() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GazetteerEntry {
    pub surface: String,
    #[serde(rename = "type")]
    pub etype: EntityType,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleConfig {
    #[serde(default = "default_true")]
    pub case_fold: bool,
    #[serde(default, rename = "rule")]
    pub rules: Vec<Rule>,
    #[serde(default, rename = "gazetteer")]
    pub gazetteer: Vec<GazetteerEntry>,
}

impl RuleConfig {
    pub fn from_toml(text: &str) -> Result<RuleConfig, RuleError> {
        toml::from_str(text).map_err(|e| RuleError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("rule config serializes")
    }
}

fn normalize(token: &str, case_fold: bool) -> String {
    if case_fold {
        token.to_lowercase()
    } else {
        token.to_string()
    }
}

fn is_capitalized(token: &str) -> bool {
    token.chars().next().is_some_and(char::is_uppercase)
}

fn is_wordlike(token: &str) -> bool {
    token.chars().any(char::is_alphabetic)
}

/// Multi-token surface forms with deterministic longest-match lookup.
#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    entries: BTreeMap<Vec<String>, EntityType>,
    max_len: usize,
    case_fold: bool,
}

impl Gazetteer {
    pub fn new(case_fold: bool) -> Gazetteer {
        Gazetteer {
            entries: BTreeMap::new(),
            max_len: 0,
            case_fold,
        }
    }

    pub fn insert(&mut self, surface: &str, etype: EntityType) -> Result<(), RuleError> {
        let key: Vec<String> = surface
            .split_whitespace()
            .map(|t| normalize(t, self.case_fold))
            .collect();
        if key.is_empty() {
            return Err(RuleError::Config("empty gazetteer surface".into()));
        }
        if let Some(prev) = self.entries.get(&key) {
            if *prev != etype {
                return Err(RuleError::Config(format!(
                    "gazetteer entry `{surface}` listed as both {prev} and {etype}"
                )));
            }
        }
        self.max_len = self.max_len.max(key.len());
        self.entries.insert(key, etype);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Left-to-right scan; at each position the longest entry wins and the
    /// scan resumes after it.
    pub fn find_all(&self, tokens: &[String]) -> Vec<EntitySpan> {
        let norm: Vec<String> = tokens.iter().map(|t| normalize(t, self.case_fold)).collect();
        let mut spans = Vec::new();
        let mut i = 0;
        while i < norm.len() {
            let longest = (1..=self.max_len.min(norm.len() - i))
                .rev()
                .find_map(|n| self.entries.get(&norm[i..i + n]).map(|&t| (n, t)));
            match longest {
                Some((n, etype)) => {
                    spans.push(EntitySpan::new(i, i + n - 1, etype));
                    i += n;
                }
                None => i += 1,
            }
        }
        spans
    }
}

#[derive(Debug, Clone)]
pub struct RuleEngine {
    rules: Vec<Rule>,
    triggers: Vec<BTreeSet<String>>,
    gazetteer: Gazetteer,
    case_fold: bool,
}

impl RuleEngine {
    pub fn new(config: &RuleConfig) -> Result<RuleEngine, RuleError> {
        let mut gazetteer = Gazetteer::new(config.case_fold);
        for e in &config.gazetteer {
            gazetteer.insert(&e.surface, e.etype)?;
        }
        let mut triggers = Vec::with_capacity(config.rules.len());
        for r in &config.rules {
            if r.max_span_len == 0 {
                return Err(RuleError::Config(format!("rule {}: max_span_len must be >= 1", r.id)));
            }
            let set: BTreeSet<String> = r
                .triggers
                .iter()
                .filter(|t| !t.is_empty())
                .map(|t| normalize(t, config.case_fold))
                .collect();
            if set.is_empty() {
                return Err(RuleError::Config(format!("rule {}: no trigger lexemes", r.id)));
            }
            triggers.push(set);
        }
        Ok(RuleEngine {
            rules: config.rules.clone(),
            triggers,
            gazetteer,
            case_fold: config.case_fold,
        })
    }

    pub fn gazetteer(&self) -> &Gazetteer {
        &self.gazetteer
    }

    fn run_ok(rule: &Rule, token: &str) -> bool {
        if rule.capitalization_required {
            is_capitalized(token)
        } else {
            is_wordlike(token)
        }
    }

    fn candidate(&self, rule: &Rule, tokens: &[String], at: usize) -> Option<(usize, usize)> {
        let n = tokens.len();
        let max = rule.max_span_len;
        match rule.position {
            RulePosition::PrecedesEntity => {
                let start = at + 1;
                let mut end = start;
                while end < n && end - start < max && Self::run_ok(rule, &tokens[end]) {
                    end += 1;
                }
                (end > start).then(|| (start, end - 1))
            }
            RulePosition::FollowsEntity => {
                let mut start = at;
                while start > 0 && at - start < max && Self::run_ok(rule, &tokens[start - 1]) {
                    start -= 1;
                }
                (start < at).then(|| (start, at - 1))
            }
            RulePosition::IsPrefixToken => {
                if !Self::run_ok(rule, &tokens[at]) {
                    return None;
                }
                let mut end = at + 1;
                while end < n && end - at < max && Self::run_ok(rule, &tokens[end]) {
                    end += 1;
                }
                (max == 1 || end > at + 1).then(|| (at, end - 1))
            }
        }
    }

    /// Spans proposed by the trigger rules, before overlap resolution.
    fn rule_candidates(&self, tokens: &[String]) -> Result<Vec<(EntitySpan, usize)>, RuleError> {
        let norm: Vec<String> = tokens.iter().map(|t| normalize(t, self.case_fold)).collect();
        let mut by_span: BTreeMap<(usize, usize), (EntityType, usize)> = BTreeMap::new();
        for (ri, rule) in self.rules.iter().enumerate() {
            for (at, tok) in norm.iter().enumerate() {
                if !self.triggers[ri].contains(tok) {
                    continue;
                }
                let Some(bounds) = self.candidate(rule, tokens, at) else {
                    continue;
                };
                match by_span.get(&bounds) {
                    Some(&(etype, other)) if etype != rule.assigned_type => {
                        return Err(RuleError::RuleConflict {
                            start: bounds.0,
                            end: bounds.1,
                            first: self.rules[other].id.clone(),
                            first_type: etype,
                            second: rule.id.clone(),
                            second_type: rule.assigned_type,
                        });
                    }
                    Some(_) => {}
                    None => {
                        by_span.insert(bounds, (rule.assigned_type, ri));
                    }
                }
            }
        }
        Ok(by_span
            .into_iter()
            .map(|((s, e), (t, ri))| (EntitySpan::new(s, e, t), ri))
            .collect())
    }

    /// Tags one unlabeled sentence. Gazetteer matches are placed first; rule
    /// spans follow in earliest-start-then-longest order, skipping any that
    /// overlap something already placed. `Ok(None)` when nothing fires.
    pub fn apply(&self, id: SentenceId, tokens: &[String]) -> Result<Option<LabeledSentence>, RuleError> {
        if tokens.is_empty() {
            return Ok(None);
        }
        let mut placed = self.gazetteer.find_all(tokens);
        let mut candidates = self.rule_candidates(tokens)?;
        candidates.sort_by_key(|(s, _)| (s.start, std::cmp::Reverse(s.len())));
        for (span, _) in candidates {
            if !placed.iter().any(|p| p.overlaps(&span)) {
                placed.push(span);
            }
        }
        if placed.is_empty() {
            return Ok(None);
        }
        placed.sort();
        let tags = tags_from_entities(tokens.len(), &placed);
        let s = LabeledSentence::new(id, tokens.to_vec(), tags, Provenance::Rule)
            .map_err(|e| RuleError::Config(format!("rule output invalid: {e}")))?;
        Ok(Some(s))
    }

    /// Tags a batch, logging and skipping sentences with rule conflicts.
    pub fn apply_all(&self, sentences: &[(SentenceId, Vec<String>)]) -> Vec<LabeledSentence> {
        sentences
            .iter()
            .filter_map(|(id, tokens)| match self.apply(id.clone(), tokens) {
                Ok(s) => s,
                Err(e) => {
                    warn!("skipping sentence {id}: {e}");
                    None
                }
            })
            .collect()
    }
}

/// Concatenates the two sources, dropping later sentences whose token
/// sequence was already seen.
pub fn assemble_seed(homologous: &[LabeledSentence], rule_tagged: &[LabeledSentence]) -> Vec<LabeledSentence> {
    let mut seen = std::collections::HashSet::new();
    homologous
        .iter()
        .chain(rule_tagged)
        .filter(|s| seen.insert(s.tokens.clone()))
        .cloned()
        .collect()
}
