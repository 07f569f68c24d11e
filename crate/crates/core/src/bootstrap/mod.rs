//! Preliminary dataset construction: dictionary filtering of homologous
//! sentences and rule/gazetteer tagging of unlabeled target text.

mod rules;
mod vocab;

pub use rules::{
    assemble_seed, Gazetteer, GazetteerEntry, Rule, RuleConfig, RuleEngine, RuleError, RulePosition,
};
pub use vocab::{build_vocab, filter_by_vocab, is_exempt, tokenize, Vocabulary};
