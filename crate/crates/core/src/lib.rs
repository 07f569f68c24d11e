//! Toolkit for bootstrapping a low-resource NER dataset and training a
//! multi-task boundary-revised tagger on it.

pub mod corpus;
pub mod bootstrap;
pub mod diff;
pub mod mtbr;
pub mod eval;
pub mod synth;
pub mod audit;
