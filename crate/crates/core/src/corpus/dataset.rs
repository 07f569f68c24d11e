use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;

use super::sentence::{extract_entities, LabeledSentence};
use super::tags::EntityType;
use super::CorpusError;

pub const MIN_SPLIT_SIZE: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<LabeledSentence>,
    pub dev: Vec<LabeledSentence>,
    pub test: Vec<LabeledSentence>,
}

/// Seeded shuffle, then contiguous 80/10/10 slicing with floor sizes for
/// train and dev; test takes the remainder.
pub fn split_dataset(data: &[LabeledSentence], seed: u64) -> Result<Split, CorpusError> {
    let n = data.len();
    if n < MIN_SPLIT_SIZE {
        return Err(CorpusError::TooFewSentences { found: n });
    }
    let n_train = n * 8 / 10;
    let n_dev = n / 10;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let pick = |idx: &[usize]| idx.iter().map(|&i| data[i].clone()).collect::<Vec<_>>();
    Ok(Split {
        train: pick(&order[..n_train]),
        dev: pick(&order[n_train..n_train + n_dev]),
        test: pick(&order[n_train + n_dev..]),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityCounts {
    #[serde(rename = "PER")]
    pub per: usize,
    #[serde(rename = "LOC")]
    pub loc: usize,
    #[serde(rename = "ORG")]
    pub org: usize,
}

impl EntityCounts {
    pub fn get(&self, t: EntityType) -> usize {
        match t {
            EntityType::Per => self.per,
            EntityType::Loc => self.loc,
            EntityType::Org => self.org,
        }
    }

    fn bump(&mut self, t: EntityType) {
        match t {
            EntityType::Per => self.per += 1,
            EntityType::Loc => self.loc += 1,
            EntityType::Org => self.org += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.per + self.loc + self.org
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub sentence_count: usize,
    pub token_count: usize,
    pub entity_counts: EntityCounts,
}

pub fn dataset_stats(data: &[LabeledSentence]) -> DatasetStats {
    let mut stats = DatasetStats::default();
    for s in data {
        stats.sentence_count += 1;
        stats.token_count += s.len();
        for span in extract_entities(s) {
            stats.entity_counts.bump(span.etype);
        }
    }
    stats
}

impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "sentences\t{}", self.sentence_count)?;
        writeln!(f, "tokens\t{}", self.token_count)?;
        for t in EntityType::ALL {
            writeln!(f, "{}\t{}", t, self.entity_counts.get(t))?;
        }
        write!(f, "entities\t{}", self.entity_counts.total())
    }
}
