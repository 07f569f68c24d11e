use serde::{Deserialize, Serialize};

use super::MtbrError;
use crate::diff::OptimizerConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HyperParams {
    pub d_emb: usize,
    pub d_hidden: usize,
    /// Output width of the two task projections.
    pub d_task: usize,
    /// Weight of the boundary losses against the span loss.
    pub w1: f64,
    /// Threshold on the per-sentence uniform draw; the revision is skipped
    /// when the draw exceeds it.
    pub alpha: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub max_len: usize,
    /// Training tokens seen fewer times than this share the unknown row.
    pub min_token_count: usize,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            d_emb: 32,
            d_hidden: 32,
            d_task: 32,
            w1: 0.5,
            alpha: 0.5,
            epochs: 20,
            batch_size: 16,
            seed: 1,
            max_len: 128,
            min_token_count: 2,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<(), MtbrError> {
        let bad = |m: String| Err(MtbrError::InvalidConfig(m));
        if !(0.0..=1.0).contains(&self.w1) {
            return bad(format!("w1 must be in [0, 1], got {}", self.w1));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha must be in [0, 1], got {}", self.alpha));
        }
        if self.d_emb == 0 || self.d_hidden == 0 || self.d_task == 0 {
            return bad("dimensions must be positive".into());
        }
        if self.batch_size == 0 || self.max_len == 0 {
            return bad("batch_size and max_len must be positive".into());
        }
        Ok(())
    }
}

/// Ablation switches. All false is the full model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VariantFlags {
    /// Drop the boundary task entirely: single-task NER.
    pub disable_bd: bool,
    /// Keep multi-task training but never revise the NER distribution.
    pub disable_revision: bool,
    /// Fix the gate at 1.
    pub disable_gate: bool,
    /// Skip the random draw; revise on every training sentence.
    pub disable_random: bool,
}

impl VariantFlags {
    pub fn revision_active(&self) -> bool {
        !self.disable_bd && !self.disable_revision
    }
}

/// The five ablation rows, in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    WithoutBoundaryDetection,
    WithoutBiRevision,
    WithoutGatedIgnoring,
    WithoutRandomProbability,
    Full,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::WithoutBoundaryDetection,
        Variant::WithoutBiRevision,
        Variant::WithoutGatedIgnoring,
        Variant::WithoutRandomProbability,
        Variant::Full,
    ];

    pub fn flags(self) -> VariantFlags {
        let mut f = VariantFlags::default();
        match self {
            Variant::WithoutBoundaryDetection => f.disable_bd = true,
            Variant::WithoutBiRevision => f.disable_revision = true,
            // the ignoring mechanism is the gate together with the random draw
            Variant::WithoutGatedIgnoring => {
                f.disable_gate = true;
                f.disable_random = true;
            }
            Variant::WithoutRandomProbability => f.disable_random = true,
            Variant::Full => {}
        }
        f
    }

    pub fn label(self) -> &'static str {
        match self {
            Variant::WithoutBoundaryDetection => "w/o Boundary Detection",
            Variant::WithoutBiRevision => "w/o Bi-Revision",
            Variant::WithoutGatedIgnoring => "w/o Gated Ignoring Mechanism",
            Variant::WithoutRandomProbability => "w/o Random Probability",
            Variant::Full => "MTBR",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        let key = s.to_ascii_lowercase().replace(['-', ' ', '/'], "_");
        match key.as_str() {
            "no_bd" | "without_boundary_detection" | "w_o_boundary_detection" => {
                Some(Variant::WithoutBoundaryDetection)
            }
            "no_revision" | "without_bi_revision" | "w_o_bi_revision" => Some(Variant::WithoutBiRevision),
            "no_gate" | "without_gated_ignoring" | "w_o_gated_ignoring_mechanism" => {
                Some(Variant::WithoutGatedIgnoring)
            }
            "no_random" | "without_random_probability" | "w_o_random_probability" => {
                Some(Variant::WithoutRandomProbability)
            }
            "full" | "mtbr" => Some(Variant::Full),
            _ => None,
        }
    }
}

/// Everything needed to train one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default)]
    pub hyper: HyperParams,
    #[serde(default = "default_optimizer")]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub variant: VariantFlags,
    /// Parameter-name prefixes that never receive optimizer updates.
    #[serde(default)]
    pub freeze: Vec<String>,
}

fn default_optimizer() -> OptimizerConfig {
    OptimizerConfig::adam(0.005)
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hyper: HyperParams::default(),
            optimizer: default_optimizer(),
            variant: VariantFlags::default(),
            freeze: Vec::new(),
        }
    }
}
