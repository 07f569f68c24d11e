//! Entity-level scores, the boundary-error diagnostic and the ablation runner.

mod metrics;

pub use metrics::{bre_ratio, entity_prf, token_accuracy, BreReport, Prf, Scores};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;

use crate::corpus::{extract_entities, LabeledSentence};
use crate::mtbr::{fit, Mtbr, MtbrError, TrainConfig, Variant};

/// Scores of one model on one labeled set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub prf: Prf,
    pub bre: BreReport,
    pub token_accuracy: f64,
}

pub fn evaluate_model(model: &Mtbr, data: &[LabeledSentence]) -> Result<Evaluation, MtbrError> {
    let pred_tags = data
        .par_iter()
        .map(|s| model.predict_tags(&s.tokens))
        .collect::<Result<Vec<_>, _>>()?;
    let gold_tags: Vec<_> = data.iter().map(|s| s.tags.clone()).collect();
    let gold: Vec<_> = data.iter().map(extract_entities).collect();
    let pred: Vec<_> = pred_tags.iter().map(|t| crate::corpus::entities_from_tags(t)).collect();
    Ok(Evaluation {
        prf: entity_prf(&gold, &pred),
        bre: bre_ratio(&gold, &pred),
        token_accuracy: token_accuracy(&gold_tags, &pred_tags),
    })
}

/// Hex SHA-256 of the JSON form of `config`.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let json = serde_json::to_vec(config).expect("config serializes");
    hex::encode(Sha256::digest(&json))
}

/// `nerboot <version>` followed by the short commit of the working
/// directory, when it is a git checkout.
pub fn provenance() -> String {
    let rev = std::process::Command::new("git")
        .args(["rev-parse", "--short", "HEAD"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
        .unwrap_or_else(|| "unknown".into());
    format!("nerboot {} ({rev})", env!("CARGO_PKG_VERSION"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub variant: Variant,
    pub seed: u64,
    pub evaluation: Option<Evaluation>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: Variant,
    pub label: String,
    /// Successful runs the means are taken over.
    pub runs: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub f1_std: f64,
    pub bre: f64,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
    pub runs: Vec<RunResult>,
    pub seeds: Vec<u64>,
    pub config_hash: String,
    pub provenance: String,
}

impl AblationTable {
    pub fn row(&self, v: Variant) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.variant == v)
    }

    /// Tab-separated table, one line per variant, percentages with two decimals.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("variant\truns\tprecision\trecall\tf1\tf1_std\tbre\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{}\t{}\t{:.2}\t{:.2}\t{:.2}\t{:.2}\t{:.2}",
                r.label,
                r.runs,
                100.0 * r.precision,
                100.0 * r.recall,
                100.0 * r.f1,
                100.0 * r.f1_std,
                100.0 * r.bre
            );
        }
        out
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Trains and evaluates every variant once per seed, in parallel, and
/// reports per-variant means over the successful runs.
pub fn ablation_run(
    train: &[LabeledSentence],
    test: &[LabeledSentence],
    base: &TrainConfig,
    seeds: &[u64],
    variants: &[Variant],
) -> AblationTable {
    let jobs: Vec<(Variant, u64)> = variants
        .iter()
        .flat_map(|&v| seeds.iter().map(move |&s| (v, s)))
        .collect();
    let runs: Vec<RunResult> = jobs
        .par_iter()
        .map(|&(variant, seed)| {
            let mut cfg = base.clone();
            cfg.hyper.seed = seed;
            cfg.variant = variant.flags();
            let outcome = fit(train, &cfg).and_then(|(t, _)| evaluate_model(&t.model, test));
            match outcome {
                Ok(e) => {
                    log::info!("{} seed {seed}: f1 {:.4}", variant.label(), e.prf.micro.f1);
                    RunResult { variant, seed, evaluation: Some(e), error: None }
                }
                Err(e) => {
                    log::error!("{} seed {seed} failed: {e}", variant.label());
                    RunResult { variant, seed, evaluation: None, error: Some(e.to_string()) }
                }
            }
        })
        .collect();

    let rows = variants
        .iter()
        .map(|&v| {
            let evals: Vec<&Evaluation> = runs
                .iter()
                .filter(|r| r.variant == v)
                .filter_map(|r| r.evaluation.as_ref())
                .collect();
            let f1s: Vec<f64> = evals.iter().map(|e| e.prf.micro.f1).collect();
            let f1 = mean(&f1s);
            let var = mean(&f1s.iter().map(|x| (x - f1).powi(2)).collect::<Vec<_>>());
            AblationRow {
                variant: v,
                label: v.label().to_string(),
                runs: evals.len(),
                precision: mean(&evals.iter().map(|e| e.prf.micro.precision).collect::<Vec<_>>()),
                recall: mean(&evals.iter().map(|e| e.prf.micro.recall).collect::<Vec<_>>()),
                f1,
                f1_std: var.sqrt(),
                bre: mean(&evals.iter().map(|e| e.bre.bre_ratio).collect::<Vec<_>>()),
                failures: runs
                    .iter()
                    .filter(|r| r.variant == v)
                    .filter_map(|r| r.error.as_ref().map(|e| format!("seed {}: {e}", r.seed)))
                    .collect(),
            }
        })
        .collect();

    AblationTable {
        rows,
        runs,
        seeds: seeds.to_vec(),
        config_hash: config_hash(base),
        provenance: provenance(),
    }
}
