use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

use super::item::{AuditItem, ItemStatus};
use super::store::AuditStore;
use super::AuditError;
use crate::corpus::{LabeledSentence, NerLabel, Provenance, SentenceId};
use crate::eval::{evaluate_model, Evaluation};
use crate::mtbr::{fit, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub iteration: usize,
    /// Scores of this iteration's model on a held-out set, when one is given.
    pub dev: Option<Evaluation>,
    pub dataset_size: usize,
    pub disagreement_count: usize,
    pub disagreement_rate: f64,
    /// Items resolved and merged into the dataset before this iteration.
    pub audited_count: usize,
    pub enqueued_count: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoopConfig {
    pub epsilon: f64,
    pub max_iters: usize,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig {
            epsilon: 0.01,
            max_iters: 10,
        }
    }
}

/// Indices of sentences whose predicted tags differ from the stored ones.
pub fn disagreements(dataset: &[LabeledSentence], predictions: &[Vec<NerLabel>]) -> Vec<usize> {
    dataset
        .iter()
        .zip(predictions)
        .enumerate()
        .filter(|(_, (s, p))| &s.tags != *p)
        .map(|(i, _)| i)
        .collect()
}

/// Trains on the whole dataset and tags that same dataset. The returned
/// report has everything but `audited_count`, `enqueued_count` and
/// `converged` filled in.
pub fn run_iteration(
    dataset: &[LabeledSentence],
    cfg: &TrainConfig,
    dev: Option<&[LabeledSentence]>,
    iteration: usize,
) -> Result<(Vec<Vec<NerLabel>>, IterationReport), AuditError> {
    if dataset.is_empty() {
        return Err(AuditError::EmptyDataset);
    }
    let (trainer, _) = fit(dataset, cfg)?;
    let model = &trainer.model;
    let predictions = dataset
        .iter()
        .map(|s| model.predict_tags(&s.tokens))
        .collect::<Result<Vec<_>, _>>()?;
    let dev = dev.map(|d| evaluate_model(model, d)).transpose()?;
    let count = disagreements(dataset, &predictions).len();
    let report = IterationReport {
        iteration,
        dev,
        dataset_size: dataset.len(),
        disagreement_count: count,
        disagreement_rate: count as f64 / dataset.len() as f64,
        audited_count: 0,
        enqueued_count: 0,
        converged: false,
    };
    Ok((predictions, report))
}

/// Queues one pending item per disagreeing sentence. A sentence with an
/// open item is skipped, and a sentence resolved earlier comes back only
/// when the new prediction differs from its resolution.
pub fn enqueue_conflicts(
    store: &mut AuditStore,
    dataset: &[LabeledSentence],
    predictions: &[Vec<NerLabel>],
    iteration: usize,
) -> Result<Vec<AuditItem>, AuditError> {
    if dataset.len() != predictions.len() {
        return Err(AuditError::Misaligned {
            dataset: dataset.len(),
            predictions: predictions.len(),
        });
    }
    let mut open: BTreeSet<&SentenceId> = BTreeSet::new();
    let mut last_resolution: BTreeMap<&SentenceId, &Vec<NerLabel>> = BTreeMap::new();
    for item in store.items() {
        match (&item.status, &item.resolution) {
            (ItemStatus::Resolved, Some(r)) => {
                last_resolution.insert(&item.sentence_id, r);
            }
            _ => {
                open.insert(&item.sentence_id);
            }
        }
    }
    let mut todo = Vec::new();
    for i in disagreements(dataset, predictions) {
        let s = &dataset[i];
        if open.contains(&s.id) {
            continue;
        }
        if last_resolution.get(&s.id).is_some_and(|r| **r == predictions[i]) {
            continue;
        }
        todo.push(i);
    }
    todo.into_iter()
        .map(|i| {
            let s = &dataset[i];
            store.enqueue(s.id.clone(), s.tokens.clone(), s.tags.clone(), predictions[i].clone(), iteration)
        })
        .collect()
}

/// Replaces the tags of every resolved item's sentence with its resolution
/// and marks it audited. Tokens never change; merging twice is a no-op.
pub fn merge_resolved(dataset: &[LabeledSentence], items: &[AuditItem]) -> Vec<LabeledSentence> {
    let mut by_id: BTreeMap<&SentenceId, &AuditItem> = BTreeMap::new();
    for item in items.iter().filter(|i| i.status == ItemStatus::Resolved) {
        // later items for the same sentence win
        let keep = by_id.get(&item.sentence_id).is_none_or(|prev| prev.item_id < item.item_id);
        if keep {
            by_id.insert(&item.sentence_id, item);
        }
    }
    dataset
        .iter()
        .map(|s| match by_id.get(&s.id) {
            Some(item) if item.tokens == s.tokens => {
                let mut out = s.clone();
                out.tags = item.resolution.clone().expect("resolved items carry a resolution");
                out.provenance = Provenance::Audited;
                out
            }
            Some(_) => {
                log::warn!("resolution for {} no longer matches its tokens; skipped", s.id);
                s.clone()
            }
            None => s.clone(),
        })
        .collect()
}

/// True once the latest disagreement rate drops below `epsilon` or the
/// iteration count reaches `max_iters`.
pub fn check_convergence(history: &[IterationReport], cfg: &LoopConfig) -> bool {
    let Some(last) = history.last() else {
        return false;
    };
    if last.disagreement_rate < cfg.epsilon {
        return true;
    }
    if last.iteration >= cfg.max_iters {
        log::warn!(
            "stopping at iteration {} with disagreement rate {:.4} above {}",
            last.iteration,
            last.disagreement_rate,
            cfg.epsilon
        );
        return true;
    }
    false
}

/// The dataset under audit together with the settings for retraining.
#[derive(Debug, Clone)]
pub struct AuditLoop {
    pub dataset: Vec<LabeledSentence>,
    pub dev: Option<Vec<LabeledSentence>>,
    pub train: TrainConfig,
    pub config: LoopConfig,
}

impl AuditLoop {
    /// Merges resolved items, retrains, queues new disagreements and
    /// records the report.
    pub fn iterate(&mut self, store: &mut AuditStore) -> Result<IterationReport, AuditError> {
        let resolved: Vec<AuditItem> = store
            .items()
            .filter(|i| i.status == ItemStatus::Resolved)
            .cloned()
            .collect();
        let merged = merge_resolved(&self.dataset, &resolved);
        let audited_count = merged
            .iter()
            .zip(&self.dataset)
            .filter(|(a, b)| a.tags != b.tags || a.provenance != b.provenance)
            .count();
        self.dataset = merged;

        let iteration = store.reports().last().map_or(1, |r| r.iteration + 1);
        let (predictions, mut report) = run_iteration(&self.dataset, &self.train, self.dev.as_deref(), iteration)?;
        let queued = enqueue_conflicts(store, &self.dataset, &predictions, iteration)?;
        report.audited_count = audited_count;
        report.enqueued_count = queued.len();
        let mut history = store.reports().to_vec();
        history.push(report.clone());
        report.converged = check_convergence(&history, &self.config);
        store.add_report(report.clone())?;
        log::info!(
            "iteration {iteration}: {} disagreements ({:.2}%), {} queued, {} merged",
            report.disagreement_count,
            100.0 * report.disagreement_rate,
            report.enqueued_count,
            audited_count
        );
        Ok(report)
    }
}
