use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::encoder::TokenVocab;
use super::heads::draw_revision;
use super::model::{Example, ModelSidecar, Mtbr, Phase};
use super::MtbrError;
use crate::corpus::LabeledSentence;
use crate::diff::{Checkpoint, DiffError, Optimizer, ParamId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLosses {
    /// Mean `L1` over the batch; absent for the single-task variant.
    pub bd: Option<f64>,
    /// Mean `L3` over the batch.
    pub ner: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub bd_loss: Option<f64>,
    pub ner_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub steps: usize,
}

/// Owns a model, its optimizer state and the training RNG (shuffling and
/// the per-sentence revision draws).
#[derive(Debug, Clone)]
pub struct Trainer {
    pub model: Mtbr,
    optimizer: Optimizer,
    rng: ChaCha8Rng,
    frozen: Vec<bool>,
    steps: usize,
}

impl Trainer {
    pub fn new(model: Mtbr, cfg: &TrainConfig) -> Result<Trainer, MtbrError> {
        cfg.optimizer.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(model.hyper.seed);
        rng.set_stream(1);
        let frozen = model
            .store
            .iter()
            .map(|p| cfg.freeze.iter().any(|f| p.name.starts_with(f.as_str())))
            .collect();
        Ok(Trainer {
            model,
            optimizer: Optimizer::new(cfg.optimizer)?,
            rng,
            frozen,
            steps: 0,
        })
    }

    pub fn rng(&self) -> &ChaCha8Rng {
        &self.rng
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    fn updatable(&self, phase: Phase) -> Vec<ParamId> {
        self.model
            .phase_params(phase)
            .into_iter()
            .filter(|id| !self.frozen[id.index()])
            .collect()
    }

    fn revise_this_sentence(&mut self) -> bool {
        let v = self.model.variant;
        if !v.revision_active() {
            false
        } else if v.disable_random {
            true
        } else {
            draw_revision(self.model.hyper.alpha, &mut self.rng)
        }
    }

    /// One optimizer update of a single phase over `batch`; returns the mean
    /// loss of that phase before the update.
    pub fn phase_step(&mut self, batch: &[Example], phase: Phase) -> Result<f64, MtbrError> {
        if batch.is_empty() {
            return Err(MtbrError::EmptyTrainingSet);
        }
        self.model.store.zero_grads();
        let mut total = 0.0;
        for ex in batch {
            let revised = phase == Phase::Ner && self.revise_this_sentence();
            let loss = self.model.phase_loss_and_backward(ex, phase, revised, None)?;
            if !loss.is_finite() {
                return Err(DiffError::NonFiniteLoss(loss).into());
            }
            total += loss;
        }
        let n = batch.len() as f64;
        self.model.store.scale_grads(1.0 / n);
        let ids = self.updatable(phase);
        self.optimizer.step(&mut self.model.store, &ids);
        self.steps += 1;
        Ok(total / n)
    }

    /// The boundary phase and then the NER phase on the same batch. The
    /// single-task variant runs only the NER phase.
    pub fn alternate_train_step(&mut self, batch: &[Example]) -> Result<StepLosses, MtbrError> {
        let bd = if self.model.variant.disable_bd {
            None
        } else {
            Some(self.phase_step(batch, Phase::Bd)?)
        };
        let ner = self.phase_step(batch, Phase::Ner)?;
        Ok(StepLosses { bd, ner })
    }

    /// One pass over `data` in shuffled mini-batches.
    pub fn train_epoch(&mut self, data: &[Example], epoch: usize) -> Result<EpochStats, MtbrError> {
        if data.is_empty() {
            return Err(MtbrError::EmptyTrainingSet);
        }
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut self.rng);
        let mut bd_sum = 0.0;
        let mut ner_sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(self.model.hyper.batch_size) {
            let batch: Vec<Example> = chunk.iter().map(|&i| data[i].clone()).collect();
            let l = self.alternate_train_step(&batch)?;
            bd_sum += l.bd.unwrap_or(0.0);
            ner_sum += l.ner;
            batches += 1;
        }
        let b = batches as f64;
        let stats = EpochStats {
            epoch,
            bd_loss: (!self.model.variant.disable_bd).then_some(bd_sum / b),
            ner_loss: ner_sum / b,
        };
        log::info!(
            "epoch {epoch}: ner loss {:.4}{}",
            stats.ner_loss,
            stats.bd_loss.map(|l| format!(", bd loss {l:.4}")).unwrap_or_default()
        );
        Ok(stats)
    }
}

/// Builds a reference-encoder model over the training vocabulary and trains
/// it for `cfg.hyper.epochs` epochs.
pub fn fit(train: &[LabeledSentence], cfg: &TrainConfig) -> Result<(Trainer, TrainReport), MtbrError> {
    if train.is_empty() {
        return Err(MtbrError::EmptyTrainingSet);
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for t in train.iter().flat_map(|s| &s.tokens) {
        *counts.entry(t.as_str()).or_default() += 1;
    }
    let vocab = TokenVocab::from_tokens(
        counts
            .into_iter()
            .filter(|&(_, c)| c >= cfg.hyper.min_token_count)
            .map(|(t, _)| t),
    );
    let model = Mtbr::new(cfg.hyper, cfg.variant, vocab)?;
    let examples: Vec<Example> = train.iter().map(|s| model.example(s)).collect();
    let mut trainer = Trainer::new(model, cfg)?;
    let mut report = TrainReport::default();
    for epoch in 1..=cfg.hyper.epochs {
        report.epochs.push(trainer.train_epoch(&examples, epoch)?);
    }
    report.steps = trainer.steps();
    Ok((trainer, report))
}

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const SIDECAR_FILE: &str = "model.json";

/// Writes `model.ckpt` and `model.json` into `dir`.
pub fn save_model(model: &Mtbr, rng: &ChaCha8Rng, dir: &Path) -> Result<(), MtbrError> {
    std::fs::create_dir_all(dir).map_err(|e| MtbrError::io(dir, e))?;
    let ckpt = dir.join(CHECKPOINT_FILE);
    std::fs::write(&ckpt, Checkpoint::capture(&model.store, rng).to_bytes())
        .map_err(|e| MtbrError::io(&ckpt, e))?;
    let side = dir.join(SIDECAR_FILE);
    let json = serde_json::to_string_pretty(&model.sidecar()).map_err(|e| MtbrError::io(&side, e))?;
    std::fs::write(&side, json).map_err(|e| MtbrError::io(&side, e))?;
    Ok(())
}

pub fn load_model(dir: &Path) -> Result<(Mtbr, ChaCha8Rng), MtbrError> {
    let side = dir.join(SIDECAR_FILE);
    let text = std::fs::read_to_string(&side).map_err(|e| MtbrError::io(&side, e))?;
    let sidecar: ModelSidecar = serde_json::from_str(&text).map_err(|e| MtbrError::io(&side, e))?;
    let ckpt = dir.join(CHECKPOINT_FILE);
    let bytes = std::fs::read(&ckpt).map_err(|e| MtbrError::io(&ckpt, e))?;
    let checkpoint = Checkpoint::from_bytes(&bytes)?;
    let model = Mtbr::from_parts(sidecar, &checkpoint)?;
    Ok((model, checkpoint.rng.restore()))
}
