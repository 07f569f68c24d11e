use serde::{Deserialize, Serialize};

use super::config::{HyperParams, VariantFlags};
use super::encoder::{Encoder, EncoderCache, EncoderSpec, TokenVocab};
use super::heads::{
    bi_revise, combine_bd_loss, pair_from_probs, renormalize_rows, span_represent,
    transform_span_probs, Span, FIRST_TOKEN_SLOTS, INNER_TOKEN_SLOTS,
};
use super::MtbrError;
use crate::corpus::{
    derive_boundary_targets, derive_span_tag_targets, entities_from_tags, repair_bio2, EntitySpan,
    LabeledSentence, NerLabel, SpanTag, TagSet,
};
use crate::diff::ops::{
    affine, affine_backward, argmax, cross_entropy, cross_entropy_backward, one_hot,
    renormalize_backward, sigmoid, sigmoid_backward, softmax, softmax_backward, tanh_backward,
};
use crate::diff::{gradient_check, Checkpoint, DiffError, GradCheckReport, Matrix, ParamId, ParameterStore};

/// Training phases; the two objectives are optimized alternately.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Bd,
    Ner,
}

/// Gold supervision for one sentence, truncated to the model's max length.
#[derive(Debug, Clone)]
pub struct Example {
    pub ids: Vec<usize>,
    pub tags: Vec<NerLabel>,
    pub start_flags: Vec<u8>,
    pub end_flags: Vec<u8>,
    pub span_tags: Vec<SpanTag>,
}

/// Every intermediate quantity of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub h: Matrix,
    pub h_bd: Matrix,
    pub h_ner: Matrix,
    pub p_start: Matrix,
    pub p_end: Matrix,
    pub spans: Vec<Span>,
    pub v_sp: Vec<Vec<f64>>,
    pub p_sp: Vec<[f64; 4]>,
    pub p_new_sp: Matrix,
    pub gate: Vec<f64>,
    pub p_ner: Matrix,
    pub p_ner_rev: Matrix,
    /// Row-normalized output actually used for loss and decoding.
    pub p_final: Matrix,
    pub revised: bool,
    enc_cache: EncoderCache,
}

impl ForwardTrace {
    pub fn len(&self) -> usize {
        self.h.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.h.rows() == 0
    }

    /// Span distributions broadcast to their tokens (`L x 4`, zero rows
    /// outside spans).
    pub fn p_sp_per_token(&self) -> Matrix {
        let mut m = Matrix::zeros(self.len(), 4);
        for (&(i, j), p) in self.spans.iter().zip(&self.p_sp) {
            for t in i..=j {
                m.row_mut(t).copy_from_slice(p);
            }
        }
        m
    }

    pub fn predicted_tags(&self) -> Vec<NerLabel> {
        let raw: Vec<NerLabel> = self
            .p_final
            .iter_rows()
            .map(|r| NerLabel::from_index(argmax(r)).expect("7-way row"))
            .collect();
        repair_bio2(&raw)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BdLoss {
    pub start: f64,
    pub end: f64,
    pub span: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy)]
struct Affine {
    w: ParamId,
    b: ParamId,
}

impl Affine {
    fn new(store: &mut ParameterStore, name: &str, out: usize, inp: usize) -> Result<Affine, MtbrError> {
        Ok(Affine {
            w: store.add_matrix(&format!("{name}.w"), out, inp)?,
            b: store.add_vector(&format!("{name}.b"), out)?,
        })
    }

    fn forward(&self, store: &ParameterStore, x: &[f64]) -> Vec<f64> {
        affine(x, store.value(self.w), store.value(self.b).as_slice()).expect("layer shapes")
    }

    fn backward(&self, store: &mut ParameterStore, x: &[f64], dy: &[f64], dx: Option<&mut [f64]>) {
        let mut db = vec![0.0; dy.len()];
        let p = store.get_mut(self.w);
        affine_backward(x, &p.value, dy, &mut p.grad, &mut db, dx);
        for (g, d) in store.grad_mut(self.b).as_mut_slice().iter_mut().zip(&db) {
            *g += d;
        }
    }

    fn ids(&self) -> [ParamId; 2] {
        [self.w, self.b]
    }
}

/// The multi-task boundary-revised tagger.
#[derive(Debug, Clone)]
pub struct Mtbr {
    pub hyper: HyperParams,
    pub variant: VariantFlags,
    pub store: ParameterStore,
    encoder: Encoder,
    proj_bd: Affine,
    proj_ner: Affine,
    start: Affine,
    end: Affine,
    span: Affine,
    ner: Affine,
    gate: Affine,
}

/// Sidecar record describing how to rebuild a model around a checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSidecar {
    pub format_version: u32,
    pub hyper: HyperParams,
    pub variant: VariantFlags,
    pub tagset: TagSet,
    pub encoder: EncoderSpec,
}

impl Mtbr {
    /// Builds a model with the reference encoder over `vocab`.
    pub fn new(hyper: HyperParams, variant: VariantFlags, vocab: TokenVocab) -> Result<Mtbr, MtbrError> {
        let spec = EncoderSpec::Reference {
            d_emb: hyper.d_emb,
            d_hidden: hyper.d_hidden,
            vocab,
        };
        Mtbr::with_encoder(hyper, variant, spec)
    }

    pub fn with_encoder(hyper: HyperParams, variant: VariantFlags, spec: EncoderSpec) -> Result<Mtbr, MtbrError> {
        hyper.validate()?;
        let mut store = ParameterStore::new(hyper.seed);
        let encoder = spec.build(&mut store)?;
        let d = encoder.dim();
        let k = hyper.d_task;
        let proj_bd = Affine::new(&mut store, "proj.bd", k, d)?;
        let proj_ner = Affine::new(&mut store, "proj.ner", k, d)?;
        let start = Affine::new(&mut store, "bd.start", 2, k)?;
        let end = Affine::new(&mut store, "bd.end", 2, k)?;
        let span = Affine::new(&mut store, "span", SpanTag::COUNT, k)?;
        let ner = Affine::new(&mut store, "ner", NerLabel::COUNT, k)?;
        let gate = Affine::new(&mut store, "gate", 1, k)?;
        Ok(Mtbr {
            hyper,
            variant,
            store,
            encoder,
            proj_bd,
            proj_ner,
            start,
            end,
            span,
            ner,
            gate,
        })
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn sidecar(&self) -> ModelSidecar {
        ModelSidecar {
            format_version: 1,
            hyper: self.hyper,
            variant: self.variant,
            tagset: TagSet::standard(),
            encoder: self.encoder.spec(),
        }
    }

    pub fn from_parts(sidecar: ModelSidecar, checkpoint: &Checkpoint) -> Result<Mtbr, MtbrError> {
        if !sidecar.tagset.is_standard() {
            return Err(MtbrError::InvalidConfig("sidecar tag set differs from the built-in order".into()));
        }
        let mut m = Mtbr::with_encoder(sidecar.hyper, sidecar.variant, sidecar.encoder)?;
        checkpoint.load_into(&mut m.store)?;
        Ok(m)
    }

    /// Parameters on the gradient path of `phase` under the current variant.
    pub fn phase_params(&self, phase: Phase) -> Vec<ParamId> {
        let mut ids = self.encoder.params();
        match phase {
            Phase::Bd => {
                ids.extend(self.proj_bd.ids());
                ids.extend(self.start.ids());
                ids.extend(self.end.ids());
                ids.extend(self.span.ids());
            }
            Phase::Ner => {
                ids.extend(self.proj_ner.ids());
                ids.extend(self.ner.ids());
                if self.variant.revision_active() {
                    if !self.variant.disable_gate {
                        ids.extend(self.gate.ids());
                    }
                    ids.extend(self.span.ids());
                    ids.extend(self.proj_bd.ids());
                }
            }
        }
        ids
    }

    /// Parameters of the boundary classifiers (never on the NER path).
    pub fn boundary_head_params(&self) -> Vec<ParamId> {
        let mut v = self.start.ids().to_vec();
        v.extend(self.end.ids());
        v
    }

    /// Parameters that exist only for the auxiliary task: the boundary
    /// classifiers, the span classifier and the boundary projection.
    pub fn auxiliary_params(&self) -> Vec<ParamId> {
        let mut v = self.boundary_head_params();
        v.extend(self.span.ids());
        v.extend(self.proj_bd.ids());
        v
    }

    pub fn example(&self, s: &LabeledSentence) -> Example {
        let n = s.len().min(self.hyper.max_len);
        if s.len() > n {
            log::warn!("sentence {} truncated from {} to {} tokens", s.id, s.len(), n);
        }
        let bt = derive_boundary_targets(s);
        let st = derive_span_tag_targets(s);
        Example {
            ids: self.encoder.vocab().ids(&s.tokens[..n]),
            tags: repair_bio2(&s.tags[..n]),
            start_flags: bt.start_flags[..n].to_vec(),
            end_flags: bt.end_flags[..n].to_vec(),
            span_tags: st.0[..n].to_vec(),
        }
    }

    fn project(&self, layer: &Affine, h: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(h.rows(), self.hyper.d_task);
        for t in 0..h.rows() {
            let y = layer.forward(&self.store, h.row(t));
            for (o, v) in out.row_mut(t).iter_mut().zip(y) {
                *o = v.tanh();
            }
        }
        out
    }

    fn classify(&self, layer: &Affine, h: &Matrix, k: usize) -> Matrix {
        let mut out = Matrix::zeros(h.rows(), k);
        for t in 0..h.rows() {
            out.row_mut(t).copy_from_slice(&softmax(&layer.forward(&self.store, h.row(t))));
        }
        out
    }

    /// Runs the whole network. `revised` selects which distribution becomes
    /// `p_final`; it is ignored when the variant has no revision path.
    pub fn forward(&self, ids: &[usize], revised: bool) -> Result<ForwardTrace, MtbrError> {
        self.forward_with_spans(ids, revised, None)
    }

    /// As [`Mtbr::forward`], but with the detected spans replaced by `spans`
    /// when given. Span detection is piecewise constant in the parameters, so
    /// holding it fixed gives the same local loss surface.
    pub fn forward_with_spans(
        &self,
        ids: &[usize],
        revised: bool,
        spans: Option<&[Span]>,
    ) -> Result<ForwardTrace, MtbrError> {
        if ids.is_empty() {
            return Err(MtbrError::EmptySentence);
        }
        let n = ids.len();
        let (h, enc_cache) = self.encoder.encode(&self.store, ids);
        let h_bd = self.project(&self.proj_bd, &h);
        let h_ner = self.project(&self.proj_ner, &h);
        let p_start = self.classify(&self.start, &h_bd, 2);
        let p_end = self.classify(&self.end, &h_bd, 2);

        let spans = if self.variant.disable_bd {
            Vec::new()
        } else if let Some(s) = spans {
            if s.iter().any(|&(i, j)| i > j || j >= n) {
                return Err(MtbrError::InvalidConfig(format!("span out of range for length {n}")));
            }
            s.to_vec()
        } else {
            pair_from_probs(&p_start, &p_end)
        };
        let mut v_sp = Vec::with_capacity(spans.len());
        let mut p_sp = Vec::with_capacity(spans.len());
        for &span in &spans {
            let (v, _) = span_represent(span, &h_bd, &[]);
            let p = softmax(&self.span.forward(&self.store, &v));
            p_sp.push([p[0], p[1], p[2], p[3]]);
            v_sp.push(v);
        }
        let p_new_sp = transform_span_probs(&spans, &p_sp, n);

        let gate: Vec<f64> = if self.variant.disable_gate {
            vec![1.0; n]
        } else {
            (0..n)
                .map(|t| sigmoid(self.gate.forward(&self.store, h_ner.row(t))[0]))
                .collect()
        };
        let p_ner = self.classify(&self.ner, &h_ner, NerLabel::COUNT);
        let p_ner_rev = bi_revise(&p_ner, &gate, &p_new_sp);
        let revised = revised && self.variant.revision_active();
        let p_final = renormalize_rows(if revised { &p_ner_rev } else { &p_ner });

        Ok(ForwardTrace {
            h,
            h_bd,
            h_ner,
            p_start,
            p_end,
            spans,
            v_sp,
            p_sp,
            p_new_sp,
            gate,
            p_ner,
            p_ner_rev,
            p_final,
            revised,
            enc_cache,
        })
    }

    /// Boundary and span losses. The span term is 0 when no span was detected.
    pub fn bd_loss(&self, trace: &ForwardTrace, ex: &Example) -> Result<BdLoss, MtbrError> {
        let n = trace.len() as f64;
        let mut start = 0.0;
        let mut end = 0.0;
        for t in 0..trace.len() {
            start += cross_entropy(trace.p_start.row(t), &one_hot(2, ex.start_flags[t] as usize))?;
            end += cross_entropy(trace.p_end.row(t), &one_hot(2, ex.end_flags[t] as usize))?;
        }
        start /= n;
        end /= n;
        let mut span = 0.0;
        if !trace.spans.is_empty() {
            for (&s, p) in trace.spans.iter().zip(&trace.p_sp) {
                let (_, y) = span_represent(s, &trace.h_bd, &ex.span_tags);
                span += cross_entropy(p, &y)?;
            }
            span /= trace.spans.len() as f64;
        }
        Ok(BdLoss {
            start,
            end,
            span,
            total: combine_bd_loss(start, end, span, self.hyper.w1),
        })
    }

    /// Mean token cross-entropy of `p_final` against the gold tags.
    pub fn ner_loss(&self, trace: &ForwardTrace, ex: &Example) -> Result<f64, MtbrError> {
        let mut total = 0.0;
        for t in 0..trace.len() {
            total += cross_entropy(trace.p_final.row(t), &one_hot(NerLabel::COUNT, ex.tags[t].index()))?;
        }
        Ok(total / trace.len() as f64)
    }

    /// Gradient of a loss on `v_sp` flowing back into the boundary projection.
    fn span_backward(&mut self, trace: &ForwardTrace, dp_sp: &[[f64; 4]], dh_bd: &mut Matrix) {
        for (k, &(i, j)) in trace.spans.iter().enumerate() {
            if dp_sp[k].iter().all(|&g| g == 0.0) {
                continue;
            }
            let dz = softmax_backward(&trace.p_sp[k], &dp_sp[k]);
            let mut dv = vec![0.0; self.hyper.d_task];
            self.span.backward(&mut self.store, &trace.v_sp[k], &dz, Some(&mut dv));
            let inv = 1.0 / (j - i + 1) as f64;
            for t in i..=j {
                for (g, d) in dh_bd.row_mut(t).iter_mut().zip(&dv) {
                    *g += d * inv;
                }
            }
        }
    }

    fn project_backward(&mut self, layer: Affine, h: &Matrix, out: &Matrix, dout: &Matrix, dh: &mut Matrix) {
        for t in 0..h.rows() {
            let dpre: Vec<f64> = out
                .row(t)
                .iter()
                .zip(dout.row(t))
                .map(|(&y, &g)| tanh_backward(y, g))
                .collect();
            if dpre.iter().all(|&g| g == 0.0) {
                continue;
            }
            layer.backward(&mut self.store, h.row(t), &dpre, Some(dh.row_mut(t)));
        }
    }

    /// Accumulates the gradient of the boundary-phase loss `L1`.
    pub fn bd_backward(&mut self, trace: &ForwardTrace, ex: &Example) -> Result<(), MtbrError> {
        let n = trace.len();
        let w1 = self.hyper.w1;
        let k = self.hyper.d_task;
        let mut dh_bd = Matrix::zeros(n, k);
        for (layer, probs, flags) in [
            (self.start, &trace.p_start, &ex.start_flags),
            (self.end, &trace.p_end, &ex.end_flags),
        ] {
            for t in 0..n {
                let mut dp = cross_entropy_backward(probs.row(t), &one_hot(2, flags[t] as usize))?;
                dp.iter_mut().for_each(|g| *g *= w1 / n as f64);
                let dz = softmax_backward(probs.row(t), &dp);
                layer.backward(&mut self.store, trace.h_bd.row(t), &dz, Some(dh_bd.row_mut(t)));
            }
        }
        if !trace.spans.is_empty() {
            let scale = (1.0 - w1) / trace.spans.len() as f64;
            let mut dp_sp = Vec::with_capacity(trace.spans.len());
            for (&s, p) in trace.spans.iter().zip(&trace.p_sp) {
                let (_, y) = span_represent(s, &trace.h_bd, &ex.span_tags);
                let g = cross_entropy_backward(p, &y)?;
                dp_sp.push([g[0] * scale, g[1] * scale, g[2] * scale, g[3] * scale]);
            }
            self.span_backward(trace, &dp_sp, &mut dh_bd);
        }
        let mut dh = Matrix::zeros(n, self.encoder.dim());
        self.project_backward(self.proj_bd, &trace.h, &trace.h_bd, &dh_bd, &mut dh);
        self.encoder.backward(&mut self.store, &trace.enc_cache, &dh);
        Ok(())
    }

    /// Accumulates the gradient of the NER-phase loss `L3`, through the
    /// revision, gate and span classifier when the revised branch was taken.
    pub fn ner_backward(&mut self, trace: &ForwardTrace, ex: &Example) -> Result<(), MtbrError> {
        let n = trace.len();
        let k = self.hyper.d_task;
        let mut dh_ner = Matrix::zeros(n, k);
        let mut dh_bd = Matrix::zeros(n, k);
        let mut dp_sp = vec![[0.0; 4]; trace.spans.len()];
        let mut span_of = vec![None; n];
        for (si, &(i, j)) in trace.spans.iter().enumerate() {
            for slot in span_of.iter_mut().take(j + 1).skip(i) {
                *slot = Some(si);
            }
        }

        for t in 0..n {
            let target = one_hot(NerLabel::COUNT, ex.tags[t].index());
            let mut dp_final = cross_entropy_backward(trace.p_final.row(t), &target)?;
            dp_final.iter_mut().for_each(|g| *g /= n as f64);
            let q = if trace.revised {
                trace.p_ner_rev.row(t)
            } else {
                trace.p_ner.row(t)
            };
            let sum: f64 = q.iter().sum();
            let dq = renormalize_backward(trace.p_final.row(t), sum, &dp_final);

            if trace.revised {
                if !self.variant.disable_gate {
                    let dgate: f64 = dq.iter().zip(trace.p_new_sp.row(t)).map(|(a, b)| a * b).sum();
                    let dz = sigmoid_backward(trace.gate[t], dgate);
                    if dz != 0.0 {
                        self.gate
                            .backward(&mut self.store, trace.h_ner.row(t), &[dz], Some(dh_ner.row_mut(t)));
                    }
                }
                if let Some(si) = span_of[t] {
                    let first = trace.spans[si].0 == t;
                    let slots = if first { &FIRST_TOKEN_SLOTS } else { &INNER_TOKEN_SLOTS };
                    for (c, &slot) in slots.iter().enumerate() {
                        dp_sp[si][c] += trace.gate[t] * dq[slot];
                    }
                }
            }
            let dz = softmax_backward(trace.p_ner.row(t), &dq);
            self.ner.backward(&mut self.store, trace.h_ner.row(t), &dz, Some(dh_ner.row_mut(t)));
        }

        let mut dh = Matrix::zeros(n, self.encoder.dim());
        self.project_backward(self.proj_ner, &trace.h, &trace.h_ner, &dh_ner, &mut dh);
        if trace.revised && !trace.spans.is_empty() {
            self.span_backward(trace, &dp_sp, &mut dh_bd);
            self.project_backward(self.proj_bd, &trace.h, &trace.h_bd, &dh_bd, &mut dh);
        }
        self.encoder.backward(&mut self.store, &trace.enc_cache, &dh);
        Ok(())
    }

    /// Finite-difference check of one phase's loss on one example, with the
    /// span structure and the revision branch held fixed.
    pub fn check_gradients(
        &mut self,
        ex: &Example,
        phase: Phase,
        revised: bool,
        eps: f64,
    ) -> Result<GradCheckReport, MtbrError> {
        let spans = self.forward(&ex.ids, revised)?.spans;
        let mut store = std::mem::replace(&mut self.store, ParameterStore::new(0));
        let result = gradient_check(&mut store, eps, |s| {
            std::mem::swap(&mut self.store, s);
            let out = self.phase_loss_and_backward(ex, phase, revised, Some(&spans));
            std::mem::swap(&mut self.store, s);
            out.map_err(|e| match e {
                MtbrError::Diff(d) => d,
                other => DiffError::InvalidConfig(other.to_string()),
            })
        });
        self.store = store;
        Ok(result?)
    }

    /// Forward pass plus gradient accumulation for one phase; returns the loss.
    pub fn phase_loss_and_backward(
        &mut self,
        ex: &Example,
        phase: Phase,
        revised: bool,
        spans: Option<&[Span]>,
    ) -> Result<f64, MtbrError> {
        let trace = self.forward_with_spans(&ex.ids, revised, spans)?;
        match phase {
            Phase::Bd => {
                let l = self.bd_loss(&trace, ex)?.total;
                self.bd_backward(&trace, ex)?;
                Ok(l)
            }
            Phase::Ner => {
                let l = self.ner_loss(&trace, ex)?;
                self.ner_backward(&trace, ex)?;
                Ok(l)
            }
        }
    }

    /// Inference-mode tags for a token sequence (revision always applied when
    /// the variant has it). Tokens past `max_len` are tagged `O`.
    pub fn predict_tags(&self, tokens: &[String]) -> Result<Vec<NerLabel>, MtbrError> {
        let n = tokens.len().min(self.hyper.max_len);
        let ids = self.encoder.vocab().ids(&tokens[..n]);
        let trace = self.forward(&ids, true)?;
        let mut tags = trace.predicted_tags();
        tags.resize(tokens.len(), NerLabel::O);
        Ok(tags)
    }

    pub fn predict_sentence(&self, tokens: &[String]) -> Result<Vec<EntitySpan>, MtbrError> {
        Ok(entities_from_tags(&self.predict_tags(tokens)?))
    }
}
