//! Contextual token encoders.
//!
//! An encoder maps a token-id sequence of length `L` to an `L x d` matrix.
//! The reference implementation is an embedding table followed by a
//! bidirectional tanh recurrence; the precomputed adapter serves fixed
//! external vectors and has no trainable parameters.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::MtbrError;
use crate::diff::ops::{affine, affine_backward, tanh_backward};
use crate::diff::{Matrix, ParamId, ParameterStore};

pub const UNK: &str = "<unk>";

/// Token-to-row mapping. Row 0 is always the unknown-token row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenVocab {
    tokens: Vec<String>,
    #[serde(skip)]
    index: BTreeMap<String, usize>,
}

impl TokenVocab {
    pub fn from_tokens<'a, I: IntoIterator<Item = &'a str>>(tokens: I) -> TokenVocab {
        let mut list = vec![UNK.to_string()];
        let mut index = BTreeMap::new();
        index.insert(UNK.to_string(), 0);
        for t in tokens {
            if !index.contains_key(t) {
                index.insert(t.to_string(), list.len());
                list.push(t.to_string());
            }
        }
        TokenVocab { tokens: list, index }
    }

    fn reindex(&mut self) {
        self.index = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }

    pub fn ids(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }
}

/// Serializable description used to rebuild an encoder from a sidecar file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EncoderSpec {
    Reference {
        d_emb: usize,
        d_hidden: usize,
        vocab: TokenVocab,
    },
    Precomputed {
        dim: usize,
        vocab: TokenVocab,
        /// Row-major `vocab.len() x dim` vectors.
        vectors: Vec<f64>,
    },
}

impl EncoderSpec {
    pub fn build(mut self, store: &mut ParameterStore) -> Result<Encoder, MtbrError> {
        match &mut self {
            EncoderSpec::Reference {
                d_emb,
                d_hidden,
                vocab,
            } => {
                vocab.reindex();
                Ok(Encoder::Reference(ReferenceEncoder::new(
                    store,
                    vocab.clone(),
                    *d_emb,
                    *d_hidden,
                )?))
            }
            EncoderSpec::Precomputed { dim, vocab, vectors } => {
                vocab.reindex();
                if vectors.len() != vocab.len() * *dim {
                    return Err(MtbrError::InvalidConfig("precomputed vectors have wrong size".into()));
                }
                Ok(Encoder::Precomputed(PrecomputedEncoder {
                    vocab: vocab.clone(),
                    table: Matrix::from_vec(vocab.len(), *dim, vectors.clone()),
                }))
            }
        }
    }
}

/// Intermediate values an encoder needs for its backward pass.
#[derive(Debug, Clone)]
pub enum EncoderCache {
    Reference {
        ids: Vec<usize>,
        fwd: Matrix,
        bwd: Matrix,
    },
    Fixed,
}

#[derive(Debug, Clone)]
pub enum Encoder {
    Reference(ReferenceEncoder),
    Precomputed(PrecomputedEncoder),
}

impl Encoder {
    pub fn dim(&self) -> usize {
        match self {
            Encoder::Reference(e) => 2 * e.d_hidden,
            Encoder::Precomputed(e) => e.table.cols(),
        }
    }

    pub fn trainable(&self) -> bool {
        matches!(self, Encoder::Reference(_))
    }

    pub fn vocab(&self) -> &TokenVocab {
        match self {
            Encoder::Reference(e) => &e.vocab,
            Encoder::Precomputed(e) => &e.vocab,
        }
    }

    pub fn params(&self) -> Vec<ParamId> {
        match self {
            Encoder::Reference(e) => e.params(),
            Encoder::Precomputed(_) => Vec::new(),
        }
    }

    pub fn spec(&self) -> EncoderSpec {
        match self {
            Encoder::Reference(e) => EncoderSpec::Reference {
                d_emb: e.d_emb,
                d_hidden: e.d_hidden,
                vocab: e.vocab.clone(),
            },
            Encoder::Precomputed(e) => EncoderSpec::Precomputed {
                dim: e.table.cols(),
                vocab: e.vocab.clone(),
                vectors: e.table.as_slice().to_vec(),
            },
        }
    }

    /// `L x dim` contextual representations.
    pub fn encode(&self, store: &ParameterStore, ids: &[usize]) -> (Matrix, EncoderCache) {
        match self {
            Encoder::Reference(e) => e.encode(store, ids),
            Encoder::Precomputed(e) => {
                let mut h = Matrix::zeros(ids.len(), e.table.cols());
                for (t, &id) in ids.iter().enumerate() {
                    h.row_mut(t).copy_from_slice(e.table.row(id));
                }
                (h, EncoderCache::Fixed)
            }
        }
    }

    pub fn backward(&self, store: &mut ParameterStore, cache: &EncoderCache, dh: &Matrix) {
        if let (Encoder::Reference(e), EncoderCache::Reference { ids, fwd, bwd }) = (self, cache) {
            e.backward(store, ids, fwd, bwd, dh);
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct RnnParams {
    wx: ParamId,
    wh: ParamId,
    b: ParamId,
}

/// Embedding table plus forward and backward Elman recurrences; each token
/// gets `[h_fwd; h_bwd]`, so `d = 2 * d_hidden`.
#[derive(Debug, Clone)]
pub struct ReferenceEncoder {
    vocab: TokenVocab,
    d_emb: usize,
    d_hidden: usize,
    embedding: ParamId,
    fwd: RnnParams,
    bwd: RnnParams,
}

impl ReferenceEncoder {
    pub fn new(
        store: &mut ParameterStore,
        vocab: TokenVocab,
        d_emb: usize,
        d_hidden: usize,
    ) -> Result<ReferenceEncoder, MtbrError> {
        let embedding = store.add_matrix("enc.embedding", vocab.len(), d_emb)?;
        let mut dir = |name: &str| -> Result<RnnParams, MtbrError> {
            Ok(RnnParams {
                wx: store.add_matrix(&format!("enc.{name}.wx"), d_hidden, d_emb)?,
                wh: store.add_matrix(&format!("enc.{name}.wh"), d_hidden, d_hidden)?,
                b: store.add_vector(&format!("enc.{name}.b"), d_hidden)?,
            })
        };
        let fwd = dir("fwd")?;
        let bwd = dir("bwd")?;
        Ok(ReferenceEncoder {
            vocab,
            d_emb,
            d_hidden,
            embedding,
            fwd,
            bwd,
        })
    }

    pub fn params(&self) -> Vec<ParamId> {
        vec![
            self.embedding,
            self.fwd.wx,
            self.fwd.wh,
            self.fwd.b,
            self.bwd.wx,
            self.bwd.wh,
            self.bwd.b,
        ]
    }

    fn run(&self, store: &ParameterStore, p: RnnParams, ids: &[usize], reverse: bool) -> Matrix {
        let emb = store.value(self.embedding);
        let wx = store.value(p.wx);
        let wh = store.value(p.wh);
        let b = store.value(p.b).as_slice();
        let n = ids.len();
        let mut out = Matrix::zeros(n, self.d_hidden);
        let mut prev = vec![0.0; self.d_hidden];
        let no_bias = vec![0.0; self.d_hidden];
        for step in 0..n {
            let t = if reverse { n - 1 - step } else { step };
            let x = affine(emb.row(ids[t]), wx, b).expect("encoder shapes");
            let r = affine(&prev, wh, &no_bias).expect("encoder shapes");
            let h: Vec<f64> = x.iter().zip(&r).map(|(a, c)| (a + c).tanh()).collect();
            out.row_mut(t).copy_from_slice(&h);
            prev = h;
        }
        out
    }

    fn encode(&self, store: &ParameterStore, ids: &[usize]) -> (Matrix, EncoderCache) {
        let fwd = self.run(store, self.fwd, ids, false);
        let bwd = self.run(store, self.bwd, ids, true);
        let mut h = Matrix::zeros(ids.len(), 2 * self.d_hidden);
        for t in 0..ids.len() {
            let row = h.row_mut(t);
            row[..self.d_hidden].copy_from_slice(fwd.row(t));
            row[self.d_hidden..].copy_from_slice(bwd.row(t));
        }
        let cache = EncoderCache::Reference {
            ids: ids.to_vec(),
            fwd,
            bwd,
        };
        (h, cache)
    }

    /// Backpropagation through time for one direction. `offset` selects the
    /// half of `dh` that belongs to this direction.
    #[allow(clippy::too_many_arguments)]
    fn backward_dir(
        &self,
        store: &mut ParameterStore,
        p: RnnParams,
        ids: &[usize],
        states: &Matrix,
        dh: &Matrix,
        offset: usize,
        reverse: bool,
    ) {
        let d = self.d_hidden;
        let n = ids.len();
        let emb = store.value(self.embedding);
        let wx = store.value(p.wx);
        let wh = store.value(p.wh);
        let mut dwx = Matrix::zeros(d, self.d_emb);
        let mut dwh = Matrix::zeros(d, d);
        let mut db = vec![0.0; d];
        let mut demb: Vec<(usize, Vec<f64>)> = Vec::with_capacity(n);
        let mut carry = vec![0.0; d];
        let zeros = vec![0.0; d];
        for step in (0..n).rev() {
            let t = if reverse { n - 1 - step } else { step };
            let h = states.row(t);
            let da: Vec<f64> = (0..d)
                .map(|k| tanh_backward(h[k], dh[(t, offset + k)] + carry[k]))
                .collect();
            let mut dx = vec![0.0; self.d_emb];
            affine_backward(emb.row(ids[t]), wx, &da, &mut dwx, &mut db, Some(&mut dx));
            demb.push((ids[t], dx));
            let prev = if step == 0 {
                &zeros[..]
            } else {
                let pt = if reverse { t + 1 } else { t - 1 };
                states.row(pt)
            };
            let mut dprev = vec![0.0; d];
            let mut unused_db = vec![0.0; d];
            affine_backward(prev, wh, &da, &mut dwh, &mut unused_db, Some(&mut dprev));
            carry = dprev;
        }
        add_into(store.grad_mut(p.wx), &dwx);
        add_into(store.grad_mut(p.wh), &dwh);
        for (g, v) in store.grad_mut(p.b).as_mut_slice().iter_mut().zip(&db) {
            *g += v;
        }
        let ge = store.grad_mut(self.embedding);
        for (id, dx) in demb {
            for (g, v) in ge.row_mut(id).iter_mut().zip(&dx) {
                *g += v;
            }
        }
    }

    fn backward(&self, store: &mut ParameterStore, ids: &[usize], fwd: &Matrix, bwd: &Matrix, dh: &Matrix) {
        self.backward_dir(store, self.fwd, ids, fwd, dh, 0, false);
        self.backward_dir(store, self.bwd, ids, bwd, dh, self.d_hidden, true);
    }
}

fn add_into(dst: &mut Matrix, src: &Matrix) {
    for (d, s) in dst.as_mut_slice().iter_mut().zip(src.as_slice()) {
        *d += s;
    }
}

/// Fixed external vectors. Unknown tokens map to row 0, the zero vector.
#[derive(Debug, Clone)]
pub struct PrecomputedEncoder {
    vocab: TokenVocab,
    table: Matrix,
}

impl PrecomputedEncoder {
    /// Parses `token v1 v2 ... vd` lines (word2vec text style, no header).
    pub fn from_text(text: &str) -> Result<PrecomputedEncoder, MtbrError> {
        let mut tokens = Vec::new();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let mut parts = line.split_whitespace();
            let Some(tok) = parts.next() else { continue };
            let vals: Result<Vec<f64>, _> = parts.map(str::parse::<f64>).collect();
            let vals = vals.map_err(|e| MtbrError::InvalidConfig(format!("vectors line {}: {e}", i + 1)))?;
            if let Some(first) = rows.first() {
                if first.len() != vals.len() {
                    return Err(MtbrError::InvalidConfig(format!(
                        "vectors line {}: expected {} values",
                        i + 1,
                        first.len()
                    )));
                }
            }
            tokens.push(tok.to_string());
            rows.push(vals);
        }
        let dim = rows.first().map_or(0, Vec::len);
        if dim == 0 {
            return Err(MtbrError::InvalidConfig("no vectors".into()));
        }
        let vocab = TokenVocab::from_tokens(tokens.iter().map(String::as_str));
        let mut table = Matrix::zeros(vocab.len(), dim);
        for (tok, row) in tokens.iter().zip(&rows) {
            table.row_mut(vocab.id(tok)).copy_from_slice(row);
        }
        Ok(PrecomputedEncoder { vocab, table })
    }
}
