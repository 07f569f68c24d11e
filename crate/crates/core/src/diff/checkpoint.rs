//! Binary parameter checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic        8 bytes   "NBCKPT\0\0"
//! version      u32       currently 1
//! ner labels   u32 count, then per label: u32 byte length + UTF-8 bytes
//! span tags    u32 count, then per tag:   u32 byte length + UTF-8 bytes
//! rng seed     32 bytes  ChaCha8 key
//! rng stream   u64
//! rng word pos u128
//! param count  u32
//! per param:   u32 name length, UTF-8 name, u32 rows, u32 cols,
//!              rows*cols f64 values in row-major order
//! ```

use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use super::{DiffError, Matrix, ParameterStore};
use crate::corpus::TagSet;

pub const MAGIC: &[u8; 8] = b"NBCKPT\0\0";
pub const VERSION: u32 = 1;

/// Exact position of a ChaCha8 stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> RngState {
        RngState {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos(),
        }
    }

    pub fn restore(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos);
        rng
    }
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub tagset: TagSet,
    pub rng: RngState,
    pub params: Vec<(String, Matrix)>,
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&u32::try_from(v).expect("fits in u32").to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len());
    out.extend_from_slice(s.as_bytes());
}

impl Checkpoint {
    pub fn capture(store: &ParameterStore, rng: &ChaCha8Rng) -> Checkpoint {
        Checkpoint {
            tagset: TagSet::standard(),
            rng: RngState::capture(rng),
            params: store.iter().map(|p| (p.name.clone(), p.value.clone())).collect(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for list in [&self.tagset.ner_labels, &self.tagset.span_tags] {
            put_u32(&mut out, list.len());
            for s in list.iter() {
                put_str(&mut out, s);
            }
        }
        out.extend_from_slice(&self.rng.seed);
        out.extend_from_slice(&self.rng.stream.to_le_bytes());
        out.extend_from_slice(&self.rng.word_pos.to_le_bytes());
        put_u32(&mut out, self.params.len());
        for (name, m) in &self.params {
            put_str(&mut out, name);
            put_u32(&mut out, m.rows());
            put_u32(&mut out, m.cols());
            for v in m.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint, DiffError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(DiffError::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(DiffError::Checkpoint(format!("unsupported version {version}")));
        }
        let mut lists = [Vec::new(), Vec::new()];
        for list in &mut lists {
            let n = r.u32()? as usize;
            for _ in 0..n {
                list.push(r.string()?);
            }
        }
        let [ner_labels, span_tags] = lists;
        let tagset = TagSet {
            ner_labels,
            span_tags,
        };
        let seed: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
        let stream = u64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
        let word_pos = u128::from_le_bytes(r.take(16)?.try_into().expect("16 bytes"));
        let n = r.u32()? as usize;
        let mut params = Vec::with_capacity(n);
        for _ in 0..n {
            let name = r.string()?;
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            let raw = r.take(rows * cols * 8)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            params.push((name, Matrix::from_vec(rows, cols, data)));
        }
        if r.pos != bytes.len() {
            return Err(DiffError::Checkpoint("trailing bytes".into()));
        }
        Ok(Checkpoint {
            tagset,
            rng: RngState {
                seed,
                stream,
                word_pos,
            },
            params,
        })
    }

    /// Writes values into a store built with the same architecture. Every
    /// store parameter must be present with an identical shape.
    pub fn load_into(&self, store: &mut ParameterStore) -> Result<(), DiffError> {
        if !self.tagset.is_standard() {
            return Err(DiffError::Checkpoint(format!(
                "tag set mismatch: {:?}",
                self.tagset.ner_labels
            )));
        }
        if self.params.len() != store.len() {
            return Err(DiffError::Checkpoint(format!(
                "checkpoint has {} parameters, model has {}",
                self.params.len(),
                store.len()
            )));
        }
        for (name, m) in &self.params {
            let id = store
                .id(name)
                .ok_or_else(|| DiffError::MissingParameter(name.clone()))?;
            let shape = store.value(id).shape();
            if shape != m.shape() {
                return Err(DiffError::ShapeMismatch {
                    op: "checkpoint load",
                    expected: format!("{name} {shape:?}"),
                    found: format!("{:?}", m.shape()),
                });
            }
            *store.value_mut(id) = m.clone();
        }
        Ok(())
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DiffError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| DiffError::Checkpoint("truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, DiffError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn string(&mut self) -> Result<String, DiffError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| DiffError::Checkpoint("bad utf-8".into()))
    }
}
