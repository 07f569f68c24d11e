use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

use super::{DiffError, Matrix};

/// Handle into a [`ParameterStore`]; cheaper than a name lookup in hot loops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(usize);

impl ParamId {
    /// Dense registration index.
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
pub struct Parameter {
    pub name: String,
    pub value: Matrix,
    pub grad: Matrix,
}

/// Named trainable tensors, each paired with a same-shape gradient buffer.
/// Iteration order is registration order, which keeps checkpoints and
/// optimizer updates deterministic.
#[derive(Debug, Clone)]
pub struct ParameterStore {
    params: Vec<Parameter>,
    index: BTreeMap<String, ParamId>,
    seed: u64,
    init_rng: ChaCha8Rng,
}

impl ParameterStore {
    pub fn new(seed: u64) -> ParameterStore {
        ParameterStore {
            params: Vec::new(),
            index: BTreeMap::new(),
            seed,
            init_rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn register(&mut self, name: &str, value: Matrix) -> Result<ParamId, DiffError> {
        if self.index.contains_key(name) {
            return Err(DiffError::DuplicateParameter(name.to_string()));
        }
        let id = ParamId(self.params.len());
        let grad = Matrix::zeros(value.rows(), value.cols());
        self.params.push(Parameter {
            name: name.to_string(),
            value,
            grad,
        });
        self.index.insert(name.to_string(), id);
        Ok(id)
    }

    /// Glorot-uniform matrix: `U(−a, a)` with `a = √(6 / (fan_in + fan_out))`.
    pub fn add_matrix(&mut self, name: &str, rows: usize, cols: usize) -> Result<ParamId, DiffError> {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| self.init_rng.gen_range(-bound..=bound))
            .collect();
        self.register(name, Matrix::from_vec(rows, cols, data))
    }

    /// Zero-initialized bias vector.
    pub fn add_vector(&mut self, name: &str, len: usize) -> Result<ParamId, DiffError> {
        self.register(name, Matrix::zeros(len, 1))
    }

    pub fn add_value(&mut self, name: &str, value: Matrix) -> Result<ParamId, DiffError> {
        self.register(name, value)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Matrix {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.params[id.0].value
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.params[id.0].grad
    }

    pub fn by_name(&self, name: &str) -> Option<&Parameter> {
        self.id(name).map(|id| self.get(id))
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    pub fn scale_grads(&mut self, factor: f64) {
        for p in &mut self.params {
            p.grad.as_mut_slice().iter_mut().for_each(|g| *g *= factor);
        }
    }

    /// Copies values from `other`, which must hold the same names and shapes.
    pub fn copy_values_from(&mut self, other: &ParameterStore) -> Result<(), DiffError> {
        for p in &mut self.params {
            let src = other
                .by_name(&p.name)
                .ok_or_else(|| DiffError::MissingParameter(p.name.clone()))?;
            if src.value.shape() != p.value.shape() {
                return Err(DiffError::ShapeMismatch {
                    op: "copy_values_from",
                    expected: format!("{:?}", p.value.shape()),
                    found: format!("{:?}", src.value.shape()),
                });
            }
            p.value = src.value.clone();
        }
        Ok(())
    }
}
