use serde::{Deserialize, Serialize};

use super::{DiffError, ParamId, ParameterStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    #[serde(default)]
    pub weight_decay: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_epsilon() -> f64 {
    1e-8
}

impl OptimizerConfig {
    pub fn sgd(learning_rate: f64) -> OptimizerConfig {
        OptimizerConfig {
            kind: OptimizerKind::Sgd,
            learning_rate,
            weight_decay: 0.0,
            beta1: default_beta1(),
            beta2: default_beta2(),
            epsilon: default_epsilon(),
        }
    }

    pub fn adam(learning_rate: f64) -> OptimizerConfig {
        OptimizerConfig {
            kind: OptimizerKind::Adam,
            ..OptimizerConfig::sgd(learning_rate)
        }
    }

    pub fn validate(&self) -> Result<(), DiffError> {
        if !(self.learning_rate > 0.0) {
            return Err(DiffError::InvalidConfig(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.weight_decay < 0.0 {
            return Err(DiffError::InvalidConfig("weight_decay must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

/// SGD or Adam with L2 weight decay folded into the gradient. Adam keeps a
/// step counter per parameter, so a parameter that sits out a step (e.g. a
/// head that is not on the current phase's path) is left bit-for-bit alone.
#[derive(Debug, Clone)]
pub struct Optimizer {
    cfg: OptimizerConfig,
    state: Vec<Moments>,
}

impl Optimizer {
    pub fn new(cfg: OptimizerConfig) -> Result<Optimizer, DiffError> {
        cfg.validate()?;
        Ok(Optimizer {
            cfg,
            state: Vec::new(),
        })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.cfg
    }

    /// Updates every parameter in `params` from its accumulated gradient.
    pub fn step(&mut self, store: &mut ParameterStore, params: &[ParamId]) {
        if self.state.len() < store.len() {
            self.state.resize_with(store.len(), Moments::default);
        }
        let cfg = self.cfg;
        for &id in params {
            let p = store.get_mut(id);
            let value = p.value.as_mut_slice();
            let grad = p.grad.as_slice();
            match cfg.kind {
                OptimizerKind::Sgd => {
                    for (w, &g) in value.iter_mut().zip(grad) {
                        *w -= cfg.learning_rate * (g + cfg.weight_decay * *w);
                    }
                }
                OptimizerKind::Adam => {
                    let st = &mut self.state[id.index()];
                    if st.m.len() != value.len() {
                        st.m = vec![0.0; value.len()];
                        st.v = vec![0.0; value.len()];
                    }
                    st.t += 1;
                    let bc1 = 1.0 - cfg.beta1.powi(st.t as i32);
                    let bc2 = 1.0 - cfg.beta2.powi(st.t as i32);
                    for (k, (w, &g0)) in value.iter_mut().zip(grad).enumerate() {
                        let g = g0 + cfg.weight_decay * *w;
                        st.m[k] = cfg.beta1 * st.m[k] + (1.0 - cfg.beta1) * g;
                        st.v[k] = cfg.beta2 * st.v[k] + (1.0 - cfg.beta2) * g * g;
                        let m_hat = st.m[k] / bc1;
                        let v_hat = st.v[k] / bc2;
                        *w -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
                    }
                }
            }
        }
    }

    pub fn step_all(&mut self, store: &mut ParameterStore) {
        let ids: Vec<ParamId> = store.ids().collect();
        self.step(store, &ids);
    }
}

/// One-shot step with a fresh optimizer.
pub fn optimizer_step(store: &mut ParameterStore, cfg: &OptimizerConfig) -> Result<(), DiffError> {
    Optimizer::new(*cfg)?.step_all(store);
    Ok(())
}
