use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use nerboot::audit::LoopConfig;
use nerboot::diff::OptimizerConfig;
use nerboot::mtbr::{HyperParams, TrainConfig, VariantFlags};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub homologous: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub audit_store: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub runs_dir: Option<PathBuf>,
}

/// Contents of the `--config` TOML file. Every section is optional; flags
/// given on the command line take precedence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub paths: Paths,
    #[serde(default)]
    pub hyper: HyperParams,
    #[serde(default = "default_optimizer")]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub variant: VariantFlags,
    #[serde(default)]
    pub freeze: Vec<String>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default, rename = "loop")]
    pub audit_loop: LoopConfig,
}

fn default_optimizer() -> OptimizerConfig {
    TrainConfig::default().optimizer
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3, 4, 5]
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            paths: Paths::default(),
            hyper: HyperParams::default(),
            optimizer: default_optimizer(),
            variant: VariantFlags::default(),
            freeze: Vec::new(),
            seeds: default_seeds(),
            audit_loop: LoopConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| anyhow::anyhow!("{}: {}", path.display(), e.message()))
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            hyper: self.hyper,
            optimizer: self.optimizer,
            variant: self.variant,
            freeze: self.freeze.clone(),
        }
    }

    pub fn runs_dir(&self) -> PathBuf {
        self.paths.runs_dir.clone().unwrap_or_else(|| PathBuf::from("runs"))
    }
}
