//! Training configuration and its flat `key = value` file format.
//!
//! ```text
//! # comment
//! variant = coCTI-MTL
//! epochs = 50
//! lr = 0.003
//! ```
//!
//! Relative `graph` and `data` paths are resolved against the directory
//! named by `CTINFER_DATA_DIR` when it is set.

use std::path::{Path, PathBuf};

use ctinfer_core::loss::{LossConfig, Variant, DEFAULT_TAU};
use ctinfer_core::model::{ModelConfig, OutputActivation};
use ctinfer_core::optim::DEFAULT_CLIP_NORM;

use crate::error::{Error, Result};

pub const DATA_DIR_ENV: &str = "CTINFER_DATA_DIR";

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub variant: Variant,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    /// Epochs without a validation improvement before stopping; 0 disables.
    pub patience: usize,
    pub d_word: usize,
    pub d_pos: usize,
    pub d_hidden: usize,
    pub output_activation: OutputActivation,
    pub energy_weight: f64,
    pub include_concept_ce: bool,
    pub tau: f64,
    pub clip_norm: f64,
    pub min_count: usize,
    pub folds: usize,
    pub deterministic: bool,
    pub graph: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            variant: Variant::CoCtiMtl,
            epochs: 100,
            batch_size: 32,
            lr: 1e-4,
            seed: 0,
            patience: 10,
            d_word: 100,
            d_pos: 20,
            d_hidden: 100,
            output_activation: OutputActivation::Softmax,
            energy_weight: 1.0,
            include_concept_ce: true,
            tau: DEFAULT_TAU,
            clip_norm: DEFAULT_CLIP_NORM,
            min_count: 1,
            folds: 5,
            deterministic: false,
            graph: None,
            data: None,
            out_dir: None,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

impl TrainConfig {
    /// Sets one key. Unknown keys are an error.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "variant" => self.variant = value.parse()?,
            "epochs" => self.epochs = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "patience" => self.patience = parse(key, value)?,
            "d_word" => self.d_word = parse(key, value)?,
            "d_pos" => self.d_pos = parse(key, value)?,
            "d_hidden" => self.d_hidden = parse(key, value)?,
            "output_activation" => self.output_activation = value.parse()?,
            "energy_weight" => self.energy_weight = parse(key, value)?,
            "include_concept_ce" => self.include_concept_ce = parse(key, value)?,
            "tau" => self.tau = parse(key, value)?,
            "clip_norm" => self.clip_norm = parse(key, value)?,
            "min_count" => self.min_count = parse(key, value)?,
            "folds" => self.folds = parse(key, value)?,
            "deterministic" => self.deterministic = parse(key, value)?,
            "graph" => self.graph = Some(value.into()),
            "data" => self.data = Some(value.into()),
            "out_dir" => self.out_dir = Some(value.into()),
            other => return Err(Error::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn merge_str(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: i + 1, message: format!("expected `key = value`, got `{line}`") })?;
            self.apply(k, v).map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
        }
        Ok(())
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.merge_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.epochs == 0 {
            return fail("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return fail("lr must be positive");
        }
        let positive = |v: f64| v > 0.0;
        if !positive(self.tau) || !positive(self.clip_norm) || !(positive(self.energy_weight) || self.energy_weight == 0.0) {
            return fail("tau and clip_norm must be positive, energy_weight non-negative");
        }
        if self.min_count == 0 {
            return fail("min_count must be at least 1");
        }
        if self.folds < 2 {
            return fail("folds must be at least 2");
        }
        Ok(())
    }

    pub fn loss_config(&self) -> LossConfig {
        LossConfig {
            variant: self.variant,
            energy_weight: self.energy_weight,
            include_concept_ce: self.include_concept_ce,
            tau: self.tau,
        }
    }

    pub fn model_config(&self, vocab_word: usize, vocab_pos: usize, m: usize, n: usize) -> ModelConfig {
        let mut c = ModelConfig::new(vocab_word, vocab_pos, m, n).with_dims(self.d_word, self.d_pos, self.d_hidden);
        c.output_activation = self.output_activation;
        c
    }
}

/// Resolves a relative path against `CTINFER_DATA_DIR` when set.
pub fn resolve_data_path(path: &Path) -> PathBuf {
    match std::env::var_os(DATA_DIR_ENV) {
        Some(dir) if path.is_relative() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}
