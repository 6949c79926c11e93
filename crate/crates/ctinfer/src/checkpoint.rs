//! Versioned JSON checkpoints.
//!
//! A checkpoint holds the model dimensions, the vocabulary, every parameter
//! tensor (name, shape, row-major values) and a manifest with SHA-256
//! digests of the vocabulary and the graph it was trained against.
//! Loading against a different vocabulary or graph is refused.

use std::path::Path;

use ctinfer_core::corpus::Vocabulary;
use ctinfer_core::model::{Model, ModelConfig, OutputActivation};
use ctinfer_core::params::ParamStore;
use ctinfer_core::{ConceptGraph, Tensor};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph_file::format_graph_file;

pub const FORMAT: &str = "ctinfer-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub d_word: usize,
    pub d_pos: usize,
    pub d_hidden: usize,
    pub d_out_word: usize,
    pub d_out_pos: usize,
    pub num_concepts: usize,
    pub num_transitions: usize,
    pub vocab_word: usize,
    pub vocab_pos: usize,
    pub output_activation: String,
}

impl From<&ModelConfig> for ModelDims {
    fn from(c: &ModelConfig) -> Self {
        ModelDims {
            d_word: c.d_word,
            d_pos: c.d_pos,
            d_hidden: c.d_hidden,
            d_out_word: c.d_out_word,
            d_out_pos: c.d_out_pos,
            num_concepts: c.num_concepts,
            num_transitions: c.num_transitions,
            vocab_word: c.vocab_word,
            vocab_pos: c.vocab_pos,
            output_activation: c.output_activation.as_str().to_string(),
        }
    }
}

impl ModelDims {
    pub fn to_config(&self) -> Result<ModelConfig> {
        let output_activation: OutputActivation = self.output_activation.parse()?;
        let c = ModelConfig {
            d_word: self.d_word,
            d_pos: self.d_pos,
            d_hidden: self.d_hidden,
            d_out_word: self.d_out_word,
            d_out_pos: self.d_out_pos,
            num_concepts: self.num_concepts,
            num_transitions: self.num_transitions,
            vocab_word: self.vocab_word,
            vocab_pos: self.vocab_pos,
            output_activation,
        };
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub model: ModelDims,
    pub vocab_hash: String,
    pub graph_hash: String,
    pub variant: String,
    pub seed: u64,
    pub epoch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedVocabulary {
    pub words: Vec<String>,
    pub pos: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub manifest: Manifest,
    pub vocabulary: SavedVocabulary,
    pub params: Vec<SavedTensor>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn vocab_hash(vocab: &Vocabulary) -> String {
    let mut text = vocab.words().join("\n");
    text.push('\0');
    text.push_str(&vocab.pos_tags().join("\n"));
    sha256_hex(text.as_bytes())
}

pub fn graph_hash(graph: &ConceptGraph) -> String {
    sha256_hex(format_graph_file(graph).as_bytes())
}

impl Checkpoint {
    pub fn new(model: &Model, vocab: &Vocabulary, graph: &ConceptGraph, variant: &str, seed: u64, epoch: usize) -> Self {
        Checkpoint {
            format: FORMAT.to_string(),
            version: VERSION,
            manifest: Manifest {
                model: ModelDims::from(model.config()),
                vocab_hash: vocab_hash(vocab),
                graph_hash: graph_hash(graph),
                variant: variant.to_string(),
                seed,
                epoch,
            },
            vocabulary: SavedVocabulary { words: vocab.words().to_vec(), pos: vocab.pos_tags().to_vec() },
            params: model
                .params()
                .iter()
                .map(|(name, t)| SavedTensor { name: name.to_string(), shape: t.shape().to_vec(), data: t.data().to_vec() })
                .collect(),
        }
    }

    pub fn vocabulary(&self) -> Vocabulary {
        Vocabulary::from_lists(self.vocabulary.words.clone(), self.vocabulary.pos.clone())
    }

    /// Refuses a checkpoint whose manifest does not match `vocab` and `graph`.
    pub fn verify(&self, vocab: &Vocabulary, graph: &ConceptGraph) -> Result<()> {
        if self.manifest.vocab_hash != vocab_hash(vocab) {
            return Err(Error::Manifest("vocabulary differs from the one the checkpoint was trained with".into()));
        }
        if self.manifest.graph_hash != graph_hash(graph) {
            return Err(Error::Manifest("concept graph differs from the one the checkpoint was trained with".into()));
        }
        Ok(())
    }

    pub fn to_model(&self) -> Result<Model> {
        if self.format != FORMAT || self.version != VERSION {
            return Err(Error::Manifest(format!("unsupported format {} v{}", self.format, self.version)));
        }
        let config = self.manifest.model.to_config()?;
        let fresh = Model::new(config.clone(), 0)?;
        let mut params = ParamStore::new();
        for (expected, saved) in fresh.params().names().iter().zip(&self.params) {
            if *expected != saved.name {
                return Err(Error::Manifest(format!("expected tensor `{expected}`, found `{}`", saved.name)));
            }
            params.push(&saved.name, Tensor::new(saved.shape.clone(), saved.data.clone())?);
        }
        if params.len() != fresh.params().len() {
            return Err(Error::Manifest(format!("{} tensors, expected {}", params.len(), fresh.params().len())));
        }
        Ok(Model::with_params(config, params)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serialization is infallible")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
