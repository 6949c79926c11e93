//! Labelled queries: raw records, vocabularies, index encoding, and splits.

mod synth;

pub use synth::{generate_synthetic, SynthConfig, SyntheticCorpus, Tallies};

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{ConceptGraph, Error, Result};

pub const UNKNOWN_TOKEN: &str = "<unk>";
pub const UNKNOWN_ID: usize = 0;

/// A tokenized, POS-tagged query with its annotated concepts and
/// transitions (as concept-name pairs).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawQuery {
    pub words: Vec<String>,
    pub pos: Vec<String>,
    pub concepts: Vec<String>,
    pub transitions: Vec<(String, String)>,
}

impl RawQuery {
    pub fn new(
        words: Vec<String>,
        pos: Vec<String>,
        concepts: Vec<String>,
        transitions: Vec<(String, String)>,
    ) -> Result<Self> {
        if words.is_empty() {
            return Err(Error::Record("query has no tokens".to_string()));
        }
        if words.len() != pos.len() {
            return Err(Error::Record(format!(
                "{} tokens but {} POS tags",
                words.len(),
                pos.len()
            )));
        }
        Ok(RawQuery { words, pos, concepts, transitions })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Splits on whitespace.
pub fn split_tokens(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}

/// Splits a `|`-separated concept field, dropping empty entries.
pub fn parse_concept_field(field: &str) -> Vec<String> {
    field
        .split('|')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

/// Expands a `|`-separated list of chains such as
/// `disease -> surgery -> recover | symptom -> medicine` into consecutive
/// pairs. Both `->` and `→` are accepted as arrows.
pub fn parse_transition_field(field: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for chain in field.split('|') {
        let chain = chain.trim();
        if chain.is_empty() {
            continue;
        }
        let nodes: Vec<&str> = chain
            .split("->")
            .flat_map(|part| part.split('→'))
            .map(str::trim)
            .collect();
        if nodes.len() < 2 || nodes.iter().any(|n| n.is_empty()) {
            return Err(Error::Record(format!("malformed transition chain `{chain}`")));
        }
        for w in nodes.windows(2) {
            pairs.push((w[0].to_string(), w[1].to_string()));
        }
    }
    Ok(pairs)
}

/// Writes pairs back as chains, merging a pair into the previous chain when
/// it starts where that chain ended.
pub fn format_transition_field(pairs: &[(String, String)]) -> String {
    let mut chains: Vec<Vec<&str>> = Vec::new();
    for (s, t) in pairs {
        match chains.last_mut() {
            Some(chain) if chain.last() == Some(&s.as_str()) => chain.push(t),
            _ => chains.push(vec![s, t]),
        }
    }
    chains
        .iter()
        .map(|c| c.join(" -> "))
        .collect::<Vec<_>>()
        .join(" | ")
}

/// Token-to-index maps for words and POS tags. Index 0 is the unknown
/// bucket in both.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    pos: Vec<String>,
    word_index: BTreeMap<String, usize>,
    pos_index: BTreeMap<String, usize>,
}

impl Vocabulary {
    /// Keeps tokens seen at least `min_count` times, ordered by descending
    /// frequency, then lexicographically.
    pub fn build(records: &[RawQuery], min_count: usize) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Data("cannot build a vocabulary from an empty corpus".to_string()));
        }
        if min_count == 0 {
            return Err(Error::Config("min_count must be at least 1".to_string()));
        }
        let words = ranked_tokens(records.iter().flat_map(|r| r.words.iter()), min_count);
        let pos = ranked_tokens(records.iter().flat_map(|r| r.pos.iter()), min_count);
        Ok(Vocabulary::from_lists(words, pos))
    }

    /// Rebuilds a vocabulary from token lists ordered by id, excluding the
    /// unknown token.
    pub fn from_lists(words: Vec<String>, pos: Vec<String>) -> Self {
        let with_unk = |list: Vec<String>| {
            let mut all = vec![UNKNOWN_TOKEN.to_string()];
            all.extend(list.into_iter().filter(|t| t != UNKNOWN_TOKEN));
            all
        };
        let words = with_unk(words);
        let pos = with_unk(pos);
        let index = |list: &[String]| list.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary { word_index: index(&words), pos_index: index(&pos), words, pos }
    }

    pub fn word_size(&self) -> usize {
        self.words.len()
    }

    pub fn pos_size(&self) -> usize {
        self.pos.len()
    }

    pub fn word_id(&self, token: &str) -> usize {
        self.word_index.get(token).copied().unwrap_or(UNKNOWN_ID)
    }

    pub fn pos_id(&self, tag: &str) -> usize {
        self.pos_index.get(tag).copied().unwrap_or(UNKNOWN_ID)
    }

    /// Words by id, starting with the unknown token.
    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn pos_tags(&self) -> &[String] {
        &self.pos
    }
}

fn ranked_tokens<'a>(tokens: impl Iterator<Item = &'a String>, min_count: usize) -> Vec<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for t in tokens {
        *counts.entry(t.as_str()).or_insert(0) += 1;
    }
    let mut kept: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|(t, c)| *c >= min_count && *t != UNKNOWN_TOKEN)
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    kept.into_iter().map(|(t, _)| t.to_string()).collect()
}

/// A query in index form with multi-hot concept and transition labels.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedQuery {
    pub word_ids: Vec<usize>,
    pub pos_ids: Vec<usize>,
    pub concept_labels: Vec<f64>,
    pub transition_labels: Vec<f64>,
}

impl EncodedQuery {
    pub fn len(&self) -> usize {
        self.word_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word_ids.is_empty()
    }

    pub fn concept_count(&self) -> usize {
        self.concept_labels.iter().filter(|v| **v > 0.5).count()
    }

    pub fn transition_count(&self) -> usize {
        self.transition_labels.iter().filter(|v| **v > 0.5).count()
    }
}

pub fn encode(record: &RawQuery, vocab: &Vocabulary, graph: &ConceptGraph) -> Result<EncodedQuery> {
    if record.words.len() != record.pos.len() || record.words.is_empty() {
        return Err(Error::Record(format!(
            "{} tokens but {} POS tags",
            record.words.len(),
            record.pos.len()
        )));
    }
    let resolve = |name: &str| {
        graph
            .concept_id_ignore_case(name)
            .ok_or_else(|| Error::Record(format!("concept `{name}` is not in the graph")))
    };
    let mut concept_labels = vec![0.0; graph.num_concepts()];
    for name in &record.concepts {
        concept_labels[resolve(name)?] = 1.0;
    }
    let mut transition_labels = vec![0.0; graph.num_transitions()];
    for (s, t) in &record.transitions {
        let id = graph.transition_id(resolve(s)?, resolve(t)?).ok_or_else(|| {
            Error::Record(format!("transition `{s} -> {t}` is not an edge of the graph"))
        })?;
        transition_labels[id] = 1.0;
    }
    Ok(EncodedQuery {
        word_ids: record.words.iter().map(|w| vocab.word_id(w)).collect(),
        pos_ids: record.pos.iter().map(|p| vocab.pos_id(p)).collect(),
        concept_labels,
        transition_labels,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit<T> {
    pub train: Vec<T>,
    pub validation: Vec<T>,
    pub test: Vec<T>,
    pub seed: u64,
}

/// Seeded permutation of `0..n`.
pub fn shuffled_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx
}

/// Sizes of a 70/10/20 split of `n` records.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let train = n * 7 / 10;
    let validation = n / 10;
    (train, validation, n - train - validation)
}

/// Shuffles with a seeded generator and partitions 70/10/20.
pub fn split_dataset<T: Clone>(records: &[T], seed: u64) -> Result<DatasetSplit<T>> {
    if records.len() < 10 {
        return Err(Error::Data(format!("need at least 10 records to split, got {}", records.len())));
    }
    let order = shuffled_indices(records.len(), seed);
    let (n_train, n_val, _) = split_sizes(records.len());
    let pick = |ids: &[usize]| ids.iter().map(|&i| records[i].clone()).collect();
    Ok(DatasetSplit {
        train: pick(&order[..n_train]),
        validation: pick(&order[n_train..n_train + n_val]),
        test: pick(&order[n_train + n_val..]),
        seed,
    })
}

/// Fold index of every record for `folds`-way cross-validation; fold sizes
/// differ by at most one.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::Config(format!("cross-validation needs at least 2 folds, got {folds}")));
    }
    if n < folds {
        return Err(Error::Data(format!("{n} records cannot fill {folds} folds")));
    }
    let mut out = vec![0; n];
    for (rank, i) in shuffled_indices(n, seed).into_iter().enumerate() {
        out[i] = rank % folds;
    }
    Ok(out)
}
