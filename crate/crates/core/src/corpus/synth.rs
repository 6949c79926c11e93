//! Synthetic labelled corpora in the record format.
//!
//! Each query samples a small active subgraph of the concept graph and is
//! rendered as a token sequence. Concepts are signalled by trigger words
//! from disjoint per-concept pools; transitions carry no dedicated words
//! and are recoverable only from which concepts appear and in what order
//! (source phrase, connector, target phrase).

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::RawQuery;
use crate::{ConceptGraph, Error, Result};

const CONCEPT_TAGS: &[(&str, f64)] = &[("n", 0.7), ("v", 0.2), ("a", 0.1)];
const CONNECTOR_TAGS: &[(&str, f64)] = &[("p", 0.5), ("v", 0.3), ("d", 0.2)];
const NOISE_TAGS: &[(&str, f64)] = &[("u", 0.3), ("y", 0.2), ("d", 0.2), ("a", 0.2), ("eng", 0.1)];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_queries: usize,
    pub vocab_size: usize,
    /// Connector templates available to each transition. A template fixes
    /// how many connector words sit between the two concept phrases; the
    /// words themselves are drawn per query from one pool shared by all
    /// transitions, so no word identifies a transition.
    pub templates_per_transition: usize,
    /// Probability of inserting a noise token at each gap (repeats, so the
    /// expected run length is `noise_rate / (1 - noise_rate)`).
    pub noise_rate: f64,
    pub seed: u64,
    /// Relative weights for 1, 2 and 3 transitions per query.
    pub transition_weights: [f64; 3],
    /// Probability that the next transition extends the chain from its
    /// current tail when such an edge exists.
    pub chain_bias: f64,
    /// Probability of mentioning one extra concept outside the sampled
    /// transitions. Ignored when `connected` is set.
    pub extra_concept_rate: f64,
    /// Only emit connected active graphs.
    pub connected: bool,
}

impl SynthConfig {
    /// Defaults: about 2.47 transitions and 3.47 concepts per query.
    pub fn new(n_queries: usize, vocab_size: usize, seed: u64) -> Self {
        SynthConfig {
            n_queries,
            vocab_size,
            templates_per_transition: 3,
            noise_rate: 0.3,
            seed,
            transition_weights: [0.10, 0.33, 0.57],
            chain_bias: 0.7,
            extra_concept_rate: 0.0,
            connected: true,
        }
    }

    fn validate(&self, graph: &ConceptGraph) -> Result<()> {
        let m = graph.num_concepts();
        if graph.num_transitions() == 0 {
            return Err(Error::Config("graph has no transitions to sample".to_string()));
        }
        if self.vocab_size < 10 * m {
            return Err(Error::Config(format!(
                "vocab_size {} is below 10 x {} concepts",
                self.vocab_size, m
            )));
        }
        if self.templates_per_transition == 0 {
            return Err(Error::Config("templates_per_transition must be positive".to_string()));
        }
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !(0.0..1.0).contains(&self.noise_rate) || !unit(self.chain_bias) || !unit(self.extra_concept_rate) {
            return Err(Error::Config("rates must lie in [0, 1) / [0, 1]".to_string()));
        }
        if self.transition_weights.iter().any(|w| *w < 0.0 || !w.is_finite())
            || self.transition_weights.iter().sum::<f64>() <= 0.0
        {
            return Err(Error::Config("transition_weights must be nonnegative with a positive sum".to_string()));
        }
        Ok(())
    }
}

/// Ground-truth label counts kept while generating.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Tallies {
    pub concept_counts: Vec<usize>,
    pub transition_counts: Vec<usize>,
    pub connected: usize,
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub queries: Vec<RawQuery>,
    pub tallies: Tallies,
}

struct Lexicon {
    concept_pools: Vec<Vec<String>>,
    connector_pool: Vec<String>,
    noise_pool: Vec<String>,
    /// `templates[t]` lists the connector lengths of transition `t`.
    templates: Vec<Vec<usize>>,
}

impl Lexicon {
    fn new(graph: &ConceptGraph, cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Self {
        let m = graph.num_concepts();
        let v = cfg.vocab_size;
        let mut words: Vec<String> = (0..v).map(|i| format!("w{i:04}")).collect();
        words.shuffle(rng);
        let per_concept = (v / 2) / m;
        let n_connectors = (v / 20).max(4);
        let mut rest = words.into_iter();
        let concept_pools: Vec<Vec<String>> = (0..m).map(|_| rest.by_ref().take(per_concept).collect()).collect();
        let connector_pool: Vec<String> = rest.by_ref().take(n_connectors).collect();
        let noise_pool: Vec<String> = rest.collect();
        let templates = (0..graph.num_transitions())
            .map(|_| (0..cfg.templates_per_transition).map(|_| rng.gen_range(0..=2)).collect())
            .collect();
        Lexicon { concept_pools, connector_pool, noise_pool, templates }
    }
}

struct Renderer<'a> {
    rng: &'a mut ChaCha8Rng,
    noise_rate: f64,
    words: Vec<String>,
    pos: Vec<String>,
}

impl Renderer<'_> {
    fn tag(&mut self, table: &[(&str, f64)]) -> String {
        let dist = WeightedIndex::new(table.iter().map(|t| t.1)).unwrap();
        table[dist.sample(self.rng)].0.to_string()
    }

    fn noise(&mut self, lex: &Lexicon) {
        while !lex.noise_pool.is_empty() && self.rng.gen_bool(self.noise_rate) {
            let w = lex.noise_pool.choose(self.rng).unwrap().clone();
            let t = self.tag(NOISE_TAGS);
            self.push(w, t);
        }
    }

    fn push(&mut self, word: String, tag: String) {
        self.words.push(word);
        self.pos.push(tag);
    }

    fn concept(&mut self, lex: &Lexicon, c: usize) {
        let len = self.rng.gen_range(1..=2);
        for _ in 0..len {
            let w = lex.concept_pools[c].choose(self.rng).unwrap().clone();
            let t = self.tag(CONCEPT_TAGS);
            self.push(w, t);
            self.noise(lex);
        }
    }

    fn connector(&mut self, lex: &Lexicon, len: usize) {
        for _ in 0..len {
            let w = lex.connector_pool.choose(self.rng).unwrap().clone();
            let t = self.tag(CONNECTOR_TAGS);
            self.push(w, t);
        }
    }
}

/// Samples up to `target` transitions forming a tree over concepts.
fn sample_active(graph: &ConceptGraph, cfg: &SynthConfig, target: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let edges = graph.transitions();
    let first = rng.gen_range(0..edges.len());
    let mut chosen = vec![first];
    let mut nodes = vec![edges[first].source, edges[first].target];
    let mut tail = edges[first].target;
    if edges[first].is_self_loop() {
        nodes.pop();
    }
    while chosen.len() < target {
        // edges that attach exactly one new concept keep the sample a tree
        let candidates: Vec<usize> = edges
            .iter()
            .filter(|e| !chosen.contains(&e.id) && !e.is_self_loop())
            .filter(|e| nodes.contains(&e.source) != nodes.contains(&e.target))
            .map(|e| e.id)
            .collect();
        if candidates.is_empty() {
            break;
        }
        let forward: Vec<usize> = candidates.iter().copied().filter(|&id| edges[id].source == tail).collect();
        let pick = if !forward.is_empty() && rng.gen_bool(cfg.chain_bias) {
            *forward.choose(rng).unwrap()
        } else {
            *candidates.choose(rng).unwrap()
        };
        let e = edges[pick];
        let new = if nodes.contains(&e.source) { e.target } else { e.source };
        nodes.push(new);
        if e.source == tail {
            tail = e.target;
        }
        chosen.push(pick);
    }
    chosen
}

pub fn generate_synthetic(graph: &ConceptGraph, cfg: &SynthConfig) -> Result<SyntheticCorpus> {
    cfg.validate(graph)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let lex = Lexicon::new(graph, cfg, &mut rng);
    let count_dist = WeightedIndex::new(cfg.transition_weights).map_err(|e| Error::Config(format!("{e}")))?;
    let m = graph.num_concepts();
    let mut tallies = Tallies {
        concept_counts: vec![0; m],
        transition_counts: vec![0; graph.num_transitions()],
        connected: 0,
    };
    let mut queries = Vec::with_capacity(cfg.n_queries);
    for _ in 0..cfg.n_queries {
        let target = count_dist.sample(&mut rng) + 1;
        let active = sample_active(graph, cfg, target, &mut rng);
        let mut concepts: Vec<usize> = Vec::new();
        let mut r = Renderer { rng: &mut rng, noise_rate: cfg.noise_rate, words: Vec::new(), pos: Vec::new() };
        r.noise(&lex);
        let mut last: Option<usize> = None;
        for &t in &active {
            let e = graph.transitions()[t];
            if last != Some(e.source) {
                r.concept(&lex, e.source);
            }
            let len = *lex.templates[t].choose(r.rng).unwrap();
            r.connector(&lex, len);
            r.noise(&lex);
            r.concept(&lex, e.target);
            last = Some(e.target);
            for c in [e.source, e.target] {
                if !concepts.contains(&c) {
                    concepts.push(c);
                }
            }
        }
        if !cfg.connected && r.rng.gen_bool(cfg.extra_concept_rate) {
            let outside: Vec<usize> = (0..m).filter(|c| !concepts.contains(c)).collect();
            if let Some(&c) = outside.choose(r.rng) {
                if r.rng.gen_bool(0.5) {
                    let c_words = r.words.len();
                    r.concept(&lex, c);
                    // move the extra mention to the front
                    let tail_w = r.words.split_off(c_words);
                    let tail_p = r.pos.split_off(c_words);
                    r.words.splice(0..0, tail_w);
                    r.pos.splice(0..0, tail_p);
                } else {
                    r.connector(&lex, 1);
                    r.concept(&lex, c);
                }
                concepts.push(c);
            }
        }
        let (words, pos) = (r.words, r.pos);

        for &c in &concepts {
            tallies.concept_counts[c] += 1;
        }
        for &t in &active {
            tallies.transition_counts[t] += 1;
        }
        if graph.is_connected(&graph.active_subgraph(&concepts, &active)?) {
            tallies.connected += 1;
        }
        let name = |c: usize| graph.concepts()[c].name.clone();
        let transitions = active
            .iter()
            .map(|&t| {
                let e = graph.transitions()[t];
                (name(e.source), name(e.target))
            })
            .collect();
        queries.push(RawQuery::new(words, pos, concepts.iter().map(|&c| name(c)).collect(), transitions)?);
    }
    Ok(SyntheticCorpus { queries, tallies })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph() -> ConceptGraph {
        ConceptGraph::from_named_edges(
            &["Symptom", "Disease", "Cause", "Medicine", "Treatment"],
            &[
                ("Symptom", "Disease"),
                ("Disease", "Symptom"),
                ("Disease", "Cause"),
                ("Symptom", "Medicine"),
                ("Medicine", "Treatment"),
                ("Cause", "Treatment"),
            ],
        )
        .unwrap()
    }

    #[test]
    fn single_transition_without_noise_mentions_both_endpoints() {
        let g = graph();
        let mut cfg = SynthConfig::new(200, 100, 4);
        cfg.noise_rate = 0.0;
        cfg.transition_weights = [1.0, 0.0, 0.0];
        let corpus = generate_synthetic(&g, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let lex = Lexicon::new(&g, &cfg, &mut rng);
        for q in &corpus.queries {
            assert_eq!(q.transitions.len(), 1);
            let (s, t) = &q.transitions[0];
            for name in [s, t] {
                let c = g.concept_id(name).unwrap();
                assert!(q.words.iter().any(|w| lex.concept_pools[c].contains(w)));
            }
        }
    }

    #[test]
    fn config_validation() {
        let g = graph();
        assert!(generate_synthetic(&g, &SynthConfig::new(10, 49, 0)).is_err());
        let mut cfg = SynthConfig::new(10, 50, 0);
        cfg.noise_rate = 1.0;
        assert!(generate_synthetic(&g, &cfg).is_err());
        let mut cfg = SynthConfig::new(10, 50, 0);
        cfg.transition_weights = [0.0; 3];
        assert!(generate_synthetic(&g, &cfg).is_err());
    }

    #[test]
    fn pools_are_disjoint() {
        let g = graph();
        let cfg = SynthConfig::new(1, 120, 1);
        let lex = Lexicon::new(&g, &cfg, &mut ChaCha8Rng::seed_from_u64(1));
        let mut all: Vec<&String> = lex.concept_pools.iter().flatten().collect();
        all.extend(&lex.connector_pool);
        all.extend(&lex.noise_pool);
        let n = all.len();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), n);
        assert_eq!(n, 120);
    }
}
