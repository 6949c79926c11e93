//! Training objectives.
//!
//! * per-label binary cross entropy;
//! * a pairwise ranking loss that counts pairs ordered one way by an
//!   anchor score vector and the other way by a second vector, normalised
//!   by `card * (L - card)` for a ground-truth cardinality `card`;
//! * a softplus relaxation of that count for training, with the pair
//!   selection detached from the graph;
//! * an energy summing the relaxed loss in both directions through the
//!   transfer matrix: concepts against `T A^T`, transitions against `C A`;
//! * the mutual transfer loss, transition cross entropy plus weighted
//!   energy (plus concept cross entropy unless disabled).

use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::autodiff::{Tape, Var};
use crate::error::shape_err;
use crate::model::Prediction;
use crate::{Error, Result, Tensor, TransferMatrix};

pub const PROB_EPS: f64 = 1e-12;
pub const DEFAULT_TAU: f64 = 10.0;

/// Which terms a model is trained with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    /// Concept cross entropy only.
    Ci,
    /// Transition cross entropy only.
    Cti,
    /// Both cross entropies.
    CoCti,
    /// Mutual transfer loss.
    CoCtiMtl,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Ci, Variant::Cti, Variant::CoCti, Variant::CoCtiMtl];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Ci => "CI",
            Variant::Cti => "CTI",
            Variant::CoCti => "coCTI",
            Variant::CoCtiMtl => "coCTI-MTL",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "ci" => Ok(Variant::Ci),
            "cti" => Ok(Variant::Cti),
            "cocti" => Ok(Variant::CoCti),
            "cocti-mtl" | "mtl" => Ok(Variant::CoCtiMtl),
            _ => Err(Error::Config(format!("unknown variant `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub variant: Variant,
    pub energy_weight: f64,
    pub include_concept_ce: bool,
    pub tau: f64,
}

impl LossConfig {
    pub fn new(variant: Variant) -> Self {
        LossConfig { variant, energy_weight: 1.0, include_concept_ce: true, tau: DEFAULT_TAU }
    }
}

fn check_len(a: usize, b: usize, what: &str) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(shape_err!("{what}: lengths {a} and {b}"))
    }
}

/// `-sum_l [y_l ln p_l + (1 - y_l) ln(1 - p_l)]` with `p` clamped to
/// `[1e-12, 1 - 1e-12]`.
pub fn cross_entropy(truth: &[f64], probs: &[f64]) -> Result<f64> {
    check_len(truth.len(), probs.len(), "cross entropy")?;
    Ok(crate::autodiff::bce_value(probs, truth, PROB_EPS))
}

fn normalizer(cardinality: usize, len: usize) -> Option<f64> {
    if cardinality == 0 || cardinality >= len {
        None
    } else {
        Some((cardinality * (len - cardinality)) as f64)
    }
}

/// Number of ordered pairs `(p, q)` with `y[p] < y[q]` and
/// `x[p] >= x[q]`, divided by `card * (L - card)`. Zero when the
/// cardinality is 0 or `L`.
pub fn ranking_loss_count(x: &[f64], y: &[f64], cardinality: usize) -> Result<f64> {
    check_len(x.len(), y.len(), "ranking loss")?;
    let Some(norm) = normalizer(cardinality, x.len()) else {
        return Ok(0.0);
    };
    let mut count = 0usize;
    for p in 0..x.len() {
        for q in 0..x.len() {
            if y[p] < y[q] && x[p] >= x[q] {
                count += 1;
            }
        }
    }
    Ok(count as f64 / norm)
}

/// Pairs `(p, q)`, `p != q`, with `x[p] >= x[q]`.
fn anchor_pairs(x: &[f64]) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for p in 0..x.len() {
        for q in 0..x.len() {
            if p != q && x[p] >= x[q] {
                pairs.push((p, q));
            }
        }
    }
    pairs
}

/// Relaxed ranking loss on a tape. Gradient reaches `y` only; `x` is read
/// as plain values.
pub fn ranking_surrogate_on_tape(tape: &mut Tape, x: &[f64], y: Var, cardinality: usize, tau: f64) -> Result<Var> {
    check_len(x.len(), tape.value(y).len(), "ranking surrogate")?;
    match normalizer(cardinality, x.len()) {
        Some(norm) => tape.pair_softplus(y, anchor_pairs(x), tau, norm),
        None => tape.pair_softplus(y, Vec::new(), tau, 1.0),
    }
}

pub fn ranking_loss_surrogate(x: &[f64], y: &[f64], cardinality: usize, tau: f64) -> Result<f64> {
    let mut tape = Tape::new();
    let yv = tape.leaf(Tensor::vector(y.to_vec()))?;
    let out = ranking_surrogate_on_tape(&mut tape, x, yv, cardinality, tau)?;
    Ok(tape.value(out).data()[0])
}

/// Relaxed energy on a tape. `a` is the `M x N` transfer matrix.
pub fn energy_on_tape(
    tape: &mut Tape,
    concept_probs: Var,
    transition_probs: Var,
    a: Var,
    concept_cardinality: usize,
    transition_cardinality: usize,
    tau: f64,
) -> Result<Var> {
    let (m, n) = tape.value(a).dims2()?;
    check_len(tape.value(concept_probs).len(), m, "energy concepts")?;
    check_len(tape.value(transition_probs).len(), n, "energy transitions")?;
    // concept scores implied by transitions: T A^T, i.e. A T
    let from_transitions = tape.matmul(a, transition_probs)?;
    // transition scores implied by concepts: C A, i.e. A^T C
    let a_t = tape.transpose(a)?;
    let from_concepts = tape.matmul(a_t, concept_probs)?;
    let c_anchor = tape.value(concept_probs).data().to_vec();
    let t_anchor = tape.value(transition_probs).data().to_vec();
    let first = ranking_surrogate_on_tape(tape, &c_anchor, from_transitions, concept_cardinality, tau)?;
    let second = ranking_surrogate_on_tape(tape, &t_anchor, from_concepts, transition_cardinality, tau)?;
    tape.add(first, second)
}

pub fn energy(
    concept_probs: &[f64],
    transition_probs: &[f64],
    transfer: &TransferMatrix,
    concept_cardinality: usize,
    transition_cardinality: usize,
    tau: f64,
) -> Result<f64> {
    let mut tape = Tape::new();
    let c = tape.leaf(Tensor::vector(concept_probs.to_vec()))?;
    let t = tape.leaf(Tensor::vector(transition_probs.to_vec()))?;
    let a = tape.leaf(transfer.to_tensor())?;
    let e = energy_on_tape(&mut tape, c, t, a, concept_cardinality, transition_cardinality, tau)?;
    Ok(tape.value(e).data()[0])
}

/// Energy with the counting ranking loss in both directions.
pub fn energy_count(
    concept_probs: &[f64],
    transition_probs: &[f64],
    transfer: &TransferMatrix,
    concept_cardinality: usize,
    transition_cardinality: usize,
) -> Result<f64> {
    let (m, n) = (transfer.rows(), transfer.cols());
    check_len(concept_probs.len(), m, "energy concepts")?;
    check_len(transition_probs.len(), n, "energy transitions")?;
    let from_transitions: Vec<f64> = (0..m)
        .map(|i| (0..n).map(|j| f64::from(transfer.get(i, j)) * transition_probs[j]).sum())
        .collect();
    let from_concepts: Vec<f64> = (0..n)
        .map(|j| (0..m).map(|i| f64::from(transfer.get(i, j)) * concept_probs[i]).sum())
        .collect();
    Ok(ranking_loss_count(concept_probs, &from_transitions, concept_cardinality)?
        + ranking_loss_count(transition_probs, &from_concepts, transition_cardinality)?)
}

fn cardinality(labels: &[f64]) -> usize {
    labels.iter().filter(|v| **v > 0.5).count()
}

/// The training loss selected by `cfg.variant`, recorded on a tape.
pub fn variant_loss_on_tape(
    tape: &mut Tape,
    cfg: &LossConfig,
    concept_probs: Var,
    transition_probs: Var,
    truth_concepts: &[f64],
    truth_transitions: &[f64],
    a: Var,
) -> Result<Var> {
    let concept_ce = |tape: &mut Tape| tape.binary_cross_entropy(concept_probs, truth_concepts, PROB_EPS);
    let transition_ce = |tape: &mut Tape| tape.binary_cross_entropy(transition_probs, truth_transitions, PROB_EPS);
    match cfg.variant {
        Variant::Ci => concept_ce(tape),
        Variant::Cti => transition_ce(tape),
        Variant::CoCti => {
            let t = transition_ce(tape)?;
            let c = concept_ce(tape)?;
            tape.add(t, c)
        }
        Variant::CoCtiMtl => {
            let mut total = transition_ce(tape)?;
            if cfg.energy_weight != 0.0 {
                let e = energy_on_tape(
                    tape,
                    concept_probs,
                    transition_probs,
                    a,
                    cardinality(truth_concepts),
                    cardinality(truth_transitions),
                    cfg.tau,
                )?;
                let e = tape.scale(e, cfg.energy_weight)?;
                total = tape.add(total, e)?;
            }
            if cfg.include_concept_ce {
                let c = concept_ce(tape)?;
                total = tape.add(total, c)?;
            }
            Ok(total)
        }
    }
}

/// Transition cross entropy plus weighted energy, plus concept cross
/// entropy when `cfg.include_concept_ce` is set.
pub fn mutual_transfer_loss(
    cfg: &LossConfig,
    truth_concepts: &[f64],
    truth_transitions: &[f64],
    concept_probs: &[f64],
    transition_probs: &[f64],
    transfer: &TransferMatrix,
) -> Result<f64> {
    let cfg = LossConfig { variant: Variant::CoCtiMtl, ..*cfg };
    let p = Prediction {
        concept_probs: concept_probs.to_vec(),
        transition_probs: transition_probs.to_vec(),
        token_scores: Vec::new(),
    };
    loss_for_variant(&cfg, truth_concepts, truth_transitions, &p, transfer)
}

pub fn loss_for_variant(
    cfg: &LossConfig,
    truth_concepts: &[f64],
    truth_transitions: &[f64],
    prediction: &Prediction,
    transfer: &TransferMatrix,
) -> Result<f64> {
    check_len(truth_concepts.len(), prediction.concept_probs.len(), "concept labels")?;
    check_len(truth_transitions.len(), prediction.transition_probs.len(), "transition labels")?;
    let mut tape = Tape::new();
    let c = tape.leaf(Tensor::vector(prediction.concept_probs.clone()))?;
    let t = tape.leaf(Tensor::vector(prediction.transition_probs.clone()))?;
    let a = tape.leaf(transfer.to_tensor())?;
    let out = variant_loss_on_tape(&mut tape, cfg, c, t, truth_concepts, truth_transitions, a)?;
    Ok(tape.value(out).data()[0])
}

#[cfg(test)]
mod tests;
