//! The co-inference network.
//!
//! Words and POS tags are embedded by column lookup, read by two GRU
//! chains, and decoded by two heads:
//!
//! * the concept encoder scores each joint output `o_k = [o_w_k, o_p_k]`
//!   with `relu(o_k . w_theta + b_theta)`, normalises the scores to sum to
//!   one, pools `v = sum_k s_k o_k`, and emits `sigmoid(W_ce v + b_ce)`;
//! * the transition encoder emits `sigmoid(W_te [h_w_K; h_p_K] + b_te)`
//!   from the final hidden states.
//!
//! [`Model::forward`] records a differentiable tape per query;
//! [`Model::predict_batch`] is a tape-free padded evaluator for inference.

mod batch;

use alloc::format;
use alloc::vec::Vec;
use core::str::FromStr;

use crate::autodiff::{Tape, Var};
use crate::corpus::EncodedQuery;
use crate::error::shape_err;
use crate::init::xavier_init;
use crate::loss::{self, LossConfig};
use crate::params::ParamStore;
use crate::{Error, Result, Tensor, TransferMatrix};

/// Activation applied to `W_ho h_k` to produce a GRU output vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputActivation {
    #[default]
    Softmax,
    Identity,
}

impl FromStr for OutputActivation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "softmax" => Ok(OutputActivation::Softmax),
            "identity" => Ok(OutputActivation::Identity),
            other => Err(Error::Config(format!("unknown output activation `{other}`"))),
        }
    }
}

impl OutputActivation {
    pub fn as_str(self) -> &'static str {
        match self {
            OutputActivation::Softmax => "softmax",
            OutputActivation::Identity => "identity",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    pub d_word: usize,
    pub d_pos: usize,
    pub d_hidden: usize,
    pub d_out_word: usize,
    pub d_out_pos: usize,
    pub num_concepts: usize,
    pub num_transitions: usize,
    pub vocab_word: usize,
    pub vocab_pos: usize,
    pub output_activation: OutputActivation,
}

impl ModelConfig {
    /// 100-d word embeddings, 20-d POS embeddings, 100-d hidden and output
    /// states.
    pub fn new(vocab_word: usize, vocab_pos: usize, num_concepts: usize, num_transitions: usize) -> Self {
        ModelConfig {
            d_word: 100,
            d_pos: 20,
            d_hidden: 100,
            d_out_word: 100,
            d_out_pos: 100,
            num_concepts,
            num_transitions,
            vocab_word,
            vocab_pos,
            output_activation: OutputActivation::Softmax,
        }
    }

    /// Sets embedding and hidden sizes; output sizes follow the hidden size.
    pub fn with_dims(mut self, d_word: usize, d_pos: usize, d_hidden: usize) -> Self {
        self.d_word = d_word;
        self.d_pos = d_pos;
        self.d_hidden = d_hidden;
        self.d_out_word = d_hidden;
        self.d_out_pos = d_hidden;
        self
    }

    pub fn joint_output(&self) -> usize {
        self.d_out_word + self.d_out_pos
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.d_word,
            self.d_pos,
            self.d_hidden,
            self.d_out_word,
            self.d_out_pos,
            self.num_concepts,
            self.num_transitions,
            self.vocab_word,
            self.vocab_pos,
        ];
        if dims.contains(&0) {
            return Err(Error::Config(format!("all model dimensions must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// Slot indices of one GRU chain's tensors inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GruSlots {
    pub w_xr: usize,
    pub w_xz: usize,
    pub w_xh: usize,
    pub r_hr: usize,
    pub r_hz: usize,
    pub w_hh: usize,
    pub b_r: usize,
    pub b_z: usize,
    pub b_h: usize,
    pub w_ho: usize,
}

impl GruSlots {
    fn register(store: &mut ParamStore, prefix: &str, d_in: usize, d_h: usize, d_out: usize, seed: u64) -> Result<Self> {
        let mut add = |name: &str, shape: &[usize]| -> Result<usize> {
            let idx = store.len() as u64;
            let t = xavier_init(shape, seed_for(seed, idx))?;
            Ok(store.push(&format!("{prefix}.{name}"), t))
        };
        Ok(GruSlots {
            w_xr: add("W_xr", &[d_h, d_in])?,
            w_xz: add("W_xz", &[d_h, d_in])?,
            w_xh: add("W_xh", &[d_h, d_in])?,
            r_hr: add("R_hr", &[d_h, d_h])?,
            r_hz: add("R_hz", &[d_h, d_h])?,
            w_hh: add("W_hh", &[d_h, d_h])?,
            b_r: add("b_r", &[d_h])?,
            b_z: add("b_z", &[d_h])?,
            b_h: add("b_h", &[d_h])?,
            w_ho: add("W_ho", &[d_out, d_h])?,
        })
    }

    fn vars(&self, v: &[Var]) -> GruVars {
        GruVars {
            w_xr: v[self.w_xr],
            w_xz: v[self.w_xz],
            w_xh: v[self.w_xh],
            r_hr: v[self.r_hr],
            r_hz: v[self.r_hz],
            w_hh: v[self.w_hh],
            b_r: v[self.b_r],
            b_z: v[self.b_z],
            b_h: v[self.b_h],
            w_ho: v[self.w_ho],
        }
    }
}

fn seed_for(seed: u64, slot: u64) -> u64 {
    seed ^ slot.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Slot layout of every model tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slots {
    pub e_word: usize,
    pub e_pos: usize,
    pub gru_word: GruSlots,
    pub gru_pos: GruSlots,
    pub w_theta: usize,
    pub b_theta: usize,
    pub w_ce: usize,
    pub b_ce: usize,
    pub w_te: usize,
    pub b_te: usize,
}

/// GRU tensors recorded on a tape.
#[derive(Debug, Clone, Copy)]
pub struct GruVars {
    pub w_xr: Var,
    pub w_xz: Var,
    pub w_xh: Var,
    pub r_hr: Var,
    pub r_hz: Var,
    pub w_hh: Var,
    pub b_r: Var,
    pub b_z: Var,
    pub b_h: Var,
    pub w_ho: Var,
}

#[derive(Debug, Clone, Copy)]
pub struct ConceptEncoderVars {
    pub w_theta: Var,
    pub b_theta: Var,
    pub w_ce: Var,
    pub b_ce: Var,
}

#[derive(Debug, Clone, Copy)]
pub struct TransitionEncoderVars {
    pub w_te: Var,
    pub b_te: Var,
}

/// Model outputs for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub concept_probs: Vec<f64>,
    pub transition_probs: Vec<f64>,
    pub token_scores: Vec<f64>,
}

/// Tape handles of a forward pass.
#[derive(Debug, Clone, Copy)]
pub struct ForwardVars {
    pub concept_probs: Var,
    pub transition_probs: Var,
    pub token_scores: Var,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    config: ModelConfig,
    slots: Slots,
    params: ParamStore,
}

impl Model {
    /// Xavier-initialised weights and zero biases.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let c = &config;
        let mut store = ParamStore::new();
        let add = |store: &mut ParamStore, name: &str, shape: &[usize]| -> Result<usize> {
            let t = xavier_init(shape, seed_for(seed, store.len() as u64))?;
            Ok(store.push(name, t))
        };
        let e_word = add(&mut store, "E_word", &[c.d_word, c.vocab_word])?;
        let e_pos = add(&mut store, "E_pos", &[c.d_pos, c.vocab_pos])?;
        let gru_word = GruSlots::register(&mut store, "rnn_w", c.d_word, c.d_hidden, c.d_out_word, seed)?;
        let gru_pos = GruSlots::register(&mut store, "rnn_p", c.d_pos, c.d_hidden, c.d_out_pos, seed)?;
        let w_theta = add(&mut store, "W_theta", &[c.joint_output(), 1])?;
        let b_theta = add(&mut store, "b_theta", &[1])?;
        let w_ce = add(&mut store, "W_CE", &[c.num_concepts, c.joint_output()])?;
        let b_ce = add(&mut store, "b_CE", &[c.num_concepts])?;
        let w_te = add(&mut store, "W_TE", &[c.num_transitions, 2 * c.d_hidden])?;
        let b_te = add(&mut store, "b_TE", &[c.num_transitions])?;
        let slots = Slots { e_word, e_pos, gru_word, gru_pos, w_theta, b_theta, w_ce, b_ce, w_te, b_te };
        Ok(Model { config, slots, params: store })
    }

    /// Replaces the parameters, e.g. with tensors read from a checkpoint.
    pub fn with_params(config: ModelConfig, params: ParamStore) -> Result<Self> {
        let mut model = Model::new(config, 0)?;
        if !model.params.same_layout(&params) {
            return Err(shape_err!("parameter layout does not match the model configuration"));
        }
        model.params = params;
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn slots(&self) -> &Slots {
        &self.slots
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn check_query(&self, q: &EncodedQuery) -> Result<()> {
        if q.word_ids.is_empty() {
            return Err(Error::Data("query has no tokens".into()));
        }
        if q.word_ids.len() != q.pos_ids.len() {
            return Err(shape_err!("{} word ids vs {} POS ids", q.word_ids.len(), q.pos_ids.len()));
        }
        let c = &self.config;
        if q.concept_labels.len() != c.num_concepts || q.transition_labels.len() != c.num_transitions {
            return Err(shape_err!(
                "labels ({}, {}) vs model ({}, {})",
                q.concept_labels.len(),
                q.transition_labels.len(),
                c.num_concepts,
                c.num_transitions
            ));
        }
        Ok(())
    }

    /// Records the full forward pass for `query` on `tape`, reading
    /// parameters from `vars` (as returned by [`ParamStore::load`]).
    pub fn forward_on_tape(&self, tape: &mut Tape, vars: &[Var], query: &EncodedQuery) -> Result<ForwardVars> {
        self.check_query(query)?;
        let s = &self.slots;
        let (words, tags) = embed_lookup(tape, vars[s.e_word], vars[s.e_pos], &query.word_ids, &query.pos_ids)?;
        let act = self.config.output_activation;
        let chain_w = run_chain(tape, &words, &s.gru_word.vars(vars), act)?;
        let chain_p = run_chain(tape, &tags, &s.gru_pos.vars(vars), act)?;
        let ce = ConceptEncoderVars {
            w_theta: vars[s.w_theta],
            b_theta: vars[s.b_theta],
            w_ce: vars[s.w_ce],
            b_ce: vars[s.b_ce],
        };
        let (token_scores, concept_probs) = concept_encode(tape, &chain_w.outputs, &chain_p.outputs, &ce)?;
        let te = TransitionEncoderVars { w_te: vars[s.w_te], b_te: vars[s.b_te] };
        let transition_probs = transition_encode(tape, chain_w.last, chain_p.last, &te)?;
        Ok(ForwardVars { concept_probs, transition_probs, token_scores })
    }

    pub fn forward(&self, query: &EncodedQuery) -> Result<Prediction> {
        let mut tape = Tape::new();
        let vars = self.params.load(&mut tape)?;
        let out = self.forward_on_tape(&mut tape, &vars, query)?;
        Ok(Prediction {
            concept_probs: tape.value(out.concept_probs).data().to_vec(),
            transition_probs: tape.value(out.transition_probs).data().to_vec(),
            token_scores: tape.value(out.token_scores).data().to_vec(),
        })
    }

    /// Training loss of one query and its gradient for every parameter.
    pub fn loss_and_gradient(
        &self,
        query: &EncodedQuery,
        loss_cfg: &LossConfig,
        transfer: &TransferMatrix,
    ) -> Result<(f64, ParamStore)> {
        let mut tape = Tape::new();
        let vars = self.params.load(&mut tape)?;
        let out = self.forward_on_tape(&mut tape, &vars, query)?;
        let a = tape.leaf(transfer.to_tensor())?;
        let root = loss::variant_loss_on_tape(
            &mut tape,
            loss_cfg,
            out.concept_probs,
            out.transition_probs,
            &query.concept_labels,
            &query.transition_labels,
            a,
        )?;
        tape.backward(root)?;
        let value = tape.value(root).data()[0];
        Ok((value, self.params.gradients(&tape, &vars)))
    }

    /// Training loss of one query without gradients.
    pub fn loss(&self, query: &EncodedQuery, loss_cfg: &LossConfig, transfer: &TransferMatrix) -> Result<f64> {
        let p = self.forward(query)?;
        loss::loss_for_variant(loss_cfg, &query.concept_labels, &query.transition_labels, &p, transfer)
    }
}

/// Embedding columns for each word and POS id.
pub fn embed_lookup(
    tape: &mut Tape,
    e_word: Var,
    e_pos: Var,
    word_ids: &[usize],
    pos_ids: &[usize],
) -> Result<(Vec<Var>, Vec<Var>)> {
    if word_ids.len() != pos_ids.len() {
        return Err(shape_err!("{} word ids vs {} POS ids", word_ids.len(), pos_ids.len()));
    }
    let words = word_ids.iter().map(|&i| tape.column(e_word, i)).collect::<Result<Vec<_>>>()?;
    let tags = pos_ids.iter().map(|&i| tape.column(e_pos, i)).collect::<Result<Vec<_>>>()?;
    Ok((words, tags))
}

/// One GRU update; returns `(h_k, o_k)`.
pub fn gru_step(tape: &mut Tape, x: Var, h_prev: Var, w: &GruVars, act: OutputActivation) -> Result<(Var, Var)> {
    let affine = |tape: &mut Tape, wx: Var, wh: Var, h: Var, b: Var| -> Result<Var> {
        let a = tape.matmul(wx, x)?;
        let c = tape.matmul(wh, h)?;
        let s = tape.add(a, c)?;
        tape.add(s, b)
    };
    let r_pre = affine(tape, w.w_xr, w.r_hr, h_prev, w.b_r)?;
    let r = tape.sigmoid(r_pre)?;
    let z_pre = affine(tape, w.w_xz, w.r_hz, h_prev, w.b_z)?;
    let z = tape.sigmoid(z_pre)?;
    let rh = tape.mul(r, h_prev)?;
    let cand_pre = affine(tape, w.w_xh, w.w_hh, rh, w.b_h)?;
    let cand = tape.tanh(cand_pre)?;
    let keep = tape.mul(z, h_prev)?;
    let one_minus_z = tape.one_minus(z)?;
    let fresh = tape.mul(one_minus_z, cand)?;
    let h = tape.add(keep, fresh)?;
    let logits = tape.matmul(w.w_ho, h)?;
    let o = match act {
        OutputActivation::Softmax => tape.softmax(logits)?,
        OutputActivation::Identity => logits,
    };
    Ok((h, o))
}

#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub hidden: Vec<Var>,
    pub outputs: Vec<Var>,
    pub last: Var,
}

/// Runs a GRU chain left to right from `h_0 = 0`.
pub fn run_chain(tape: &mut Tape, inputs: &[Var], w: &GruVars, act: OutputActivation) -> Result<ChainOutput> {
    if inputs.is_empty() {
        return Err(Error::Data("cannot run a GRU over an empty sequence".into()));
    }
    let d_h = tape.value(w.b_h).len();
    let mut h = tape.leaf(Tensor::zeros(&[d_h]))?;
    let mut hidden = Vec::with_capacity(inputs.len());
    let mut outputs = Vec::with_capacity(inputs.len());
    for &x in inputs {
        let (h_next, o) = gru_step(tape, x, h, w, act)?;
        hidden.push(h_next);
        outputs.push(o);
        h = h_next;
    }
    Ok(ChainOutput { hidden, outputs, last: h })
}

/// Confidence scores over tokens and concept probabilities.
pub fn concept_encode(
    tape: &mut Tape,
    outputs_word: &[Var],
    outputs_pos: &[Var],
    w: &ConceptEncoderVars,
) -> Result<(Var, Var)> {
    if outputs_word.len() != outputs_pos.len() || outputs_word.is_empty() {
        return Err(shape_err!("{} word outputs vs {} POS outputs", outputs_word.len(), outputs_pos.len()));
    }
    let k = outputs_word.len();
    let joint = outputs_word
        .iter()
        .zip(outputs_pos)
        .map(|(a, b)| tape.concat(*a, *b))
        .collect::<Result<Vec<_>>>()?;
    let o = tape.stack(&joint)?;
    let raw = tape.matmul(o, w.w_theta)?;
    let raw = tape.reshape(raw, &[k])?;
    let bias = tape.broadcast(w.b_theta, k)?;
    let raw = tape.add(raw, bias)?;
    let raw = tape.relu(raw)?;
    let scores = tape.normalize(raw)?;
    let o_t = tape.transpose(o)?;
    let pooled = tape.matmul(o_t, scores)?;
    let logits = tape.matmul(w.w_ce, pooled)?;
    let logits = tape.add(logits, w.b_ce)?;
    let probs = tape.sigmoid(logits)?;
    Ok((scores, probs))
}

/// Transition probabilities from the two final hidden states.
pub fn transition_encode(tape: &mut Tape, h_word: Var, h_pos: Var, w: &TransitionEncoderVars) -> Result<Var> {
    let joint = tape.concat(h_word, h_pos)?;
    let logits = tape.matmul(w.w_te, joint)?;
    let logits = tape.add(logits, w.b_te)?;
    tape.sigmoid(logits)
}

#[cfg(test)]
mod tests;
