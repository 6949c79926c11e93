//! Tape-free forward pass over right-padded batches.
//!
//! Sequences are padded with id 0 up to a common length. A mask keeps the
//! hidden state frozen past each query's true length, drops padded
//! positions from the confidence normalisation, and takes `h_K` at the
//! true length.

use alloc::vec;
use alloc::vec::Vec;

use super::{GruSlots, Model, OutputActivation, Prediction};
use crate::autodiff::softmax_in_place;
use crate::corpus::EncodedQuery;
use crate::error::shape_err;
use crate::tensor::dot;
use crate::{math, Error, Result, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutput {
    pub predictions: Vec<Prediction>,
    /// `h_w_K` per query.
    pub final_word: Vec<Vec<f64>>,
    /// `h_p_K` per query.
    pub final_pos: Vec<Vec<f64>>,
}

struct PaddedChain {
    /// `[batch][position]` output vectors; zero at padded positions.
    outputs: Vec<Vec<Vec<f64>>>,
    last: Vec<Vec<f64>>,
}

fn affine(w: &Tensor, x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    for (r, o) in out.iter_mut().enumerate() {
        *o += dot(&w.data()[r * cols..(r + 1) * cols], x);
    }
}

impl Model {
    pub fn predict_batch(&self, queries: &[EncodedQuery]) -> Result<Vec<Prediction>> {
        let longest = queries.iter().map(EncodedQuery::len).max().unwrap_or(0);
        Ok(self.run_padded(queries, longest)?.predictions)
    }

    /// Evaluates `queries` padded to `pad_to` positions.
    pub fn run_padded(&self, queries: &[EncodedQuery], pad_to: usize) -> Result<BatchOutput> {
        for q in queries {
            self.check_query(q)?;
            if q.len() > pad_to {
                return Err(shape_err!("query of length {} exceeds padding {}", q.len(), pad_to));
            }
        }
        let lengths: Vec<usize> = queries.iter().map(EncodedQuery::len).collect();
        let p = &self.params;
        let s = &self.slots;
        let gather = |table: &Tensor, ids: &[usize]| -> Result<Vec<Vec<f64>>> {
            let (rows, cols) = table.dims2()?;
            (0..pad_to)
                .map(|k| {
                    let id = ids.get(k).copied().unwrap_or(0);
                    if id >= cols {
                        return Err(Error::OutOfRange { what: "embedding", index: id, len: cols });
                    }
                    Ok((0..rows).map(|r| table.get2(r, id)).collect())
                })
                .collect()
        };
        let words = queries
            .iter()
            .map(|q| gather(p.get(s.e_word), &q.word_ids))
            .collect::<Result<Vec<_>>>()?;
        let tags = queries
            .iter()
            .map(|q| gather(p.get(s.e_pos), &q.pos_ids))
            .collect::<Result<Vec<_>>>()?;

        let chain_w = self.chain_padded(&s.gru_word, &words, &lengths, pad_to);
        let chain_p = self.chain_padded(&s.gru_pos, &tags, &lengths, pad_to);

        let w_theta = p.get(s.w_theta).data();
        let b_theta = p.get(s.b_theta).data()[0];
        let mut predictions = Vec::with_capacity(queries.len());
        for (b, &len) in lengths.iter().enumerate() {
            let joint: Vec<Vec<f64>> = (0..pad_to)
                .map(|k| {
                    let mut o = chain_w.outputs[b][k].clone();
                    o.extend_from_slice(&chain_p.outputs[b][k]);
                    o
                })
                .collect();
            let raw: Vec<f64> = (0..pad_to)
                .map(|k| {
                    if k < len {
                        let v = dot(&joint[k], w_theta) + b_theta;
                        if v > 0.0 { v } else { 0.0 }
                    } else {
                        0.0
                    }
                })
                .collect();
            let total: f64 = raw[..len].iter().sum();
            let token_scores: Vec<f64> = if total > 0.0 {
                raw[..len].iter().map(|r| r / total).collect()
            } else {
                vec![1.0 / len as f64; len]
            };
            let mut pooled = vec![0.0; self.config.joint_output()];
            for (d, v) in pooled.iter_mut().enumerate() {
                *v = (0..len).map(|k| joint[k][d] * token_scores[k]).sum();
            }
            let mut concept_logits = p.get(s.b_ce).data().to_vec();
            let mut logits = vec![0.0; concept_logits.len()];
            affine(p.get(s.w_ce), &pooled, &mut logits);
            for (c, l) in concept_logits.iter_mut().zip(&logits) {
                *c += l;
            }
            let mut final_joint = chain_w.last[b].clone();
            final_joint.extend_from_slice(&chain_p.last[b]);
            let mut t_logits = vec![0.0; self.config.num_transitions];
            affine(p.get(s.w_te), &final_joint, &mut t_logits);
            let transition_probs = t_logits
                .iter()
                .zip(p.get(s.b_te).data())
                .map(|(l, b)| math::sigmoid(l + b))
                .collect();
            predictions.push(Prediction {
                concept_probs: concept_logits.iter().map(|l| math::sigmoid(*l)).collect(),
                transition_probs,
                token_scores,
            });
        }
        Ok(BatchOutput { predictions, final_word: chain_w.last, final_pos: chain_p.last })
    }

    fn chain_padded(&self, g: &GruSlots, inputs: &[Vec<Vec<f64>>], lengths: &[usize], pad_to: usize) -> PaddedChain {
        let p = &self.params;
        let d_h = self.config.d_hidden;
        let d_out = p.get(g.w_ho).shape()[0];
        let batch = inputs.len();
        let mut h = vec![vec![0.0; d_h]; batch];
        let mut outputs = vec![Vec::with_capacity(pad_to); batch];
        for k in 0..pad_to {
            for b in 0..batch {
                if k >= lengths[b] {
                    outputs[b].push(vec![0.0; d_out]);
                    continue;
                }
                let x = &inputs[b][k];
                let hp = &h[b];
                let gate = |wx: usize, wh: usize, bias: usize, hv: &[f64]| {
                    let mut pre = vec![0.0; d_h];
                    affine(p.get(wx), x, &mut pre);
                    let mut rec = vec![0.0; d_h];
                    affine(p.get(wh), hv, &mut rec);
                    pre.iter()
                        .zip(&rec)
                        .zip(p.get(bias).data())
                        .map(|((a, c), b)| a + c + b)
                        .collect::<Vec<f64>>()
                };
                let r: Vec<f64> = gate(g.w_xr, g.r_hr, g.b_r, hp).into_iter().map(math::sigmoid).collect();
                let z: Vec<f64> = gate(g.w_xz, g.r_hz, g.b_z, hp).into_iter().map(math::sigmoid).collect();
                let rh: Vec<f64> = r.iter().zip(hp).map(|(a, b)| a * b).collect();
                let cand: Vec<f64> = gate(g.w_xh, g.w_hh, g.b_h, &rh).into_iter().map(math::tanh).collect();
                let next: Vec<f64> = (0..d_h)
                    .map(|i| z[i] * hp[i] + (1.0 - z[i]) * cand[i])
                    .collect();
                let mut o = vec![0.0; d_out];
                affine(p.get(g.w_ho), &next, &mut o);
                if self.config.output_activation == OutputActivation::Softmax {
                    softmax_in_place(&mut o);
                }
                outputs[b].push(o);
                h[b] = next;
            }
        }
        PaddedChain { outputs, last: h }
    }
}
