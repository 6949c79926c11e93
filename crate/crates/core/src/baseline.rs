//! Per-transition logistic regression over bag-of-words and bag-of-POS
//! counts.

use alloc::vec;
use alloc::vec::Vec;

use crate::autodiff::Tape;
use crate::corpus::EncodedQuery;
use crate::init::xavier_init;
use crate::loss::PROB_EPS;
use crate::params::ParamStore;
use crate::tensor::dot;
use crate::{math, Error, Result, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticBaseline {
    vocab_word: usize,
    vocab_pos: usize,
    num_labels: usize,
    params: ParamStore,
}

const WEIGHTS: usize = 0;
const BIAS: usize = 1;

impl LogisticBaseline {
    pub fn new(vocab_word: usize, vocab_pos: usize, num_labels: usize, seed: u64) -> Result<Self> {
        let mut params = ParamStore::new();
        params.push("W", xavier_init(&[num_labels, vocab_word + vocab_pos], seed)?);
        params.push("b", Tensor::zeros(&[num_labels]));
        Ok(LogisticBaseline { vocab_word, vocab_pos, num_labels, params })
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn num_features(&self) -> usize {
        self.vocab_word + self.vocab_pos
    }

    /// Token counts: words first, then POS tags.
    pub fn features(&self, q: &EncodedQuery) -> Result<Vec<f64>> {
        let mut f = vec![0.0; self.num_features()];
        for &w in &q.word_ids {
            if w >= self.vocab_word {
                return Err(Error::OutOfRange { what: "word", index: w, len: self.vocab_word });
            }
            f[w] += 1.0;
        }
        for &p in &q.pos_ids {
            if p >= self.vocab_pos {
                return Err(Error::OutOfRange { what: "POS tag", index: p, len: self.vocab_pos });
            }
            f[self.vocab_word + p] += 1.0;
        }
        Ok(f)
    }

    pub fn predict(&self, q: &EncodedQuery) -> Result<Vec<f64>> {
        let x = self.features(q)?;
        let w = self.params.get(WEIGHTS);
        let cols = self.num_features();
        Ok(self
            .params
            .get(BIAS)
            .data()
            .iter()
            .enumerate()
            .map(|(l, b)| math::sigmoid(dot(&w.data()[l * cols..(l + 1) * cols], &x) + b))
            .collect())
    }

    /// Summed binary cross entropy over transitions and its gradient.
    pub fn loss_and_gradient(&self, q: &EncodedQuery) -> Result<(f64, ParamStore)> {
        if q.transition_labels.len() != self.num_labels {
            return Err(crate::error::shape_err!(
                "{} labels vs {} outputs",
                q.transition_labels.len(),
                self.num_labels
            ));
        }
        let mut tape = Tape::new();
        let vars = self.params.load(&mut tape)?;
        let x = tape.leaf(Tensor::vector(self.features(q)?))?;
        let logits = tape.matmul(vars[WEIGHTS], x)?;
        let logits = tape.add(logits, vars[BIAS])?;
        let probs = tape.sigmoid(logits)?;
        let loss = tape.binary_cross_entropy(probs, &q.transition_labels, PROB_EPS)?;
        tape.backward(loss)?;
        Ok((tape.value(loss).data()[0], self.params.gradients(&tape, &vars)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_features_gives_sigmoid_of_bias() {
        let mut m = LogisticBaseline::new(3, 2, 2, 0).unwrap();
        m.params_mut().get_mut(BIAS).data_mut().copy_from_slice(&[0.3, -1.2]);
        let q = EncodedQuery {
            word_ids: vec![],
            pos_ids: vec![],
            concept_labels: vec![],
            transition_labels: vec![1.0, 0.0],
        };
        let p = m.predict(&q).unwrap();
        assert_eq!(p, vec![math::sigmoid(0.3), math::sigmoid(-1.2)]);
    }

    #[test]
    fn feature_counts() {
        let m = LogisticBaseline::new(4, 2, 1, 0).unwrap();
        let q = EncodedQuery {
            word_ids: vec![1, 1, 3],
            pos_ids: vec![0, 1, 1],
            concept_labels: vec![],
            transition_labels: vec![0.0],
        };
        assert_eq!(m.features(&q).unwrap(), vec![0., 2., 0., 1., 1., 2.]);
        let bad = EncodedQuery { word_ids: vec![4], ..q };
        assert!(m.features(&bad).is_err());
    }
}
