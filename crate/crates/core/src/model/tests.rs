use alloc::vec;
use alloc::vec::Vec;

use super::*;
use crate::autodiff::{max_relative_error, numeric_gradient};
use crate::loss::Variant;
use crate::ConceptGraph;

fn tiny_config() -> ModelConfig {
    ModelConfig::new(12, 5, 2, 1).with_dims(4, 3, 4)
}

fn query(words: &[usize], pos: &[usize], m: usize, n: usize) -> EncodedQuery {
    EncodedQuery {
        word_ids: words.to_vec(),
        pos_ids: pos.to_vec(),
        concept_labels: (0..m).map(|i| (i % 2) as f64).collect(),
        transition_labels: (0..n).map(|i| ((i + 1) % 2) as f64).collect(),
    }
}

// ---- straight-line oracle, written against tensor names only ----

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

fn mat(p: &ParamStore, name: &str) -> (usize, usize, Vec<f64>) {
    let t = p.by_name(name).unwrap();
    let (r, c) = if t.rank() == 2 { (t.shape()[0], t.shape()[1]) } else { (t.shape()[0], 1) };
    (r, c, t.data().to_vec())
}

fn mv(p: &ParamStore, name: &str, x: &[f64]) -> Vec<f64> {
    let (r, c, d) = mat(p, name);
    assert_eq!(c, x.len());
    let mut out = vec![0.0; r];
    for i in 0..r {
        for j in 0..c {
            out[i] += d[i * c + j] * x[j];
        }
    }
    out
}

fn oracle_chain(p: &ParamStore, pre: &str, xs: &[Vec<f64>], softmax: bool) -> (Vec<Vec<f64>>, Vec<f64>) {
    let d_h = p.by_name(&alloc::format!("{pre}.b_h")).unwrap().len();
    let v = |n: &str| p.by_name(&alloc::format!("{pre}.{n}")).unwrap().data().to_vec();
    let name = |n: &str| alloc::format!("{pre}.{n}");
    let mut h = vec![0.0; d_h];
    let mut outs = Vec::new();
    for x in xs {
        let (a, b, br) = (mv(p, &name("W_xr"), x), mv(p, &name("R_hr"), &h), v("b_r"));
        let r: Vec<f64> = (0..d_h).map(|i| sig(a[i] + b[i] + br[i])).collect();
        let (a, b, bz) = (mv(p, &name("W_xz"), x), mv(p, &name("R_hz"), &h), v("b_z"));
        let z: Vec<f64> = (0..d_h).map(|i| sig(a[i] + b[i] + bz[i])).collect();
        let rh: Vec<f64> = (0..d_h).map(|i| r[i] * h[i]).collect();
        let (a, b, bh) = (mv(p, &name("W_xh"), x), mv(p, &name("W_hh"), &rh), v("b_h"));
        let c: Vec<f64> = (0..d_h).map(|i| libm::tanh(a[i] + b[i] + bh[i])).collect();
        h = (0..d_h).map(|i| z[i] * h[i] + (1.0 - z[i]) * c[i]).collect();
        let mut o = mv(p, &name("W_ho"), &h);
        if softmax {
            let mx = o.iter().cloned().fold(f64::MIN, f64::max);
            let e: Vec<f64> = o.iter().map(|x| libm::exp(x - mx)).collect();
            let s: f64 = e.iter().sum();
            o = e.iter().map(|x| x / s).collect();
        }
        outs.push(o);
    }
    (outs, h)
}

fn oracle_forward(p: &ParamStore, q: &EncodedQuery, softmax: bool) -> Prediction {
    let col = |name: &str, id: usize| {
        let (r, c, d) = mat(p, name);
        (0..r).map(|i| d[i * c + id]).collect::<Vec<f64>>()
    };
    let xw: Vec<Vec<f64>> = q.word_ids.iter().map(|&i| col("E_word", i)).collect();
    let xp: Vec<Vec<f64>> = q.pos_ids.iter().map(|&i| col("E_pos", i)).collect();
    let (ow, hw) = oracle_chain(p, "rnn_w", &xw, softmax);
    let (op, hp) = oracle_chain(p, "rnn_p", &xp, softmax);
    let wt = p.by_name("W_theta").unwrap().data().to_vec();
    let bt = p.by_name("b_theta").unwrap().data()[0];
    let joint: Vec<Vec<f64>> = ow.iter().zip(&op).map(|(a, b)| [a.clone(), b.clone()].concat()).collect();
    let raw: Vec<f64> = joint
        .iter()
        .map(|o| {
            let v: f64 = o.iter().zip(&wt).map(|(a, b)| a * b).sum::<f64>() + bt;
            v.max(0.0)
        })
        .collect();
    let total: f64 = raw.iter().sum();
    let k = raw.len();
    let s: Vec<f64> = if total > 0.0 { raw.iter().map(|r| r / total).collect() } else { vec![1.0 / k as f64; k] };
    let d = joint[0].len();
    let pooled: Vec<f64> = (0..d).map(|j| (0..k).map(|i| s[i] * joint[i][j]).sum()).collect();
    let lc = mv(p, "W_CE", &pooled);
    let bce = p.by_name("b_CE").unwrap().data();
    let concept_probs = lc.iter().zip(bce).map(|(a, b)| sig(a + b)).collect();
    let lt = mv(p, "W_TE", &[hw, hp].concat());
    let bte = p.by_name("b_TE").unwrap().data();
    let transition_probs = lt.iter().zip(bte).map(|(a, b)| sig(a + b)).collect();
    Prediction { concept_probs, transition_probs, token_scores: s }
}

fn assert_close(a: &[f64], b: &[f64], tol: f64) {
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() <= tol, "{x} vs {y}");
    }
}

#[test]
fn forward_matches_straight_line_oracle() {
    for act in [OutputActivation::Softmax, OutputActivation::Identity] {
        let mut cfg = tiny_config();
        cfg.output_activation = act;
        let model = Model::new(cfg, 17).unwrap();
        // non-zero biases so every term is exercised
        let mut model = model;
        for (i, t) in model.params_mut().tensors_mut().iter_mut().enumerate() {
            if t.rank() == 1 {
                for (j, v) in t.data_mut().iter_mut().enumerate() {
                    *v = 0.1 * ((i + j) % 5) as f64 - 0.2;
                }
            }
        }
        let q = query(&[3, 11, 0], &[1, 4, 2], 2, 1);
        let got = model.forward(&q).unwrap();
        let want = oracle_forward(model.params(), &q, act == OutputActivation::Softmax);
        assert_close(&got.concept_probs, &want.concept_probs, 1e-12);
        assert_close(&got.transition_probs, &want.transition_probs, 1e-12);
        assert_close(&got.token_scores, &want.token_scores, 1e-12);
    }
}

#[test]
fn fresh_params_respect_output_contract() {
    let model = Model::new(ModelConfig::new(30, 6, 4, 5).with_dims(8, 4, 8), 3).unwrap();
    let q = query(&[1, 2, 3, 29], &[0, 5, 1, 1], 4, 5);
    let p = model.forward(&q).unwrap();
    assert!(p.concept_probs.iter().chain(&p.transition_probs).all(|x| *x > 0.0 && *x < 1.0));
    assert!((p.token_scores.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(p.token_scores.iter().all(|s| *s >= 0.0));
    assert_eq!(p, model.forward(&q).unwrap());
}

#[test]
fn embed_lookup_is_one_hot_product() {
    let mut tape = Tape::new();
    let e = tape.leaf(Tensor::identity(4)).unwrap();
    let p = tape.leaf(Tensor::identity(2)).unwrap();
    let (w, _) = embed_lookup(&mut tape, e, p, &[2], &[1]).unwrap();
    assert_eq!(tape.value(w[0]).data(), &[0.0, 0.0, 1.0, 0.0]);
    assert!(embed_lookup(&mut tape, e, p, &[4], &[0]).is_err());

    let table = crate::init::xavier_init(&[3, 6], 9).unwrap();
    let t = tape.leaf(table).unwrap();
    for id in 0..6 {
        let mut hot = vec![0.0; 6];
        hot[id] = 1.0;
        let oh = tape.leaf(Tensor::vector(hot)).unwrap();
        let by_matmul = tape.matmul(t, oh).unwrap();
        let by_lookup = tape.column(t, id).unwrap();
        assert_eq!(tape.value(by_matmul), tape.value(by_lookup));
    }
}

fn gru_vars(tape: &mut Tape, model: &Model) -> (Vec<Var>, GruVars) {
    let vars = model.params().load(tape).unwrap();
    let g = model.slots().gru_word.vars(&vars);
    (vars, g)
}

#[test]
fn gru_zero_weights_fixed_point() {
    let mut model = Model::new(tiny_config(), 1).unwrap();
    for t in model.params_mut().tensors_mut() {
        t.data_mut().fill(0.0);
    }
    let mut tape = Tape::new();
    let (_, g) = gru_vars(&mut tape, &model);
    let x = tape.leaf(Tensor::vector(vec![0.3, -1.0, 2.0, 0.5])).unwrap();
    let h0 = tape.leaf(Tensor::zeros(&[4])).unwrap();
    let (h, o) = gru_step(&mut tape, x, h0, &g, OutputActivation::Softmax).unwrap();
    assert_eq!(tape.value(h).data(), &[0.0; 4]);
    assert_eq!(tape.value(o).data(), &[0.25; 4]);
}

#[test]
fn gru_saturated_update_gate_keeps_state() {
    let mut model = Model::new(tiny_config(), 2).unwrap();
    let bz = model.slots().gru_word.b_z;
    model.params_mut().get_mut(bz).data_mut().fill(50.0);
    let mut tape = Tape::new();
    let (_, g) = gru_vars(&mut tape, &model);
    let x = tape.leaf(Tensor::vector(vec![0.3, -1.0, 0.2, 0.5])).unwrap();
    let h_prev = tape.leaf(Tensor::vector(vec![0.4, -0.6, 0.1, 0.9])).unwrap();
    let (h, _) = gru_step(&mut tape, x, h_prev, &g, OutputActivation::Softmax).unwrap();
    assert_close(tape.value(h).data(), tape.value(h_prev).data(), 1e-10);
}

#[test]
fn run_chain_single_step_and_prefix() {
    let model = Model::new(tiny_config(), 4).unwrap();
    let mut tape = Tape::new();
    let (_, g) = gru_vars(&mut tape, &model);
    let xs: Vec<Var> = (0..4)
        .map(|k| tape.leaf(Tensor::vector(vec![0.1 * k as f64, -0.3, 0.7, 0.2 * k as f64])).unwrap())
        .collect();
    let one = run_chain(&mut tape, &xs[..1], &g, OutputActivation::Softmax).unwrap();
    let h0 = tape.leaf(Tensor::zeros(&[4])).unwrap();
    let (h1, _) = gru_step(&mut tape, xs[0], h0, &g, OutputActivation::Softmax).unwrap();
    assert_eq!(tape.value(one.last), tape.value(h1));

    let full = run_chain(&mut tape, &xs, &g, OutputActivation::Softmax).unwrap();
    let prefix = run_chain(&mut tape, &xs[..3], &g, OutputActivation::Softmax).unwrap();
    for k in 0..3 {
        assert_eq!(tape.value(full.hidden[k]), tape.value(prefix.hidden[k]));
        assert_eq!(tape.value(full.outputs[k]), tape.value(prefix.outputs[k]));
    }
    assert!(run_chain(&mut tape, &[], &g, OutputActivation::Softmax).is_err());
}

#[test]
fn concept_encoder_normalisation() {
    let mut tape = Tape::new();
    let d = 4;
    let w = ConceptEncoderVars {
        w_theta: tape.leaf(Tensor::matrix(d, 1, vec![0.5, -0.2, 0.3, 0.1]).unwrap()).unwrap(),
        b_theta: tape.leaf(Tensor::scalar(-5.0)).unwrap(),
        w_ce: tape.leaf(Tensor::matrix(1, d, vec![1.0, 1.0, 1.0, 1.0]).unwrap()).unwrap(),
        b_ce: tape.leaf(Tensor::vector(vec![0.0])).unwrap(),
    };
    let a = tape.leaf(Tensor::vector(vec![0.2, 0.8])).unwrap();
    let b = tape.leaf(Tensor::vector(vec![0.6, 0.4])).unwrap();
    // single token: score 1 even though relu(raw) = 0
    let (s, _) = concept_encode(&mut tape, &[a], &[b], &w).unwrap();
    assert_eq!(tape.value(s).data(), &[1.0]);
    // identical tokens share the mass
    let (s, _) = concept_encode(&mut tape, &[a, a], &[b, b], &w).unwrap();
    assert_eq!(tape.value(s).data(), &[0.5, 0.5]);
    assert!(concept_encode(&mut tape, &[a, a], &[b], &w).is_err());
}

#[test]
fn transition_encoder_limits() {
    let mut tape = Tape::new();
    let hw = tape.leaf(Tensor::vector(vec![0.3, -0.4])).unwrap();
    let hp = tape.leaf(Tensor::vector(vec![0.9, 0.1])).unwrap();
    let w = TransitionEncoderVars {
        w_te: tape.leaf(Tensor::zeros(&[3, 4])).unwrap(),
        b_te: tape.leaf(Tensor::vector(vec![0.0, 50.0, 0.0])).unwrap(),
    };
    let t = transition_encode(&mut tape, hw, hp, &w).unwrap();
    let v = tape.value(t).data();
    assert_eq!((v[0], v[2]), (0.5, 0.5));
    assert!((v[1] - 1.0).abs() < 1e-10);
    let bad = TransitionEncoderVars { w_te: tape.leaf(Tensor::zeros(&[3, 5])).unwrap(), ..w };
    assert!(transition_encode(&mut tape, hw, hp, &bad).is_err());
}

#[test]
fn batch_path_matches_per_query_forward() {
    let model = Model::new(ModelConfig::new(20, 6, 3, 4).with_dims(5, 3, 6), 8).unwrap();
    let qs = vec![
        query(&[1, 2, 3], &[1, 2, 3], 3, 4),
        query(&[4], &[5], 3, 4),
        query(&[7, 19, 0, 2, 2, 11], &[0, 1, 2, 3, 4, 5], 3, 4),
    ];
    let batched = model.run_padded(&qs, 9).unwrap();
    for (i, q) in qs.iter().enumerate() {
        let single = model.forward(q).unwrap();
        let b = &batched.predictions[i];
        assert_close(&b.concept_probs, &single.concept_probs, 1e-12);
        assert_close(&b.transition_probs, &single.transition_probs, 1e-12);
        assert_close(&b.token_scores, &single.token_scores, 1e-12);
        let alone = model.run_padded(core::slice::from_ref(q), q.len()).unwrap();
        assert_close(&alone.final_word[0], &batched.final_word[i], 1e-12);
        assert_close(&alone.final_pos[0], &batched.final_pos[i], 1e-12);
    }
    assert!(model.run_padded(&qs, 2).is_err());
}

#[test]
fn query_validation() {
    let model = Model::new(tiny_config(), 0).unwrap();
    assert!(model.forward(&query(&[12], &[0], 2, 1)).is_err());
    assert!(model.forward(&query(&[1, 2], &[0], 2, 1)).is_err());
    assert!(model.forward(&query(&[], &[], 2, 1)).is_err());
    assert!(model.forward(&query(&[1], &[0], 3, 1)).is_err());
    assert!(Model::new(ModelConfig::new(0, 1, 1, 1), 0).is_err());
}

#[test]
fn full_gradient_matches_finite_differences() {
    let graph = ConceptGraph::new(&["a", "b"], &[(0, 1)]).unwrap();
    let model = Model::new(tiny_config(), 21).unwrap();
    let q = query(&[3, 7, 1], &[1, 2, 4], 2, 1);
    for variant in Variant::ALL {
        let cfg = LossConfig::new(variant);
        let (_, grads) = model.loss_and_gradient(&q, &cfg, graph.transfer()).unwrap();
        for slot in 0..model.params().len() {
            let numeric = numeric_gradient(model.params().get(slot), 1e-5, |t| {
                let mut m = model.clone();
                *m.params_mut().get_mut(slot) = t.clone();
                m.loss(&q, &cfg, graph.transfer())
            })
            .unwrap();
            let err = max_relative_error(grads.get(slot), &numeric);
            assert!(err < 1e-6, "{variant} {}: {err}", model.params().names()[slot]);
        }
    }
}
