use alloc::vec;
use alloc::vec::Vec;

use super::*;
use crate::autodiff::{max_relative_error, numeric_gradient};
use crate::ConceptGraph;

fn ln(x: f64) -> f64 {
    libm::log(x)
}

fn oracle_ce(y: &[f64], p: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..y.len() {
        let q = p[i].clamp(1e-12, 1.0 - 1e-12);
        s -= y[i] * ln(q) + (1.0 - y[i]) * ln(1.0 - q);
    }
    s
}

#[test]
fn cross_entropy_examples() {
    let v = cross_entropy(&[1.0, 0.0], &[0.5, 0.5]).unwrap();
    assert!((v - 2.0 * ln(2.0)).abs() < 1e-12);
    let v = cross_entropy(&[1.0], &[1.0]).unwrap();
    assert!((0.0..1e-11).contains(&v));
    let v = cross_entropy(&[1.0], &[0.0]).unwrap();
    assert!(v.is_finite() && (v - 12.0 * ln(10.0)).abs() < 1e-3);
    assert!(cross_entropy(&[1.0], &[0.5, 0.5]).is_err());
    let y = [1.0, 0.0, 1.0, 0.0, 0.0];
    let p = [0.9, 0.2, 0.35, 0.01, 0.77];
    assert!((cross_entropy(&y, &p).unwrap() - oracle_ce(&y, &p)).abs() < 1e-12);
}

fn brute_count(x: &[f64], y: &[f64], card: usize) -> f64 {
    let l = x.len();
    if card == 0 || card == l {
        return 0.0;
    }
    let mut c = 0.0;
    for (p, q) in (0..l).flat_map(|p| (0..l).map(move |q| (p, q))) {
        if y[p] < y[q] && x[p] >= x[q] {
            c += 1.0;
        }
    }
    c / (card * (l - card)) as f64
}

#[test]
fn counting_ranking_loss_examples() {
    assert_eq!(ranking_loss_count(&[0.9, 0.1], &[0.8, 0.2], 1).unwrap(), 0.0);
    assert_eq!(ranking_loss_count(&[0.9, 0.1], &[0.2, 0.8], 1).unwrap(), 1.0);
    assert_eq!(ranking_loss_count(&[0.9, 0.1, 0.5], &[0.2, 0.8, 0.1], 0).unwrap(), 0.0);
    assert_eq!(ranking_loss_count(&[0.9, 0.1, 0.5], &[0.2, 0.8, 0.1], 3).unwrap(), 0.0);
    assert!(ranking_loss_count(&[0.9], &[0.2, 0.8], 1).is_err());
    let x = [0.3, 0.3, 0.9, 0.1, 0.5, 0.5];
    let y = [0.2, 0.7, 0.1, 0.4, 0.4, 0.9];
    for card in 0..=6 {
        assert_eq!(ranking_loss_count(&x, &y, card).unwrap(), brute_count(&x, &y, card));
    }
}

#[test]
fn surrogate_bounds_and_gradient() {
    let x = [0.9, 0.2, 0.6, 0.4];
    let y = [0.1, 0.8, 0.5, 0.3];
    for card in 1..4 {
        let s = ranking_loss_surrogate(&x, &y, card, DEFAULT_TAU).unwrap();
        let c = ranking_loss_count(&x, &y, card).unwrap();
        assert!(s >= 0.0 && s.is_finite());
        // softplus(t)/tau >= ln 2/tau when t >= 0, so each violated pair costs at least that
        assert!(s + 1e-12 >= c * ln(2.0) / DEFAULT_TAU);
    }
    assert_eq!(ranking_loss_surrogate(&x, &y, 0, DEFAULT_TAU).unwrap(), 0.0);

    let mut tape = Tape::new();
    let yv = tape.leaf(Tensor::vector(y.to_vec())).unwrap();
    let out = ranking_surrogate_on_tape(&mut tape, &x, yv, 2, DEFAULT_TAU).unwrap();
    tape.backward(out).unwrap();
    let analytic = tape.grad_or_zeros(yv);
    let numeric = numeric_gradient(&Tensor::vector(y.to_vec()), 1e-6, |t| {
        ranking_loss_surrogate(&x, t.data(), 2, DEFAULT_TAU)
    })
    .unwrap();
    assert!(max_relative_error(&analytic, &numeric) < 1e-6);
}

#[test]
fn energy_examples() {
    let g = ConceptGraph::new(&["a", "b"], &[(0, 1)]).unwrap();
    let e = energy(&[0.9, 0.9], &[0.9], g.transfer(), 2, 1, DEFAULT_TAU).unwrap();
    assert!(e < 0.01);
    let consistent = energy_count(&[0.9, 0.95, 0.1], &[0.9, 0.1], chain().transfer(), 2, 1).unwrap();
    assert_eq!(consistent, 0.0);
    let inconsistent = energy_count(&[0.1, 0.9, 0.1], &[0.1, 0.9], chain().transfer(), 2, 1).unwrap();
    assert!(inconsistent > 0.0);
    assert!(energy(&[0.9], &[0.9], g.transfer(), 1, 1, DEFAULT_TAU).is_err());
}

fn chain() -> ConceptGraph {
    ConceptGraph::new(&["a", "b", "c"], &[(0, 1), (1, 2)]).unwrap()
}

#[test]
fn energy_matches_manual_recomputation() {
    let g = chain();
    let c = [0.7, 0.2, 0.6];
    let t = [0.3, 0.8];
    let a = g.transfer();
    let from_t: Vec<f64> = (0..3).map(|i| (0..2).map(|j| f64::from(a.get(i, j)) * t[j]).sum()).collect();
    let from_c: Vec<f64> = (0..2).map(|j| (0..3).map(|i| f64::from(a.get(i, j)) * c[i]).sum()).collect();
    let want = ranking_loss_surrogate(&c, &from_t, 2, 10.0).unwrap()
        + ranking_loss_surrogate(&t, &from_c, 1, 10.0).unwrap();
    assert!((energy(&c, &t, a, 2, 1, 10.0).unwrap() - want).abs() < 1e-12);
}

#[test]
fn variants_and_mtl_reductions() {
    let g = chain();
    let tc = [1.0, 1.0, 0.0];
    let tt = [1.0, 0.0];
    let c = [0.7, 0.4, 0.2];
    let t = [0.6, 0.3];
    let pred = Prediction { concept_probs: c.to_vec(), transition_probs: t.to_vec(), token_scores: vec![] };
    let hc = oracle_ce(&tc, &c);
    let ht = oracle_ce(&tt, &t);
    let e = energy(&c, &t, g.transfer(), 2, 1, DEFAULT_TAU).unwrap();
    let run = |cfg: LossConfig| loss_for_variant(&cfg, &tc, &tt, &pred, g.transfer()).unwrap();
    assert!((run(LossConfig::new(Variant::Ci)) - hc).abs() < 1e-12);
    assert!((run(LossConfig::new(Variant::Cti)) - ht).abs() < 1e-12);
    assert!((run(LossConfig::new(Variant::CoCti)) - (hc + ht)).abs() < 1e-12);
    assert!((run(LossConfig::new(Variant::CoCtiMtl)) - (ht + e + hc)).abs() < 1e-12);

    let mut cfg = LossConfig::new(Variant::CoCtiMtl);
    cfg.energy_weight = 0.0;
    cfg.include_concept_ce = false;
    assert!((mutual_transfer_loss(&cfg, &tc, &tt, &c, &t, g.transfer()).unwrap() - ht).abs() < 1e-12);
    cfg.energy_weight = 2.5;
    let v = mutual_transfer_loss(&cfg, &tc, &tt, &c, &t, g.transfer()).unwrap();
    assert!((v - (ht + 2.5 * e)).abs() < 1e-12);
}

#[test]
fn variant_names_round_trip() {
    for v in Variant::ALL {
        assert_eq!(v.as_str().parse::<Variant>().unwrap(), v);
    }
    assert_eq!("cocti_mtl".parse::<Variant>().unwrap(), Variant::CoCtiMtl);
    assert!("bogus".parse::<Variant>().is_err());
}
