//! Parameter initialisation.

use alloc::vec::Vec;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::shape_err;
use crate::{math, Result, Tensor};

/// Glorot-uniform initialisation for a `(fan_in, fan_out)` matrix; a
/// rank-1 shape is a bias and comes back as zeros.
///
/// Samples are drawn from `[-b, b]` with `b = sqrt(6 / (fan_in + fan_out))`
/// using a ChaCha8 stream seeded by `seed`, so identical seeds give
/// bit-identical tensors.
pub fn xavier_init(shape: &[usize], seed: u64) -> Result<Tensor> {
    if shape.is_empty() || shape.contains(&0) {
        return Err(shape_err!("cannot initialise shape {:?}", shape));
    }
    match *shape {
        [_] => Ok(Tensor::zeros(shape)),
        [rows, cols] => {
            let bound = xavier_bound(rows, cols);
            let dist = Uniform::new_inclusive(-bound, bound);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<f64> = (0..rows * cols).map(|_| dist.sample(&mut rng)).collect();
            Tensor::matrix(rows, cols, data)
        }
        _ => Err(shape_err!("xavier_init supports rank 1 or 2, got {:?}", shape)),
    }
}

pub fn xavier_bound(fan_in: usize, fan_out: usize) -> f64 {
    math::sqrt(6.0 / (fan_in + fan_out) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bias_is_zero() {
        let b = xavier_init(&[7], 3).unwrap();
        assert!(b.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn square_three_within_unit_bound() {
        assert_eq!(xavier_bound(3, 3), 1.0);
        let w = xavier_init(&[3, 3], 11).unwrap();
        assert!(w.data().iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn monte_carlo_mean_near_zero() {
        let w = xavier_init(&[100, 100], 5).unwrap();
        let bound = xavier_bound(100, 100);
        let mean = w.sum() / w.len() as f64;
        assert!(mean.abs() < 0.005, "mean {mean}");
        assert!(w.data().iter().all(|v| v.abs() <= bound));
        // a uniform law on [-b, b] has variance b^2 / 3
        let var = w.data().iter().map(|v| v * v).sum::<f64>() / w.len() as f64;
        assert!((var - bound * bound / 3.0).abs() < 0.02 * bound * bound);
    }

    #[test]
    fn seeded_and_rejects_zero_dims() {
        assert_eq!(xavier_init(&[4, 5], 9).unwrap(), xavier_init(&[4, 5], 9).unwrap());
        assert_ne!(xavier_init(&[4, 5], 9).unwrap(), xavier_init(&[4, 5], 10).unwrap());
        assert!(xavier_init(&[0, 5], 1).is_err());
        assert!(xavier_init(&[0], 1).is_err());
    }
}
