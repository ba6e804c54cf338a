//! Inverted dropout: drop with probability `rate` during training, scale
//! survivors by 1/(1-rate) so the expected activation is unchanged; identity
//! at inference.

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Keep/drop decision per element plus the survivor scaling factor, reused by
/// the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask {
    keep: Vec<bool>,
    scale: f64,
}

impl DropoutMask {
    /// All-keep mask with unit scaling (inference, or rate 0).
    pub fn identity(len: usize) -> DropoutMask {
        DropoutMask {
            keep: vec![true; len],
            scale: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.keep.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keep.is_empty()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

/// Apply dropout. In training mode each element is independently zeroed with
/// probability `rate` and survivors are scaled by 1/(1-rate); in inference
/// mode (or at rate 0) the output is the input with an all-keep mask.
pub fn dropout_apply<R: Rng>(
    input: &Tensor,
    rate: f64,
    rng: &mut R,
    training: bool,
) -> Result<(Tensor, DropoutMask)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!(
            "dropout rate must be in [0, 1), got {rate}"
        )));
    }
    if !training || rate == 0.0 {
        return Ok((input.clone(), DropoutMask::identity(input.len())));
    }
    let scale = 1.0 / (1.0 - rate);
    let mut keep = Vec::with_capacity(input.len());
    let mut out = Vec::with_capacity(input.len());
    for &v in input.data() {
        let keep_this = rng.gen::<f64>() >= rate;
        keep.push(keep_this);
        out.push(if keep_this { v * scale } else { 0.0 });
    }
    Ok((
        Tensor::from_vec(input.shape(), out)?,
        DropoutMask { keep, scale },
    ))
}

/// Route gradients through the saved mask with the same survivor scaling.
pub fn dropout_backward(mask: &DropoutMask, grad_out: &Tensor) -> Result<Tensor> {
    if mask.keep.len() != grad_out.len() {
        return Err(Error::Shape(format!(
            "dropout mask covers {} elements, grad_out has {}",
            mask.keep.len(),
            grad_out.len()
        )));
    }
    let data = grad_out
        .data()
        .iter()
        .zip(&mask.keep)
        .map(|(&g, &k)| if k { g * mask.scale } else { 0.0 })
        .collect();
    Tensor::from_vec(grad_out.shape(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rate_zero_is_identity_in_both_modes() {
        let x = Tensor::from_vec(&[3], vec![1.0, -2.0, 3.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for training in [true, false] {
            let (out, mask) = dropout_apply(&x, 0.0, &mut rng, training).unwrap();
            assert_eq!(out.data(), x.data());
            assert_eq!(mask.scale(), 1.0);
        }
    }

    #[test]
    fn inference_mode_is_identity_at_any_rate() {
        let x = Tensor::from_vec(&[4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (out, _) = dropout_apply(&x, 0.7, &mut rng, false).unwrap();
        assert_eq!(out.data(), x.data());
    }

    #[test]
    fn invalid_rate_is_config_error() {
        let x = Tensor::zeros(&[1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(dropout_apply(&x, 1.0, &mut rng, true), Err(Error::Config(_))));
        assert!(matches!(dropout_apply(&x, -0.1, &mut rng, true), Err(Error::Config(_))));
    }

    #[test]
    fn inverted_scaling_preserves_the_mean() {
        // law-of-large-numbers check on a seeded stream
        let x = Tensor::new(&[100_000], 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let (out, _) = dropout_apply(&x, 0.1, &mut rng, true).unwrap();
        let mean = out.data().iter().sum::<f64>() / out.len() as f64;
        assert!((0.99..=1.01).contains(&mean), "mean {mean} outside [0.99, 1.01]");
    }

    #[test]
    fn backward_reuses_mask_and_scaling() {
        let x = Tensor::from_vec(&[6], vec![1.0; 6]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (out, mask) = dropout_apply(&x, 0.5, &mut rng, true).unwrap();
        let ones = Tensor::new(&[6], 1.0).unwrap();
        let grad = dropout_backward(&mask, &ones).unwrap();
        // gradient is exactly the scaling pattern the forward pass applied
        assert_eq!(grad.data(), out.data());
    }
}
