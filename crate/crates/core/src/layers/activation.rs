//! Hyperbolic tangent activation and the softmax output head.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Elementwise tanh.
pub fn tanh_forward(pre_activation: &Tensor) -> Tensor {
    pre_activation.map(f64::tanh)
}

/// Gradient through tanh given the forward *output* (`activated = tanh(u)`):
/// `out = delta * (1 - activated) * (1 + activated)`, i.e. delta * (1 - tanh^2 u).
pub fn tanh_backward(activated: &Tensor, delta: &Tensor) -> Result<Tensor> {
    if activated.shape() != delta.shape() {
        return Err(Error::Shape(format!(
            "tanh_backward operands differ: {:?} vs {:?}",
            activated.shape(),
            delta.shape()
        )));
    }
    let data = activated
        .data()
        .iter()
        .zip(delta.data())
        .map(|(&a, &d)| d * (1.0 - a) * (1.0 + a))
        .collect();
    Tensor::from_vec(activated.shape(), data)
}

/// Numerically stable softmax: `y_j = exp(z_j - max z) / sum_k exp(z_k - max z)`.
/// The max shift is identical to the unshifted definition in exact arithmetic
/// and makes overflow impossible.
pub fn softmax(logits: &Tensor) -> Tensor {
    let max = logits
        .data()
        .iter()
        .fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let exps: Vec<f64> = logits.data().iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Tensor::from_vec(logits.shape(), exps.iter().map(|&e| e / sum).collect())
        .expect("softmax preserves shape")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tanh_fixed_points() {
        let t = tanh_forward(&Tensor::from_vec(&[1], vec![0.0]).unwrap());
        assert_eq!(t.data(), &[0.0]);

        let t = tanh_forward(&Tensor::from_vec(&[1], vec![1.0]).unwrap());
        assert!((t.data()[0] - 0.7615941559557649).abs() < 1e-15);
    }

    #[test]
    fn tanh_is_odd() {
        for x in [0.25, 1.0, 2.5] {
            let pos = tanh_forward(&Tensor::from_vec(&[1], vec![x]).unwrap());
            let neg = tanh_forward(&Tensor::from_vec(&[1], vec![-x]).unwrap());
            assert_eq!(pos.data()[0], -neg.data()[0]);
        }
    }

    #[test]
    fn tanh_backward_at_origin_and_saturation() {
        let a = Tensor::from_vec(&[1], vec![0.0]).unwrap();
        let d = Tensor::from_vec(&[1], vec![1.0]).unwrap();
        assert_eq!(tanh_backward(&a, &d).unwrap().data(), &[1.0]);

        let a = Tensor::from_vec(&[1], vec![1.0]).unwrap();
        let d = Tensor::from_vec(&[1], vec![5.0]).unwrap();
        assert_eq!(tanh_backward(&a, &d).unwrap().data(), &[0.0]);
    }

    #[test]
    fn softmax_uniform_on_equal_logits() {
        let y = softmax(&Tensor::zeros(&[4]).unwrap());
        assert_eq!(y.data(), &[0.25, 0.25, 0.25, 0.25]);
    }

    #[test]
    fn softmax_shift_invariance_is_bit_exact() {
        let z = Tensor::from_vec(&[4], vec![0.3, -1.2, 2.0, 0.0]).unwrap();
        for c in [1.0, -3.5, 100.0] {
            let shifted = z.map(|v| v + c);
            assert_eq!(softmax(&z).data(), softmax(&shifted).data());
        }
    }

    #[test]
    fn softmax_analytic_log_logits() {
        let z = Tensor::from_vec(&[4], vec![1f64.ln(), 2f64.ln(), 3f64.ln(), 4f64.ln()]).unwrap();
        let y = softmax(&z);
        let expected = [0.1, 0.2, 0.3, 0.4];
        for (a, e) in y.data().iter().zip(expected) {
            assert!((a - e).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_outputs_form_a_distribution() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let z = Tensor::from_vec(&[4], (0..4).map(|_| rng.gen_range(-50.0..50.0)).collect()).unwrap();
            let y = softmax(&z);
            assert!(y.data().iter().all(|&v| v > 0.0));
            let sum: f64 = y.data().iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            // argmax is preserved
            let arg_z = z.data().iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0;
            let arg_y = y.data().iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0;
            assert_eq!(arg_z, arg_y);
        }
    }
}
