//! Independent finite-difference oracle for every analytic gradient in the
//! engine. Dropout is forced off and pooling ties are excluded: both are
//! non-differentiable and say nothing about gradient correctness.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::network::{backward, infer, Gradients, Model, PARAM_NAMES};
use crate::optim::cross_entropy;
use crate::tensor::Tensor;

/// Address of one scalar parameter: tensor position in the canonical order,
/// plus the flat element index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamCoord {
    pub tensor: usize,
    pub index: usize,
}

/// Worst-case comparison result for one parameter tensor.
#[derive(Debug, Clone)]
pub struct TensorCheck {
    pub name: &'static str,
    pub max_rel_err: f64,
    pub mean_rel_err: f64,
    pub worst_index: usize,
    pub checked: usize,
}

/// Comparison report over all trainable tensors.
#[derive(Debug, Clone)]
pub struct GradReport {
    pub tensors: Vec<TensorCheck>,
    pub tolerance: f64,
}

impl GradReport {
    pub fn pass(&self) -> bool {
        self.tensors.iter().all(|t| t.max_rel_err < self.tolerance)
    }

    /// Tensor with the largest relative error.
    pub fn worst(&self) -> &TensorCheck {
        self.tensors
            .iter()
            .max_by(|a, b| a.max_rel_err.partial_cmp(&b.max_rel_err).unwrap())
            .expect("report covers at least one tensor")
    }
}

impl fmt::Display for GradReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<16} {:>12} {:>12} {:>8} {:>8}",
            "tensor", "max rel err", "mean rel err", "worst", "checked"
        )?;
        for t in &self.tensors {
            writeln!(
                f,
                "{:<16} {:>12.3e} {:>12.3e} {:>8} {:>8}",
                t.name, t.max_rel_err, t.mean_rel_err, t.worst_index, t.checked
            )?;
        }
        writeln!(
            f,
            "tolerance {:.1e}: {}",
            self.tolerance,
            if self.pass() { "PASS" } else { "FAIL" }
        )
    }
}

/// Relative error metric, stable near zero gradients.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Inference-mode loss of the model on one labeled input.
pub fn loss_at(model: &Model, pixels: &Tensor, label: usize) -> Result<f64> {
    let trace = infer(model, pixels)?;
    Ok(cross_entropy(&trace.probs, label))
}

/// Central-difference estimate of d(loss)/d(parameter) at one coordinate:
/// `(J(p + eps) - J(p - eps)) / (2 eps)` via two forward passes. The model is
/// restored bit-exactly afterward.
pub fn numeric_grad(
    model: &mut Model,
    pixels: &Tensor,
    label: usize,
    coord: ParamCoord,
    eps: f64,
) -> Result<f64> {
    if coord.tensor >= PARAM_NAMES.len() {
        return Err(Error::Index(format!(
            "tensor index {} out of range",
            coord.tensor
        )));
    }
    {
        let tensor = &model.params()[coord.tensor];
        if coord.index >= tensor.len() {
            return Err(Error::Index(format!(
                "element {} out of range for {} ({} elements)",
                coord.index,
                PARAM_NAMES[coord.tensor],
                tensor.len()
            )));
        }
    }

    let original = model.params()[coord.tensor].data()[coord.index];

    model.params_mut()[coord.tensor].data_mut()[coord.index] = original + eps;
    let plus = loss_at(model, pixels, label)?;
    model.params_mut()[coord.tensor].data_mut()[coord.index] = original - eps;
    let minus = loss_at(model, pixels, label)?;
    model.params_mut()[coord.tensor].data_mut()[coord.index] = original;

    Ok((plus - minus) / (2.0 * eps))
}

/// Compare a set of analytic gradients against `numeric_grad` on a seeded
/// random subset of coordinates per tensor (`budget` bounds runtime).
pub fn compare(
    model: &mut Model,
    pixels: &Tensor,
    label: usize,
    analytic: &Gradients,
    tolerance: f64,
    budget: usize,
    seed: u64,
) -> Result<GradReport> {
    if tolerance <= 0.0 {
        return Err(Error::Config(format!(
            "tolerance must be > 0, got {tolerance}"
        )));
    }
    let eps = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::with_capacity(PARAM_NAMES.len());

    for tensor_index in 0..PARAM_NAMES.len() {
        let len = model.params()[tensor_index].len();
        let coords: Vec<usize> = if len <= budget {
            (0..len).collect()
        } else {
            (0..budget).map(|_| rng.gen_range(0..len)).collect()
        };

        let mut max_rel = 0.0;
        let mut sum_rel = 0.0;
        let mut worst = 0;
        for &index in &coords {
            let numeric = numeric_grad(
                model,
                pixels,
                label,
                ParamCoord {
                    tensor: tensor_index,
                    index,
                },
                eps,
            )?;
            let a = analytic.tensors()[tensor_index].data()[index];
            let e = rel_err(a, numeric);
            sum_rel += e;
            if e > max_rel {
                max_rel = e;
                worst = index;
            }
        }

        checks.push(TensorCheck {
            name: PARAM_NAMES[tensor_index],
            max_rel_err: max_rel,
            mean_rel_err: sum_rel / coords.len() as f64,
            worst_index: worst,
            checked: coords.len(),
        });
    }

    Ok(GradReport {
        tensors: checks,
        tolerance,
    })
}

/// Validate the analytic backward pass of `model` on one labeled input
/// against central finite differences.
pub fn check_model(
    model: &mut Model,
    pixels: &Tensor,
    label: usize,
    tolerance: f64,
    budget: usize,
    seed: u64,
) -> Result<GradReport> {
    let trace = infer(model, pixels)?;
    let analytic = backward(model, &trace, label)?;
    compare(model, pixels, label, &analytic, tolerance, budget, seed)
}

/// True if any 2x2 pooling window in either pooling stage contains a
/// duplicated maximum for this input.
pub fn has_pool_ties(model: &Model, pixels: &Tensor) -> Result<bool> {
    let trace = infer(model, pixels)?;
    for act in [&trace.conv1_act, &trace.conv2_act] {
        let shape = act.shape();
        let (c, h, w) = (shape[0], shape[1], shape[2]);
        let data = act.data();
        for ch in 0..c {
            for oy in 0..h / 2 {
                for ox in 0..w / 2 {
                    let mut window = [0.0f64; 4];
                    for dy in 0..2 {
                        for dx in 0..2 {
                            window[dy * 2 + dx] =
                                data[(ch * h + oy * 2 + dy) * w + ox * 2 + dx];
                        }
                    }
                    let max = window.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    if window.iter().filter(|&&v| v == max).count() > 1 {
                        return Ok(true);
                    }
                }
            }
        }
    }
    Ok(false)
}

/// Return an input whose pooling windows are tie-free, perturbing `pixels`
/// with tiny seeded noise if needed. Ties make max-pool non-differentiable
/// and would poison the finite-difference comparison.
pub fn ensure_tie_free(model: &Model, pixels: &Tensor, seed: u64) -> Result<Tensor> {
    if !has_pool_ties(model, pixels)? {
        return Ok(pixels.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut candidate = pixels.clone();
    for attempt in 0..16 {
        let magnitude = 1e-7 * 10f64.powi(attempt / 4);
        candidate = pixels.map(|v| v + rng.gen_range(-magnitude..=magnitude));
        if !has_pool_ties(model, &candidate)? {
            return Ok(candidate);
        }
    }
    Err(Error::State(
        "could not remove pooling ties from the input".into(),
    ))
}

/// Order-independent digest of every parameter bit pattern; used to verify
/// that probing restores the model exactly.
pub fn param_checksum(model: &Model) -> u64 {
    let mut acc = 0u64;
    for tensor in model.params() {
        for &v in tensor.data() {
            acc = acc.wrapping_mul(0x100000001b3).wrapping_add(v.to_bits());
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_model, NetworkSpec};

    #[test]
    fn rel_err_is_stable_near_zero() {
        assert_eq!(rel_err(0.0, 0.0), 0.0);
        assert!(rel_err(1e-12, 0.0) < 1e-3);
        assert!((rel_err(2.0, 1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn numeric_grad_restores_the_model_bit_exactly() {
        let mut model = build_model(&NetworkSpec::tiny(), 3).unwrap();
        let pixels = Tensor::new(&[1, 8, 8], 0.37).unwrap();
        let before = param_checksum(&model);
        for tensor in 0..PARAM_NAMES.len() {
            numeric_grad(&mut model, &pixels, 1, ParamCoord { tensor, index: 0 }, 1e-5).unwrap();
        }
        assert_eq!(param_checksum(&model), before);
    }

    #[test]
    fn numeric_grad_rejects_bad_coordinates() {
        let mut model = build_model(&NetworkSpec::tiny(), 3).unwrap();
        let pixels = Tensor::new(&[1, 8, 8], 0.37).unwrap();
        assert!(matches!(
            numeric_grad(&mut model, &pixels, 0, ParamCoord { tensor: 8, index: 0 }, 1e-5),
            Err(Error::Index(_))
        ));
        assert!(matches!(
            numeric_grad(&mut model, &pixels, 0, ParamCoord { tensor: 7, index: 99 }, 1e-5),
            Err(Error::Index(_))
        ));
    }

    #[test]
    fn one_parameter_net_matches_hand_derivation() {
        // J(w) = CE(softmax([w*x, 0, 0, 0]), label 0) with x = 1: at w = 0 the
        // distribution is uniform and dJ/dw = y_0 - 1 = -0.75.
        let x = 1.0;
        let eps = 1e-6;
        let loss = |w: f64| {
            let logits = Tensor::from_vec(&[4], vec![w * x, 0.0, 0.0, 0.0]).unwrap();
            cross_entropy(&crate::layers::softmax(&logits), 0)
        };
        let numeric = (loss(eps) - loss(-eps)) / (2.0 * eps);
        assert!(rel_err(numeric, -0.75) < 1e-8);
    }

    #[test]
    fn central_difference_converges_at_second_order() {
        // halving eps shrinks the error roughly 4x on a smooth 1-D loss
        let loss = |w: f64| {
            let logits = Tensor::from_vec(&[4], vec![w, 0.3, -0.2, 0.1]).unwrap();
            cross_entropy(&crate::layers::softmax(&logits), 2)
        };
        let at = 0.4;
        let exact = {
            // analytic: dJ/dw = y_0 for label 2
            crate::layers::softmax(&Tensor::from_vec(&[4], vec![at, 0.3, -0.2, 0.1]).unwrap())
                .data()[0]
        };
        let fd = |eps: f64| (loss(at + eps) - loss(at - eps)) / (2.0 * eps);
        let err_coarse = (fd(1e-3) - exact).abs();
        let err_fine = (fd(5e-4) - exact).abs();
        assert!(
            err_fine < err_coarse / 3.0,
            "expected ~4x shrink, got {err_coarse:.3e} -> {err_fine:.3e}"
        );
    }

    #[test]
    fn vacuous_tolerance_always_passes() {
        let mut model = build_model(&NetworkSpec::tiny(), 3).unwrap();
        let pixels = Tensor::new(&[1, 8, 8], 0.37).unwrap();
        let pixels = ensure_tie_free(&model, &pixels, 0).unwrap();
        let report = check_model(&mut model, &pixels, 2, f64::INFINITY, 4, 0).unwrap();
        assert!(report.pass());
    }

    #[test]
    fn constant_input_has_ties_and_gets_perturbed() {
        let model = build_model(&NetworkSpec::tiny(), 3).unwrap();
        // a constant input makes every conv output plane constant, so every
        // pooling window ties
        let pixels = Tensor::new(&[1, 8, 8], 0.5).unwrap();
        assert!(has_pool_ties(&model, &pixels).unwrap());
        let fixed = ensure_tie_free(&model, &pixels, 1).unwrap();
        assert!(!has_pool_ties(&model, &fixed).unwrap());
        // perturbation is tiny
        for (a, b) in pixels.data().iter().zip(fixed.data()) {
            assert!((a - b).abs() < 1e-3);
        }
    }
}
