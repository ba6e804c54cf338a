//! 2x2 max pooling with stride 2 and argmax gradient routing.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Pooling window edge; windows are 2x2 with stride 2.
const WINDOW: usize = 2;

/// Records, per output cell, the flat index into the input buffer of the
/// element that won the max; the backward pass routes gradients there.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolMask {
    input_shape: [usize; 3],
    indices: Vec<usize>,
}

impl PoolMask {
    pub fn input_shape(&self) -> [usize; 3] {
        self.input_shape
    }

    pub fn output_shape(&self) -> [usize; 3] {
        let [c, h, w] = self.input_shape;
        [c, h / WINDOW, w / WINDOW]
    }

    /// Flat input index of the selected maximum, one per output cell in
    /// row-major output order.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }
}

/// Downsample each channel by taking the max of every 2x2 window. Height and
/// width must be even. Ties go to the first element in row-major window scan
/// order, which keeps runs bit-reproducible.
pub fn maxpool_forward(input: &Tensor) -> Result<(Tensor, PoolMask)> {
    let shape = input.shape();
    if shape.len() != 3 {
        return Err(Error::Shape(format!(
            "pool input must be [channels, height, width], got {shape:?}"
        )));
    }
    let (c, h, w) = (shape[0], shape[1], shape[2]);
    if h % WINDOW != 0 || w % WINDOW != 0 {
        return Err(Error::Shape(format!(
            "pool input spatial dims must be even, got {h}x{w}"
        )));
    }
    let (oh, ow) = (h / WINDOW, w / WINDOW);
    let src = input.data();
    let mut out = vec![0.0; c * oh * ow];
    let mut indices = vec![0usize; c * oh * ow];

    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best_at = (ch * h + oy * WINDOW) * w + ox * WINDOW;
                let mut best = src[best_at];
                for dy in 0..WINDOW {
                    for dx in 0..WINDOW {
                        let at = (ch * h + oy * WINDOW + dy) * w + ox * WINDOW + dx;
                        // strict inequality keeps the first max on ties
                        if src[at] > best {
                            best = src[at];
                            best_at = at;
                        }
                    }
                }
                let o = (ch * oh + oy) * ow + ox;
                out[o] = best;
                indices[o] = best_at;
            }
        }
    }

    Ok((
        Tensor::from_vec(&[c, oh, ow], out)?,
        PoolMask {
            input_shape: [c, h, w],
            indices,
        },
    ))
}

/// Route `grad_out` back to the argmax positions recorded in `mask`; every
/// other input position receives zero.
pub fn maxpool_backward(mask: &PoolMask, grad_out: &Tensor) -> Result<Tensor> {
    let out_shape = mask.output_shape();
    if grad_out.shape() != out_shape {
        return Err(Error::Shape(format!(
            "grad_out shape {:?} does not match pool output {:?}",
            grad_out.shape(),
            out_shape
        )));
    }
    let [c, h, w] = mask.input_shape;
    let mut grad_input = vec![0.0; c * h * w];
    for (&at, &g) in mask.indices.iter().zip(grad_out.data()) {
        grad_input[at] += g;
    }
    Tensor::from_vec(&[c, h, w], grad_input)
}
