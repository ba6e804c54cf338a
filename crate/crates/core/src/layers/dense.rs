//! Fully connected layer: `out = W * input + bias`.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Trainable parameters of one dense layer. `weights` has shape
/// `[out_features, in_features]`, `bias` has shape `[out_features]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    pub weights: Tensor,
    pub bias: Tensor,
}

impl DenseParams {
    pub fn new(out_features: usize, in_features: usize) -> Result<DenseParams> {
        Ok(DenseParams {
            weights: Tensor::zeros(&[out_features, in_features])?,
            bias: Tensor::zeros(&[out_features])?,
        })
    }

    pub fn out_features(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn in_features(&self) -> usize {
        self.weights.shape()[1]
    }
}

fn check_input(input: &Tensor, params: &DenseParams) -> Result<()> {
    if params.weights.rank() != 2 {
        return Err(Error::Shape(format!(
            "dense weights must be [out, in], got {:?}",
            params.weights.shape()
        )));
    }
    if params.bias.shape() != [params.out_features()] {
        return Err(Error::Shape(format!(
            "dense bias must be [{}], got {:?}",
            params.out_features(),
            params.bias.shape()
        )));
    }
    if input.rank() != 1 || input.len() != params.in_features() {
        return Err(Error::Shape(format!(
            "dense input must be [{}], got {:?}",
            params.in_features(),
            input.shape()
        )));
    }
    Ok(())
}

/// `out[j] = bias[j] + sum over k of weights[j,k] * input[k]`.
pub fn dense_forward(input: &Tensor, params: &DenseParams) -> Result<Tensor> {
    check_input(input, params)?;
    let (rows, cols) = (params.out_features(), params.in_features());
    let w = params.weights.data();
    let x = input.data();
    let mut out = Vec::with_capacity(rows);
    for j in 0..rows {
        let mut acc = params.bias.data()[j];
        let row = &w[j * cols..(j + 1) * cols];
        for (&wjk, &xk) in row.iter().zip(x) {
            acc += wjk * xk;
        }
        out.push(acc);
    }
    Tensor::from_vec(&[rows], out)
}

/// Gradients of the dense layer given the upstream `delta` (gradient w.r.t.
/// the pre-activation): returns `(grad_input, grad_weights, grad_bias)` with
/// `grad_bias = delta`, `grad_weights = outer(delta, input)` and
/// `grad_input = W^T * delta`.
pub fn dense_backward(
    input: &Tensor,
    params: &DenseParams,
    delta: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    check_input(input, params)?;
    let (rows, cols) = (params.out_features(), params.in_features());
    if delta.rank() != 1 || delta.len() != rows {
        return Err(Error::Shape(format!(
            "delta must be [{rows}], got {:?}",
            delta.shape()
        )));
    }
    let w = params.weights.data();
    let x = input.data();
    let d = delta.data();

    let mut grad_weights = vec![0.0; rows * cols];
    for j in 0..rows {
        let gw_row = &mut grad_weights[j * cols..(j + 1) * cols];
        for (g, &xk) in gw_row.iter_mut().zip(x) {
            *g = d[j] * xk;
        }
    }

    let mut grad_input = vec![0.0; cols];
    for j in 0..rows {
        let row = &w[j * cols..(j + 1) * cols];
        for (gi, &wjk) in grad_input.iter_mut().zip(row) {
            *gi += wjk * d[j];
        }
    }

    Ok((
        Tensor::from_vec(&[cols], grad_input)?,
        Tensor::from_vec(&[rows, cols], grad_weights)?,
        delta.clone(),
    ))
}
