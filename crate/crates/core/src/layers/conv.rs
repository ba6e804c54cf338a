//! 2-D convolution with a fixed 9x9 kernel, stride 1 and zero padding of 4,
//! so output spatial dims always equal input dims (same padding).

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Kernel spatial size, both convolution layers.
pub const KERNEL_SIZE: usize = 9;
/// Zero padding on every side; (KERNEL_SIZE - 1) / 2 keeps spatial dims.
pub const PADDING: usize = 4;

/// Trainable parameters of one convolution layer.
///
/// `weights` has shape `[out_channels, in_channels, 9, 9]`, `bias` has shape
/// `[out_channels]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    pub weights: Tensor,
    pub bias: Tensor,
}

impl ConvParams {
    /// Zero-initialized parameters for `out_channels` filters over
    /// `in_channels` input channels.
    pub fn new(out_channels: usize, in_channels: usize) -> Result<ConvParams> {
        Ok(ConvParams {
            weights: Tensor::zeros(&[out_channels, in_channels, KERNEL_SIZE, KERNEL_SIZE])?,
            bias: Tensor::zeros(&[out_channels])?,
        })
    }

    pub fn out_channels(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weights.shape()[1]
    }

    fn validate(&self) -> Result<()> {
        let ws = self.weights.shape();
        if ws.len() != 4 || ws[2] != KERNEL_SIZE || ws[3] != KERNEL_SIZE {
            return Err(Error::Shape(format!(
                "conv weights must be [out, in, {KERNEL_SIZE}, {KERNEL_SIZE}], got {ws:?}"
            )));
        }
        if self.bias.shape() != [ws[0]] {
            return Err(Error::Shape(format!(
                "conv bias must be [{}], got {:?}",
                ws[0],
                self.bias.shape()
            )));
        }
        Ok(())
    }
}

fn check_input(input: &Tensor, params: &ConvParams) -> Result<(usize, usize, usize)> {
    params.validate()?;
    let shape = input.shape();
    if shape.len() != 3 {
        return Err(Error::Shape(format!(
            "conv input must be [channels, height, width], got {shape:?}"
        )));
    }
    let (c, h, w) = (shape[0], shape[1], shape[2]);
    if c != params.in_channels() {
        return Err(Error::Shape(format!(
            "conv input has {c} channels, params expect {}",
            params.in_channels()
        )));
    }
    Ok((c, h, w))
}

// Copy into a zero-padded buffer [c, h + 2*PADDING, w + 2*PADDING].
fn pad(input: &Tensor, c: usize, h: usize, w: usize) -> Vec<f64> {
    let (ph, pw) = (h + 2 * PADDING, w + 2 * PADDING);
    let mut out = vec![0.0; c * ph * pw];
    let src = input.data();
    for ch in 0..c {
        for y in 0..h {
            let dst_row = (ch * ph + y + PADDING) * pw + PADDING;
            let src_row = (ch * h + y) * w;
            out[dst_row..dst_row + w].copy_from_slice(&src[src_row..src_row + w]);
        }
    }
    out
}

/// Cross-channel convolution: for every output channel `o`,
/// `out[o,y,x] = bias[o] + sum over (c,dy,dx) of weights[o,c,dy,dx] *
/// padded_input[c, y+dy, x+dx]`.
///
/// Accumulation runs in ascending (c, dy, dx) order per output element, so
/// results are bit-identical to the plain nested-loop definition.
pub fn conv2d_forward(input: &Tensor, params: &ConvParams) -> Result<Tensor> {
    let (c, h, w) = check_input(input, params)?;
    let out_ch = params.out_channels();
    let (ph, pw) = (h + 2 * PADDING, w + 2 * PADDING);
    let padded = pad(input, c, h, w);

    let weights = params.weights.data();
    let bias = params.bias.data();
    let mut out = vec![0.0; out_ch * h * w];

    for o in 0..out_ch {
        let plane = &mut out[o * h * w..(o + 1) * h * w];
        plane.fill(bias[o]);
        for ch in 0..c {
            for dy in 0..KERNEL_SIZE {
                for dx in 0..KERNEL_SIZE {
                    let weight = weights[((o * c + ch) * KERNEL_SIZE + dy) * KERNEL_SIZE + dx];
                    for y in 0..h {
                        let src = (ch * ph + y + dy) * pw + dx;
                        let row = &padded[src..src + w];
                        let dst = &mut plane[y * w..(y + 1) * w];
                        for (d, &s) in dst.iter_mut().zip(row) {
                            *d += weight * s;
                        }
                    }
                }
            }
        }
    }

    Tensor::from_vec(&[out_ch, h, w], out)
}

/// Gradients of the convolution given `grad_out` (same shape as the forward
/// output): returns `(grad_input, grad_weights, grad_bias)`.
pub fn conv2d_backward(
    input: &Tensor,
    params: &ConvParams,
    grad_out: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    let (c, h, w) = check_input(input, params)?;
    let out_ch = params.out_channels();
    if grad_out.shape() != [out_ch, h, w] {
        return Err(Error::Shape(format!(
            "grad_out shape {:?} does not match conv output [{out_ch}, {h}, {w}]",
            grad_out.shape()
        )));
    }

    let (ph, pw) = (h + 2 * PADDING, w + 2 * PADDING);
    let padded = pad(input, c, h, w);
    let weights = params.weights.data();
    let go = grad_out.data();

    // grad_bias[o] = sum of grad_out over the o-th output plane
    let mut grad_bias = vec![0.0; out_ch];
    for o in 0..out_ch {
        let mut acc = 0.0;
        for &g in &go[o * h * w..(o + 1) * h * w] {
            acc += g;
        }
        grad_bias[o] = acc;
    }

    // grad_weights[o,c,dy,dx] = sum over (y,x) of grad_out[o,y,x] * padded[c,y+dy,x+dx]
    let mut grad_weights = vec![0.0; out_ch * c * KERNEL_SIZE * KERNEL_SIZE];
    for o in 0..out_ch {
        let go_plane = &go[o * h * w..(o + 1) * h * w];
        for ch in 0..c {
            for dy in 0..KERNEL_SIZE {
                for dx in 0..KERNEL_SIZE {
                    let mut acc = 0.0;
                    for y in 0..h {
                        let src = (ch * ph + y + dy) * pw + dx;
                        let row = &padded[src..src + w];
                        let grow = &go_plane[y * w..(y + 1) * w];
                        for (&g, &s) in grow.iter().zip(row) {
                            acc += g * s;
                        }
                    }
                    grad_weights[((o * c + ch) * KERNEL_SIZE + dy) * KERNEL_SIZE + dx] = acc;
                }
            }
        }
    }

    // grad_input: scatter grad_out through the kernel into a padded buffer,
    // then crop the padding (full correlation, transposed-conv semantics).
    let mut grad_padded = vec![0.0; c * ph * pw];
    for o in 0..out_ch {
        let go_plane = &go[o * h * w..(o + 1) * h * w];
        for ch in 0..c {
            for dy in 0..KERNEL_SIZE {
                for dx in 0..KERNEL_SIZE {
                    let weight = weights[((o * c + ch) * KERNEL_SIZE + dy) * KERNEL_SIZE + dx];
                    for y in 0..h {
                        let dst = (ch * ph + y + dy) * pw + dx;
                        let acc = &mut grad_padded[dst..dst + w];
                        let grow = &go_plane[y * w..(y + 1) * w];
                        for (a, &g) in acc.iter_mut().zip(grow) {
                            *a += weight * g;
                        }
                    }
                }
            }
        }
    }
    let mut grad_input = vec![0.0; c * h * w];
    for ch in 0..c {
        for y in 0..h {
            let src = (ch * ph + y + PADDING) * pw + PADDING;
            let dst = (ch * h + y) * w;
            grad_input[dst..dst + w].copy_from_slice(&grad_padded[src..src + w]);
        }
    }

    Ok((
        Tensor::from_vec(&[c, h, w], grad_input)?,
        Tensor::from_vec(&[out_ch, c, KERNEL_SIZE, KERNEL_SIZE], grad_weights)?,
        Tensor::from_vec(&[out_ch], grad_bias)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    // delta kernel: 1.0 at the center tap, zero elsewhere
    fn delta_params(out_ch: usize, in_ch: usize) -> ConvParams {
        let mut p = ConvParams::new(out_ch, in_ch).unwrap();
        for o in 0..out_ch {
            for c in 0..in_ch {
                p.weights.set(&[o, c, PADDING, PADDING], 1.0);
            }
        }
        p
    }

    #[test]
    fn delta_kernel_is_identity() {
        let input = Tensor::from_vec(&[1, 1, 1], vec![5.0]).unwrap();
        let out = conv2d_forward(&input, &delta_params(1, 1)).unwrap();
        assert_eq!(out.data(), &[5.0]);

        // and on a larger single-channel input
        let input = Tensor::from_vec(&[1, 3, 4], (0..12).map(|i| i as f64).collect()).unwrap();
        let out = conv2d_forward(&input, &delta_params(1, 1)).unwrap();
        assert_eq!(out.data(), input.data());
    }

    #[test]
    fn zero_weights_yield_bias_planes() {
        let input = Tensor::from_vec(&[2, 3, 3], (0..18).map(|i| i as f64).collect()).unwrap();
        let mut p = ConvParams::new(3, 2).unwrap();
        p.bias = Tensor::from_vec(&[3], vec![1.5, -2.0, 0.25]).unwrap();
        let out = conv2d_forward(&input, &p).unwrap();
        for o in 0..3 {
            for &v in &out.data()[o * 9..(o + 1) * 9] {
                assert_eq!(v, p.bias.data()[o]);
            }
        }
    }

    #[test]
    fn channel_mismatch_is_shape_error() {
        let input = Tensor::zeros(&[2, 3, 3]).unwrap();
        let p = ConvParams::new(1, 3).unwrap();
        assert!(matches!(
            conv2d_forward(&input, &p),
            Err(crate::error::Error::Shape(_))
        ));
    }

    #[test]
    fn backward_zero_grad_out_gives_zero_gradients() {
        let input = Tensor::from_vec(&[1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let p = delta_params(1, 1);
        let go = Tensor::zeros(&[1, 2, 2]).unwrap();
        let (gi, gw, gb) = conv2d_backward(&input, &p, &go).unwrap();
        assert!(gi.data().iter().all(|&v| v == 0.0));
        assert!(gw.data().iter().all(|&v| v == 0.0));
        assert!(gb.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_scalar_chain_rule() {
        // 1x1x1 input [3.0], delta-center kernel, grad_out [2.0]
        let input = Tensor::from_vec(&[1, 1, 1], vec![3.0]).unwrap();
        let p = delta_params(1, 1);
        let go = Tensor::from_vec(&[1, 1, 1], vec![2.0]).unwrap();
        let (gi, gw, gb) = conv2d_backward(&input, &p, &go).unwrap();
        assert_eq!(gb.data(), &[2.0]);
        assert_eq!(gw.get(&[0, 0, PADDING, PADDING]), 6.0);
        // every other weight tap saw only zero padding
        let center = gw.offset(&[0, 0, PADDING, PADDING]);
        for (i, &v) in gw.data().iter().enumerate() {
            if i != center {
                assert_eq!(v, 0.0);
            }
        }
        assert_eq!(gi.data(), &[2.0]);
    }
}
