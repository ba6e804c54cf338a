//! The fixed seven-layer pipeline: two conv+tanh+maxpool stages, flatten,
//! then two dense layers with dropout on their inputs and a softmax head.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::layers::{
    conv2d_backward, conv2d_forward, dense_backward, dense_forward, dropout_apply,
    dropout_backward, maxpool_backward, maxpool_forward, softmax, tanh_backward, tanh_forward,
    ConvParams, DenseParams, DropoutMask, PoolMask, KERNEL_SIZE,
};
use crate::tensor::Tensor;

/// Architecture description. The layer order is fixed; only the input
/// geometry, filter counts, hidden width and class count vary.
///
/// Shape chain for the default: 3x80x100 -> 32x80x100 -> 32x40x50 ->
/// 64x40x50 -> 64x20x25 -> 32000 -> hidden -> 4.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetworkSpec {
    /// Input geometry as `[channels, height, width]`.
    pub input: [usize; 3],
    /// Feature maps of the first convolution.
    pub conv1_filters: usize,
    /// Feature maps of the second convolution.
    pub conv2_filters: usize,
    /// Width of the hidden fully connected layer.
    pub hidden: usize,
    /// Output classes.
    pub classes: usize,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        NetworkSpec {
            input: [3, 80, 100],
            conv1_filters: 32,
            conv2_filters: 64,
            hidden: 64,
            classes: 4,
        }
    }
}

impl NetworkSpec {
    /// Small configuration used by gradient checks and fast tests.
    pub fn tiny() -> Self {
        NetworkSpec {
            input: [1, 8, 8],
            conv1_filters: 2,
            conv2_filters: 2,
            hidden: 3,
            classes: 4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let [c, h, w] = self.input;
        if c == 0 || h == 0 || w == 0 {
            return Err(Error::Shape(format!("input extents must be >= 1, got {:?}", self.input)));
        }
        // two 2x2/2 pooling stages
        if h % 4 != 0 || w % 4 != 0 {
            return Err(Error::Shape(format!(
                "input spatial dims must be divisible by 4, got {h}x{w}"
            )));
        }
        if self.conv1_filters == 0 || self.conv2_filters == 0 || self.hidden == 0 {
            return Err(Error::Shape("filter counts and hidden width must be >= 1".into()));
        }
        if self.classes < 2 {
            return Err(Error::Shape(format!("need at least 2 classes, got {}", self.classes)));
        }
        Ok(())
    }

    /// Flattened feature length after the second pooling stage.
    pub fn flattened_len(&self) -> usize {
        let [_, h, w] = self.input;
        self.conv2_filters * (h / 4) * (w / 4)
    }

    /// Total trainable parameter count.
    pub fn param_count(&self) -> usize {
        let k2 = KERNEL_SIZE * KERNEL_SIZE;
        let conv1 = self.conv1_filters * (self.input[0] * k2 + 1);
        let conv2 = self.conv2_filters * (self.conv1_filters * k2 + 1);
        let dense1 = (self.flattened_len() + 1) * self.hidden;
        let dense2 = (self.hidden + 1) * self.classes;
        conv1 + conv2 + dense1 + dense2
    }
}

/// Whether a forward pass applies dropout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    Train { dropout_rate: f64 },
    Infer,
}

/// All trainable parameters plus the spec they were built for.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub spec: NetworkSpec,
    pub conv1: ConvParams,
    pub conv2: ConvParams,
    pub dense1: DenseParams,
    pub dense2: DenseParams,
}

/// Canonical order of the trainable tensors; serialization, gradients and
/// reports all follow it.
pub const PARAM_NAMES: [&str; 8] = [
    "conv1.weights",
    "conv1.bias",
    "conv2.weights",
    "conv2.bias",
    "dense1.weights",
    "dense1.bias",
    "dense2.weights",
    "dense2.bias",
];

impl Model {
    /// Trainable tensors in canonical order.
    pub fn params(&self) -> [&Tensor; 8] {
        [
            &self.conv1.weights,
            &self.conv1.bias,
            &self.conv2.weights,
            &self.conv2.bias,
            &self.dense1.weights,
            &self.dense1.bias,
            &self.dense2.weights,
            &self.dense2.bias,
        ]
    }

    pub fn params_mut(&mut self) -> [&mut Tensor; 8] {
        [
            &mut self.conv1.weights,
            &mut self.conv1.bias,
            &mut self.conv2.weights,
            &mut self.conv2.bias,
            &mut self.dense1.weights,
            &mut self.dense1.bias,
            &mut self.dense2.weights,
            &mut self.dense2.bias,
        ]
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }
}

/// Build a model with uniform fan-based weight init: each weight tensor is
/// drawn from U(-r, r) with `r = sqrt(6 / (fan_in + fan_out))`, biases zero.
/// Deterministic given the seed.
pub fn build_model(spec: &NetworkSpec, seed: u64) -> Result<Model> {
    spec.validate()?;
    let [in_ch, _, _] = spec.input;
    let k2 = KERNEL_SIZE * KERNEL_SIZE;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut conv1 = ConvParams::new(spec.conv1_filters, in_ch)?;
    init_uniform(&mut conv1.weights, in_ch * k2, spec.conv1_filters * k2, &mut rng);

    let mut conv2 = ConvParams::new(spec.conv2_filters, spec.conv1_filters)?;
    init_uniform(
        &mut conv2.weights,
        spec.conv1_filters * k2,
        spec.conv2_filters * k2,
        &mut rng,
    );

    let flat = spec.flattened_len();
    let mut dense1 = DenseParams::new(spec.hidden, flat)?;
    init_uniform(&mut dense1.weights, flat, spec.hidden, &mut rng);

    let mut dense2 = DenseParams::new(spec.classes, spec.hidden)?;
    init_uniform(&mut dense2.weights, spec.hidden, spec.classes, &mut rng);

    Ok(Model {
        spec: *spec,
        conv1,
        conv2,
        dense1,
        dense2,
    })
}

fn init_uniform(weights: &mut Tensor, fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) {
    let r = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for w in weights.data_mut() {
        *w = rng.gen_range(-r..=r);
    }
}

/// Every intermediate of one forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub input: Tensor,
    pub conv1_pre: Tensor,
    pub conv1_act: Tensor,
    pub pool1_out: Tensor,
    pub pool1_mask: PoolMask,
    pub conv2_pre: Tensor,
    pub conv2_act: Tensor,
    pub pool2_out: Tensor,
    pub pool2_mask: PoolMask,
    pub drop1_out: Tensor,
    pub drop1_mask: DropoutMask,
    pub dense1_pre: Tensor,
    pub dense1_act: Tensor,
    pub drop2_out: Tensor,
    pub drop2_mask: DropoutMask,
    pub logits: Tensor,
    /// Softmax output, the class probability vector.
    pub probs: Tensor,
}

/// Run the full pipeline on one sample. Training mode applies dropout to the
/// flattened features and to the hidden activation, drawing from `rng`;
/// inference mode is dropout-free and ignores `rng`.
pub fn forward<R: Rng>(
    model: &Model,
    input: &Tensor,
    mode: Mode,
    rng: &mut R,
) -> Result<ForwardTrace> {
    let [c, h, w] = model.spec.input;
    if input.shape() != [c, h, w] {
        return Err(Error::Shape(format!(
            "input shape {:?} does not match network input [{c}, {h}, {w}]",
            input.shape()
        )));
    }
    let (training, rate) = match mode {
        Mode::Train { dropout_rate } => (true, dropout_rate),
        Mode::Infer => (false, 0.0),
    };

    let conv1_pre = conv2d_forward(input, &model.conv1)?;
    let conv1_act = tanh_forward(&conv1_pre);
    let (pool1_out, pool1_mask) = maxpool_forward(&conv1_act)?;

    let conv2_pre = conv2d_forward(&pool1_out, &model.conv2)?;
    let conv2_act = tanh_forward(&conv2_pre);
    let (pool2_out, pool2_mask) = maxpool_forward(&conv2_act)?;

    let flat = pool2_out.clone().into_shape(&[model.spec.flattened_len()])?;
    let (drop1_out, drop1_mask) = dropout_apply(&flat, rate, rng, training)?;

    let dense1_pre = dense_forward(&drop1_out, &model.dense1)?;
    let dense1_act = tanh_forward(&dense1_pre);
    let (drop2_out, drop2_mask) = dropout_apply(&dense1_act, rate, rng, training)?;

    let logits = dense_forward(&drop2_out, &model.dense2)?;
    let probs = softmax(&logits);

    Ok(ForwardTrace {
        input: input.clone(),
        conv1_pre,
        conv1_act,
        pool1_out,
        pool1_mask,
        conv2_pre,
        conv2_act,
        pool2_out,
        pool2_mask,
        drop1_out,
        drop1_mask,
        dense1_pre,
        dense1_act,
        drop2_out,
        drop2_mask,
        logits,
        probs,
    })
}

/// Inference-mode forward pass (no dropout, no randomness).
pub fn infer(model: &Model, input: &Tensor) -> Result<ForwardTrace> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    forward(model, input, Mode::Infer, &mut rng)
}

/// One gradient tensor per trainable tensor, in the canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub conv1_weights: Tensor,
    pub conv1_bias: Tensor,
    pub conv2_weights: Tensor,
    pub conv2_bias: Tensor,
    pub dense1_weights: Tensor,
    pub dense1_bias: Tensor,
    pub dense2_weights: Tensor,
    pub dense2_bias: Tensor,
}

impl Gradients {
    pub fn zeros(spec: &NetworkSpec) -> Result<Gradients> {
        let model_shape = build_shapes(spec);
        Ok(Gradients {
            conv1_weights: Tensor::zeros(&model_shape[0])?,
            conv1_bias: Tensor::zeros(&model_shape[1])?,
            conv2_weights: Tensor::zeros(&model_shape[2])?,
            conv2_bias: Tensor::zeros(&model_shape[3])?,
            dense1_weights: Tensor::zeros(&model_shape[4])?,
            dense1_bias: Tensor::zeros(&model_shape[5])?,
            dense2_weights: Tensor::zeros(&model_shape[6])?,
            dense2_bias: Tensor::zeros(&model_shape[7])?,
        })
    }

    /// Gradient tensors in the same order as `Model::params`.
    pub fn tensors(&self) -> [&Tensor; 8] {
        [
            &self.conv1_weights,
            &self.conv1_bias,
            &self.conv2_weights,
            &self.conv2_bias,
            &self.dense1_weights,
            &self.dense1_bias,
            &self.dense2_weights,
            &self.dense2_bias,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 8] {
        [
            &mut self.conv1_weights,
            &mut self.conv1_bias,
            &mut self.conv2_weights,
            &mut self.conv2_bias,
            &mut self.dense1_weights,
            &mut self.dense1_bias,
            &mut self.dense2_weights,
            &mut self.dense2_bias,
        ]
    }

    /// In-place `self += other`, elementwise across all tensors.
    pub fn accumulate(&mut self, other: &Gradients) -> Result<()> {
        for (mine, theirs) in self.tensors_mut().into_iter().zip(other.tensors()) {
            mine.add_scaled(theirs, 1.0)?;
        }
        Ok(())
    }

    /// In-place multiply every gradient by `factor`.
    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.scale(factor);
        }
    }
}

fn build_shapes(spec: &NetworkSpec) -> [Vec<usize>; 8] {
    let k = KERNEL_SIZE;
    [
        vec![spec.conv1_filters, spec.input[0], k, k],
        vec![spec.conv1_filters],
        vec![spec.conv2_filters, spec.conv1_filters, k, k],
        vec![spec.conv2_filters],
        vec![spec.hidden, spec.flattened_len()],
        vec![spec.hidden],
        vec![spec.classes, spec.hidden],
        vec![spec.classes],
    ]
}

/// Backward pass over a trace produced by `forward` on this model.
///
/// The output delta is `probs - onehot(label)` -- the softmax and
/// cross-entropy gradients combined -- and is propagated through dense,
/// dropout, tanh, pooling and convolution layers in reverse order.
pub fn backward(model: &Model, trace: &ForwardTrace, label: usize) -> Result<Gradients> {
    if label >= model.spec.classes {
        return Err(Error::Index(format!(
            "label {label} out of range for {} classes",
            model.spec.classes
        )));
    }
    if trace.input.shape() != model.spec.input
        || trace.probs.len() != model.spec.classes
        || trace.drop1_out.len() != model.spec.flattened_len()
        || trace.dense1_act.len() != model.spec.hidden
    {
        return Err(Error::State(
            "trace does not match this model's architecture".into(),
        ));
    }

    // combined softmax + cross-entropy gradient at the output
    let mut delta_logits = trace.probs.clone();
    delta_logits.data_mut()[label] -= 1.0;

    let (grad_drop2, dense2_w, dense2_b) =
        dense_backward(&trace.drop2_out, &model.dense2, &delta_logits)?;
    let grad_dense1_act = dropout_backward(&trace.drop2_mask, &grad_drop2)?;
    let delta_dense1 = tanh_backward(&trace.dense1_act, &grad_dense1_act)?;

    let (grad_drop1, dense1_w, dense1_b) =
        dense_backward(&trace.drop1_out, &model.dense1, &delta_dense1)?;
    let grad_flat = dropout_backward(&trace.drop1_mask, &grad_drop1)?;

    let grad_pool2 = grad_flat.into_shape(&trace.pool2_out.shape().to_vec())?;
    let grad_conv2_act = maxpool_backward(&trace.pool2_mask, &grad_pool2)?;
    let delta_conv2 = tanh_backward(&trace.conv2_act, &grad_conv2_act)?;
    let (grad_pool1, conv2_w, conv2_b) =
        conv2d_backward(&trace.pool1_out, &model.conv2, &delta_conv2)?;

    let grad_conv1_act = maxpool_backward(&trace.pool1_mask, &grad_pool1)?;
    let delta_conv1 = tanh_backward(&trace.conv1_act, &grad_conv1_act)?;
    let (_, conv1_w, conv1_b) = conv2d_backward(&trace.input, &model.conv1, &delta_conv1)?;

    Ok(Gradients {
        conv1_weights: conv1_w,
        conv1_bias: conv1_b,
        conv2_weights: conv2_w,
        conv2_bias: conv2_b,
        dense1_weights: dense1_w,
        dense1_bias: dense1_b,
        dense2_weights: dense2_w,
        dense2_bias: dense2_b,
    })
}
