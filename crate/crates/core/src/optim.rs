//! Cross-entropy loss, mini-batch SGD and the epoch training loop.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{split_shuffle, Dataset, Sample};
use crate::error::{Error, Result};
use crate::eval::argmax;
use crate::network::{backward, forward, infer, Gradients, Mode, Model};
use crate::tensor::Tensor;

/// Training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub dropout_rate: f64,
    pub seed: u64,
    /// Fraction of the training set held out for per-epoch validation.
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            epochs: 96,
            batch_size: 32,
            dropout_rate: 0.1,
            seed: 42,
            validation_fraction: 0.2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout rate must be in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::Config(format!(
                "validation fraction must be in [0, 1), got {}",
                self.validation_fraction
            )));
        }
        Ok(())
    }
}

/// Loss and accuracy record for one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    /// NaN when no validation split was held out.
    pub val_loss: f64,
    pub val_acc: f64,
}

/// Cross-entropy of a softmax output against the true class:
/// `-ln(probs[label])`. The probability is clamped at 1e-300 before the log
/// so pathological inputs cannot produce infinities.
pub fn cross_entropy(probs: &Tensor, label: usize) -> f64 {
    -probs.data()[label].max(1e-300).ln()
}

/// Plain SGD update: every parameter `p <- p - lr * g`, in place. The model
/// is untouched if any gradient shape mismatches.
pub fn sgd_step(model: &mut Model, grads: &Gradients, learning_rate: f64) -> Result<()> {
    for (param, grad) in model.params().into_iter().zip(grads.tensors()) {
        if param.shape() != grad.shape() {
            return Err(Error::State(format!(
                "gradient shape {:?} does not match parameter shape {:?}",
                grad.shape(),
                param.shape()
            )));
        }
    }
    for (param, grad) in model.params_mut().into_iter().zip(grads.tensors()) {
        param.add_scaled(grad, -learning_rate)?;
    }
    Ok(())
}

/// Mean gradient over a batch plus summed loss and hit count, computed with
/// dropout active. Per-sample passes run in parallel; accumulation follows
/// the batch's sample order exactly, so results are bit-reproducible
/// regardless of thread count.
pub fn batch_gradients(
    model: &Model,
    batch: &[&Sample],
    dropout_rate: f64,
    sample_seeds: &[u64],
) -> Result<(Gradients, f64, usize)> {
    assert_eq!(batch.len(), sample_seeds.len());
    let mut total = Gradients::zeros(&model.spec)?;
    let mut loss_sum = 0.0;
    let mut correct = 0;

    let stride = rayon::current_num_threads().max(1);
    for (samples, seeds) in batch.chunks(stride).zip(sample_seeds.chunks(stride)) {
        let results: Vec<Result<(Gradients, f64, bool)>> = samples
            .par_iter()
            .zip(seeds.par_iter())
            .map(|(sample, &seed)| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let trace = forward(model, &sample.pixels, Mode::Train { dropout_rate }, &mut rng)?;
                let loss = cross_entropy(&trace.probs, sample.label);
                let hit = argmax(trace.probs.data()) == sample.label;
                let grads = backward(model, &trace, sample.label)?;
                Ok((grads, loss, hit))
            })
            .collect();
        for result in results {
            let (grads, loss, hit) = result?;
            total.accumulate(&grads)?;
            loss_sum += loss;
            if hit {
                correct += 1;
            }
        }
    }

    total.scale(1.0 / batch.len() as f64);
    Ok((total, loss_sum, correct))
}

/// One pass over the training set: shuffle, iterate mini-batches, average
/// per-sample gradients within each batch and apply one SGD step per batch.
/// Returns the epoch-mean loss and accuracy measured during the pass.
pub fn train_epoch<R: Rng>(
    model: &mut Model,
    train: &Dataset,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<(f64, f64)> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Config("cannot train on an empty dataset".into()));
    }
    if cfg.batch_size > train.len() {
        return Err(Error::Config(format!(
            "batch size {} exceeds dataset size {}",
            cfg.batch_size,
            train.len()
        )));
    }

    let mut order: Vec<usize> = (0..train.len()).collect();
    order.shuffle(rng);

    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    for batch_indices in order.chunks(cfg.batch_size) {
        let batch: Vec<&Sample> = batch_indices.iter().map(|&i| &train.samples[i]).collect();
        let seeds: Vec<u64> = batch.iter().map(|_| rng.gen()).collect();
        let (grads, batch_loss, batch_correct) =
            batch_gradients(model, &batch, cfg.dropout_rate, &seeds)?;
        loss_sum += batch_loss;
        correct += batch_correct;
        sgd_step(model, &grads, cfg.learning_rate)?;
    }

    Ok((
        loss_sum / train.len() as f64,
        correct as f64 / train.len() as f64,
    ))
}

/// Mean cross-entropy and accuracy of the model on a dataset, inference mode.
pub fn evaluate(model: &Model, data: &Dataset) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Err(Error::Config("cannot evaluate an empty dataset".into()));
    }
    let results: Vec<Result<(f64, bool)>> = data
        .samples
        .par_iter()
        .map(|sample| {
            let trace = infer(model, &sample.pixels)?;
            Ok((
                cross_entropy(&trace.probs, sample.label),
                argmax(trace.probs.data()) == sample.label,
            ))
        })
        .collect();
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    for result in results {
        let (loss, hit) = result?;
        loss_sum += loss;
        if hit {
            correct += 1;
        }
    }
    Ok((
        loss_sum / data.len() as f64,
        correct as f64 / data.len() as f64,
    ))
}

/// Full training run: hold out `validation_fraction` (stratified, seeded),
/// run `cfg.epochs` epochs and evaluate the holdout after each. Returns the
/// per-epoch metric series.
pub fn fit(model: &mut Model, data: Dataset, cfg: &TrainConfig) -> Result<Vec<EpochMetrics>> {
    cfg.validate()?;
    let (train, holdout) = split_shuffle(data, cfg.validation_fraction, cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut series = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let (train_loss, train_acc) = train_epoch(model, &train, cfg, &mut rng)?;
        let (val_loss, val_acc) = if holdout.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            evaluate(model, &holdout)?
        };
        series.push(EpochMetrics {
            epoch,
            train_loss,
            train_acc,
            val_loss,
            val_acc,
        });
    }
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_model, NetworkSpec};

    #[test]
    fn cross_entropy_known_values() {
        let perfect = Tensor::from_vec(&[4], vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(cross_entropy(&perfect, 1), 0.0);

        let uniform = Tensor::new(&[4], 0.25).unwrap();
        for label in 0..4 {
            assert!((cross_entropy(&uniform, label) - 4f64.ln()).abs() < 1e-12);
        }

        // batch mean of the two cases above
        let mean = (cross_entropy(&perfect, 1) + cross_entropy(&uniform, 0)) / 2.0;
        assert!((mean - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_is_nonnegative_and_clamped() {
        let degenerate = Tensor::from_vec(&[4], vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let loss = cross_entropy(&degenerate, 1);
        assert!(loss.is_finite());
        assert!(loss > 0.0);
    }

    #[test]
    fn sgd_step_moves_exactly_minus_lr_g() {
        let spec = NetworkSpec::tiny();
        let mut model = build_model(&spec, 1).unwrap();
        let before = model.clone();

        let zero = Gradients::zeros(&spec).unwrap();
        sgd_step(&mut model, &zero, 0.1).unwrap();
        assert_eq!(model, before);

        let mut grads = Gradients::zeros(&spec).unwrap();
        grads.dense2_bias.set(&[0], 0.5);
        sgd_step(&mut model, &grads, 0.1).unwrap();
        assert_eq!(model.dense2.bias.data()[0], before.dense2.bias.data()[0] - 0.05);

        // two equal steps move by exactly 2*lr*g
        sgd_step(&mut model, &grads, 0.1).unwrap();
        let moved = before.dense2.bias.data()[0] - model.dense2.bias.data()[0];
        assert_eq!(moved, 2.0 * 0.1 * 0.5);
    }

    #[test]
    fn sgd_step_rejects_mismatched_gradients() {
        let mut model = build_model(&NetworkSpec::tiny(), 1).unwrap();
        let other = NetworkSpec {
            hidden: 5,
            ..NetworkSpec::tiny()
        };
        let grads = Gradients::zeros(&other).unwrap();
        assert!(matches!(
            sgd_step(&mut model, &grads, 0.1),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad_lr = TrainConfig { learning_rate: 0.0, ..TrainConfig::default() };
        assert!(bad_lr.validate().is_err());
        let bad_drop = TrainConfig { dropout_rate: 1.0, ..TrainConfig::default() };
        assert!(bad_drop.validate().is_err());
        let bad_frac = TrainConfig { validation_fraction: 1.0, ..TrainConfig::default() };
        assert!(bad_frac.validate().is_err());
    }
}
