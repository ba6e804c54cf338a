//! Inference-time prediction with top-2 reporting and confusion-matrix
//! evaluation.

use std::path::PathBuf;

use rayon::prelude::*;

use crate::data::{Dataset, CLASS_NAMES};
use crate::error::{Error, Result};
use crate::network::{infer, Model};
use crate::tensor::Tensor;

/// Index of the largest value; ties go to the lower index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// The two largest probabilities with their class indices; ties broken by
/// lower class index.
pub fn top2(probs: &[f64]) -> ((usize, f64), (usize, f64)) {
    assert!(probs.len() >= 2, "need at least two classes");
    let first = argmax(probs);
    let mut second = if first == 0 { 1 } else { 0 };
    for (i, &v) in probs.iter().enumerate() {
        if i == first || i == second {
            continue;
        }
        if v > probs[second] {
            second = i;
        }
    }
    ((first, probs[first]), (second, probs[second]))
}

/// Render a fraction as a percentage with the given number of decimals,
/// e.g. `percent(0.9998, 2) == "99.98%"`.
pub fn percent(fraction: f64, decimals: usize) -> String {
    format!("{:.*}%", decimals, fraction * 100.0)
}

/// Per-image classification result.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub probabilities: Tensor,
    pub top1: (usize, f64),
    pub top2: (usize, f64),
    pub source: Option<PathBuf>,
}

/// Run the model on one preprocessed image in inference mode and extract the
/// two most probable classes.
pub fn predict(model: &Model, pixels: &Tensor) -> Result<Prediction> {
    let trace = infer(model, pixels)?;
    let (first, second) = top2(trace.probs.data());
    Ok(Prediction {
        probabilities: trace.probs,
        top1: first,
        top2: second,
        source: None,
    })
}

/// 4x4 count grid; rows are true classes, columns predicted classes, both in
/// canonical class order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    counts: [[usize; 4]; 4],
}

impl ConfusionMatrix {
    pub fn new() -> ConfusionMatrix {
        ConfusionMatrix::default()
    }

    /// Build from an iterator of `(true_class, predicted_class)` pairs.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, usize)>) -> ConfusionMatrix {
        let mut cm = ConfusionMatrix::new();
        for (t, p) in pairs {
            cm.record(t, p);
        }
        cm
    }

    pub fn record(&mut self, true_class: usize, predicted: usize) {
        self.counts[true_class][predicted] += 1;
    }

    pub fn counts(&self) -> &[[usize; 4]; 4] {
        &self.counts
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    /// Correctly classified count (the diagonal).
    pub fn correct(&self) -> usize {
        (0..4).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sums(&self) -> [usize; 4] {
        let mut sums = [0usize; 4];
        for (i, row) in self.counts.iter().enumerate() {
            sums[i] = row.iter().sum();
        }
        sums
    }

    /// Fraction of correctly classified samples: `trace / total`.
    pub fn accuracy(&self) -> Result<f64> {
        let total = self.total();
        if total == 0 {
            return Err(Error::Config("confusion matrix is empty".into()));
        }
        Ok(self.correct() as f64 / total as f64)
    }

    /// Aligned text table, true classes down, predicted across, plus
    /// per-class recall.
    pub fn to_table(&self) -> String {
        let width = CLASS_NAMES.iter().map(|n| n.len()).max().unwrap().max(6);
        let mut out = String::new();
        out.push_str(&format!("{:>w$}", "", w = width + 2));
        for name in CLASS_NAMES {
            out.push_str(&format!("{name:>w$}", w = width + 2));
        }
        out.push_str(&format!("{:>10}\n", "recall"));
        for (i, row) in self.counts.iter().enumerate() {
            out.push_str(&format!("{:>w$}", CLASS_NAMES[i], w = width + 2));
            for &count in row {
                out.push_str(&format!("{count:>w$}", w = width + 2));
            }
            let row_total: usize = row.iter().sum();
            if row_total > 0 {
                out.push_str(&format!(
                    "{:>10}",
                    percent(row[i] as f64 / row_total as f64, 1)
                ));
            } else {
                out.push_str(&format!("{:>10}", "-"));
            }
            out.push('\n');
        }
        out
    }

    /// CSV with a header row of predicted class names.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("true_class");
        for name in CLASS_NAMES {
            out.push_str(&format!(",{name}"));
        }
        out.push('\n');
        for (i, row) in self.counts.iter().enumerate() {
            out.push_str(CLASS_NAMES[i]);
            for &count in row {
                out.push_str(&format!(",{count}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Evaluate the model over a test set: one `predict` per sample, counted into
/// the confusion matrix by top-1 class.
pub fn confusion(model: &Model, test: &Dataset) -> Result<ConfusionMatrix> {
    if test.is_empty() {
        return Err(Error::Config("cannot evaluate an empty dataset".into()));
    }
    let pairs: Vec<Result<(usize, usize)>> = test
        .samples
        .par_iter()
        .map(|sample| {
            let pred = predict(model, &sample.pixels)?;
            Ok((sample.label, pred.top1.0))
        })
        .collect();
    let mut cm = ConfusionMatrix::new();
    for pair in pairs {
        let (t, p) = pair?;
        cm.record(t, p);
    }
    Ok(cm)
}
