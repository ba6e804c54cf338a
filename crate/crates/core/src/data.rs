//! Folder-per-class image dataset ingestion: decode, resize to the network
//! input geometry, normalize to [0, 1] and attach integer class labels.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Canonical class order; softmax indices, confusion matrix axes and folder
/// names all follow it.
pub const CLASS_NAMES: [&str; 4] = ["eosinophil", "lymphocyte", "monocyte", "neutrophil"];

/// Network input geometry: channels, height, width.
pub const INPUT_CHANNELS: usize = 3;
pub const INPUT_HEIGHT: usize = 80;
pub const INPUT_WIDTH: usize = 100;

const IMAGE_EXTENSIONS: [&str; 4] = ["png", "jpg", "jpeg", "bmp"];

/// One preprocessed image with its class label.
#[derive(Debug, Clone)]
pub struct Sample {
    /// `[3, 80, 100]` tensor with every value in [0, 1].
    pub pixels: Tensor,
    /// Index into `CLASS_NAMES`.
    pub label: usize,
    pub path: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Train,
    Test,
}

/// Ordered sample collection.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub role: Role,
    /// Files that were present but could not be decoded.
    pub skipped: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sample count per class, canonical order.
    pub fn class_counts(&self) -> [usize; 4] {
        let mut counts = [0usize; 4];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }
}

// Tolerant directory-name match: case-insensitive, with or without a
// trailing plural 's' (BCCD ships upper-case plural folder names).
fn class_of_dir(name: &str) -> Option<usize> {
    let lower = name.to_lowercase();
    CLASS_NAMES
        .iter()
        .position(|&c| lower == c || lower == format!("{c}s"))
}

/// One-hot vector of length `classes` with a 1 at `label`.
pub fn one_hot(label: usize, classes: usize) -> Result<Tensor> {
    if label >= classes {
        return Err(Error::Index(format!(
            "label {label} out of range for {classes} classes"
        )));
    }
    let mut t = Tensor::zeros(&[classes])?;
    t.data_mut()[label] = 1.0;
    Ok(t)
}

/// Load a folder-per-class dataset. `root` must contain one directory per
/// class name; every decodable image inside becomes a sample, in sorted path
/// order. Undecodable files are skipped with a warning and counted.
pub fn load_dataset(root: &Path, role: Role) -> Result<Dataset> {
    if !root.is_dir() {
        return Err(Error::Ingestion(format!(
            "dataset root {} is not a directory",
            root.display()
        )));
    }

    // map class index -> directory, tolerating naming variants
    let mut class_dirs: BTreeMap<usize, PathBuf> = BTreeMap::new();
    for entry in std::fs::read_dir(root)? {
        let entry = entry?;
        if !entry.path().is_dir() {
            continue;
        }
        if let Some(class) = entry.file_name().to_str().and_then(class_of_dir) {
            class_dirs.insert(class, entry.path());
        }
    }
    for (class, name) in CLASS_NAMES.iter().enumerate() {
        if !class_dirs.contains_key(&class) {
            return Err(Error::Ingestion(format!(
                "missing class directory '{name}' under {}",
                root.display()
            )));
        }
    }

    let mut samples = Vec::new();
    let mut skipped = 0usize;
    for (&class, dir) in &class_dirs {
        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.is_file()
                    && p.extension()
                        .and_then(|e| e.to_str())
                        .map(|e| IMAGE_EXTENSIONS.contains(&e.to_lowercase().as_str()))
                        .unwrap_or(false)
            })
            .collect();
        files.sort();
        for path in files {
            match load_image(&path) {
                Ok(pixels) => samples.push(Sample {
                    pixels,
                    label: class,
                    path,
                }),
                Err(e) => {
                    eprintln!("warning: skipping {}: {e}", path.display());
                    skipped += 1;
                }
            }
        }
    }

    if samples.is_empty() {
        return Err(Error::Ingestion(format!(
            "empty dataset under {}",
            root.display()
        )));
    }

    Ok(Dataset {
        samples,
        role,
        skipped,
    })
}

/// Decode one image file and preprocess it to the network input tensor.
pub fn load_image(path: &Path) -> Result<Tensor> {
    let img = image::open(path)
        .map_err(|e| Error::Ingestion(format!("cannot decode {}: {e}", path.display())))?;
    preprocess(&img)
}

/// Resize a decoded image to 80x100 with bilinear interpolation (half-pixel
/// sample centers, edges clamped; aspect ratio is not preserved), scale the
/// 8-bit channel values into [0, 1] and lay the result out channel-first.
/// Grayscale inputs are replicated to three channels.
pub fn preprocess(img: &image::DynamicImage) -> Result<Tensor> {
    let rgb = img.to_rgb8();
    let (w, h) = rgb.dimensions();
    if w == 0 || h == 0 {
        return Err(Error::Ingestion("image has a zero dimension".into()));
    }
    let (sw, sh) = (w as usize, h as usize);

    // split into normalized per-channel planes
    let mut planes = vec![vec![0.0f64; sh * sw]; INPUT_CHANNELS];
    for (i, px) in rgb.pixels().enumerate() {
        for c in 0..INPUT_CHANNELS {
            planes[c][i] = px.0[c] as f64 / 255.0;
        }
    }

    let mut data = Vec::with_capacity(INPUT_CHANNELS * INPUT_HEIGHT * INPUT_WIDTH);
    for plane in &planes {
        data.extend(resize_bilinear(plane, sh, sw, INPUT_HEIGHT, INPUT_WIDTH));
    }
    Tensor::from_vec(&[INPUT_CHANNELS, INPUT_HEIGHT, INPUT_WIDTH], data)
}

/// Bilinear resampling of a single row-major plane. Sample positions use
/// half-pixel centers (`src = (dst + 0.5) * scale - 0.5`) clamped to the
/// source, and each output is a nested lerp of its four neighbors, which
/// keeps outputs inside the source value range.
pub fn resize_bilinear(
    src: &[f64],
    src_h: usize,
    src_w: usize,
    dst_h: usize,
    dst_w: usize,
) -> Vec<f64> {
    assert_eq!(src.len(), src_h * src_w);
    let scale_y = src_h as f64 / dst_h as f64;
    let scale_x = src_w as f64 / dst_w as f64;

    let lerp = |a: f64, b: f64, t: f64| a + t * (b - a);

    let mut out = Vec::with_capacity(dst_h * dst_w);
    for dy in 0..dst_h {
        let sy = ((dy as f64 + 0.5) * scale_y - 0.5).max(0.0);
        let y0 = (sy.floor() as usize).min(src_h - 1);
        let y1 = (y0 + 1).min(src_h - 1);
        let fy = sy - y0 as f64;
        for dx in 0..dst_w {
            let sx = ((dx as f64 + 0.5) * scale_x - 0.5).max(0.0);
            let x0 = (sx.floor() as usize).min(src_w - 1);
            let x1 = (x0 + 1).min(src_w - 1);
            let fx = sx - x0 as f64;

            let top = lerp(src[y0 * src_w + x0], src[y0 * src_w + x1], fx);
            let bottom = lerp(src[y1 * src_w + x0], src[y1 * src_w + x1], fx);
            out.push(lerp(top, bottom, fy));
        }
    }
    out
}

/// Stratified split: per class, `round(fraction * count)` samples go to the
/// holdout, the rest stay in the train set. Deterministic given the seed;
/// the two parts partition the input exactly.
pub fn split_shuffle(data: Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::Config(format!(
            "holdout fraction must be in [0, 1), got {fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // indices per class in canonical order, shuffled independently
    let mut holdout_flags = vec![false; data.samples.len()];
    for class in 0..CLASS_NAMES.len() {
        let mut indices: Vec<usize> = data
            .samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.label == class)
            .map(|(i, _)| i)
            .collect();
        indices.shuffle(&mut rng);
        let take = (fraction * indices.len() as f64).round() as usize;
        for &i in indices.iter().take(take) {
            holdout_flags[i] = true;
        }
    }

    let role = data.role;
    let mut train = Vec::new();
    let mut holdout = Vec::new();
    for (sample, is_holdout) in data.samples.into_iter().zip(holdout_flags) {
        if is_holdout {
            holdout.push(sample);
        } else {
            train.push(sample);
        }
    }
    Ok((
        Dataset {
            samples: train,
            role,
            skipped: 0,
        },
        Dataset {
            samples: holdout,
            role,
            skipped: 0,
        },
    ))
}
