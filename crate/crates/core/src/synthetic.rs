//! Separable synthetic fixtures: four classes marked by a bright block in
//! one image quadrant. Used by overfit sanity tests, smoke runs and CLI
//! fixtures; not part of the classification pipeline itself.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, Role, Sample, CLASS_NAMES};
use crate::error::Result;
use crate::network::NetworkSpec;
use crate::tensor::Tensor;

// quadrant origin for a class: 0 top-left, 1 top-right, 2 bottom-left,
// 3 bottom-right
fn quadrant_origin(class: usize, h: usize, w: usize) -> (usize, usize) {
    match class {
        0 => (0, 0),
        1 => (0, w / 2),
        2 => (h / 2, 0),
        _ => (h / 2, w / 2),
    }
}

/// One noisy image of `spec`'s input geometry whose `class` quadrant is
/// bright and the rest dim.
pub fn quadrant_sample(spec: &NetworkSpec, class: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let [c, h, w] = spec.input;
    let (oy, ox) = quadrant_origin(class, h, w);
    let mut t = Tensor::zeros(&[c, h, w]).expect("valid spec input shape");
    for ch in 0..c {
        for y in 0..h {
            for x in 0..w {
                let inside = y >= oy && y < oy + h / 2 && x >= ox && x < ox + w / 2;
                let base = if inside { 0.9 } else { 0.1 };
                t.set(&[ch, y, x], base + rng.gen_range(-0.05..0.05));
            }
        }
    }
    t
}

/// In-memory dataset with `per_class` quadrant samples per class.
pub fn quadrant_dataset(spec: &NetworkSpec, per_class: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(4 * per_class);
    for class in 0..4 {
        for i in 0..per_class {
            samples.push(Sample {
                pixels: quadrant_sample(spec, class, &mut rng),
                label: class,
                path: PathBuf::from(format!("synthetic/{}/{i}.png", CLASS_NAMES[class])),
            });
        }
    }
    Dataset {
        samples,
        role: Role::Train,
        skipped: 0,
    }
}

/// Write a folder-per-class PNG fixture tree under `root`: `per_class`
/// quadrant images of `width` x `height` pixels for each class.
pub fn write_quadrant_pngs(
    root: &Path,
    per_class: usize,
    width: u32,
    height: u32,
    seed: u64,
) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (class, name) in CLASS_NAMES.iter().enumerate() {
        let dir = root.join(name);
        std::fs::create_dir_all(&dir)?;
        let (oy, ox) = quadrant_origin(class, height as usize, width as usize);
        for i in 0..per_class {
            let mut img = image::RgbImage::new(width, height);
            for (x, y, px) in img.enumerate_pixels_mut() {
                let inside = (y as usize) >= oy
                    && (y as usize) < oy + height as usize / 2
                    && (x as usize) >= ox
                    && (x as usize) < ox + width as usize / 2;
                let base: i32 = if inside { 230 } else { 25 };
                let value = (base + rng.gen_range(-12..=12)).clamp(0, 255) as u8;
                *px = image::Rgb([value; 3]);
            }
            img.save(dir.join(format!("{name}_{i:03}.png")))
                .map_err(|e| crate::error::Error::Ingestion(format!("cannot write fixture: {e}")))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrant_dataset_is_balanced_and_deterministic() {
        let spec = NetworkSpec::tiny();
        let a = quadrant_dataset(&spec, 2, 5);
        let b = quadrant_dataset(&spec, 2, 5);
        assert_eq!(a.class_counts(), [2, 2, 2, 2]);
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert_eq!(x.pixels.data(), y.pixels.data());
        }
    }

    #[test]
    fn quadrants_are_distinguishable() {
        let spec = NetworkSpec::tiny();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s0 = quadrant_sample(&spec, 0, &mut rng);
        // class 0: bright top-left, dim bottom-right
        assert!(s0.get(&[0, 1, 1]) > 0.8);
        assert!(s0.get(&[0, 6, 6]) < 0.2);
    }
}
