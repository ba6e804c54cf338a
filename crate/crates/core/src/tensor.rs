//! Dense multi-dimensional `f64` array, the substrate for all layer math.
//!
//! Layout is row-major (last index fastest) and every value is 64-bit; both
//! are fixed so that serialization and gradient checks have one canonical
//! representation.

use crate::error::{Error, Result};

/// Dense real-valued array with an explicit shape and a flat row-major buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Create a tensor of the given shape with every element set to `fill`.
    /// All extents must be at least 1.
    pub fn new(shape: &[usize], fill: f64) -> Result<Tensor> {
        let len = checked_len(shape)?;
        Ok(Tensor {
            shape: shape.to_vec(),
            data: vec![fill; len],
        })
    }

    /// Zero-filled tensor.
    pub fn zeros(shape: &[usize]) -> Result<Tensor> {
        Tensor::new(shape, 0.0)
    }

    /// Build a tensor from an existing flat buffer in row-major order.
    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Tensor> {
        let len = checked_len(shape)?;
        if data.len() != len {
            return Err(Error::Shape(format!(
                "buffer length {} does not match shape {:?} (expects {})",
                data.len(),
                shape,
                len
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// Total number of elements.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Flat row-major offset of a multi-index. Panics if the index is out of
    /// bounds, mirroring slice indexing semantics.
    pub fn offset(&self, index: &[usize]) -> usize {
        assert_eq!(
            index.len(),
            self.shape.len(),
            "index rank {} does not match tensor rank {}",
            index.len(),
            self.shape.len()
        );
        let mut flat = 0;
        for (i, (&ix, &extent)) in index.iter().zip(&self.shape).enumerate() {
            assert!(ix < extent, "index {ix} out of range for axis {i} (extent {extent})");
            flat = flat * extent + ix;
        }
        flat
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.offset(index)]
    }

    pub fn set(&mut self, index: &[usize], value: f64) {
        let at = self.offset(index);
        self.data[at] = value;
    }

    /// Elementwise map into a new tensor of the same shape.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise product. Shapes must match exactly.
    pub fn hadamard(&self, other: &Tensor) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "hadamard operands differ: {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a * b)
                .collect(),
        })
    }

    /// Reinterpret the flat buffer under a new shape of the same total length.
    pub fn into_shape(self, shape: &[usize]) -> Result<Tensor> {
        let len = checked_len(shape)?;
        if len != self.data.len() {
            return Err(Error::Shape(format!(
                "cannot reshape {:?} ({} elements) into {:?} ({} elements)",
                self.shape,
                self.data.len(),
                shape,
                len
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data: self.data,
        })
    }

    /// In-place `self += scale * other`; used by the optimizer and gradient
    /// accumulation. Shapes must match exactly.
    pub fn add_scaled(&mut self, other: &Tensor, scale: f64) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "add_scaled operands differ: {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
        Ok(())
    }

    /// In-place multiply every element by `scale`.
    pub fn scale(&mut self, scale: f64) {
        for v in &mut self.data {
            *v *= scale;
        }
    }
}

fn checked_len(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() {
        return Err(Error::Shape("shape must have at least one extent".into()));
    }
    let mut len: usize = 1;
    for &extent in shape {
        if extent == 0 {
            return Err(Error::Shape(format!("zero extent in shape {shape:?}")));
        }
        len = len
            .checked_mul(extent)
            .ok_or_else(|| Error::Shape(format!("shape {shape:?} overflows usize")))?;
    }
    Ok(len)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn new_fills_every_element() {
        let t = Tensor::new(&[2, 3], 0.0).unwrap();
        assert_eq!(t.shape(), &[2, 3]);
        assert_eq!(t.data(), &[0.0; 6]);

        let t = Tensor::new(&[1], 7.5).unwrap();
        assert_eq!(t.data(), &[7.5]);
    }

    #[test]
    fn new_matches_default_input_geometry() {
        let t = Tensor::new(&[3, 80, 100], 0.0).unwrap();
        assert_eq!(t.len(), 24_000);
        assert!(t.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_or_missing_extent_is_rejected() {
        assert!(matches!(Tensor::new(&[2, 0, 3], 1.0), Err(Error::Shape(_))));
        assert!(matches!(Tensor::new(&[], 1.0), Err(Error::Shape(_))));
    }

    #[test]
    fn map_applies_elementwise() {
        let t = Tensor::from_vec(&[3], vec![0.0, 1.0, -1.0]).unwrap();
        assert_eq!(t.map(|v| -v).data(), &[0.0, -1.0, 1.0]);
        assert_eq!(t.map(|v| v).data(), t.data());
        let h = Tensor::from_vec(&[2], vec![0.5, -0.5]).unwrap();
        assert_eq!(h.map(|v| 2.0 * v).data(), &[1.0, -1.0]);
    }

    #[test]
    fn hadamard_multiplies_elementwise() {
        let a = Tensor::from_vec(&[3], vec![1.0, 2.0, 3.0]).unwrap();
        let b = Tensor::from_vec(&[3], vec![4.0, 5.0, 6.0]).unwrap();
        assert_eq!(a.hadamard(&b).unwrap().data(), &[4.0, 10.0, 18.0]);

        let ones = Tensor::new(&[3], 1.0).unwrap();
        assert_eq!(a.hadamard(&ones).unwrap().data(), a.data());
        let zeros = Tensor::zeros(&[3]).unwrap();
        assert_eq!(a.hadamard(&zeros).unwrap().data(), zeros.data());
    }

    #[test]
    fn hadamard_rejects_shape_mismatch() {
        let a = Tensor::zeros(&[2, 3]).unwrap();
        let b = Tensor::zeros(&[3, 2]).unwrap();
        assert!(matches!(a.hadamard(&b), Err(Error::Shape(_))));
    }

    #[test]
    fn hadamard_is_commutative_and_associative() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = Tensor::from_vec(&[4, 5], (0..20).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap();
        let b = Tensor::from_vec(&[4, 5], (0..20).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap();
        let c = Tensor::from_vec(&[4, 5], (0..20).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap();

        // commutativity is bit-exact for f64 multiply
        assert_eq!(a.hadamard(&b).unwrap(), b.hadamard(&a).unwrap());

        // associativity holds to tight relative tolerance
        let ab_c = a.hadamard(&b).unwrap().hadamard(&c).unwrap();
        let a_bc = a.hadamard(&b.hadamard(&c).unwrap()).unwrap();
        for (x, y) in ab_c.data().iter().zip(a_bc.data()) {
            let denom = x.abs().max(y.abs()).max(1e-12);
            assert!((x - y).abs() / denom < 1e-12);
        }
    }

    // row-major odometer; returns false once every index has been visited
    fn increment(index: &mut [usize], shape: &[usize]) -> bool {
        for axis in (0..shape.len()).rev() {
            index[axis] += 1;
            if index[axis] < shape[axis] {
                return true;
            }
            index[axis] = 0;
        }
        false
    }

    #[test]
    fn index_round_trip_is_exact_for_random_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..40 {
            let rank = rng.gen_range(1..=4);
            let shape: Vec<usize> = (0..rank).map(|_| rng.gen_range(1..=8)).collect();
            let mut t = Tensor::zeros(&shape).unwrap();

            // enumerate every multi-index, write a unique value, read it back
            let mut index = vec![0usize; rank];
            let mut counter = 0.0f64;
            loop {
                t.set(&index, counter);
                assert_eq!(t.get(&index), counter);
                // enumeration order doubles as a check of row-major strides
                assert_eq!(t.offset(&index), counter as usize);
                counter += 1.0;
                if !increment(&mut index, &shape) {
                    break;
                }
            }
            assert_eq!(counter as usize, t.len());
        }
    }

    #[test]
    fn into_shape_preserves_data() {
        let t = Tensor::from_vec(&[2, 3], (0..6).map(|i| i as f64).collect()).unwrap();
        let flat = t.clone().into_shape(&[6]).unwrap();
        assert_eq!(flat.data(), t.data());
        assert!(matches!(t.into_shape(&[4]), Err(Error::Shape(_))));
    }

    #[test]
    fn add_scaled_and_scale() {
        let mut a = Tensor::from_vec(&[2], vec![1.0, 2.0]).unwrap();
        let g = Tensor::from_vec(&[2], vec![0.5, -0.5]).unwrap();
        a.add_scaled(&g, -0.1).unwrap();
        assert_eq!(a.data(), &[0.95, 2.05]);
        a.scale(2.0);
        assert_eq!(a.data(), &[1.9, 4.1]);
    }
}
