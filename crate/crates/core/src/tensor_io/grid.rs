use crate::error::{Error, Result};

/// Allowed deviation of each patch vector's L2 norm from 1.
pub const NORM_TOLERANCE: f64 = 1e-3;

/// Row-major grid of L2-normalized patch feature vectors.
///
/// Patch `i` sits at row `i / width`, column `i % width`; its vector occupies
/// `data[i * dim..(i + 1) * dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    height: usize,
    width: usize,
    dim: usize,
    data: Vec<f32>,
}

impl FeatureGrid {
    pub fn new(height: usize, width: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 || dim == 0 {
            return Err(Error::InvalidDimensions(format!(
                "feature grid {height}x{width}x{dim} has a zero extent"
            )));
        }
        if height * width < 2 {
            return Err(Error::InvalidDimensions(format!(
                "feature grid needs at least 2 patches, got {height}x{width}"
            )));
        }
        let expected = height * width * dim;
        if data.len() != expected {
            return Err(Error::InvalidDimensions(format!(
                "feature grid {height}x{width}x{dim} needs {expected} values, got {}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        for (index, patch) in data.chunks_exact(dim).enumerate() {
            let norm = patch
                .iter()
                .map(|&v| f64::from(v) * f64::from(v))
                .sum::<f64>()
                .sqrt();
            if (norm - 1.0).abs() > NORM_TOLERANCE {
                return Err(Error::NormViolation {
                    index,
                    norm,
                    tolerance: NORM_TOLERANCE,
                });
            }
        }
        Ok(Self {
            height,
            width,
            dim,
            data,
        })
    }

    /// Builds a grid from arbitrary nonzero vectors, normalizing each one.
    pub fn from_unnormalized(
        height: usize,
        width: usize,
        dim: usize,
        mut data: Vec<f32>,
    ) -> Result<Self> {
        if dim > 0 {
            for patch in data.chunks_exact_mut(dim) {
                let norm = patch
                    .iter()
                    .map(|&v| f64::from(v) * f64::from(v))
                    .sum::<f64>()
                    .sqrt();
                if norm > 0.0 && norm.is_finite() {
                    for v in patch.iter_mut() {
                        *v = (f64::from(*v) / norm) as f32;
                    }
                }
            }
        }
        Self::new(height, width, dim, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn patch_count(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn vector(&self, patch: usize) -> &[f32] {
        &self.data[patch * self.dim..(patch + 1) * self.dim]
    }

    pub fn vectors(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim)
    }

    /// Grid with rows and columns swapped.
    pub fn transposed(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for col in 0..self.width {
            for row in 0..self.height {
                data.extend_from_slice(self.vector(row * self.width + col));
            }
        }
        Self {
            height: self.width,
            width: self.height,
            dim: self.dim,
            data,
        }
    }
}

/// Grid of {0, 1} labels, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidDimensions(format!(
                "mask {height}x{width} has a zero extent"
            )));
        }
        if data.len() != height * width {
            return Err(Error::InvalidDimensions(format!(
                "mask {height}x{width} needs {} values, got {}",
                height * width,
                data.len()
            )));
        }
        if let Some((index, &value)) = data.iter().enumerate().find(|(_, &v)| v > 1) {
            return Err(Error::InvalidMaskValue { index, value });
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![0; height * width],
        }
    }

    pub fn ones(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![1; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for row in 0..height {
            for col in 0..width {
                data.push(u8::from(f(row, col)));
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    pub fn from_bools(height: usize, width: usize, bits: &[bool]) -> Result<Self> {
        Self::new(height, width, bits.iter().map(|&b| u8::from(b)).collect())
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col] == 1
    }

    pub fn is_set(&self, index: usize) -> bool {
        self.data[index] == 1
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.data[row * self.width + col] = u8::from(value);
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }

    pub fn complement(&self) -> Self {
        Self {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| 1 - v).collect(),
        }
    }

    pub fn same_shape(&self, other: &BinaryMask) -> bool {
        self.height == other.height && self.width == other.width
    }

    pub fn intersection_count(&self, other: &BinaryMask) -> usize {
        self.data
            .iter()
            .zip(&other.data)
            .filter(|(&a, &b)| a == 1 && b == 1)
            .count()
    }

    pub fn union(&self, other: &BinaryMask) -> Result<Self> {
        if !self.same_shape(other) {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.height, self.width, other.height, other.width
            )));
        }
        Ok(Self {
            height: self.height,
            width: self.width,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a | b)
                .collect(),
        })
    }

    pub fn transposed(&self) -> Self {
        Self::from_fn(self.width, self.height, |row, col| self.get(col, row))
    }
}

/// Grid of nonnegative finite reals, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatMap {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl HeatMap {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidDimensions(format!(
                "heat map {height}x{width} has a zero extent"
            )));
        }
        if data.len() != height * width {
            return Err(Error::InvalidDimensions(format!(
                "heat map {height}x{width} needs {} values, got {}",
                height * width,
                data.len()
            )));
        }
        for (index, &value) in data.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite(index));
            }
            if value < 0.0 {
                return Err(Error::NegativeHeat { index, value });
            }
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.width + col]
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}
