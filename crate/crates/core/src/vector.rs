//! Feature-vector arithmetic: L1 distance, mean vectors, unit-L2 normalization.
//!
//! Everything downstream (banding, search, persistence) is built on the two
//! facts established here: feature vectors are nonnegative finite reals, and
//! the distance between them is the coordinate-wise absolute-difference sum.

use crate::error::{Error, Result};

/// A Euclidean-measurable feature vector: the stored stand-in for a biometric.
///
/// Entries are nonnegative finite reals (post-ReLU activations). The
/// dimension is the entry count; 256 is the conventional default, but any
/// positive dimension is valid so small configurations stay testable.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
}

impl FeatureVector {
    /// Conventional production dimension.
    pub const DEFAULT_DIMENSION: usize = 256;

    /// Validates entries: every value must be finite and `>= 0`.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Dimension {
                expected: 1,
                actual: 0,
            });
        }
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidEntry { index, value });
            }
        }
        Ok(Self { values })
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Errors unless this vector has exactly the given dimension.
    pub fn expect_dimension(&self, dimension: usize) -> Result<()> {
        if self.dimension() != dimension {
            return Err(Error::Dimension {
                expected: dimension,
                actual: self.dimension(),
            });
        }
        Ok(())
    }
}

/// Coordinate-wise mean of a set of feature vectors.
///
/// Mean entries are finite reals but, unlike feature-vector entries, carry no
/// further constraint; `source_count` records how many vectors produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanVector {
    values: Vec<f64>,
    source_count: usize,
}

impl MeanVector {
    pub(crate) fn from_raw(values: Vec<f64>, source_count: usize) -> Result<Self> {
        if values.is_empty() || source_count == 0 {
            return Err(Error::EmptyGallery);
        }
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::InvalidEntry { index, value });
            }
        }
        Ok(Self {
            values,
            source_count,
        })
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of vectors averaged into this mean.
    pub fn source_count(&self) -> usize {
        self.source_count
    }
}

/// L1 (sum of absolute coordinate differences) distance between two vectors.
pub fn l1_distance(x: &FeatureVector, y: &FeatureVector) -> Result<f64> {
    y.expect_dimension(x.dimension())?;
    Ok(l1(x.values(), y.values()))
}

/// L1 distance from a mean vector to a feature vector: the scalar every
/// band comparison is made on.
pub fn distance_to_mean(mean: &MeanVector, y: &FeatureVector) -> Result<f64> {
    y.expect_dimension(mean.dimension())?;
    Ok(l1(mean.values(), y.values()))
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    let mut sum = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        sum += (x - y).abs();
    }
    sum
}

/// Coordinate-wise arithmetic mean of a nonempty set of same-dimension vectors.
pub fn mean_vector<'a, I>(vectors: I) -> Result<MeanVector>
where
    I: IntoIterator<Item = &'a FeatureVector>,
{
    let mut iter = vectors.into_iter();
    let first = iter.next().ok_or(Error::EmptyGallery)?;
    let dimension = first.dimension();
    let mut sums = first.values().to_vec();
    let mut count = 1usize;
    for v in iter {
        v.expect_dimension(dimension)?;
        for (s, x) in sums.iter_mut().zip(v.values()) {
            *s += x;
        }
        count += 1;
    }
    let inv = 1.0 / count as f64;
    for s in sums.iter_mut() {
        *s *= inv;
    }
    MeanVector::from_raw(sums, count)
}

/// Scales a vector to unit L2 length. Entries stay nonnegative, so the result
/// is again a valid feature vector.
pub fn normalize(x: &FeatureVector) -> Result<FeatureVector> {
    let norm = x.values().iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::DegenerateVector);
    }
    let inv = 1.0 / norm;
    FeatureVector::new(x.values().iter().map(|v| v * inv).collect())
}
