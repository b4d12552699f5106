//! Dense node-feature storage.

use ndarray::{Array2, ArrayView1, ArrayViewMut1};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Dense `N × D` real matrix holding one feature row per node.
///
/// All entries are finite; constructors reject NaN/inf.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Array2<f64>,
}

impl FeatureMatrix {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Shape("feature matrix contains non-finite values".into()));
        }
        Ok(FeatureMatrix { data })
    }

    pub fn zeros(num_nodes: usize, dim: usize) -> Self {
        FeatureMatrix {
            data: Array2::zeros((num_nodes, dim)),
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Shape("ragged feature rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let data = Array2::from_shape_vec((n, d), flat)
            .map_err(|e| Error::Shape(e.to_string()))?;
        Self::new(data)
    }

    /// Uniform random entries in `[-1, 1)`, deterministic for a given seed.
    pub fn random(num_nodes: usize, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Uniform::new(-1.0, 1.0);
        let data = Array2::from_shape_simple_fn((num_nodes, dim), || dist.sample(&mut rng));
        FeatureMatrix { data }
    }

    pub fn num_nodes(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn row(&self, v: usize) -> ArrayView1<'_, f64> {
        self.data.row(v)
    }

    pub fn row_mut(&mut self, v: usize) -> ArrayViewMut1<'_, f64> {
        self.data.row_mut(v)
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_array(self) -> Array2<f64> {
        self.data
    }

    /// Largest relative difference against `other`, measured per element as
    /// `|a - b| / max(1, |a|, |b|)`.
    pub fn max_relative_error(&self, other: &FeatureMatrix) -> f64 {
        assert_eq!(self.data.dim(), other.data.dim(), "shape mismatch");
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(&a, &b)| (a - b).abs() / 1.0_f64.max(a.abs()).max(b.abs()))
            .fold(0.0, f64::max)
    }

    /// Hash of the row-major IEEE-754 bit pattern; stable across runs.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        hasher.update((self.data.nrows() as u64).to_le_bytes());
        hasher.update((self.data.ncols() as u64).to_le_bytes());
        for &x in self.data.iter() {
            hasher.update(x.to_bits().to_le_bytes());
        }
        let digest = hasher.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}
