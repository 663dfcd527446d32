//! Gaussian blob embedding sets for desk-scale experiments.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::embed::EmbeddingSet;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlobSpec {
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub sigma: f64,
    /// Centre `c` sits at `radius · e_c`, so centres are pairwise `radius·√2` apart.
    pub radius: f64,
    pub seed: u64,
}

impl Default for BlobSpec {
    fn default() -> Self {
        Self {
            n: 200,
            k: 4,
            d: 16,
            sigma: 0.05,
            radius: 2.0,
            seed: 0,
        }
    }
}

impl BlobSpec {
    pub fn centers(&self) -> Matrix {
        Matrix::from_fn(self.k, self.d, |c, j| if c == j { self.radius } else { 0.0 })
    }
}

/// `n` points split round-robin over `k` isotropic Gaussian blobs.
pub fn gaussian_blobs(spec: &BlobSpec) -> Result<(EmbeddingSet, Vec<usize>)> {
    if spec.k == 0 || spec.k > spec.d || spec.n < spec.k {
        return Err(Error::invalid("blobs", "need 1 <= k <= d and n >= k"));
    }
    let noise = Normal::new(0.0, spec.sigma).map_err(|e| Error::invalid("sigma", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centers = spec.centers();
    let labels: Vec<usize> = (0..spec.n).map(|i| i % spec.k).collect();
    let m = Matrix::from_fn(spec.n, spec.d, |i, j| centers[(labels[i], j)] + noise.sample(&mut rng));
    Ok((EmbeddingSet::from_matrix(&m)?, labels))
}
