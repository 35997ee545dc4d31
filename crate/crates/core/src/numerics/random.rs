//! Seeded, splittable random sources and the samplers built on them.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Bernoulli, Distribution, StandardNormal, Weibull};

use super::linalg::psd_factor;
use super::Matrix;
use crate::error::{Error, Result};

/// A seeded random stream.
///
/// Child streams are derived from `(seed, stream id)` alone, so the order in
/// which children are created never changes what they produce.
#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    rng: ChaCha12Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        RandomSource {
            seed,
            rng: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream keyed by `stream`.
    pub fn substream(&self, stream: u64) -> RandomSource {
        RandomSource::new(splitmix64(
            self.seed ^ splitmix64(stream.wrapping_add(0xD1B5_4A32_D192_ED03)),
        ))
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn normal_matrix(&mut self, rows: usize, cols: usize) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| self.standard_normal())
    }
}

/// Precomputed symmetric factor of a covariance, for repeated Gaussian draws.
#[derive(Debug, Clone)]
pub struct GaussianFactor {
    factor: Matrix,
    zero: bool,
}

impl GaussianFactor {
    pub fn new(cov: &Matrix) -> Result<Self> {
        let factor = psd_factor(cov)?;
        let zero = factor.as_slice().iter().all(|v| *v == 0.0);
        Ok(GaussianFactor { factor, zero })
    }

    pub fn dim(&self) -> usize {
        self.factor.rows()
    }

    /// Zero-mean draw. Always consumes `dim` normals so streams stay aligned.
    pub fn sample(&self, rng: &mut RandomSource) -> Matrix {
        let z = rng.normal_matrix(self.dim(), 1);
        if self.zero {
            return Matrix::zeros(self.dim(), 1);
        }
        &self.factor * &z
    }
}

/// One draw from `N(mean, cov)`.
pub fn sample_gaussian(rng: &mut RandomSource, mean: &Matrix, cov: &Matrix) -> Result<Matrix> {
    if mean.cols() != 1 || cov.shape() != (mean.rows(), mean.rows()) {
        return Err(Error::dims("sample_gaussian", (mean.rows(), mean.rows()), cov.shape()));
    }
    let noise = GaussianFactor::new(cov)?.sample(rng);
    Ok(mean + &noise)
}

/// Matrix with i.i.d. Rayleigh(`scale`) entries.
pub fn sample_rayleigh_matrix(rng: &mut RandomSource, scale: f64, rows: usize, cols: usize) -> Result<Matrix> {
    if !(scale >= 0.0) || !scale.is_finite() {
        return Err(Error::invalid(alloc::format!(
            "Rayleigh scale must be >= 0, got {scale}"
        )));
    }
    if scale == 0.0 {
        return Ok(Matrix::zeros(rows, cols));
    }
    // Rayleigh(σ) is Weibull with shape 2 and scale σ√2.
    let dist = Weibull::new(scale * core::f64::consts::SQRT_2, 2.0)
        .map_err(|e| Error::invalid(alloc::format!("Rayleigh: {e}")))?;
    Ok(Matrix::from_fn(rows, cols, |_, _| dist.sample(&mut rng.rng)))
}

pub fn sample_bernoulli_vector(rng: &mut RandomSource, p: f64, m: usize) -> Result<Vec<bool>> {
    let dist = Bernoulli::new(p).map_err(|_| Error::invalid(alloc::format!("probability {p} outside [0, 1]")))?;
    Ok((0..m).map(|_| dist.sample(&mut rng.rng)).collect())
}
