//! Dense real matrices, the handful of factorizations the filters need, and
//! seeded sampling.

mod linalg;
mod matrix;
mod random;

pub use linalg::{
    clamp_psd, frobenius_norm, inverse, psd_factor, solve_linear, spectral_norm, svd, symmetric_eigen, Svd,
    MAX_CONDITION, PSD_TOLERANCE,
};
pub use matrix::Matrix;
pub use random::{sample_bernoulli_vector, sample_gaussian, sample_rayleigh_matrix, GaussianFactor, RandomSource};
