//! Kalman filtering with (possibly mismatched) CSI, and the CSI-free
//! constant-gain estimator together with its error-covariance recursion.
//!
//! The measurement-noise covariance is the identity throughout, matching the
//! unit-variance receiver noise of the aggregation channel.

use crate::error::{Error, Result};
use crate::numerics::{clamp_psd, solve_linear, Matrix};
use crate::plant::PlantModel;

/// Estimator state at slot `t`: posterior and prior estimates and covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub t: u64,
    pub x_est: Matrix,
    pub x_pred: Matrix,
    pub p_est: Matrix,
    pub p_pred: Matrix,
}

impl FilterState {
    /// State at slot 0 holding only the prior; the posterior mirrors it until
    /// the first update.
    pub fn new(x_pred: Matrix, p_pred: Matrix) -> Result<Self> {
        let s = x_pred.rows();
        if x_pred.cols() != 1 || p_pred.shape() != (s, s) {
            return Err(Error::dims("FilterState", (s, s), p_pred.shape()));
        }
        Ok(FilterState {
            t: 0,
            x_est: x_pred.clone(),
            x_pred,
            p_est: p_pred.clone(),
            p_pred,
        })
    }

    pub fn dim(&self) -> usize {
        self.x_pred.rows()
    }

    /// Projects both covariances onto the PSD cone, failing if either has an
    /// eigenvalue below `-tolerance`.
    pub fn enforce_psd(&mut self, tolerance: f64) -> Result<()> {
        self.p_est = clamp_psd(&self.p_est, tolerance)?;
        self.p_pred = clamp_psd(&self.p_pred, tolerance)?;
        Ok(())
    }
}

/// The fixed filtering gain `K`, `S × N_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantGain {
    k: Matrix,
}

impl ConstantGain {
    pub fn new(k: Matrix) -> Result<Self> {
        k.ensure_finite("ConstantGain")?;
        Ok(ConstantGain { k })
    }

    pub fn zeros(s: usize, n_r: usize) -> Self {
        ConstantGain {
            k: Matrix::zeros(s, n_r),
        }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.k
    }

    pub fn into_matrix(self) -> Matrix {
        self.k
    }
}

/// `Π(t) = y(t) − H(t) x̂ᶠ(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Innovation {
    pub value: Matrix,
}

pub fn innovation(y: &Matrix, h_eff: &Matrix, x_pred: &Matrix) -> Result<Innovation> {
    if h_eff.cols() != x_pred.rows() || x_pred.cols() != 1 {
        return Err(Error::dims("innovation prediction", (h_eff.cols(), 1), x_pred.shape()));
    }
    if y.shape() != (h_eff.rows(), 1) {
        return Err(Error::dims("innovation measurement", (h_eff.rows(), 1), y.shape()));
    }
    Ok(Innovation {
        value: y - &(h_eff * x_pred),
    })
}

fn check_plant(op: &'static str, plant: &PlantModel, s: usize) -> Result<()> {
    if plant.dim() != s {
        return Err(Error::dims(op, (plant.dim(), plant.dim()), (s, s)));
    }
    Ok(())
}

fn check_csi(op: &'static str, h_eff: &Matrix, s: usize) -> Result<()> {
    if h_eff.cols() != s {
        return Err(Error::dims(op, (h_eff.rows(), s), h_eff.shape()));
    }
    Ok(())
}

/// `x̂ᶠ = A x̂`, `Pᶠ = A P Aᵀ + W`, advancing to the next slot.
pub fn kalman_predict(fs: &FilterState, plant: &PlantModel) -> Result<FilterState> {
    check_plant("kalman_predict", plant, fs.dim())?;
    let a = plant.a_dyn();
    let x_pred = a * &fs.x_est;
    let mut p_pred = (a * &fs.p_est).mul_transpose(a);
    p_pred += plant.w_cov();
    p_pred.symmetrize();
    Ok(FilterState {
        t: fs.t + 1,
        x_est: fs.x_est.clone(),
        x_pred,
        p_est: fs.p_est.clone(),
        p_pred,
    })
}

/// `K(t) = Pᶠ Hᵀ (H Pᶠ Hᵀ + I)⁻¹`.
pub fn kalman_gain(p_pred: &Matrix, h_eff: &Matrix) -> Result<Matrix> {
    if !p_pred.is_square() {
        return Err(Error::invalid("kalman_gain: covariance must be square"));
    }
    check_csi("kalman_gain", h_eff, p_pred.rows())?;
    let hp = h_eff * p_pred;
    gain_from_hp(&hp, h_eff)
}

fn gain_from_hp(hp: &Matrix, h_eff: &Matrix) -> Result<Matrix> {
    let mut inner = hp.mul_transpose(h_eff);
    inner += &Matrix::identity(h_eff.rows());
    inner.symmetrize();
    // K = (S⁻¹ H Pᶠ)ᵀ with S symmetric.
    Ok(solve_linear(&inner, hp)?.transpose())
}

/// `(I − K H) P (I − K H)ᵀ + K Kᵀ`, evaluated in `O(S² N_r)` by expanding
/// the product around the rank-`N_r` correction `K H`.
pub fn joseph_covariance(p: &Matrix, k: &Matrix, h_eff: &Matrix) -> Matrix {
    let hp = h_eff * p;
    joseph_from_hp(p, &hp, k, h_eff)
}

fn joseph_from_hp(p: &Matrix, hp: &Matrix, k: &Matrix, h_eff: &Matrix) -> Matrix {
    let khp = k * hp;
    let mut inner = hp.mul_transpose(h_eff);
    inner += &Matrix::identity(h_eff.rows());
    let mut out = (k * &inner).mul_transpose(k);
    out += p;
    out -= &khp;
    out -= &khp.transpose();
    out.symmetrize();
    out
}

/// Measurement update with the Kalman gain for `h_eff` and the covariance
/// in the Joseph form.
pub fn kalman_update(fs: &FilterState, y: &Matrix, h_eff: &Matrix) -> Result<FilterState> {
    check_csi("kalman_update", h_eff, fs.dim())?;
    let innov = innovation(y, h_eff, &fs.x_pred)?;
    let hp = h_eff * &fs.p_pred;
    let k = gain_from_hp(&hp, h_eff)?;
    let mut x_est = fs.x_pred.clone();
    x_est += &(&k * &innov.value);
    let p_est = joseph_from_hp(&fs.p_pred, &hp, &k, h_eff);
    Ok(FilterState {
        t: fs.t,
        x_est,
        x_pred: fs.x_pred.clone(),
        p_est,
        p_pred: fs.p_pred.clone(),
    })
}

/// A slot without usable data: the posterior equals the prior.
pub fn skip_update(fs: &FilterState) -> FilterState {
    FilterState {
        t: fs.t,
        x_est: fs.x_pred.clone(),
        x_pred: fs.x_pred.clone(),
        p_est: fs.p_pred.clone(),
        p_pred: fs.p_pred.clone(),
    }
}

/// `x̂ = x̂ᶠ + K y`.
pub fn constant_gain_update(x_pred: &Matrix, y: &Matrix, gain: &ConstantGain) -> Result<Matrix> {
    let k = gain.matrix();
    if x_pred.shape() != (k.rows(), 1) {
        return Err(Error::dims(
            "constant_gain_update prediction",
            (k.rows(), 1),
            x_pred.shape(),
        ));
    }
    if y.shape() != (k.cols(), 1) {
        return Err(Error::dims("constant_gain_update signal", (k.cols(), 1), y.shape()));
    }
    let mut x = x_pred.clone();
    x += &(k * y);
    Ok(x)
}

/// `x̂ᶠ(t+1) = A x̂(t)`.
pub fn constant_gain_predict(x_est: &Matrix, plant: &PlantModel) -> Result<Matrix> {
    if x_est.shape() != (plant.dim(), 1) {
        return Err(Error::dims("constant_gain_predict", (plant.dim(), 1), x_est.shape()));
    }
    Ok(plant.a_dyn() * x_est)
}

/// Prior-covariance recursion of the constant-gain estimator:
/// `Pᶠ(t+1) = A[(I − K H) Pᶠ (I − K H)ᵀ + K Kᵀ]Aᵀ + W`.
pub fn constant_gain_cov_step(
    p_pred: &Matrix,
    gain: &ConstantGain,
    h_eff: &Matrix,
    plant: &PlantModel,
) -> Result<Matrix> {
    let s = plant.dim();
    if p_pred.shape() != (s, s) {
        return Err(Error::dims("constant_gain_cov_step covariance", (s, s), p_pred.shape()));
    }
    let k = gain.matrix();
    if k.rows() != s || h_eff.shape() != (k.cols(), s) {
        return Err(Error::dims("constant_gain_cov_step csi", (k.cols(), s), h_eff.shape()));
    }
    let post = joseph_covariance(p_pred, k, h_eff);
    let a = plant.a_dyn();
    let mut next = (a * &post).mul_transpose(a);
    next += plant.w_cov();
    next.symmetrize();
    Ok(next)
}
