use alloc::vec::Vec;

use crate::channel::{effective_csi, sample_channels, ChannelModel};
use crate::error::{Error, Result};
use crate::numerics::{spectral_norm, svd, Matrix, RandomSource};
use crate::plant::{ActivationModel, PlantModel, SensorTopology};

/// One draw of the effective CSI `H = Σ δ_m β H_m C_m`, activation first.
pub fn sample_effective_channel(
    channel: &ChannelModel,
    topology: &SensorTopology,
    activation: &ActivationModel,
    rng: &mut RandomSource,
) -> Result<Matrix> {
    let m = topology.sensors();
    let delta = activation.sample(rng, m);
    let real = sample_channels(channel, m, rng)?;
    effective_csi(&real, &delta, topology, channel.tx_scale())
}

/// `‖I − K H‖²_F`.
pub fn contraction_sample(k: &Matrix, h_eff: &Matrix) -> Result<f64> {
    let s = k.rows();
    if h_eff.shape() != (k.cols(), s) {
        return Err(Error::dims("contraction_sample", (k.cols(), s), h_eff.shape()));
    }
    let mut e = Matrix::identity(s);
    e -= &(k * h_eff);
    Ok(e.sum_of_squares())
}

fn check_gain(op: &'static str, k: &Matrix, channel: &ChannelModel, topology: &SensorTopology) -> Result<()> {
    let want = (topology.state_dim(), channel.n_r());
    if k.shape() != want {
        return Err(Error::dims(op, want, k.shape()));
    }
    if topology.n_t() != channel.n_t() {
        return Err(Error::dims(
            op,
            (channel.n_r(), channel.n_t()),
            (channel.n_r(), topology.n_t()),
        ));
    }
    Ok(())
}

// Welford accumulator; returns (mean, standard error of the mean).
fn mean_and_std_err(n: usize, mut draw: impl FnMut() -> Result<f64>) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::invalid("need at least one Monte-Carlo sample"));
    }
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for i in 0..n {
        let v = draw()?;
        let d = v - mean;
        mean += d / (i + 1) as f64;
        m2 += d * (v - mean);
    }
    let std_err = if n > 1 {
        libm::sqrt(m2 / ((n - 1) as f64) / n as f64)
    } else {
        f64::INFINITY
    };
    Ok((mean, std_err))
}

/// Monte-Carlo estimate of `E‖I − K H‖²_F` with its standard error.
/// A single sample has infinite standard error.
pub fn estimate_contraction(
    k: &Matrix,
    channel: &ChannelModel,
    topology: &SensorTopology,
    activation: &ActivationModel,
    n_samples: usize,
    rng: &mut RandomSource,
) -> Result<(f64, f64)> {
    check_gain("estimate_contraction", k, channel, topology)?;
    mean_and_std_err(n_samples, || {
        let h = sample_effective_channel(channel, topology, activation, rng)?;
        contraction_sample(k, &h)
    })
}

/// Monte-Carlo estimate of `E‖A(I − K H)‖²_F`, the expectation in the drift bound.
pub fn estimate_drift_contraction(
    k: &Matrix,
    plant: &PlantModel,
    channel: &ChannelModel,
    topology: &SensorTopology,
    activation: &ActivationModel,
    n_samples: usize,
    rng: &mut RandomSource,
) -> Result<(f64, f64)> {
    check_gain("estimate_drift_contraction", k, channel, topology)?;
    let s = plant.dim();
    mean_and_std_err(n_samples, || {
        let h = sample_effective_channel(channel, topology, activation, rng)?;
        let mut e = Matrix::identity(s);
        e -= &(k * &h);
        Ok((plant.a_dyn() * &e).sum_of_squares())
    })
}

/// Upper bound on the one-step drift `E[Tr Pᶠ(t+1)] − Tr Pᶠ(t)`:
/// `N_r‖A‖²‖K‖² + Tr W + (c − 1) Tr Pᶠ`, with `c` the expectation of
/// `‖A(I − K H)‖²_F` and spectral norms throughout.
pub fn drift_bound(
    p_pred_trace: f64,
    k: &Matrix,
    plant: &PlantModel,
    n_r: usize,
    contraction_like: f64,
) -> Result<f64> {
    if k.rows() != plant.dim() || k.cols() != n_r {
        return Err(Error::dims("drift_bound", (plant.dim(), n_r), k.shape()));
    }
    let a = spectral_norm(plant.a_dyn())?;
    let kn = spectral_norm(k)?;
    Ok(n_r as f64 * a * a * kn * kn + plant.w_cov().trace() + (contraction_like - 1.0) * p_pred_trace)
}

/// Stability verdict for a constant gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    pub contraction: f64,
    pub std_err: f64,
    /// `1/‖A‖²`.
    pub threshold: f64,
    pub stable: bool,
    /// Steady-state bound on `Tr Pᶠ`; infinite unless strictly stable.
    pub mse_bound: f64,
}

impl StabilityReport {
    pub fn from_contraction(contraction: f64, std_err: f64, k: &Matrix, plant: &PlantModel) -> Result<Self> {
        let a = spectral_norm(plant.a_dyn())?;
        let a_sq = a * a;
        let threshold = 1.0 / a_sq;
        let stable = contraction <= threshold;
        let mse_bound = if contraction < threshold {
            let denom = 1.0 - a_sq * contraction;
            if denom > 0.0 {
                let kn = if k.is_empty() { 0.0 } else { spectral_norm(k)? };
                (plant.w_cov().trace() + k.cols() as f64 * a_sq * kn * kn) / denom
            } else {
                f64::INFINITY
            }
        } else {
            f64::INFINITY
        };
        Ok(StabilityReport {
            contraction,
            std_err,
            threshold,
            stable,
            mse_bound,
        })
    }
}

pub fn stability_report(
    k: &Matrix,
    plant: &PlantModel,
    channel: &ChannelModel,
    topology: &SensorTopology,
    activation: &ActivationModel,
    n_samples: usize,
    rng: &mut RandomSource,
) -> Result<StabilityReport> {
    if topology.state_dim() != plant.dim() {
        return Err(Error::dims(
            "stability_report",
            (plant.dim(), plant.dim()),
            (topology.state_dim(), topology.state_dim()),
        ));
    }
    let (c, se) = estimate_contraction(k, channel, topology, activation, n_samples, rng)?;
    StabilityReport::from_contraction(c, se, k, plant)
}

/// Sampled objective values and gradients at one gain.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleEvaluation {
    pub f0: f64,
    pub g0: Matrix,
    pub f1: f64,
    pub g1: Matrix,
    /// Relative gap between the two largest singular values of `K`; the
    /// spectral-norm gradient is ambiguous when this is near zero.
    pub sigma_gap: f64,
}

/// The sampled objectives with the plant constants `‖A‖²` and `Tr W` cached.
#[derive(Debug, Clone)]
pub struct SampledObjective {
    a_sq: f64,
    trace_w: f64,
    s: usize,
    n_r: usize,
}

impl SampledObjective {
    pub fn new(plant: &PlantModel, n_r: usize) -> Result<Self> {
        if n_r == 0 {
            return Err(Error::invalid("receiver needs at least one antenna"));
        }
        let trace_w = plant.w_cov().trace();
        if !(trace_w > 0.0) {
            return Err(Error::invalid("the MSE-bound objective needs Tr(W) > 0"));
        }
        let a = spectral_norm(plant.a_dyn())?;
        Ok(SampledObjective {
            a_sq: a * a,
            trace_w,
            s: plant.dim(),
            n_r,
        })
    }

    pub fn a_sq(&self) -> f64 {
        self.a_sq
    }

    /// Sample mean of values and gradients over `h_samples`.
    pub fn evaluate_batch(&self, k: &Matrix, h_samples: &[Matrix]) -> Result<SampleEvaluation> {
        if k.shape() != (self.s, self.n_r) {
            return Err(Error::dims("sampled objective gain", (self.s, self.n_r), k.shape()));
        }
        if h_samples.is_empty() {
            return Err(Error::invalid("sampled objective needs at least one channel sample"));
        }
        k.ensure_finite("sampled objective gain")?;
        let dec = svd(k);
        let (sigma1, u1, v1) = dec.top();
        let sigma_gap = dec.top_gap();
        // ∇‖K‖²_sp = 2σ₁u₁v₁ᵀ, scaled by the denominator's N_r‖A‖².
        let mut d_den = u1.mul_transpose(&v1);
        d_den.scale_in_place(2.0 * sigma1 * self.n_r as f64 * self.a_sq);
        let den = self.trace_w + self.n_r as f64 * self.a_sq * sigma1 * sigma1;

        let mut out = SampleEvaluation {
            f0: 0.0,
            g0: Matrix::zeros(self.s, self.n_r),
            f1: 0.0,
            g1: Matrix::zeros(self.s, self.n_r),
            sigma_gap,
        };
        let inv_n = 1.0 / h_samples.len() as f64;
        for h in h_samples {
            if h.shape() != (self.n_r, self.s) {
                return Err(Error::dims("sampled objective channel", (self.n_r, self.s), h.shape()));
            }
            let mut e = Matrix::identity(self.s);
            e -= &(k * h);
            let q = e.sum_of_squares();
            // −∇‖I − KH‖²_F
            let mut descent = e.mul_transpose(h);
            descent.scale_in_place(2.0);

            let num = 1.0 - self.a_sq * q;
            out.f0 += inv_n * num / den;
            out.g0.add_scaled(inv_n * self.a_sq / den, &descent);
            out.g0.add_scaled(-inv_n * num / (den * den), &d_den);

            out.f1 += inv_n * (1.0 / self.a_sq - q);
            out.g1.add_scaled(inv_n, &descent);
        }
        Ok(out)
    }

    pub fn evaluate(&self, k: &Matrix, h_sample: &Matrix) -> Result<SampleEvaluation> {
        self.evaluate_batch(k, core::slice::from_ref(h_sample))
    }
}

/// `f₀, ∇f₀, f₁, ∇f₁` for a single effective-CSI realization.
pub fn sample_value_and_grads(k: &Matrix, plant: &PlantModel, h_sample: &Matrix) -> Result<SampleEvaluation> {
    SampledObjective::new(plant, h_sample.rows())?.evaluate(k, h_sample)
}

pub(crate) fn sample_batch(
    channel: &ChannelModel,
    topology: &SensorTopology,
    activation: &ActivationModel,
    n: usize,
    rng: &mut RandomSource,
) -> Result<Vec<Matrix>> {
    (0..n)
        .map(|_| sample_effective_channel(channel, topology, activation, rng))
        .collect()
}
