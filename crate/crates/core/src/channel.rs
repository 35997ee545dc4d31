//! MIMO fading channel: realizations, analog aggregation, least-squares
//! pilot estimation and transmit-scale calibration.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numerics::{sample_rayleigh_matrix, solve_linear, Matrix, RandomSource};
use crate::plant::{raw_signal, ActivationModel, PlantModel, SensorTopology};

/// Distribution of every entry of `H_m(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ElementDistribution {
    Rayleigh { scale: f64 },
    Gaussian { mean: f64, variance: f64 },
}

impl ElementDistribution {
    pub fn mean(&self) -> f64 {
        match *self {
            ElementDistribution::Rayleigh { scale } => scale * libm::sqrt(core::f64::consts::FRAC_PI_2),
            ElementDistribution::Gaussian { mean, .. } => mean,
        }
    }

    pub fn second_moment(&self) -> f64 {
        match *self {
            ElementDistribution::Rayleigh { scale } => 2.0 * scale * scale,
            ElementDistribution::Gaussian { mean, variance } => variance + mean * mean,
        }
    }

    fn sample(&self, rng: &mut RandomSource, rows: usize, cols: usize) -> Result<Matrix> {
        match *self {
            ElementDistribution::Rayleigh { scale } => sample_rayleigh_matrix(rng, scale, rows, cols),
            ElementDistribution::Gaussian { mean, variance } => {
                let sd = libm::sqrt(variance);
                Ok(Matrix::from_fn(rows, cols, |_, _| mean + sd * rng.standard_normal()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    n_r: usize,
    n_t: usize,
    element_dist: ElementDistribution,
    snr_db: f64,
    tx_scale: f64,
}

impl ChannelModel {
    /// New model with `tx_scale = 1`; call [`calibrate_tx_scale`] to set it.
    pub fn new(n_r: usize, n_t: usize, element_dist: ElementDistribution, snr_db: f64) -> Result<Self> {
        if n_r == 0 || n_t == 0 {
            return Err(Error::invalid("antenna counts must be positive"));
        }
        match element_dist {
            ElementDistribution::Rayleigh { scale } if !(scale >= 0.0 && scale.is_finite()) => {
                return Err(Error::invalid(alloc::format!(
                    "Rayleigh scale must be >= 0, got {scale}"
                )))
            }
            ElementDistribution::Gaussian { mean, variance }
                if !(variance > 0.0 && variance.is_finite() && mean.is_finite()) =>
            {
                return Err(Error::invalid(alloc::format!(
                    "Gaussian channel needs finite mean and variance > 0, got {variance}"
                )))
            }
            _ => {}
        }
        if !snr_db.is_finite() {
            return Err(Error::invalid("SNR must be finite"));
        }
        Ok(ChannelModel {
            n_r,
            n_t,
            element_dist,
            snr_db,
            tx_scale: 1.0,
        })
    }

    pub fn with_tx_scale(mut self, tx_scale: f64) -> Result<Self> {
        if !(tx_scale > 0.0 && tx_scale.is_finite()) {
            return Err(Error::invalid(alloc::format!(
                "tx_scale must be positive, got {tx_scale}"
            )));
        }
        self.tx_scale = tx_scale;
        Ok(self)
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn element_dist(&self) -> ElementDistribution {
        self.element_dist
    }

    pub fn snr_db(&self) -> f64 {
        self.snr_db
    }

    pub fn tx_scale(&self) -> f64 {
        self.tx_scale
    }
}

/// Per-sensor channel gains `H_m(t)` for one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h_mats: Vec<Matrix>,
}

impl ChannelRealization {
    pub fn sensors(&self) -> usize {
        self.h_mats.len()
    }
}

pub fn sample_channels(model: &ChannelModel, m_sensors: usize, rng: &mut RandomSource) -> Result<ChannelRealization> {
    if m_sensors == 0 {
        return Err(Error::invalid("need at least one sensor"));
    }
    let h_mats = (0..m_sensors)
        .map(|_| model.element_dist.sample(rng, model.n_r, model.n_t))
        .collect::<Result<Vec<_>>>()?;
    Ok(ChannelRealization { h_mats })
}

/// Receiver noise `v(t) ~ N(0, I_{N_r})`.
pub fn sample_receiver_noise(n_r: usize, rng: &mut RandomSource) -> Matrix {
    rng.normal_matrix(n_r, 1)
}

fn check_lengths(op: &'static str, real: &ChannelRealization, activations: &[bool], others: usize) -> Result<()> {
    let m = real.sensors();
    if activations.len() != m || others != m {
        return Err(Error::DimensionMismatch {
            op,
            expected: alloc::format!("{m} sensors"),
            got: alloc::format!("{} activations, {} entries", activations.len(), others),
        });
    }
    Ok(())
}

/// `y = Σ_m δ_m H_m (β s_m) + v` with the receiver noise supplied by the caller.
pub fn aggregate(
    real: &ChannelRealization,
    activations: &[bool],
    signals: &[Matrix],
    tx_scale: f64,
    noise: &Matrix,
) -> Result<Matrix> {
    check_lengths("aggregate", real, activations, signals.len())?;
    let n_r = real.h_mats.first().map_or(0, Matrix::rows);
    if noise.shape() != (n_r, 1) {
        return Err(Error::dims("aggregate noise", (n_r, 1), noise.shape()));
    }
    let mut y = noise.clone();
    for ((h, s), _) in real.h_mats.iter().zip(signals).zip(activations).filter(|(_, on)| **on) {
        if s.shape() != (h.cols(), 1) {
            return Err(Error::dims("aggregate signal", (h.cols(), 1), s.shape()));
        }
        y.add_scaled(tx_scale, &(h * s));
    }
    Ok(y)
}

/// [`aggregate`] with freshly drawn receiver noise.
pub fn aggregate_noisy(
    real: &ChannelRealization,
    activations: &[bool],
    signals: &[Matrix],
    tx_scale: f64,
    rng: &mut RandomSource,
) -> Result<Matrix> {
    let n_r = real.h_mats.first().map_or(0, Matrix::rows);
    let noise = sample_receiver_noise(n_r, rng);
    aggregate(real, activations, signals, tx_scale, &noise)
}

/// The effective CSI `H(t) = Σ_m δ_m β H_m C_m`.
pub fn effective_csi(
    real: &ChannelRealization,
    activations: &[bool],
    topology: &SensorTopology,
    tx_scale: f64,
) -> Result<Matrix> {
    effective_csi_from(&real.h_mats, activations, topology, tx_scale)
}

/// [`effective_csi`] over an arbitrary gain list, e.g. LS estimates.
pub fn effective_csi_from(
    h_mats: &[Matrix],
    activations: &[bool],
    topology: &SensorTopology,
    tx_scale: f64,
) -> Result<Matrix> {
    let m = topology.sensors();
    if h_mats.len() != m || activations.len() != m {
        return Err(Error::DimensionMismatch {
            op: "effective_csi",
            expected: alloc::format!("{m} sensors"),
            got: alloc::format!("{} gains, {} activations", h_mats.len(), activations.len()),
        });
    }
    let n_r = h_mats[0].rows();
    let mut h = Matrix::zeros(n_r, topology.state_dim());
    for ((hm, c), _) in h_mats
        .iter()
        .zip(topology.matrices())
        .zip(activations)
        .filter(|(_, on)| **on)
    {
        if hm.shape() != (n_r, c.rows()) {
            return Err(Error::dims("effective_csi gain", (n_r, c.rows()), hm.shape()));
        }
        h.add_scaled(tx_scale, &(hm * c));
    }
    Ok(h)
}

/// Dedicated per-sensor pilots `T_m`, each `N_t × N_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotScheme {
    pilot_mats: Vec<Matrix>,
}

impl PilotScheme {
    pub fn new(pilot_mats: Vec<Matrix>) -> Result<Self> {
        let first = pilot_mats
            .first()
            .ok_or_else(|| Error::invalid("pilot scheme needs at least one sensor"))?;
        if !first.is_square() {
            return Err(Error::invalid("pilot matrices must be square"));
        }
        for t in &pilot_mats {
            if t.shape() != first.shape() {
                return Err(Error::dims("pilot scheme", first.shape(), t.shape()));
            }
            // Nonsingularity is checked by the same solve the estimator uses.
            solve_linear(&t.mul_transpose(t), &Matrix::identity(t.rows()))?;
        }
        Ok(PilotScheme { pilot_mats })
    }

    /// `T_m = √power · I_{N_t}` for every sensor.
    pub fn scaled_identity(m_sensors: usize, n_t: usize, power_per_antenna: f64) -> Result<Self> {
        if !(power_per_antenna > 0.0) {
            return Err(Error::invalid("pilot power must be positive"));
        }
        let t = Matrix::identity(n_t).scale(libm::sqrt(power_per_antenna));
        PilotScheme::new(alloc::vec![t; m_sensors])
    }

    pub fn pilot(&self, m: usize) -> &Matrix {
        &self.pilot_mats[m]
    }

    /// Energy `‖T_m‖²_F` spent by sensor `m` on one pilot transmission.
    pub fn energy(&self, m: usize) -> f64 {
        self.pilot_mats[m].sum_of_squares()
    }

    pub fn sensors(&self) -> usize {
        self.pilot_mats.len()
    }
}

/// Least-squares estimate from received pilots `R = H T + V`:
/// `Ĥ = R Tᵀ (T Tᵀ)⁻¹`.
pub fn ls_estimate_from_received(received: &Matrix, pilot: &Matrix) -> Result<Matrix> {
    if received.cols() != pilot.rows() {
        return Err(Error::dims(
            "ls_channel_estimate",
            (received.rows(), pilot.rows()),
            received.shape(),
        ));
    }
    let gram = pilot.mul_transpose(pilot);
    // Ĥ (T Tᵀ) = R Tᵀ  ⇔  (T Tᵀ) Ĥᵀ = T Rᵀ, using symmetry of T Tᵀ.
    let rhs = pilot.mul_transpose(received);
    Ok(solve_linear(&gram, &rhs)?.transpose())
}

/// Pilot reception `H T + V` followed by the LS estimate, with `V` supplied.
pub fn ls_channel_estimate_with_noise(h_true: &Matrix, pilot: &Matrix, noise: &Matrix) -> Result<Matrix> {
    if h_true.cols() != pilot.rows() || !pilot.is_square() {
        return Err(Error::dims(
            "ls_channel_estimate pilot",
            (h_true.cols(), h_true.cols()),
            pilot.shape(),
        ));
    }
    if noise.shape() != (h_true.rows(), pilot.cols()) {
        return Err(Error::dims(
            "ls_channel_estimate noise",
            (h_true.rows(), pilot.cols()),
            noise.shape(),
        ));
    }
    let received = &(h_true * pilot) + noise;
    ls_estimate_from_received(&received, pilot)
}

/// [`ls_channel_estimate_with_noise`] with `V` drawn i.i.d. `N(0, 1)`.
pub fn ls_channel_estimate(h_true: &Matrix, pilot: &Matrix, rng: &mut RandomSource) -> Result<Matrix> {
    let noise = rng.normal_matrix(h_true.rows(), pilot.cols());
    ls_channel_estimate_with_noise(h_true, pilot, &noise)
}

pub fn snr_linear(snr_db: f64) -> f64 {
    libm::pow(10.0, snr_db / 10.0)
}

/// Amplitude scale that moves a measured per-antenna received power to the
/// target SNR (unit noise power): `β = √(target / measured)`.
pub fn tx_scale_for(measured_power: f64, snr_db: f64) -> Result<f64> {
    if !(measured_power > 0.0) || !measured_power.is_finite() {
        return Err(Error::Calibration(alloc::format!(
            "measured received signal power is {measured_power}; cannot scale to a target SNR"
        )));
    }
    Ok(libm::sqrt(snr_linear(snr_db) / measured_power))
}

/// Mean received signal power per receive antenna (noise excluded) over
/// `horizon` slots of raw-measurement analog aggregation from `x₀ = 0`.
pub fn measure_received_power(
    model: &ChannelModel,
    plant: &PlantModel,
    topology: &SensorTopology,
    activation: &ActivationModel,
    horizon: usize,
    tx_scale: f64,
    rng: &mut RandomSource,
) -> Result<f64> {
    if horizon == 0 {
        return Err(Error::invalid("calibration horizon must be at least one slot"));
    }
    if topology.state_dim() != plant.dim() || topology.n_t() != model.n_t {
        return Err(Error::dims(
            "calibrate_tx_scale topology",
            (model.n_t, plant.dim()),
            (topology.n_t(), topology.state_dim()),
        ));
    }
    let m = topology.sensors();
    let mut plant_rng = rng.substream(1);
    let mut act_rng = rng.substream(2);
    let mut chan_rng = rng.substream(3);
    let mut x = Matrix::zeros(plant.dim(), 1);
    let mut total = 0.0;
    let zero_noise = Matrix::zeros(model.n_r, 1);
    for _ in 0..horizon {
        let delta = activation.sample(&mut act_rng, m);
        let real = sample_channels(model, m, &mut chan_rng)?;
        let signals = topology
            .matrices()
            .iter()
            .map(|c| raw_signal(c, &x))
            .collect::<Result<Vec<_>>>()?;
        let received = aggregate(&real, &delta, &signals, tx_scale, &zero_noise)?;
        total += received.sum_of_squares();
        x = plant.a_dyn() * &x;
        x += &plant.sample_noise(&mut plant_rng);
    }
    Ok(total / (horizon as f64 * model.n_r as f64))
}

/// Transmit scale β that puts the raw-measurement received power per antenna
/// at the model's SNR over unit-variance receiver noise.
pub fn calibrate_tx_scale(
    model: &ChannelModel,
    plant: &PlantModel,
    topology: &SensorTopology,
    activation: &ActivationModel,
    horizon: usize,
    rng: &mut RandomSource,
) -> Result<f64> {
    let measured = measure_received_power(model, plant, topology, activation, horizon, 1.0, rng)?;
    tx_scale_for(measured, model.snr_db)
}
