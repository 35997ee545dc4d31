//! Linear plant, sensor topology, activation and signal extraction.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numerics::{sample_bernoulli_vector, GaussianFactor, Matrix, RandomSource};

/// `x(t+1) = A x(t) + w(t)`, `w ~ N(0, W)`.
#[derive(Debug, Clone)]
pub struct PlantModel {
    a_dyn: Matrix,
    w_cov: Matrix,
    x0: Matrix,
    noise: GaussianFactor,
}

impl PlantModel {
    pub fn new(a_dyn: Matrix, w_cov: Matrix, x0: Matrix) -> Result<Self> {
        if !a_dyn.is_square() || a_dyn.is_empty() {
            return Err(Error::invalid("plant dynamics must be a non-empty square matrix"));
        }
        let s = a_dyn.rows();
        if w_cov.shape() != (s, s) {
            return Err(Error::dims("plant noise covariance", (s, s), w_cov.shape()));
        }
        if x0.shape() != (s, 1) {
            return Err(Error::dims("plant initial state", (s, 1), x0.shape()));
        }
        a_dyn.ensure_finite("plant dynamics")?;
        x0.ensure_finite("plant initial state")?;
        let noise = GaussianFactor::new(&w_cov)?;
        Ok(PlantModel {
            a_dyn,
            w_cov,
            x0,
            noise,
        })
    }

    /// The three-state benchmark plant with `W = I₃` and `x₀ = 0`.
    pub fn eq22() -> Self {
        let a = Matrix::from_rows(&[&[1.01, 0.05, 0.01], &[0.02, 0.98, 0.01], &[0.003, 0.002, 0.98]])
            .expect("constant matrix");
        PlantModel::new(a, Matrix::identity(3), Matrix::zeros(3, 1)).expect("constant plant")
    }

    pub fn dim(&self) -> usize {
        self.a_dyn.rows()
    }

    pub fn a_dyn(&self) -> &Matrix {
        &self.a_dyn
    }

    pub fn w_cov(&self) -> &Matrix {
        &self.w_cov
    }

    pub fn x0(&self) -> &Matrix {
        &self.x0
    }

    pub fn initial_state(&self) -> PlantState {
        PlantState {
            t: 0,
            x: self.x0.clone(),
        }
    }

    pub fn sample_noise(&self, rng: &mut RandomSource) -> Matrix {
        self.noise.sample(rng)
    }

    /// Same plant with a different initial state.
    pub fn with_x0(&self, x0: Matrix) -> Result<Self> {
        PlantModel::new(self.a_dyn.clone(), self.w_cov.clone(), x0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    pub t: u64,
    pub x: Matrix,
}

pub fn plant_step(state: &PlantState, model: &PlantModel, rng: &mut RandomSource) -> Result<PlantState> {
    if state.x.shape() != (model.dim(), 1) {
        return Err(Error::dims("plant_step", (model.dim(), 1), state.x.shape()));
    }
    let mut x = model.a_dyn() * &state.x;
    x += &model.sample_noise(rng);
    Ok(PlantState { t: state.t + 1, x })
}

/// The connection matrices `C_1 … C_M`, each `N_t × S`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorTopology {
    c_mats: Vec<Matrix>,
}

impl SensorTopology {
    pub fn new(c_mats: Vec<Matrix>) -> Result<Self> {
        let first = c_mats
            .first()
            .ok_or_else(|| Error::invalid("topology needs at least one sensor"))?;
        let shape = first.shape();
        if shape.0 == 0 || shape.1 == 0 {
            return Err(Error::invalid("connection matrices must be non-empty"));
        }
        if let Some(bad) = c_mats.iter().find(|c| c.shape() != shape) {
            return Err(Error::dims("sensor topology", shape, bad.shape()));
        }
        for c in &c_mats {
            c.ensure_finite("sensor topology")?;
        }
        Ok(SensorTopology { c_mats })
    }

    /// Sensor `m` (1-based) observes state `((m − 1) mod s_dim) + 1` in every
    /// one of its `n_t` outputs, with weight `gain`.
    pub fn sequential(m_sensors: usize, s_dim: usize, n_t: usize, gain: f64) -> Result<Self> {
        if m_sensors == 0 || s_dim == 0 || n_t == 0 {
            return Err(Error::invalid("sequential topology needs positive dimensions"));
        }
        let c_mats = (0..m_sensors)
            .map(|m| Matrix::from_fn(n_t, s_dim, |_, j| if j == m % s_dim { gain } else { 0.0 }))
            .collect();
        SensorTopology::new(c_mats)
    }

    /// Connection matrices with i.i.d. standard-normal entries.
    pub fn gaussian(m_sensors: usize, s_dim: usize, n_t: usize, rng: &mut RandomSource) -> Result<Self> {
        if m_sensors == 0 || s_dim == 0 || n_t == 0 {
            return Err(Error::invalid("gaussian topology needs positive dimensions"));
        }
        SensorTopology::new((0..m_sensors).map(|_| rng.normal_matrix(n_t, s_dim)).collect())
    }

    pub fn sensors(&self) -> usize {
        self.c_mats.len()
    }

    pub fn n_t(&self) -> usize {
        self.c_mats[0].rows()
    }

    pub fn state_dim(&self) -> usize {
        self.c_mats[0].cols()
    }

    pub fn matrices(&self) -> &[Matrix] {
        &self.c_mats
    }

    pub fn get(&self, m: usize) -> &Matrix {
        &self.c_mats[m]
    }
}

/// Each sensor is independently active with probability `p` in every slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivationModel {
    p: f64,
}

impl ActivationModel {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(alloc::format!(
                "activation probability {p} outside [0, 1]"
            )));
        }
        Ok(ActivationModel { p })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn sample(&self, rng: &mut RandomSource, m_sensors: usize) -> Vec<bool> {
        sample_bernoulli_vector(rng, self.p, m_sensors).expect("p validated at construction")
    }
}

/// The innovation-carrying signal `C_m (x − x̂ᶠ)`.
pub fn semantic_signal(c_m: &Matrix, x: &Matrix, x_pred: &Matrix) -> Result<Matrix> {
    if x.shape() != (c_m.cols(), 1) {
        return Err(Error::dims("semantic_signal state", (c_m.cols(), 1), x.shape()));
    }
    if x_pred.shape() != x.shape() {
        return Err(Error::dims("semantic_signal prediction", x.shape(), x_pred.shape()));
    }
    // Difference of the two measurements, so it matches raw_signal bit for bit.
    Ok(&(c_m * x) - &(c_m * x_pred))
}

/// The raw measurement `C_m x` sent by the baseline schemes.
pub fn raw_signal(c_m: &Matrix, x: &Matrix) -> Result<Matrix> {
    if x.shape() != (c_m.cols(), 1) {
        return Err(Error::dims("raw_signal", (c_m.cols(), 1), x.shape()));
    }
    Ok(c_m * x)
}

/// `Σ ‖s_m‖² + pilot_power`.
pub fn signal_power(signals: &[Matrix], pilot_power: f64) -> f64 {
    signals.iter().map(Matrix::sum_of_squares).sum::<f64>() + pilot_power
}
