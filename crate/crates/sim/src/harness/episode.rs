use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use semagg_core::channel::{
    aggregate, ls_channel_estimate_with_noise, sample_channels, sample_receiver_noise, ChannelModel, PilotScheme,
};
use semagg_core::estimation::{
    constant_gain_predict, constant_gain_update, kalman_predict, kalman_update, ConstantGain, FilterState,
};
use semagg_core::numerics::sample_gaussian;
use semagg_core::plant::{plant_step, raw_signal, semantic_signal, ActivationModel, PlantModel, SensorTopology};
use semagg_core::{Matrix, RandomSource};

use crate::error::{Result, SimError};

// Substream ids under a run seed. Every stream is advanced identically for
// all schemes so that matched seeds see matched realizations.
const STREAM_PLANT: u64 = 1;
const STREAM_ACTIVATION: u64 = 2;
const STREAM_CHANNEL: u64 = 3;
const STREAM_RX_NOISE: u64 = 4;
const STREAM_PILOT_NOISE: u64 = 5;
const STREAM_SCHEDULE: u64 = 6;
const STREAM_INIT: u64 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    /// Semantic analog aggregation with a constant gain.
    Proposed,
    /// Random access; only collision-free slots deliver data.
    Aloha,
    /// One uniformly scheduled sensor per slot.
    RandomTdma,
    /// Raw-measurement analog aggregation with LS-estimated CSI.
    AnalogAggregation,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [
        Scheme::Proposed,
        Scheme::Aloha,
        Scheme::RandomTdma,
        Scheme::AnalogAggregation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::Aloha => "aloha",
            Scheme::RandomTdma => "random_tdma",
            Scheme::AnalogAggregation => "analog_aggregation",
        }
    }

    pub fn uses_pilots(self) -> bool {
        self != Scheme::Proposed
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Scheme::ALL.into_iter().find(|sc| sc.as_str() == s).ok_or_else(|| {
            format!("unknown scheme '{s}' (expected proposed, aloha, random_tdma or analog_aggregation)")
        })
    }
}

/// What the ALOHA receiver does when two or more sensors transmit at once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CollisionPolicy {
    /// The slot is lost; the estimator only predicts.
    #[default]
    Discard,
    /// One of the colliding sensors, chosen uniformly, gets through.
    Capture,
}

impl FromStr for CollisionPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "discard" => Ok(CollisionPolicy::Discard),
            "capture" => Ok(CollisionPolicy::Capture),
            _ => Err(format!("unknown collision policy '{s}' (expected discard or capture)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub plant: PlantModel,
    pub topology: SensorTopology,
    /// Channel with the transmit scale already calibrated.
    pub channel: ChannelModel,
    pub activation: ActivationModel,
    pub horizon: usize,
    pub scheme: Scheme,
    pub gain: Option<ConstantGain>,
    pub pilot: Option<PilotScheme>,
    pub collision: CollisionPolicy,
    /// Covariance of the initial prediction `x̂ᶠ(0)`, also the Kalman `Pᶠ(0)`.
    pub prior_cov: Matrix,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let s = self.plant.dim();
        let bad = |msg: String| Err(SimError::Scenario(msg));
        if self.horizon == 0 {
            return bad("horizon must be at least one slot".into());
        }
        if self.topology.state_dim() != s {
            return bad(format!(
                "topology observes {} states, plant has {s}",
                self.topology.state_dim()
            ));
        }
        if self.topology.n_t() != self.channel.n_t() {
            return bad(format!(
                "sensors output {} values but the channel has {} transmit antennas",
                self.topology.n_t(),
                self.channel.n_t()
            ));
        }
        if self.prior_cov.shape() != (s, s) {
            return bad(format!("prior covariance must be {s}x{s}"));
        }
        match self.scheme {
            Scheme::Proposed => match &self.gain {
                Some(g) if g.matrix().shape() == (s, self.channel.n_r()) => {}
                Some(g) => {
                    return bad(format!(
                        "gain is {:?}, expected {s}x{}",
                        g.matrix().shape(),
                        self.channel.n_r()
                    ))
                }
                None => return bad("the proposed scheme needs a constant gain".into()),
            },
            _ => match &self.pilot {
                Some(p) if p.sensors() == self.topology.sensors() && p.pilot(0).rows() == self.channel.n_t() => {}
                Some(_) => return bad("pilot scheme does not match the sensors or transmit antennas".into()),
                None => return bad(format!("scheme {} needs a pilot scheme", self.scheme)),
            },
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub t: usize,
    pub x: Matrix,
    pub x_pred: Matrix,
    pub x_est: Matrix,
    /// Signal at the receiver antennas, `N_r × 1`.
    pub received: Matrix,
    /// Data plus pilot energy spent by the sensors in this slot.
    pub power: f64,
    pub pilot_energy: f64,
    /// Activation draws, identical across schemes at a given seed.
    pub activations: Vec<bool>,
    /// Sensors that actually transmitted.
    pub transmitters: Vec<usize>,
    pub collision: bool,
    pub h_mats: Vec<Matrix>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSummary {
    pub nmse: f64,
    pub total_power: f64,
    pub total_pilot_energy: f64,
    pub collisions: usize,
    /// Estimator-side computation only.
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub slots: Vec<SlotRecord>,
    /// `power` of every slot, kept even when records are not.
    pub slot_power: Vec<f64>,
    pub summary: EpisodeSummary,
}

impl EpisodeTrace {
    /// Running total of `power` after each slot.
    pub fn cumulative_power(&self) -> Vec<f64> {
        self.slot_power
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect()
    }
}

enum Estimator<'a> {
    Constant { gain: &'a ConstantGain, x_pred: Matrix },
    Kalman { fs: FilterState, pilot: &'a PilotScheme },
}

/// Runs one episode of `horizon` slots.
pub fn run_episode(sc: &Scenario) -> Result<EpisodeTrace> {
    run_episode_with(sc, true)
}

/// As [`run_episode`]; with `record = false` the per-slot records are
/// dropped and only the summary and powers are kept.
pub(crate) fn run_episode_with(sc: &Scenario, record: bool) -> Result<EpisodeTrace> {
    sc.validate()?;
    let plant = &sc.plant;
    let topo = &sc.topology;
    let m = topo.sensors();
    let (n_r, n_t) = (sc.channel.n_r(), sc.channel.n_t());
    let beta = sc.channel.tx_scale();

    let root = RandomSource::new(sc.seed);
    let mut plant_rng = root.substream(STREAM_PLANT);
    let mut act_rng = root.substream(STREAM_ACTIVATION);
    let mut chan_rng = root.substream(STREAM_CHANNEL);
    let mut rx_rng = root.substream(STREAM_RX_NOISE);
    let mut pilot_rng = root.substream(STREAM_PILOT_NOISE);
    let mut sched_rng = root.substream(STREAM_SCHEDULE);
    let mut init_rng = root.substream(STREAM_INIT);

    let x_pred0 = sample_gaussian(&mut init_rng, &Matrix::zeros(plant.dim(), 1), &sc.prior_cov)?;
    let mut est = match sc.scheme {
        Scheme::Proposed => Estimator::Constant {
            gain: sc.gain.as_ref().expect("validated"),
            x_pred: x_pred0,
        },
        _ => Estimator::Kalman {
            fs: FilterState::new(x_pred0, sc.prior_cov.clone())?,
            pilot: sc.pilot.as_ref().expect("validated"),
        },
    };

    let mut state = plant.initial_state();
    let mut slots = Vec::with_capacity(if record { sc.horizon } else { 0 });
    let mut powers = Vec::with_capacity(sc.horizon);
    let (mut err_sum, mut state_sum) = (0.0, 0.0);
    let (mut total_power, mut total_pilot) = (0.0, 0.0);
    let mut collisions = 0;
    let mut wall = Duration::ZERO;

    for t in 0..sc.horizon {
        let delta = sc.activation.sample(&mut act_rng, m);
        let real = sample_channels(&sc.channel, m, &mut chan_rng)?;
        let v = sample_receiver_noise(n_r, &mut rx_rng);
        let pilot_noise: Vec<Matrix> = (0..m).map(|_| pilot_rng.normal_matrix(n_r, n_t)).collect();
        let u = sched_rng.uniform();

        let active: Vec<usize> = (0..m).filter(|&i| delta[i]).collect();
        let x = &state.x;
        let mut collision = false;

        let (x_pred, x_est, received, transmitters, data_power, pilot_energy) = match &mut est {
            Estimator::Constant { gain, x_pred } => {
                let signals = topo
                    .matrices()
                    .iter()
                    .map(|c| semantic_signal(c, x, x_pred))
                    .collect::<semagg_core::Result<Vec<_>>>()?;
                let y = aggregate(&real, &delta, &signals, beta, &v)?;
                let power = beta * beta * active.iter().map(|&i| signals[i].sum_of_squares()).sum::<f64>();

                let clock = Instant::now();
                let x_est = constant_gain_update(x_pred, &y, gain)?;
                let next_pred = constant_gain_predict(&x_est, plant)?;
                wall += clock.elapsed();

                let prev_pred = std::mem::replace(x_pred, next_pred);
                (prev_pred, x_est, y, active.clone(), power, 0.0)
            }
            Estimator::Kalman { fs, pilot } => {
                let raw = topo
                    .matrices()
                    .iter()
                    .map(|c| raw_signal(c, x))
                    .collect::<semagg_core::Result<Vec<_>>>()?;
                // Sensors that transmit, and the ones whose data reaches the filter.
                let (senders, used): (Vec<usize>, Vec<usize>) = match sc.scheme {
                    Scheme::Aloha => {
                        collision = active.len() >= 2;
                        let used = match (active.len(), sc.collision) {
                            (1, _) => active.clone(),
                            (n, CollisionPolicy::Capture) if n >= 2 => vec![active[pick(u, n)]],
                            _ => Vec::new(),
                        };
                        (active.clone(), used)
                    }
                    Scheme::RandomTdma => {
                        let j = pick(u, m);
                        (vec![j], vec![j])
                    }
                    _ => (active.clone(), active.clone()),
                };
                let mut send_mask = vec![false; m];
                senders.iter().for_each(|&i| send_mask[i] = true);
                let y = aggregate(&real, &send_mask, &raw, beta, &v)?;
                let y_used = if used == senders {
                    y.clone()
                } else {
                    let mut mask = vec![false; m];
                    used.iter().for_each(|&i| mask[i] = true);
                    aggregate(&real, &mask, &raw, beta, &v)?
                };
                let power = beta * beta * senders.iter().map(|&i| raw[i].sum_of_squares()).sum::<f64>();
                let pilot_energy: f64 = senders.iter().map(|&i| pilot.energy(i)).sum();

                let x_pred = fs.x_pred.clone();
                let clock = Instant::now();
                let mut h_hat = Matrix::zeros(n_r, plant.dim());
                for &i in &used {
                    let est_h = ls_channel_estimate_with_noise(&real.h_mats[i], pilot.pilot(i), &pilot_noise[i])?;
                    h_hat.add_scaled(beta, &(&est_h * topo.get(i)));
                }
                let updated = kalman_update(fs, &y_used, &h_hat)?;
                let x_est = updated.x_est.clone();
                *fs = kalman_predict(&updated, plant)?;
                wall += clock.elapsed();

                (x_pred, x_est, y, senders, power + pilot_energy, pilot_energy)
            }
        };

        let mut err = x.clone();
        err -= &x_est;
        err_sum += err.sum_of_squares();
        state_sum += x.sum_of_squares();
        total_power += data_power;
        total_pilot += pilot_energy;
        collisions += usize::from(collision);
        powers.push(data_power);

        let next_state = plant_step(&state, plant, &mut plant_rng)?;
        if record {
            slots.push(SlotRecord {
                t,
                x: state.x,
                x_pred,
                x_est,
                received,
                power: data_power,
                pilot_energy,
                activations: delta,
                transmitters,
                collision,
                h_mats: real.h_mats,
            });
        }
        state = next_state;
    }

    let nmse = match (err_sum, state_sum) {
        (e, _) if e == 0.0 => 0.0,
        (_, s) if s > 0.0 => err_sum / state_sum,
        _ => f64::INFINITY,
    };
    Ok(EpisodeTrace {
        slots,
        slot_power: powers,
        summary: EpisodeSummary {
            nmse,
            total_power,
            total_pilot_energy: total_pilot,
            collisions,
            wall_time: wall,
        },
    })
}

fn pick(u: f64, n: usize) -> usize {
    ((u * n as f64) as usize).min(n - 1)
}
