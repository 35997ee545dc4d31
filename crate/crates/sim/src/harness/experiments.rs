use std::time::Duration;

use semagg_core::channel::{calibrate_tx_scale, ChannelModel, PilotScheme};
use semagg_core::estimation::ConstantGain;
use semagg_core::gain_design::{auto_curvature, optimize_gain, CsscaConfig, GainOptimization};
use semagg_core::numerics::spectral_norm;
use semagg_core::plant::{ActivationModel, PlantModel, SensorTopology};
use semagg_core::{Matrix, RandomSource};

use super::episode::{run_episode_with, CollisionPolicy, Scenario, Scheme};
use super::monte_carlo::{mean_std_err, run_monte_carlo};
use crate::error::{Result, SimError};

const STREAM_CALIBRATION: u64 = 8;
const STREAM_DESIGN: u64 = 9;
const STREAM_TOPOLOGY: u64 = 10;
const STREAM_CPU_PLANT: u64 = 11;

/// Spectral norm the random plants of the timing experiment are scaled to.
pub const CPU_PLANT_NORM: f64 = 0.95;

/// One output row: `scheme, x, metric, mean, std_err, n_runs, seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scheme: String,
    /// Number of sensors, plant dimension or slot, depending on the table.
    pub x: usize,
    pub metric: String,
    pub mean: f64,
    pub std_err: f64,
    pub n_runs: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TopologySpec {
    Sequential {
        gain: f64,
    },
    Gaussian,
    /// Fixed matrices; only valid for their own sensor count.
    Explicit(SensorTopology),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Curvature {
    /// Use `eps0`, `eps1` from the CSSCA configuration.
    Fixed,
    /// Replace them with [`auto_curvature`] estimated from this many samples.
    Auto { samples: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainDesign {
    pub cssca: CsscaConfig,
    pub curvature: Curvature,
}

/// Everything shared by the experiments; per-M pieces are built by [`ExperimentSetup::prepare`].
#[derive(Debug, Clone)]
pub struct ExperimentSetup {
    pub plant: PlantModel,
    pub topology: TopologySpec,
    /// Channel before transmit-scale calibration.
    pub channel: ChannelModel,
    pub activation: ActivationModel,
    pub horizon: usize,
    pub pilot_power: f64,
    pub calibration_horizon: usize,
    pub collision: CollisionPolicy,
    pub gain_design: GainDesign,
    pub seed: u64,
}

/// Calibrated, ready-to-run pieces for one sensor count.
#[derive(Debug, Clone)]
pub struct PreparedSetup {
    pub plant: PlantModel,
    pub topology: SensorTopology,
    pub channel: ChannelModel,
    pub pilot: PilotScheme,
    pub design: Option<GainOptimization>,
}

impl PreparedSetup {
    pub fn gain(&self) -> Option<ConstantGain> {
        self.design
            .as_ref()
            .map(|d| ConstantGain::new(d.gain.clone()))
            .transpose()
            .ok()
            .flatten()
    }
}

impl ExperimentSetup {
    pub fn topology_for(&self, m: usize) -> Result<SensorTopology> {
        let (s, n_t) = (self.plant.dim(), self.channel.n_t());
        Ok(match &self.topology {
            TopologySpec::Sequential { gain } => SensorTopology::sequential(m, s, n_t, *gain)?,
            TopologySpec::Gaussian => {
                let mut rng = RandomSource::new(self.seed)
                    .substream(STREAM_TOPOLOGY)
                    .substream(m as u64);
                SensorTopology::gaussian(m, s, n_t, &mut rng)?
            }
            TopologySpec::Explicit(t) if t.sensors() == m => t.clone(),
            TopologySpec::Explicit(t) => {
                return Err(SimError::Scenario(format!(
                    "explicit topology has {} sensors, {m} requested",
                    t.sensors()
                )))
            }
        })
    }

    /// Calibrates β for `m` sensors and, if `with_gain`, designs the constant gain.
    pub fn prepare(&self, m: usize, with_gain: bool) -> Result<PreparedSetup> {
        let topology = self.topology_for(m)?;
        self.prepare_with(self.plant.clone(), topology, with_gain)
    }

    fn prepare_with(&self, plant: PlantModel, topology: SensorTopology, with_gain: bool) -> Result<PreparedSetup> {
        let m = topology.sensors() as u64;
        let root = RandomSource::new(self.seed);
        let mut cal_rng = root.substream(STREAM_CALIBRATION).substream(m);
        let beta = calibrate_tx_scale(
            &self.channel,
            &plant,
            &topology,
            &self.activation,
            self.calibration_horizon,
            &mut cal_rng,
        )?;
        let channel = self.channel.clone().with_tx_scale(beta)?;
        let pilot = PilotScheme::scaled_identity(topology.sensors(), channel.n_t(), self.pilot_power)?;
        let design = if with_gain {
            let rng = root.substream(STREAM_DESIGN).substream(m);
            Some(self.design_gain(&plant, &topology, &channel, &rng)?)
        } else {
            None
        };
        Ok(PreparedSetup {
            plant,
            topology,
            channel,
            pilot,
            design,
        })
    }

    fn design_gain(
        &self,
        plant: &PlantModel,
        topology: &SensorTopology,
        channel: &ChannelModel,
        rng: &RandomSource,
    ) -> Result<GainOptimization> {
        let mut cfg = self.gain_design.cssca.clone();
        let shape = (plant.dim(), channel.n_r());
        if cfg.k_init.shape() != shape {
            if cfg.k_init.as_slice().iter().any(|v| *v != 0.0) {
                return Err(SimError::Scenario(format!(
                    "k_init is {:?}, expected {shape:?}",
                    cfg.k_init.shape()
                )));
            }
            cfg.k_init = Matrix::zeros(shape.0, shape.1);
        }
        if let Curvature::Auto { samples } = self.gain_design.curvature {
            let (e0, e1) = auto_curvature(
                plant,
                channel,
                topology,
                &self.activation,
                samples,
                &mut rng.substream(1),
            )?;
            cfg.eps0 = e0;
            cfg.eps1 = e1;
        }
        Ok(optimize_gain(
            &cfg,
            plant,
            channel,
            topology,
            &self.activation,
            &mut rng.substream(2),
        )?)
    }

    pub fn scenario(&self, prepared: &PreparedSetup, scheme: Scheme, horizon: usize) -> Scenario {
        Scenario {
            plant: prepared.plant.clone(),
            topology: prepared.topology.clone(),
            channel: prepared.channel.clone(),
            activation: self.activation.clone(),
            horizon,
            scheme,
            gain: if scheme == Scheme::Proposed {
                prepared.gain()
            } else {
                None
            },
            pilot: if scheme.uses_pilots() {
                Some(prepared.pilot.clone())
            } else {
                None
            },
            collision: self.collision,
            prior_cov: Matrix::identity(prepared.plant.dim()),
            seed: self.seed,
        }
    }
}

/// NMSE per scheme and sensor count; β is recalibrated and the gain
/// redesigned for every `M`.
pub fn experiment_nmse_vs_sensors(
    setup: &ExperimentSetup,
    m_values: &[usize],
    schemes: &[Scheme],
    n_runs: usize,
) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for &m in m_values {
        let prepared = setup.prepare(m, schemes.contains(&Scheme::Proposed))?;
        for &scheme in schemes {
            let summary = run_monte_carlo(&setup.scenario(&prepared, scheme, setup.horizon), n_runs)?;
            rows.push(ResultRow {
                scheme: scheme.to_string(),
                x: m,
                metric: "nmse".into(),
                mean: summary.nmse_mean,
                std_err: summary.nmse_std_err,
                n_runs,
                seed: setup.seed,
            });
        }
    }
    Ok(rows)
}

/// Mean cumulative sensor energy after each of `horizon` slots; one β shared by all schemes.
pub fn experiment_power_vs_time(
    setup: &ExperimentSetup,
    m: usize,
    horizon: usize,
    schemes: &[Scheme],
    n_runs: usize,
) -> Result<Vec<ResultRow>> {
    if horizon == 0 {
        return Ok(Vec::new());
    }
    let prepared = setup.prepare(m, schemes.contains(&Scheme::Proposed))?;
    let mut rows = Vec::with_capacity(horizon * schemes.len());
    for &scheme in schemes {
        let summary = run_monte_carlo(&setup.scenario(&prepared, scheme, horizon), n_runs)?;
        for t in 0..horizon {
            rows.push(ResultRow {
                scheme: scheme.to_string(),
                x: t + 1,
                metric: "cumulative_power".into(),
                mean: summary.power_mean[t],
                std_err: summary.power_std_err[t],
                n_runs,
                seed: setup.seed,
            });
        }
    }
    Ok(rows)
}

/// Settings of the timing experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct CpuExperiment {
    pub s_values: Vec<usize>,
    pub sensors: usize,
    pub n_slots: usize,
    pub reps: usize,
    /// Slots of the discarded warm-up run.
    pub warmup_slots: usize,
    /// CSSCA iterations for the gain used in timing.
    pub design_iters: usize,
}

/// Random plant for dimension `s`: i.i.d. standard-normal `A` rescaled to
/// spectral norm [`CPU_PLANT_NORM`], `W = I`, `x₀ = 0`.
pub fn cpu_plant(s: usize, rng: &mut RandomSource) -> Result<PlantModel> {
    let a = rng.normal_matrix(s, s);
    let norm = spectral_norm(&a)?;
    Ok(PlantModel::new(
        a.scale(CPU_PLANT_NORM / norm),
        Matrix::identity(s),
        Matrix::zeros(s, 1),
    )?)
}

/// Estimator-side wall time per scheme and plant dimension: the median over
/// `reps` timed runs after one discarded warm-up run. Runs sequentially.
pub fn experiment_cpu_vs_dimension(
    setup: &ExperimentSetup,
    cpu: &CpuExperiment,
    schemes: &[Scheme],
) -> Result<Vec<ResultRow>> {
    if cpu.reps == 0 || cpu.n_slots == 0 {
        return Err(SimError::Scenario("timing needs at least one rep and one slot".into()));
    }
    let mut rows = Vec::new();
    for &s in &cpu.s_values {
        let mut rng = RandomSource::new(setup.seed)
            .substream(STREAM_CPU_PLANT)
            .substream(s as u64);
        let plant = cpu_plant(s, &mut rng)?;
        let topology = SensorTopology::gaussian(cpu.sensors, s, setup.channel.n_t(), &mut rng)?;
        let mut local = setup.clone();
        local.gain_design.cssca.total_iters = cpu.design_iters;
        let prepared = local.prepare_with(plant, topology, schemes.contains(&Scheme::Proposed))?;
        for &scheme in schemes {
            let mut sc = local.scenario(&prepared, scheme, cpu.warmup_slots.max(1));
            run_episode_with(&sc, false)?;
            sc.horizon = cpu.n_slots;
            let times: Vec<f64> = (0..cpu.reps as u64)
                .map(|i| {
                    sc.seed = setup.seed.wrapping_add(i);
                    run_episode_with(&sc, false).map(|t| t.summary.wall_time.as_secs_f64())
                })
                .collect::<Result<_>>()?;
            rows.push(ResultRow {
                scheme: scheme.to_string(),
                x: s,
                metric: "wall_time_s".into(),
                mean: median(&times),
                std_err: mean_std_err(&times).1,
                n_runs: cpu.reps,
                seed: setup.seed,
            });
        }
    }
    Ok(rows)
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => v[n / 2],
        _ => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}

/// Total estimator time of a run, for callers that time a single episode.
pub fn episode_wall_time(sc: &Scenario) -> Result<Duration> {
    Ok(run_episode_with(sc, false)?.summary.wall_time)
}
