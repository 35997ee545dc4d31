//! End-to-end episodes of the proposed scheme and the three baselines,
//! Monte-Carlo aggregation, and the sensor-count, power and timing experiments.

mod episode;
mod experiments;
mod monte_carlo;

pub use episode::{run_episode, CollisionPolicy, EpisodeSummary, EpisodeTrace, Scenario, Scheme, SlotRecord};
pub use experiments::{
    cpu_plant, episode_wall_time, experiment_cpu_vs_dimension, experiment_nmse_vs_sensors, experiment_power_vs_time,
    log_log_slope, median, CpuExperiment, Curvature, ExperimentSetup, GainDesign, PreparedSetup, ResultRow,
    TopologySpec, CPU_PLANT_NORM,
};
pub use monte_carlo::{mean_std_err, run_monte_carlo, MonteCarloSummary};
