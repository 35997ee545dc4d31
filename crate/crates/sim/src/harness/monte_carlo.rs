use rayon::prelude::*;

use super::episode::{run_episode_with, EpisodeTrace, Scenario, Scheme};
use crate::error::Result;

/// Aggregate over runs with seeds `seed, seed + 1, …`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloSummary {
    pub scheme: Scheme,
    pub n_runs: usize,
    pub seed: u64,
    pub nmse_runs: Vec<f64>,
    pub nmse_mean: f64,
    pub nmse_std_err: f64,
    /// Mean cumulative power after each slot, and its standard error.
    pub power_mean: Vec<f64>,
    pub power_std_err: Vec<f64>,
    pub wall_time_mean: f64,
}

impl MonteCarloSummary {
    pub fn total_power_mean(&self) -> f64 {
        self.power_mean.last().copied().unwrap_or(0.0)
    }
}

/// Sample mean and standard error of the mean; the error is NaN for a single value.
pub fn mean_std_err(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

pub fn run_monte_carlo(sc: &Scenario, n_runs: usize) -> Result<MonteCarloSummary> {
    if n_runs == 0 {
        return Err(crate::error::SimError::Scenario("n_runs must be at least 1".into()));
    }
    sc.validate()?;
    let traces: Vec<EpisodeTrace> = (0..n_runs as u64)
        .into_par_iter()
        .map(|i| {
            let mut run = sc.clone();
            run.seed = sc.seed.wrapping_add(i);
            run_episode_with(&run, false)
        })
        .collect::<Result<_>>()?;

    let nmse_runs: Vec<f64> = traces.iter().map(|t| t.summary.nmse).collect();
    let (nmse_mean, nmse_std_err) = mean_std_err(&nmse_runs);
    let cumulative: Vec<Vec<f64>> = traces.iter().map(EpisodeTrace::cumulative_power).collect();
    let (power_mean, power_std_err) = (0..sc.horizon)
        .map(|t| mean_std_err(&cumulative.iter().map(|c| c[t]).collect::<Vec<_>>()))
        .unzip();
    let wall_time_mean = traces.iter().map(|t| t.summary.wall_time.as_secs_f64()).sum::<f64>() / n_runs as f64;
    Ok(MonteCarloSummary {
        scheme: sc.scheme,
        n_runs,
        seed: sc.seed,
        nmse_runs,
        nmse_mean,
        nmse_std_err,
        power_mean,
        power_std_err,
        wall_time_mean,
    })
}
