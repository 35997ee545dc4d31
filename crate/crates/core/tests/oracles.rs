//! Independent oracles for filtering, stability analysis and the CSSCA pieces.

use semagg_core::channel::{
    aggregate, calibrate_tx_scale, effective_csi, sample_channels, sample_receiver_noise, ChannelModel,
    ElementDistribution,
};
use semagg_core::estimation::{
    constant_gain_cov_step, innovation, kalman_predict, kalman_update, ConstantGain, FilterState,
};
use semagg_core::gain_design::{
    drift_bound, estimate_contraction, estimate_drift_contraction, surrogate_update, SurrogateQuadratic,
};
use semagg_core::numerics::spectral_norm;
use semagg_core::plant::{plant_step, raw_signal, semantic_signal, ActivationModel, PlantModel, SensorTopology};
use semagg_core::{Matrix, RandomSource};

mod equivalence;

use equivalence::{rand_matrix, rand_psd};

fn scalar(v: f64) -> Matrix {
    Matrix::from_row_slice(1, 1, &[v]).unwrap()
}

fn eq22_scenario(m: usize, seed: u64) -> (PlantModel, ChannelModel, SensorTopology, ActivationModel) {
    let plant = PlantModel::eq22();
    let topo = SensorTopology::sequential(m, 3, 3, 1.0).unwrap();
    let act = ActivationModel::new(0.3).unwrap();
    let model = ChannelModel::new(3, 3, ElementDistribution::Rayleigh { scale: 3.0 }, 12.5).unwrap();
    let beta = calibrate_tx_scale(&model, &plant, &topo, &act, 300, &mut RandomSource::new(seed)).unwrap();
    (plant, model.with_tx_scale(beta).unwrap(), topo, act)
}

#[test]
fn scalar_contraction_matches_closed_form() {
    let (beta, c, k, p, scale) = (0.2, 0.5, 0.4, 0.3, 3.0);
    let dist = ElementDistribution::Rayleigh { scale };
    let channel = ChannelModel::new(1, 1, dist, 0.0).unwrap().with_tx_scale(beta).unwrap();
    let topo = SensorTopology::sequential(1, 1, 1, c).unwrap();
    let act = ActivationModel::new(p).unwrap();
    let (mean, se) =
        estimate_contraction(&scalar(k), &channel, &topo, &act, 100_000, &mut RandomSource::new(3)).unwrap();
    let closed = 1.0 - 2.0 * k * p * beta * c * dist.mean() + k * k * p * beta * beta * c * c * dist.second_moment();
    assert!((mean - closed).abs() <= 3.0 * se, "{mean} vs {closed} (se {se})");
}

#[test]
fn contraction_std_err_scales_as_inverse_root_n() {
    let channel = ChannelModel::new(1, 1, ElementDistribution::Rayleigh { scale: 3.0 }, 0.0)
        .unwrap()
        .with_tx_scale(0.2)
        .unwrap();
    let topo = SensorTopology::sequential(1, 1, 1, 0.5).unwrap();
    let act = ActivationModel::new(0.3).unwrap();
    let k = scalar(0.4);
    let (_, small) = estimate_contraction(&k, &channel, &topo, &act, 1_000, &mut RandomSource::new(4)).unwrap();
    let (_, large) = estimate_contraction(&k, &channel, &topo, &act, 100_000, &mut RandomSource::new(5)).unwrap();
    let ratio = small / large;
    assert!((8.0..12.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn drift_bound_dominates_monte_carlo_drift() {
    let (plant, channel, topo, act) = eq22_scenario(6, 6);
    let mut rng = RandomSource::new(7);
    let h_scale = channel.tx_scale() * ElementDistribution::Rayleigh { scale: 3.0 }.mean();
    for _ in 0..20 {
        let k = rand_matrix(&mut rng, 3, 3, 0.3 / h_scale);
        let p = rand_psd(&mut rng, 3).scale(1.0 + 10.0 * rng.uniform());
        let gain = ConstantGain::new(k.clone()).unwrap();
        let n = 20_000;
        let (mut mean, mut m2) = (0.0, 0.0);
        for i in 0..n {
            let h = semagg_core::gain_design::sample_effective_channel(&channel, &topo, &act, &mut rng).unwrap();
            let d = constant_gain_cov_step(&p, &gain, &h, &plant).unwrap().trace() - p.trace();
            let delta = d - mean;
            mean += delta / (i + 1) as f64;
            m2 += delta * (d - mean);
        }
        let se_drift = (m2 / (n - 1) as f64 / n as f64).sqrt();
        let (c, se_c) = estimate_drift_contraction(&k, &plant, &channel, &topo, &act, n, &mut rng).unwrap();
        let bound = drift_bound(p.trace(), &k, &plant, 3, c).unwrap();
        let se = (se_drift.powi(2) + (p.trace() * se_c).powi(2)).sqrt();
        assert!(mean <= bound + 3.0 * se, "drift {mean} > bound {bound} (se {se})");
    }
}

#[test]
fn scalar_open_loop_variance_matches_stationary_value() {
    let (a, w) = (0.8, 2.0);
    let plant = PlantModel::new(scalar(a), scalar(w), scalar(0.0)).unwrap();
    let mut rng = RandomSource::new(8);
    let (episodes, burn_in, slots) = (2000, 100, 500);
    let averages: Vec<f64> = (0..episodes)
        .map(|_| {
            let mut st = plant.initial_state();
            let mut sum = 0.0;
            for t in 0..slots {
                st = plant_step(&st, &plant, &mut rng).unwrap();
                if t >= burn_in {
                    sum += st.x[(0, 0)].powi(2);
                }
            }
            sum / (slots - burn_in) as f64
        })
        .collect();
    let mean = averages.iter().sum::<f64>() / episodes as f64;
    let var = averages.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (episodes - 1) as f64;
    let se = (var / episodes as f64).sqrt();
    let stationary = w / (1.0 - a * a);
    assert!(
        (mean - stationary).abs() <= 3.0 * se,
        "{mean} vs {stationary} (se {se})"
    );
}

#[test]
fn expanded_surrogate_matches_recursive_definition() {
    let mut rng = RandomSource::new(10);
    let eps = -0.7;
    let mut history: Vec<(f64, Matrix, f64, Matrix)> = Vec::new();
    let mut expanded: Option<SurrogateQuadratic> = None;
    for r in 0..12 {
        let k_r = rand_matrix(&mut rng, 2, 3, 1.0);
        let grad = rand_matrix(&mut rng, 2, 3, 1.0);
        let f = rng.standard_normal();
        let tau = if r == 0 { 1.0 } else { 0.05 + 0.95 * rng.uniform() };
        expanded = Some(match expanded {
            None => SurrogateQuadratic::from_sample(&k_r, f, &grad, eps).unwrap(),
            Some(prev) => surrogate_update(&prev, &k_r, f, &grad, tau, eps).unwrap(),
        });
        history.push((tau, k_r, f, grad));
    }
    let recursive = |k: &Matrix| {
        let mut val = 0.0;
        for (tau, k_r, f, g) in &history {
            let d = k - k_r;
            val = (1.0 - tau) * val + tau * (f + g.dot(&d) + eps * d.sum_of_squares());
        }
        val
    };
    let s = expanded.unwrap();
    for _ in 0..50 {
        let k = rand_matrix(&mut rng, 2, 3, 2.0);
        let want = recursive(&k);
        assert!((s.evaluate(&k) - want).abs() <= 1e-10 * want.abs().max(1.0));
    }
}

#[test]
fn aggregated_semantic_signal_is_the_innovation() {
    let (plant, channel, topo, act) = eq22_scenario(6, 12);
    let channel = channel.with_tx_scale(1.0).unwrap();
    let mut rng = RandomSource::new(13);
    let mut st = plant.initial_state();
    let mut x_pred = rng.normal_matrix(3, 1);
    for _ in 0..1000 {
        let delta = act.sample(&mut rng, 6);
        let real = sample_channels(&channel, 6, &mut rng).unwrap();
        let v = sample_receiver_noise(3, &mut rng);
        let sem: Vec<Matrix> = topo
            .matrices()
            .iter()
            .map(|c| semantic_signal(c, &st.x, &x_pred).unwrap())
            .collect();
        let raw: Vec<Matrix> = topo.matrices().iter().map(|c| raw_signal(c, &st.x).unwrap()).collect();
        let y = aggregate(&real, &delta, &sem, 1.0, &v).unwrap();
        let y_raw = aggregate(&real, &delta, &raw, 1.0, &v).unwrap();
        let h = effective_csi(&real, &delta, &topo, 1.0).unwrap();
        let pi = innovation(&y_raw, &h, &x_pred).unwrap().value;
        assert!(y.max_abs_diff(&pi) <= 1e-12 * y_raw.max_abs().max(1.0));
        st = plant_step(&st, &plant, &mut rng).unwrap();
        x_pred = &(plant.a_dyn() * &x_pred) + &rng.normal_matrix(3, 1).scale(0.1);
    }
}

#[test]
fn kalman_innovations_are_uncorrelated() {
    let (plant, channel, topo, act) = eq22_scenario(6, 14);
    let mut rng = RandomSource::new(15);
    let max_lag = 3;
    let mut num = vec![0.0; max_lag + 1];
    let mut den = vec![0.0; max_lag + 1];
    for _ in 0..50 {
        let mut st = plant.initial_state();
        let mut fs = FilterState::new(Matrix::zeros(3, 1), Matrix::identity(3)).unwrap();
        let mut past: Vec<Matrix> = Vec::new();
        for _ in 0..400 {
            let delta = act.sample(&mut rng, 6);
            let real = sample_channels(&channel, 6, &mut rng).unwrap();
            let v = sample_receiver_noise(3, &mut rng);
            let raw: Vec<Matrix> = topo.matrices().iter().map(|c| raw_signal(c, &st.x).unwrap()).collect();
            let y = aggregate(&real, &delta, &raw, channel.tx_scale(), &v).unwrap();
            let h = effective_csi(&real, &delta, &topo, channel.tx_scale()).unwrap();
            let pi = innovation(&y, &h, &fs.x_pred).unwrap().value;
            for lag in 1..=max_lag {
                if past.len() >= lag {
                    let u = pi.dot(&past[past.len() - lag]);
                    num[lag] += u;
                    den[lag] += u * u;
                }
            }
            past.push(pi);
            fs = kalman_update(&fs, &y, &h).unwrap();
            fs = kalman_predict(&fs, &plant).unwrap();
            st = plant_step(&st, &plant, &mut rng).unwrap();
        }
    }
    for lag in 1..=max_lag {
        // Self-normalized sum of martingale differences is approximately N(0, 1).
        let z = num[lag] / den[lag].sqrt();
        assert!(z.abs() < 3.5, "lag {lag}: z = {z}");
    }
}

#[test]
fn spectral_norm_of_benchmark_plant_is_above_one() {
    // The benchmark plant is not contractive, so open-loop gains are never stable.
    assert!(spectral_norm(PlantModel::eq22().a_dyn()).unwrap() > 1.0);
}

#[test]
fn kalman_gain_matches_adjugate_inverse() {
    equivalence::kalman_gain_matches_adjugate_inverse();
}

#[test]
fn constant_gain_covariance_matches_monte_carlo() {
    equivalence::constant_gain_covariance_matches_monte_carlo();
}

#[test]
fn sampled_gradients_match_finite_differences() {
    equivalence::sampled_gradients_match_finite_differences();
}

#[test]
fn subproblem_matches_grid_search() {
    equivalence::subproblem_matches_grid_search();
}
