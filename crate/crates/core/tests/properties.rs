use proptest::prelude::*;

use semagg_core::channel::{aggregate, effective_csi, ChannelRealization};
use semagg_core::estimation::{constant_gain_cov_step, joseph_covariance, kalman_update, ConstantGain, FilterState};
use semagg_core::gain_design::{solve_subproblem, surrogate_update, SurrogateQuadratic};
use semagg_core::numerics::{frobenius_norm, solve_linear, spectral_norm, symmetric_eigen};
use semagg_core::plant::{plant_step, raw_signal, semantic_signal, PlantModel, SensorTopology};
use semagg_core::{Matrix, RandomSource};

fn matrix(rows: usize, cols: usize, lim: f64) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-lim..lim, rows * cols).prop_map(move |v| Matrix::from_row_slice(rows, cols, &v).unwrap())
}

fn sized_matrix(max: usize) -> impl Strategy<Value = Matrix> {
    (1..=max, 1..=max).prop_flat_map(|(r, c)| matrix(r, c, 5.0))
}

fn psd(n: usize) -> impl Strategy<Value = Matrix> {
    matrix(n, n, 2.0).prop_map(move |b| {
        let mut p = b.mul_transpose(&b);
        p.symmetrize();
        p
    })
}

fn min_eigenvalue(a: &Matrix) -> f64 {
    symmetric_eigen(a).unwrap().0.into_iter().fold(f64::INFINITY, f64::min)
}

fn is_symmetric(a: &Matrix) -> bool {
    a.max_abs_diff(&a.transpose()) == 0.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn spectral_norm_never_exceeds_frobenius(a in sized_matrix(6)) {
        let s = spectral_norm(&a).unwrap();
        let f = frobenius_norm(&a).unwrap();
        prop_assert!(s <= f * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn solve_then_multiply_is_identity(b in matrix(4, 4, 1.0), rhs in matrix(4, 2, 3.0)) {
        // Diagonally dominant, hence well conditioned.
        let a = &b + &Matrix::identity(4).scale(6.0);
        let x = solve_linear(&a, &rhs).unwrap();
        let resid = frobenius_norm(&(&(&a * &x) - &rhs)).unwrap();
        prop_assert!(resid <= 1e-9 * frobenius_norm(&rhs).unwrap().max(1e-300));
    }

    #[test]
    fn semantic_is_raw_difference_exactly(c in matrix(3, 4, 3.0), x in matrix(4, 1, 50.0), xp in matrix(4, 1, 50.0)) {
        let sem = semantic_signal(&c, &x, &xp).unwrap();
        let diff = &raw_signal(&c, &x).unwrap() - &raw_signal(&c, &xp).unwrap();
        prop_assert_eq!(sem, diff);
    }

    #[test]
    fn identity_plant_without_noise_keeps_state(x in matrix(5, 1, 100.0), seed in any::<u64>()) {
        let plant = PlantModel::new(Matrix::identity(5), Matrix::zeros(5, 5), Matrix::zeros(5, 1)).unwrap();
        let mut st = plant.initial_state();
        st.x = x.clone();
        let next = plant_step(&st, &plant, &mut RandomSource::new(seed)).unwrap();
        prop_assert_eq!(next.x, x);
    }

    #[test]
    fn noiseless_aggregation_of_raw_signals_is_csi_times_state(
        hs in prop::collection::vec(matrix(2, 3, 4.0), 4),
        delta in prop::collection::vec(any::<bool>(), 4),
        x in matrix(3, 1, 10.0),
    ) {
        // One-hot connection matrices: each product H_m C_m x reads single entries,
        // so both sides accumulate the same terms in the same order.
        let topo = SensorTopology::sequential(4, 3, 3, 1.0).unwrap();
        let real = ChannelRealization { h_mats: hs };
        let signals: Vec<Matrix> = topo.matrices().iter().map(|c| raw_signal(c, &x).unwrap()).collect();
        let y = aggregate(&real, &delta, &signals, 1.0, &Matrix::zeros(2, 1)).unwrap();
        let h = effective_csi(&real, &delta, &topo, 1.0).unwrap();
        let hx = &h * &x;
        prop_assert!(y.max_abs_diff(&hx) <= 1e-12 * hx.max_abs().max(1.0));
    }

    #[test]
    fn aggregation_superposition(
        hs in prop::collection::vec(matrix(2, 2, 3.0), 3),
        delta in prop::collection::vec(any::<bool>(), 3),
        s1 in prop::collection::vec(matrix(2, 1, 5.0), 3),
        s2 in prop::collection::vec(matrix(2, 1, 5.0), 3),
    ) {
        let real = ChannelRealization { h_mats: hs };
        let zero = Matrix::zeros(2, 1);
        let sum: Vec<Matrix> = s1.iter().zip(&s2).map(|(a, b)| a + b).collect();
        let lhs = aggregate(&real, &delta, &sum, 0.7, &zero).unwrap();
        let rhs = &aggregate(&real, &delta, &s1, 0.7, &zero).unwrap() + &aggregate(&real, &delta, &s2, 0.7, &zero).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-12 * rhs.max_abs().max(1.0));

        // Activations add up across disjoint patterns.
        let off: Vec<bool> = delta.iter().map(|d| !d).collect();
        let all = aggregate(&real, &[true; 3], &s1, 0.7, &zero).unwrap();
        let split = &aggregate(&real, &delta, &s1, 0.7, &zero).unwrap() + &aggregate(&real, &off, &s1, 0.7, &zero).unwrap();
        prop_assert!(all.max_abs_diff(&split) <= 1e-12 * all.max_abs().max(1.0));
    }

    #[test]
    fn joseph_covariance_stays_symmetric_psd(p in psd(4), k in matrix(4, 2, 3.0), h in matrix(2, 4, 3.0)) {
        let out = joseph_covariance(&p, &k, &h);
        prop_assert!(is_symmetric(&out));
        prop_assert!(out.is_finite());
        prop_assert!(min_eigenvalue(&out) >= -1e-9 * out.max_abs().max(1.0));
    }

    #[test]
    fn constant_gain_step_is_symmetric_psd(p in psd(3), k in matrix(3, 3, 2.0), h in matrix(3, 3, 2.0)) {
        let out = constant_gain_cov_step(&p, &ConstantGain::new(k).unwrap(), &h, &PlantModel::eq22()).unwrap();
        prop_assert!(is_symmetric(&out));
        prop_assert!(min_eigenvalue(&out) >= -1e-9 * out.max_abs().max(1.0));
    }

    #[test]
    fn kalman_update_never_increases_trace(p in psd(3), h in matrix(2, 3, 3.0), x in matrix(3, 1, 5.0), y in matrix(2, 1, 5.0)) {
        let fs = FilterState::new(x, p).unwrap();
        let up = kalman_update(&fs, &y, &h).unwrap();
        prop_assert!(up.p_est.trace() <= fs.p_pred.trace() * (1.0 + 1e-12) + 1e-12);
        prop_assert!(min_eigenvalue(&up.p_est) >= -1e-9 * up.p_est.max_abs().max(1.0));
    }

    #[test]
    fn one_step_drift_bound_holds_per_realization(p in psd(3), k in matrix(3, 3, 1.0), h in matrix(3, 3, 2.0)) {
        let plant = PlantModel::eq22();
        let next = constant_gain_cov_step(&p, &ConstantGain::new(k.clone()).unwrap(), &h, &plant).unwrap();
        let e = &Matrix::identity(3) - &(&k * &h);
        let c = (plant.a_dyn() * &e).sum_of_squares();
        let bound = semagg_core::gain_design::drift_bound(p.trace(), &k, &plant, 3, c).unwrap();
        prop_assert!(next.trace() - p.trace() <= bound + 1e-9 * (1.0 + bound.abs()));
    }

    #[test]
    fn surrogate_update_keeps_curvature_and_full_step_interpolates(
        lin in matrix(2, 2, 3.0), k_r in matrix(2, 2, 3.0), grad in matrix(2, 2, 3.0),
        c in -5.0..5.0f64, f in -5.0..5.0f64, eps in -4.0..-0.01f64, tau in 0.001..1.0f64,
    ) {
        let prev = SurrogateQuadratic::new(c, lin, eps).unwrap();
        let up = surrogate_update(&prev, &k_r, f, &grad, tau, eps).unwrap();
        prop_assert_eq!(up.curvature, eps);
        let full = surrogate_update(&prev, &k_r, f, &grad, 1.0, eps).unwrap();
        prop_assert!((full.evaluate(&k_r) - f).abs() <= 1e-9 * (1.0 + f.abs()));
    }

    #[test]
    fn subproblem_meets_margin_unless_restoring(
        l0 in matrix(2, 1, 5.0), l1 in matrix(2, 1, 5.0),
        c0 in -5.0..5.0f64, c1 in -5.0..5.0f64, e0 in -3.0..-0.05f64, e1 in -3.0..-0.05f64, xi in 0.0..0.1f64,
    ) {
        let s0 = SurrogateQuadratic::new(c0, l0, e0).unwrap();
        let s1 = SurrogateQuadratic::new(c1, l1, e1).unwrap();
        let sol = solve_subproblem(&s0, &s1, xi).unwrap();
        if !sol.restoration {
            prop_assert!(s1.evaluate(&sol.gain) >= xi - 1e-9);
        } else {
            prop_assert!(s1.max_value() < xi);
        }
    }
}
