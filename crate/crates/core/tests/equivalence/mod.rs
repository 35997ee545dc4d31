//! Equivalence oracles shared by the core tests and the acceptance run.

use semagg_core::estimation::{constant_gain_cov_step, kalman_gain, ConstantGain};
use semagg_core::gain_design::{sample_value_and_grads, solve_subproblem, SurrogateQuadratic};
use semagg_core::numerics::{sample_gaussian, svd};
use semagg_core::plant::PlantModel;
use semagg_core::{Matrix, RandomSource};

pub fn rand_matrix(rng: &mut RandomSource, r: usize, c: usize, scale: f64) -> Matrix {
    rng.normal_matrix(r, c).scale(scale)
}

pub fn rand_psd(rng: &mut RandomSource, n: usize) -> Matrix {
    let b = rng.normal_matrix(n, n);
    let mut p = &b.mul_transpose(&b) + &Matrix::identity(n).scale(0.1);
    p.symmetrize();
    p
}

fn adjugate_inverse_3x3(m: &Matrix) -> Matrix {
    let a = |i: usize, j: usize| m[(i, j)];
    let cof = |i: usize, j: usize| {
        let r: Vec<usize> = (0..3).filter(|&x| x != i).collect();
        let c: Vec<usize> = (0..3).filter(|&x| x != j).collect();
        let minor = a(r[0], c[0]) * a(r[1], c[1]) - a(r[0], c[1]) * a(r[1], c[0]);
        if (i + j) % 2 == 0 {
            minor
        } else {
            -minor
        }
    };
    let det = a(0, 0) * cof(0, 0) + a(0, 1) * cof(0, 1) + a(0, 2) * cof(0, 2);
    // inverse = adjugate / det, adjugate = cofactorᵀ
    Matrix::from_fn(3, 3, |i, j| cof(j, i) / det)
}

fn numeric_grad(f: impl Fn(&Matrix) -> f64, k: &Matrix, step: f64) -> Matrix {
    Matrix::from_fn(k.rows(), k.cols(), |i, j| {
        let mut up = k.clone();
        up[(i, j)] += step;
        let mut dn = k.clone();
        dn[(i, j)] -= step;
        (f(&up) - f(&dn)) / (2.0 * step)
    })
}

pub fn kalman_gain_matches_adjugate_inverse() {
    let mut rng = RandomSource::new(1);
    for _ in 0..200 {
        let p = rand_psd(&mut rng, 3);
        let h = rand_matrix(&mut rng, 3, 3, 1.5);
        let s = &(&h * &p).mul_transpose(&h) + &Matrix::identity(3);
        let oracle = &p.mul_transpose(&h) * &adjugate_inverse_3x3(&s);
        let got = kalman_gain(&p, &h).unwrap();
        assert!(got.max_abs_diff(&oracle) <= 1e-9 * oracle.max_abs().max(1.0));
    }
}

pub fn constant_gain_covariance_matches_monte_carlo() {
    let mut rng = RandomSource::new(2);
    let plant = PlantModel::eq22();
    let p = rand_psd(&mut rng, 3);
    let k = rand_matrix(&mut rng, 3, 2, 0.4);
    let h = rand_matrix(&mut rng, 2, 3, 1.0);
    let predicted = constant_gain_cov_step(&p, &ConstantGain::new(k.clone()).unwrap(), &h, &plant).unwrap();

    // Error propagation e' = A((I − K H)e − K v) + w with e ~ N(0, P).
    let ikh = &Matrix::identity(3) - &(&k * &h);
    let n = 200_000;
    let mut acc = Matrix::zeros(3, 3);
    for _ in 0..n {
        let e = sample_gaussian(&mut rng, &Matrix::zeros(3, 1), &p).unwrap();
        let v = rng.normal_matrix(2, 1);
        let post = &(&ikh * &e) - &(&k * &v);
        let next = &(plant.a_dyn() * &post) + &plant.sample_noise(&mut rng);
        acc += &next.mul_transpose(&next);
    }
    acc.scale_in_place(1.0 / n as f64);
    let rel = (&acc - &predicted).sum_of_squares().sqrt() / predicted.sum_of_squares().sqrt();
    assert!(rel < 0.05, "relative error {rel}");
}

pub fn sampled_gradients_match_finite_differences() {
    let plant = PlantModel::eq22();
    let mut rng = RandomSource::new(9);
    let mut checked = 0;
    while checked < 100 {
        let k = rand_matrix(&mut rng, 3, 2, 0.5);
        if svd(&k).top_gap() < 1e-3 {
            continue;
        }
        let h = rand_matrix(&mut rng, 2, 3, 1.0);
        let ev = sample_value_and_grads(&k, &plant, &h).unwrap();
        let fd0 = numeric_grad(|kk| sample_value_and_grads(kk, &plant, &h).unwrap().f0, &k, 1e-6);
        let fd1 = numeric_grad(|kk| sample_value_and_grads(kk, &plant, &h).unwrap().f1, &k, 1e-6);
        for (fd, g) in [(&fd0, &ev.g0), (&fd1, &ev.g1)] {
            let err = (fd - g).sum_of_squares().sqrt();
            let norm = g.sum_of_squares().sqrt();
            assert!(err <= 1e-5 * norm.max(1e-3), "gradient mismatch {err} vs norm {norm}");
        }
        checked += 1;
    }
}

pub fn subproblem_matches_grid_search() {
    let mut rng = RandomSource::new(11);
    let (half, step) = (8.0, 0.02);
    let n = (2.0 * half / step) as usize + 1;
    let mut compared = 0;
    while compared < 10 {
        let quad = |rng: &mut RandomSource, c: f64| {
            let lin = Matrix::from_fn(1, 2, |_, _| 3.0 * (2.0 * rng.uniform() - 1.0));
            SurrogateQuadratic::new(c, lin, -(0.2 + 1.8 * rng.uniform())).unwrap()
        };
        let s0 = quad(&mut rng, 0.0);
        let c1 = 3.0 * rng.uniform() - 1.0;
        let s1 = quad(&mut rng, c1);
        let sol = solve_subproblem(&s0, &s1, 1e-6).unwrap();
        if sol.restoration {
            continue;
        }
        let mut best = f64::NEG_INFINITY;
        for i in 0..n {
            for j in 0..n {
                let k = Matrix::from_row_slice(1, 2, &[-half + i as f64 * step, -half + j as f64 * step]).unwrap();
                if s1.evaluate(&k) >= 1e-6 {
                    best = best.max(s0.evaluate(&k));
                }
            }
        }
        // Objective changes by at most ‖∇s₀‖·(grid diagonal) between neighbours.
        let lip = s0.linear.sum_of_squares().sqrt() + 2.0 * s0.curvature.abs() * half * 2f64.sqrt();
        let tol = lip * step * 2f64.sqrt();
        let got = s0.evaluate(&sol.gain);
        assert!(s1.evaluate(&sol.gain) >= 1e-6 - 1e-9);
        assert!((got - best).abs() <= tol, "solver {got} vs grid {best} (tol {tol})");
        compared += 1;
    }
}
