//! Norms, factorizations and linear solves on small dense matrices.

use alloc::vec::Vec;

use super::Matrix;
use crate::error::{Error, Result};

/// Condition estimate above which a system is reported as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Eigenvalues below this are a genuine PSD violation, not round-off.
pub const PSD_TOLERANCE: f64 = 1e-10;

const JACOBI_MAX_SWEEPS: usize = 80;

pub fn frobenius_norm(a: &Matrix) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::invalid("frobenius_norm of an empty matrix"));
    }
    a.ensure_finite("frobenius_norm")?;
    Ok(libm::sqrt(a.sum_of_squares()))
}

/// Largest singular value.
pub fn spectral_norm(a: &Matrix) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::invalid("spectral_norm of an empty matrix"));
    }
    a.ensure_finite("spectral_norm")?;
    Ok(svd(a).sigma[0])
}

/// Thin singular value decomposition `A = U diag(σ) Vᵀ`, σ sorted descending.
#[derive(Debug, Clone)]
pub struct Svd {
    /// `rows × k` with orthonormal columns, `k = min(rows, cols)`.
    pub u: Matrix,
    pub sigma: Vec<f64>,
    /// `cols × k` with orthonormal columns.
    pub v: Matrix,
}

impl Svd {
    /// The top singular triple `(σ₁, u₁, v₁)`.
    pub fn top(&self) -> (f64, Matrix, Matrix) {
        let u1 = Matrix::from_fn(self.u.rows(), 1, |i, _| self.u[(i, 0)]);
        let v1 = Matrix::from_fn(self.v.rows(), 1, |i, _| self.v[(i, 0)]);
        (self.sigma[0], u1, v1)
    }

    /// Relative gap between the two largest singular values (∞ for rank-1 shapes).
    pub fn top_gap(&self) -> f64 {
        match self.sigma.get(1) {
            Some(s2) if self.sigma[0] > 0.0 => (self.sigma[0] - s2) / self.sigma[0],
            Some(_) => 0.0,
            None => f64::INFINITY,
        }
    }
}

/// One-sided (Hestenes) Jacobi SVD.
pub fn svd(a: &Matrix) -> Svd {
    if a.rows() < a.cols() {
        let t = svd(&a.transpose());
        return Svd {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        };
    }
    let (m, n) = a.shape();
    // Columns stored contiguously so the rotations stream through memory.
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| a[(i, j)]).collect()).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (alpha, beta, gamma) = {
                    let (cp, cq) = (&cols[p], &cols[q]);
                    let mut al = 0.0;
                    let mut be = 0.0;
                    let mut ga = 0.0;
                    for (x, y) in cp.iter().zip(cq) {
                        al += x * x;
                        be += y * y;
                        ga += x * y;
                    }
                    (al, be, ga)
                };
                if gamma == 0.0 || libm::fabs(gamma) <= 1e-15 * libm::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = libm::copysign(1.0, zeta) / (libm::fabs(zeta) + libm::sqrt(1.0 + zeta * zeta));
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                rotate_pair(&mut cols, p, q, c, s);
                rotate_pair(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<(f64, usize)> = cols
        .iter()
        .enumerate()
        .map(|(j, c)| (libm::sqrt(c.iter().map(|x| x * x).sum::<f64>()), j))
        .collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut u = Matrix::zeros(m, n);
    let mut vm = Matrix::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    for (k, &(s, j)) in order.iter().enumerate() {
        sigma.push(s);
        for i in 0..m {
            u[(i, k)] = if s > 0.0 { cols[j][i] / s } else { 0.0 };
        }
        for i in 0..n {
            vm[(i, k)] = v[j][i];
        }
    }
    Svd { u, sigma, v: vm }
}

fn rotate_pair(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    let (cp, cq) = (&mut lo[p], &mut hi[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (xp, yq) = (*x, *y);
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues (unsorted) and the matrix whose columns are the
/// corresponding eigenvectors.
pub fn symmetric_eigen(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    if !a.is_square() || a.is_empty() {
        return Err(Error::invalid("symmetric_eigen needs a non-empty square matrix"));
    }
    a.ensure_finite("symmetric_eigen")?;
    let n = a.rows();
    let mut m = a.clone();
    m.symmetrize();
    let mut vecs = Matrix::identity(n);
    let scale = m.max_abs().max(f64::MIN_POSITIVE);

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        if libm::sqrt(off) <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if libm::fabs(apq) <= 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = libm::copysign(1.0, theta) / (libm::fabs(theta) + libm::sqrt(theta * theta + 1.0));
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (vecs[(k, p)], vecs[(k, q)]);
                    vecs[(k, p)] = c * vkp - s * vkq;
                    vecs[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let values = (0..n).map(|i| m[(i, i)]).collect();
    Ok((values, vecs))
}

/// Symmetric factor `L` with `L Lᵀ = cov`, built from the eigen-decomposition.
/// Eigenvalues in `[-1e-10, 0)` are clamped to zero; anything lower is rejected.
pub fn psd_factor(cov: &Matrix) -> Result<Matrix> {
    let (values, vecs) = symmetric_eigen(cov)?;
    let n = cov.rows();
    let mut factor = vecs;
    for (j, &lambda) in values.iter().enumerate() {
        if lambda < -PSD_TOLERANCE {
            return Err(Error::invalid(alloc::format!(
                "covariance is not positive semi-definite (eigenvalue {lambda:e})"
            )));
        }
        let root = libm::sqrt(lambda.max(0.0));
        for i in 0..n {
            factor[(i, j)] *= root;
        }
    }
    Ok(factor)
}

/// Projects a symmetric matrix onto the PSD cone after checking that its
/// most negative eigenvalue is above `-tolerance`.
pub fn clamp_psd(a: &Matrix, tolerance: f64) -> Result<Matrix> {
    let (values, vecs) = symmetric_eigen(a)?;
    if values.iter().all(|&l| l >= 0.0) {
        let mut out = a.clone();
        out.symmetrize();
        return Ok(out);
    }
    if let Some(&min) = values.iter().min_by(|x, y| x.total_cmp(y)) {
        if min < -tolerance {
            return Err(Error::invalid(alloc::format!(
                "matrix has eigenvalue {min:e} below -{tolerance:e}"
            )));
        }
    }
    let clamped: Vec<f64> = values.iter().map(|l| l.max(0.0)).collect();
    let scaled = &vecs * &Matrix::from_diagonal(&clamped);
    let mut out = scaled.mul_transpose(&vecs);
    out.symmetrize();
    Ok(out)
}

/// LU factorization with partial pivoting (`P A = L U`, packed in place).
struct Lu {
    packed: Matrix,
    perm: Vec<usize>,
}

impl Lu {
    fn factor(a: &Matrix) -> Result<Lu> {
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (pivot_row, pivot_abs) = (k..n)
                .map(|i| (i, libm::fabs(lu[(i, k)])))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot_abs == 0.0 {
                return Err(Error::SingularMatrix {
                    condition: f64::INFINITY,
                });
            }
            if pivot_row != k {
                perm.swap(k, pivot_row);
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(pivot_row, j)];
                    lu[(pivot_row, j)] = tmp;
                }
            }
            let pivot = lu[(k, k)];
            for i in (k + 1)..n {
                let factor = lu[(i, k)] / pivot;
                lu[(i, k)] = factor;
                if factor != 0.0 {
                    for j in (k + 1)..n {
                        lu[(i, j)] -= factor * lu[(k, j)];
                    }
                }
            }
        }
        Ok(Lu { packed: lu, perm })
    }

    fn solve(&self, b: &Matrix) -> Matrix {
        let n = self.packed.rows();
        let m = b.cols();
        let mut x = Matrix::from_fn(n, m, |i, j| b[(self.perm[i], j)]);
        for col in 0..m {
            for i in 0..n {
                let mut acc = x[(i, col)];
                for k in 0..i {
                    acc -= self.packed[(i, k)] * x[(k, col)];
                }
                x[(i, col)] = acc;
            }
            for i in (0..n).rev() {
                let mut acc = x[(i, col)];
                for k in (i + 1)..n {
                    acc -= self.packed[(i, k)] * x[(k, col)];
                }
                x[(i, col)] = acc / self.packed[(i, i)];
            }
        }
        x
    }
}

fn one_norm(a: &Matrix) -> f64 {
    (0..a.cols())
        .map(|j| (0..a.rows()).map(|i| libm::fabs(a[(i, j)])).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solves `a · x = b` for square `a`.
///
/// The 1-norm condition number is computed from an explicit inverse; systems
/// above [`MAX_CONDITION`] are rejected as singular.
pub fn solve_linear(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if !a.is_square() || a.is_empty() {
        return Err(Error::invalid("solve_linear needs a non-empty square matrix"));
    }
    if b.rows() != a.rows() {
        return Err(Error::dims("solve_linear", (a.rows(), b.cols()), b.shape()));
    }
    a.ensure_finite("solve_linear")?;
    b.ensure_finite("solve_linear")?;
    let lu = Lu::factor(a)?;
    let inv = lu.solve(&Matrix::identity(a.rows()));
    let condition = one_norm(a) * one_norm(&inv);
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(Error::SingularMatrix { condition });
    }
    Ok(lu.solve(b))
}

pub fn inverse(a: &Matrix) -> Result<Matrix> {
    solve_linear(a, &Matrix::identity(a.rows()))
}
