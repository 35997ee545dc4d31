use crate::error::{Error, Result};
use crate::numerics::Matrix;

const BISECTION_TOLERANCE: f64 = 1e-10;
const MAX_BRACKET_DOUBLINGS: usize = 2000;
const MAX_BISECTIONS: usize = 400;

/// Strictly concave quadratic `c + ⟨L, K⟩ + ε‖K‖²_F`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateQuadratic {
    pub constant: f64,
    pub linear: Matrix,
    pub curvature: f64,
}

impl SurrogateQuadratic {
    pub fn new(constant: f64, linear: Matrix, curvature: f64) -> Result<Self> {
        if !(curvature < 0.0) || !curvature.is_finite() {
            return Err(Error::invalid(alloc::format!(
                "surrogate curvature must be negative, got {curvature}"
            )));
        }
        if !constant.is_finite() {
            return Err(Error::invalid("surrogate constant is not finite"));
        }
        linear.ensure_finite("surrogate")?;
        Ok(SurrogateQuadratic {
            constant,
            linear,
            curvature,
        })
    }

    /// `f + ⟨g, K − Kʳ⟩ + ε‖K − Kʳ‖²_F`, expanded.
    pub fn from_sample(k_r: &Matrix, f_val: f64, grad: &Matrix, eps: f64) -> Result<Self> {
        if grad.shape() != k_r.shape() {
            return Err(Error::dims("surrogate gradient", k_r.shape(), grad.shape()));
        }
        let constant = f_val - grad.dot(k_r) + eps * k_r.sum_of_squares();
        let mut linear = grad.clone();
        linear.add_scaled(-2.0 * eps, k_r);
        SurrogateQuadratic::new(constant, linear, eps)
    }

    pub fn evaluate(&self, k: &Matrix) -> f64 {
        self.constant + self.linear.dot(k) + self.curvature * k.sum_of_squares()
    }

    pub fn maximizer(&self) -> Matrix {
        self.linear.scale(-0.5 / self.curvature)
    }

    pub fn max_value(&self) -> f64 {
        self.constant - self.linear.sum_of_squares() / (4.0 * self.curvature)
    }

    /// `(1 − τ)·self + τ·(new quadratic at Kʳ)`.
    pub fn update(&self, k_r: &Matrix, f_val: f64, grad: &Matrix, tau: f64) -> Result<Self> {
        surrogate_update(self, k_r, f_val, grad, tau, self.curvature)
    }
}

pub fn surrogate_update(
    prev: &SurrogateQuadratic,
    k_r: &Matrix,
    f_val: f64,
    grad: &Matrix,
    tau: f64,
    eps: f64,
) -> Result<SurrogateQuadratic> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::invalid(alloc::format!(
            "step size must lie in (0, 1], got {tau}"
        )));
    }
    if prev.curvature != eps {
        return Err(Error::invalid(alloc::format!(
            "surrogate curvature {} differs from update curvature {eps}",
            prev.curvature
        )));
    }
    if prev.linear.shape() != k_r.shape() {
        return Err(Error::dims("surrogate_update", prev.linear.shape(), k_r.shape()));
    }
    let fresh = SurrogateQuadratic::from_sample(k_r, f_val, grad, eps)?;
    let mut linear = prev.linear.scale(1.0 - tau);
    linear.add_scaled(tau, &fresh.linear);
    Ok(SurrogateQuadratic {
        constant: (1.0 - tau) * prev.constant + tau * fresh.constant,
        linear,
        curvature: eps,
    })
}

/// Solution of the surrogate subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemSolution {
    pub gain: Matrix,
    /// Multiplier of the constraint; zero when it is slack.
    pub multiplier: f64,
    /// True when no point meets the constraint and the solver fell back to
    /// maximizing the constraint surrogate.
    pub restoration: bool,
}

/// `max s₀(K)` subject to `s₁(K) ≥ ξ`.
pub fn solve_subproblem(s0: &SurrogateQuadratic, s1: &SurrogateQuadratic, margin: f64) -> Result<SubproblemSolution> {
    for s in [s0, s1] {
        if !(s.curvature < 0.0) {
            return Err(Error::invalid(alloc::format!(
                "surrogate is not strictly concave (curvature {})",
                s.curvature
            )));
        }
    }
    if s0.linear.shape() != s1.linear.shape() {
        return Err(Error::dims("solve_subproblem", s0.linear.shape(), s1.linear.shape()));
    }
    if !(margin >= 0.0) || !margin.is_finite() {
        return Err(Error::invalid(alloc::format!(
            "feasibility margin must be >= 0, got {margin}"
        )));
    }

    let unconstrained = s0.maximizer();
    if s1.evaluate(&unconstrained) >= margin {
        return Ok(SubproblemSolution {
            gain: unconstrained,
            multiplier: 0.0,
            restoration: false,
        });
    }
    if s1.max_value() < margin {
        return Ok(SubproblemSolution {
            gain: s1.maximizer(),
            multiplier: f64::INFINITY,
            restoration: true,
        });
    }

    let at = |lambda: f64| -> Matrix {
        let mut lin = s0.linear.clone();
        lin.add_scaled(lambda, &s1.linear);
        lin.scale(-0.5 / (s0.curvature + lambda * s1.curvature))
    };
    let value = |lambda: f64| s1.evaluate(&at(lambda));

    // Constraint value along K(λ) is non-decreasing in λ.
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut bracketed = false;
    for _ in 0..MAX_BRACKET_DOUBLINGS {
        if value(hi) >= margin {
            bracketed = true;
            break;
        }
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            break;
        }
    }
    if !bracketed {
        // The constraint is active only in the limit λ → ∞.
        return Ok(SubproblemSolution {
            gain: s1.maximizer(),
            multiplier: f64::INFINITY,
            restoration: false,
        });
    }
    for _ in 0..MAX_BISECTIONS {
        if value(hi) - margin <= BISECTION_TOLERANCE {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if value(mid) >= margin {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(SubproblemSolution {
        gain: at(hi),
        multiplier: hi,
        restoration: false,
    })
}
