use alloc::vec::Vec;

use super::stability::{sample_batch, sample_effective_channel, SampleEvaluation, SampledObjective};
use super::surrogate::{solve_subproblem, SubproblemSolution, SurrogateQuadratic};
use crate::channel::ChannelModel;
use crate::error::{Error, Result};
use crate::numerics::{symmetric_eigen, Matrix, RandomSource};
use crate::plant::{ActivationModel, PlantModel, SensorTopology};

const DEFAULT_EXPONENT: f64 = 0.6;

/// How the surrogate weight `τʳ` is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// `τʳ = 1/(r+1)^exponent`.
    Diminishing { exponent: f64 },
    /// Backtracking from `τ = 1` until the batch objective shows sufficient
    /// ascent, never going below `1/(r+1)^0.6`.
    Armijo { shrink: f64, slope_fraction: f64 },
}

impl StepRule {
    fn floor(&self, r: usize) -> f64 {
        let exponent = match *self {
            StepRule::Diminishing { exponent } => exponent,
            StepRule::Armijo { .. } => DEFAULT_EXPONENT,
        };
        1.0 / libm::pow((r + 1) as f64, exponent)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsscaConfig {
    pub total_iters: usize,
    pub eps0: f64,
    pub eps1: f64,
    pub step_rule: StepRule,
    pub batch_size: usize,
    pub feasibility_margin: f64,
    pub k_init: Matrix,
    /// Exponent `e` of the optional smoothing `K ← (1 − γ)K + γK̄`,
    /// `γʳ = 1/(r+1)^e`. `None` takes the subproblem solution directly.
    pub smoothing: Option<f64>,
}

impl CsscaConfig {
    /// Defaults for an `s`-dimensional state and `n_r` receive antennas,
    /// starting from `K = 0`.
    pub fn new(s: usize, n_r: usize) -> Self {
        CsscaConfig {
            total_iters: 2000,
            eps0: -1.0,
            eps1: -1.0,
            step_rule: StepRule::Diminishing {
                exponent: DEFAULT_EXPONENT,
            },
            batch_size: 1,
            feasibility_margin: 1e-6,
            k_init: Matrix::zeros(s, n_r),
            smoothing: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, eps) in [("eps0", self.eps0), ("eps1", self.eps1)] {
            if !(eps < 0.0) || !eps.is_finite() {
                return Err(Error::invalid(alloc::format!("{name} must be negative, got {eps}")));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be at least 1"));
        }
        if !(self.feasibility_margin >= 0.0) || !self.feasibility_margin.is_finite() {
            return Err(Error::invalid(alloc::format!(
                "feasibility margin must be >= 0, got {}",
                self.feasibility_margin
            )));
        }
        match self.step_rule {
            StepRule::Diminishing { exponent } if !(exponent > 0.0 && exponent <= 1.0) => {
                return Err(Error::invalid(alloc::format!(
                    "step exponent must lie in (0, 1], got {exponent}"
                )));
            }
            StepRule::Armijo { shrink, slope_fraction }
                if !(shrink > 0.0 && shrink < 1.0) || !(slope_fraction > 0.0 && slope_fraction < 1.0) =>
            {
                return Err(Error::invalid("Armijo shrink and slope fraction must lie in (0, 1)"));
            }
            _ => {}
        }
        if let Some(e) = self.smoothing {
            if !(e > 0.0 && e <= 1.0) {
                return Err(Error::invalid(alloc::format!(
                    "smoothing exponent must lie in (0, 1], got {e}"
                )));
            }
        }
        self.k_init.ensure_finite("k_init")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub tau: f64,
    /// Surrogate values at the new iterate.
    pub f0_hat: f64,
    pub f1_hat: f64,
    /// Batch-sampled objectives at the current iterate.
    pub f0_sample: f64,
    pub f1_sample: f64,
    /// `‖Kʳ⁺¹ − Kʳ‖_F`.
    pub step_norm: f64,
    /// False when the subproblem fell back to feasibility restoration.
    pub feasible: bool,
    pub sigma_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainOptimization {
    pub gain: Matrix,
    pub trace: Vec<IterationRecord>,
}

struct Candidate {
    s0: SurrogateQuadratic,
    s1: SurrogateQuadratic,
    solution: SubproblemSolution,
}

fn build_candidate(
    prev: Option<&(SurrogateQuadratic, SurrogateQuadratic)>,
    k: &Matrix,
    ev: &SampleEvaluation,
    tau: f64,
    cfg: &CsscaConfig,
) -> Result<Candidate> {
    let (s0, s1) = match prev {
        Some((p0, p1)) => (p0.update(k, ev.f0, &ev.g0, tau)?, p1.update(k, ev.f1, &ev.g1, tau)?),
        // Nothing to average with yet.
        None => (
            SurrogateQuadratic::from_sample(k, ev.f0, &ev.g0, cfg.eps0)?,
            SurrogateQuadratic::from_sample(k, ev.f1, &ev.g1, cfg.eps1)?,
        ),
    };
    let solution = solve_subproblem(&s0, &s1, cfg.feasibility_margin)?;
    Ok(Candidate { s0, s1, solution })
}

/// Stochastic successive convex approximation for
/// `max f₀(K)` subject to `f₁(K) > 0`, where `f₀` is the reciprocal MSE bound
/// and `f₁` the stability margin, both in expectation over the effective CSI.
pub fn optimize_gain(
    cfg: &CsscaConfig,
    plant: &PlantModel,
    channel: &ChannelModel,
    topology: &SensorTopology,
    activation: &ActivationModel,
    rng: &mut RandomSource,
) -> Result<GainOptimization> {
    cfg.validate()?;
    let s = plant.dim();
    let n_r = channel.n_r();
    if cfg.k_init.shape() != (s, n_r) {
        return Err(Error::dims("optimize_gain k_init", (s, n_r), cfg.k_init.shape()));
    }
    if topology.state_dim() != s || topology.n_t() != channel.n_t() {
        return Err(Error::dims(
            "optimize_gain topology",
            (channel.n_t(), s),
            (topology.n_t(), topology.state_dim()),
        ));
    }
    let objective = SampledObjective::new(plant, n_r)?;

    let mut k = cfg.k_init.clone();
    let mut surrogates: Option<(SurrogateQuadratic, SurrogateQuadratic)> = None;
    let mut trace = Vec::with_capacity(cfg.total_iters);
    for r in 0..cfg.total_iters {
        let batch = sample_batch(channel, topology, activation, cfg.batch_size, rng)?;
        let ev = objective.evaluate_batch(&k, &batch)?;
        let floor = cfg.step_rule.floor(r);

        let (tau, cand) = match cfg.step_rule {
            StepRule::Diminishing { .. } => (floor, build_candidate(surrogates.as_ref(), &k, &ev, floor, cfg)?),
            StepRule::Armijo { shrink, slope_fraction } => {
                let mut tau = 1.0;
                loop {
                    let cand = build_candidate(surrogates.as_ref(), &k, &ev, tau, cfg)?;
                    if tau <= floor {
                        break (tau, cand);
                    }
                    let next = objective.evaluate_batch(&cand.solution.gain, &batch)?;
                    let mut dir = cand.solution.gain.clone();
                    dir -= &k;
                    let (old, new, grad) = if cand.solution.restoration {
                        (ev.f1, next.f1, &ev.g1)
                    } else {
                        (ev.f0, next.f0, &ev.g0)
                    };
                    if new >= old + slope_fraction * grad.dot(&dir) {
                        break (tau, cand);
                    }
                    tau = (tau * shrink).max(floor);
                }
            }
        };

        let k_next = match cfg.smoothing {
            Some(e) => {
                let gamma = 1.0 / libm::pow((r + 1) as f64, e);
                let mut kn = k.scale(1.0 - gamma);
                kn.add_scaled(gamma, &cand.solution.gain);
                kn
            }
            None => cand.solution.gain.clone(),
        };
        let mut diff = k_next.clone();
        diff -= &k;
        trace.push(IterationRecord {
            iteration: r,
            tau,
            f0_hat: cand.s0.evaluate(&k_next),
            f1_hat: cand.s1.evaluate(&k_next),
            f0_sample: ev.f0,
            f1_sample: ev.f1,
            step_norm: libm::sqrt(diff.sum_of_squares()),
            feasible: !cand.solution.restoration,
            sigma_gap: ev.sigma_gap,
        });
        k = k_next;
        surrogates = Some((cand.s0, cand.s1));
    }
    Ok(GainOptimization { gain: k, trace })
}

/// Curvatures matched to the sampled objectives' second-order behaviour:
/// `ε₁ = −λ_max(E[H Hᵀ])` and `ε₀ = ε₁‖A‖²/Tr W`. Falls back to `−1` for
/// both when the effective channel is identically zero.
pub fn auto_curvature(
    plant: &PlantModel,
    channel: &ChannelModel,
    topology: &SensorTopology,
    activation: &ActivationModel,
    n_samples: usize,
    rng: &mut RandomSource,
) -> Result<(f64, f64)> {
    if n_samples == 0 {
        return Err(Error::invalid("need at least one Monte-Carlo sample"));
    }
    let objective = SampledObjective::new(plant, channel.n_r())?;
    let mut gram = Matrix::zeros(channel.n_r(), channel.n_r());
    for _ in 0..n_samples {
        let h = sample_effective_channel(channel, topology, activation, rng)?;
        gram += &h.mul_transpose(&h);
    }
    gram.scale_in_place(1.0 / n_samples as f64);
    let (values, _) = symmetric_eigen(&gram)?;
    let lambda = values.iter().copied().fold(0.0, f64::max);
    if !(lambda > 0.0) {
        return Ok((-1.0, -1.0));
    }
    Ok((-lambda * objective.a_sq() / plant.w_cov().trace(), -lambda))
}
