//! Offline design of the constant filtering gain: drift and stability
//! analysis, and a CSSCA optimizer for the stability-constrained MSE bound.

mod cssca;
mod stability;
mod surrogate;

pub use cssca::{auto_curvature, optimize_gain, CsscaConfig, GainOptimization, IterationRecord, StepRule};
pub use stability::{
    contraction_sample, drift_bound, estimate_contraction, estimate_drift_contraction, sample_effective_channel,
    sample_value_and_grads, stability_report, SampleEvaluation, SampledObjective, StabilityReport,
};
pub use surrogate::{solve_subproblem, surrogate_update, SubproblemSolution, SurrogateQuadratic};
