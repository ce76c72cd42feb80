//! Problem generators and multi-trial experiments.

pub mod deblur;
pub mod experiment;
pub mod problem;

pub use deblur::{blur_operator, gaussian_kernel, gen_deblur, gen_deblur_with, images_to_tensor, tensor_to_images};
pub use experiment::{
    all_methods_config, run_experiment, trial_seed, write_outputs, ExperimentConfig, ExperimentResult, MeanCurve,
    MethodSpec, MethodSummary, SketchChoice, SketchSpec, Stat, Summary, TrialRun, THREADS_ENV,
};
pub use problem::{gen_gaussian, generate, relative_error, GeneratedProblem, KernelSpec, ProblemKind, ProblemSpec};
