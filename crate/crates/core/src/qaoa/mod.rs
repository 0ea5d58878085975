//! Circuit evaluation, estimators, optimizer and parameter schedules.

pub mod estimate;
pub mod evolve;
pub mod optimizer;
pub mod params;
pub mod report;
pub mod schedule;

pub use estimate::{
    approximation_ratio, cvar_exact, cvar_sampled, normal_exact, normal_sampled, Distribution, EstimatorConfig, Mode,
    Objective, Outcome, Samples,
};
pub use evolve::{Evaluator, QaoaProblem};
pub use optimizer::{minimize, OptimizeResult, OptimizerConfig};
pub use params::{interpolate_params, linear_coordinates, QaoaParams};
pub use report::{write_cdf_csv, RunReport};
pub use schedule::{
    refine, run_scheduler, sample20_starts, schedule_iols, schedule_iqaoa, schedule_ols, schedule_sample20, LevelResult,
    ScheduleConfig, ScheduleOutcome, Scheduler,
};
