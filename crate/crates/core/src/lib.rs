//! Resource-constrained project scheduling by gradient descent on a
//! differentiable relaxation, plus the exact tools needed to check and
//! benchmark the schedules it produces.

pub mod harness;
pub mod instance;
pub mod optimizer;
pub mod penalty;
pub mod relax;
pub mod scalar;
pub mod schedule;

pub use instance::{parse_sm, synth_instance, InstanceError, InstanceViolation, ProjectInstance, SynthSpec};
pub use optimizer::{
    solve, ConvergenceTrace, OptimizerConfig, RelaxationSchedule, SolveError, SolveOutcome, SolverConfig,
    SolverState, TraceRecord,
};
pub use penalty::{PenaltyController, PenaltyControllerConfig};
pub use relax::{LossBreakdown, RelaxError, Relaxation, RelaxationConfig};
pub use scalar::Scalar;
pub use schedule::{
    brute_force_optimal, check_feasible, critical_path, extract_schedule, is_feasible, repair_schedule, ssgs,
    PriorityRule, Schedule, ScheduleError, ScheduleViolation,
};

pub type Relaxation32 = Relaxation<f32>;
pub type Relaxation64 = Relaxation<f64>;
pub type LossBreakdown32 = LossBreakdown<f32>;
pub type LossBreakdown64 = LossBreakdown<f64>;
pub type SolveOutcome32 = SolveOutcome<f32>;
pub type SolveOutcome64 = SolveOutcome<f64>;
pub type SolverState64 = SolverState<f64>;
