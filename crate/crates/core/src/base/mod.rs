//! Shared primitives: problems, partitions, schedules, merits and proximal maps.

pub mod diagnostics;
pub mod linesearch;
pub mod merit;
pub mod partition;
pub mod problem;
pub mod prox;
pub mod schedule;

pub use linesearch::armijo_linesearch;
pub use merit::MeritReport;
pub use partition::BlockPartition;
pub use problem::{CompositeProblem, Tolerances};
pub use prox::{project_ball2, project_box, project_nonneg, soft_threshold};
pub use schedule::{Schedule, ScheduleKind};
