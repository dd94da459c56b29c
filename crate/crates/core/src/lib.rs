//! Minimum-time pacing for cycling.
//!
//! A rider is modelled by critical power, a finite anaerobic reserve and a
//! power ceiling that shrinks as the reserve drains. Given a course profile the
//! solver finds the power plan that minimizes finish time by dynamic
//! programming over distance, velocity and remaining energy, restricting the
//! input at each node to zero, critical power, constant-speed power or maximal
//! power.

pub mod calibration;
pub mod course;
pub mod dynamics;
pub mod error;
pub mod kvfile;
pub mod rider;
pub mod scenarios;
pub mod simulate;
pub mod solver;
pub mod summary;
pub mod trajectory;

pub use course::{load_course, Course, CourseFormat};
pub use dynamics::{BikeEnvParams, BikeParams, DynamicsVariant, KinematicState, RideModel};
pub use error::{Error, Result};
pub use kvfile::KvFile;
pub use rider::{reference_subject, EnergyState, RiderParams, RiderValues};
pub use solver::{
    admissible_inputs, backward_sweep, dense_oracle, forward_pass, forward_pass_lookahead, DpConfig,
    DpSolution,
    ValueRetention,
};
pub use trajectory::{Action, Mode, Trajectory, TrajectorySample, TrajectoryTotals};
pub use simulate::{simulate, PlanAxis, PowerPlan, SimulationOutcome};
pub use summary::{compare, Comparison, RunSummary};
