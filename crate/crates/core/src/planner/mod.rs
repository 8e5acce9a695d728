//! MPPI planning over calibrated uncertainty rollouts.
//!
//! Every sampled control sequence is rolled out through the approximate model
//! with a `ξ` queried per step; the cost charges distance to the goal, the
//! trace of the calibrated covariance and a large penalty whenever the
//! position confidence ellipse meets an obstacle. The uncalibrated baseline is
//! the same machinery with [`ConstantXi(1.0)`](crate::locart::ConstantXi).

mod collision;
mod episode;
mod mppi;
mod rollout;

pub use collision::{collision_indicator, position_radius2, CollisionChecker, PositionEllipse};
pub use episode::{mpc_run, EpisodeRecord, Outcome, StepRecord};
pub use mppi::{batch_costs, mppi_step, shift_warm_start, softmin_weights, MppiConfig, MppiOutput, Planner};
pub use rollout::{calibrated_rollout, calibrated_step, rollout_cost, CostBreakdown, CostParams, RolloutResult};
