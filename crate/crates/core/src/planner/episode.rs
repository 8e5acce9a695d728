use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mppi::{shift_warm_start, Planner};
use crate::dynamics::{position, true_step, LinearModel};
use crate::error::Result;
use crate::locart::XiSource;
use crate::statmath::Vec2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Collision,
    Timeout,
}

/// One executed MPC step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub state: [f64; 4],
    pub action: [f64; 2],
    pub subgoal_index: usize,
    pub min_cost: f64,
    /// Mean `ξ` over the horizon of the plan whose first action was executed.
    pub mean_xi: f64,
    /// The state reached by this step is in collision.
    pub collision: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub outcome: Outcome,
    pub steps: Vec<StepRecord>,
    pub final_state: [f64; 4],
}

impl EpisodeRecord {
    pub fn n_steps(&self) -> usize {
        self.steps.len()
    }
}

/// Receding-horizon loop on the true system.
///
/// Each iteration checks the current true state (collision, then sub-goal
/// progress, then final-goal arrival, then the step budget), plans, and
/// executes the first planned action on `true_model` with process noise. The
/// run succeeds once the state enters the last sub-goal.
pub fn mpc_run<S: XiSource + ?Sized, R1: Rng + ?Sized, R2: Rng + ?Sized>(
    planner: &Planner<'_, S>,
    true_model: &LinearModel,
    max_steps: usize,
    plan_rng: &mut R1,
    noise_rng: &mut R2,
) -> Result<EpisodeRecord> {
    let env = planner.env;
    let last = env.subgoals.len() - 1;
    let mut state = env.start_state();
    let mut subgoal = 0;
    let mut warm = vec![Vec2::zeros(); planner.cfg.horizon];
    let mut steps = Vec::new();
    let outcome = loop {
        let p = position(&state);
        if env.is_collision(&p) {
            break Outcome::Collision;
        }
        while subgoal < last && env.subgoals[subgoal].contains(&p) {
            subgoal += 1;
        }
        if env.subgoals[last].contains(&p) {
            break Outcome::Success;
        }
        if steps.len() >= max_steps {
            break Outcome::Timeout;
        }
        let goal = env.subgoals[subgoal].center();
        let out = planner.step(&state, &warm, &goal, plan_rng)?;
        let u = out.controls[0];
        let next = true_step(env, true_model, &state, &u, noise_rng);
        steps.push(StepRecord {
            t: steps.len(),
            state: state.into(),
            action: u.into(),
            subgoal_index: subgoal,
            min_cost: out.min_cost,
            mean_xi: out.plan.mean_xi(),
            collision: env.is_collision(&position(&next)),
        });
        state = next;
        warm = shift_warm_start(&out.controls);
    };
    Ok(EpisodeRecord {
        outcome,
        steps,
        final_state: state.into(),
    })
}
