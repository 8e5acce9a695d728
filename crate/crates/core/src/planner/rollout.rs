use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::collision::CollisionChecker;
use crate::conformal::calibrated_gaussian;
use crate::dynamics::{approx_propagate, LinearModel};
use crate::error::{Error, Result};
use crate::locart::{FeatureVector, XiQuery, XiSource};
use crate::statmath::{Gaussian, Vec2};

/// Weights of the planning objective.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    pub w_terminal: f64,
    pub w_running: f64,
    pub w_trace: f64,
    pub w_collision: f64,
    /// Min-max normalize the terminal distance across each MPPI batch.
    pub normalize_terminal: bool,
    /// Also charge trace and collision on the last belief of the horizon.
    pub penalize_terminal_belief: bool,
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            w_terminal: 1.15,
            w_running: 1.1,
            w_trace: 1.8,
            w_collision: 1e5,
            normalize_terminal: true,
            penalize_terminal_belief: true,
        }
    }
}

/// Cost terms of one rollout before batch normalization.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CostBreakdown {
    /// Raw Euclidean distance of the final mean to the goal (unweighted).
    pub terminal_distance: f64,
    pub running: f64,
    pub trace: f64,
    pub collision: f64,
    pub collided: bool,
}

impl CostBreakdown {
    /// Total with the given (possibly normalized) terminal distance.
    pub fn total_with_terminal(&self, params: &CostParams, terminal: f64) -> f64 {
        params.w_terminal * terminal + self.running + self.trace + self.collision
    }

    pub fn total(&self, params: &CostParams) -> f64 {
        self.total_with_terminal(params, self.terminal_distance)
    }
}

/// Calibrated beliefs of one control sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct RolloutResult {
    pub beliefs: Vec<Gaussian<4>>,
    pub xis: Vec<f64>,
    pub fallback_flags: Vec<bool>,
}

impl RolloutResult {
    pub fn horizon(&self) -> usize {
        self.beliefs.len()
    }

    pub fn mean_xi(&self) -> f64 {
        self.xis.iter().sum::<f64>() / self.xis.len().max(1) as f64
    }
}

/// One step of the calibrated recursion: propagate, query `ξ` at the
/// pre-transition mean and the action, scale the predicted covariance.
pub fn calibrated_step<S: XiSource + ?Sized>(
    model: &LinearModel,
    xi: &S,
    bel: &Gaussian<4>,
    u: &Vec2,
) -> Result<(Gaussian<4>, XiQuery)> {
    let pred = approx_propagate(model, bel, u)?;
    let q = xi.query(&FeatureVector::new(&bel.mean, u));
    Ok((calibrated_gaussian(&pred, q.xi)?, q))
}

pub fn calibrated_rollout<S: XiSource + ?Sized>(
    model: &LinearModel,
    xi: &S,
    start: &Gaussian<4>,
    controls: &[Vec2],
) -> Result<RolloutResult> {
    if controls.is_empty() {
        return Err(Error::invalid("rollout horizon must be at least 1"));
    }
    let mut out = RolloutResult {
        beliefs: Vec::with_capacity(controls.len()),
        xis: Vec::with_capacity(controls.len()),
        fallback_flags: Vec::with_capacity(controls.len()),
    };
    let mut bel = *start;
    for u in controls {
        let (next, q) = calibrated_step(model, xi, &bel, u)?;
        out.beliefs.push(next);
        out.xis.push(q.xi);
        out.fallback_flags.push(q.fallback_used);
        bel = next;
    }
    Ok(out)
}

/// Accumulates the objective one belief at a time, `step` counting from 1.
pub(crate) struct CostAccumulator<'a> {
    params: &'a CostParams,
    checker: &'a CollisionChecker<'a>,
    goal: Vec2,
    horizon: usize,
    acc: CostBreakdown,
}

impl<'a> CostAccumulator<'a> {
    pub(crate) fn new(params: &'a CostParams, checker: &'a CollisionChecker<'a>, goal: Vec2, horizon: usize) -> Self {
        Self {
            params,
            checker,
            goal,
            horizon,
            acc: CostBreakdown::default(),
        }
    }

    pub(crate) fn push(&mut self, step: usize, bel: &Gaussian<4>) {
        let d = (Vec2::new(bel.mean[0], bel.mean[1]) - self.goal).norm();
        let terminal = step == self.horizon;
        if terminal {
            self.acc.terminal_distance = d;
        } else {
            self.acc.running += self.params.w_running * d;
        }
        if !terminal || self.params.penalize_terminal_belief {
            self.acc.trace += self.params.w_trace * bel.cov.trace();
            if self.checker.check(bel) {
                self.acc.collision += self.params.w_collision;
                self.acc.collided = true;
            }
        }
    }

    pub(crate) fn finish(self) -> CostBreakdown {
        self.acc
    }
}

/// Objective terms of a rollout toward `goal`.
pub fn rollout_cost(
    r: &RolloutResult,
    checker: &CollisionChecker<'_>,
    params: &CostParams,
    goal: &Vec2,
) -> CostBreakdown {
    let mut acc = CostAccumulator::new(params, checker, *goal, r.horizon());
    for (i, bel) in r.beliefs.iter().enumerate() {
        acc.push(i + 1, bel);
    }
    acc.finish()
}

/// Cost of a control sequence without materializing the rollout.
pub(crate) fn evaluate_controls<S: XiSource + ?Sized>(
    model: &LinearModel,
    xi: &S,
    start: &Gaussian<4>,
    controls: &[Vec2],
    checker: &CollisionChecker<'_>,
    params: &CostParams,
    goal: &Vec2,
) -> Result<CostBreakdown> {
    let mut acc = CostAccumulator::new(params, checker, *goal, controls.len());
    let mut bel = *start;
    for (i, u) in controls.iter().enumerate() {
        bel = calibrated_step(model, xi, &bel, u)?.0;
        acc.push(i + 1, &bel);
    }
    Ok(acc.finish())
}
