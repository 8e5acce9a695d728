use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::collision::CollisionChecker;
use super::rollout::{calibrated_rollout, evaluate_controls, CostBreakdown, CostParams, RolloutResult};
use crate::dynamics::{Environment, LinearModel};
use crate::error::{Error, Result};
use crate::locart::XiSource;
use crate::statmath::{CovMatrix, Gaussian, Vec2, Vec4};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MppiConfig {
    pub horizon: usize,
    pub n_samples: usize,
    pub lambda: f64,
    /// `[[a_x lo, a_x hi], [a_y lo, a_y hi]]` in m/s².
    pub control_bounds: [[f64; 2]; 2],
    pub control_noise_cov: CovMatrix<2>,
    pub seed: u64,
}

impl Default for MppiConfig {
    fn default() -> Self {
        Self {
            horizon: 8,
            n_samples: 4096,
            lambda: 1.0,
            control_bounds: [[-0.9, 0.9], [-0.9, 0.9]],
            control_noise_cov: CovMatrix::scaled_identity(1.0).expect("identity"),
            seed: 0,
        }
    }
}

impl MppiConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::validation("horizon", "must be at least 1"));
        }
        if self.n_samples == 0 {
            return Err(Error::validation("n_samples", "must be at least 1"));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::validation("lambda", "must be positive"));
        }
        if self.control_bounds.iter().any(|[lo, hi]| !(lo < hi)) {
            return Err(Error::validation("control_bounds", "need lo < hi on each axis"));
        }
        Ok(())
    }

    pub fn clamp(&self, u: &Vec2) -> Vec2 {
        let [[xl, xh], [yl, yh]] = self.control_bounds;
        Vec2::new(u.x.clamp(xl, xh), u.y.clamp(yl, yh))
    }
}

/// Everything needed to plan with calibrated rollouts in one environment.
#[derive(Clone, Copy)]
pub struct Planner<'a, S: XiSource + ?Sized> {
    pub model: &'a LinearModel,
    pub xi: &'a S,
    pub env: &'a Environment,
    pub cfg: &'a MppiConfig,
    pub params: &'a CostParams,
    pub alpha: f64,
    pub sigma0: CovMatrix<4>,
}

/// Output of one MPPI iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct MppiOutput {
    pub controls: Vec<Vec2>,
    pub min_cost: f64,
    pub mean_cost: f64,
    /// Calibrated rollout of `controls` from the current state.
    pub plan: RolloutResult,
}

/// Softmin weights `exp(−(c − min c)/λ)`, normalized.
pub fn softmin_weights(costs: &[f64], lambda: f64) -> Vec<f64> {
    let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let mut w: Vec<f64> = costs.iter().map(|c| libm::exp(-(c - min) / lambda)).collect();
    let sum: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= sum);
    w
}

/// Batch totals, with the terminal distance min-max normalized when asked.
pub fn batch_costs(breakdowns: &[CostBreakdown], params: &CostParams) -> Vec<f64> {
    if !params.normalize_terminal {
        return breakdowns.iter().map(|b| b.total(params)).collect();
    }
    let (lo, hi) = breakdowns.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), b| {
        (lo.min(b.terminal_distance), hi.max(b.terminal_distance))
    });
    let span = hi - lo;
    breakdowns
        .iter()
        .map(|b| {
            let t = if span > 0.0 { (b.terminal_distance - lo) / span } else { 0.0 };
            b.total_with_terminal(params, t)
        })
        .collect()
}

/// Previous plan advanced by one step, zero-padded.
pub fn shift_warm_start(controls: &[Vec2]) -> Vec<Vec2> {
    let mut next: Vec<Vec2> = controls.iter().skip(1).copied().collect();
    next.push(Vec2::zeros());
    next
}

impl<S: XiSource + ?Sized> Planner<'_, S> {
    pub fn start_belief(&self, state: &Vec4) -> Result<Gaussian<4>> {
        Gaussian::new(*state, self.sigma0)
    }

    /// One MPPI iteration around `warm_start` toward `goal`.
    pub fn step<R: Rng + ?Sized>(
        &self,
        current: &Vec4,
        warm_start: &[Vec2],
        goal: &Vec2,
        rng: &mut R,
    ) -> Result<MppiOutput> {
        self.cfg.validate()?;
        let h = self.cfg.horizon;
        if warm_start.len() != h {
            return Err(Error::invalid("warm start length must equal the horizon"));
        }
        let n = self.cfg.n_samples;
        let start = self.start_belief(current)?;
        let checker = CollisionChecker::new(self.env, self.alpha)?;
        let noise = Gaussian {
            mean: Vec2::zeros(),
            cov: self.cfg.control_noise_cov,
        };

        let mut samples = Vec::with_capacity(n * h);
        for _ in 0..n {
            for u in warm_start {
                samples.push(self.cfg.clamp(&(u + noise.sample(rng))));
            }
        }
        let mut breakdowns = Vec::with_capacity(n);
        for seq in samples.chunks_exact(h) {
            breakdowns.push(evaluate_controls(
                self.model,
                self.xi,
                &start,
                seq,
                &checker,
                self.params,
                goal,
            )?);
        }
        let costs = batch_costs(&breakdowns, self.params);
        let weights = softmin_weights(&costs, self.cfg.lambda);

        let mut controls = vec![Vec2::zeros(); h];
        for (seq, w) in samples.chunks_exact(h).zip(&weights) {
            for (acc, u) in controls.iter_mut().zip(seq) {
                *acc += u * *w;
            }
        }
        let controls: Vec<Vec2> = controls.iter().map(|u| self.cfg.clamp(u)).collect();
        let plan = calibrated_rollout(self.model, self.xi, &start, &controls)?;
        Ok(MppiOutput {
            min_cost: costs.iter().copied().fold(f64::INFINITY, f64::min),
            mean_cost: costs.iter().sum::<f64>() / n as f64,
            controls,
            plan,
        })
    }
}

/// Free-function form of [`Planner::step`].
pub fn mppi_step<S: XiSource + ?Sized, R: Rng + ?Sized>(
    planner: &Planner<'_, S>,
    current: &Vec4,
    warm_start: &[Vec2],
    goal: &Vec2,
    rng: &mut R,
) -> Result<MppiOutput> {
    planner.step(current, warm_start, goal, rng)
}
