//! Split conformal calibration of propagated Gaussians.
//!
//! A transition `((s, u), s')` is lifted to `(N(s, Σ₀), u)`, pushed through the
//! approximate model, and scored by the Mahalanobis distance of `s'` under the
//! prediction. The conservative `(1 − α)` quantile `q̂` of those scores is turned
//! into a covariance multiplier `ξ = q̂² / χ²_{d,α}`: scaling the prediction by
//! `ξ` makes its `(1 − α)` ellipsoid exactly the conformal set `{d_M ≤ q̂}`.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dynamics::{approx_propagate, LinearModel, TransitionTuple};
use crate::error::{Error, Result};
use crate::statmath::{chi2_quantile, CovMatrix, Gaussian, Vec2, Vec4};

/// State dimension; the degrees of freedom of every score.
pub const STATE_DOF: u32 = 4;
/// Default initial uncertainty `Σ₀ = 2·10⁻⁵ I`.
pub const DEFAULT_SIGMA0: f64 = 2e-5;

pub fn default_sigma0() -> CovMatrix<4> {
    CovMatrix::scaled_identity(DEFAULT_SIGMA0).expect("positive diagonal")
}

/// A calibration input after the fixed lift `g`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LiftedInput {
    pub belief: Gaussian<4>,
    pub action: Vec2,
}

pub fn lift(state: &Vec4, action: &Vec2, sigma0: &CovMatrix<4>) -> LiftedInput {
    LiftedInput {
        belief: Gaussian {
            mean: *state,
            cov: *sigma0,
        },
        action: *action,
    }
}

/// Nonconformity score of `y` against the propagated lift.
pub fn residual(model: &LinearModel, x: &LiftedInput, y: &Vec4) -> Result<f64> {
    let pred = approx_propagate(model, &x.belief, &x.action)?;
    Ok(pred.mahalanobis(y))
}

/// Scores many tuples that share one input covariance.
///
/// The propagated covariance does not depend on the mean, so it is factored
/// once and reused.
#[derive(Clone, Copy, Debug)]
pub struct ResidualScorer {
    model: LinearModel,
    predicted_cov: CovMatrix<4>,
}

impl ResidualScorer {
    pub fn new(model: &LinearModel, input_cov: &CovMatrix<4>) -> Result<Self> {
        let probe = Gaussian {
            mean: Vec4::zeros(),
            cov: *input_cov,
        };
        let predicted_cov = approx_propagate(model, &probe, &Vec2::zeros())?.cov;
        Ok(Self {
            model: *model,
            predicted_cov,
        })
    }

    pub fn predicted_cov(&self) -> &CovMatrix<4> {
        &self.predicted_cov
    }

    pub fn score(&self, state: &Vec4, action: &Vec2, next: &Vec4) -> f64 {
        let mean = self.model.mean_step(state, action);
        libm::sqrt(self.predicted_cov.quad_form(&(next - mean)))
    }

    pub fn score_tuple(&self, t: &TransitionTuple) -> f64 {
        self.score(&t.state(), &t.action(), &t.next_state())
    }

    pub fn score_all(&self, tuples: &[TransitionTuple]) -> Vec<f64> {
        tuples.iter().map(|t| self.score_tuple(t)).collect()
    }
}

/// Calibration residuals, optionally weighted.
///
/// The virtual `+∞` score of the unseen test point always carries
/// `infinity_weight` (1 for the unweighted case).
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualSet {
    values: Vec<f64>,
    weights: Option<Vec<f64>>,
    infinity_weight: f64,
}

impl ResidualSet {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_scores(&values)?;
        Ok(Self {
            values,
            weights: None,
            infinity_weight: 1.0,
        })
    }

    pub fn weighted(values: Vec<f64>, weights: Vec<f64>, infinity_weight: f64) -> Result<Self> {
        check_scores(&values)?;
        if weights.len() != values.len() {
            return Err(Error::invalid("one weight per residual is required"));
        }
        let ok = |w: &f64| w.is_finite() && *w >= 0.0;
        if !weights.iter().all(ok) || !ok(&infinity_weight) {
            return Err(Error::invalid("weights must be finite and non-negative"));
        }
        if weights.iter().sum::<f64>() + infinity_weight <= 0.0 {
            return Err(Error::invalid("weights must not all be zero"));
        }
        Ok(Self {
            values,
            weights: Some(weights),
            infinity_weight,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Residuals with non-zero weight.
    pub fn n_effective(&self) -> usize {
        match &self.weights {
            None => self.values.len(),
            Some(w) => w.iter().filter(|w| **w > 0.0).count(),
        }
    }
}

fn check_scores(values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite() && *v >= 0.0) {
        Ok(())
    } else {
        Err(Error::invalid("residuals must be finite and non-negative"))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidProbability(alpha))
    }
}

/// Slack absorbing round-off in `(n + 1)(1 − α)` and cumulative weights.
const RANK_SLACK: f64 = 1e-9;

/// 1-based order statistic `⌈(n + 1)(1 − α)⌉` selected by the unweighted
/// quantile; values above `n` select the `+∞` element.
pub fn conformal_rank(n: usize, alpha: f64) -> usize {
    let target = (n as f64 + 1.0) * (1.0 - alpha);
    libm::ceil(target - RANK_SLACK).max(1.0) as usize
}

/// `inf {x : F(x) ≥ 1 − α}` for the `∞`-augmented empirical distribution.
pub fn conformal_quantile(r: &ResidualSet, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if r.is_empty() {
        return Err(Error::EmptyCalibrationSet);
    }
    match &r.weights {
        None => {
            let k = conformal_rank(r.len(), alpha);
            if k > r.len() {
                return Ok(f64::INFINITY);
            }
            let mut sorted = r.values.clone();
            let (_, kth, _) = sorted.select_nth_unstable_by(k - 1, f64::total_cmp);
            Ok(*kth)
        }
        Some(weights) => {
            let total: f64 = weights.iter().sum::<f64>() + r.infinity_weight;
            let mut order: Vec<usize> = (0..r.len()).filter(|&i| weights[i] > 0.0).collect();
            order.sort_by(|&a, &b| r.values[a].total_cmp(&r.values[b]));
            let target = 1.0 - alpha - RANK_SLACK;
            let mut cum = 0.0;
            for &i in &order {
                cum += weights[i] / total;
                if cum >= target {
                    return Ok(r.values[i]);
                }
            }
            Ok(f64::INFINITY)
        }
    }
}

/// `ξ = q̂² / χ²_{dof}(1 − α)`; `+∞` stays `+∞`.
pub fn scaling_factor(q_hat: f64, dof: u32, alpha: f64) -> Result<f64> {
    if q_hat.is_nan() || q_hat < 0.0 {
        return Err(Error::invalid("q_hat must be non-negative"));
    }
    let chi2 = chi2_quantile(dof, 1.0 - alpha)?;
    if q_hat.is_infinite() {
        return Ok(f64::INFINITY);
    }
    Ok(q_hat * q_hat / chi2)
}

/// Conformal cutoff and the covariance multiplier derived from it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    #[serde(with = "crate::serde_ext::extended_f64")]
    pub q_hat: f64,
    #[serde(with = "crate::serde_ext::extended_f64")]
    pub xi: f64,
    pub alpha: f64,
    pub dof: u32,
    pub n_effective: usize,
}

impl CalibrationResult {
    pub fn from_residuals(set: &ResidualSet, alpha: f64, dof: u32) -> Result<Self> {
        let q_hat = conformal_quantile(set, alpha)?;
        Ok(Self {
            q_hat,
            xi: scaling_factor(q_hat, dof, alpha)?,
            alpha,
            dof,
            n_effective: set.n_effective(),
        })
    }

    pub fn is_bounded(&self) -> bool {
        self.xi.is_finite()
    }
}

/// Splits conformal calibration over a whole tuple set.
pub fn calibrate_global(
    model: &LinearModel,
    tuples: &[TransitionTuple],
    sigma0: &CovMatrix<4>,
    alpha: f64,
) -> Result<CalibrationResult> {
    check_alpha(alpha)?;
    if tuples.is_empty() {
        return Err(Error::EmptyCalibrationSet);
    }
    let scores = ResidualScorer::new(model, sigma0)?.score_all(tuples);
    CalibrationResult::from_residuals(&ResidualSet::new(scores)?, alpha, STATE_DOF)
}

/// The prediction with its covariance multiplied by `ξ`.
pub fn calibrated_gaussian(bel_pred: &Gaussian<4>, xi: f64) -> Result<Gaussian<4>> {
    if xi == f64::INFINITY {
        return Err(Error::UnboundedRegion);
    }
    Ok(Gaussian {
        mean: bel_pred.mean,
        cov: bel_pred.cov.scaled(xi)?,
    })
}

/// Probability that all of `steps` independent per-step `(1 − α)` regions
/// hold, `(1 − α)^steps`.
pub fn chained_coverage(alpha: f64, steps: u32) -> f64 {
    libm::pow(1.0 - alpha, f64::from(steps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{double_integrator_model, true_step_mean, Environment, Rect, Subgoal};
    use crate::statmath::Mat4;
    use alloc::vec;

    fn set(v: &[f64]) -> ResidualSet {
        ResidualSet::new(v.to_vec()).unwrap()
    }

    #[test]
    fn quantile_examples() {
        let r = set(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
        assert_eq!(conformal_quantile(&r, 0.1).unwrap(), 9.0);
        assert_eq!(conformal_quantile(&set(&[5.0, 5.0, 5.0]), 0.5).unwrap(), 5.0);
        assert_eq!(conformal_quantile(&set(&[1.0, 2.0]), 0.1).unwrap(), f64::INFINITY);
        assert_eq!(
            conformal_quantile(&ResidualSet::new(vec![]).unwrap(), 0.1),
            Err(Error::EmptyCalibrationSet)
        );
        assert!(conformal_quantile(&r, 0.0).is_err());
        assert!(ResidualSet::new(vec![-1.0]).is_err());
        assert!(ResidualSet::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn indicator_weights_match_subset() {
        let values = vec![4.0, 1.0, 7.0, 3.0, 9.0, 2.0, 8.0, 6.0, 5.0, 0.5];
        let mask = [1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0, 1.0];
        let subset: Vec<f64> = values.iter().zip(&mask).filter(|(_, m)| **m > 0.0).map(|(v, _)| *v).collect();
        let weighted = ResidualSet::weighted(values, mask.to_vec(), 1.0).unwrap();
        assert_eq!(weighted.n_effective(), 7);
        for &alpha in &[0.1, 0.2, 0.3, 0.5, 0.8] {
            assert_eq!(
                conformal_quantile(&weighted, alpha).unwrap(),
                conformal_quantile(&set(&subset), alpha).unwrap(),
                "alpha {alpha}"
            );
        }
    }

    #[test]
    fn weighted_rejects_bad_weights() {
        assert!(ResidualSet::weighted(vec![1.0], vec![], 1.0).is_err());
        assert!(ResidualSet::weighted(vec![1.0], vec![-1.0], 1.0).is_err());
        assert!(ResidualSet::weighted(vec![1.0], vec![0.0], 0.0).is_err());
    }

    #[test]
    fn scaling_factor_examples() {
        let chi = chi2_quantile(4, 0.9).unwrap();
        assert!((scaling_factor(libm::sqrt(chi), 4, 0.1).unwrap() - 1.0).abs() < 1e-12);
        let x1 = scaling_factor(1.3, 4, 0.1).unwrap();
        let x2 = scaling_factor(2.6, 4, 0.1).unwrap();
        assert!((x2 / x1 - 4.0).abs() < 1e-12);
        assert!((scaling_factor(3.0, 4, 0.1).unwrap() - 9.0 / 7.779440).abs() < 1e-6);
        assert_eq!(scaling_factor(f64::INFINITY, 4, 0.1).unwrap(), f64::INFINITY);
        assert!(scaling_factor(-1.0, 4, 0.1).is_err());
    }

    #[test]
    fn lift_copies_inputs() {
        let sigma0 = default_sigma0();
        let x = lift(&Vec4::new(1.0, 2.0, 3.0, 4.0), &Vec2::new(0.1, 0.2), &sigma0);
        for i in 0..4 {
            assert_eq!(x.belief.cov.matrix()[(i, i)], 2e-5);
        }
        assert_eq!(x.belief.mean, Vec4::new(1.0, 2.0, 3.0, 4.0));
        assert_eq!(x, lift(&Vec4::new(1.0, 2.0, 3.0, 4.0), &Vec2::new(0.1, 0.2), &sigma0));
    }

    #[test]
    fn residual_pipeline_on_yellow_tuple() {
        let model = double_integrator_model(0.05, 0.0).unwrap();
        let env = Environment {
            name: "t".into(),
            bounds: Rect::new(-5.0, -5.0, 5.0, 5.0),
            obstacles: vec![],
            shifted_regions: vec![Rect::new(-1.0, -1.0, 1.0, 1.0)],
            subgoals: vec![Subgoal { center: [4.0, 4.0], radius: 0.5 }],
            start: [0.0; 4],
        };
        let s = Vec4::new(0.0, 0.0, 1.0, 0.0);
        let u = Vec2::new(1.0, 0.0);
        let y = true_step_mean(&env, &model, &s, &u);
        let x = lift(&s, &u, &default_sigma0());
        let r = residual(&model, &x, &y).unwrap();

        // explicit solve against the propagated covariance
        let pred = model.mean_step(&s, &u);
        assert!((pred[0] - 0.05125).abs() < 1e-12);
        let cov = model.a * Mat4::identity() * 2e-5 * model.a.transpose() + model.q.matrix();
        let d = y - pred;
        let expected = libm::sqrt((d.transpose() * cov.try_inverse().unwrap() * d)[(0, 0)]);
        assert!((r - expected).abs() < 1e-9 * expected);
        assert!(r > 0.0);

        let white = lift(&Vec4::new(3.0, 3.0, 1.0, 0.0), &u, &default_sigma0());
        let y = true_step_mean(&env, &model, &white.belief.mean, &u);
        assert_eq!(residual(&model, &white, &y).unwrap(), 0.0);

        let scorer = ResidualScorer::new(&model, &default_sigma0()).unwrap();
        assert!((scorer.score(&s, &u, &true_step_mean(&env, &model, &s, &u)) - r).abs() < 1e-12);
    }

    #[test]
    fn larger_sigma0_lowers_residual() {
        let model = LinearModel::nominal();
        let s = Vec4::new(0.0, 0.0, 1.0, 0.0);
        let u = Vec2::new(0.0, 0.0);
        let y = Vec4::new(0.06, 0.01, 1.02, 0.0);
        let small = residual(&model, &lift(&s, &u, &default_sigma0()), &y).unwrap();
        let big_cov = CovMatrix::scaled_identity(4e-5).unwrap();
        let big = residual(&model, &lift(&s, &u, &big_cov), &y).unwrap();
        assert!(big < small);
    }

    #[test]
    fn calibrate_global_perfect_model() {
        let model = double_integrator_model(0.05, 0.0).unwrap();
        let tuples: Vec<TransitionTuple> = (0..20)
            .map(|i| {
                let s = Vec4::new(i as f64 * 0.1, 0.0, 0.5, -0.5);
                let u = Vec2::new(0.4, -0.4);
                TransitionTuple::new(s, u, model.mean_step(&s, &u))
            })
            .collect();
        let cal = calibrate_global(&model, &tuples, &default_sigma0(), 0.1).unwrap();
        assert_eq!(cal.q_hat, 0.0);
        assert_eq!(cal.xi, 0.0);
        assert_eq!(cal.n_effective, 20);
        assert_eq!(calibrate_global(&model, &[], &default_sigma0(), 0.1), Err(Error::EmptyCalibrationSet));
    }

    #[test]
    fn calibrated_gaussian_scales_covariance() {
        let g = Gaussian::new(Vec4::zeros(), default_sigma0()).unwrap();
        assert_eq!(calibrated_gaussian(&g, 1.0).unwrap(), g);
        let y = Vec4::new(0.01, 0.0, 0.0, -0.01);
        let g4 = calibrated_gaussian(&g, 4.0).unwrap();
        assert!((g4.mahalanobis(&y) - g.mahalanobis(&y) / 2.0).abs() < 1e-12);
        assert_eq!(calibrated_gaussian(&g, f64::INFINITY), Err(Error::UnboundedRegion));
        assert!(calibrated_gaussian(&g, 0.0).is_err());
    }

    #[test]
    fn chained_coverage_decays() {
        assert!((chained_coverage(0.1, 2) - 0.81).abs() < 1e-12);
        assert_eq!(chained_coverage(0.1, 0), 1.0);
    }
}
