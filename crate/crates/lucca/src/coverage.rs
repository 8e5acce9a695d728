//! Empirical multi-step coverage of calibrated and uncalibrated rollouts.

use lucca_core::dynamics::{true_step, Environment, LinearModel};
use lucca_core::locart::{ConstantXi, XiSource};
use lucca_core::planner::calibrated_rollout;
use lucca_core::rng::SeedTree;
use lucca_core::statmath::{chi2_quantile, CovMatrix, Gaussian, Vec2, Vec4};
use serde::Serialize;

use crate::error::Result;
use crate::preset::Scenario;

/// Per-step coverage of one scenario.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioCoverage {
    pub label: String,
    /// Fraction of true states inside the calibrated (1−α) ellipsoid, step 1..=H.
    pub lucca: Vec<f64>,
    /// Same for the uncalibrated `AΣAᵀ + Q` recursion.
    pub baseline: Vec<f64>,
    /// `ξ` applied by the calibrated rollout at each step.
    pub xi: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverageReport {
    pub alpha: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub scenarios: Vec<ScenarioCoverage>,
}

/// Inputs shared by every scenario of a coverage run.
pub struct CoverageSetup<'a, S: XiSource + ?Sized> {
    pub env: &'a Environment,
    pub approx: &'a LinearModel,
    pub truth: &'a LinearModel,
    pub xi: &'a S,
    pub sigma0: CovMatrix<4>,
    pub alpha: f64,
    pub horizon: usize,
    /// Start each true trajectory from a draw of `N(s₀, Σ₀)` rather than `s₀`.
    pub sample_start: bool,
}

/// For each scenario: roll the belief forward under the constant control with
/// and without calibration, simulate `n_samples` true trajectories from the
/// start belief and count, per step, the states inside each 4-D region.
///
/// Trajectory `i` of scenario `label` uses substream `i` of stream `label`.
pub fn run_coverage_experiment<S: XiSource + ?Sized>(
    setup: &CoverageSetup<'_, S>,
    scenarios: &[Scenario],
    n_samples: usize,
    seeds: &SeedTree,
) -> Result<Vec<ScenarioCoverage>> {
    let radius2 = chi2_quantile(4, 1.0 - setup.alpha)?;
    let mut out = Vec::with_capacity(scenarios.len());
    for sc in scenarios {
        let s0 = Vec4::from(sc.state);
        let u = Vec2::from(sc.control);
        let controls = vec![u; setup.horizon];
        let start = Gaussian::new(s0, setup.sigma0)?;
        let cal = calibrated_rollout(setup.approx, setup.xi, &start, &controls)?;
        let base = calibrated_rollout(setup.approx, &ConstantXi(1.0), &start, &controls)?;

        let mut inside_cal = vec![0usize; setup.horizon];
        let mut inside_base = vec![0usize; setup.horizon];
        for i in 0..n_samples {
            let mut rng = seeds.stream(&sc.label, i as u64);
            let mut s = if setup.sample_start { start.sample(&mut rng) } else { s0 };
            for t in 0..setup.horizon {
                s = true_step(setup.env, setup.truth, &s, &u, &mut rng);
                if cal.beliefs[t].mahalanobis_sq(&s) <= radius2 {
                    inside_cal[t] += 1;
                }
                if base.beliefs[t].mahalanobis_sq(&s) <= radius2 {
                    inside_base[t] += 1;
                }
            }
        }
        let ratio = |c: Vec<usize>| c.into_iter().map(|k| k as f64 / n_samples.max(1) as f64).collect();
        out.push(ScenarioCoverage {
            label: sc.label.clone(),
            lucca: ratio(inside_cal),
            baseline: ratio(inside_base),
            xi: cal.xis.clone(),
        });
    }
    Ok(out)
}
