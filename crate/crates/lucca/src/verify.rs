//! Self-checks behind `lucca verify`: statistical oracles, the ordering
//! properties that make multi-step calibration valid, and one-step coverage.

use lucca_core::conformal::{conformal_quantile, default_sigma0, ResidualScorer, ResidualSet};
use lucca_core::dynamics::{approx_propagate, LinearModel, TransitionTuple};
use lucca_core::locart::{fit_locart, ConstantXi, LocartConfig};
use lucca_core::planner::calibrated_rollout;
use lucca_core::rng::SeedTree;
use lucca_core::statmath::{chi2_quantile, is_psd, CovMatrix, LOEWNER_TOL, Gaussian, Mat4, Vec2, Vec4};
use rand::Rng;

use crate::calibrate::calibration_set;
use crate::envfile::builtin_environment;
use crate::error::Result;
use crate::preset::ExperimentPreset;

pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }
}

/// χ² CDF by Simpson integration of the density after substituting `x = t²`.
fn chi2_cdf_by_quadrature(dof: u32, x: f64) -> f64 {
    let k = dof as f64;
    let half = k / 2.0;
    let gamma_half = if dof.is_multiple_of(2) {
        (1..dof / 2).map(|i| i as f64).product::<f64>()
    } else {
        (0..dof / 2).fold(std::f64::consts::PI.sqrt(), |g, i| g * (i as f64 + 0.5))
    };
    let norm = 2f64.powf(half) * gamma_half;
    let g = |t: f64| 2.0 * t.powf(k - 1.0) * (-t * t / 2.0).exp() / norm;
    let n = 4000;
    let b = x.sqrt();
    let h = b / n as f64;
    let mut s = g(0.0) + g(b);
    for i in 1..n {
        s += g(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn chi2_quantile_oracle(dof: u32, p: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 100.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if chi2_cdf_by_quadrature(dof, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn check_chi2() -> Result<CheckResult> {
    let mut worst: f64 = 0.0;
    for dof in [1, 2, 3, 4, 8] {
        for p in [0.5, 0.9, 0.95, 0.99] {
            worst = worst.max((chi2_quantile(dof, p)? - chi2_quantile_oracle(dof, p)).abs());
        }
    }
    Ok(CheckResult::new(
        "chi2 quantile vs quadrature",
        worst <= 1e-6,
        format!("max abs error {worst:.2e}"),
    ))
}

pub fn check_conformal_rank(seed: u64) -> Result<CheckResult> {
    let mut rng = SeedTree::new(seed).stream("verify-conformal", 0);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=50);
        let values: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 5.0).collect();
        let alpha: f64 = [0.05f64, 0.1, 0.2, 0.5][rng.random_range(0..4)];
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        // smallest k with k >= (n + 1)(1 - alpha), counted in hundredths
        let need = (n as u64 + 1) * (100 - (alpha * 100.0).round() as u64);
        let k = (1..=n as u64 + 1).find(|k| k * 100 >= need).unwrap() as usize;
        let expected = if k > n { f64::INFINITY } else { sorted[k - 1] };
        if conformal_quantile(&ResidualSet::new(values)?, alpha)? != expected {
            mismatches += 1;
        }
    }
    Ok(CheckResult::new(
        "conformal quantile vs rank oracle",
        mismatches == 0,
        format!("{mismatches} mismatches in 1000 sets"),
    ))
}

fn random_psd<R: Rng>(rng: &mut R, scale: f64) -> Mat4 {
    let m = Mat4::from_fn(|_, _| rng.random_range(-1.0..1.0));
    m * m.transpose() * scale
}

/// Residuals of a calibration set never grow when the input covariance is
/// enlarged in the Loewner order.
pub fn check_residual_ordering(tuples: &[TransitionTuple], seed: u64) -> Result<CheckResult> {
    let model = LinearModel::nominal();
    let sigma0 = default_sigma0();
    let base = ResidualScorer::new(&model, &sigma0)?.score_all(tuples);
    let mut rng = SeedTree::new(seed).stream("verify-ordering", 0);
    let mut violations = 0;
    for _ in 0..200 {
        let bigger = CovMatrix::new(sigma0.matrix() + random_psd(&mut rng, 1e-4))?;
        let r = ResidualScorer::new(&model, &bigger)?.score_all(tuples);
        violations += r.iter().zip(&base).filter(|(a, b)| a > b).count();
    }
    Ok(CheckResult::new(
        "residuals shrink for larger input covariance",
        violations == 0,
        format!("{violations} elementwise violations over 200 draws of {} tuples", tuples.len()),
    ))
}

pub fn check_propagation_monotone(seed: u64) -> Result<CheckResult> {
    let model = LinearModel::nominal();
    let mut rng = SeedTree::new(seed).stream("verify-monotone", 0);
    let mut violations = 0;
    for _ in 0..1000 {
        let small = CovMatrix::new(random_psd(&mut rng, 1e-2) + Mat4::identity() * 1e-6)?;
        let big = CovMatrix::new(small.matrix() + random_psd(&mut rng, 1e-2))?;
        let mean = Vec4::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let u = Vec2::new(rng.random_range(-0.9..0.9), rng.random_range(-0.9..0.9));
        let a = approx_propagate(&model, &Gaussian::new(mean, small)?, &u)?;
        let b = approx_propagate(&model, &Gaussian::new(mean, big)?, &u)?;
        if !is_psd(&(b.cov.matrix() - a.cov.matrix()), LOEWNER_TOL) {
            violations += 1;
        }
    }
    Ok(CheckResult::new(
        "propagation preserves the Loewner order",
        violations == 0,
        format!("{violations} violations in 1000 pairs"),
    ))
}

pub fn check_baseline_equivalence(seed: u64) -> Result<CheckResult> {
    let model = LinearModel::nominal();
    let mut rng = SeedTree::new(seed).stream("verify-baseline", 0);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let start = Gaussian::new(Vec4::from_fn(|_, _| rng.random_range(0.0..4.0)), default_sigma0())?;
        let controls: Vec<Vec2> = (0..8)
            .map(|_| Vec2::new(rng.random_range(-0.9..0.9), rng.random_range(-0.9..0.9)))
            .collect();
        let r = calibrated_rollout(&model, &ConstantXi(1.0), &start, &controls)?;
        let mut sigma = *start.cov.matrix();
        for bel in &r.beliefs {
            sigma = model.a * sigma * model.a.transpose() + model.q.matrix();
            worst = worst.max((bel.cov.matrix() - sigma).abs().max());
        }
    }
    Ok(CheckResult::new(
        "xi = 1 rollout equals the closed-form recursion",
        worst <= 1e-12,
        format!("max abs difference {worst:.2e}"),
    ))
}

/// Fits on one half of a shuffled calibration set and measures coverage of
/// the calibrated one-step region on the other half.
pub fn check_first_step_coverage(tuples: &[TransitionTuple], alpha: f64, seed: u64) -> Result<CheckResult> {
    use rand::seq::SliceRandom;
    let model = LinearModel::nominal();
    let sigma0 = default_sigma0();
    let mut shuffled = tuples.to_vec();
    shuffled.shuffle(&mut SeedTree::new(seed).stream("verify-coverage", 0));
    let (fit, test) = shuffled.split_at(shuffled.len() / 2);
    let config = LocartConfig {
        seed,
        ..LocartConfig::default()
    };
    let m = fit_locart(&model, fit, &sigma0, alpha, &config)?;
    let radius2 = chi2_quantile(4, 1.0 - alpha)?;
    let scorer = ResidualScorer::new(&model, &sigma0)?;
    let covered = test
        .iter()
        .filter(|t| {
            let q = m.query_xi(&lucca_core::locart::FeatureVector::of_tuple(t));
            scorer.score_tuple(t).powi(2) <= q.xi * radius2
        })
        .count();
    let rate = covered as f64 / test.len() as f64;
    Ok(CheckResult::new(
        "one-step held-out coverage",
        rate >= 1.0 - alpha - 0.02,
        format!("coverage {rate:.4} at alpha {alpha}"),
    ))
}

pub fn run_all(preset: &ExperimentPreset) -> Result<Vec<CheckResult>> {
    let env = builtin_environment("corridor")?;
    let tuples = calibration_set(preset, &env)?;
    let subset: Vec<TransitionTuple> = tuples.iter().step_by(50).copied().collect();
    Ok(vec![
        check_chi2()?,
        check_conformal_rank(preset.seed)?,
        check_residual_ordering(&subset, preset.seed)?,
        check_propagation_monotone(preset.seed)?,
        check_baseline_equivalence(preset.seed)?,
        check_first_step_coverage(&tuples, preset.alpha, preset.seed)?,
    ])
}
