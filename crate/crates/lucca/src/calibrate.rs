//! Grid → residuals → LOCART fit for one environment.

use std::time::{Duration, Instant};

use lucca_core::dynamics::{Environment, TransitionTuple};
use lucca_core::locart::{fit_locart, LocartModel};

use crate::error::Result;
use crate::grid::generate_calibration_set;
use crate::preset::ExperimentPreset;

pub struct FitOutcome {
    pub model: LocartModel,
    pub n_tuples: usize,
    /// Residual computation and tree fit, excluding grid simulation.
    pub fit_time: Duration,
}

/// Calibration tuples of `env`, drawn from the environment's `calibration`
/// substream.
pub fn calibration_set(preset: &ExperimentPreset, env: &Environment) -> Result<Vec<TransitionTuple>> {
    let mut rng = preset.seeds().child(&env.name).stream("calibration", 0);
    generate_calibration_set(env, &preset.true_model()?, &preset.grid, &preset.sigma0_cov()?, &mut rng)
}

pub fn fit_tuples(preset: &ExperimentPreset, env: &Environment, tuples: &[TransitionTuple]) -> Result<FitOutcome> {
    let model = preset.approx_model()?;
    let sigma0 = preset.sigma0_cov()?;
    let config = preset.locart_config(&env.name);
    let t = Instant::now();
    let fitted = fit_locart(&model, tuples, &sigma0, preset.alpha, &config)?;
    Ok(FitOutcome {
        model: fitted,
        n_tuples: tuples.len(),
        fit_time: t.elapsed(),
    })
}

pub fn fit_environment(preset: &ExperimentPreset, env: &Environment) -> Result<FitOutcome> {
    let tuples = calibration_set(preset, env)?;
    fit_tuples(preset, env, &tuples)
}
