//! Planning benchmark: seeded MPC episodes per environment and method.

use std::fmt;
use std::str::FromStr;

use lucca_core::dynamics::Environment;
use lucca_core::locart::{ConstantXi, LocartModel, XiSource};
use lucca_core::planner::{mpc_run, EpisodeRecord, Outcome, Planner};
use serde::Serialize;

use crate::calibrate::fit_environment;
use crate::envfile::resolve_environment;
use crate::error::{Error, Result};
use crate::preset::ExperimentPreset;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Lucca,
    Baseline,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::Lucca, Method::Baseline];

    pub fn name(self) -> &'static str {
        match self {
            Method::Lucca => "lucca",
            Method::Baseline => "baseline",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lucca" => Ok(Method::Lucca),
            "baseline" => Ok(Method::Baseline),
            _ => Err(Error::Unknown {
                kind: "method",
                name: s.to_string(),
                expected: "lucca, baseline".into(),
            }),
        }
    }
}

/// An environment together with its fitted partition.
pub struct FittedEnv {
    pub env: Environment,
    pub model: LocartModel,
}

/// Loads and fits every environment listed in the preset.
pub fn fit_all(preset: &ExperimentPreset) -> Result<Vec<FittedEnv>> {
    preset
        .environments
        .iter()
        .map(|name| {
            let env = resolve_environment(name)?;
            let model = fit_environment(preset, &env)?.model;
            Ok(FittedEnv { env, model })
        })
        .collect()
}

/// One row of the results table. Step statistics use successful runs only.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchmarkRow {
    pub env: String,
    pub method: Method,
    pub n_runs: usize,
    pub collisions: usize,
    pub successes: usize,
    pub collision_rate: Option<f64>,
    pub success_rate: Option<f64>,
    pub mean_steps: Option<f64>,
    /// Population standard deviation of the step counts.
    pub std_steps: Option<f64>,
}

impl BenchmarkRow {
    pub fn from_episodes(env: &str, method: Method, episodes: &[EpisodeRecord]) -> Self {
        let n = episodes.len();
        let collisions = episodes.iter().filter(|e| e.outcome == Outcome::Collision).count();
        let steps: Vec<f64> = episodes
            .iter()
            .filter(|e| e.outcome == Outcome::Success)
            .map(|e| e.n_steps() as f64)
            .collect();
        let rate = |k: usize| (n > 0).then(|| k as f64 / n as f64);
        let mean = (!steps.is_empty()).then(|| steps.iter().sum::<f64>() / steps.len() as f64);
        let std = mean.map(|m| (steps.iter().map(|s| (s - m).powi(2)).sum::<f64>() / steps.len() as f64).sqrt());
        Self {
            env: env.to_string(),
            method,
            n_runs: n,
            collisions,
            successes: steps.len(),
            collision_rate: rate(collisions),
            success_rate: rate(steps.len()),
            mean_steps: mean,
            std_steps: std,
        }
    }
}

pub struct EpisodeResult {
    pub env: String,
    pub method: Method,
    pub run: usize,
    pub record: EpisodeRecord,
}

pub struct BenchmarkResult {
    pub rows: Vec<BenchmarkRow>,
    pub episodes: Vec<EpisodeResult>,
}

/// Runs episode `run` of `method` in `fitted.env`.
///
/// Both methods use the same planner and noise substreams for a given run.
pub fn run_episode(preset: &ExperimentPreset, fitted: &FittedEnv, method: Method, run: usize) -> Result<EpisodeRecord> {
    let tree = preset.seeds().child(&fitted.env.name).child("episodes");
    let approx = preset.approx_model()?;
    let truth = preset.true_model()?;
    let cfg = preset.mppi_config(tree.derive("mppi"))?;
    let baseline = ConstantXi(1.0);
    let xi: &dyn XiSource = match method {
        Method::Lucca => &fitted.model,
        Method::Baseline => &baseline,
    };
    let planner = Planner {
        model: &approx,
        xi,
        env: &fitted.env,
        cfg: &cfg,
        params: &preset.cost,
        alpha: preset.alpha,
        sigma0: preset.sigma0_cov()?,
    };
    let mut plan_rng = tree.stream("mppi", run as u64);
    let mut noise_rng = tree.stream("noise", run as u64);
    Ok(mpc_run(&planner, &truth, preset.max_steps, &mut plan_rng, &mut noise_rng)?)
}

pub fn run_planning_benchmark(
    preset: &ExperimentPreset,
    fitted: &[FittedEnv],
    methods: &[Method],
) -> Result<BenchmarkResult> {
    let mut rows = Vec::new();
    let mut episodes = Vec::new();
    for f in fitted {
        for &method in methods {
            let mut records = Vec::with_capacity(preset.n_runs);
            for run in 0..preset.n_runs {
                records.push(run_episode(preset, f, method, run)?);
            }
            rows.push(BenchmarkRow::from_episodes(&f.env.name, method, &records));
            episodes.extend(records.into_iter().enumerate().map(|(run, record)| EpisodeResult {
                env: f.env.name.clone(),
                method,
                run,
                record,
            }));
        }
    }
    Ok(BenchmarkResult { rows, episodes })
}
