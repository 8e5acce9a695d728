//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::benchmark::{fit_all, run_planning_benchmark, FittedEnv, Method};
use crate::calibrate::fit_environment;
use crate::coverage::{run_coverage_experiment, CoverageSetup};
use crate::envfile::resolve_environment;
use crate::error::{Error, Result};
use crate::model_io::SavedModel;
use crate::preset::{resolve_preset, ExperimentPreset};
use crate::report::{write_benchmark_csv, write_coverage_csv, write_episode_csv, write_heatmap_csv, Manifest};
use crate::verify;
use lucca_core::locart::{heatmap_grid, FixedFeatures};

#[derive(Parser, Debug)]
#[command(name = "lucca", version, about = "Locally calibrated uncertainty propagation and planning experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Builtin preset name or path to a preset file.
    #[arg(long, default_value = "paper")]
    pub preset: String,
    /// Override the preset's global seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the preset's miscoverage level.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Restrict to these environments (builtin names or files).
    #[arg(long = "env")]
    pub envs: Vec<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate the calibration grid, fit LOCART and write the model.
    Calibrate {
        #[command(flatten)]
        common: Common,
        /// Model file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Multi-step coverage of calibrated vs uncalibrated rollouts.
    Coverage {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "coverage-out")]
        out: PathBuf,
    },
    /// MPC episodes and the summary table.
    Plan {
        #[command(flatten)]
        common: Common,
        /// Only run this method (default: both).
        #[arg(long)]
        method: Option<String>,
        /// Override the number of episodes per cell.
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long, default_value = "plan-out")]
        out: PathBuf,
    },
    /// Scaling-factor grids over positions.
    Heatmap {
        #[command(flatten)]
        common: Common,
        /// Horizontal velocity of a grid, m/s; repeatable.
        #[arg(long = "vx", allow_negative_numbers = true)]
        vx: Vec<f64>,
        #[arg(long, default_value = "heatmap-out")]
        out: PathBuf,
    },
    /// Run the property and oracle checks.
    Verify {
        #[command(flatten)]
        common: Common,
    },
}

fn load(common: &Common) -> Result<ExperimentPreset> {
    let mut preset = resolve_preset(&common.preset)?;
    if let Some(seed) = common.seed {
        preset.seed = seed;
    }
    if let Some(alpha) = common.alpha {
        preset.alpha = alpha;
    }
    if !common.envs.is_empty() {
        preset.environments = common.envs.clone();
        preset.coverage.environment = common.envs[0].clone();
    }
    preset.validate()?;
    Ok(preset)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn file_label(v: f64) -> String {
    format!("{v}")
}

fn calibrate(common: &Common, out: &Path) -> Result<()> {
    let preset = load(common)?;
    let env = resolve_environment(&preset.environments[0])?;
    let fit = fit_environment(&preset, &env)?;
    SavedModel::new(&env.name, fit.n_tuples, fit.model.clone()).save(out)?;
    let manifest_path = PathBuf::from(format!("{}.manifest.json", out.display()));
    Manifest::new("calibrate", &preset, &[out.to_path_buf()]).write(&manifest_path)?;
    println!(
        "{}: {} tuples, {} leaves, global xi {:.4}, fit {:.1} ms -> {}",
        env.name,
        fit.n_tuples,
        fit.model.n_leaves(),
        fit.model.global_fallback.xi,
        fit.fit_time.as_secs_f64() * 1e3,
        out.display()
    );
    Ok(())
}

fn coverage(common: &Common, out: &Path) -> Result<()> {
    let preset = load(common)?;
    let env = resolve_environment(&preset.coverage.environment)?;
    let fit = fit_environment(&preset, &env)?;
    let approx = preset.approx_model()?;
    let truth = preset.true_model()?;
    let setup = CoverageSetup {
        env: &env,
        approx: &approx,
        truth: &truth,
        xi: &fit.model,
        sigma0: preset.sigma0_cov()?,
        alpha: preset.alpha,
        horizon: preset.coverage.horizon,
        sample_start: preset.coverage.sample_start,
    };
    let seeds = preset.seeds().child(&env.name).child("coverage");
    let report = run_coverage_experiment(&setup, &preset.coverage.scenarios, preset.coverage.n_samples, &seeds)?;
    create_dir(out)?;
    let mut outputs = Vec::new();
    for sc in &report {
        let path = out.join(format!("coverage_{}.csv", sc.label));
        write_coverage_csv(&path, sc)?;
        let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
        println!("{}: min coverage lucca {:.3}, baseline {:.3}", sc.label, min(&sc.lucca), min(&sc.baseline));
        outputs.push(path);
    }
    Manifest::new("coverage", &preset, &outputs).write(&out.join("manifest.json"))
}

fn plan(common: &Common, method: Option<&str>, runs: Option<usize>, out: &Path) -> Result<()> {
    let mut preset = load(common)?;
    if let Some(n) = runs {
        preset.n_runs = n;
    }
    let methods = match method {
        Some(m) => vec![m.parse::<Method>()?],
        None => Method::ALL.to_vec(),
    };
    let fitted = fit_all(&preset)?;
    let result = run_planning_benchmark(&preset, &fitted, &methods)?;
    create_dir(out)?;
    let mut outputs = Vec::new();
    for ep in &result.episodes {
        let path = out.join(format!("episode_{}_{}_{:03}.csv", ep.env, ep.method, ep.run));
        write_episode_csv(&path, &ep.record)?;
        outputs.push(path);
    }
    let table = out.join("benchmark.csv");
    write_benchmark_csv(&table, &result.rows)?;
    outputs.push(table);
    for r in &result.rows {
        let f = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.2}"));
        println!(
            "{:<9} {:<8} collision {} success {} steps {} ({})",
            r.env,
            r.method,
            f(r.collision_rate),
            f(r.success_rate),
            f(r.mean_steps),
            f(r.std_steps)
        );
    }
    Manifest::new("plan", &preset, &outputs).write(&out.join("manifest.json"))
}

fn heatmap(common: &Common, vx: &[f64], out: &Path) -> Result<()> {
    let mut preset = load(common)?;
    if !vx.is_empty() {
        preset.heatmap.v_x = vx.to_vec();
    }
    let fitted: Vec<FittedEnv> = fit_all(&preset)?;
    create_dir(out)?;
    let mut outputs = Vec::new();
    for f in &fitted {
        for &v in &preset.heatmap.v_x {
            let fixed = FixedFeatures {
                v_x: v,
                ..FixedFeatures::default()
            };
            let cells = heatmap_grid(&f.model, &f.env, &fixed, preset.heatmap.resolution)?;
            let path = out.join(format!("heatmap_{}_vx{}.csv", f.env.name, file_label(v)));
            write_heatmap_csv(&path, &cells)?;
            outputs.push(path);
        }
    }
    Manifest::new("heatmap", &preset, &outputs).write(&out.join("manifest.json"))
}

fn run_verify(common: &Common) -> Result<bool> {
    let preset = load(common)?;
    let mut ok = true;
    for c in verify::run_all(&preset)? {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        ok &= c.passed;
    }
    Ok(ok)
}

/// Parses `args` (including the program name) and runs the command. Returns
/// the process exit code: 0 on success, 1 on runtime failure or failed checks,
/// 2 on configuration errors.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match &cli.command {
        Command::Calibrate { common, out } => calibrate(common, out).map(|_| true),
        Command::Coverage { common, out } => coverage(common, out).map(|_| true),
        Command::Plan {
            common,
            method,
            runs,
            out,
        } => plan(common, method.as_deref(), *runs, out).map(|_| true),
        Command::Heatmap { common, vx, out } => heatmap(common, vx, out).map(|_| true),
        Command::Verify { common } => run_verify(common),
    };
    match result {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config_error() {
                2
            } else {
                1
            }
        }
    }
}
