//! CSV tables and the run manifest. Column units are listed in
//! `docs/formats.md`.

use std::fs;
use std::path::{Path, PathBuf};

use lucca_core::locart::HeatmapCell;
use lucca_core::planner::EpisodeRecord;
use serde::Serialize;

use crate::benchmark::BenchmarkRow;
use crate::coverage::ScenarioCoverage;
use crate::error::{Error, Result};
use crate::preset::ExperimentPreset;

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

pub fn write_coverage_csv(path: &Path, sc: &ScenarioCoverage) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["step", "lucca_coverage", "baseline_coverage", "xi"])?;
    for t in 0..sc.lucca.len() {
        w.write_record([
            (t + 1).to_string(),
            sc.lucca[t].to_string(),
            sc.baseline[t].to_string(),
            sc.xi[t].to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Header comment line noting the averaging convention, then the table.
pub fn write_benchmark_csv(path: &Path, rows: &[BenchmarkRow]) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    use std::io::Write;
    writeln!(file, "# mean_steps and std_steps are over successful runs only")
        .map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record([
        "env",
        "method",
        "n_runs",
        "collisions",
        "successes",
        "collision_rate",
        "success_rate",
        "mean_steps",
        "std_steps",
    ])?;
    for r in rows {
        w.write_record([
            r.env.clone(),
            r.method.to_string(),
            r.n_runs.to_string(),
            r.collisions.to_string(),
            r.successes.to_string(),
            opt(r.collision_rate),
            opt(r.success_rate),
            opt(r.mean_steps),
            opt(r.std_steps),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_episode_csv(path: &Path, ep: &EpisodeRecord) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "t", "p_x", "p_y", "v_x", "v_y", "a_x", "a_y", "subgoal_index", "min_cost", "mean_xi", "collision",
    ])?;
    for s in &ep.steps {
        let mut rec = vec![s.t.to_string()];
        rec.extend(s.state.iter().map(|v| v.to_string()));
        rec.extend(s.action.iter().map(|v| v.to_string()));
        rec.push(s.subgoal_index.to_string());
        rec.push(s.min_cost.to_string());
        rec.push(s.mean_xi.to_string());
        rec.push(s.collision.to_string());
        w.write_record(rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_heatmap_csv(path: &Path, cells: &[HeatmapCell]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["p_x", "p_y", "xi", "leaf_id", "fallback"])?;
    for c in cells {
        w.write_record([
            c.p_x.to_string(),
            c.p_y.to_string(),
            c.xi.to_string(),
            c.leaf_id.to_string(),
            c.fallback.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// What produced a set of outputs. Contains no timestamps or timings, so it is
/// reproducible like the outputs themselves.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Manifest {
    pub format_version: u32,
    pub tool: String,
    pub version: String,
    pub core_version: String,
    pub command: String,
    pub preset: String,
    pub config_hash: String,
    pub seed: u64,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, preset: &ExperimentPreset, outputs: &[PathBuf]) -> Self {
        let mut outputs: Vec<String> = outputs
            .iter()
            .map(|p| p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned()))
            .collect();
        outputs.sort();
        Self {
            format_version: 1,
            tool: "lucca".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            core_version: lucca_core::VERSION.into(),
            command: command.into(),
            preset: preset.name.clone(),
            config_hash: preset.config_hash(),
            seed: preset.seed,
            outputs,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        fs::write(path, s).map_err(|e| Error::io(path, e))
    }
}
