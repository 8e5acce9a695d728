//! Environment files.
//!
//! TOML, versioned by `format_version`. Lengths in meters, velocities in m/s.
//! See `docs/formats.md` for the schema. The four shipped maps are embedded at
//! compile time from `environments/*.toml`.

use std::fs;
use std::path::Path;

use lucca_core::dynamics::{Environment, Rect, Subgoal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ENV_FORMAT_VERSION: u32 = 1;

pub const BUILTIN_NAMES: [&str; 4] = ["corridor", "l-turn", "passage", "u-turn"];

const BUILTIN_SOURCES: [(&str, &str); 4] = [
    ("corridor", include_str!("../environments/corridor.toml")),
    ("l-turn", include_str!("../environments/l-turn.toml")),
    ("passage", include_str!("../environments/passage.toml")),
    ("u-turn", include_str!("../environments/u-turn.toml")),
];

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvFile {
    format_version: u32,
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    description: Option<String>,
    /// `[p_x, p_y, v_x, v_y]`
    start: [f64; 4],
    bounds: Rect,
    #[serde(default)]
    obstacles: Vec<Rect>,
    #[serde(default)]
    shifted_regions: Vec<Rect>,
    subgoals: Vec<Subgoal>,
}

pub(crate) fn parse_error(path: &str, src: &str, err: &toml::de::Error) -> Error {
    let (line, column) = match err.span() {
        Some(span) => {
            let before = &src[..span.start.min(src.len())];
            let line = before.matches('\n').count() + 1;
            let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
            (line, column)
        }
        None => (0, 0),
    };
    Error::Parse {
        path: path.to_string(),
        line,
        column,
        message: err.message().to_string(),
    }
}

pub(crate) fn validation_error(path: &str, err: lucca_core::Error) -> Error {
    match err {
        lucca_core::Error::Validation { field, reason } => Error::Invalid {
            path: path.to_string(),
            field,
            reason,
        },
        other => Error::Core(other),
    }
}

/// Parses and validates an environment from TOML text; `origin` labels
/// diagnostics.
pub fn parse_environment(src: &str, origin: &str) -> Result<Environment> {
    let file: EnvFile = toml::from_str(src).map_err(|e| parse_error(origin, src, &e))?;
    if file.format_version != ENV_FORMAT_VERSION {
        return Err(Error::Invalid {
            path: origin.to_string(),
            field: "format_version".into(),
            reason: format!("unsupported version {} (expected {ENV_FORMAT_VERSION})", file.format_version),
        });
    }
    let env = Environment {
        name: file.name,
        bounds: file.bounds,
        obstacles: file.obstacles,
        shifted_regions: file.shifted_regions,
        subgoals: file.subgoals,
        start: file.start,
    };
    env.validate().map_err(|e| validation_error(origin, e))?;
    Ok(env)
}

pub fn load_environment(path: &Path) -> Result<Environment> {
    let src = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_environment(&src, &path.display().to_string())
}

pub fn environment_to_toml(env: &Environment) -> String {
    let file = EnvFile {
        format_version: ENV_FORMAT_VERSION,
        name: env.name.clone(),
        description: None,
        start: env.start,
        bounds: env.bounds,
        obstacles: env.obstacles.clone(),
        shifted_regions: env.shifted_regions.clone(),
        subgoals: env.subgoals.clone(),
    };
    toml::to_string(&file).expect("environment serializes")
}

pub fn save_environment(env: &Environment, path: &Path) -> Result<()> {
    fs::write(path, environment_to_toml(env)).map_err(|e| Error::io(path, e))
}

pub fn builtin_environment(name: &str) -> Result<Environment> {
    let (_, src) = BUILTIN_SOURCES
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::Unknown {
            kind: "environment",
            name: name.to_string(),
            expected: BUILTIN_NAMES.join(", "),
        })?;
    parse_environment(src, &format!("<builtin {name}>"))
}

/// A builtin name, or otherwise a path to an environment file.
pub fn resolve_environment(name_or_path: &str) -> Result<Environment> {
    if BUILTIN_NAMES.contains(&name_or_path) {
        builtin_environment(name_or_path)
    } else if Path::new(name_or_path).exists() {
        load_environment(Path::new(name_or_path))
    } else {
        builtin_environment(name_or_path)
    }
}
