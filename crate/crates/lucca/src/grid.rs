//! Calibration sets from a uniform state-action grid.

use lucca_core::dynamics::{true_step, Environment, LinearModel, TransitionTuple};
use lucca_core::statmath::{CovMatrix, Gaussian, Vec2, Vec4};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-axis grid values. Positions in m, velocities in m/s, accelerations in
/// m/s².
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub p_x: Vec<f64>,
    pub p_y: Vec<f64>,
    pub v_x: Vec<f64>,
    pub v_y: Vec<f64>,
    pub a_x: Vec<f64>,
    pub a_y: Vec<f64>,
    /// Drop grid points whose position is inside an obstacle or outside the
    /// bounds.
    pub restrict_to_free_space: bool,
    /// Draw the true pre-transition state from `N(grid point, Σ₀)` instead of
    /// starting exactly at the grid point.
    #[serde(default = "yes")]
    pub sample_start: bool,
}

fn yes() -> bool {
    true
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        let p = linspace(0.0, 4.2, 16);
        let v = vec![-1.0, -0.5, 0.0, 0.5, 1.0];
        let a = vec![-0.8, -0.4, 0.0, 0.4, 0.8];
        Self {
            p_x: p.clone(),
            p_y: p,
            v_x: v.clone(),
            v_y: v,
            a_x: a.clone(),
            a_y: a,
            restrict_to_free_space: true,
            sample_start: true,
        }
    }
}

impl GridSpec {
    fn axes(&self) -> [(&'static str, &Vec<f64>); 6] {
        [
            ("p_x", &self.p_x),
            ("p_y", &self.p_y),
            ("v_x", &self.v_x),
            ("v_y", &self.v_y),
            ("a_x", &self.a_x),
            ("a_y", &self.a_y),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, values) in self.axes() {
            if values.is_empty() {
                return Err(self.invalid(name, "needs at least one value"));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(self.invalid(name, "values must be finite"));
            }
        }
        Ok(())
    }

    fn invalid(&self, field: &str, reason: &str) -> Error {
        Error::Invalid {
            path: "grid".into(),
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Size of the full Cartesian product.
    pub fn n_points(&self) -> usize {
        self.axes().iter().map(|(_, v)| v.len()).product()
    }
}

/// Rolls every grid point one step through the true dynamics. The recorded
/// state is the grid point itself; with `sample_start` the transition starts
/// from a draw of `N(grid point, start_cov)`.
///
/// Points are enumerated with `a_y` varying fastest and `p_x` slowest; noise
/// is drawn from `rng` in that order.
pub fn generate_calibration_set<R: Rng + ?Sized>(
    env: &Environment,
    model_true: &LinearModel,
    spec: &GridSpec,
    start_cov: &CovMatrix<4>,
    rng: &mut R,
) -> Result<Vec<TransitionTuple>> {
    spec.validate()?;
    let mut out = Vec::new();
    for &px in &spec.p_x {
        for &py in &spec.p_y {
            let p = Vec2::new(px, py);
            if spec.restrict_to_free_space && env.is_collision(&p) {
                continue;
            }
            for &vx in &spec.v_x {
                for &vy in &spec.v_y {
                    let s = Vec4::new(px, py, vx, vy);
                    for &ax in &spec.a_x {
                        for &ay in &spec.a_y {
                            let u = Vec2::new(ax, ay);
                            let from = if spec.sample_start {
                                Gaussian::new(s, *start_cov)?.sample(rng)
                            } else {
                                s
                            };
                            let next = true_step(env, model_true, &from, &u, rng);
                            out.push(TransitionTuple::new(s, u, next));
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}
