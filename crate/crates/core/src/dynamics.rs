//! Hybrid stochastic double integrator, the linear approximate propagator and
//! environment geometry.
//!
//! State ordering is `[p_x, p_y, v_x, v_y]` (m, m, m/s, m/s); actions are
//! `[a_x, a_y]` in m/s².

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::SMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::statmath::{CovMatrix, Gaussian, Mat4, Vec2, Vec4, Vector};

pub type Mat4x2 = SMatrix<f64, 4, 2>;

/// Integration step used throughout the experiments (s).
pub const DEFAULT_DT: f64 = 0.05;
/// Process-noise scale `c` in `Q = c·B Bᵀ`.
pub const DEFAULT_NOISE_SCALE: f64 = 0.1;
/// Gain applied to the velocity coupling and the input inside shifted regions.
pub const SHIFT_GAIN: f64 = 1.3;
/// Diagonal added to the rank-deficient `c·B Bᵀ`.
pub const Q_REGULARIZER: f64 = 1e-12;

/// `s' = A s + B u + d`, `d ~ N(0, Q)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearModel {
    pub a: Mat4,
    pub b: Mat4x2,
    pub q: CovMatrix<4>,
    pub dt: f64,
}

fn integrator_blocks(dt: f64, gain: f64) -> (Mat4, Mat4x2) {
    let mut a = Mat4::identity();
    a[(0, 2)] = gain * dt;
    a[(1, 3)] = gain * dt;
    let mut b = Mat4x2::zeros();
    b[(0, 0)] = gain * dt * dt / 2.0;
    b[(1, 1)] = gain * dt * dt / 2.0;
    b[(2, 0)] = gain * dt;
    b[(3, 1)] = gain * dt;
    (a, b)
}

/// The nominal double integrator with `Q = noise_scale·B Bᵀ + 1e-12·I`.
pub fn double_integrator_model(dt: f64, noise_scale: f64) -> Result<LinearModel> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt must be positive"));
    }
    if !(noise_scale >= 0.0 && noise_scale.is_finite()) {
        return Err(Error::invalid("noise scale must be non-negative"));
    }
    let (a, b) = integrator_blocks(dt, 1.0);
    let q = CovMatrix::new(b * b.transpose() * noise_scale + Mat4::identity() * Q_REGULARIZER)?;
    Ok(LinearModel { a, b, q, dt })
}

impl LinearModel {
    /// `dt = 0.05 s`, noise scale 0.1.
    pub fn nominal() -> Self {
        double_integrator_model(DEFAULT_DT, DEFAULT_NOISE_SCALE).expect("valid constants")
    }

    pub fn mean_step(&self, s: &Vec4, u: &Vec2) -> Vec4 {
        self.a * s + self.b * u
    }

    /// The same model with the shifted-region velocity coupling and input gain.
    pub fn shifted(&self) -> LinearModel {
        let (a, b) = integrator_blocks(self.dt, SHIFT_GAIN);
        LinearModel { a, b, ..*self }
    }

    pub fn sample_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec4 {
        Gaussian { mean: Vec4::zeros(), cov: self.q }.sample(rng)
    }
}

/// Linear-Gaussian propagation: `μ' = Aμ + Bu`, `Σ' = AΣAᵀ + Q`.
pub fn approx_propagate(model: &LinearModel, bel: &Gaussian<4>, u: &Vec2) -> Result<Gaussian<4>> {
    let cov = model.a * bel.cov.matrix() * model.a.transpose() + model.q.matrix();
    Ok(Gaussian {
        mean: model.mean_step(&bel.mean, u),
        cov: CovMatrix::new(cov)?,
    })
}

/// Closed axis-aligned rectangle (m).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Rect {
    pub const fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Self {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    /// Boundary inclusive on every edge.
    pub fn contains(&self, p: &Vec2) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x_min >= self.x_min
            && other.x_max <= self.x_max
            && other.y_min >= self.y_min
            && other.y_max <= self.y_max
    }

    pub fn corners(&self) -> [Vec2; 4] {
        [
            Vec2::new(self.x_min, self.y_min),
            Vec2::new(self.x_max, self.y_min),
            Vec2::new(self.x_max, self.y_max),
            Vec2::new(self.x_min, self.y_max),
        ]
    }

    fn is_well_formed(&self) -> bool {
        [self.x_min, self.y_min, self.x_max, self.y_max]
            .iter()
            .all(|v| v.is_finite())
            && self.x_min < self.x_max
            && self.y_min < self.y_max
    }
}

/// Circular goal region.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Subgoal {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Subgoal {
    pub fn center(&self) -> Vec2 {
        Vec2::new(self.center[0], self.center[1])
    }

    pub fn contains(&self, p: &Vec2) -> bool {
        (p - self.center()).norm() <= self.radius
    }
}

/// Workspace map: bounds, obstacles, shifted-dynamics regions and goals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub name: String,
    pub bounds: Rect,
    #[serde(default)]
    pub obstacles: Vec<Rect>,
    #[serde(default)]
    pub shifted_regions: Vec<Rect>,
    pub subgoals: Vec<Subgoal>,
    pub start: [f64; 4],
}

impl Environment {
    pub fn validate(&self) -> Result<()> {
        if !self.bounds.is_well_formed() {
            return Err(Error::validation("bounds", "rectangle must have min < max and finite edges"));
        }
        for (kind, rects) in [("obstacles", &self.obstacles), ("shifted_regions", &self.shifted_regions)] {
            for (i, r) in rects.iter().enumerate() {
                let field = alloc::format!("{kind}[{i}]");
                if !r.is_well_formed() {
                    return Err(Error::validation(field, "rectangle must have min < max and finite edges"));
                }
                if !self.bounds.contains_rect(r) {
                    return Err(Error::validation(field, "rectangle lies outside the workspace bounds"));
                }
            }
        }
        if self.subgoals.is_empty() {
            return Err(Error::validation("subgoals", "at least one sub-goal is required"));
        }
        for (i, g) in self.subgoals.iter().enumerate() {
            if !(g.radius > 0.0 && g.radius.is_finite()) || !self.bounds.contains(&g.center()) {
                return Err(Error::validation(
                    alloc::format!("subgoals[{i}]"),
                    "sub-goal needs a positive radius and a center inside the bounds",
                ));
            }
        }
        if self.start.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("start", "entries must be finite"));
        }
        let p = Vec2::new(self.start[0], self.start[1]);
        if !self.bounds.contains(&p) {
            return Err(Error::validation("start", "start position lies outside the bounds"));
        }
        if in_obstacle(self, &p) {
            return Err(Error::validation("start", "start position lies inside an obstacle"));
        }
        Ok(())
    }

    pub fn start_state(&self) -> Vec4 {
        Vector::from(self.start)
    }

    /// Position is out of bounds or inside an obstacle.
    pub fn is_collision(&self, p: &Vec2) -> bool {
        !self.bounds.contains(p) || in_obstacle(self, p)
    }

    pub fn is_free(&self, p: &Vec2) -> bool {
        !self.is_collision(p)
    }
}

pub fn in_obstacle(env: &Environment, p: &Vec2) -> bool {
    env.obstacles.iter().any(|r| r.contains(p))
}

pub fn in_shifted(env: &Environment, p: &Vec2) -> bool {
    env.shifted_regions.iter().any(|r| r.contains(p))
}

pub fn position(s: &Vec4) -> Vec2 {
    Vec2::new(s[0], s[1])
}

/// Noise-free true transition; the region is chosen by the pre-step position.
pub fn true_step_mean(env: &Environment, model: &LinearModel, s: &Vec4, u: &Vec2) -> Vec4 {
    if in_shifted(env, &position(s)) {
        model.shifted().mean_step(s, u)
    } else {
        model.mean_step(s, u)
    }
}

/// One step of the hybrid true system, process noise drawn from `Q`.
pub fn true_step<R: Rng + ?Sized>(
    env: &Environment,
    model: &LinearModel,
    s: &Vec4,
    u: &Vec2,
    rng: &mut R,
) -> Vec4 {
    true_step_mean(env, model, s, u) + model.sample_noise(rng)
}

/// `((state, action), next_state)` drawn from the true system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionTuple {
    pub state: [f64; 4],
    pub action: [f64; 2],
    pub next_state: [f64; 4],
}

impl TransitionTuple {
    pub fn new(state: Vec4, action: Vec2, next_state: Vec4) -> Self {
        Self {
            state: state.into(),
            action: action.into(),
            next_state: next_state.into(),
        }
    }

    pub fn state(&self) -> Vec4 {
        Vector::from(self.state)
    }

    pub fn action(&self) -> Vec2 {
        Vector::from(self.action)
    }

    pub fn next_state(&self) -> Vec4 {
        Vector::from(self.next_state)
    }
}
