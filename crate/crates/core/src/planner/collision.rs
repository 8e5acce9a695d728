//! Exact tests between a position confidence ellipse and axis-aligned boxes.
//!
//! The ellipse `{p : (p − c)ᵀ Σ⁻¹ (p − c) ≤ r²}` is mapped to the unit disc by
//! `w = L⁻¹ (p − c) / r`. A rectangle maps to a convex parallelogram, and the two
//! sets meet iff the origin is inside the parallelogram or within unit distance
//! of one of its edges.

use crate::dynamics::{Environment, Rect};
use crate::error::Result;
use crate::statmath::{chi2_quantile, Gaussian, LowerTriangular, Mat2, Vec2};

/// `(1 − α)` confidence ellipse of the position marginal of a state belief.
#[derive(Clone, Copy, Debug)]
pub struct PositionEllipse {
    center: Vec2,
    factor: LowerTriangular<2>,
    radius: f64,
    half_extent: Vec2,
}

impl PositionEllipse {
    /// Uses the leading 2×2 block of the belief's Cholesky factor, which is the
    /// factor of the position marginal.
    pub fn from_belief(bel: &Gaussian<4>, radius2: f64) -> Self {
        let l4 = bel.cov.factor().matrix();
        let l = Mat2::new(l4[(0, 0)], 0.0, l4[(1, 0)], l4[(1, 1)]);
        let cov = bel.cov.matrix();
        let radius = libm::sqrt(radius2);
        Self {
            center: Vec2::new(bel.mean[0], bel.mean[1]),
            factor: LowerTriangular::from_matrix_unchecked(l),
            radius,
            half_extent: Vec2::new(radius * libm::sqrt(cov[(0, 0)]), radius * libm::sqrt(cov[(1, 1)])),
        }
    }

    pub fn center(&self) -> Vec2 {
        self.center
    }

    /// Half widths of the axis-aligned bounding box.
    pub fn half_extent(&self) -> Vec2 {
        self.half_extent
    }

    pub fn intersects_rect(&self, r: &Rect) -> bool {
        let c = self.center;
        let h = self.half_extent;
        if c.x + h.x < r.x_min || c.x - h.x > r.x_max || c.y + h.y < r.y_min || c.y - h.y > r.y_max {
            return false;
        }
        if r.contains(&c) {
            return true;
        }
        if self.radius == 0.0 {
            return false;
        }
        let w = r.corners().map(|p| self.factor.solve(&(p - c)) / self.radius);
        if origin_in_convex_ccw(&w) {
            return true;
        }
        (0..4).any(|i| segment_origin_dist2(&w[i], &w[(i + 1) % 4]) <= 1.0)
    }

    /// The whole ellipse lies inside `bounds`.
    pub fn within(&self, bounds: &Rect) -> bool {
        let c = self.center;
        let h = self.half_extent;
        c.x - h.x >= bounds.x_min && c.x + h.x <= bounds.x_max && c.y - h.y >= bounds.y_min && c.y + h.y <= bounds.y_max
    }
}

/// Whitening preserves orientation (positive diagonal), so the image of a CCW
/// rectangle stays CCW.
fn origin_in_convex_ccw(poly: &[Vec2; 4]) -> bool {
    (0..4).all(|i| {
        let a = poly[i];
        let b = poly[(i + 1) % 4];
        (b.x - a.x) * (-a.y) - (b.y - a.y) * (-a.x) >= 0.0
    })
}

fn segment_origin_dist2(a: &Vec2, b: &Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 { (-a.dot(&ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (a + ab * t).norm_squared()
}

/// Radius² of the position-marginal `(1 − α)` region, `χ²₂(1 − α)`.
pub fn position_radius2(alpha: f64) -> Result<f64> {
    chi2_quantile(2, 1.0 - alpha)
}

/// Collision test with a precomputed radius.
#[derive(Clone, Copy, Debug)]
pub struct CollisionChecker<'a> {
    env: &'a Environment,
    radius2: f64,
}

impl<'a> CollisionChecker<'a> {
    pub fn new(env: &'a Environment, alpha: f64) -> Result<Self> {
        Ok(Self {
            env,
            radius2: position_radius2(alpha)?,
        })
    }

    pub fn radius2(&self) -> f64 {
        self.radius2
    }

    pub fn check(&self, bel: &Gaussian<4>) -> bool {
        let e = PositionEllipse::from_belief(bel, self.radius2);
        !e.within(&self.env.bounds) || self.env.obstacles.iter().any(|r| e.intersects_rect(r))
    }
}

/// Whether the `(1 − α)` position ellipse of `bel` touches an obstacle or
/// leaves the workspace.
pub fn collision_indicator(bel: &Gaussian<4>, env: &Environment, alpha: f64) -> Result<bool> {
    Ok(CollisionChecker::new(env, alpha)?.check(bel))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Subgoal;
    use crate::statmath::{CovMatrix, Mat4, Vec4};
    use alloc::vec;

    fn env() -> Environment {
        Environment {
            name: "box".into(),
            bounds: Rect::new(0.0, 0.0, 10.0, 10.0),
            obstacles: vec![Rect::new(4.0, 4.0, 6.0, 6.0)],
            shifted_regions: vec![],
            subgoals: vec![Subgoal { center: [9.0, 9.0], radius: 0.5 }],
            start: [1.0, 1.0, 0.0, 0.0],
        }
    }

    fn iso(x: f64, y: f64, var: f64) -> Gaussian<4> {
        Gaussian::new(Vec4::new(x, y, 0.0, 0.0), CovMatrix::scaled_identity(var).unwrap()).unwrap()
    }

    #[test]
    fn free_space_and_inside_obstacle() {
        let e = env();
        assert!(!collision_indicator(&iso(2.0, 2.0, 1e-6), &e, 0.1).unwrap());
        assert!(collision_indicator(&iso(5.0, 5.0, 1e-12), &e, 0.1).unwrap());
        assert!(collision_indicator(&iso(5.0, 5.0, 1.0), &e, 0.1).unwrap());
    }

    #[test]
    fn face_distance_threshold() {
        let e = env();
        let sigma: f64 = 0.1;
        let r = sigma * libm::sqrt(position_radius2(0.1).unwrap());
        // left face at x = 4
        assert!(collision_indicator(&iso(4.0 - r * 0.999, 5.0, sigma * sigma), &e, 0.1).unwrap());
        assert!(!collision_indicator(&iso(4.0 - r * 1.001, 5.0, sigma * sigma), &e, 0.1).unwrap());
    }

    #[test]
    fn corner_uses_euclidean_distance_in_whitened_frame() {
        let e = env();
        let sigma: f64 = 0.1;
        let r = sigma * libm::sqrt(position_radius2(0.1).unwrap());
        let d = 0.98 * r / libm::sqrt(2.0);
        // axis boxes overlap the corner, but the disc does not reach it
        let off = 1.01 * r / libm::sqrt(2.0);
        assert!(collision_indicator(&iso(4.0 - d, 4.0 - d, sigma * sigma), &e, 0.1).unwrap());
        assert!(!collision_indicator(&iso(4.0 - off, 4.0 - off, sigma * sigma), &e, 0.1).unwrap());
    }

    #[test]
    fn elongated_ellipse() {
        let e = env();
        let mut m = Mat4::identity() * 1e-6;
        m[(0, 0)] = 1.0;
        m[(0, 1)] = 0.0;
        let bel = Gaussian::new(Vec4::new(2.0, 5.0, 0.0, 0.0), CovMatrix::new(m).unwrap()).unwrap();
        assert!(collision_indicator(&bel, &e, 0.1).unwrap());
        let bel = Gaussian::new(Vec4::new(5.0, 3.0, 0.0, 0.0), CovMatrix::new(m).unwrap()).unwrap();
        assert!(!collision_indicator(&bel, &e, 0.1).unwrap());
    }

    #[test]
    fn leaving_bounds_counts() {
        let e = env();
        assert!(collision_indicator(&iso(0.05, 2.0, 0.01), &e, 0.1).unwrap());
        assert!(!collision_indicator(&iso(1.0, 2.0, 0.01), &e, 0.1).unwrap());
    }

    #[test]
    fn larger_region_never_uncollides() {
        let e = env();
        for i in 0..50 {
            let x = 2.0 + 0.05 * i as f64;
            let small = collision_indicator(&iso(x, 4.5, 0.01), &e, 0.2).unwrap();
            let big = collision_indicator(&iso(x, 4.5, 0.04), &e, 0.2).unwrap();
            assert!(!small || big);
        }
    }
}
