//! Collision geometry, dynamics and MPPI properties.

use lucca_core::dynamics::{double_integrator_model, true_step, true_step_mean, Environment, LinearModel, Rect, Subgoal};
use lucca_core::planner::{batch_costs, collision_indicator, position_radius2, softmin_weights, CostBreakdown, CostParams};
use lucca_core::rng::SeedTree;
use lucca_core::statmath::{chi2_quantile, CovMatrix, Gaussian, Mat4, Vec2, Vec4};
use proptest::prelude::*;

fn arena() -> Environment {
    Environment {
        name: "arena".into(),
        bounds: Rect::new(0.0, 0.0, 10.0, 10.0),
        obstacles: vec![Rect::new(6.0, 2.0, 8.0, 8.0)],
        shifted_regions: vec![Rect::new(0.0, 5.0, 5.0, 10.0)],
        subgoals: vec![Subgoal { center: [9.0, 9.0], radius: 0.5 }],
        start: [1.0, 1.0, 0.0, 0.0],
    }
}

fn belief(p: Vec2, pos_var: f64) -> Gaussian<4> {
    Gaussian::new(Vec4::new(p.x, p.y, 0.0, 0.0), CovMatrix::from_diagonal(&[pos_var, pos_var, 1e-3, 1e-3]).unwrap()).unwrap()
}

#[test]
fn radius_is_two_dof_quantile() {
    assert!((position_radius2(0.1).unwrap() - chi2_quantile(2, 0.9).unwrap()).abs() < 1e-12);
}

proptest! {
    #[test]
    fn isotropic_face_distance_threshold(d in 0.01f64..1.5, sigma in 0.01f64..0.5) {
        let threshold = sigma * chi2_quantile(2, 0.9).unwrap().sqrt();
        prop_assume!((d - threshold).abs() > 1e-6);
        // left face of the obstacle, far from its corners and the bounds
        let bel = belief(Vec2::new(6.0 - d, 5.0), sigma * sigma);
        prop_assert_eq!(collision_indicator(&bel, &arena(), 0.1).unwrap(), d <= threshold);
    }

    #[test]
    fn mean_inside_an_obstacle_always_collides(x in 6.0f64..8.0, y in 2.0f64..8.0, var in 1e-9f64..1.0) {
        prop_assert!(collision_indicator(&belief(Vec2::new(x, y), var), &arena(), 0.1).unwrap());
    }

    #[test]
    fn growing_the_covariance_never_clears_a_collision(
        x in 0.5f64..9.5, y in 0.5f64..9.5,
        entries in prop::collection::vec(-1.0f64..1.0, 16),
        extra in prop::collection::vec(-1.0f64..1.0, 16),
    ) {
        let m = Mat4::from_iterator(entries.iter().copied());
        let e = Mat4::from_iterator(extra.iter().copied());
        let small = m * m.transpose() * 0.05 + Mat4::identity() * 1e-6;
        let big = small + e * e.transpose() * 0.05;
        let mean = Vec4::new(x, y, 0.0, 0.0);
        let hit = |c: Mat4| collision_indicator(&Gaussian::new(mean, CovMatrix::new(c).unwrap()).unwrap(), &arena(), 0.1).unwrap();
        if hit(small) {
            prop_assert!(hit(big));
        }
    }

    #[test]
    fn white_region_noise_free_step_matches_the_model(
        x in 0.0f64..10.0, y in 0.0f64..4.99,
        v in prop::collection::vec(-2.0f64..2.0, 2),
        u in prop::collection::vec(-0.9f64..0.9, 2),
    ) {
        let model = double_integrator_model(0.05, 0.0).unwrap();
        let s = Vec4::new(x, y, v[0], v[1]);
        let a = Vec2::new(u[0], u[1]);
        let mut rng = SeedTree::new(0).stream("t", 0);
        let next = true_step(&arena(), &model, &s, &a, &mut rng);
        prop_assert!((next - model.mean_step(&s, &a)).amax() <= 1e-5);
        prop_assert_eq!(true_step_mean(&arena(), &model, &s, &a), model.mean_step(&s, &a));
    }

    #[test]
    fn shifted_region_step_differs_whenever_moving(
        x in 0.0f64..4.99, y in 5.0f64..9.99,
        v in prop::collection::vec(-2.0f64..2.0, 2),
        u in prop::collection::vec(-0.9f64..0.9, 2),
    ) {
        let model = LinearModel::nominal();
        let s = Vec4::new(x, y, v[0], v[1]);
        let a = Vec2::new(u[0], u[1]);
        prop_assume!(v.iter().chain(&u).any(|c| c.abs() > 1e-3));
        let err = true_step_mean(&arena(), &model, &s, &a) - model.mean_step(&s, &a);
        prop_assert!(err.fixed_rows::<2>(0).norm() > 0.0);
    }

    #[test]
    fn softmin_is_shift_and_permutation_invariant(costs in prop::collection::vec(0.0f64..50.0, 1..30), shift in -100.0f64..100.0, rot in 0usize..30) {
        let w = softmin_weights(&costs, 1.0);
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let shifted: Vec<f64> = costs.iter().map(|c| c + shift).collect();
        for (a, b) in w.iter().zip(softmin_weights(&shifted, 1.0)) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        let k = rot % costs.len();
        let mut rotated = costs.clone();
        rotated.rotate_left(k);
        let mut wr = softmin_weights(&rotated, 1.0);
        wr.rotate_right(k);
        for (a, b) in w.iter().zip(wr) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn normalized_terminal_term_lies_in_unit_interval(dists in prop::collection::vec(0.0f64..10.0, 1..30)) {
        let params = CostParams { w_running: 0.0, w_trace: 0.0, w_collision: 0.0, ..CostParams::default() };
        let batch: Vec<CostBreakdown> = dists
            .iter()
            .map(|&d| CostBreakdown { terminal_distance: d, ..CostBreakdown::default() })
            .collect();
        for c in batch_costs(&batch, &params) {
            prop_assert!((0.0..=params.w_terminal + 1e-12).contains(&c));
        }
    }
}
