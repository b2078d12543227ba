use std::f64::consts::PI;

use polyprop::dynamics::{
    branch_continuations, detect_collision, solve_multipliers, CollisionEvent, EventKind, ParticleState,
};
use polyprop::geometry::{BoundingBox, ConstraintKind, ConstraintSet, Vec2, Wall};
use polyprop::paths::{enumerate_paths, PathRule};
use proptest::prelude::*;

fn bbox() -> BoundingBox {
    BoundingBox::new(Vec2::new(-100.0, -100.0), Vec2::new(100.0, 100.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    /// One active constraint reduces the projection to a scalar:
    /// `λ = -(1 + e) m ġ / |∇g|²`.
    #[test]
    fn single_constraint_multiplier_matches_scalar_formula(
        normal in (-3.0f64..3.0, -3.0f64..3.0),
        v in (-5.0f64..5.0, -5.0f64..5.0),
        e in 0.0f64..=1.0,
        mass in 0.1f64..10.0,
    ) {
        let n = Vec2::new(normal.0, normal.1);
        let v = Vec2::new(v.0, v.1);
        let gdot = n.dot(&v);
        prop_assume!(n.norm() > 0.1 && gdot > 1e-3);
        let point = Vec2::new(0.3, -0.2);
        let cs = ConstraintSet::build(Vec::new(), vec![ConstraintKind::HalfPlane { point, normal: n }], bbox());
        let ev = CollisionEvent { t_hit: 0.0, q_hit: point, active_ids: vec![0], kind: EventKind::Face, corner: None };
        let sol = solve_multipliers(&cs, &ev, &v, mass, e).unwrap();
        let expected = -(1.0 + e) * mass * gdot / n.norm_squared();
        prop_assert_eq!(sol.lambdas.len(), 1);
        prop_assert!((sol.lambdas[0].1 - expected).abs() <= 1e-12 * expected.abs().max(1.0));
        let v_out = v + n * (expected / mass);
        prop_assert!((sol.v_out - v_out).norm() <= 1e-12 * v.norm().max(1.0));
        prop_assert!((n.dot(&sol.v_out) + e * gdot).abs() <= 1e-12 * gdot.max(1.0));
    }

    /// Boundary-value paths and initial-value branches agree: the leg
    /// leaving the blade tip toward any shadow point is within half a fan
    /// cell of a branch direction.
    #[test]
    fn fan_contains_polygon_leg(
        dst in (1.0f64..20.0, -20.0f64..-1.0),
        src_y in 1.0f64..6.0,
        fan_size in prop::sample::select(vec![256usize, 1024, 4096]),
    ) {
        let cs = ConstraintSet::from_walls(vec![Wall::thin("blade", Vec2::new(0.0, 0.0), Vec2::new(0.0, -50.0))], bbox());
        let src = Vec2::new(-10.0, src_y);
        let dst = Vec2::new(dst.0, dst.1);
        // geometric shadow of the tip
        prop_assume!(src.y + (dst.y - src.y) * (-src.x) / (dst.x - src.x) < -1e-6);
        let paths = enumerate_paths(&cs, &src, &dst, 1, PathRule::Taut).unwrap();
        // the blade's far end is a corner too; take the bend at the tip
        let tip = Vec2::new(0.0, 0.0);
        prop_assert!(paths.iter().all(|p| p.corners.len() == 1));
        prop_assert_eq!(paths.iter().filter(|p| p.vertices[1] == tip).count(), 1);

        let s0 = ParticleState::new(src, (tip - src) * 2.0, 0.0);
        let ev = detect_collision(&cs, &s0, 10.0, 1e-7).unwrap();
        prop_assert_eq!(ev.kind, EventKind::Corner);
        let corner = &cs.corners()[ev.corner.unwrap()];
        let hit = ParticleState::new(ev.q_hit, s0.v, ev.t_hit);
        let fan = branch_continuations(corner, &hit, fan_size).unwrap();
        let leg = (dst - tip).normalize();
        let best = fan
            .iter()
            .map(|s| s.v.normalize().dot(&leg).clamp(-1.0, 1.0).acos())
            .fold(f64::INFINITY, f64::min);
        prop_assert!(best <= PI / fan_size as f64 + 1e-9, "best {best}");
        prop_assert!(fan.iter().all(|s| (s.v.norm() - s0.v.norm()).abs() < 1e-12 * s0.v.norm()));
    }
}
