use finsler_core::ode::OdeOptions;
use finsler_core::scenario::{self, CheckKind, Comparison};
use finsler_core::submersion::SubmersionSpec;
use finsler_core::maps::BuiltinMap;
use finsler_core::verifier::{
    check_equidistance, equifocality, fiber_distance, r_grid, verify, Direction, Status, VerifySettings, FOCAL_BAND,
};
use finsler_core::zermelo::{box_probes, randers_from_zermelo, HField, Wind, ZermeloData};
use finsler_core::FinslerMetric;
use proptest::prelude::*;

fn tight() -> OdeOptions {
    OdeOptions::with_tolerances(1e-12, 1e-14)
}

fn light() -> VerifySettings {
    VerifySettings { samples: 6, r_count: 16, ..VerifySettings::default() }
}

fn constant_wind(w: [f64; 3]) -> FinslerMetric {
    let data = ZermeloData::new(HField::Euclidean(3), Wind::Constant(w.to_vec())).unwrap();
    randers_from_zermelo(data, &box_probes(&[-3.0; 3], &[3.0; 3], 3)).unwrap()
}

/// Zermelo travel time from `a` to `b` under a constant wind with
/// Euclidean `h`.
fn zermelo_time(a: &[f64], b: &[f64], w: &[f64]) -> f64 {
    let d: Vec<f64> = b.iter().zip(a).map(|(p, q)| p - q).collect();
    let len = d.iter().map(|c| c * c).sum::<f64>().sqrt();
    let uw: f64 = d.iter().zip(w).map(|(c, v)| c * v).sum::<f64>() / len;
    let w2: f64 = w.iter().map(|c| c * c).sum();
    len / (uw + (1.0 - w2 + uw * uw).sqrt())
}

#[test]
fn distance_from_a_line_in_euclidean_space() {
    let m = constant_wind([0.0; 3]);
    let spec = SubmersionSpec::new(BuiltinMap::DropLast).with_fibers(BuiltinMap::VerticalLines);
    let axis = spec.fiber_patch(&[0.0, 0.0]).unwrap();
    for dir in [Direction::Forward, Direction::Backward] {
        let sol = fiber_distance(&m, &axis, (&[-2.5], &[2.5]), &[0.6, 0.8, 0.3], dir, 4, &tight()).unwrap();
        assert!((sol.distance - 1.0).abs() < 1e-9, "{}", sol.distance);
        assert!((sol.param[0] - 0.3).abs() < 1e-8);
    }
}

#[test]
fn constant_wind_distances_are_not_symmetric() {
    let m = constant_wind([0.5, 0.0, 0.0]);
    let spec = SubmersionSpec::new(BuiltinMap::DropLast).with_fibers(BuiltinMap::VerticalLines);
    let axis = spec.fiber_patch(&[0.0, 0.0]).unwrap();
    let q = [1.0, 0.0, 0.0];
    let fwd = fiber_distance(&m, &axis, (&[-2.0], &[2.0]), &q, Direction::Forward, 5, &tight()).unwrap();
    let bwd = fiber_distance(&m, &axis, (&[-2.0], &[2.0]), &q, Direction::Backward, 5, &tight()).unwrap();
    assert!((fwd.distance - 2.0 / 3.0).abs() < 1e-9, "{}", fwd.distance);
    assert!((bwd.distance - 2.0).abs() < 1e-9, "{}", bwd.distance);
}

#[test]
fn foot_point_outside_the_plaque_is_not_reached() {
    let m = constant_wind([0.0; 3]);
    let spec = SubmersionSpec::new(BuiltinMap::DropLast).with_fibers(BuiltinMap::VerticalLines);
    let axis = spec.fiber_patch(&[0.0, 0.0]).unwrap();
    let r = fiber_distance(&m, &axis, (&[-0.5], &[0.5]), &[1.0, 0.0, 2.0], Direction::Forward, 4, &tight());
    assert!(matches!(r, Err(finsler_core::Error::NotReached { .. })), "{r:?}");
}

#[test]
fn sine_shear_plaques_are_at_base_distance() {
    let sc = scenario::fig1().unwrap();
    let rep = check_equidistance(&sc, &sc.probe.comparisons[0], &light()).unwrap();
    let a = &sc.probe.fiber;
    let b = [0.8, -0.2];
    let w = [0.5, 0.0];
    for s in &rep.series {
        let exact = match s.direction {
            Direction::Forward => zermelo_time(a, &b, &w),
            Direction::Backward => zermelo_time(&b, a, &w),
        };
        assert!((s.radius - exact).abs() < 1e-8, "{:?}: {} vs {exact}", s.direction, s.radius);
        assert!(s.max_residual() < 1e-8, "{}", s.max_residual());
    }
    assert!(rep.passed());
    assert!((rep.series[0].radius - rep.series[1].radius).abs() > 0.5);
}

#[test]
fn rotation_wind_circles_are_equidistant() {
    let sc = scenario::fig2().unwrap();
    let settings = light();
    let circles = check_equidistance(&sc, &sc.probe.comparisons[0], &settings).unwrap();
    assert!(circles.passed(), "{}", circles.max_residual());
    for s in &circles.series {
        assert!((s.radius - 0.5).abs() < 1e-8, "{}", s.radius);
    }
    let axis = check_equidistance(&sc, &Comparison::Point(vec![0.0, 0.0, 0.0]), &settings).unwrap();
    // circle to origin both ways, then origin to the circle both ways
    assert_eq!(axis.series.len(), 4);
    assert!(axis.passed(), "{}", axis.max_residual());
    for s in &axis.series {
        assert!((s.radius - 1.0).abs() < 1e-8, "{}", s.radius);
    }
}

#[test]
fn rotation_wind_rank_drops_on_the_axis() {
    let sc = scenario::fig2().unwrap();
    let rep = equifocality(&sc, &light(), true).unwrap();
    assert_eq!(rep.focal_radii.len(), 1);
    assert!((rep.focal_radii[0] - 1.0).abs() < 1e-6, "{:?}", rep.focal_radii);
    assert!(rep.containment_passed(), "{}", rep.max_spread());
    assert!(rep.rank_passed(), "{}", rep.rank_failures());
    for row in &rep.rows {
        let expected = if row.focal { 0 } else { 1 };
        assert_eq!(row.ranks[0], expected, "r = {}", row.r);
    }
    assert!(rep.rows.iter().any(|r| r.focal));
}

#[test]
fn sine_shear_endpoint_maps_keep_full_rank() {
    let sc = scenario::fig1().unwrap();
    let rep = equifocality(&sc, &light(), true).unwrap();
    assert!(rep.focal_radii.is_empty());
    assert!(rep.containment_passed(), "{}", rep.max_spread());
    assert!(rep.rows.iter().all(|r| r.ranks.iter().all(|k| *k == 1)));
}

#[test]
fn r_grid_avoids_focal_band() {
    let grid = r_grid((0.0, 2.0), 21, &[1.0]);
    for (r, focal) in &grid {
        if !focal {
            assert!((r - 1.0).abs() >= FOCAL_BAND * (1.0 - 1e-12), "{r}");
        }
    }
    assert_eq!(grid.iter().filter(|g| g.1).count(), 1);
}

#[test]
fn positive_scenarios_pass_every_check() {
    for sc in [scenario::fig1().unwrap(), scenario::fig2().unwrap(), scenario::euclid().unwrap()] {
        let rep = verify(&sc, &CheckKind::ALL, &light());
        for o in &rep.outcomes {
            assert_eq!(o.status, Status::Pass, "{} {}: {} ({:?})", sc.name, o.kind.name(), o.max_residual, o.detail);
        }
        assert!(rep.success());
    }
}

#[test]
fn product_level_sets_fail_containment() {
    let sc = scenario::xy().unwrap();
    let rep = verify(&sc, &[CheckKind::Containment], &light());
    let o = &rep.outcomes[0];
    assert!(!o.passed);
    assert!(o.max_residual > 1e-3, "{}", o.max_residual);
    assert_eq!(o.status, Status::ExpectedFail);
    assert!(rep.success());
}

#[test]
fn tilted_planes_fail_horizontality() {
    let sc = scenario::tilted().unwrap();
    let rep = verify(&sc, &[CheckKind::Horizontal], &light());
    let o = &rep.outcomes[0];
    assert!(o.max_residual > 1e-3, "{}", o.max_residual);
    assert_eq!(o.status, Status::ExpectedFail);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn euclidean_distance_to_an_axis_is_the_radius(x in -1.5f64..1.5, y in -1.5f64..1.5, z in -1.0f64..1.0) {
        prop_assume!(x.hypot(y) > 0.1);
        let m = constant_wind([0.0; 3]);
        let spec = SubmersionSpec::new(BuiltinMap::DropLast).with_fibers(BuiltinMap::VerticalLines);
        let axis = spec.fiber_patch(&[0.0, 0.0]).unwrap();
        let sol = fiber_distance(&m, &axis, (&[-2.0], &[2.0]), &[x, y, z], Direction::Forward, 4, &tight()).unwrap();
        prop_assert!((sol.distance - x.hypot(y)).abs() < 1e-9);
    }

    #[test]
    fn backward_distance_is_forward_distance_of_the_reverse(x in 0.3f64..1.5, z in -1.0f64..1.0, w in -0.6f64..0.6) {
        let m = constant_wind([w, 0.0, 0.0]);
        let spec = SubmersionSpec::new(BuiltinMap::DropLast).with_fibers(BuiltinMap::VerticalLines);
        let axis = spec.fiber_patch(&[0.0, 0.0]).unwrap();
        let q = [x, 0.0, z];
        let bwd = fiber_distance(&m, &axis, (&[-2.0], &[2.0]), &q, Direction::Backward, 4, &tight()).unwrap();
        prop_assert!((bwd.distance - zermelo_time(&q, &[0.0, 0.0, z], &[w, 0.0, 0.0])).abs() < 1e-9);
    }
}
