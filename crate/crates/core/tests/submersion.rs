use finsler_core::geodesic::is_orthogonal;
use finsler_core::jacobi::{integrate_bundle, variation_along};
use finsler_core::maps::{BuiltinMap, RadialHeightBase};
use finsler_core::ode::OdeOptions;
use finsler_core::sampling::Sampler;
use finsler_core::submersion::{
    basic_field_along_fiber, check_submersion, check_transnormality, horizontal_lift_geodesic, horizontal_lift_vector,
    induced_base_norm, BasicNormal, SubmersionSpec,
};
use finsler_core::zermelo::{box_probes, randers_from_zermelo, HField, Wind, ZermeloData};
use finsler_core::{Error, FinslerMetric, TangentSample};

fn zermelo(h: HField, wind: Wind, lo: &[f64], hi: &[f64]) -> FinslerMetric {
    randers_from_zermelo(ZermeloData::new(h, wind).unwrap(), &box_probes(lo, hi, 5)).unwrap()
}

fn fig1() -> FinslerMetric {
    zermelo(HField::Euclidean(3), Wind::SineShear, &[-3.0; 3], &[3.0; 3])
}

fn fig1_base() -> FinslerMetric {
    zermelo(HField::Euclidean(2), Wind::Constant(vec![0.5, 0.0]), &[-3.0; 2], &[3.0; 2])
}

fn fig2() -> FinslerMetric {
    zermelo(HField::Euclidean(3), Wind::Rotation { omega: 0.5 }, &[-1.3, -1.3, -2.0], &[1.3, 1.3, 2.0])
}

fn fig1_spec() -> SubmersionSpec {
    SubmersionSpec::new(BuiltinMap::DropLast).with_fibers(BuiltinMap::VerticalLines).with_base(fig1_base())
}

fn fig2_spec() -> SubmersionSpec {
    SubmersionSpec::new(BuiltinMap::RadialHeight)
        .with_fibers(BuiltinMap::HorizontalCircles)
        .with_base(FinslerMetric::new(RadialHeightBase))
}

fn tight() -> OdeOptions {
    OdeOptions::with_tolerances(1e-11, 1e-13)
}

#[test]
fn euclidean_projection_induces_euclidean_norm() {
    let m = zermelo(HField::Euclidean(3), Wind::Zero(3), &[-1.0; 3], &[1.0; 3]);
    let spec = SubmersionSpec::new(BuiltinMap::DropLast);
    let mut rng = Sampler::new(3);
    for _ in 0..100 {
        let x = rng.in_box(&[-2.0; 3], &[2.0; 3]);
        let w = [rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)];
        let f = induced_base_norm(&m, &spec, &x, &w).unwrap();
        assert!((f - w[0].hypot(w[1])).abs() < 1e-12);
    }
}

#[test]
fn sine_shear_induces_constant_wind() {
    let m = fig1();
    let spec = fig1_spec();
    let base = fig1_base();
    let mut rng = Sampler::new(11);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let x = rng.in_box(&[-2.0; 3], &[2.0; 3]);
        let w = rng.direction(2);
        let lift = horizontal_lift_vector(&m, &spec, &x, &w).unwrap();
        worst = worst.max((lift.norm - base.norm(&x[..2], &w)).abs());
        // the lift is orthogonal to the fiber and projects onto w
        let leg = m.legendre(&x, &lift.lift);
        assert!(leg[2].abs() < 1e-10, "{}", leg[2]);
        assert!((lift.lift[0] - w[0]).abs() < 1e-13 && (lift.lift[1] - w[1]).abs() < 1e-13);
    }
    assert!(worst < 1e-8, "{worst}");
    let rep = check_submersion(&m, &spec, (&[-2.0, -2.0], &[2.0, 2.0]), (&[-2.0], &[2.0]), 100, 5).unwrap();
    assert!(rep.passed(1e-8), "{}", rep.max_defect);
}

#[test]
fn lift_of_e1_is_orthogonal_to_vertical_fiber() {
    let m = fig1();
    let spec = fig1_spec();
    let x = [0.3, -0.2, 0.7];
    let lift = horizontal_lift_vector(&m, &spec, &x, &[1.0, 0.0]).unwrap();
    let basis = spec.vertical_basis(&x);
    let o = is_orthogonal(&m, &TangentSample::new(&x, &lift.lift), &basis).unwrap();
    assert!(o.orthogonal, "{}", o.residual);
}

#[test]
fn rotation_wind_induces_radial_base() {
    let m = fig2();
    let spec = fig2_spec();
    let mut rng = Sampler::new(7);
    for _ in 0..100 {
        let c = [rng.uniform(0.1, 1.5), rng.uniform(-1.0, 1.0)];
        let s = [rng.uniform(-3.0, 3.0)];
        let x = spec.fiber_patch(&c).unwrap().point_at(&s);
        let w = rng.direction(2);
        let f = induced_base_norm(&m, &spec, &x, &w).unwrap();
        let exact = (w[0] * w[0] / (4.0 * c[0]) + w[1] * w[1]).sqrt();
        assert!((f - exact).abs() < 1e-10, "{f} vs {exact}");
    }
    let rep = check_submersion(&m, &spec, (&[0.1, -1.0], &[1.5, 1.0]), (&[-3.0], &[3.0]), 50, 1).unwrap();
    assert!(rep.passed(1e-8), "{}", rep.max_defect);
}

#[test]
fn tilted_projection_is_not_a_submersion() {
    let m = fig1();
    let spec = SubmersionSpec::new(BuiltinMap::Tilted).with_fibers(BuiltinMap::TiltedLines);
    let rep = check_submersion(&m, &spec, (&[-1.0, -1.0], &[1.0, 1.0]), (&[-1.5], &[1.5]), 100, 2).unwrap();
    assert!(rep.max_defect > 1e-2, "{}", rep.max_defect);
    assert!(!rep.passed(1e-8));
}

#[test]
fn singular_points_are_reported() {
    let m = fig2();
    let spec = fig2_spec();
    match induced_base_norm(&m, &spec, &[0.0, 0.0, 0.3], &[1.0, 0.0]) {
        Err(Error::RankDeficient { ratio }) => assert!(ratio < 1e-8),
        other => panic!("{other:?}"),
    }
}

#[test]
fn basic_fields_have_constant_norm() {
    let m = fig1();
    let spec = fig1_spec();
    let fiber = spec.fiber_patch(&[0.4, -0.3]).unwrap();
    let xi = horizontal_lift_vector(&m, &spec, &fiber.point_at(&[0.0]), &[0.6, 0.8]).unwrap().lift;
    let params: Vec<Vec<f64>> = (0..21).map(|i| vec![-2.0 + 0.2 * i as f64]).collect();
    let rep = basic_field_along_fiber(&m, &spec, &fiber, &[0.0], &xi, &params).unwrap();
    assert!(rep.constancy_defect < 1e-8, "{}", rep.constancy_defect);

    let m2 = fig2();
    let spec2 = fig2_spec();
    let fiber2 = spec2.fiber_patch(&[1.0, 0.0]).unwrap();
    let xi2 = horizontal_lift_vector(&m2, &spec2, &fiber2.point_at(&[0.0]), &[-1.0, 0.5]).unwrap().lift;
    let params2: Vec<Vec<f64>> = (0..24).map(|i| vec![0.25 * i as f64]).collect();
    let rep2 = basic_field_along_fiber(&m2, &spec2, &fiber2, &[0.0], &xi2, &params2).unwrap();
    assert!(rep2.constancy_defect < 1e-8, "{}", rep2.constancy_defect);
}

#[test]
fn lift_derivative_matches_differences() {
    let m = fig2();
    let spec = fig2_spec();
    let fiber = spec.fiber_patch(&[0.8, 0.2]).unwrap();
    let basic = BasicNormal::through(&m, &spec, &fiber, &[0.3], &[-1.0, 0.2, 0.3]);
    let h = 1e-5;
    let p = basic.lift_at(&[0.3 + h]).unwrap().lift;
    let q = basic.lift_at(&[0.3 - h]).unwrap().lift;
    let lift = basic.lift_at(&[0.3]).unwrap();
    let xa: Vec<f64> = fiber.tangent_basis(&[0.3]).unwrap().column(0).iter().copied().collect();
    let d = finsler_core::submersion::horizontal_lift_derivative(&m, &spec, &lift, &xa).unwrap();
    for i in 0..3 {
        assert!((d[i] - (p[i] - q[i]) / (2.0 * h)).abs() < 1e-8);
    }
}

#[test]
fn lifted_geodesics_project_to_base_geodesics() {
    let m = fig1();
    let spec = fig1_spec();
    let lifted = horizontal_lift_geodesic(&m, &spec, &[0.2, 0.1, -0.4], &[0.3, 0.9], 2.0, 200, &tight()).unwrap();
    assert!(lifted.tracking_defect < 1e-6, "{}", lifted.tracking_defect);
    let rep = check_transnormality(&m, &spec, &lifted.path, 50).unwrap();
    assert!(rep.passed(), "{}", rep.max_residual);

    let m2 = fig2();
    let spec2 = fig2_spec();
    let p = [0.9, 0.1, 0.0];
    let lifted2 = horizontal_lift_geodesic(&m2, &spec2, &p, &[-0.8, 0.3], 0.5, 100, &tight()).unwrap();
    assert!(lifted2.tracking_defect < 1e-6, "{}", lifted2.tracking_defect);
}

#[test]
fn non_submersion_breaks_transnormality() {
    let m = fig1();
    let spec = SubmersionSpec::new(BuiltinMap::Tilted);
    let x = [0.2, 0.0, 0.5];
    let xi = horizontal_lift_vector(&m, &spec, &x, &[1.0, 0.3]).unwrap().lift;
    let geo = finsler_core::geodesic::integrate_geodesic(&m, &x, &xi, 0.0, 2.0, &tight()).unwrap();
    let rep = check_transnormality(&m, &spec, &geo, 40).unwrap();
    assert!(rep.residuals[0].1 < 1e-10);
    assert!(!rep.passed(), "{}", rep.max_residual);
}

#[test]
fn holonomy_fields_are_fiber_variations() {
    for (m, spec, c, s0, w) in [
        (fig1(), fig1_spec(), vec![0.3, 0.1], 0.2, vec![0.6, -0.8]),
        (fig2(), fig2_spec(), vec![0.8, 0.0], 0.4, vec![-1.0, 0.4]),
    ] {
        let fiber = spec.fiber_patch(&c).unwrap();
        let x0 = fiber.point_at(&[s0]);
        let basic = BasicNormal { metric: m.clone(), spec: spec.clone(), fiber: fiber.clone(), w };
        let lift = basic.lift_at(&[s0]).unwrap();
        let v0: Vec<f64> = lift.lift.iter().map(|c| c / lift.norm).collect();
        let (j0, j0p) = basic.holonomy_initial_data(&[s0]).unwrap();
        let scaled: Vec<Vec<f64>> = j0p.iter().map(|c| c.iter().map(|a| a / lift.norm).collect()).collect();
        let bundle = integrate_bundle(&m, &x0, &v0, 0.0, 0.8, &j0, &scaled, &tight()).unwrap();
        let times = [0.2, 0.5, 0.8];
        let var = variation_along(&m, &fiber, &basic, &[s0], &[1.0], &times, 1e-4, &tight()).unwrap();
        for (t, val) in times.iter().zip(&var.values) {
            let j = bundle.j(*t);
            for i in 0..3 {
                assert!((j[(i, 0)] - val[i]).abs() < 1e-6, "t={t} i={i}: {} vs {}", j[(i, 0)], val[i]);
            }
        }
    }
}

#[test]
fn fiber_patches_need_a_parametrization() {
    let spec = SubmersionSpec::new(BuiltinMap::DropLast);
    assert!(spec.fiber_patch(&[0.0, 0.0]).is_err());
}
