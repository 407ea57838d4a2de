use std::sync::Arc;

use finsler_core::field::map_second;
use finsler_core::jacobi::{integrate_bundle, l_jacobi_basis, normal_geodesic, SelfAdjointSpace, SpaceLabel};
use finsler_core::linalg::mat_vec;
use finsler_core::maps::{BuiltinMap, RadialHeightBase};
use finsler_core::ode::OdeOptions;
use finsler_core::spray::nonlinear_connection;
use finsler_core::submersion::{BasicNormal, SubmersionSpec};
use finsler_core::wilking::{
    build_wilking_frame, g_norm_sq, h_orthonormal_basis, integrate_transversal_jacobi, transversal_conjugate_points,
    WilkingFrame,
};
use finsler_core::zermelo::{box_probes, randers_from_zermelo, HField, Wind, ZermeloData};
use finsler_core::{Error, FinslerMetric};
use nalgebra::DVector;

fn zermelo(h: HField, wind: Wind, lo: &[f64], hi: &[f64]) -> FinslerMetric {
    randers_from_zermelo(ZermeloData::new(h, wind).unwrap(), &box_probes(lo, hi, 5)).unwrap()
}

fn tight() -> OdeOptions {
    OdeOptions::with_tolerances(1e-11, 1e-13)
}

struct Setup {
    metric: FinslerMetric,
    spec: SubmersionSpec,
    w_space: SelfAdjointSpace,
    v_space: SelfAdjointSpace,
    frame: WilkingFrame,
}

/// Horizontal geodesic through `fibers(c, s0)` lifting `w`, with the full
/// L-Jacobi space of the fiber and its holonomy subspace.
fn setup(metric: FinslerMetric, spec: SubmersionSpec, c: &[f64], s0: f64, w: &[f64], t1: f64) -> Setup {
    let fiber = spec.fiber_patch(c).unwrap();
    let x0 = fiber.point_at(&[s0]);
    let basic = BasicNormal { metric: metric.clone(), spec: spec.clone(), fiber: fiber.clone(), w: w.to_vec() };
    let lift = basic.lift_at(&[s0]).unwrap();
    let xi: Vec<f64> = lift.lift.iter().map(|c| c / lift.norm).collect();
    let geo = normal_geodesic(&metric, &fiber, &[s0], &xi, t1, &tight()).unwrap();
    let w_space = l_jacobi_basis(&metric, &fiber, &[s0], &geo, &tight()).unwrap();
    let (j0, j0p) = basic.holonomy_initial_data(&[s0]).unwrap();
    let j0p: Vec<Vec<f64>> = j0p.iter().map(|c| c.iter().map(|a| a / lift.norm).collect()).collect();
    let vb = integrate_bundle(&metric, &x0, &xi, 0.0, t1, &j0, &j0p, &tight()).unwrap();
    let v_space = SelfAdjointSpace { bundle: Arc::new(vb), label: SpaceLabel::Vertical };
    let frame = build_wilking_frame(&w_space, &v_space, (0.0, t1)).unwrap();
    Setup { metric, spec, w_space, v_space, frame }
}

fn fig1() -> Setup {
    let metric = zermelo(HField::Euclidean(3), Wind::SineShear, &[-4.0; 3], &[4.0; 3]);
    let base = zermelo(HField::Euclidean(2), Wind::Constant(vec![0.5, 0.0]), &[-4.0; 2], &[4.0; 2]);
    let spec = SubmersionSpec::new(BuiltinMap::DropLast).with_fibers(BuiltinMap::VerticalLines).with_base(base);
    setup(metric, spec, &[0.3, 0.1], 0.2, &[0.6, -0.8], 2.0)
}

fn fig2_spec() -> SubmersionSpec {
    SubmersionSpec::new(BuiltinMap::RadialHeight)
        .with_fibers(BuiltinMap::HorizontalCircles)
        .with_base(FinslerMetric::new(RadialHeightBase))
}

fn fig2(s0: f64) -> Setup {
    let metric = zermelo(HField::Euclidean(3), Wind::Rotation { omega: 0.5 }, &[-1.3, -1.3, -2.0], &[1.3, 1.3, 2.0]);
    setup(metric, fig2_spec(), &[1.0, 0.0], s0, &[-2.0, 0.0], 2.0)
}

fn sphere_base(z0: f64) -> Setup {
    let metric = zermelo(HField::SphereTimesLine, Wind::Constant(vec![0.0, 0.0, 0.3]), &[0.3, -4.0, -4.0], &[2.8, 4.0, 4.0]);
    let base = zermelo(HField::SphereChart, Wind::Zero(2), &[0.3, -4.0], &[2.8, 4.0]);
    let spec = SubmersionSpec::new(BuiltinMap::DropLast).with_fibers(BuiltinMap::VerticalLines).with_base(base);
    setup(metric, spec, &[core::f64::consts::FRAC_PI_2, 0.0], z0, &[0.0, 1.0], 4.0)
}

fn times(a: f64, b: f64, k: usize) -> Vec<f64> {
    (0..=k).map(|i| a + (b - a) * i as f64 / k as f64).collect()
}

#[test]
fn product_frame_is_constant() {
    let metric = zermelo(HField::Euclidean(3), Wind::Zero(3), &[-1.0; 3], &[1.0; 3]);
    let spec = SubmersionSpec::new(BuiltinMap::DropLast).with_fibers(BuiltinMap::VerticalLines);
    let s = setup(metric, spec, &[0.0, 0.0], 0.0, &[1.0, 0.0], 3.0);
    assert!(s.frame.degeneracies().is_empty());
    let p0 = s.frame.at(0.0).unwrap().p_h;
    for t in times(0.0, 3.0, 30) {
        let fv = s.frame.at(t).unwrap();
        assert!((&fv.p_h - &p0).amax() < 1e-10);
        assert!(fv.oneill().amax() < 1e-10);
    }
    let x0 = vec![0.0, 1.0, 0.0];
    let y0 = vec![0.0, 0.5, 0.0];
    let sol = integrate_transversal_jacobi(&s.frame, 0.0, &[x0], &[y0], 3.0, &tight()).unwrap();
    for t in times(0.0, 3.0, 10) {
        let x = sol.x(t);
        assert!((x[(1, 0)] - (1.0 + 0.5 * t)).abs() < 1e-9 && x[(0, 0)].abs() < 1e-9 && x[(2, 0)].abs() < 1e-9);
    }
    let rep = transversal_conjugate_points(&s.frame, 0.0, (0.0, 3.0), &tight()).unwrap();
    assert!(rep.instants.is_empty());
}

#[test]
fn frame_projections_are_orthogonal() {
    let s = fig1();
    assert_eq!(s.frame.dim_v(), 1);
    assert_eq!(s.frame.dim_h(), 1);
    for t in times(0.0, 2.0, 40) {
        let fv = s.frame.at(t).unwrap();
        assert!(fv.orthogonality_defect() < 1e-8, "{t}: {}", fv.orthogonality_defect());
    }
}

#[test]
fn projector_rates_match_differences() {
    let s = fig1();
    let h = 1e-5;
    for t in [0.3, 1.1, 1.7] {
        let a = s.frame.at(t + h).unwrap();
        let b = s.frame.at(t - h).unwrap();
        let fv = s.frame.at(t).unwrap();
        let fd = (&a.p_h - &b.p_h) / (2.0 * h);
        assert!((&fd - &fv.p_h_dot).amax() < 1e-6, "{}", (&fd - &fv.p_h_dot).amax());
    }
}

#[test]
fn oneill_tensor_exchanges_and_is_skew() {
    let s = fig1();
    let mut seen = 0.0f64;
    for t in times(0.1, 1.9, 12) {
        let fv = s.frame.at(t).unwrap();
        let a = fv.oneill();
        let hb = h_orthonormal_basis(&fv).unwrap();
        let x = hb.column(0).into_owned();
        let z = fv.basis.column(0).into_owned();
        let ax = &a * &x;
        let az = &a * &z;
        assert!((&fv.p_h * &ax).amax() < 1e-7, "A maps H into V");
        assert!((&fv.p_v * &az).amax() < 1e-7, "A maps V into H");
        let lhs = (ax.transpose() * &fv.g * &z)[0];
        let rhs = (x.transpose() * &fv.g * &az)[0];
        assert!((lhs + rhs).abs() < 1e-6, "{t}: {lhs} {rhs}");
        seen = seen.max(ax.amax());
    }
    assert!(seen > 1e-3, "the O'Neill tensor is not identically zero here");
}

#[test]
fn projected_jacobi_fields_solve_the_transversal_equation() {
    check_projected_fields(&fig1(), 2.0);
}

#[test]
fn projected_fields_cross_the_axis() {
    check_projected_fields(&fig2(0.3), 2.0);
}

fn check_projected_fields(s: &Setup, t1: f64) {
    let b = &s.w_space.bundle;
    let j0 = b.j(0.0);
    let jd0 = b.jdot(0.0);
    for c in 0..b.fields() {
        let col: Vec<f64> = j0.column(c).iter().copied().collect();
        let dcol: Vec<f64> = jd0.column(c).iter().copied().collect();
        let (x0, y0) = s.frame.horizontal_part(0.0, &col, &dcol).unwrap();
        let sol = integrate_transversal_jacobi(&s.frame, 0.0, &[x0], &[y0], t1, &tight()).unwrap();
        for t in times(0.0, t1, 40) {
            let fv = s.frame.at(t).unwrap();
            let proj = &fv.p_h * b.j(t).column(c);
            let x = sol.x(t);
            let err = (&proj - x.column(0)).amax();
            assert!(err < 1e-5, "field {c} t {t}: {err}");
        }
    }
}

#[test]
fn axis_crossing_keeps_dimension() {
    let s = fig2(0.0);
    let degs = s.frame.degeneracies();
    assert_eq!(degs.len(), 1);
    assert!((degs[0].t - 1.0).abs() < 1e-6, "{}", degs[0].t);
    assert_eq!(degs[0].multiplicity(), 1);
    for t in times(0.0, 2.0, 200).into_iter().chain([1.0, degs[0].t, degs[0].t + 5e-5]) {
        assert!(s.frame.rank_ratio(t).unwrap() > 1e-6);
        assert_eq!(s.frame.at(t).unwrap().dim_v(), 1);
        assert!(s.frame.at(t).unwrap().orthogonality_defect() < 1e-8);
    }
    // the rescaled basis at the instant is J′(t₀)
    let t0 = degs[0].t;
    let fv = s.frame.at(t0).unwrap();
    assert!(fv.degenerate);
    let jp = s.v_space.bundle.jprime(t0);
    let jp = jp.column(0).into_owned() * degs[0].null[(0, 0)];
    let jp = &jp / jp.norm();
    let b = fv.basis.column(0).into_owned();
    assert!((&b - &jp).amax() < 1e-6, "{b} vs {jp}");
    // and continuous with J(t)/(t − t₀) just outside the window
    for s_off in [-2e-4, 2e-4] {
        let out = s.frame.at(t0 + s_off).unwrap().basis.column(0).into_owned();
        let inside = s.frame.at(t0 + s_off.signum() * 0.9e-4).unwrap().basis.column(0).into_owned();
        let sign = if (out.dot(&inside)) < 0.0 { -1.0 } else { 1.0 };
        assert!((&out * sign - &inside).amax() < 1e-3);
    }
}

#[test]
fn transversal_fields_project_to_base_jacobi_fields() {
    let s = fig2(0.0);
    let pi = s.spec.pi.clone();
    let base = s.spec.base_metric.clone().unwrap();
    let fv = s.frame.at(0.0).unwrap();
    let x0: Vec<f64> = h_orthonormal_basis(&fv).unwrap().column(0).iter().copied().collect();
    let y0: Vec<f64> = x0.iter().map(|c| 0.3 * c).collect();
    let t1 = 0.9;
    let sol = integrate_transversal_jacobi(&s.frame, 0.0, &[x0.clone()], &[y0.clone()], t1, &tight()).unwrap();
    let (p0, v0) = s.frame.bundle().geodesic_state(0.0);
    let dpi = s.spec.dpi(&p0);
    let c0 = s.spec.project(&p0);
    let cdot0 = mat_vec(&dpi, &v0);
    // d/dt (dπ X) = D²π(γ̇, X) + dπ Ẋ, with Ẋ from the transversal equation
    let xd0 = {
        let xv = DVector::from_column_slice(&x0);
        let yv = DVector::from_column_slice(&y0);
        let xd = &yv + (&fv.p_h_dot - &fv.p_h * &fv.nl) * &xv;
        xd.iter().copied().collect::<Vec<f64>>()
    };
    let second = map_second(&*pi, &p0, &v0, &x0);
    let jb0 = mat_vec(&dpi, &x0);
    let jbd0: Vec<f64> = mat_vec(&dpi, &xd0).iter().zip(&second).map(|(a, b)| a + b).collect();
    let nb = nonlinear_connection(&base, &c0, &cdot0);
    let jbp0: Vec<f64> = jbd0.iter().zip(mat_vec(&nb, &jb0)).map(|(a, b)| a + b).collect();
    let bb = integrate_bundle(&base, &c0, &cdot0, 0.0, t1, &[jb0], &[jbp0], &tight()).unwrap();
    for t in times(0.0, t1, 18) {
        let (x, _) = s.frame.bundle().geodesic_state(t);
        let proj = mat_vec(&s.spec.dpi(&x), &sol.x(t).column(0).iter().copied().collect::<Vec<f64>>());
        let jb = bb.j(t);
        for i in 0..2 {
            assert!((proj[i] - jb[(i, 0)]).abs() < 1e-5, "t {t}: {proj:?} vs {jb}");
        }
    }
}

#[test]
fn two_lifts_share_conjugate_instants_and_norms() {
    let a = fig2(0.0);
    let b = fig2(0.7);
    let ra = transversal_conjugate_points(&a.frame, 0.0, (0.0, 2.0), &tight()).unwrap();
    let rb = transversal_conjugate_points(&b.frame, 0.0, (0.0, 2.0), &tight()).unwrap();
    assert_eq!(ra.instants.len(), rb.instants.len());
    for (p, q) in ra.instants.iter().zip(&rb.instants) {
        assert!((p.t - q.t).abs() < 1e-6);
    }
    for t in times(0.05, 1.95, 20) {
        let na = g_norm_sq(&a.frame, &ra.solution, 0, t);
        let nb = g_norm_sq(&b.frame, &rb.solution, 0, t);
        assert!((na - nb).abs() < 1e-6, "{t}: {na} {nb}");
    }
}

#[test]
fn sphere_base_conjugate_at_pi() {
    let a = sphere_base(0.0);
    let b = sphere_base(1.1);
    let ra = transversal_conjugate_points(&a.frame, 0.0, (0.0, 4.0), &tight()).unwrap();
    let rb = transversal_conjugate_points(&b.frame, 0.0, (0.0, 4.0), &tight()).unwrap();
    assert_eq!(ra.instants.len(), 1, "{:?}", ra.instants);
    assert!((ra.instants[0].t - core::f64::consts::PI).abs() < 1e-3, "{:?}", ra.instants);
    assert_eq!(ra.instants[0].multiplicity, 1);
    assert_eq!(rb.instants.len(), 1);
    assert!((ra.instants[0].t - rb.instants[0].t).abs() < 1e-6);
}

#[test]
fn dependent_vertical_fields_are_rejected() {
    let s = fig1();
    let vb = &s.v_space.bundle;
    let (x0, v0) = vb.geodesic_state(0.0);
    let j: Vec<f64> = vb.j(0.0).column(0).iter().copied().collect();
    let jd: Vec<f64> = vb.jprime(0.0).column(0).iter().copied().collect();
    let twice: Vec<f64> = j.iter().map(|c| 2.0 * c).collect();
    let twice_d: Vec<f64> = jd.iter().map(|c| 2.0 * c).collect();
    let dup = integrate_bundle(&s.metric, &x0, &v0, 0.0, 2.0, &[j, twice], &[jd, twice_d], &tight()).unwrap();
    let dup = SelfAdjointSpace { bundle: Arc::new(dup), label: SpaceLabel::Vertical };
    match build_wilking_frame(&s.w_space, &dup, (0.0, 2.0)) {
        Err(Error::DimensionDrop { expected, found, .. }) => assert_eq!((expected, found), (2, 1)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn foreign_vertical_fields_are_rejected() {
    let s = fig1();
    let (x0, v0) = s.v_space.bundle.geodesic_state(0.0);
    // a field with J(0) along γ̇
    let bad = integrate_bundle(&s.metric, &x0, &v0, 0.0, 2.0, &[v0.clone()], &[vec![0.0; 3]], &tight()).unwrap();
    let bad = SelfAdjointSpace { bundle: Arc::new(bad), label: SpaceLabel::Vertical };
    assert!(matches!(build_wilking_frame(&s.w_space, &bad, (0.0, 2.0)), Err(Error::InvalidInput(_))));
}
