use finsler_core::dual::Scalar;
use finsler_core::field::GenericMap;
use finsler_core::geodesic::*;
use finsler_core::jacobi::*;
use finsler_core::linalg::{columns, max_abs, mat_vec};
use finsler_core::ode::OdeOptions;
use finsler_core::sampling::Sampler;
use finsler_core::zermelo::{randers_from_zermelo, HField, Wind, ZermeloData};
use finsler_core::FinslerMetric;

fn metric(h: HField, w: Wind) -> FinslerMetric {
    randers_from_zermelo(ZermeloData::new(h, w).unwrap(), &[]).unwrap()
}

fn euclid(n: usize) -> FinslerMetric {
    metric(HField::Euclidean(n), Wind::Zero(n))
}

fn fig1() -> FinslerMetric {
    metric(HField::Euclidean(3), Wind::SineShear)
}

fn fig2() -> FinslerMetric {
    metric(HField::Euclidean(3), Wind::Rotation { omega: 0.5 })
}

fn opts() -> OdeOptions {
    OdeOptions::default()
}

/// `(ρ cos s, ρ sin s, 0)`, or in the plane when `dim == 2`.
struct Circle {
    rho: f64,
    dim: usize,
}

impl GenericMap for Circle {
    fn in_dim(&self) -> usize {
        1
    }
    fn out_dim(&self) -> usize {
        self.dim
    }
    fn map<S: Scalar>(&self, u: &[S]) -> Vec<S> {
        let mut x = vec![u[0].cos().scale(self.rho), u[0].sin().scale(self.rho)];
        x.resize(self.dim, S::zero());
        x
    }
}

/// Cylinder `(ρ cos s, ρ sin s, z)`.
struct Cylinder {
    rho: f64,
}

impl GenericMap for Cylinder {
    fn in_dim(&self) -> usize {
        2
    }
    fn out_dim(&self) -> usize {
        3
    }
    fn map<S: Scalar>(&self, u: &[S]) -> Vec<S> {
        vec![u[0].cos().scale(self.rho), u[0].sin().scale(self.rho), u[1]]
    }
}

/// Vertical line `(c1, c2, s)`.
fn vertical_line(c1: f64, c2: f64) -> SubmanifoldPatch {
    SubmanifoldPatch::affine(&[c1, c2, 0.0], &[vec![0.0, 0.0, 1.0]])
}

#[test]
fn flat_curvature_vanishes_and_fields_are_affine() {
    let m = metric(HField::Euclidean(3), Wind::Constant(vec![0.4, 0.1, -0.2]));
    let geo = integrate_geodesic(&m, &[0.0; 3], &[0.3, 1.0, 0.2], 0.0, 2.0, &opts()).unwrap();
    let r = jacobi_operator(&geo, 1.0).unwrap();
    assert!(r.r.amax() < 1e-12);
    let (j0, j0p) = ([1.0, -0.5, 0.2], [0.3, 0.0, -0.7]);
    let field = integrate_jacobi(&geo, &j0, &j0p, &opts()).unwrap();
    for t in [0.5, 2.0] {
        let expect: Vec<f64> = j0.iter().zip(&j0p).map(|(a, b)| a + t * b).collect();
        assert!(sup_distance(&field.value(t), &expect) < 1e-10);
        assert!(sup_distance(&field.derivative(t), &j0p) < 1e-10);
    }
}

#[test]
fn jacobi_operator_kills_velocity_on_fig1() {
    let m = fig1();
    let mut s = Sampler::new(3);
    for _ in 0..5 {
        let x0 = s.in_box(&[-1.0; 3], &[1.0; 3]);
        let v0 = s.direction(3);
        let geo = integrate_geodesic(&m, &x0, &v0, 0.0, 2.0, &opts()).unwrap();
        for t in [0.0, 0.9, 2.0] {
            let r = jacobi_operator(&geo, t).unwrap();
            assert!(max_abs(&mat_vec(&r.r, &geo.velocity(t))) < 1e-9);
        }
    }
}

#[test]
fn sphere_meridian_curvature_is_one() {
    let m = metric(HField::SphereChart, Wind::Zero(2));
    let geo = integrate_geodesic(&m, &[0.3, 0.1], &[1.0, 0.0], 0.0, 2.0, &opts()).unwrap();
    for t in [0.5, 1.2, 2.0] {
        let r = jacobi_operator(&geo, t).unwrap().r;
        let top = r.complex_eigenvalues().iter().map(|z| z.re).fold(f64::MIN, f64::max);
        assert!(libm::fabs(top - 1.0) < 1e-6);
    }
}

#[test]
fn velocity_fields_are_jacobi() {
    let m = fig1();
    let geo = integrate_geodesic(&m, &[0.1, 0.2, 0.0], &[0.6, -0.3, 0.5], 0.0, 2.0, &opts()).unwrap();
    let v0 = geo.velocity(0.0);
    let a = integrate_jacobi(&geo, &v0, &[0.0; 3], &opts()).unwrap();
    let b = integrate_jacobi(&geo, &[0.0; 3], &v0, &opts()).unwrap();
    for t in [0.7, 2.0] {
        let v = geo.velocity(t);
        assert!(sup_distance(&a.value(t), &v) < 1e-8);
        let tv: Vec<f64> = v.iter().map(|c| t * c).collect();
        assert!(sup_distance(&b.value(t), &tv) < 1e-8);
    }
}

#[test]
fn jacobi_equation_residual_is_small() {
    let m = fig2();
    let tight = OdeOptions::with_tolerances(1e-12, 1e-14);
    let geo = integrate_geodesic(&m, &[0.5, 0.2, -0.1], &[-0.4, 0.7, 0.3], 0.0, 1.5, &tight).unwrap();
    let f = integrate_jacobi(&geo, &[0.2, 0.1, 1.0], &[0.5, -0.2, 0.0], &tight).unwrap();
    let h = 1e-4;
    for t in [0.4, 1.0] {
        let bundle = f.bundle();
        let snap = bundle.snapshot(t);
        let dp: Vec<f64> = f.derivative(t + h).iter().zip(f.derivative(t - h)).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        let jp = f.derivative(t);
        // J″ = d/dt J′ + N J′ along the geodesic.
        let corr = mat_vec(&snap.nl, &jp);
        let r = jacobi_operator(&geo, t).unwrap().r;
        let rj = mat_vec(&r, &f.value(t));
        let resid: Vec<f64> = (0..3).map(|i| dp[i] + corr[i] + rj[i]).collect();
        assert!(max_abs(&resid) < 1e-6, "{resid:?}");
    }
}

#[test]
fn wronskian_is_conserved_for_any_pair() {
    let m = fig1();
    let geo_start = ([0.2, -0.4, 0.3], [0.5, 0.8, -0.1]);
    let bundle = integrate_bundle(
        &m,
        &geo_start.0,
        &geo_start.1,
        0.0,
        3.0,
        &[vec![1.0, 0.0, 0.3], vec![0.0, 0.5, 1.0]],
        &[vec![0.2, -0.7, 0.0], vec![0.4, 0.0, 0.9]],
        &opts(),
    )
    .unwrap();
    let w = |t: f64| {
        let s = bundle.snapshot(t);
        let g = m.g_matrix(&s.x, &s.v);
        let a = (s.jprime.column(0).transpose() * &g * s.j.column(1))[0];
        let b = (s.j.column(0).transpose() * &g * s.jprime.column(1))[0];
        a - b
    };
    let w0 = w(0.0);
    for t in [0.5, 1.5, 3.0] {
        assert!(libm::fabs(w(t) - w0) < 1e-7, "{} vs {}", w(t), w0);
    }
}

#[test]
fn shape_operators() {
    let e = euclid(3);
    let plane = SubmanifoldPatch::affine(&[0.0; 3], &[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]);
    let s = shape_operator(&e, &plane, &[0.2, 0.3], &[0.0, 0.0, 1.0]).unwrap();
    assert!(s.s.amax() < 1e-12);

    let rho = 2.0;
    let cyl = SubmanifoldPatch::new(Cylinder { rho });
    let u = [0.7, 0.4];
    let p = cyl.point_at(&u);
    let inward = [-p[0] / rho, -p[1] / rho, 0.0];
    let s = shape_operator(&e, &cyl, &u, &inward).unwrap();
    let mut eig: Vec<f64> = s.s.complex_eigenvalues().iter().map(|z| z.re).collect();
    eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert!(libm::fabs(eig[0] + 1.0 / rho) < 1e-10 && libm::fabs(eig[1]) < 1e-10, "{eig:?}");
    let outward = [p[0] / rho, p[1] / rho, 0.0];
    let s = shape_operator(&e, &cyl, &u, &outward).unwrap();
    assert!(libm::fabs(s.s.trace() - 1.0 / rho) < 1e-10);

    // Randers cylinders and circle fibers.
    let m = fig2();
    for (patch, u) in [(SubmanifoldPatch::new(Cylinder { rho: 1.0 }), vec![0.3, 0.2]), (SubmanifoldPatch::new(Circle { rho: 1.0, dim: 3 }), vec![0.5])] {
        let x = patch.point_at(&u);
        let basis = patch.tangent_basis(&u).unwrap();
        let xi = normal_cone_sample(&m, &x, &basis, &[-x[0], -x[1], 0.1]).unwrap();
        let s = shape_operator(&m, &patch, &u, &xi).unwrap();
        assert!(s.symmetry_defect < 1e-8, "{}", s.symmetry_defect);
    }
}

#[test]
fn l_jacobi_basis_structure() {
    let m = fig1();
    let line = vertical_line(0.3, -0.2);
    let x0 = line.point_at(&[0.1]);
    let basis = line.tangent_basis(&[0.1]).unwrap();
    let xi = normal_cone_sample(&m, &x0, &basis, &[1.0, 0.2, 0.0]).unwrap();
    let geo = normal_geodesic(&m, &line, &[0.1], &xi, 3.0, &opts()).unwrap();
    let space = l_jacobi_basis(&m, &line, &[0.1], &geo, &opts()).unwrap();
    assert_eq!(space.dim(), 2);
    assert_eq!(space.label, SpaceLabel::Full);
    for t in [0.0, 0.8, 1.9, 3.0] {
        assert!(space.self_adjointness_defect(t) < 1e-7);
        assert!(space.velocity_overlap(t) < 1e-7);
    }
    // Second-family field starts at zero.
    assert!(max_abs(&space.field(1).value(0.0)) < 1e-15);
    // First-family tangential derivative is the shape operator.
    let s = shape_operator(&m, &line, &[0.1], &xi).unwrap();
    let jp = space.field(0).derivative(0.0);
    let g = m.g_matrix(&x0, &xi);
    let coords = finsler_core::linalg::g_coordinates(&g, &basis).unwrap();
    assert!(libm::fabs(mat_vec(&coords, &jp)[0] - s.s[(0, 0)]) < 1e-10);
}

fn variation_case(m: &FinslerMetric, patch: &SubmanifoldPatch, u0: &[f64], xi: &[f64], t1: f64) -> f64 {
    let tight = OdeOptions::with_tolerances(1e-12, 1e-14);
    let dir = vec![1.0; patch.dim()];
    let (j0, j0p) = variation_initial_data(m, patch, u0, xi, &dir).unwrap();
    let geo = normal_geodesic(m, patch, u0, xi, t1, &opts()).unwrap();
    let field = integrate_jacobi(&geo, &j0, &j0p, &opts()).unwrap();
    let times: Vec<f64> = (1..=10).map(|i| t1 * i as f64 / 10.0).collect();
    let var = jacobi_by_variation(m, patch, u0, xi, &dir, &times, VARIATION_STEP, &tight).unwrap();
    times.iter().zip(&var.values).map(|(t, v)| sup_distance(&field.value(*t), v)).fold(0.0, f64::max)
}

#[test]
fn variation_oracle_matches_integration() {
    let m = fig2();
    let circle = SubmanifoldPatch::new(Circle { rho: 1.0, dim: 3 });
    // Inward normal at (1, 0, 0) is (−1, 1/2, 0); it reaches the axis at t = 1.
    let err = variation_case(&m, &circle, &[0.0], &[-1.0, 0.5, 0.0], 1.4);
    assert!(err < 1e-5, "fig2 {err}");

    let m1 = fig1();
    let line = vertical_line(0.2, 0.1);
    let x0 = line.point_at(&[0.0]);
    let xi = normal_cone_sample(&m1, &x0, &line.tangent_basis(&[0.0]).unwrap(), &[0.3, 1.0, 0.0]).unwrap();
    let err = variation_case(&m1, &line, &[0.0], &xi, 2.0);
    assert!(err < 1e-5, "fig1 {err}");
}

#[test]
fn constant_variation_is_zero() {
    let m = fig2();
    let circle = SubmanifoldPatch::new(Circle { rho: 1.0, dim: 3 });
    let v = jacobi_by_variation(&m, &circle, &[0.0], &[-1.0, 0.5, 0.0], &[0.0], &[0.5, 1.0], 1e-4, &opts()).unwrap();
    assert!(v.values.iter().all(|c| max_abs(c) == 0.0));
}

#[test]
fn flat_translation_variation_is_constant() {
    let e = euclid(3);
    let plane = SubmanifoldPatch::affine(&[0.0; 3], &[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]);
    let v = jacobi_by_variation(&e, &plane, &[0.0, 0.0], &[0.0, 0.0, 1.0], &[0.5, 2.0], &[0.3, 1.0, 2.5], 1e-4, &opts()).unwrap();
    for c in &v.values {
        assert!(sup_distance(c, &[0.5, 2.0, 0.0]) < 1e-9);
    }
}

#[test]
fn flat_hyperplane_has_no_focal_points() {
    let e = euclid(3);
    let plane = SubmanifoldPatch::affine(&[0.0; 3], &[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]);
    let geo = normal_geodesic(&e, &plane, &[0.0, 0.0], &[0.0, 0.0, 1.0], 5.0, &opts()).unwrap();
    let space = l_jacobi_basis(&e, &plane, &[0.0, 0.0], &geo, &opts()).unwrap();
    for c in columns(&space.bundle.jprime(2.0)) {
        assert!(max_abs(&c) < 1e-12);
    }
    let rep = detect_focal_points(&space, (0.0, 5.0)).unwrap();
    assert!(rep.instants.is_empty());
    assert!(!rep.trace.is_empty());
}

#[test]
fn sphere_conjugate_point_at_pi() {
    let m = metric(HField::SphereChart, Wind::Zero(2));
    let p = [core::f64::consts::FRAC_PI_2, 0.0];
    let point = SubmanifoldPatch::point(&p);
    let geo = normal_geodesic(&m, &point, &[], &[0.0, 1.0], 4.0, &opts()).unwrap();
    let space = l_jacobi_basis(&m, &point, &[], &geo, &opts()).unwrap();
    assert_eq!(space.dim(), 1);
    let rep = detect_focal_points(&space, (0.0, 4.0)).unwrap();
    assert_eq!(rep.instants.len(), 1, "{:?}", rep.instants);
    assert!(libm::fabs(rep.instants[0].t - core::f64::consts::PI) < 1e-3);
    assert_eq!(rep.instants[0].multiplicity, 1);
}

#[test]
fn circle_focus_at_center() {
    let e = euclid(2);
    let rho = 1.5;
    let circle = SubmanifoldPatch::new(Circle { rho, dim: 2 });
    let geo = normal_geodesic(&e, &circle, &[0.0], &[-1.0, 0.0], 4.0, &opts()).unwrap();
    let space = l_jacobi_basis(&e, &circle, &[0.0], &geo, &opts()).unwrap();
    let rep = detect_focal_points(&space, (0.0, 4.0)).unwrap();
    assert_eq!(rep.instants.len(), 1);
    assert!(libm::fabs(rep.instants[0].t - rho) < 1e-6, "{:?}", rep.instants);
}

#[test]
fn even_multiplicity_focus_is_found() {
    let e = euclid(3);
    let rho = 1.0;
    let sphere_point = SubmanifoldPatch::point(&[0.0, 0.0, 0.0]);
    // A point in flat space has no conjugates; a round shell focuses doubly at its centre.
    let geo = normal_geodesic(&e, &sphere_point, &[], &[0.0, 0.0, 1.0], 2.0, &opts()).unwrap();
    let space = l_jacobi_basis(&e, &sphere_point, &[], &geo, &opts()).unwrap();
    assert!(detect_focal_points(&space, (0.0, 2.0)).unwrap().instants.is_empty());

    let shell = SubmanifoldPatch::new(Shell { rho });
    let u = [0.9, 0.4];
    let x = shell.point_at(&u);
    let inward: Vec<f64> = x.iter().map(|c| -c / rho).collect();
    let geo = normal_geodesic(&e, &shell, &u, &inward, 2.0, &opts()).unwrap();
    let space = l_jacobi_basis(&e, &shell, &u, &geo, &opts()).unwrap();
    let rep = detect_focal_points(&space, (0.0, 2.0)).unwrap();
    assert_eq!(rep.instants.len(), 1, "{:?}", rep.instants);
    assert!(libm::fabs(rep.instants[0].t - rho) < 1e-6);
    assert_eq!(rep.instants[0].multiplicity, 2);
}

struct Shell {
    rho: f64,
}

impl GenericMap for Shell {
    fn in_dim(&self) -> usize {
        2
    }
    fn out_dim(&self) -> usize {
        3
    }
    fn map<S: Scalar>(&self, u: &[S]) -> Vec<S> {
        let (st, ct) = (u[0].sin(), u[0].cos());
        vec![(st * u[1].cos()).scale(self.rho), (st * u[1].sin()).scale(self.rho), ct.scale(self.rho)]
    }
}

#[test]
fn orthogonality_of_basis_start_is_enforced() {
    let e = euclid(3);
    let plane = SubmanifoldPatch::affine(&[0.0; 3], &[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]);
    let geo = integrate_geodesic(&e, &[0.0; 3], &[0.5, 0.0, 1.0], 0.0, 1.0, &opts()).unwrap();
    assert!(l_jacobi_basis(&e, &plane, &[0.0, 0.0], &geo, &opts()).is_err());
}
