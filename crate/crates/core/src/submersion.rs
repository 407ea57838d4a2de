//! Candidate Finsler submersions `π: Rⁿ → R^k`: induced base norms,
//! horizontal lifts, basic fields and transnormality.

use alloc::sync::Arc;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::dual::{D1, D2};
use crate::error::{Error, Result};
use crate::field::{map_jacobian, map_second, MapField};
use crate::geodesic::{integrate_geodesic, is_orthogonal, GeodesicPath, SubmanifoldPatch};
use crate::linalg::{max_abs, null_space, singular_values};
use crate::metric::{FinslerMetric, TangentSample};
use crate::ode::OdeOptions;
use crate::sampling::Sampler;
use crate::spray::nonlinear_connection;

/// `dπ` is singular when `σ_min < SINGULAR_RATIO · σ_max`.
pub const SINGULAR_RATIO: f64 = 1e-8;
/// Pass threshold for transnormality residuals.
pub const TRANSNORMALITY_TOL: f64 = 1e-6;
const KKT_TOL: f64 = 1e-13;
const KKT_MAX: usize = 50;

/// The map `π`, an optional declared base metric, and an optional fiber
/// parametrization `(c, s) ↦ x` with `π(x) = c`.
#[derive(Clone)]
pub struct SubmersionSpec {
    pub pi: Arc<dyn MapField>,
    pub base_metric: Option<FinslerMetric>,
    pub fibers: Option<Arc<dyn MapField>>,
}

impl core::fmt::Debug for SubmersionSpec {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("SubmersionSpec")
            .field("total_dim", &self.pi.in_dim())
            .field("base_dim", &self.pi.out_dim())
            .field("declared_base", &self.base_metric.is_some())
            .field("fiber_dim", &self.fiber_dim())
            .finish()
    }
}

impl SubmersionSpec {
    pub fn new<T: MapField + 'static>(pi: T) -> Self {
        SubmersionSpec { pi: Arc::new(pi), base_metric: None, fibers: None }
    }

    pub fn with_base(mut self, base: FinslerMetric) -> Self {
        self.base_metric = Some(base);
        self
    }

    pub fn with_fibers<T: MapField + 'static>(mut self, fibers: T) -> Self {
        self.fibers = Some(Arc::new(fibers));
        self
    }

    pub fn with_fibers_arc(mut self, fibers: Arc<dyn MapField>) -> Self {
        self.fibers = Some(fibers);
        self
    }

    pub fn total_dim(&self) -> usize {
        self.pi.in_dim()
    }

    pub fn base_dim(&self) -> usize {
        self.pi.out_dim()
    }

    pub fn fiber_dim(&self) -> usize {
        self.fibers.as_ref().map(|f| f.in_dim() - self.base_dim()).unwrap_or(self.total_dim() - self.base_dim())
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.pi.map_f64(x)
    }

    /// `dπ_x` (k × n).
    pub fn dpi(&self, x: &[f64]) -> DMatrix<f64> {
        map_jacobian(&*self.pi, x)
    }

    /// `σ_min(dπ)/σ_max(dπ)`.
    pub fn regularity(&self, x: &[f64]) -> f64 {
        let s = singular_values(&self.dpi(x));
        match (s.first(), s.last()) {
            (Some(&hi), Some(&lo)) if hi > 0.0 && s.len() == self.base_dim() => lo / hi,
            _ => 0.0,
        }
    }

    pub fn is_regular(&self, x: &[f64]) -> bool {
        self.regularity(x) >= SINGULAR_RATIO
    }

    /// Euclidean-orthonormal basis of `ker dπ_x`.
    pub fn vertical_basis(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.total_dim();
        crate::linalg::from_columns(n, &null_space(&self.dpi(x), 1e-10))
    }

    /// The fiber through `π⁻¹(c)` as a patch in the fiber parameters.
    pub fn fiber_patch(&self, c: &[f64]) -> Result<SubmanifoldPatch> {
        let f = self.fibers.clone().ok_or(Error::InvalidInput("scenario has no fiber parametrization"))?;
        if c.len() != self.base_dim() {
            return Err(Error::DimensionMismatch { expected: self.base_dim(), found: c.len() });
        }
        Ok(SubmanifoldPatch::new(FixedBase { inner: f, c: c.to_vec() }))
    }
}

/// `s ↦ fibers(c, s)` for fixed `c`.
struct FixedBase {
    inner: Arc<dyn MapField>,
    c: Vec<f64>,
}

impl FixedBase {
    fn join<T: Copy>(&self, s: &[T], lift: impl Fn(f64) -> T) -> Vec<T> {
        self.c.iter().map(|&c| lift(c)).chain(s.iter().copied()).collect()
    }
}

impl MapField for FixedBase {
    fn in_dim(&self) -> usize {
        self.inner.in_dim() - self.c.len()
    }
    fn out_dim(&self) -> usize {
        self.inner.out_dim()
    }
    fn map_f64(&self, s: &[f64]) -> Vec<f64> {
        self.inner.map_f64(&self.join(s, |c| c))
    }
    fn map_d1(&self, s: &[D1]) -> Vec<D1> {
        self.inner.map_d1(&self.join(s, D1::constant))
    }
    fn map_d2(&self, s: &[D2]) -> Vec<D2> {
        self.inner.map_d2(&self.join(s, |c| D2::constant(D1::constant(c))))
    }
}

/// The minimal lift of a base vector.
#[derive(Clone, Debug)]
pub struct HorizontalLift {
    pub at: Vec<f64>,
    pub base_vector: Vec<f64>,
    pub lift: Vec<f64>,
    /// Lagrange multipliers: `∂(F²/2)/∂v = dπᵀ λ`.
    pub multipliers: Vec<f64>,
    /// `F(lift)`, the induced base norm of `base_vector`.
    pub norm: f64,
}

fn kkt_residual(metric: &FinslerMetric, d: &DMatrix<f64>, x: &[f64], w: &[f64], v: &[f64], lam: &[f64]) -> DVector<f64> {
    let n = v.len();
    let k = w.len();
    let leg = metric.legendre(x, v);
    let dtl = d.transpose() * DVector::from_column_slice(lam);
    let dv = d * DVector::from_column_slice(v);
    let mut r = DVector::zeros(n + k);
    for i in 0..n {
        r[i] = leg[i] - dtl[i];
    }
    for i in 0..k {
        r[n + i] = dv[i] - w[i];
    }
    r
}

fn kkt_matrix(metric: &FinslerMetric, d: &DMatrix<f64>, x: &[f64], v: &[f64]) -> DMatrix<f64> {
    let n = v.len();
    let k = d.nrows();
    let g = metric.g_matrix(x, v);
    let mut a = DMatrix::zeros(n + k, n + k);
    a.view_mut((0, 0), (n, n)).copy_from(&g);
    a.view_mut((0, n), (n, k)).copy_from(&(-d.transpose()));
    a.view_mut((n, 0), (k, n)).copy_from(d);
    a
}

/// Minimizes `F(x, v)` over `dπ_x v = w` by Newton on the KKT system,
/// starting from `v = dπ⁺ w` (or from `seed` when given).
pub fn horizontal_lift_seeded(
    metric: &FinslerMetric,
    spec: &SubmersionSpec,
    x: &[f64],
    w: &[f64],
    seed: Option<&[f64]>,
) -> Result<HorizontalLift> {
    let n = spec.total_dim();
    let k = spec.base_dim();
    if w.len() != k || x.len() != n {
        return Err(Error::DimensionMismatch { expected: k, found: w.len() });
    }
    if w.iter().all(|c| *c == 0.0) {
        return Err(Error::InvalidInput("base vector is zero"));
    }
    let ratio = spec.regularity(x);
    if ratio < SINGULAR_RATIO {
        return Err(Error::RankDeficient { ratio });
    }
    let d = spec.dpi(x);
    let mut v: Vec<f64> = match seed {
        Some(s) => s.to_vec(),
        None => {
            let ddt = &d * d.transpose();
            let y = ddt.lu().solve(&DVector::from_column_slice(w)).ok_or(Error::RankDeficient { ratio })?;
            (d.transpose() * y).iter().copied().collect()
        }
    };
    metric.cone_guard(x, &v)?;
    // Least-squares multipliers for the starting point.
    let leg = DVector::from_column_slice(&metric.legendre(x, &v));
    let mut lam: Vec<f64> = (&d * d.transpose())
        .lu()
        .solve(&(&d * leg))
        .ok_or(Error::RankDeficient { ratio })?
        .iter()
        .copied()
        .collect();
    let scale = 1.0 + max_abs(w);
    let mut r = kkt_residual(metric, &d, x, w, &v, &lam);
    let mut res = r.amax();
    for it in 0..KKT_MAX {
        if res < KKT_TOL * scale {
            break;
        }
        let a = kkt_matrix(metric, &d, x, &v);
        let step = a.lu().solve(&r).ok_or(Error::SingularTensor { condition: f64::INFINITY })?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let vt: Vec<f64> = (0..n).map(|i| v[i] - t * step[i]).collect();
            let lt: Vec<f64> = (0..k).map(|i| lam[i] - t * step[n + i]).collect();
            if metric.cone_guard(x, &vt).is_ok() {
                let rt = kkt_residual(metric, &d, x, w, &vt, &lt);
                let nt = rt.amax();
                if nt.is_finite() && nt < res {
                    v = vt;
                    lam = lt;
                    r = rt;
                    res = nt;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            if res < 1e3 * KKT_TOL * scale {
                break;
            }
            return Err(Error::NoConvergence { what: "horizontal lift", iterations: it + 1, residual: res });
        }
    }
    if !(res < 1e3 * KKT_TOL * scale) {
        return Err(Error::NoConvergence { what: "horizontal lift", iterations: KKT_MAX, residual: res });
    }
    let norm = metric.norm(x, &v);
    Ok(HorizontalLift { at: x.to_vec(), base_vector: w.to_vec(), lift: v, multipliers: lam, norm })
}

pub fn horizontal_lift_vector(metric: &FinslerMetric, spec: &SubmersionSpec, x: &[f64], w: &[f64]) -> Result<HorizontalLift> {
    horizontal_lift_seeded(metric, spec, x, w, None)
}

/// `min { F(x, v) : dπ_x v = w }`.
pub fn induced_base_norm(metric: &FinslerMetric, spec: &SubmersionSpec, x: &[f64], w: &[f64]) -> Result<f64> {
    Ok(horizontal_lift_vector(metric, spec, x, w)?.norm)
}

/// Derivative of the lift of a fixed `w` as the base point moves with
/// velocity `xdot`, by implicit differentiation of the KKT system.
pub fn horizontal_lift_derivative(
    metric: &FinslerMetric,
    spec: &SubmersionSpec,
    lift: &HorizontalLift,
    xdot: &[f64],
) -> Result<Vec<f64>> {
    let n = spec.total_dim();
    let k = spec.base_dim();
    let x = &lift.at;
    let v = &lift.lift;
    let d = spec.dpi(x);
    // dD[i][j] = ∂²π^i/∂x^j∂x^l · ẋ^l
    let mut dd = DMatrix::zeros(k, n);
    for j in 0..n {
        let col = map_second(&*spec.pi, x, &crate::metric::unit(n, j), xdot);
        for i in 0..k {
            dd[(i, j)] = col[i];
        }
    }
    let leg_x = metric.legendre_x_derivative(x, v, xdot);
    let ddt_l = dd.transpose() * DVector::from_column_slice(&lift.multipliers);
    let ddv = &dd * DVector::from_column_slice(v);
    let mut rhs = DVector::zeros(n + k);
    for i in 0..n {
        rhs[i] = -(leg_x[i] - ddt_l[i]);
    }
    for i in 0..k {
        rhs[n + i] = -ddv[i];
    }
    let a = kkt_matrix(metric, &d, x, v);
    let sol = a.lu().solve(&rhs).ok_or(Error::SingularTensor { condition: f64::INFINITY })?;
    Ok(sol.rows(0, n).iter().copied().collect())
}

/// Aggregate of the unit-ball submersion check.
#[derive(Clone, Debug)]
pub struct SubmersionReport {
    pub samples: usize,
    pub max_defect: f64,
    /// `(x, w, defect)` of the worst sample.
    pub worst: Option<(Vec<f64>, Vec<f64>, f64)>,
}

impl SubmersionReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.samples > 0 && self.max_defect < tol
    }
}

/// Samples base points `c` in `base_box` and fiber parameters in
/// `fiber_box`, and compares the induced norm of random base directions at
/// `fibers(c, s)` with the declared base metric at `c`, or, without one,
/// with the induced norm at `fibers(c, s_ref)` (the box centre).
pub fn check_submersion(
    metric: &FinslerMetric,
    spec: &SubmersionSpec,
    base_box: (&[f64], &[f64]),
    fiber_box: (&[f64], &[f64]),
    n_samples: usize,
    seed: u64,
) -> Result<SubmersionReport> {
    let mut rng = Sampler::new(seed);
    let k = spec.base_dim();
    let s_ref: Vec<f64> = fiber_box.0.iter().zip(fiber_box.1).map(|(a, b)| 0.5 * (a + b)).collect();
    let mut report = SubmersionReport { samples: 0, max_defect: 0.0, worst: None };
    for _ in 0..n_samples {
        let c = rng.in_box(base_box.0, base_box.1);
        let s = rng.in_box(fiber_box.0, fiber_box.1);
        let w = rng.direction(k);
        let patch = spec.fiber_patch(&c)?;
        let x = patch.point_at(&s);
        let here = induced_base_norm(metric, spec, &x, &w)?;
        let there = match &spec.base_metric {
            Some(b) => b.norm(&c, &w),
            None => induced_base_norm(metric, spec, &patch.point_at(&s_ref), &w)?,
        };
        let defect = libm::fabs(here - there);
        report.samples += 1;
        if defect > report.max_defect || report.worst.is_none() {
            report.max_defect = report.max_defect.max(defect);
            report.worst = Some((x, w, defect));
        }
    }
    Ok(report)
}

/// Horizontal lift of a base geodesic and how closely it projects back.
#[derive(Clone, Debug)]
pub struct LiftedGeodesic {
    pub path: GeodesicPath,
    pub base: GeodesicPath,
    /// `max_t |π(γ(t)) − c(t)|` over the sample times.
    pub tracking_defect: f64,
}

/// Integrates the base geodesic from `(π(p), w)` with the declared base
/// metric, and the total-space geodesic from the horizontal lift of `w` at
/// `p`, over `[0, t1]`.
pub fn horizontal_lift_geodesic(
    metric: &FinslerMetric,
    spec: &SubmersionSpec,
    p: &[f64],
    w: &[f64],
    t1: f64,
    samples: usize,
    opts: &OdeOptions,
) -> Result<LiftedGeodesic> {
    let base_metric = spec.base_metric.as_ref().ok_or(Error::InvalidInput("no declared base metric"))?;
    let c0 = spec.project(p);
    let base = integrate_geodesic(base_metric, &c0, w, 0.0, t1, opts)?;
    let lift = horizontal_lift_vector(metric, spec, p, w)?;
    let path = integrate_geodesic(metric, p, &lift.lift, 0.0, t1, opts)?;
    let mut tracking_defect = 0.0f64;
    for i in 0..=samples.max(1) {
        let t = t1 * i as f64 / samples.max(1) as f64;
        let proj = spec.project(&path.position(t));
        tracking_defect = tracking_defect.max(crate::geodesic::sup_distance(&proj, &base.position(t)));
    }
    Ok(LiftedGeodesic { path, base, tracking_defect })
}

#[derive(Clone, Debug)]
pub struct TransnormalityReport {
    /// `(t, residual)` at regular sample instants.
    pub residuals: Vec<(f64, f64)>,
    /// Instants skipped because `dπ` was singular there.
    pub skipped: Vec<f64>,
    pub max_residual: f64,
}

impl TransnormalityReport {
    pub fn passed(&self) -> bool {
        !self.residuals.is_empty() && self.max_residual < TRANSNORMALITY_TOL
    }
}

/// Orthogonality residual of `γ̇(t)` to `ker dπ_{γ(t)}` at `samples + 1`
/// equally spaced instants, skipping singular points.
pub fn check_transnormality(
    metric: &FinslerMetric,
    spec: &SubmersionSpec,
    geo: &GeodesicPath,
    samples: usize,
) -> Result<TransnormalityReport> {
    let (a, b) = geo.t_span();
    let times: Vec<f64> = (0..=samples.max(1)).map(|i| a + (b - a) * i as f64 / samples.max(1) as f64).collect();
    transnormality_at(metric, spec, geo, &times)
}

pub fn transnormality_at(
    metric: &FinslerMetric,
    spec: &SubmersionSpec,
    geo: &GeodesicPath,
    times: &[f64],
) -> Result<TransnormalityReport> {
    let mut rep = TransnormalityReport { residuals: Vec::new(), skipped: Vec::new(), max_residual: 0.0 };
    for &t in times {
        let (x, v) = geo.state(t);
        if !spec.is_regular(&x) {
            rep.skipped.push(t);
            continue;
        }
        let kernel = spec.vertical_basis(&x);
        let r = if kernel.ncols() == 0 {
            0.0
        } else {
            is_orthogonal(metric, &TangentSample { x, v }, &kernel)?.residual
        };
        rep.max_residual = rep.max_residual.max(r);
        rep.residuals.push((t, r));
    }
    Ok(rep)
}

/// The basic field along a fiber through a unit orthogonal `xi`.
#[derive(Clone, Debug)]
pub struct BasicFieldReport {
    /// `(s, x(s), ξ(s))` at the sampled fiber parameters.
    pub samples: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)>,
    /// `max |F(ξ(s)) − F(ξ(s₀))|`.
    pub constancy_defect: f64,
}

/// Lifts `dπ(ξ)` horizontally at each fiber sample.
pub fn basic_field_along_fiber(
    metric: &FinslerMetric,
    spec: &SubmersionSpec,
    fiber: &SubmanifoldPatch,
    s0: &[f64],
    xi: &[f64],
    params: &[Vec<f64>],
) -> Result<BasicFieldReport> {
    let x0 = fiber.point_at(s0);
    let f0 = metric.cone_guard(&x0, xi)?;
    let w = crate::linalg::mat_vec(&spec.dpi(&x0), xi);
    let mut samples = Vec::with_capacity(params.len());
    let mut defect = 0.0f64;
    for s in params {
        let x = fiber.point_at(s);
        let lift = horizontal_lift_vector(metric, spec, &x, &w)?;
        defect = defect.max(libm::fabs(lift.norm - f0));
        samples.push((s.clone(), x, lift.lift));
    }
    Ok(BasicFieldReport { samples, constancy_defect: defect })
}

/// Basic unit normal over a fiber: the horizontal lift of a fixed base
/// vector `w` at each fiber point.
#[derive(Clone, Debug)]
pub struct BasicNormal {
    pub metric: FinslerMetric,
    pub spec: SubmersionSpec,
    pub fiber: SubmanifoldPatch,
    pub w: Vec<f64>,
}

impl BasicNormal {
    /// The basic field through `xi` at `fiber(s0)`.
    pub fn through(metric: &FinslerMetric, spec: &SubmersionSpec, fiber: &SubmanifoldPatch, s0: &[f64], xi: &[f64]) -> Self {
        let x0 = fiber.point_at(s0);
        let w = crate::linalg::mat_vec(&spec.dpi(&x0), xi);
        BasicNormal { metric: metric.clone(), spec: spec.clone(), fiber: fiber.clone(), w }
    }

    pub fn lift_at(&self, s: &[f64]) -> Result<HorizontalLift> {
        horizontal_lift_vector(&self.metric, &self.spec, &self.fiber.point_at(s), &self.w)
    }

    /// `∇^ξ_{x_a} ξ = ∂ξ/∂s_a + N(ξ) x_a`.
    pub fn covariant_derivative(&self, s: &[f64], a: usize) -> Result<Vec<f64>> {
        let lift = self.lift_at(s)?;
        let basis = self.fiber.tangent_basis(s)?;
        let xa: Vec<f64> = basis.column(a).iter().copied().collect();
        let dxi = horizontal_lift_derivative(&self.metric, &self.spec, &lift, &xa)?;
        let nl = nonlinear_connection(&self.metric, &lift.at, &lift.lift);
        let corr = crate::linalg::mat_vec(&nl, &xa);
        Ok(dxi.iter().zip(&corr).map(|(p, q)| p + q).collect())
    }

    /// Holonomy (vertical) Jacobi initial data: `J(0) = x_a`,
    /// `J′(0) = ∇_{x_a} ξ` for every fiber direction.
    pub fn holonomy_initial_data(&self, s: &[f64]) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let basis = self.fiber.tangent_basis(s)?;
        let mut j0 = Vec::new();
        let mut j0p = Vec::new();
        for a in 0..basis.ncols() {
            j0.push(basis.column(a).iter().copied().collect());
            j0p.push(self.covariant_derivative(s, a)?);
        }
        Ok((j0, j0p))
    }
}

impl crate::geodesic::NormalField for BasicNormal {
    fn normal(&self, u: &[f64]) -> Result<Vec<f64>> {
        Ok(self.lift_at(u)?.lift)
    }
}
