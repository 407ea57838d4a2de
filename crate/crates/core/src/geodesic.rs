//! Geodesics, covariant derivatives along curves, submanifold patches,
//! orthogonality and the endpoint map.

use alloc::sync::Arc;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::dual::Scalar;
use crate::error::{Error, Result};
use crate::field::{map_jacobian, map_second, GenericMap, MapField};
use crate::linalg::{max_abs, null_space, numerical_rank};
use crate::metric::{bilinear, FinslerMetric, TangentSample};
use crate::ode::{integrate, DenseSolution, OdeOptions};
use crate::spray::{christoffel_unchecked, spray};

/// Relative orthogonality tolerance of [`is_orthogonal`].
pub const ORTHOGONALITY_TOL: f64 = 1e-8;
/// Iteration cap of the normal-cone Newton solves.
pub const NORMAL_NEWTON_MAX: usize = 50;
const NEWTON_TOL: f64 = 1e-13;

/// A geodesic with dense output over `[t0, t1]` (possibly `t1 < t0`).
#[derive(Clone)]
pub struct GeodesicPath {
    metric: FinslerMetric,
    sol: DenseSolution,
    t0: f64,
    speed: f64,
    speed_drift: f64,
}

impl core::fmt::Debug for GeodesicPath {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("GeodesicPath")
            .field("t_span", &self.t_span())
            .field("speed", &self.speed)
            .field("speed_drift", &self.speed_drift)
            .finish()
    }
}

impl GeodesicPath {
    pub fn metric(&self) -> &FinslerMetric {
        &self.metric
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    pub fn t_span(&self) -> (f64, f64) {
        (self.t0, self.sol.t_end())
    }

    /// `F(γ̇)` at the start.
    pub fn speed(&self) -> f64 {
        self.speed
    }

    /// Largest `|F(γ̇(t)) − speed|` over mesh points and step midpoints.
    pub fn speed_drift(&self) -> f64 {
        self.speed_drift
    }

    /// `(x(t), γ̇(t))`.
    pub fn state(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let n = self.dim();
        let y = self.sol.eval(t);
        (y[..n].to_vec(), y[n..].to_vec())
    }

    pub fn position(&self, t: f64) -> Vec<f64> {
        self.state(t).0
    }

    pub fn velocity(&self, t: f64) -> Vec<f64> {
        self.state(t).1
    }

    /// `γ̈(t) = −2G(γ, γ̇)`.
    pub fn acceleration(&self, t: f64) -> Vec<f64> {
        let (x, v) = self.state(t);
        spray(&self.metric, &x, &v).into_iter().map(|c| -2.0 * c).collect()
    }

    /// Integrator mesh, both ends included.
    pub fn nodes(&self) -> Vec<f64> {
        self.sol.nodes()
    }

    pub fn start(&self) -> TangentSample {
        let (x, v) = self.state(self.t0);
        TangentSample { x, v }
    }
}

pub(crate) fn geodesic_rhs(m: &FinslerMetric, y: &[f64], dy: &mut [f64]) -> Result<()> {
    let n = m.dim();
    let g = spray(m, &y[..n], &y[n..2 * n]);
    dy[..n].copy_from_slice(&y[n..2 * n]);
    for i in 0..n {
        dy[n + i] = -2.0 * g[i];
    }
    Ok(())
}

/// Integrates `ẍ = −2G(x, ẋ)` from `(x0, v0)` at `t0` to `t1`.
pub fn integrate_geodesic(
    metric: &FinslerMetric,
    x0: &[f64],
    v0: &[f64],
    t0: f64,
    t1: f64,
    opts: &OdeOptions,
) -> Result<GeodesicPath> {
    let n = metric.dim();
    if x0.len() != n || v0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: x0.len().min(v0.len()) });
    }
    let speed = metric.cone_guard(x0, v0)?;
    let mut y0 = x0.to_vec();
    y0.extend_from_slice(v0);
    let sol = integrate(|_, y, dy| geodesic_rhs(metric, y, dy), t0, &y0, t1, opts)?;
    let mut path = GeodesicPath { metric: metric.clone(), sol, t0, speed, speed_drift: 0.0 };
    path.speed_drift = measure_drift(&path);
    Ok(path)
}

fn measure_drift(path: &GeodesicPath) -> f64 {
    let nodes = path.nodes();
    let mut drift = 0.0f64;
    let mut probe = |t: f64| {
        let (x, v) = path.state(t);
        drift = drift.max(libm::fabs(path.metric.norm(&x, &v) - path.speed));
    };
    for w in nodes.windows(2) {
        probe(w[0]);
        probe(0.5 * (w[0] + w[1]));
    }
    if let Some(t) = nodes.last() {
        probe(*t);
    }
    drift
}

/// A vector-valued function of `t` with its derivative.
pub trait CurveField {
    fn value(&self, t: f64) -> Vec<f64>;
    fn derivative(&self, t: f64) -> Vec<f64>;
}

/// A [`CurveField`] from two closures.
pub struct FnField<A, B> {
    pub value: A,
    pub derivative: B,
}

impl<A, B> CurveField for FnField<A, B>
where
    A: Fn(f64) -> Vec<f64>,
    B: Fn(f64) -> Vec<f64>,
{
    fn value(&self, t: f64) -> Vec<f64> {
        (self.value)(t)
    }
    fn derivative(&self, t: f64) -> Vec<f64> {
        (self.derivative)(t)
    }
}

/// The geodesic itself as a curve: value `γ`, derivative `γ̇`.
pub struct Trace<'a>(pub &'a GeodesicPath);

impl CurveField for Trace<'_> {
    fn value(&self, t: f64) -> Vec<f64> {
        self.0.position(t)
    }
    fn derivative(&self, t: f64) -> Vec<f64> {
        self.0.velocity(t)
    }
}

/// The velocity field `γ̇` of a geodesic, derivative `γ̈`.
pub struct Velocity<'a>(pub &'a GeodesicPath);

impl CurveField for Velocity<'_> {
    fn value(&self, t: f64) -> Vec<f64> {
        self.0.velocity(t)
    }
    fn derivative(&self, t: f64) -> Vec<f64> {
        self.0.acceleration(t)
    }
}

/// `(D^W_γ̇ X)^k = Ẋ^k + X^i γ̇^j Γ^k_ij(W)` at `t`.
pub fn covariant_derivative_along(
    metric: &FinslerMetric,
    curve: &dyn CurveField,
    reference: &dyn CurveField,
    field: &dyn CurveField,
    t: f64,
) -> Result<Vec<f64>> {
    let x = curve.value(t);
    let w = reference.value(t);
    metric.cone_guard(&x, &w)?;
    let gamma = christoffel_unchecked(metric, &x, &w);
    let corr = gamma.contract(&field.value(t), &curve.derivative(t));
    Ok(field.derivative(t).iter().zip(&corr).map(|(a, b)| a + b).collect())
}

/// Residual of almost-g-compatibility along a curve:
/// `d/dt g_W(X, Y) − g_W(DX, Y) − g_W(X, DY) − 2C_W(DW, X, Y)`.
pub fn almost_compatibility_defect(
    metric: &FinslerMetric,
    curve: &dyn CurveField,
    reference: &dyn CurveField,
    x_field: &dyn CurveField,
    y_field: &dyn CurveField,
    t: f64,
) -> Result<f64> {
    let p = curve.value(t);
    let pdot = curve.derivative(t);
    let w = reference.value(t);
    let wdot = reference.derivative(t);
    let (xv, xd) = (x_field.value(t), x_field.derivative(t));
    let (yv, yd) = (y_field.value(t), y_field.derivative(t));
    let g = metric.g_matrix(&p, &w);
    let gdot = metric.g_rate(&p, &w, &pdot, &wdot);
    let lhs = bilinear(&g, &xd, &yv) + bilinear(&gdot, &xv, &yv) + bilinear(&g, &xv, &yd);
    let dx = covariant_derivative_along(metric, curve, reference, x_field, t)?;
    let dy = covariant_derivative_along(metric, curve, reference, y_field, t)?;
    let dw = covariant_derivative_along(metric, curve, reference, reference, t)?;
    let c = metric.cartan_tensor(&TangentSample::new(&p, &w))?;
    let rhs = bilinear(&g, &dx, &yv) + bilinear(&g, &xv, &dy) + 2.0 * c.apply(&dw, &xv, &yv);
    Ok(libm::fabs(lhs - rhs))
}

/// A parametrized `k`-dimensional submanifold of the chart.
#[derive(Clone)]
pub struct SubmanifoldPatch {
    param: Arc<dyn MapField>,
}

impl core::fmt::Debug for SubmanifoldPatch {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "SubmanifoldPatch({} -> {})", self.param.in_dim(), self.param.out_dim())
    }
}

impl SubmanifoldPatch {
    pub fn new<T: MapField + 'static>(param: T) -> Self {
        SubmanifoldPatch { param: Arc::new(param) }
    }

    pub fn from_arc(param: Arc<dyn MapField>) -> Self {
        SubmanifoldPatch { param }
    }

    /// A single point (`k = 0`).
    pub fn point(p: &[f64]) -> Self {
        Self::new(Affine { origin: p.to_vec(), directions: Vec::new() })
    }

    /// `origin + Σ u_a d_a`.
    pub fn affine(origin: &[f64], directions: &[Vec<f64>]) -> Self {
        Self::new(Affine { origin: origin.to_vec(), directions: directions.to_vec() })
    }

    pub fn dim(&self) -> usize {
        self.param.in_dim()
    }

    pub fn ambient_dim(&self) -> usize {
        self.param.out_dim()
    }

    pub fn map(&self) -> &dyn MapField {
        &*self.param
    }

    pub fn point_at(&self, u: &[f64]) -> Vec<f64> {
        self.param.map_f64(u)
    }

    /// Columns `∂x/∂u_a`, checked for full rank.
    pub fn tangent_basis(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        let jac = map_jacobian(&*self.param, u);
        let k = self.dim();
        if k > 0 && numerical_rank(&jac, 1e-10, None) < k {
            let s = crate::linalg::singular_values(&jac);
            let ratio = s.last().copied().unwrap_or(0.0) / s[0].max(f64::MIN_POSITIVE);
            return Err(Error::RankDeficient { ratio });
        }
        Ok(jac)
    }

    /// `∂²x/∂u_a∂u_b`.
    pub fn second(&self, u: &[f64], a: usize, b: usize) -> Vec<f64> {
        let k = self.dim();
        let ea = crate::metric::unit(k, a);
        let eb = crate::metric::unit(k, b);
        map_second(&*self.param, u, &ea, &eb)
    }
}

struct Affine {
    origin: Vec<f64>,
    directions: Vec<Vec<f64>>,
}

impl GenericMap for Affine {
    fn in_dim(&self) -> usize {
        self.directions.len()
    }
    fn out_dim(&self) -> usize {
        self.origin.len()
    }
    fn map<S: Scalar>(&self, u: &[S]) -> Vec<S> {
        let mut x: Vec<S> = self.origin.iter().map(|&c| S::cst(c)).collect();
        for (ua, d) in u.iter().zip(&self.directions) {
            for (xi, di) in x.iter_mut().zip(d) {
                *xi += ua.scale(*di);
            }
        }
        x
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Orthogonality {
    pub orthogonal: bool,
    pub residual: f64,
}

/// `max_u |g_v(v, u)| / (F(v) |u|_g)` against the `1e-8` tolerance.
pub fn is_orthogonal(metric: &FinslerMetric, s: &TangentSample, basis: &DMatrix<f64>) -> Result<Orthogonality> {
    let f = metric.cone_guard(&s.x, &s.v)?;
    let g = metric.g_matrix(&s.x, &s.v);
    let mut residual = 0.0f64;
    for col in crate::linalg::columns(basis) {
        let un = libm::sqrt(bilinear(&g, &col, &col));
        if un == 0.0 {
            continue;
        }
        residual = residual.max(libm::fabs(bilinear(&g, &s.v, &col)) / (f * un));
    }
    Ok(Orthogonality { orthogonal: residual < ORTHOGONALITY_TOL, residual })
}

/// Residual `[g_v(v, u_i); F(v) − 1]` and its v-Jacobian.
fn cone_system(metric: &FinslerMetric, x: &[f64], v: &[f64], basis: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = metric.dim();
    let k = basis.ncols();
    let g = metric.g_matrix(x, v);
    let f = metric.norm(x, v);
    let gv = &g * DVector::from_column_slice(v);
    let mut r = DVector::zeros(k + 1);
    let mut jac = DMatrix::zeros(k + 1, n);
    for i in 0..k {
        let u = basis.column(i);
        r[i] = gv.dot(&u);
        let gu = &g * u;
        for j in 0..n {
            jac[(i, j)] = gu[j];
        }
    }
    r[k] = f - 1.0;
    for j in 0..n {
        jac[(k, j)] = gv[j] / f;
    }
    (r, jac)
}

/// Damped Newton iteration shared by the normal solvers: `step` maps the
/// current iterate to a correction and residual norm.
fn damped_newton<S>(metric: &FinslerMetric, x: &[f64], seed: &[f64], what: &'static str, mut step: S) -> Result<Vec<f64>>
where
    S: FnMut(&[f64]) -> Option<(f64, DVector<f64>)>,
{
    let mut v = seed.to_vec();
    let (mut res, mut dv) = step(&v).ok_or(Error::NoConvergence { what, iterations: 0, residual: f64::NAN })?;
    for it in 0..NORMAL_NEWTON_MAX {
        if res < NEWTON_TOL {
            return Ok(v);
        }
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = v.iter().zip(dv.iter()).map(|(a, d)| a - lambda * d).collect();
            if metric.cone_guard(x, &trial).is_ok() {
                if let Some((r2, d2)) = step(&trial) {
                    if r2.is_finite() && r2 < res {
                        v = trial;
                        res = r2;
                        dv = d2;
                        accepted = true;
                        break;
                    }
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(Error::NoConvergence { what, iterations: it + 1, residual: res });
        }
    }
    if res < NEWTON_TOL {
        Ok(v)
    } else {
        Err(Error::NoConvergence { what, iterations: NORMAL_NEWTON_MAX, residual: res })
    }
}

/// A unit (`F = 1`) vector at `x` orthogonal to the columns of `basis`,
/// found by minimum-norm Newton iteration from `seed`.
pub fn normal_cone_sample(metric: &FinslerMetric, x: &[f64], basis: &DMatrix<f64>, seed: &[f64]) -> Result<Vec<f64>> {
    let n = metric.dim();
    if basis.nrows() != n || seed.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: seed.len() });
    }
    if basis.ncols() > 0 && numerical_rank(basis, 1e-10, None) < basis.ncols() {
        return Err(Error::RankDeficient { ratio: 0.0 });
    }
    metric.cone_guard(x, seed)?;
    damped_newton(metric, x, seed, "normal cone Newton", |v| {
        let (r, jac) = cone_system(metric, x, v, basis);
        let jjt = &jac * jac.transpose();
        let y = jjt.lu().solve(&r)?;
        Some((r.amax(), jac.transpose() * y))
    })
}

/// Continuation data for a smooth unit normal field along a patch.
///
/// For `k < n − 1` the orthogonal unit vectors at a point form a cone of
/// positive dimension, so the field is pinned by the gauge
/// `Kᵀ(N − ξ) = 0`, with `K` spanning the kernel of the cone system at the
/// anchor normal `ξ`.
#[derive(Clone, Debug)]
pub struct NormalGauge {
    pub anchor: Vec<f64>,
    pub kernel: DMatrix<f64>,
}

impl NormalGauge {
    pub fn at(metric: &FinslerMetric, x: &[f64], basis: &DMatrix<f64>, xi: &[f64]) -> Self {
        let n = metric.dim();
        let (_, jac) = cone_system(metric, x, xi, basis);
        let ker = null_space(&jac, 1e-8);
        let kernel = crate::linalg::from_columns(n, &ker);
        NormalGauge { anchor: xi.to_vec(), kernel }
    }

    fn square_system(&self, metric: &FinslerMetric, x: &[f64], v: &[f64], basis: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let n = metric.dim();
        let (r, jac) = cone_system(metric, x, v, basis);
        let m = self.kernel.ncols();
        let rows = r.len() + m;
        let mut rr = DVector::zeros(rows);
        let mut jj = DMatrix::zeros(rows, n);
        rr.rows_mut(0, r.len()).copy_from(&r);
        jj.view_mut((0, 0), (r.len(), n)).copy_from(&jac);
        for a in 0..m {
            let kc = self.kernel.column(a);
            let mut s = 0.0;
            for j in 0..n {
                s += kc[j] * (v[j] - self.anchor[j]);
                jj[(r.len() + a, j)] = kc[j];
            }
            rr[r.len() + a] = s;
        }
        (rr, jj)
    }
}

/// Unit normal field along a patch continuing a given normal.
#[derive(Clone, Debug)]
pub struct ContinuedNormal {
    pub metric: FinslerMetric,
    pub patch: SubmanifoldPatch,
    pub gauge: NormalGauge,
}

impl ContinuedNormal {
    /// Anchors the field at parameter `u0` with normal `xi` (normalized to `F = 1`).
    pub fn new(metric: &FinslerMetric, patch: &SubmanifoldPatch, u0: &[f64], xi: &[f64]) -> Result<Self> {
        let x0 = patch.point_at(u0);
        let basis = patch.tangent_basis(u0)?;
        let f = metric.cone_guard(&x0, xi)?;
        let xi: Vec<f64> = xi.iter().map(|c| c / f).collect();
        let ortho = is_orthogonal(metric, &TangentSample::new(&x0, &xi), &basis)?;
        if !ortho.orthogonal {
            return Err(Error::InvalidInput("anchor vector is not orthogonal to the patch"));
        }
        let gauge = NormalGauge::at(metric, &x0, &basis, &xi);
        Ok(ContinuedNormal { metric: metric.clone(), patch: patch.clone(), gauge })
    }

    pub fn anchor(&self) -> &[f64] {
        &self.gauge.anchor
    }

    /// `N(u)` by Newton on the gauge-fixed square system, seeded at the anchor.
    pub fn at(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.at_seeded(u, &self.gauge.anchor.clone())
    }

    pub fn at_seeded(&self, u: &[f64], seed: &[f64]) -> Result<Vec<f64>> {
        let x = self.patch.point_at(u);
        let basis = self.patch.tangent_basis(u)?;
        damped_newton(&self.metric, &x, seed, "normal continuation", |v| {
            let (r, jac) = self.gauge.square_system(&self.metric, &x, v, &basis);
            let step = jac.lu().solve(&r)?;
            Some((r.amax(), step))
        })
    }

    /// `∂N/∂u_a` at `u` by implicit differentiation of the gauge-fixed system.
    pub fn derivative(&self, u: &[f64], a: usize) -> Result<Vec<f64>> {
        let m = &self.metric;
        let x = self.patch.point_at(u);
        let basis = self.patch.tangent_basis(u)?;
        let v = self.at(u)?;
        let k = basis.ncols();
        let xa: Vec<f64> = basis.column(a).iter().copied().collect();
        let (r, jac) = self.gauge.square_system(m, &x, &v, &basis);
        let leg = m.legendre(&x, &v);
        let leg_x = m.legendre_x_derivative(&x, &v, &xa);
        let mut ds = DVector::zeros(r.len());
        for i in 0..k {
            let ui: Vec<f64> = basis.column(i).iter().copied().collect();
            let uia = self.patch.second(u, i, a);
            ds[i] = crate::linalg::dot(&leg_x, &ui) + crate::linalg::dot(&leg, &uia);
        }
        ds[k] = crate::linalg::dot(&m.norm_x_gradient(&x, &v), &xa);
        let sol = jac.lu().solve(&ds).ok_or(Error::SingularTensor { condition: f64::INFINITY })?;
        Ok(sol.iter().map(|c| -c).collect())
    }

    /// `∇^N_{x_a} N = ∂N/∂u_a + N^m_i(N) x_a^i`, the covariant derivative
    /// with reference the field itself.
    pub fn covariant_derivative(&self, u: &[f64], a: usize) -> Result<Vec<f64>> {
        let x = self.patch.point_at(u);
        let v = self.at(u)?;
        let basis = self.patch.tangent_basis(u)?;
        let xa: Vec<f64> = basis.column(a).iter().copied().collect();
        let dn = self.derivative(u, a)?;
        let nl = crate::spray::nonlinear_connection(&self.metric, &x, &v);
        let corr = crate::linalg::mat_vec(&nl, &xa);
        Ok(dn.iter().zip(&corr).map(|(p, q)| p + q).collect())
    }
}

/// A unit normal field over patch parameters.
pub trait NormalField {
    fn normal(&self, u: &[f64]) -> Result<Vec<f64>>;
}

impl NormalField for ContinuedNormal {
    fn normal(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.at(u)
    }
}

impl<F: Fn(&[f64]) -> Result<Vec<f64>>> NormalField for F {
    fn normal(&self, u: &[f64]) -> Result<Vec<f64>> {
        self(u)
    }
}

/// `η^r_ξ(u) = γ_{ξ(u)}(r)`; the normal is rescaled to `F = 1` and checked
/// for orthogonality. Negative `r` integrates backward.
pub fn endpoint_map(
    metric: &FinslerMetric,
    patch: &SubmanifoldPatch,
    xi: &dyn NormalField,
    r: f64,
    u: &[f64],
    opts: &OdeOptions,
) -> Result<Vec<f64>> {
    let x = patch.point_at(u);
    let v = xi.normal(u)?;
    let f = metric.cone_guard(&x, &v)?;
    let v: Vec<f64> = v.iter().map(|c| c / f).collect();
    let basis = patch.tangent_basis(u)?;
    if basis.ncols() > 0 && !is_orthogonal(metric, &TangentSample::new(&x, &v), &basis)?.orthogonal {
        return Err(Error::InvalidInput("normal field is not orthogonal to the patch"));
    }
    if r == 0.0 {
        return Ok(x);
    }
    let path = integrate_geodesic(metric, &x, &v, 0.0, r, opts)?;
    Ok(path.position(r))
}

/// Largest `|a_i − b_i|`.
pub fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    max_abs(&crate::linalg::sub(a, b))
}
