//! Jacobi fields, shape operators, L-Jacobi bases and focal points.
//!
//! Jacobi fields are integrated together with their geodesic as variations
//! of the spray flow: the chart components satisfy
//! `J̈ = −2(∂G/∂x J + ∂G/∂v J̇)`, and the covariant derivative with
//! reference `γ̇` is recovered as `J′ = J̇ + N(γ̇) J`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geodesic::{integrate_geodesic, is_orthogonal, ContinuedNormal, GeodesicPath, NormalField, SubmanifoldPatch};
use crate::linalg::{cholesky, columns, g_coordinates, mat_vec, null_space, singular_values};
use crate::metric::{bilinear, FinslerMetric};
use crate::ode::{integrate, DenseSolution, OdeOptions};
use crate::spray::{jacobi_operator_at, nonlinear_connection, spray_jet};

/// Bisection resolution for focal instants.
pub const FOCAL_RESOLUTION: f64 = 1e-9;
/// Relative singular-value threshold for focal multiplicities.
pub const FOCAL_RANK_TOL: f64 = 1e-6;

/// `R_{γ̇(t)}` as a matrix acting on chart components.
#[derive(Clone, Debug)]
pub struct JacobiOperatorValue {
    pub t: f64,
    pub r: DMatrix<f64>,
}

pub fn jacobi_operator(geo: &GeodesicPath, t: f64) -> Result<JacobiOperatorValue> {
    let (x, v) = geo.state(t);
    geo.metric().cone_guard(&x, &v)?;
    Ok(JacobiOperatorValue { t, r: jacobi_operator_at(geo.metric(), &x, &v) })
}

/// A geodesic and `m` Jacobi fields along it, integrated as one system.
///
/// State layout: `x, v, J_1..J_m, J̇_1..J̇_m`.
#[derive(Clone)]
pub struct JacobiBundle {
    metric: FinslerMetric,
    sol: DenseSolution,
    n: usize,
    m: usize,
    t0: f64,
}

impl core::fmt::Debug for JacobiBundle {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "JacobiBundle(n = {}, fields = {}, span = {:?})", self.n, self.m, self.t_span())
    }
}

fn bundle_rhs(metric: &FinslerMetric, n: usize, m: usize, y: &[f64], dy: &mut [f64]) -> Result<()> {
    let (x, v) = (&y[..n], &y[n..2 * n]);
    let jet = spray_jet(metric, x, v);
    dy[..n].copy_from_slice(v);
    for i in 0..n {
        dy[n + i] = -2.0 * jet.g[i];
    }
    let jb = 2 * n;
    let db = 2 * n + n * m;
    for a in 0..m {
        let j = &y[jb + a * n..jb + (a + 1) * n];
        let jd = &y[db + a * n..db + (a + 1) * n];
        for i in 0..n {
            dy[jb + a * n + i] = jd[i];
            let mut acc = 0.0;
            for k in 0..n {
                acc += jet.gx[(i, k)] * j[k] + jet.gv[(i, k)] * jd[k];
            }
            dy[db + a * n + i] = -2.0 * acc;
        }
    }
    Ok(())
}

/// Integrates the geodesic from `(x0, v0)` at `t0` to `t1` with Jacobi
/// fields of initial data `J(t0) = j0[a]`, `J′(t0) = j0p[a]`.
pub fn integrate_bundle(
    metric: &FinslerMetric,
    x0: &[f64],
    v0: &[f64],
    t0: f64,
    t1: f64,
    j0: &[Vec<f64>],
    j0p: &[Vec<f64>],
    opts: &OdeOptions,
) -> Result<JacobiBundle> {
    let n = metric.dim();
    let m = j0.len();
    if j0p.len() != m || j0.iter().chain(j0p).any(|c| c.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, found: m });
    }
    metric.cone_guard(x0, v0)?;
    let nl = nonlinear_connection(metric, x0, v0);
    let mut y0 = Vec::with_capacity(2 * n + 2 * n * m);
    y0.extend_from_slice(x0);
    y0.extend_from_slice(v0);
    for j in j0 {
        y0.extend_from_slice(j);
    }
    for (j, jp) in j0.iter().zip(j0p) {
        let corr = mat_vec(&nl, j);
        y0.extend(jp.iter().zip(&corr).map(|(a, b)| a - b));
    }
    let sol = integrate(|_, y, dy| bundle_rhs(metric, n, m, y, dy), t0, &y0, t1, opts)?;
    Ok(JacobiBundle { metric: metric.clone(), sol, n, m, t0 })
}

impl JacobiBundle {
    pub fn metric(&self) -> &FinslerMetric {
        &self.metric
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of Jacobi fields carried.
    pub fn fields(&self) -> usize {
        self.m
    }

    pub fn t_span(&self) -> (f64, f64) {
        (self.t0, self.sol.t_end())
    }

    pub fn nodes(&self) -> Vec<f64> {
        self.sol.nodes()
    }

    pub fn geodesic_state(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let y = self.sol.eval(t);
        (y[..self.n].to_vec(), y[self.n..2 * self.n].to_vec())
    }

    fn block(&self, y: &[f64], base: usize) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.n, self.m, &y[base..base + self.n * self.m])
    }

    /// Columns `J_a(t)`.
    pub fn j(&self, t: f64) -> DMatrix<f64> {
        self.block(&self.sol.eval(t), 2 * self.n)
    }

    /// Columns `dJ_a/dt` (chart derivative).
    pub fn jdot(&self, t: f64) -> DMatrix<f64> {
        self.block(&self.sol.eval(t), 2 * self.n + self.n * self.m)
    }

    /// Everything at once: `(x, v, J, J̇, J′)`.
    pub fn snapshot(&self, t: f64) -> Snapshot {
        let y = self.sol.eval(t);
        let n = self.n;
        let x = y[..n].to_vec();
        let v = y[n..2 * n].to_vec();
        let j = self.block(&y, 2 * n);
        let jdot = self.block(&y, 2 * n + n * self.m);
        let nl = nonlinear_connection(&self.metric, &x, &v);
        let jprime = &jdot + &nl * &j;
        Snapshot { t, x, v, j, jdot, jprime, nl }
    }

    /// Columns `J′_a(t) = J̇_a + N(γ̇) J_a`.
    pub fn jprime(&self, t: f64) -> DMatrix<f64> {
        self.snapshot(t).jprime
    }
}

/// State of a [`JacobiBundle`] at one instant.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub j: DMatrix<f64>,
    pub jdot: DMatrix<f64>,
    pub jprime: DMatrix<f64>,
    pub nl: DMatrix<f64>,
}

/// One Jacobi field of a bundle.
#[derive(Clone, Debug)]
pub struct JacobiField {
    bundle: Arc<JacobiBundle>,
    index: usize,
}

impl JacobiField {
    pub fn bundle(&self) -> &JacobiBundle {
        &self.bundle
    }

    pub fn value(&self, t: f64) -> Vec<f64> {
        self.bundle.j(t).column(self.index).iter().copied().collect()
    }

    /// Covariant derivative `J′(t)`.
    pub fn derivative(&self, t: f64) -> Vec<f64> {
        self.bundle.jprime(t).column(self.index).iter().copied().collect()
    }
}

/// Jacobi field along `geo` with `J(t0) = j0`, `J′(t0) = j0p`, where `t0` is
/// the start of the geodesic's span.
pub fn integrate_jacobi(geo: &GeodesicPath, j0: &[f64], j0p: &[f64], opts: &OdeOptions) -> Result<JacobiField> {
    let (t0, t1) = geo.t_span();
    let s = geo.start();
    let bundle = integrate_bundle(geo.metric(), &s.x, &s.v, t0, t1, &[j0.to_vec()], &[j0p.to_vec()], opts)?;
    Ok(JacobiField { bundle: Arc::new(bundle), index: 0 })
}

/// Shape operator of a patch at a parameter, in its tangent basis.
#[derive(Clone, Debug)]
pub struct ShapeOperatorValue {
    pub u: Vec<f64>,
    pub xi: Vec<f64>,
    pub s: DMatrix<f64>,
    /// `max |g_ξ(S u_a, u_b) − g_ξ(u_a, S u_b)|`.
    pub symmetry_defect: f64,
}

/// `S(u) = tan_ξ ∇^ξ_u ξ̃` for the gauge-fixed unit normal extension `ξ̃`.
pub fn shape_operator(
    metric: &FinslerMetric,
    patch: &SubmanifoldPatch,
    u: &[f64],
    xi: &[f64],
) -> Result<ShapeOperatorValue> {
    let ext = ContinuedNormal::new(metric, patch, u, xi)?;
    shape_operator_of(&ext, u)
}

pub fn shape_operator_of(ext: &ContinuedNormal, u: &[f64]) -> Result<ShapeOperatorValue> {
    let metric = &ext.metric;
    let patch = &ext.patch;
    let k = patch.dim();
    let x = patch.point_at(u);
    let basis = patch.tangent_basis(u)?;
    let xi = ext.at(u)?;
    let g = metric.g_matrix(&x, &xi);
    if k == 0 {
        return Ok(ShapeOperatorValue { u: u.to_vec(), xi, s: DMatrix::zeros(0, 0), symmetry_defect: 0.0 });
    }
    let coords = g_coordinates(&g, &basis).ok_or(Error::RankDeficient { ratio: 0.0 })?;
    let mut s = DMatrix::zeros(k, k);
    for a in 0..k {
        let d = ext.covariant_derivative(u, a)?;
        let c = mat_vec(&coords, &d);
        for b in 0..k {
            s[(b, a)] = c[b];
        }
    }
    let gl = basis.transpose() * &g * &basis;
    let gs = &gl * &s;
    let symmetry_defect = (&gs - gs.transpose()).amax();
    Ok(ShapeOperatorValue { u: u.to_vec(), xi, s, symmetry_defect })
}

/// Which self-adjoint space a basis spans.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpaceLabel {
    /// All `n − 1` L-Jacobi fields orthogonal to `γ̇`.
    Full,
    /// The vertical (holonomy) fields.
    Vertical,
}

/// A basis of a self-adjoint space of Jacobi fields along one geodesic.
#[derive(Clone, Debug)]
pub struct SelfAdjointSpace {
    pub bundle: Arc<JacobiBundle>,
    pub label: SpaceLabel,
}

impl SelfAdjointSpace {
    pub fn dim(&self) -> usize {
        self.bundle.fields()
    }

    pub fn field(&self, i: usize) -> JacobiField {
        JacobiField { bundle: self.bundle.clone(), index: i }
    }

    /// `max_{a,b} |g_γ̇(J′_a, J_b) − g_γ̇(J_a, J′_b)|` at `t`.
    pub fn self_adjointness_defect(&self, t: f64) -> f64 {
        let s = self.bundle.snapshot(t);
        let g = self.bundle.metric.g_matrix(&s.x, &s.v);
        let w = s.jprime.transpose() * &g * &s.j;
        (&w - w.transpose()).amax()
    }

    /// `max_a |g_γ̇(J_a, γ̇)| / F(γ̇)` at `t`.
    pub fn velocity_overlap(&self, t: f64) -> f64 {
        let s = self.bundle.snapshot(t);
        let g = self.bundle.metric.g_matrix(&s.x, &s.v);
        let f = self.bundle.metric.norm(&s.x, &s.v);
        columns(&s.j).iter().fold(0.0f64, |m, c| m.max(libm::fabs(bilinear(&g, c, &s.v)) / f))
    }
}

/// Initial data of the L-Jacobi basis at `patch(u0)` with unit normal `xi`:
/// `k` fields `J = u_a, J′ = S u_a` and `n − 1 − k` fields `J = 0` with `J′`
/// spanning the `g_ξ`-orthogonal complement of `T_pL ⊕ span ξ`.
pub fn l_jacobi_initial_data(
    metric: &FinslerMetric,
    patch: &SubmanifoldPatch,
    u0: &[f64],
    xi: &[f64],
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let n = metric.dim();
    let x0 = patch.point_at(u0);
    let basis = patch.tangent_basis(u0)?;
    let k = basis.ncols();
    let shape = shape_operator(metric, patch, u0, xi)?;
    let mut j0 = Vec::with_capacity(n - 1);
    let mut j0p = Vec::with_capacity(n - 1);
    for a in 0..k {
        j0.push(basis.column(a).iter().copied().collect());
        let sa = &basis * shape.s.column(a);
        j0p.push(sa.iter().copied().collect());
    }
    let g = metric.g_matrix(&x0, &shape.xi);
    let mut rows = DMatrix::zeros(k + 1, n);
    for a in 0..k {
        let gu = &g * basis.column(a);
        rows.row_mut(a).copy_from(&gu.transpose());
    }
    let gx = &g * nalgebra::DVector::from_column_slice(&shape.xi);
    rows.row_mut(k).copy_from(&gx.transpose());
    let comp = null_space(&rows, 1e-10);
    if comp.len() != n - 1 - k {
        return Err(Error::RankDeficient { ratio: 0.0 });
    }
    for c in comp {
        j0.push(vec![0.0; n]);
        j0p.push(c);
    }
    Ok((j0, j0p))
}

/// The L-Jacobi basis along the geodesic `geo`, whose start must lie on the
/// patch at `u0` with velocity orthogonal to it.
pub fn l_jacobi_basis(
    metric: &FinslerMetric,
    patch: &SubmanifoldPatch,
    u0: &[f64],
    geo: &GeodesicPath,
    opts: &OdeOptions,
) -> Result<SelfAdjointSpace> {
    let start = geo.start();
    let x0 = patch.point_at(u0);
    if crate::geodesic::sup_distance(&x0, &start.x) > 1e-10 {
        return Err(Error::InvalidInput("geodesic does not start on the patch"));
    }
    let basis = patch.tangent_basis(u0)?;
    if basis.ncols() > 0 && !is_orthogonal(metric, &start, &basis)?.orthogonal {
        return Err(Error::InvalidInput("geodesic is not orthogonal to the patch"));
    }
    let f = metric.cone_guard(&start.x, &start.v)?;
    let xi: Vec<f64> = start.v.iter().map(|c| c / f).collect();
    let (j0, mut j0p) = l_jacobi_initial_data(metric, patch, u0, &xi)?;
    // Initial data were built for the unit normal; rescale to the actual speed.
    for jp in j0p.iter_mut() {
        for c in jp.iter_mut() {
            *c *= f;
        }
    }
    let (t0, t1) = geo.t_span();
    let bundle = integrate_bundle(metric, &start.x, &start.v, t0, t1, &j0, &j0p, opts)?;
    Ok(SelfAdjointSpace { bundle: Arc::new(bundle), label: SpaceLabel::Full })
}

/// Variation field of L-orthogonal geodesics by central differences.
#[derive(Clone, Debug)]
pub struct VariationField {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

/// Default variation step.
pub const VARIATION_STEP: f64 = 1e-4;

/// `∂/∂s γ_{N(s)}(t)` at `s = 0` along `β(s) = patch(u0 + s·dir)`, with `N`
/// the gauge-fixed unit normal continuing `xi`; central differences with one
/// Richardson level. Times are measured from the footpoint.
pub fn jacobi_by_variation(
    metric: &FinslerMetric,
    patch: &SubmanifoldPatch,
    u0: &[f64],
    xi: &[f64],
    dir: &[f64],
    times: &[f64],
    step: f64,
    opts: &OdeOptions,
) -> Result<VariationField> {
    let ext = ContinuedNormal::new(metric, patch, u0, xi)?;
    variation_along(metric, patch, &ext, u0, dir, times, step, opts)
}

/// [`jacobi_by_variation`] with an arbitrary normal field.
#[allow(clippy::too_many_arguments)]
pub fn variation_along(
    metric: &FinslerMetric,
    patch: &SubmanifoldPatch,
    normal: &dyn NormalField,
    u0: &[f64],
    dir: &[f64],
    times: &[f64],
    step: f64,
    opts: &OdeOptions,
) -> Result<VariationField> {
    let n = metric.dim();
    if dir.iter().all(|c| *c == 0.0) {
        return Ok(VariationField { times: times.to_vec(), values: vec![vec![0.0; n]; times.len()] });
    }
    let t_max = times.iter().fold(0.0f64, |m, t| m.max(*t));
    let t_min = times.iter().fold(0.0f64, |m, t| m.min(*t));
    let trace = |s: f64| -> Result<Vec<Vec<f64>>> {
        let u: Vec<f64> = u0.iter().zip(dir).map(|(a, d)| a + s * d).collect();
        let x = patch.point_at(&u);
        let v = normal.normal(&u)?;
        let f = metric.cone_guard(&x, &v)?;
        let v: Vec<f64> = v.iter().map(|c| c / f).collect();
        let fwd = if t_max > 0.0 { Some(integrate_geodesic(metric, &x, &v, 0.0, t_max, opts)?) } else { None };
        let bwd = if t_min < 0.0 { Some(integrate_geodesic(metric, &x, &v, 0.0, t_min, opts)?) } else { None };
        Ok(times
            .iter()
            .map(|&t| match (t, &fwd, &bwd) {
                (t, Some(g), _) if t > 0.0 => g.position(t),
                (t, _, Some(g)) if t < 0.0 => g.position(t),
                _ => x.clone(),
            })
            .collect())
    };
    let diff = |h: f64| -> Result<Vec<Vec<f64>>> {
        let p = trace(h)?;
        let m = trace(-h)?;
        Ok(p.iter().zip(&m).map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) / (2.0 * h)).collect()).collect())
    };
    let coarse = diff(step)?;
    let fine = diff(0.5 * step)?;
    let values = coarse
        .iter()
        .zip(&fine)
        .map(|(c, f)| c.iter().zip(f).map(|(a, b)| (4.0 * b - a) / 3.0).collect())
        .collect();
    Ok(VariationField { times: times.to_vec(), values })
}

/// Initial data `(β̇(0), ∇_{β̇(0)} N)` of the variation field of
/// [`jacobi_by_variation`]; an L-Jacobi field.
pub fn variation_initial_data(
    metric: &FinslerMetric,
    patch: &SubmanifoldPatch,
    u0: &[f64],
    xi: &[f64],
    dir: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = metric.dim();
    let ext = ContinuedNormal::new(metric, patch, u0, xi)?;
    let basis = patch.tangent_basis(u0)?;
    let j0 = mat_vec(&basis, dir);
    let mut j0p = vec![0.0; n];
    for (a, d) in dir.iter().enumerate() {
        if *d == 0.0 {
            continue;
        }
        let cd = ext.covariant_derivative(u0, a)?;
        for i in 0..n {
            j0p[i] += d * cd[i];
        }
    }
    Ok((j0, j0p))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FocalInstant {
    pub t: f64,
    pub multiplicity: usize,
}

#[derive(Clone, Debug)]
pub struct FocalReport {
    pub instants: Vec<FocalInstant>,
    /// `(t, det)` samples of the basis determinant in a `g_γ̇`-orthonormal frame.
    pub trace: Vec<(f64, f64)>,
}

/// Determinant and degeneracy measure of a matrix of fields at `t`.
///
/// `det` is `sqrt(det g)·det[γ̇/F, J_1, …, J_{n−1}]`; `ratio` is
/// `σ_min(J)/σ_max([J; J′])` in `g`-orthonormal coordinates.
pub(crate) fn degeneracy(metric: &FinslerMetric, x: &[f64], v: &[f64], j: &DMatrix<f64>, jp: &DMatrix<f64>) -> (f64, f64, usize) {
    let n = metric.dim();
    let m = j.ncols();
    let g = metric.g_matrix(x, v);
    let l = cholesky(&g).unwrap_or_else(|| DMatrix::from_element(n, n, f64::NAN));
    let det = if m + 1 == n {
        let f = metric.norm(x, v);
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            a[(i, 0)] = v[i] / f;
        }
        a.view_mut((0, 1), (n, m)).copy_from(j);
        libm::sqrt(g.determinant()) * a.determinant()
    } else {
        f64::NAN
    };
    let lj = l.transpose() * j;
    let ljp = l.transpose() * jp;
    let mut stacked = DMatrix::zeros(2 * n, m);
    stacked.view_mut((0, 0), (n, m)).copy_from(&lj);
    stacked.view_mut((n, 0), (n, m)).copy_from(&ljp);
    let top = singular_values(&stacked).first().copied().unwrap_or(0.0);
    let sv = singular_values(&lj);
    let low = sv.last().copied().unwrap_or(0.0);
    let ratio = if top > 0.0 { low / top } else { 0.0 };
    let deficiency = sv.iter().filter(|&&s| s < FOCAL_RANK_TOL * top).count() + m.saturating_sub(sv.len());
    (det, ratio, deficiency)
}

/// Evaluation of [`degeneracy`] along a bundle.
pub(crate) fn bundle_degeneracy(bundle: &JacobiBundle, t: f64) -> (f64, f64, usize) {
    let s = bundle.snapshot(t);
    degeneracy(&bundle.metric, &s.x, &s.v, &s.j, &s.jprime)
}

/// Sample times covering `[a, b]`: the integrator mesh refined `per_step`
/// times, and at least `min_count` uniform points.
pub(crate) fn sample_times(nodes: &[f64], a: f64, b: f64, per_step: usize, min_count: usize) -> Vec<f64> {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let mut ts: Vec<f64> = Vec::new();
    for w in nodes.windows(2) {
        for k in 0..per_step {
            let t = w[0] + (w[1] - w[0]) * (k as f64) / (per_step as f64);
            if t >= lo && t <= hi {
                ts.push(t);
            }
        }
    }
    for k in 0..=min_count {
        ts.push(lo + (hi - lo) * (k as f64) / (min_count as f64));
    }
    ts.sort_by(|p, q| p.partial_cmp(q).unwrap_or(core::cmp::Ordering::Equal));
    ts.dedup_by(|p, q| libm::fabs(*p - *q) < 1e-12);
    ts
}

/// Zeros of `f` in `samples` by sign change and bisection, plus local minima
/// of `ratio` below [`FOCAL_RANK_TOL`] found by golden-section search (for
/// zeros of even multiplicity). Returns sorted, de-duplicated instants.
pub(crate) fn locate_degeneracies<F>(samples: &[f64], eval: F) -> (Vec<f64>, Vec<(f64, f64)>, f64)
where
    F: Fn(f64) -> (f64, f64),
{
    let vals: Vec<(f64, f64)> = samples.iter().map(|&t| eval(t)).collect();
    let mut found: Vec<f64> = Vec::new();
    let max_ratio = vals.iter().fold(0.0f64, |m, v| m.max(v.1));
    for i in 0..samples.len().saturating_sub(1) {
        let (d0, d1) = (vals[i].0, vals[i + 1].0);
        if d0 * d1 < 0.0 {
            let (mut a, mut b, mut da) = (samples[i], samples[i + 1], d0);
            while b - a > FOCAL_RESOLUTION {
                let mid = 0.5 * (a + b);
                let dm = eval(mid).0;
                if dm == 0.0 {
                    a = mid;
                    b = mid;
                    break;
                }
                if (dm < 0.0) == (da < 0.0) {
                    a = mid;
                    da = dm;
                } else {
                    b = mid;
                }
            }
            found.push(0.5 * (a + b));
        }
    }
    let inv_phi = 0.5 * (libm::sqrt(5.0) - 1.0);
    for i in 1..samples.len().saturating_sub(1) {
        let r = vals[i].1;
        if !(r <= vals[i - 1].1 && r <= vals[i + 1].1 && r < 1e-2 * max_ratio.max(1e-300)) {
            continue;
        }
        let (mut a, mut b) = (samples[i - 1], samples[i + 1]);
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        let (mut fc, mut fd) = (eval(c).1, eval(d).1);
        while b - a > FOCAL_RESOLUTION {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = eval(c).1;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = eval(d).1;
            }
        }
        let t = 0.5 * (a + b);
        if eval(t).1 < FOCAL_RANK_TOL {
            found.push(t);
        }
    }
    found.sort_by(|p, q| p.partial_cmp(q).unwrap_or(core::cmp::Ordering::Equal));
    found.dedup_by(|p, q| libm::fabs(*p - *q) < 1e-7);
    let trace = samples.iter().zip(&vals).map(|(t, v)| (*t, v.0)).collect();
    (found, trace, max_ratio)
}

/// Focal instants of an L-Jacobi basis within `window`. Instants within
/// `1e-6` of the window start are not reported.
pub fn detect_focal_points(space: &SelfAdjointSpace, window: (f64, f64)) -> Result<FocalReport> {
    let b = &*space.bundle;
    let ts = sample_times(&b.nodes(), window.0, window.1, 4, 400);
    let (found, trace, max_ratio) = locate_degeneracies(&ts, |t| {
        let (d, r, _) = bundle_degeneracy(b, t);
        (d, r)
    });
    if max_ratio < FOCAL_RANK_TOL {
        return Err(Error::WindowDegenerate);
    }
    let instants = found
        .into_iter()
        .filter(|t| libm::fabs(t - window.0) > 1e-6 && libm::fabs(t - window.1) > 1e-6)
        .map(|t| FocalInstant { t, multiplicity: bundle_degeneracy(b, t).2.max(1) })
        .collect();
    Ok(FocalReport { instants, trace })
}

/// Unit-speed start on `patch(u0)` along `xi`, integrated over `[0, t1]`.
pub fn normal_geodesic(
    metric: &FinslerMetric,
    patch: &SubmanifoldPatch,
    u0: &[f64],
    xi: &[f64],
    t1: f64,
    opts: &OdeOptions,
) -> Result<GeodesicPath> {
    let x0 = patch.point_at(u0);
    let f = metric.cone_guard(&x0, xi)?;
    let v: Vec<f64> = xi.iter().map(|c| c / f).collect();
    integrate_geodesic(metric, &x0, &v, 0.0, t1, opts)
}
