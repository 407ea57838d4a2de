//! Wilking's distributions `V(t)`, `H(t)` along a geodesic, the O'Neill
//! tensor and the transversal Jacobi equation.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geodesic::SubmanifoldPatch;
use crate::jacobi::{
    integrate_bundle, l_jacobi_basis, locate_degeneracies, normal_geodesic, sample_times, FocalInstant, JacobiBundle,
    SelfAdjointSpace, SpaceLabel, FOCAL_RANK_TOL,
};
use crate::linalg::{cholesky, singular_values};
use crate::metric::FinslerMetric;
use crate::ode::{integrate, DenseSolution, OdeOptions};
use crate::spray::{nonlinear_connection_rate, spray, spray_jet};
use crate::submersion::{BasicNormal, SubmersionSpec};

/// Half-width of the window around a degeneracy instant where the
/// rescaled basis is evaluated from its Taylor expansion.
pub const DEGENERATE_WINDOW: f64 = 1e-4;
/// Tolerance on the subspace and orthogonality preconditions.
pub const MEMBERSHIP_TOL: f64 = 1e-8;

/// An instant where a combination of the `V` fields vanishes.
#[derive(Clone, Debug)]
pub struct Degeneracy {
    pub t: f64,
    /// Coefficients (columns, `m × d`) of the vanishing combinations.
    pub null: DMatrix<f64>,
    /// `J̇, J̈, J⃛` of those combinations at `t`.
    derivs: [DMatrix<f64>; 3],
    /// Coefficients of the remaining fields (`m × (m − d)`).
    rest: DMatrix<f64>,
}

impl Degeneracy {
    pub fn multiplicity(&self) -> usize {
        self.null.ncols()
    }
}

/// The pair `(V(t), H(t))` along the geodesic of a self-adjoint space.
#[derive(Clone, Debug)]
pub struct WilkingFrame {
    bundle: Arc<JacobiBundle>,
    degeneracies: Vec<Degeneracy>,
    window: (f64, f64),
}

/// Everything the frame knows at one instant.
#[derive(Clone, Debug)]
pub struct FrameValue {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub g: DMatrix<f64>,
    pub g_dot: DMatrix<f64>,
    pub nl: DMatrix<f64>,
    /// Continuous basis of `V(t)`, columns normalized.
    pub basis: DMatrix<f64>,
    pub basis_dot: DMatrix<f64>,
    pub p_v: DMatrix<f64>,
    pub p_t: DMatrix<f64>,
    pub p_h: DMatrix<f64>,
    pub p_v_dot: DMatrix<f64>,
    pub p_t_dot: DMatrix<f64>,
    pub p_h_dot: DMatrix<f64>,
    /// Whether `t` lies in a degeneracy window.
    pub degenerate: bool,
}

impl FrameValue {
    /// `|g(P_V a, P_H b)|` maximized over coordinate vectors, plus the
    /// defect of `P_V + P_H + P_T = I`.
    pub fn orthogonality_defect(&self) -> f64 {
        let n = self.g.nrows();
        let cross = self.p_v.transpose() * &self.g * &self.p_h;
        let sum = &self.p_v + &self.p_h + &self.p_t - DMatrix::identity(n, n);
        let tv = self.p_t.transpose() * &self.g * (&self.p_v + &self.p_h);
        cross.amax().max(sum.amax()).max(tv.amax())
    }

    pub fn dim_v(&self) -> usize {
        self.basis.ncols()
    }

    /// `𝔸 = P_V (Ṗ_H + N P_H) + P_H (Ṗ_V + N P_V)`.
    pub fn oneill(&self) -> DMatrix<f64> {
        &self.p_v * (&self.p_h_dot + &self.nl * &self.p_h) + &self.p_h * (&self.p_v_dot + &self.nl * &self.p_v)
    }

    pub fn g_dot_product(&self, a: &[f64], b: &[f64]) -> f64 {
        (DVector::from_column_slice(a).transpose() * &self.g * DVector::from_column_slice(b))[0]
    }
}

/// The O'Neill tensor at `t` in chart coordinates.
#[derive(Clone, Debug)]
pub struct ONeillValue {
    pub t: f64,
    pub a: DMatrix<f64>,
}

impl ONeillValue {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        crate::linalg::mat_vec(&self.a, x)
    }
}

fn g_projector_with_rate(
    g: &DMatrix<f64>,
    g_dot: &DMatrix<f64>,
    b: &DMatrix<f64>,
    b_dot: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = g.nrows();
    if b.ncols() == 0 {
        return Ok((DMatrix::zeros(n, n), DMatrix::zeros(n, n)));
    }
    let gram = b.transpose() * g * b;
    let inv = gram.clone().try_inverse().ok_or(Error::SingularTensor { condition: f64::INFINITY })?;
    let right = b.transpose() * g;
    let p = b * &inv * &right;
    let gram_dot = b_dot.transpose() * g * b + b.transpose() * g_dot * b + b.transpose() * g * b_dot;
    let inv_dot = -&inv * gram_dot * &inv;
    let right_dot = b_dot.transpose() * g + b.transpose() * g_dot;
    let p_dot = b_dot * &inv * &right + b * inv_dot * &right + b * &inv * right_dot;
    Ok((p, p_dot))
}

fn normalize_columns(b: &mut DMatrix<f64>, b_dot: &mut DMatrix<f64>) {
    for c in 0..b.ncols() {
        let s = b.column(c).norm();
        if s > 0.0 {
            b.column_mut(c).scale_mut(1.0 / s);
            b_dot.column_mut(c).scale_mut(1.0 / s);
        }
    }
}

impl WilkingFrame {
    pub fn bundle(&self) -> &JacobiBundle {
        &self.bundle
    }

    pub fn metric(&self) -> &FinslerMetric {
        self.bundle.metric()
    }

    pub fn dim(&self) -> usize {
        self.bundle.dim()
    }

    pub fn dim_v(&self) -> usize {
        self.bundle.fields()
    }

    pub fn dim_h(&self) -> usize {
        self.dim() - 1 - self.dim_v()
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn degeneracies(&self) -> &[Degeneracy] {
        &self.degeneracies
    }

    /// The continuous basis of `V(t)` and its chart derivative (columns not
    /// normalized).
    pub fn raw_basis(&self, t: f64) -> (DMatrix<f64>, DMatrix<f64>, bool) {
        let j = self.bundle.j(t);
        let jd = self.bundle.jdot(t);
        for d in &self.degeneracies {
            let s = t - d.t;
            if libm::fabs(s) < DEGENERATE_WINDOW {
                let [d1, d2, d3] = &d.derivs;
                let scaled = d1 + d2 * (0.5 * s) + d3 * (s * s / 6.0);
                let scaled_dot = d2 * 0.5 + d3 * (s / 3.0);
                let m = self.dim_v();
                let k = d.null.ncols();
                let n = self.dim();
                let mut b = DMatrix::zeros(n, m);
                let mut bd = DMatrix::zeros(n, m);
                b.view_mut((0, 0), (n, k)).copy_from(&scaled);
                bd.view_mut((0, 0), (n, k)).copy_from(&scaled_dot);
                if m > k {
                    b.view_mut((0, k), (n, m - k)).copy_from(&(&j * &d.rest));
                    bd.view_mut((0, k), (n, m - k)).copy_from(&(&jd * &d.rest));
                }
                return (b, bd, true);
            }
        }
        (j, jd, false)
    }

    pub fn at(&self, t: f64) -> Result<FrameValue> {
        let metric = self.bundle.metric();
        let n = self.dim();
        let (x, v) = self.bundle.geodesic_state(t);
        let acc: Vec<f64> = spray(metric, &x, &v).iter().map(|c| -2.0 * c).collect();
        let g = metric.g_matrix(&x, &v);
        let g_dot = metric.g_rate(&x, &v, &v, &acc);
        let nl = crate::spray::nonlinear_connection(metric, &x, &v);
        let (mut basis, mut basis_dot, degenerate) = self.raw_basis(t);
        normalize_columns(&mut basis, &mut basis_dot);
        let (p_v, p_v_dot) = g_projector_with_rate(&g, &g_dot, &basis, &basis_dot)?;
        let vv = DVector::from_column_slice(&v);
        let aa = DVector::from_column_slice(&acc);
        let f2 = (vv.transpose() * &g * &vv)[0];
        let p_t = &vv * (vv.transpose() * &g) / f2;
        let p_t_dot = (&aa * (vv.transpose() * &g) + &vv * (aa.transpose() * &g) + &vv * (vv.transpose() * &g_dot)) / f2;
        let p_h = DMatrix::identity(n, n) - &p_v - &p_t;
        let p_h_dot = -&p_v_dot - &p_t_dot;
        Ok(FrameValue { t, x, v, g, g_dot, nl, basis, basis_dot, p_v, p_t, p_h, p_v_dot, p_t_dot, p_h_dot, degenerate })
    }

    /// `σ_min/σ_max` of the normalized `V` basis in a `g`-orthonormal frame.
    pub fn rank_ratio(&self, t: f64) -> Result<f64> {
        let fv = self.at(t)?;
        let l = cholesky(&fv.g).ok_or(Error::DegenerateTensor { min_eigenvalue: f64::NAN })?;
        let sv = singular_values(&(l.transpose() * &fv.basis));
        Ok(match (sv.first(), sv.last()) {
            (Some(hi), Some(lo)) if *hi > 0.0 => lo / hi,
            _ => 1.0,
        })
    }

    pub fn oneill_tensor(&self, t: f64) -> Result<ONeillValue> {
        Ok(ONeillValue { t, a: self.at(t)?.oneill() })
    }

    /// Horizontal part `X = P_H J` and `D^𝔥 X = P_H (X)′` of a field given
    /// by its value and chart derivative.
    pub fn horizontal_part(&self, t: f64, j: &[f64], j_dot: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let fv = self.at(t)?;
        let jv = DVector::from_column_slice(j);
        let jd = DVector::from_column_slice(j_dot);
        let x = &fv.p_h * &jv;
        let x_dot = &fv.p_h_dot * &jv + &fv.p_h * &jd;
        let y = &fv.p_h * (x_dot + &fv.nl * &x);
        Ok((x.iter().copied().collect(), y.iter().copied().collect()))
    }
}

fn find_degeneracies(bundle: &JacobiBundle, lo: f64, hi: f64) -> Result<Vec<Degeneracy>> {
    let metric = bundle.metric();
    let m = bundle.fields();
    let ratio_at = |t: f64| -> (f64, DMatrix<f64>, f64) {
        let s = bundle.snapshot(t);
        let g = metric.g_matrix(&s.x, &s.v);
        let l = match cholesky(&g) {
            Some(l) => l,
            None => return (f64::NAN, DMatrix::zeros(0, 0), 0.0),
        };
        let lj = l.transpose() * &s.j;
        let mut stacked = DMatrix::zeros(2 * lj.nrows(), m);
        stacked.view_mut((0, 0), (lj.nrows(), m)).copy_from(&lj);
        stacked.view_mut((lj.nrows(), 0), (lj.nrows(), m)).copy_from(&(l.transpose() * &s.jprime));
        let top = singular_values(&stacked).first().copied().unwrap_or(0.0);
        let sv = singular_values(&lj);
        let low = if sv.len() < m { 0.0 } else { sv.last().copied().unwrap_or(0.0) };
        (if top > 0.0 { low / top } else { 0.0 }, lj, top)
    };
    let ts = sample_times(&bundle.nodes(), lo, hi, 4, 400);
    let (mut found, _, max_ratio) = locate_degeneracies(&ts, |t| (f64::NAN, ratio_at(t).0));
    if !(max_ratio >= FOCAL_RANK_TOL) {
        let (_, lj, top) = ratio_at(lo);
        let found = crate::linalg::numerical_rank(&lj, FOCAL_RANK_TOL, Some(top));
        return Err(Error::DimensionDrop { t: lo, expected: m, found });
    }
    for end in [lo, hi] {
        if ratio_at(end).0 < FOCAL_RANK_TOL {
            found.push(end);
        }
    }
    found.sort_by(|p, q| p.partial_cmp(q).unwrap_or(core::cmp::Ordering::Equal));
    found.dedup_by(|p, q| libm::fabs(*p - *q) < 1e-7);

    let mut out = Vec::new();
    for t_guess in found {
        let (_, lj, top) = ratio_at(t_guess);
        let svd = lj.clone().svd(false, true);
        let vt = match svd.v_t {
            Some(v) => v,
            None => continue,
        };
        let mut null_cols = Vec::new();
        let mut rest_cols = Vec::new();
        for (i, s) in svd.singular_values.iter().enumerate() {
            let row: Vec<f64> = vt.row(i).iter().copied().collect();
            if *s < FOCAL_RANK_TOL * top {
                null_cols.push(row);
            } else {
                rest_cols.push(row);
            }
        }
        // rows of v_t beyond the rank of a wide matrix are null directions too
        for i in svd.singular_values.len()..vt.nrows() {
            null_cols.push(vt.row(i).iter().copied().collect());
        }
        if null_cols.is_empty() {
            continue;
        }
        let null = crate::linalg::from_columns(m, &null_cols);
        let rest = crate::linalg::from_columns(m, &rest_cols);
        // Newton on |J(t) c|² to refine the instant.
        let mut t0 = t_guess;
        for _ in 0..3 {
            let s = bundle.snapshot(t0);
            let g = metric.g_matrix(&s.x, &s.v);
            let jc = &s.j * &null;
            let jdc = &s.jdot * &null;
            let num = (jdc.transpose() * &g * &jc).trace();
            let den = (jdc.transpose() * &g * &jdc).trace();
            if den <= 0.0 {
                break;
            }
            let step = num / den;
            let (a, b) = bundle.t_span();
            let (a, b) = if a <= b { (a, b) } else { (b, a) };
            t0 = (t0 - step).clamp(a, b);
            if libm::fabs(step) < 1e-14 {
                break;
            }
        }
        let s = bundle.snapshot(t0);
        let jet = spray_jet(metric, &s.x, &s.v);
        let acc: Vec<f64> = jet.g.iter().map(|c| -2.0 * c).collect();
        let n_dot = nonlinear_connection_rate(metric, &s.x, &s.v, &s.v, &acc);
        let d1 = &s.jdot * &null;
        let d2 = -2.0 * (&jet.gv * &d1);
        let d3 = -2.0 * (&jet.gx * &d1 + &n_dot * &d1 + &jet.gv * &d2);
        out.push(Degeneracy { t: t0, null, derivs: [d1, d2, d3], rest });
    }
    Ok(out)
}

/// Builds the frame of `space_v`, a subspace of `space_w`, over `window`.
pub fn build_wilking_frame(
    space_w: &SelfAdjointSpace,
    space_v: &SelfAdjointSpace,
    window: (f64, f64),
) -> Result<WilkingFrame> {
    let bw = &*space_w.bundle;
    let bv = space_v.bundle.clone();
    let n = bv.dim();
    let (lo, hi) = if window.0 <= window.1 { window } else { (window.1, window.0) };
    let (a, b) = bv.t_span();
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    if lo < a - 1e-12 || hi > b + 1e-12 {
        return Err(Error::InvalidInput("window exceeds the integrated span"));
    }
    if bv.fields() + 1 > n {
        return Err(Error::InvalidInput("vertical space too large"));
    }
    // same geodesic, V ⊂ W, V ⟂ γ̇
    let t_ref = lo;
    let sv = bv.snapshot(t_ref);
    let sw = bw.snapshot(t_ref);
    if crate::geodesic::sup_distance(&sv.x, &sw.x) > 1e-8 || crate::geodesic::sup_distance(&sv.v, &sw.v) > 1e-8 {
        return Err(Error::InvalidInput("spaces live on different geodesics"));
    }
    let stack = |j: &DMatrix<f64>, jp: &DMatrix<f64>| {
        let mut s = DMatrix::zeros(2 * n, j.ncols());
        s.view_mut((0, 0), (n, j.ncols())).copy_from(j);
        s.view_mut((n, 0), (n, j.ncols())).copy_from(jp);
        s
    };
    let w_data = stack(&sw.j, &sw.jprime);
    let v_data = stack(&sv.j, &sv.jprime);
    let coeffs = w_data.clone().svd(true, true).solve(&v_data, 1e-12).map_err(|_| Error::InvalidInput("degenerate W"))?;
    let resid = (&w_data * coeffs - &v_data).amax();
    if resid > MEMBERSHIP_TOL * (1.0 + v_data.amax()) {
        return Err(Error::InvalidInput("vertical fields are not in the self-adjoint space"));
    }
    let g = bv.metric().g_matrix(&sv.x, &sv.v);
    let gv = &g * DVector::from_column_slice(&sv.v);
    let overlap = (sv.j.transpose() * &gv).amax().max((sv.jprime.transpose() * &gv).amax());
    if overlap > MEMBERSHIP_TOL * (1.0 + v_data.amax()) * (1.0 + gv.amax()) {
        return Err(Error::InvalidInput("vertical fields are not orthogonal to the geodesic"));
    }

    let degeneracies = find_degeneracies(&bv, lo, hi)?;
    let frame = WilkingFrame { bundle: bv, degeneracies, window: (lo, hi) };
    for t in sample_times(&frame.bundle.nodes(), lo, hi, 4, 400) {
        let r = frame.rank_ratio(t)?;
        if r < FOCAL_RANK_TOL {
            let fv = frame.at(t)?;
            let found = crate::linalg::numerical_rank(&fv.basis, FOCAL_RANK_TOL, None);
            return Err(Error::DimensionDrop { t, expected: frame.dim_v(), found });
        }
    }
    Ok(frame)
}

/// Solutions of `(D^𝔥)²X + (R X)^𝔥 − 3𝔸²X = 0` in `H(t)`, stored as chart
/// columns `X` and `Y = D^𝔥 X`.
#[derive(Clone, Debug)]
pub struct TransversalSolution {
    sol: DenseSolution,
    n: usize,
    k: usize,
    t0: f64,
}

impl TransversalSolution {
    pub fn columns(&self) -> usize {
        self.k
    }

    pub fn t_span(&self) -> (f64, f64) {
        (self.t0, self.sol.t_end())
    }

    pub fn nodes(&self) -> Vec<f64> {
        self.sol.nodes()
    }

    fn block(&self, y: &[f64], off: usize) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.n, self.k, &y[off..off + self.n * self.k])
    }

    pub fn x(&self, t: f64) -> DMatrix<f64> {
        self.block(&self.sol.eval(t), 0)
    }

    pub fn y(&self, t: f64) -> DMatrix<f64> {
        self.block(&self.sol.eval(t), self.n * self.k)
    }
}

/// Integrates from `(X(t0), D^𝔥X(t0)) = (x0[i], y0[i])` to `t1`.
pub fn integrate_transversal_jacobi(
    frame: &WilkingFrame,
    t0: f64,
    x0: &[Vec<f64>],
    y0: &[Vec<f64>],
    t1: f64,
    opts: &OdeOptions,
) -> Result<TransversalSolution> {
    let n = frame.dim();
    let k = x0.len();
    if y0.len() != k {
        return Err(Error::DimensionMismatch { expected: k, found: y0.len() });
    }
    let start = frame.at(t0)?;
    for v in x0.iter().chain(y0) {
        if v.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: v.len() });
        }
        let vv = DVector::from_column_slice(v);
        let off = (&vv - &start.p_h * &vv).amax();
        if off > MEMBERSHIP_TOL * (1.0 + vv.amax()) {
            return Err(Error::InvalidInput("initial data not in H"));
        }
    }
    let metric = frame.metric();
    let mut y_init = vec![0.0; 2 * n * k];
    for c in 0..k {
        y_init[c * n..(c + 1) * n].copy_from_slice(&x0[c]);
        y_init[n * k + c * n..n * k + (c + 1) * n].copy_from_slice(&y0[c]);
    }
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let fv = frame.at(t)?;
        let r = crate::spray::jacobi_operator_at(metric, &fv.x, &fv.v);
        let a = fv.oneill();
        let drift = &fv.p_h_dot - &fv.p_h * &fv.nl;
        let force = -&fv.p_h * &r + 3.0 * (&a * &a);
        let xm = DMatrix::from_column_slice(n, k, &y[..n * k]);
        let ym = DMatrix::from_column_slice(n, k, &y[n * k..]);
        let xd = &ym + &drift * &xm;
        let yd = &force * &xm + &drift * &ym;
        dy[..n * k].copy_from_slice(xd.as_slice());
        dy[n * k..].copy_from_slice(yd.as_slice());
        Ok(())
    };
    let sol = integrate(rhs, t0, &y_init, t1, opts)?;
    Ok(TransversalSolution { sol, n, k, t0 })
}

/// Conjugate instants of the transversal equation in `window`: zeros of
/// the solution matrix with `X(t0) = 0` and `D^𝔥X(t0)` a `g`-orthonormal
/// basis of `H(t0)`.
#[derive(Clone, Debug)]
pub struct ConjugateReport {
    pub instants: Vec<FocalInstant>,
    /// `(t, vol)` with `vol = sqrt(det(Xᵀ g X))`.
    pub trace: Vec<(f64, f64)>,
    pub solution: TransversalSolution,
}

pub fn transversal_conjugate_points(
    frame: &WilkingFrame,
    t0: f64,
    window: (f64, f64),
    opts: &OdeOptions,
) -> Result<ConjugateReport> {
    let n = frame.dim();
    let fv = frame.at(t0)?;
    let h_basis = crate::linalg::columns(&h_orthonormal_basis(&fv)?);
    let k = h_basis.len();
    if k == 0 {
        return Err(Error::InvalidInput("H is trivial"));
    }
    let zeros = vec![vec![0.0; n]; k];
    let far = if libm::fabs(window.0 - t0) > libm::fabs(window.1 - t0) { window.0 } else { window.1 };
    let sol = integrate_transversal_jacobi(frame, t0, &zeros, &h_basis, far, opts)?;
    let metric = frame.metric();
    let measure = |t: f64| -> (f64, f64, usize) {
        let (x, v) = frame.bundle.geodesic_state(t);
        let g = metric.g_matrix(&x, &v);
        let l = match cholesky(&g) {
            Some(l) => l,
            None => return (f64::NAN, 0.0, 0),
        };
        let lx = l.transpose() * sol.x(t);
        let ly = l.transpose() * sol.y(t);
        let mut stacked = DMatrix::zeros(2 * n, k);
        stacked.view_mut((0, 0), (n, k)).copy_from(&lx);
        stacked.view_mut((n, 0), (n, k)).copy_from(&ly);
        let top = singular_values(&stacked).first().copied().unwrap_or(0.0);
        let sv = singular_values(&lx);
        let vol: f64 = sv.iter().product();
        let low = sv.last().copied().unwrap_or(0.0);
        let def = sv.iter().filter(|&&s| s < FOCAL_RANK_TOL * top).count();
        (vol, if top > 0.0 { low / top } else { 0.0 }, def)
    };
    let (lo, hi) = if window.0 <= window.1 { window } else { (window.1, window.0) };
    let ts = sample_times(&sol.nodes(), lo, hi, 4, 400);
    let (found, _, max_ratio) = locate_degeneracies(&ts, |t| (f64::NAN, measure(t).1));
    if max_ratio < FOCAL_RANK_TOL {
        return Err(Error::WindowDegenerate);
    }
    let instants = found
        .into_iter()
        .filter(|t| *t > lo + 1e-6 && *t < hi - 1e-6 && libm::fabs(*t - t0) > 1e-6)
        .map(|t| FocalInstant { t, multiplicity: measure(t).2.max(1) })
        .collect();
    let trace = ts.iter().map(|&t| (t, measure(t).0)).collect();
    Ok(ConjugateReport { instants, trace, solution: sol })
}

/// A `g`-orthonormal basis of `H(t)` (columns).
pub fn h_orthonormal_basis(fv: &FrameValue) -> Result<DMatrix<f64>> {
    let n = fv.g.nrows();
    let k = n - 1 - fv.dim_v();
    // range of P_H via SVD, then g-Gram–Schmidt
    let svd = fv.p_h.clone().svd(true, false);
    let u = svd.u.ok_or(Error::InvalidInput("svd failed"))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|a, b| svd.singular_values[*b].partial_cmp(&svd.singular_values[*a]).unwrap_or(core::cmp::Ordering::Equal));
    let mut cols: Vec<DVector<f64>> = Vec::new();
    for &i in order.iter().take(k) {
        let mut c: DVector<f64> = &fv.p_h * u.column(i);
        for q in &cols {
            let proj = (q.transpose() * &fv.g * &c)[0];
            c -= q * proj;
        }
        let nrm = libm::sqrt((c.transpose() * &fv.g * &c)[0]);
        if nrm <= 0.0 {
            return Err(Error::RankDeficient { ratio: 0.0 });
        }
        cols.push(c / nrm);
    }
    Ok(DMatrix::from_columns(&cols))
}

/// `g_{γ̇}(X_i, X_i)` of column `i` at `t`.
pub fn g_norm_sq(frame: &WilkingFrame, sol: &TransversalSolution, i: usize, t: f64) -> f64 {
    let (x, v) = frame.bundle.geodesic_state(t);
    let g = frame.metric().g_matrix(&x, &v);
    let xi = sol.x(t).column(i).into_owned();
    (xi.transpose() * g * xi)[0]
}

/// The full L-Jacobi space of a fiber along the geodesic leaving it with
/// the unit basic normal over `w`, the holonomy subspace, and their frame
/// on `[0, t1]`.
pub struct SubmersionFrame {
    pub full: SelfAdjointSpace,
    pub vertical: SelfAdjointSpace,
    pub frame: WilkingFrame,
}

pub fn submersion_frame(
    metric: &FinslerMetric,
    spec: &SubmersionSpec,
    fiber: &SubmanifoldPatch,
    s0: &[f64],
    w: &[f64],
    t1: f64,
    opts: &OdeOptions,
) -> Result<SubmersionFrame> {
    let basic = BasicNormal { metric: metric.clone(), spec: spec.clone(), fiber: fiber.clone(), w: w.to_vec() };
    let lift = basic.lift_at(s0)?;
    let xi: Vec<f64> = lift.lift.iter().map(|c| c / lift.norm).collect();
    let geo = normal_geodesic(metric, fiber, s0, &xi, t1, opts)?;
    let full = l_jacobi_basis(metric, fiber, s0, &geo, opts)?;
    let (j0, j0p) = basic.holonomy_initial_data(s0)?;
    let j0p: Vec<Vec<f64>> = j0p.iter().map(|c| c.iter().map(|a| a / lift.norm).collect()).collect();
    let x0 = fiber.point_at(s0);
    let vb = integrate_bundle(metric, &x0, &xi, 0.0, t1, &j0, &j0p, opts)?;
    let vertical = SelfAdjointSpace { bundle: Arc::new(vb), label: SpaceLabel::Vertical };
    let frame = build_wilking_frame(&full, &vertical, (0.0, t1))?;
    Ok(SubmersionFrame { full, vertical, frame })
}
