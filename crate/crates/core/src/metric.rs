//! Finsler metrics and the tensors derived from them by forward-mode
//! differentiation of `q = F²/2`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::dual::{Dual, Scalar, D1, D2, D3, D4};
use crate::error::{Error, Result};
use crate::field::{MetricKind, NormField, NormLevel};

/// Relative width of the guard around the zero section.
pub const CONE_DELTA: f64 = 1e-6;

/// Chart coordinates of a point.
#[derive(Clone, Debug, PartialEq)]
pub struct ChartPoint {
    pub x: Vec<f64>,
}

impl ChartPoint {
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if x.len() < 2 {
            return Err(Error::InvalidInput("chart points need dimension at least 2"));
        }
        if x.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        Ok(ChartPoint { x })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

/// A tangent vector `v` based at `x`.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentSample {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

impl TangentSample {
    pub fn new(x: &[f64], v: &[f64]) -> Self {
        TangentSample { x: x.to_vec(), v: v.to_vec() }
    }

    pub fn base(&self) -> ChartPoint {
        ChartPoint { x: self.x.clone() }
    }
}

/// `g_v`, half the v-Hessian of `F²`.
#[derive(Clone, Debug)]
pub struct FundamentalTensor {
    pub at: TangentSample,
    pub g: DMatrix<f64>,
}

impl FundamentalTensor {
    pub fn apply(&self, a: &[f64], b: &[f64]) -> f64 {
        bilinear(&self.g, a, b)
    }
}

/// `C_v`, a quarter of the third v-derivative of `F²`, stored as
/// `c[i * n * n + j * n + k]`.
#[derive(Clone, Debug)]
pub struct CartanTensorValue {
    pub at: TangentSample,
    pub n: usize,
    pub c: Vec<f64>,
}

impl CartanTensorValue {
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.c[(i * self.n + j) * self.n + k]
    }

    pub fn apply(&self, a: &[f64], b: &[f64], w: &[f64]) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    s += self.get(i, j, k) * a[i] * b[j] * w[k];
                }
            }
        }
        s
    }

    /// Largest change under any permutation of the three slots.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let c = self.get(i, j, k);
                    for p in [
                        self.get(i, k, j),
                        self.get(j, i, k),
                        self.get(j, k, i),
                        self.get(k, i, j),
                        self.get(k, j, i),
                    ] {
                        worst = worst.max(libm::fabs(c - p));
                    }
                }
            }
        }
        worst
    }
}

/// A chart-local Finsler metric.
#[derive(Clone)]
pub struct FinslerMetric {
    field: Arc<dyn NormField>,
}

impl core::fmt::Debug for FinslerMetric {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("FinslerMetric")
            .field("dim", &self.dim())
            .field("kind", &self.kind())
            .finish()
    }
}

impl FinslerMetric {
    pub fn new<T: NormField + 'static>(field: T) -> Self {
        FinslerMetric { field: Arc::new(field) }
    }

    pub fn from_arc(field: Arc<dyn NormField>) -> Self {
        FinslerMetric { field }
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    pub fn kind(&self) -> MetricKind {
        self.field.kind()
    }

    pub fn field(&self) -> &dyn NormField {
        &*self.field
    }

    /// The reverse metric `F̃(x, v) = F(x, −v)`.
    pub fn reverse(&self) -> FinslerMetric {
        FinslerMetric { field: Arc::new(Reverse(self.field.clone())) }
    }

    /// Raw evaluation without checks.
    #[inline]
    pub fn norm(&self, x: &[f64], v: &[f64]) -> f64 {
        self.field.norm_f64(x, v)
    }

    #[inline]
    pub(crate) fn norm_at<L: NormLevel>(&self, x: &[L], v: &[L]) -> L {
        L::eval_norm(&*self.field, x, v)
    }

    fn check_input(&self, x: &[f64], v: &[f64]) -> Result<()> {
        let n = self.dim();
        if x.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: x.len() });
        }
        if v.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: v.len() });
        }
        if x.iter().chain(v).any(|c| !c.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        self.field.admissible(x)
    }

    /// `F(x, v)`; zero exactly at the zero vector.
    pub fn eval_f(&self, s: &TangentSample) -> Result<f64> {
        self.check_input(&s.x, &s.v)?;
        if s.v.iter().all(|&c| c == 0.0) {
            return Ok(0.0);
        }
        let f = self.norm(&s.x, &s.v);
        if !f.is_finite() {
            return Err(Error::NonFiniteInput);
        }
        Ok(f)
    }

    /// Checks that `v` is far enough from the zero section for derivatives.
    pub fn cone_guard(&self, x: &[f64], v: &[f64]) -> Result<f64> {
        self.check_input(x, v)?;
        let f = self.norm(x, v);
        let scale = v.iter().fold(1.0f64, |m, c| m.max(libm::fabs(*c)));
        let guard = CONE_DELTA * scale;
        if !(f > guard) {
            return Err(Error::ConeViolation { norm: f, guard });
        }
        Ok(f)
    }

    /// `g_v` from the exact second v-derivatives of `F²/2`.
    pub fn fundamental_tensor(&self, s: &TangentSample) -> Result<FundamentalTensor> {
        self.cone_guard(&s.x, &s.v)?;
        let g = self.g_matrix(&s.x, &s.v);
        if g.iter().any(|c| !c.is_finite()) {
            return Err(Error::DegenerateTensor { min_eigenvalue: f64::NAN });
        }
        let min_eig = min_eigenvalue(&g);
        if !(min_eig > 0.0) {
            return Err(Error::DegenerateTensor { min_eigenvalue: min_eig });
        }
        Ok(FundamentalTensor { at: s.clone(), g })
    }

    /// Unchecked `g_v` as a symmetric matrix.
    pub fn g_matrix(&self, x: &[f64], v: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_row_slice(n, n, &g_generic::<f64>(self, x, v))
    }

    /// `C_v` with every entry evaluated independently.
    pub fn cartan_tensor(&self, s: &TangentSample) -> Result<CartanTensorValue> {
        self.cone_guard(&s.x, &s.v)?;
        let n = self.dim();
        let zero = vec![0.0; n];
        let mut c = vec![0.0; n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let q = q3(self, &s.x, &s.v, [&zero, &zero, &zero], [&unit(n, i), &unit(n, j), &unit(n, k)]);
                    c[(i * n + j) * n + k] = 0.5 * q.coeff(0b111);
                }
            }
        }
        Ok(CartanTensorValue { at: s.clone(), n, c })
    }

    /// `∂g_ij/∂x^k` stored as `[(i * n + j) * n + k]`.
    pub fn g_x_derivative(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let zero = vec![0.0; n];
        let mut out = vec![0.0; n * n * n];
        for i in 0..n {
            for j in i..n {
                for k in 0..n {
                    let q = q3(self, x, v, [&zero, &zero, &unit(n, k)], [&unit(n, i), &unit(n, j), &zero]);
                    let d = q.coeff(0b111);
                    out[(i * n + j) * n + k] = d;
                    out[(j * n + i) * n + k] = d;
                }
            }
        }
        out
    }

    /// Rate of change of `g_{v(t)}(x(t))` along `(ẋ, v̇)`.
    pub fn g_rate(&self, x: &[f64], v: &[f64], xdot: &[f64], vdot: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        let zero = vec![0.0; n];
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let q = q3(self, x, v, [&zero, &zero, xdot], [&unit(n, i), &unit(n, j), vdot]);
                let d = q.coeff(0b111);
                out[(i, j)] = d;
                out[(j, i)] = d;
            }
        }
        out
    }

    /// v-gradient of `F²/2`, which equals `g_v(v, ·)`.
    pub fn legendre(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let vv: Vec<D1> = (0..n).map(|j| D1::new(v[j], if i == j { 1.0 } else { 0.0 })).collect();
                let xx: Vec<D1> = x.iter().map(|&c| D1::cst(c)).collect();
                let f = self.norm_at(&xx, &vv);
                (f * f).scale(0.5).eps
            })
            .collect()
    }

    /// `∂/∂x (∂q/∂v) · w`, the x-variation of [`Self::legendre`].
    pub fn legendre_x_derivative(&self, x: &[f64], v: &[f64], w: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let zero = vec![0.0; n];
        (0..n).map(|l| q2::<f64>(self, x, v, [&zero, w], [&unit(n, l), &zero]).eps.eps).collect()
    }

    /// x-gradient of `F`.
    pub fn norm_x_gradient(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let xx: Vec<D1> = (0..n).map(|j| D1::new(x[j], if i == j { 1.0 } else { 0.0 })).collect();
                let vv: Vec<D1> = v.iter().map(|&c| D1::cst(c)).collect();
                self.norm_at(&xx, &vv).eps
            })
            .collect()
    }
}

pub(crate) fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    e
}

pub(crate) fn bilinear(g: &DMatrix<f64>, a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += g[(i, j)] * a[i] * b[j];
        }
    }
    s
}

pub(crate) fn min_eigenvalue(g: &DMatrix<f64>) -> f64 {
    let sym = (g + g.transpose()) * 0.5;
    sym.symmetric_eigenvalues().iter().fold(f64::INFINITY, |m, &e| m.min(e))
}

/// Builds `Dual<Dual<S>>` coordinates moving along `inner` at the first new
/// level and `outer` at the second.
pub(crate) fn lift2<S: Scalar>(base: &[S], inner: &[S], outer: &[S]) -> Vec<Dual<Dual<S>>> {
    (0..base.len())
        .map(|i| Dual::new(Dual::new(base[i], inner[i]), Dual::new(outer[i], S::zero())))
        .collect()
}

/// `F²/2` with two seeded levels on top of `S`.
pub(crate) fn q2<S>(
    m: &FinslerMetric,
    x: &[S],
    v: &[S],
    x_seeds: [&[S]; 2],
    v_seeds: [&[S]; 2],
) -> Dual<Dual<S>>
where
    S: Scalar,
    Dual<Dual<S>>: NormLevel,
{
    let xx = lift2(x, x_seeds[0], x_seeds[1]);
    let vv = lift2(v, v_seeds[0], v_seeds[1]);
    let f = m.norm_at(&xx, &vv);
    (f * f).scale(0.5)
}

/// `F²/2` with three seeded levels on plain coordinates.
pub(crate) fn q3(m: &FinslerMetric, x: &[f64], v: &[f64], x_seeds: [&[f64]; 3], v_seeds: [&[f64]; 3]) -> D3 {
    let lift = |b: &[f64], s: [&[f64]; 3]| -> Vec<D3> {
        (0..b.len())
            .map(|i| {
                Dual::new(
                    Dual::new(Dual::new(b[i], s[0][i]), Dual::new(s[1][i], 0.0)),
                    D2::cst(s[2][i]),
                )
            })
            .collect()
    };
    let f = m.norm_at(&lift(x, x_seeds), &lift(v, v_seeds));
    (f * f).scale(0.5)
}

/// `g_v` (row-major) with entries in an arbitrary scalar type, for nested
/// derivatives.
pub(crate) fn g_generic<S>(m: &FinslerMetric, x: &[S], v: &[S]) -> Vec<S>
where
    S: Scalar,
    Dual<Dual<S>>: NormLevel,
{
    let n = m.dim();
    let zero = vec![S::zero(); n];
    let units: Vec<Vec<S>> = (0..n).map(|i| unit(n, i).iter().map(|&c| S::cst(c)).collect()).collect();
    let mut g = vec![S::zero(); n * n];
    for i in 0..n {
        for j in i..n {
            let q = q2(m, x, v, [&zero, &zero], [&units[i], &units[j]]);
            g[i * n + j] = q.eps.eps;
            g[j * n + i] = q.eps.eps;
        }
    }
    g
}

struct Reverse(Arc<dyn NormField>);

macro_rules! reversed {
    ($name:ident, $t:ty) => {
        fn $name(&self, x: &[$t], v: &[$t]) -> $t {
            let neg: Vec<$t> = v.iter().map(|c| -*c).collect();
            self.0.$name(x, &neg)
        }
    };
}

impl NormField for Reverse {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn kind(&self) -> MetricKind {
        self.0.kind()
    }
    fn admissible(&self, x: &[f64]) -> Result<()> {
        self.0.admissible(x)
    }
    reversed!(norm_f64, f64);
    reversed!(norm_d1, D1);
    reversed!(norm_d2, D2);
    reversed!(norm_d3, D3);
    reversed!(norm_d4, D4);
}

/// Tolerances used by [`validate_metric`].
pub const HOMOGENEITY_TOL: f64 = 1e-12;
pub const CARTAN_SYMMETRY_TOL: f64 = 1e-10;
pub const EULER_TOL: f64 = 1e-10;

/// Worst-case axiom residuals over a sample set.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub samples: usize,
    /// max |F(λv) − λF(v)| / (λF(v)) over λ ∈ {0.5, 2, 3.7}.
    pub homogeneity_defect: f64,
    /// Smallest eigenvalue of `g_v` divided by its largest.
    pub definiteness_margin: f64,
    pub cartan_symmetry_defect: f64,
    /// max |g_v(v, v) − F²| / F².
    pub euler_g_defect: f64,
    /// max |C_v(v, ·, ·)| normalized by the Cartan scale.
    pub euler_cartan_defect: f64,
    /// Samples where evaluation failed outright (non-finite values, guard).
    pub failures: usize,
}

impl ValidationReport {
    pub fn homogeneity_ok(&self) -> bool {
        self.homogeneity_defect < HOMOGENEITY_TOL
    }
    pub fn definiteness_ok(&self) -> bool {
        self.definiteness_margin > 0.0 && self.failures == 0
    }
    pub fn cartan_ok(&self) -> bool {
        self.cartan_symmetry_defect < CARTAN_SYMMETRY_TOL
    }
    pub fn euler_ok(&self) -> bool {
        self.euler_g_defect < EULER_TOL && self.euler_cartan_defect < EULER_TOL
    }
    pub fn passed(&self) -> bool {
        self.homogeneity_ok() && self.definiteness_ok() && self.cartan_ok() && self.euler_ok()
    }
}

/// Checks the metric axioms on every sample; failures become report entries.
pub fn validate_metric(metric: &FinslerMetric, samples: &[TangentSample]) -> ValidationReport {
    let mut r = ValidationReport {
        samples: samples.len(),
        homogeneity_defect: 0.0,
        definiteness_margin: f64::INFINITY,
        cartan_symmetry_defect: 0.0,
        euler_g_defect: 0.0,
        euler_cartan_defect: 0.0,
        failures: 0,
    };
    let worse = |acc: &mut f64, d: f64| {
        if d.is_nan() || d > *acc {
            *acc = if d.is_nan() { f64::INFINITY } else { d };
        }
    };
    for s in samples {
        let f = match metric.eval_f(s) {
            Ok(f) if f.is_finite() && f > 0.0 => f,
            _ => {
                r.failures += 1;
                r.definiteness_margin = f64::NEG_INFINITY;
                continue;
            }
        };
        for lambda in [0.5, 2.0, 3.7] {
            let scaled: Vec<f64> = s.v.iter().map(|c| c * lambda).collect();
            let fl = metric.norm(&s.x, &scaled);
            worse(&mut r.homogeneity_defect, libm::fabs(fl - lambda * f) / (lambda * f));
        }
        if metric.cone_guard(&s.x, &s.v).is_err() {
            r.failures += 1;
            continue;
        }
        let g = metric.g_matrix(&s.x, &s.v);
        if g.iter().any(|c| !c.is_finite()) {
            r.failures += 1;
            r.definiteness_margin = f64::NEG_INFINITY;
            continue;
        }
        let eig = ((&g + g.transpose()) * 0.5).symmetric_eigenvalues();
        let lo = eig.iter().fold(f64::INFINITY, |m, &e| m.min(e));
        let hi = eig.iter().fold(f64::NEG_INFINITY, |m, &e| m.max(e));
        let margin = if hi > 0.0 { lo / hi } else { lo };
        if margin.is_nan() || margin < r.definiteness_margin {
            r.definiteness_margin = if margin.is_nan() { f64::NEG_INFINITY } else { margin };
        }
        worse(&mut r.euler_g_defect, libm::fabs(bilinear(&g, &s.v, &s.v) - f * f) / (f * f));

        let c = match metric.cartan_tensor(s) {
            Ok(c) => c,
            Err(_) => {
                r.failures += 1;
                continue;
            }
        };
        let cmax = c.c.iter().fold(0.0f64, |m, x| m.max(libm::fabs(*x)));
        let vmax = s.v.iter().fold(0.0f64, |m, x| m.max(libm::fabs(*x)));
        let scale = (cmax * vmax).max(1.0);
        worse(&mut r.cartan_symmetry_defect, c.symmetry_defect() / cmax.max(1.0));
        let n = metric.dim();
        for j in 0..n {
            for k in 0..n {
                let contracted: f64 = (0..n).map(|i| c.get(i, j, k) * s.v[i]).sum();
                worse(&mut r.euler_cartan_defect, libm::fabs(contracted) / scale);
            }
        }
    }
    r
}
