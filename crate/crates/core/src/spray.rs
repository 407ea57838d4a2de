//! Spray coefficients, nonlinear connection, Chern–Christoffel symbols and
//! the Jacobi operator, all by exact forward-mode differentiation.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::dual::{Dual, Scalar, D1, D2};
use crate::error::{Error, Result};
use crate::field::NormLevel;
use crate::linalg::solve_generic;
use crate::metric::{lift2, q2, unit, FinslerMetric, TangentSample};

/// Largest condition number of `g_v` accepted by the checked entry points.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Clone, Debug)]
pub struct SprayCoefficients {
    pub at: TangentSample,
    pub g: Vec<f64>,
}

/// `Γ^k_ij(v)` stored as `gamma[(k * n + i) * n + j]`.
#[derive(Clone, Debug)]
pub struct ChristoffelValue {
    pub at: TangentSample,
    pub n: usize,
    pub gamma: Vec<f64>,
}

impl ChristoffelValue {
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.gamma[(k * self.n + i) * self.n + j]
    }

    /// `Γ^k_ij a^i b^j`.
    pub fn contract(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|k| {
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        s += self.get(k, i, j) * a[i] * b[j];
                    }
                }
                s
            })
            .collect()
    }
}

/// `G^i = ½ g^{il}(∂²q/∂x^k∂v^l v^k − ∂q/∂x^l)` with `q = F²/2`, evaluated in
/// any scalar type whose double lift is supported.
pub(crate) fn spray_generic<S>(m: &FinslerMetric, x: &[S], v: &[S]) -> Vec<S>
where
    S: Scalar,
    Dual<Dual<S>>: NormLevel,
{
    let n = m.dim();
    let zero = vec![S::zero(); n];
    let mut g = crate::metric::g_generic(m, x, v);
    let mut rhs = vec![S::zero(); n];
    for l in 0..n {
        let el: Vec<S> = unit(n, l).iter().map(|&c| S::cst(c)).collect();
        let mixed = q2(m, x, v, [v, &zero], [&zero, &el]).eps.eps;
        let dx = q2(m, x, v, [&zero, &el], [&zero, &zero]).eps.re;
        rhs[l] = mixed - dx;
    }
    if solve_generic(&mut g, &mut rhs, n).is_none() {
        return vec![S::cst(f64::NAN); n];
    }
    rhs.into_iter().map(|c| c.scale(0.5)).collect()
}

/// Unchecked spray coefficients.
pub fn spray(m: &FinslerMetric, x: &[f64], v: &[f64]) -> Vec<f64> {
    spray_generic::<f64>(m, x, v)
}

/// Geodesic acceleration `−2G(x, v)`.
pub fn geodesic_acceleration(m: &FinslerMetric, x: &[f64], v: &[f64]) -> Vec<f64> {
    spray(m, x, v).into_iter().map(|c| -2.0 * c).collect()
}

/// Checked spray coefficients.
pub fn spray_coefficients(m: &FinslerMetric, s: &TangentSample) -> Result<SprayCoefficients> {
    check_conditioning(m, &s.x, &s.v)?;
    let g = spray(m, &s.x, &s.v);
    if g.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    Ok(SprayCoefficients { at: s.clone(), g })
}

pub(crate) fn check_conditioning(m: &FinslerMetric, x: &[f64], v: &[f64]) -> Result<()> {
    m.cone_guard(x, v)?;
    let g = m.g_matrix(x, v);
    let eig = ((&g + g.transpose()) * 0.5).symmetric_eigenvalues();
    let lo = eig.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let hi = eig.iter().fold(0.0f64, |a, &b| a.max(b));
    if !(lo > 0.0) {
        return Err(Error::DegenerateTensor { min_eigenvalue: lo });
    }
    if hi / lo > MAX_CONDITION {
        return Err(Error::SingularTensor { condition: hi / lo });
    }
    Ok(())
}

fn lift1(base: &[f64], seed: &[f64]) -> Vec<D1> {
    base.iter().zip(seed).map(|(&b, &s)| D1::new(b, s)).collect()
}

fn lift2f(base: &[f64], inner: &[f64], outer: &[f64]) -> Vec<D2> {
    lift2(base, inner, outer)
}

/// First derivatives of the spray: `(G, ∂G/∂x, ∂G/∂v)` with
/// `gx[(i, k)] = ∂G^i/∂x^k`.
#[derive(Clone, Debug)]
pub struct SprayJet {
    pub g: Vec<f64>,
    pub gx: DMatrix<f64>,
    pub gv: DMatrix<f64>,
}

pub fn spray_jet(m: &FinslerMetric, x: &[f64], v: &[f64]) -> SprayJet {
    let n = m.dim();
    let zero = vec![0.0; n];
    let mut gx = DMatrix::zeros(n, n);
    let mut gv = DMatrix::zeros(n, n);
    let mut g = vec![0.0; n];
    for k in 0..n {
        let ek = unit(n, k);
        let sx = spray_generic::<D1>(m, &lift1(x, &ek), &lift1(v, &zero));
        let sv = spray_generic::<D1>(m, &lift1(x, &zero), &lift1(v, &ek));
        for i in 0..n {
            gx[(i, k)] = sx[i].eps;
            gv[(i, k)] = sv[i].eps;
            g[i] = sx[i].re;
        }
    }
    SprayJet { g, gx, gv }
}

/// Nonlinear connection `N^i_k = ∂G^i/∂v^k`.
pub fn nonlinear_connection(m: &FinslerMetric, x: &[f64], v: &[f64]) -> DMatrix<f64> {
    let n = m.dim();
    let zero = vec![0.0; n];
    let mut nl = DMatrix::zeros(n, n);
    for k in 0..n {
        let sv = spray_generic::<D1>(m, &lift1(x, &zero), &lift1(v, &unit(n, k)));
        for i in 0..n {
            nl[(i, k)] = sv[i].eps;
        }
    }
    nl
}

/// Time derivative of `N(x(t), v(t))` along `(ẋ, v̇)`.
pub fn nonlinear_connection_rate(m: &FinslerMetric, x: &[f64], v: &[f64], xdot: &[f64], vdot: &[f64]) -> DMatrix<f64> {
    let n = m.dim();
    let zero = vec![0.0; n];
    let mut out = DMatrix::zeros(n, n);
    for k in 0..n {
        let s = spray_generic::<D2>(m, &lift2f(x, &zero, xdot), &lift2f(v, &unit(n, k), vdot));
        for i in 0..n {
            out[(i, k)] = s[i].coeff(0b11);
        }
    }
    out
}

/// Jacobi operator `w ↦ R_v(w)` from the curvature of the spray:
/// `R^i_k = 2∂G^i/∂x^k − v^j∂²G^i/∂x^j∂v^k + 2G^j∂²G^i/∂v^j∂v^k − N^i_j N^j_k`.
pub fn jacobi_operator_at(m: &FinslerMetric, x: &[f64], v: &[f64]) -> DMatrix<f64> {
    let n = m.dim();
    let zero = vec![0.0; n];
    let jet = spray_jet(m, x, v);
    let mut r = DMatrix::zeros(n, n);
    for k in 0..n {
        let ek = unit(n, k);
        let xv = spray_generic::<D2>(m, &lift2f(x, v, &zero), &lift2f(v, &zero, &ek));
        let vv = spray_generic::<D2>(m, &lift2f(x, &zero, &zero), &lift2f(v, &jet.g, &ek));
        for i in 0..n {
            r[(i, k)] = 2.0 * jet.gx[(i, k)] - xv[i].coeff(0b11) + 2.0 * vv[i].coeff(0b11);
        }
    }
    r - &jet.gv * &jet.gv
}

/// Chern–Christoffel symbols
/// `Γ^l_jk = ½ g^{ls}(δ_k g_sj + δ_j g_sk − δ_s g_jk)` with
/// `δ_i = ∂_{x^i} − N^m_i ∂_{v^m}`.
pub fn christoffel(m: &FinslerMetric, s: &TangentSample) -> Result<ChristoffelValue> {
    check_conditioning(m, &s.x, &s.v)?;
    Ok(christoffel_unchecked(m, &s.x, &s.v))
}

pub fn christoffel_unchecked(m: &FinslerMetric, x: &[f64], v: &[f64]) -> ChristoffelValue {
    let n = m.dim();
    let g = m.g_matrix(x, v);
    let dgdx = m.g_x_derivative(x, v);
    let cartan = m
        .cartan_tensor(&TangentSample::new(x, v))
        .map(|c| c.c)
        .unwrap_or_else(|_| vec![f64::NAN; n * n * n]);
    let nl = nonlinear_connection(m, x, v);
    // δ_k g_ab
    let delta = |a: usize, b: usize, k: usize| -> f64 {
        let mut d = dgdx[(a * n + b) * n + k];
        for mm in 0..n {
            d -= nl[(mm, k)] * 2.0 * cartan[(a * n + b) * n + mm];
        }
        d
    };
    let ginv = g.clone().try_inverse().unwrap_or_else(|| DMatrix::from_element(n, n, f64::NAN));
    let mut lower = vec![0.0; n * n * n];
    for s_ in 0..n {
        for j in 0..n {
            for k in j..n {
                let val = 0.5 * (delta(s_, j, k) + delta(s_, k, j) - delta(j, k, s_));
                lower[(s_ * n + j) * n + k] = val;
                lower[(s_ * n + k) * n + j] = val;
            }
        }
    }
    let mut gamma = vec![0.0; n * n * n];
    for l in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut acc = 0.0;
                for s_ in 0..n {
                    acc += ginv[(l, s_)] * lower[(s_ * n + j) * n + k];
                }
                gamma[(l * n + j) * n + k] = acc;
            }
        }
    }
    ChristoffelValue { at: TangentSample::new(x, v), n, gamma }
}
