//! Randers metrics from Zermelo navigation data `(h, W)`.
//!
//! The unit ball of `F` at `x` is the `h`-unit ball translated by `W(x)`,
//! i.e. `F(v)` is the unique positive root of `h(v/F − W, v/F − W) = 1`,
//! which in closed form reads
//! `F(v) = (−h(v, W) + sqrt(h(v, W)² + α h(v, v))) / α` with
//! `α = 1 − h(W, W)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::dual::Scalar;
use crate::error::{Error, Result};
use crate::field::{GenericNorm, MetricKind};
use crate::metric::FinslerMetric;

/// Admissibility margin for `h(W, W) < 1`.
pub const WIND_MARGIN: f64 = 1e-9;

/// Riemannian metric plus wind, generic over the scalar type.
pub trait ZermeloField: Send + Sync {
    fn dim(&self) -> usize;
    /// `h(x)` row-major.
    fn h<S: Scalar>(&self, x: &[S]) -> Vec<S>;
    fn wind<S: Scalar>(&self, x: &[S]) -> Vec<S>;
    /// True when the wind vanishes identically.
    fn windless(&self) -> bool {
        false
    }
}

/// Built-in Riemannian backgrounds.
#[derive(Clone, Debug, PartialEq)]
pub enum HField {
    Euclidean(usize),
    /// Constant symmetric positive-definite matrix, row-major.
    Constant { n: usize, h: Vec<f64> },
    /// Round unit sphere in `(θ, φ)`: `dθ² + sin²θ dφ²`.
    SphereChart,
    /// `dθ² + sin²θ dφ² + dz²` on `(θ, φ, z)`.
    SphereTimesLine,
    /// `diag(1, 1 + x₁², 1)` on R³.
    Warped,
}

impl HField {
    pub fn dim(&self) -> usize {
        match self {
            HField::Euclidean(n) => *n,
            HField::Constant { n, .. } => *n,
            HField::SphereChart => 2,
            HField::SphereTimesLine | HField::Warped => 3,
        }
    }

    pub fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let n = self.dim();
        let mut h = vec![S::zero(); n * n];
        match self {
            HField::Euclidean(_) => {
                for i in 0..n {
                    h[i * n + i] = S::one();
                }
            }
            HField::Constant { h: c, .. } => {
                for (dst, src) in h.iter_mut().zip(c) {
                    *dst = S::cst(*src);
                }
            }
            HField::SphereChart | HField::SphereTimesLine => {
                let s = x[0].sin();
                h[0] = S::one();
                h[n + 1] = s * s;
                if n == 3 {
                    h[8] = S::one();
                }
            }
            HField::Warped => {
                h[0] = S::one();
                h[4] = S::one() + x[0] * x[0];
                h[8] = S::one();
            }
        }
        h
    }
}

/// Built-in wind fields.
#[derive(Clone, Debug, PartialEq)]
pub enum Wind {
    Zero(usize),
    Constant(Vec<f64>),
    /// `(1/2, 0, (sin²x₁ + 1)/4)` on R³.
    SineShear,
    /// Rigid rotation about the x₃-axis, `ω(−x₂, x₁, 0)`.
    Rotation { omega: f64 },
}

impl Wind {
    pub fn dim(&self) -> usize {
        match self {
            Wind::Zero(n) => *n,
            Wind::Constant(w) => w.len(),
            Wind::SineShear | Wind::Rotation { .. } => 3,
        }
    }

    pub fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        match self {
            Wind::Zero(n) => vec![S::zero(); *n],
            Wind::Constant(w) => w.iter().map(|&c| S::cst(c)).collect(),
            Wind::SineShear => {
                let s = x[0].sin();
                vec![S::cst(0.5), S::zero(), (s * s + S::one()).scale(0.25)]
            }
            Wind::Rotation { omega } => {
                vec![-x[1].scale(*omega), x[0].scale(*omega), S::zero()]
            }
        }
    }
}

/// Zermelo data assembled from built-in pieces.
#[derive(Clone, Debug, PartialEq)]
pub struct ZermeloData {
    pub h: HField,
    pub wind: Wind,
}

impl ZermeloData {
    pub fn new(h: HField, wind: Wind) -> Result<Self> {
        if h.dim() != wind.dim() {
            return Err(Error::DimensionMismatch { expected: h.dim(), found: wind.dim() });
        }
        Ok(ZermeloData { h, wind })
    }

    pub fn euclidean(n: usize) -> Self {
        ZermeloData { h: HField::Euclidean(n), wind: Wind::Zero(n) }
    }
}

impl ZermeloField for ZermeloData {
    fn dim(&self) -> usize {
        self.h.dim()
    }
    fn h<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        self.h.eval(x)
    }
    fn wind<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        self.wind.eval(x)
    }
    fn windless(&self) -> bool {
        match &self.wind {
            Wind::Zero(_) => true,
            Wind::Constant(w) => w.iter().all(|c| *c == 0.0),
            Wind::Rotation { omega } => *omega == 0.0,
            Wind::SineShear => false,
        }
    }
}

fn quad<S: Scalar>(h: &[S], a: &[S], b: &[S]) -> S {
    let n = a.len();
    let mut s = S::zero();
    for i in 0..n {
        let mut row = S::zero();
        for j in 0..n {
            row += h[i * n + j] * b[j];
        }
        s += a[i] * row;
    }
    s
}

/// `h(W, W)` at a point.
pub fn wind_norm_sq<Z: ZermeloField>(z: &Z, x: &[f64]) -> f64 {
    let h = z.h(x);
    let w = z.wind(x);
    quad(&h, &w, &w)
}

/// Point-wise `h` and `W` behind a trait object.
pub trait ZermeloSample: Send + Sync + core::fmt::Debug {
    fn sample_dim(&self) -> usize;
    fn h_at(&self, x: &[f64]) -> Vec<f64>;
    fn wind_at(&self, x: &[f64]) -> Vec<f64>;
}

impl<Z: ZermeloField + core::fmt::Debug> ZermeloSample for Z {
    fn sample_dim(&self) -> usize {
        self.dim()
    }
    fn h_at(&self, x: &[f64]) -> Vec<f64> {
        self.h(x)
    }
    fn wind_at(&self, x: &[f64]) -> Vec<f64> {
        self.wind(x)
    }
}

/// `h(v/F − W, v/F − W) − 1`, which vanishes for the Randers norm of the
/// data.
pub fn zermelo_residual(z: &dyn ZermeloSample, x: &[f64], v: &[f64], f: f64) -> f64 {
    let h = z.h_at(x);
    let w = z.wind_at(x);
    let u: Vec<f64> = v.iter().zip(&w).map(|(a, b)| a / f - b).collect();
    quad(&h, &u, &u) - 1.0
}

/// The Randers norm generated by Zermelo data.
#[derive(Clone, Debug)]
pub struct ZermeloMetric<Z> {
    pub data: Z,
}

impl<Z: ZermeloField> ZermeloMetric<Z> {
    /// Wraps the data without checking the wind bound, so invalid data can
    /// be fed to [`crate::metric::validate_metric`].
    pub fn new_unchecked(data: Z) -> Self {
        ZermeloMetric { data }
    }
}

impl<Z: ZermeloField> GenericNorm for ZermeloMetric<Z> {
    fn dim(&self) -> usize {
        self.data.dim()
    }

    fn norm<S: Scalar>(&self, x: &[S], v: &[S]) -> S {
        let h = self.data.h(x);
        if self.data.windless() {
            return quad(&h, v, v).sqrt();
        }
        let w = self.data.wind(x);
        let hvw = quad(&h, v, &w);
        let hvv = quad(&h, v, v);
        let alpha = S::one() - quad(&h, &w, &w);
        ((hvw * hvw + alpha * hvv).sqrt() - hvw) / alpha
    }

    fn kind(&self) -> MetricKind {
        if self.data.windless() {
            MetricKind::Riemannian
        } else {
            MetricKind::Randers
        }
    }

    fn admissible(&self, x: &[f64]) -> Result<()> {
        if self.data.windless() {
            return Ok(());
        }
        let s = wind_norm_sq(&self.data, x);
        if !(s < 1.0 - WIND_MARGIN) {
            return Err(Error::WindTooStrong { wind_norm_sq: s });
        }
        Ok(())
    }
}

/// Builds the Randers metric of `data`, rejecting winds with
/// `h(W, W) ≥ 1 − 1e-9` at any of the `probes`. Windless data has no bound
/// to check.
pub fn randers_from_zermelo<Z: ZermeloField + 'static>(data: Z, probes: &[Vec<f64>]) -> Result<FinslerMetric> {
    let n = data.dim();
    let origin = vec![0.0; n];
    for p in core::iter::once(&origin).chain(probes) {
        if p.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: p.len() });
        }
        if data.windless() {
            continue;
        }
        let s = wind_norm_sq(&data, p);
        if !(s < 1.0 - WIND_MARGIN) {
            return Err(Error::WindTooStrong { wind_norm_sq: s });
        }
    }
    Ok(FinslerMetric::new(ZermeloMetric { data }))
}

/// Probe grid with `per_axis` points per coordinate over a box.
pub fn box_probes(lo: &[f64], hi: &[f64], per_axis: usize) -> Vec<Vec<f64>> {
    let n = lo.len();
    let per_axis = per_axis.max(2);
    let total = per_axis.pow(n as u32);
    (0..total)
        .map(|mut idx| {
            (0..n)
                .map(|d| {
                    let i = idx % per_axis;
                    idx /= per_axis;
                    lo[d] + (hi[d] - lo[d]) * i as f64 / (per_axis - 1) as f64
                })
                .collect()
        })
        .collect()
}
