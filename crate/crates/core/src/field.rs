//! Object-safe erasure of generically written fields.
//!
//! Metrics and maps are authored once, generic over [`Scalar`], through
//! [`GenericNorm`] and [`GenericMap`]. The blanket impls monomorphize them at
//! every dual depth the kernels need so they can live behind `dyn`.

use alloc::vec::Vec;

use crate::dual::{Scalar, D1, D2, D3, D4};
use crate::error::Result;

/// Broad family of a metric, used for reporting and shortcuts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricKind {
    Riemannian,
    Randers,
    Custom,
}

/// A norm field `F(x, v)` written once for every scalar type.
pub trait GenericNorm: Send + Sync {
    fn dim(&self) -> usize;
    fn norm<S: Scalar>(&self, x: &[S], v: &[S]) -> S;
    fn kind(&self) -> MetricKind {
        MetricKind::Custom
    }
    /// Point-wise admissibility (e.g. the Zermelo wind bound).
    fn admissible(&self, _x: &[f64]) -> Result<()> {
        Ok(())
    }
}

/// Type-erased norm field evaluable at every supported dual depth.
pub trait NormField: Send + Sync {
    fn dim(&self) -> usize;
    fn kind(&self) -> MetricKind;
    fn admissible(&self, x: &[f64]) -> Result<()>;
    fn norm_f64(&self, x: &[f64], v: &[f64]) -> f64;
    fn norm_d1(&self, x: &[D1], v: &[D1]) -> D1;
    fn norm_d2(&self, x: &[D2], v: &[D2]) -> D2;
    fn norm_d3(&self, x: &[D3], v: &[D3]) -> D3;
    fn norm_d4(&self, x: &[D4], v: &[D4]) -> D4;
}

impl<T: GenericNorm> NormField for T {
    fn dim(&self) -> usize {
        GenericNorm::dim(self)
    }
    fn kind(&self) -> MetricKind {
        GenericNorm::kind(self)
    }
    fn admissible(&self, x: &[f64]) -> Result<()> {
        GenericNorm::admissible(self, x)
    }
    fn norm_f64(&self, x: &[f64], v: &[f64]) -> f64 {
        self.norm(x, v)
    }
    fn norm_d1(&self, x: &[D1], v: &[D1]) -> D1 {
        self.norm(x, v)
    }
    fn norm_d2(&self, x: &[D2], v: &[D2]) -> D2 {
        self.norm(x, v)
    }
    fn norm_d3(&self, x: &[D3], v: &[D3]) -> D3 {
        self.norm(x, v)
    }
    fn norm_d4(&self, x: &[D4], v: &[D4]) -> D4 {
        self.norm(x, v)
    }
}

/// A smooth map `R^m → R^k` written once for every scalar type.
pub trait GenericMap: Send + Sync {
    fn in_dim(&self) -> usize;
    fn out_dim(&self) -> usize;
    fn map<S: Scalar>(&self, x: &[S]) -> Vec<S>;
}

/// Type-erased map, evaluable up to second derivatives.
pub trait MapField: Send + Sync {
    fn in_dim(&self) -> usize;
    fn out_dim(&self) -> usize;
    fn map_f64(&self, x: &[f64]) -> Vec<f64>;
    fn map_d1(&self, x: &[D1]) -> Vec<D1>;
    fn map_d2(&self, x: &[D2]) -> Vec<D2>;
}

impl<T: GenericMap> MapField for T {
    fn in_dim(&self) -> usize {
        GenericMap::in_dim(self)
    }
    fn out_dim(&self) -> usize {
        GenericMap::out_dim(self)
    }
    fn map_f64(&self, x: &[f64]) -> Vec<f64> {
        self.map(x)
    }
    fn map_d1(&self, x: &[D1]) -> Vec<D1> {
        self.map(x)
    }
    fn map_d2(&self, x: &[D2]) -> Vec<D2> {
        self.map(x)
    }
}

/// Scalar types at which an erased [`NormField`] can be evaluated.
pub trait NormLevel: Scalar {
    fn eval_norm(f: &dyn NormField, x: &[Self], v: &[Self]) -> Self;
}

impl NormLevel for f64 {
    fn eval_norm(f: &dyn NormField, x: &[Self], v: &[Self]) -> Self {
        f.norm_f64(x, v)
    }
}
impl NormLevel for D1 {
    fn eval_norm(f: &dyn NormField, x: &[Self], v: &[Self]) -> Self {
        f.norm_d1(x, v)
    }
}
impl NormLevel for D2 {
    fn eval_norm(f: &dyn NormField, x: &[Self], v: &[Self]) -> Self {
        f.norm_d2(x, v)
    }
}
impl NormLevel for D3 {
    fn eval_norm(f: &dyn NormField, x: &[Self], v: &[Self]) -> Self {
        f.norm_d3(x, v)
    }
}
impl NormLevel for D4 {
    fn eval_norm(f: &dyn NormField, x: &[Self], v: &[Self]) -> Self {
        f.norm_d4(x, v)
    }
}

/// Scalar types at which an erased [`MapField`] can be evaluated.
pub trait MapLevel: Scalar {
    fn eval_map(f: &dyn MapField, x: &[Self]) -> Vec<Self>;
}

impl MapLevel for f64 {
    fn eval_map(f: &dyn MapField, x: &[Self]) -> Vec<Self> {
        f.map_f64(x)
    }
}
impl MapLevel for D1 {
    fn eval_map(f: &dyn MapField, x: &[Self]) -> Vec<Self> {
        f.map_d1(x)
    }
}
impl MapLevel for D2 {
    fn eval_map(f: &dyn MapField, x: &[Self]) -> Vec<Self> {
        f.map_d2(x)
    }
}

/// Jacobian `∂f/∂x` (rows = outputs) of an erased map by forward mode.
pub fn map_jacobian(f: &dyn MapField, x: &[f64]) -> nalgebra::DMatrix<f64> {
    let n = f.in_dim();
    let k = f.out_dim();
    let mut jac = nalgebra::DMatrix::zeros(k, n);
    for j in 0..n {
        let xs: Vec<D1> = (0..n).map(|i| D1::new(x[i], if i == j { 1.0 } else { 0.0 })).collect();
        let out = f.map_d1(&xs);
        for i in 0..k {
            jac[(i, j)] = out[i].eps;
        }
    }
    jac
}

/// Directional second derivative `∂²f(x)[a, b]`.
pub fn map_second(f: &dyn MapField, x: &[f64], a: &[f64], b: &[f64]) -> Vec<f64> {
    let xs: Vec<D2> = (0..x.len())
        .map(|i| D2::new(D1::new(x[i], a[i]), D1::new(b[i], 0.0)))
        .collect();
    f.map_d2(&xs).iter().map(|y| y.coeff(0b11)).collect()
}
