//! Built-in projections and fiber parametrizations.

use alloc::vec;
use alloc::vec::Vec;

use crate::dual::Scalar;
use crate::error::{Error, Result};
use crate::field::{GenericMap, GenericNorm, MetricKind};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BuiltinMap {
    /// `(x₁, x₂, x₃) ↦ (x₁, x₂)`.
    DropLast,
    /// `(x₁, x₂, x₃) ↦ (x₁² + x₂², x₃)`.
    RadialHeight,
    /// `(x₁, x₂, x₃) ↦ (x₁ + x₃, x₂)`.
    Tilted,
    /// `(x₁, x₂, x₃) ↦ x₁ + x₃`.
    TiltedPlane,
    /// `(x₁, x₂) ↦ x₁ x₂`.
    Product,
    /// `(c₁, c₂, s) ↦ (c₁, c₂, s)`.
    VerticalLines,
    /// `(c₁, c₂, s) ↦ (√c₁ cos s, √c₁ sin s, c₂)`.
    HorizontalCircles,
    /// `(c₁, c₂, s) ↦ (c₁ − s, c₂, s)`.
    TiltedLines,
    /// `(c, s₁, s₂) ↦ (c − s₁, s₂, s₁)`.
    TiltedPlanes,
    /// `(c, s) ↦ (s, c/s)`.
    Hyperbolas,
}

impl BuiltinMap {
    pub fn name(&self) -> &'static str {
        match self {
            BuiltinMap::DropLast => "drop-last",
            BuiltinMap::RadialHeight => "radial-height",
            BuiltinMap::Tilted => "tilted",
            BuiltinMap::TiltedPlane => "tilted-plane",
            BuiltinMap::Product => "product",
            BuiltinMap::VerticalLines => "vertical-lines",
            BuiltinMap::HorizontalCircles => "horizontal-circles",
            BuiltinMap::TiltedLines => "tilted-lines",
            BuiltinMap::TiltedPlanes => "tilted-planes",
            BuiltinMap::Hyperbolas => "hyperbolas",
        }
    }
}

impl GenericMap for BuiltinMap {
    fn in_dim(&self) -> usize {
        match self {
            BuiltinMap::Product | BuiltinMap::Hyperbolas => 2,
            _ => 3,
        }
    }

    fn out_dim(&self) -> usize {
        match self {
            BuiltinMap::Product | BuiltinMap::TiltedPlane => 1,
            BuiltinMap::DropLast | BuiltinMap::RadialHeight | BuiltinMap::Tilted => 2,
            BuiltinMap::Hyperbolas => 2,
            _ => 3,
        }
    }

    fn map<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        match self {
            BuiltinMap::DropLast => vec![x[0], x[1]],
            BuiltinMap::RadialHeight => vec![x[0] * x[0] + x[1] * x[1], x[2]],
            BuiltinMap::Tilted => vec![x[0] + x[2], x[1]],
            BuiltinMap::TiltedPlane => vec![x[0] + x[2]],
            BuiltinMap::Product => vec![x[0] * x[1]],
            BuiltinMap::VerticalLines => vec![x[0], x[1], x[2]],
            BuiltinMap::HorizontalCircles => {
                let r = x[0].sqrt();
                vec![r * x[2].cos(), r * x[2].sin(), x[1]]
            }
            BuiltinMap::TiltedLines => vec![x[0] - x[2], x[1], x[2]],
            BuiltinMap::TiltedPlanes => vec![x[0] - x[1], x[2], x[1]],
            BuiltinMap::Hyperbolas => vec![x[1], x[0] / x[1]],
        }
    }
}

/// `F(c, w)² = w₁²/(4c₁) + w₂²` on `c₁ > 0`: the quotient of the rigid
/// rotation wind by `(x₁² + x₂², x₃)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialHeightBase;

impl GenericNorm for RadialHeightBase {
    fn dim(&self) -> usize {
        2
    }

    fn norm<S: Scalar>(&self, c: &[S], w: &[S]) -> S {
        (w[0] * w[0] / c[0].scale(4.0) + w[1] * w[1]).sqrt()
    }

    fn kind(&self) -> MetricKind {
        MetricKind::Riemannian
    }

    fn admissible(&self, c: &[f64]) -> Result<()> {
        if c[0] > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidInput("radial coordinate must be positive"))
        }
    }
}
