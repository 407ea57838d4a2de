//! Built-in scenarios: a metric, a candidate submersion with fibers, a
//! region and default probe settings for the verifier.

use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::Result;
use crate::geodesic::SubmanifoldPatch;
use crate::maps::{BuiltinMap, RadialHeightBase};
use crate::metric::FinslerMetric;
use crate::sampling::Sampler;
use crate::submersion::SubmersionSpec;
use crate::zermelo::{box_probes, randers_from_zermelo, HField, Wind, ZermeloData, ZermeloSample};

/// A box, optionally intersected with a centred ball.
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub radius: Option<f64>,
}

impl Region {
    pub fn cube(n: usize, half: f64) -> Self {
        Region { lo: vec![-half; n], hi: vec![half; n], radius: None }
    }

    pub fn ball(n: usize, radius: f64) -> Self {
        Region { lo: vec![-radius; n], hi: vec![radius; n], radius: Some(radius) }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let in_box = x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| *v >= *a && *v <= *b);
        let in_ball = self.radius.map(|r| x.iter().map(|v| v * v).sum::<f64>() <= r * r).unwrap_or(true);
        in_box && in_ball
    }

    /// Rejection sample.
    pub fn sample(&self, rng: &mut Sampler) -> Vec<f64> {
        loop {
            let x = rng.in_box(&self.lo, &self.hi);
            if self.contains(&x) {
                return x;
            }
        }
    }

    /// Grid probes for wind admissibility, restricted to the region.
    pub fn probes(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let mut p: Vec<Vec<f64>> = box_probes(&self.lo, &self.hi, per_axis).into_iter().filter(|x| self.contains(x)).collect();
        if let Some(r) = self.radius {
            let n = self.dim();
            for i in 0..n {
                for s in [-1.0, 1.0] {
                    let mut x = vec![0.0; n];
                    x[i] = s * r;
                    p.push(x);
                }
            }
        }
        p
    }
}

/// Declared singular loci of the built-in scenarios.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SingularLocus {
    /// `{x₁ = x₂ = 0}`; each point is a leaf.
    ThirdAxis,
    /// `{x₁ x₂ = 0}`.
    CoordinateAxes,
}

impl SingularLocus {
    pub const ALL: [SingularLocus; 2] = [SingularLocus::ThirdAxis, SingularLocus::CoordinateAxes];

    pub fn name(&self) -> &'static str {
        match self {
            SingularLocus::ThirdAxis => "x3-axis",
            SingularLocus::CoordinateAxes => "coordinate-axes",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        SingularLocus::ALL.iter().copied().find(|l| l.name() == s)
    }

    pub fn describe(&self) -> &'static str {
        match self {
            SingularLocus::ThirdAxis => "x1 = x2 = 0",
            SingularLocus::CoordinateAxes => "x1 x2 = 0",
        }
    }

    pub fn distance(&self, x: &[f64]) -> f64 {
        match self {
            SingularLocus::ThirdAxis => libm::hypot(x[0], x[1]),
            SingularLocus::CoordinateAxes => libm::fabs(x[0]).min(libm::fabs(x[1])),
        }
    }

    /// The singular leaf through `x`, when it is a single point.
    pub fn point_leaf(&self, x: &[f64]) -> Option<SubmanifoldPatch> {
        match self {
            SingularLocus::ThirdAxis => Some(SubmanifoldPatch::point(&[0.0, 0.0, x[2]])),
            SingularLocus::CoordinateAxes => None,
        }
    }
}

/// The checks the verifier runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum CheckKind {
    Containment,
    Rank,
    Equidistance,
    Horizontal,
}

impl CheckKind {
    pub const ALL: [CheckKind; 4] = [CheckKind::Containment, CheckKind::Rank, CheckKind::Equidistance, CheckKind::Horizontal];

    pub fn name(&self) -> &'static str {
        match self {
            CheckKind::Containment => "containment",
            CheckKind::Rank => "rank",
            CheckKind::Equidistance => "equidistance",
            CheckKind::Horizontal => "horizontal",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        CheckKind::ALL.iter().copied().find(|k| k.name() == s)
    }
}

/// Where the distance to a plaque is probed.
#[derive(Clone, Debug, PartialEq)]
pub enum Comparison {
    /// Points of the fiber over `c` at parameters in the box.
    Fiber { c: Vec<f64>, lo: Vec<f64>, hi: Vec<f64> },
    /// A single point (e.g. a point leaf).
    Point(Vec<f64>),
}

/// Default probe settings of a scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct Probe {
    /// Base point of the regular fiber under test.
    pub fiber: Vec<f64>,
    /// Box of fiber parameters sampled along it.
    pub params_lo: Vec<f64>,
    pub params_hi: Vec<f64>,
    /// Base vector whose horizontal lifts form the basic normal.
    pub direction: Vec<f64>,
    /// Range of `r` for the endpoint maps.
    pub r_range: (f64, f64),
    /// Parameter box of the plaque for distances (usually wider).
    pub plaque_lo: Vec<f64>,
    pub plaque_hi: Vec<f64>,
    pub comparisons: Vec<Comparison>,
    /// Duration of the horizontality geodesic.
    pub horizon: f64,
}

impl Probe {
    pub fn params_centre(&self) -> Vec<f64> {
        self.params_lo.iter().zip(&self.params_hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub metric: FinslerMetric,
    /// Zermelo data behind `metric`, when it has any.
    pub zermelo: Option<Arc<dyn ZermeloSample>>,
    pub spec: SubmersionSpec,
    pub region: Region,
    pub singular: Option<SingularLocus>,
    pub probe: Probe,
    /// Negative controls only count their expected failures; other checks
    /// are informational.
    pub negative_control: bool,
    pub expect_fail: Vec<CheckKind>,
}

impl Scenario {
    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    pub fn fiber(&self) -> Result<SubmanifoldPatch> {
        self.spec.fiber_patch(&self.probe.fiber)
    }

    pub fn expects_failure(&self, kind: CheckKind) -> bool {
        self.expect_fail.contains(&kind)
    }
}

fn zermelo(h: HField, wind: Wind, region: &Region) -> Result<(FinslerMetric, Arc<dyn ZermeloSample>)> {
    let data = ZermeloData::new(h, wind)?;
    Ok((randers_from_zermelo(data.clone(), &region.probes(7))?, Arc::new(data)))
}

/// Sine-shear wind over the plane projection.
pub fn fig1() -> Result<Scenario> {
    let region = Region::cube(3, 3.0);
    let base_region = Region::cube(2, 3.0);
    let (metric, data) = zermelo(HField::Euclidean(3), Wind::SineShear, &region)?;
    let base = zermelo(HField::Euclidean(2), Wind::Constant(vec![0.5, 0.0]), &base_region)?.0;
    let spec = SubmersionSpec::new(BuiltinMap::DropLast).with_fibers(BuiltinMap::VerticalLines).with_base(base);
    Ok(Scenario {
        name: "FIG1".to_string(),
        description: "R^3 with Euclidean h and wind (1/2, 0, (sin^2 x1 + 1)/4), projected to (x1, x2); \
                      the base carries the constant wind (1/2, 0)"
            .to_string(),
        metric,
        zermelo: Some(data),
        spec,
        region,
        singular: None,
        probe: Probe {
            fiber: vec![0.3, 0.1],
            params_lo: vec![-1.0],
            params_hi: vec![1.0],
            direction: vec![0.6, -0.8],
            r_range: (-2.0, 2.0),
            plaque_lo: vec![-2.5],
            plaque_hi: vec![2.5],
            comparisons: vec![Comparison::Fiber { c: vec![0.8, -0.2], lo: vec![-0.5], hi: vec![0.5] }],
            horizon: 2.0,
        },
        negative_control: false,
        expect_fail: vec![],
    })
}

/// Rigid rotation wind over the radius-height projection.
pub fn fig2() -> Result<Scenario> {
    let region = Region::ball(3, 1.5);
    let (metric, data) = zermelo(HField::Euclidean(3), Wind::Rotation { omega: 0.5 }, &region)?;
    let spec = SubmersionSpec::new(BuiltinMap::RadialHeight)
        .with_fibers(BuiltinMap::HorizontalCircles)
        .with_base(FinslerMetric::new(RadialHeightBase));
    let two_pi = 2.0 * core::f64::consts::PI;
    Ok(Scenario {
        name: "FIG2".to_string(),
        description: "ball of radius 3/2 with Euclidean h and wind (-x2/2, x1/2, 0), projected to \
                      (x1^2 + x2^2, x3); the x3-axis is singular"
            .to_string(),
        metric,
        zermelo: Some(data),
        spec,
        region,
        singular: Some(SingularLocus::ThirdAxis),
        probe: Probe {
            fiber: vec![1.0, 0.0],
            params_lo: vec![0.0],
            params_hi: vec![two_pi],
            direction: vec![-2.0, 0.0],
            r_range: (0.05, 1.95),
            plaque_lo: vec![-0.5],
            plaque_hi: vec![two_pi + 0.5],
            comparisons: vec![
                Comparison::Fiber { c: vec![0.25, 0.0], lo: vec![0.0], hi: vec![two_pi] },
                Comparison::Point(vec![0.0, 0.0, 0.0]),
            ],
            horizon: 1.9,
        },
        negative_control: false,
        expect_fail: vec![],
    })
}

/// Level sets of `x₁ x₂` in the Euclidean plane; not a submersion at the
/// origin, and the level sets are not equidistant.
pub fn xy() -> Result<Scenario> {
    let region = Region::cube(2, 2.0);
    let (metric, data) = zermelo(HField::Euclidean(2), Wind::Zero(2), &region)?;
    let spec = SubmersionSpec::new(BuiltinMap::Product).with_fibers(BuiltinMap::Hyperbolas);
    Ok(Scenario {
        name: "XY".to_string(),
        description: "Euclidean plane with the level sets of f(x) = x1 x2".to_string(),
        metric,
        zermelo: Some(data),
        spec,
        region,
        singular: Some(SingularLocus::CoordinateAxes),
        probe: Probe {
            fiber: vec![0.05],
            params_lo: vec![0.8],
            params_hi: vec![1.2],
            direction: vec![-1.0],
            r_range: (0.01, 0.2),
            plaque_lo: vec![0.5],
            plaque_hi: vec![1.5],
            comparisons: vec![Comparison::Fiber { c: vec![0.2], lo: vec![0.8], hi: vec![1.2] }],
            horizon: 0.2,
        },
        negative_control: true,
        expect_fail: vec![CheckKind::Containment],
    })
}

/// Euclidean space over the plane projection.
pub fn euclid() -> Result<Scenario> {
    let region = Region::cube(3, 3.0);
    let (metric, data) = zermelo(HField::Euclidean(3), Wind::Zero(3), &region)?;
    let base = zermelo(HField::Euclidean(2), Wind::Zero(2), &Region::cube(2, 3.0))?.0;
    let spec = SubmersionSpec::new(BuiltinMap::DropLast).with_fibers(BuiltinMap::VerticalLines).with_base(base);
    Ok(Scenario {
        name: "EUCLID".to_string(),
        description: "Euclidean R^3 projected to (x1, x2)".to_string(),
        metric,
        zermelo: Some(data),
        spec,
        region,
        singular: None,
        probe: Probe {
            fiber: vec![0.0, 0.0],
            params_lo: vec![-1.0],
            params_hi: vec![1.0],
            direction: vec![1.0, 0.0],
            r_range: (-2.0, 2.0),
            plaque_lo: vec![-2.5],
            plaque_hi: vec![2.5],
            comparisons: vec![Comparison::Fiber { c: vec![1.0, 0.5], lo: vec![-1.0], hi: vec![1.0] }],
            horizon: 2.0,
        },
        negative_control: false,
        expect_fail: vec![],
    })
}

/// The sine-shear metric with the tilted planes `x₁ + x₃ = c`, which are
/// not a Finsler foliation for it.
pub fn tilted() -> Result<Scenario> {
    let region = Region::cube(3, 3.0);
    let (metric, data) = zermelo(HField::Euclidean(3), Wind::SineShear, &region)?;
    let spec = SubmersionSpec::new(BuiltinMap::TiltedPlane).with_fibers(BuiltinMap::TiltedPlanes);
    Ok(Scenario {
        name: "TILTED".to_string(),
        description: "the FIG1 metric with the planes x1 + x3 = c".to_string(),
        metric,
        zermelo: Some(data),
        spec,
        region,
        singular: None,
        probe: Probe {
            fiber: vec![0.3],
            params_lo: vec![-0.5, -0.5],
            params_hi: vec![0.5, 0.5],
            direction: vec![1.0],
            r_range: (0.05, 1.5),
            plaque_lo: vec![-2.5, -2.5],
            plaque_hi: vec![2.5, 2.5],
            comparisons: vec![Comparison::Fiber { c: vec![1.3], lo: vec![-0.5, -0.5], hi: vec![0.5, 0.5] }],
            horizon: 2.0,
        },
        negative_control: true,
        expect_fail: vec![CheckKind::Horizontal],
    })
}

pub fn builtin_scenarios() -> Result<Vec<Scenario>> {
    Ok(vec![fig1()?, fig2()?, xy()?, euclid()?, tilted()?])
}

pub fn builtin(name: &str) -> Result<Option<Scenario>> {
    Ok(match name.to_ascii_uppercase().as_str() {
        "FIG1" => Some(fig1()?),
        "FIG2" => Some(fig2()?),
        "XY" => Some(xy()?),
        "EUCLID" => Some(euclid()?),
        "TILTED" => Some(tilted()?),
        _ => None,
    })
}
