//! JSON scenario files and the expression-backed metric, map and fiber
//! types they build.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use finsler_core::dual::Scalar;
use finsler_core::field::GenericMap;
use finsler_core::scenario::{self, CheckKind, Comparison, Probe, Region, Scenario, SingularLocus};
use finsler_core::submersion::SubmersionSpec;
use finsler_core::zermelo::{randers_from_zermelo, ZermeloField, ZermeloSample};
use serde::{Deserialize, Serialize};

use crate::expr::{parse, symbols, Expr, ParseError};

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid scenario JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("in {field}: {source}")]
    Expr { field: String, source: ParseError },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] finsler_core::Error),
    #[error("unknown scenario {0:?} (not a built-in name or a readable file)")]
    Unknown(String),
}

/// `{ "kind": "zermelo", "h": "euclidean" | [[expr]], "W": [expr] }`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZermeloBlock {
    pub kind: String,
    pub h: HBlock,
    #[serde(rename = "W")]
    pub wind: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HBlock {
    Named(String),
    Matrix(Vec<Vec<String>>),
}

/// Fiber parametrization `(c1..ck, s1..sm) ↦ x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberBlock {
    pub params: usize,
    pub map: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionBlock {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComparisonBlock {
    Fiber { fiber: Vec<f64>, lo: Vec<f64>, hi: Vec<f64> },
    Point { point: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeBlock {
    pub fiber: Vec<f64>,
    pub params_lo: Vec<f64>,
    pub params_hi: Vec<f64>,
    pub direction: Vec<f64>,
    pub r_range: [f64; 2],
    pub plaque_lo: Vec<f64>,
    pub plaque_hi: Vec<f64>,
    #[serde(default)]
    pub comparisons: Vec<ComparisonBlock>,
    pub horizon: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expectation {
    Pass,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub metric: ZermeloBlock,
    pub pi: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fibers: Option<FiberBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_metric: Option<ZermeloBlock>,
    pub region: RegionBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub singular: Option<String>,
    pub probe: ProbeBlock,
    /// Expected outcome per check name; any `fail` makes the scenario a
    /// negative control.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub expect: BTreeMap<String, Expectation>,
}

/// Zermelo data given by expressions in `x1..xn`.
#[derive(Clone, Debug)]
pub struct ExprZermelo {
    dim: usize,
    /// Row-major; `None` is the Euclidean metric.
    h: Option<Vec<Expr>>,
    wind: Vec<Expr>,
}

impl ExprZermelo {
    pub fn from_block(block: &ZermeloBlock, field: &str) -> Result<Self, LoadError> {
        if block.kind != "zermelo" {
            return Err(LoadError::Invalid(format!("{field}: unsupported metric kind {:?}", block.kind)));
        }
        let n = block.wind.len();
        let names = symbols("x", n);
        let wind = parse_all(&block.wind, &names, &format!("{field}.W"))?;
        let h = match &block.h {
            HBlock::Named(s) if s == "euclidean" => None,
            HBlock::Named(s) => return Err(LoadError::Invalid(format!("{field}.h: unknown metric {s:?}"))),
            HBlock::Matrix(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(LoadError::Invalid(format!("{field}.h: expected a {n}x{n} matrix")));
                }
                let flat: Vec<String> = rows.iter().flatten().cloned().collect();
                Some(parse_all(&flat, &names, &format!("{field}.h"))?)
            }
        };
        Ok(ExprZermelo { dim: n, h, wind })
    }
}

impl ZermeloField for ExprZermelo {
    fn dim(&self) -> usize {
        self.dim
    }

    fn h<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        match &self.h {
            Some(h) => h.iter().map(|e| e.eval(x)).collect(),
            None => {
                let n = self.dim;
                (0..n * n).map(|k| if k / n == k % n { S::one() } else { S::zero() }).collect()
            }
        }
    }

    fn wind<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        self.wind.iter().map(|e| e.eval(x)).collect()
    }

    fn windless(&self) -> bool {
        self.wind.iter().all(|e| e.constant() == Some(0.0))
    }
}

/// A map `R^m → R^k` given by expressions.
#[derive(Clone, Debug)]
pub struct ExprMap {
    in_dim: usize,
    out: Vec<Expr>,
}

impl ExprMap {
    pub fn new(in_dim: usize, out: Vec<Expr>) -> Self {
        ExprMap { in_dim, out }
    }
}

impl GenericMap for ExprMap {
    fn in_dim(&self) -> usize {
        self.in_dim
    }
    fn out_dim(&self) -> usize {
        self.out.len()
    }
    fn map<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        self.out.iter().map(|e| e.eval(x)).collect()
    }
}

fn parse_all(src: &[String], names: &[String], field: &str) -> Result<Vec<Expr>, LoadError> {
    src.iter()
        .enumerate()
        .map(|(i, s)| parse(s, names).map_err(|e| LoadError::Expr { field: format!("{field}[{i}]"), source: e }))
        .collect()
}

fn check_len(what: &str, v: &[f64], n: usize) -> Result<(), LoadError> {
    if v.len() != n {
        return Err(LoadError::Invalid(format!("{what}: expected {n} entries, found {}", v.len())));
    }
    Ok(())
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self, LoadError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario files serialize")
    }

    pub fn build(&self) -> Result<Scenario, LoadError> {
        let data = ExprZermelo::from_block(&self.metric, "metric")?;
        let n = data.dim;
        let region = Region { lo: self.region.lo.clone(), hi: self.region.hi.clone(), radius: self.region.radius };
        check_len("region.lo", &region.lo, n)?;
        check_len("region.hi", &region.hi, n)?;
        let metric = randers_from_zermelo(data.clone(), &region.probes(7))?;

        let k = self.pi.len();
        let pi = ExprMap::new(n, parse_all(&self.pi, &symbols("x", n), "pi")?);
        let mut spec = SubmersionSpec { pi: Arc::new(pi), base_metric: None, fibers: None };
        if let Some(base) = &self.base_metric {
            let bz = ExprZermelo::from_block(base, "base_metric")?;
            if bz.dim != k {
                return Err(LoadError::Invalid(format!("base_metric: dimension {} but pi has {k} components", bz.dim)));
            }
            let probes: Vec<Vec<f64>> = region
                .probes(7)
                .iter()
                .map(|x| spec.pi.map_f64(x))
                .filter(|c| c.iter().all(|v| v.is_finite()))
                .collect();
            spec.base_metric = Some(randers_from_zermelo(bz, &probes)?);
        }
        let m = match &self.fibers {
            Some(fb) => {
                let mut names = symbols("c", k);
                names.extend(symbols("s", fb.params));
                let map = parse_all(&fb.map, &names, "fibers.map")?;
                if map.len() != n {
                    return Err(LoadError::Invalid(format!("fibers.map: expected {n} components")));
                }
                spec.fibers = Some(Arc::new(ExprMap::new(k + fb.params, map)));
                fb.params
            }
            None => return Err(LoadError::Invalid("fibers: a fiber parametrization is required".into())),
        };

        let p = &self.probe;
        check_len("probe.fiber", &p.fiber, k)?;
        check_len("probe.direction", &p.direction, k)?;
        check_len("probe.params_lo", &p.params_lo, m)?;
        check_len("probe.params_hi", &p.params_hi, m)?;
        check_len("probe.plaque_lo", &p.plaque_lo, m)?;
        check_len("probe.plaque_hi", &p.plaque_hi, m)?;
        let comparisons = p
            .comparisons
            .iter()
            .map(|c| match c {
                ComparisonBlock::Fiber { fiber, lo, hi } => {
                    check_len("comparison fiber", fiber, k)?;
                    Ok(Comparison::Fiber { c: fiber.clone(), lo: lo.clone(), hi: hi.clone() })
                }
                ComparisonBlock::Point { point } => {
                    check_len("comparison point", point, n)?;
                    Ok(Comparison::Point(point.clone()))
                }
            })
            .collect::<Result<Vec<_>, LoadError>>()?;
        let singular = match &self.singular {
            Some(s) => Some(SingularLocus::parse(s).ok_or_else(|| LoadError::Invalid(format!("unknown singular locus {s:?}")))?),
            None => None,
        };
        let mut expect_fail = Vec::new();
        for (name, e) in &self.expect {
            let kind = CheckKind::parse(name).ok_or_else(|| LoadError::Invalid(format!("expect: unknown check {name:?}")))?;
            if *e == Expectation::Fail {
                expect_fail.push(kind);
            }
        }
        expect_fail.sort();
        let zermelo: Arc<dyn ZermeloSample> = Arc::new(data);
        Ok(Scenario {
            name: self.name.clone(),
            description: self.description.clone(),
            metric,
            zermelo: Some(zermelo),
            spec,
            region,
            singular,
            probe: Probe {
                fiber: p.fiber.clone(),
                params_lo: p.params_lo.clone(),
                params_hi: p.params_hi.clone(),
                direction: p.direction.clone(),
                r_range: (p.r_range[0], p.r_range[1]),
                plaque_lo: p.plaque_lo.clone(),
                plaque_hi: p.plaque_hi.clone(),
                comparisons,
                horizon: p.horizon,
            },
            negative_control: !expect_fail.is_empty(),
            expect_fail,
        })
    }
}

/// The JSON files equivalent to the built-in scenarios.
pub const BUILTIN_FILES: [(&str, &str); 5] = [
    ("FIG1", include_str!("../scenarios/fig1.json")),
    ("FIG2", include_str!("../scenarios/fig2.json")),
    ("XY", include_str!("../scenarios/xy.json")),
    ("EUCLID", include_str!("../scenarios/euclid.json")),
    ("TILTED", include_str!("../scenarios/tilted.json")),
];

/// A built-in scenario by (case-insensitive) name, or a scenario file.
pub fn load(name_or_path: &str) -> Result<Scenario, LoadError> {
    if let Some(sc) = scenario::builtin(name_or_path)? {
        return Ok(sc);
    }
    let path = Path::new(name_or_path);
    if path.is_file() {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LoadError::Io { path: name_or_path.to_string(), source: e })?;
        return ScenarioFile::from_json(&text)?.build();
    }
    Err(LoadError::Unknown(name_or_path.to_string()))
}
