//! Command dispatch, output formatting and exit codes.

use std::ffi::OsString;
use std::io::Write;

use clap::{Args, Parser, Subcommand, ValueEnum};
use finsler_core::geodesic::integrate_geodesic;
use finsler_core::jacobi::{detect_focal_points, l_jacobi_basis, normal_geodesic};
use finsler_core::metric::validate_metric;
use finsler_core::ode::OdeOptions;
use finsler_core::sampling::Sampler;
use finsler_core::scenario::{builtin_scenarios, CheckKind, Scenario};
use finsler_core::submersion::induced_base_norm;
use finsler_core::verifier::{probe_start, verify, CheckDetail, VerifySettings};
use finsler_core::wilking::{submersion_frame, transversal_conjugate_points};
use finsler_core::zermelo::zermelo_residual;
use finsler_core::TangentSample;
use serde::Serialize;
use serde_json::{json, Value};

use crate::scenario_file::load;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "finsler", version, about = "Finsler geometry engine: geodesics, Jacobi fields, submersions and equifocality checks")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Relative tolerance of the ODE integrator.
    #[arg(long, global = true)]
    pub rtol: Option<f64>,
    /// Absolute tolerance of the ODE integrator.
    #[arg(long, global = true)]
    pub atol: Option<f64>,
    /// Number of samples (meaning depends on the command).
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Seed for sample generation.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Write data here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<String>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// List the built-in scenarios.
    Scenarios,
    /// Check metric axioms and the Zermelo identity on random samples.
    Validate { scenario: String },
    /// Integrate a geodesic (default: the probe's basic normal).
    Geodesic {
        scenario: String,
        #[command(flatten)]
        span: Span,
        /// Output rows.
        #[arg(long, default_value_t = 101)]
        points: usize,
        /// Initial point, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
        /// Initial velocity, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        v0: Option<Vec<f64>>,
    },
    /// Determinant trace of the probe fiber's L-Jacobi basis.
    Jacobi {
        scenario: String,
        #[command(flatten)]
        span: Span,
    },
    /// Focal instants of the probe fiber along its basic normal.
    Focal {
        scenario: String,
        #[command(flatten)]
        span: Span,
    },
    /// Wilking frame and transversal conjugate points along the probe geodesic.
    Wilking {
        scenario: String,
        #[command(flatten)]
        span: Span,
    },
    /// Compare induced and declared base norms on random samples.
    Submersion { scenario: String },
    /// Run the verifier checks.
    Verify {
        scenario: String,
        /// containment, rank, equidistance, horizontal or all (repeatable).
        #[arg(long = "check", default_value = "all")]
        checks: Vec<String>,
        /// Size of the r grid.
        #[arg(long, default_value_t = 50)]
        r_points: usize,
    },
}

#[derive(Args, Debug, Clone, Copy)]
pub struct Span {
    /// End of the parameter interval (default: the scenario horizon).
    #[arg(long, allow_hyphen_values = true)]
    pub t1: Option<f64>,
}

/// Everything that determines a run's output.
#[derive(Serialize, Debug, Clone)]
pub struct RunConfig {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    pub rtol: f64,
    pub atol: f64,
    pub samples: usize,
    pub seed: u64,
    pub format: Format,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v0: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_points: Option<usize>,
    /// Where the data goes; not part of the data.
    #[serde(skip)]
    pub out: Option<String>,
}

impl RunConfig {
    pub fn opts(&self) -> OdeOptions {
        OdeOptions::with_tolerances(self.rtol, self.atol)
    }
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Run(String),
}

impl From<finsler_core::Error> for Failure {
    fn from(e: finsler_core::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

/// Tabular data plus its JSON rendering and a short summary.
struct Output {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
    data: Value,
    summary: Vec<(String, String)>,
    ok: bool,
}

/// Shortest round-tripping decimal form.
pub fn num(x: f64) -> String {
    if x != 0.0 && x.is_finite() && (x.abs() < 1e-4 || x.abs() >= 1e16) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

fn check_positive(name: &str, v: f64) -> Result<f64, Failure> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Failure::Usage(format!("--{name} must be positive, got {v}")))
    }
}

/// Parses `args` and runs the command, writing data to `out` (or the
/// `--out` file) and diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let text = e.render().to_string();
            if code == EXIT_OK {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    match dispatch(&cli, out, err) {
        Ok(code) => code,
        Err(Failure::Usage(m)) => {
            let _ = writeln!(err, "error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Run(m)) => {
            let _ = writeln!(err, "error: {m}");
            EXIT_CHECK_FAILED
        }
    }
}

fn config(cli: &Cli) -> Result<RunConfig, Failure> {
    let c = &cli.common;
    let (name, scenario, default_format, default_samples, default_rtol, default_atol) = match &cli.command {
        Command::Scenarios => ("scenarios", None, Format::Csv, 0, 1e-10, 1e-12),
        Command::Validate { scenario } => ("validate", Some(scenario), Format::Csv, 1000, 1e-10, 1e-12),
        Command::Geodesic { scenario, .. } => ("geodesic", Some(scenario), Format::Csv, 0, 1e-10, 1e-12),
        Command::Jacobi { scenario, .. } => ("jacobi", Some(scenario), Format::Csv, 0, 1e-11, 1e-13),
        Command::Focal { scenario, .. } => ("focal", Some(scenario), Format::Csv, 0, 1e-11, 1e-13),
        Command::Wilking { scenario, .. } => ("wilking", Some(scenario), Format::Csv, 0, 1e-11, 1e-13),
        Command::Submersion { scenario } => ("submersion", Some(scenario), Format::Csv, 200, 1e-10, 1e-12),
        Command::Verify { scenario, .. } => ("verify", Some(scenario), Format::Json, 20, 1e-12, 1e-14),
    };
    let span = match &cli.command {
        Command::Geodesic { span, .. } | Command::Jacobi { span, .. } | Command::Focal { span, .. } | Command::Wilking { span, .. } => {
            Some(*span)
        }
        _ => None,
    };
    let (x0, v0, points) = match &cli.command {
        Command::Geodesic { x0, v0, points, .. } => {
            if *points < 2 {
                return Err(Failure::Usage("--points must be at least 2".into()));
            }
            (x0.clone(), v0.clone(), Some(*points))
        }
        _ => (None, None, None),
    };
    let (checks, r_points) = match &cli.command {
        Command::Verify { checks, r_points, .. } => {
            let mut kinds: Vec<CheckKind> = Vec::new();
            for c in checks {
                if c == "all" {
                    kinds.extend(CheckKind::ALL);
                } else {
                    kinds.push(CheckKind::parse(c).ok_or_else(|| Failure::Usage(format!("unknown check {c:?}")))?);
                }
            }
            kinds.sort();
            kinds.dedup();
            if *r_points < 2 {
                return Err(Failure::Usage("--r-points must be at least 2".into()));
            }
            (kinds.iter().map(|k| k.name().to_string()).collect(), Some(*r_points))
        }
        _ => (Vec::new(), None),
    };
    let samples = c.samples.unwrap_or(default_samples);
    if default_samples > 0 && samples == 0 {
        return Err(Failure::Usage("--samples must be positive".into()));
    }
    Ok(RunConfig {
        command: name.to_string(),
        scenario: scenario.cloned(),
        rtol: check_positive("rtol", c.rtol.unwrap_or(default_rtol))?,
        atol: check_positive("atol", c.atol.unwrap_or(default_atol))?,
        samples,
        seed: c.seed,
        format: c.format.unwrap_or(default_format),
        t1: span.and_then(|s| s.t1),
        points,
        x0,
        v0,
        checks,
        r_points,
        out: c.out.clone(),
    })
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    let cfg = config(cli)?;
    let sc = match &cfg.scenario {
        Some(name) => Some(load(name).map_err(|e| Failure::Usage(e.to_string()))?),
        None => None,
    };
    let output = match (&cli.command, &sc) {
        (Command::Scenarios, _) => scenarios()?,
        (Command::Validate { .. }, Some(sc)) => validate(sc, &cfg)?,
        (Command::Geodesic { .. }, Some(sc)) => geodesic(sc, &cfg)?,
        (Command::Jacobi { .. }, Some(sc)) => jacobi(sc, &cfg, false)?,
        (Command::Focal { .. }, Some(sc)) => jacobi(sc, &cfg, true)?,
        (Command::Wilking { .. }, Some(sc)) => wilking(sc, &cfg)?,
        (Command::Submersion { .. }, Some(sc)) => submersion(sc, &cfg)?,
        (Command::Verify { .. }, Some(sc)) => verify_cmd(sc, &cfg)?,
        _ => unreachable!("every scenario command loads its scenario"),
    };
    emit(&cfg, &output, sc.as_ref(), out, err)?;
    Ok(if output.ok { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn emit(cfg: &RunConfig, o: &Output, sc: Option<&Scenario>, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::Run(format!("write failed: {e}"));
    let body: Vec<u8> = match cfg.format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&o.headers).map_err(|e| Failure::Run(e.to_string()))?;
            for r in &o.rows {
                w.write_record(r).map_err(|e| Failure::Run(e.to_string()))?;
            }
            w.into_inner().map_err(|e| Failure::Run(e.to_string()))?
        }
        Format::Json => {
            let mut doc = json!({ "config": cfg });
            if let Some(sc) = sc {
                doc["scenario"] = json!({ "name": sc.name, "description": sc.description });
            }
            doc["ok"] = json!(o.ok);
            doc["summary"] = Value::Object(o.summary.iter().map(|(k, v)| (k.clone(), json!(v))).collect());
            doc["data"] = o.data.clone();
            let mut s = serde_json::to_string_pretty(&doc).map_err(|e| Failure::Run(e.to_string()))?;
            s.push('\n');
            s.into_bytes()
        }
    };
    match &cfg.out {
        Some(path) => std::fs::write(path, &body).map_err(io)?,
        None => out.write_all(&body).map_err(io)?,
    }
    let width = o.summary.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    for (k, v) in &o.summary {
        writeln!(err, "{k:<width$}  {v}").map_err(io)?;
    }
    Ok(())
}

fn scenarios() -> Result<Output, Failure> {
    let all = builtin_scenarios()?;
    let headers = vec!["name".into(), "dim".into(), "role".into(), "expected_failures".into(), "description".into()];
    let mut rows = Vec::new();
    let mut data = Vec::new();
    for sc in &all {
        let role = if sc.negative_control { "negative control" } else { "positive" };
        let fails: Vec<&str> = sc.expect_fail.iter().map(|k| k.name()).collect();
        rows.push(vec![sc.name.clone(), sc.dim().to_string(), role.into(), fails.join(";"), sc.description.clone()]);
        data.push(json!({
            "name": sc.name,
            "dim": sc.dim(),
            "role": role,
            "expected_failures": fails,
            "description": sc.description,
            "singular": sc.singular.map(|l| l.describe()),
        }));
    }
    Ok(Output { headers, rows, data: Value::Array(data), summary: Vec::new(), ok: true })
}

fn validate(sc: &Scenario, cfg: &RunConfig) -> Result<Output, Failure> {
    let mut rng = Sampler::new(cfg.seed);
    let n = sc.dim();
    let samples: Vec<TangentSample> = (0..cfg.samples)
        .map(|_| {
            let x = sc.region.sample(&mut rng);
            let scale = rng.uniform(0.1, 3.0);
            let v: Vec<f64> = rng.direction(n).iter().map(|c| c * scale).collect();
            TangentSample::new(&x, &v)
        })
        .collect();
    let rep = validate_metric(&sc.metric, &samples);
    let mut zermelo = 0.0f64;
    if let Some(z) = &sc.zermelo {
        for s in &samples {
            let f = sc.metric.norm(&s.x, &s.v);
            zermelo = zermelo.max(zermelo_residual(z.as_ref(), &s.x, &s.v, f).abs());
        }
    }
    let rows_data = [
        ("homogeneity_defect", rep.homogeneity_defect, 1e-12, rep.homogeneity_ok()),
        ("definiteness_margin", rep.definiteness_margin, 0.0, rep.definiteness_ok()),
        ("cartan_symmetry_defect", rep.cartan_symmetry_defect, 1e-10, rep.cartan_ok()),
        ("euler_g_defect", rep.euler_g_defect, 1e-10, rep.euler_ok()),
        ("euler_cartan_defect", rep.euler_cartan_defect, 1e-10, rep.euler_ok()),
        ("zermelo_identity_defect", zermelo, 1e-10, zermelo < 1e-10),
        ("failures", rep.failures as f64, 0.0, rep.failures == 0),
    ];
    let ok = rows_data.iter().all(|r| r.3);
    let headers = vec!["quantity".into(), "value".into(), "tolerance".into(), "pass".into()];
    let rows = rows_data.iter().map(|(q, v, t, p)| vec![q.to_string(), num(*v), num(*t), p.to_string()]).collect();
    let data = Value::Object(
        rows_data.iter().map(|(q, v, t, p)| (q.to_string(), json!({ "value": v, "tolerance": t, "pass": p }))).collect(),
    );
    let mut summary: Vec<(String, String)> =
        rows_data.iter().map(|(q, v, _, p)| (q.to_string(), format!("{} ({})", num(*v), if *p { "ok" } else { "FAIL" }))).collect();
    summary.insert(0, ("samples".into(), samples.len().to_string()));
    Ok(Output { headers, rows, data, summary, ok })
}

fn times(t1: f64, points: usize) -> Vec<f64> {
    (0..points).map(|i| t1 * i as f64 / (points - 1) as f64).collect()
}

fn geodesic(sc: &Scenario, cfg: &RunConfig) -> Result<Output, Failure> {
    let n = sc.dim();
    let (x0, v0) = match (&cfg.x0, &cfg.v0) {
        (Some(x), Some(v)) => (x.clone(), v.clone()),
        (None, None) => {
            let (_, x, v) = probe_start(sc)?;
            (x, v)
        }
        _ => return Err(Failure::Usage("--x0 and --v0 go together".into())),
    };
    if x0.len() != n || v0.len() != n {
        return Err(Failure::Usage(format!("--x0 and --v0 need {n} components")));
    }
    let t1 = cfg.t1.unwrap_or(sc.probe.horizon);
    let geo = integrate_geodesic(&sc.metric, &x0, &v0, 0.0, t1, &cfg.opts())?;
    let mut headers = vec!["t".to_string()];
    headers.extend((1..=n).map(|i| format!("x{i}")));
    headers.extend((1..=n).map(|i| format!("v{i}")));
    headers.push("F".into());
    let mut rows = Vec::new();
    let mut pts = Vec::new();
    for t in times(t1, cfg.points.unwrap_or(101)) {
        let (x, v) = geo.state(t);
        let f = sc.metric.norm(&x, &v);
        let mut row = vec![num(t)];
        row.extend(x.iter().map(|c| num(*c)));
        row.extend(v.iter().map(|c| num(*c)));
        row.push(num(f));
        rows.push(row);
        pts.push(json!({ "t": t, "x": x, "v": v, "F": f }));
    }
    let summary = vec![
        ("scenario".into(), sc.name.clone()),
        ("t1".into(), num(t1)),
        ("speed".into(), num(geo.speed())),
        ("speed_drift".into(), num(geo.speed_drift())),
    ];
    Ok(Output { headers, rows, data: json!({ "speed_drift": geo.speed_drift(), "points": pts }), summary, ok: true })
}

fn jacobi(sc: &Scenario, cfg: &RunConfig, focal: bool) -> Result<Output, Failure> {
    let (fiber, _, xi) = probe_start(sc)?;
    let t1 = cfg.t1.unwrap_or(sc.probe.horizon);
    let s0 = sc.probe.params_centre();
    let opts = cfg.opts();
    let geo = normal_geodesic(&sc.metric, &fiber, &s0, &xi, t1, &opts)?;
    let space = l_jacobi_basis(&sc.metric, &fiber, &s0, &geo, &opts)?;
    let window = if t1 > 0.0 { (0.0, t1) } else { (t1, 0.0) };
    let rep = detect_focal_points(&space, window)?;
    let instants: Vec<Value> = rep.instants.iter().map(|f| json!({ "t": f.t, "multiplicity": f.multiplicity })).collect();
    let mut summary = vec![
        ("scenario".to_string(), sc.name.clone()),
        ("basis_dimension".into(), space.dim().to_string()),
        ("focal_instants".into(), rep.instants.len().to_string()),
    ];
    for f in &rep.instants {
        summary.push(("focal".into(), format!("t = {} (multiplicity {})", num(f.t), f.multiplicity)));
    }
    if focal {
        let headers = vec!["t".into(), "multiplicity".into()];
        let rows = rep.instants.iter().map(|f| vec![num(f.t), f.multiplicity.to_string()]).collect();
        return Ok(Output { headers, rows, data: json!({ "focal": instants }), summary, ok: true });
    }
    let headers = vec!["t".into(), "det".into(), "self_adjointness_defect".into()];
    let mut rows = Vec::new();
    let mut trace = Vec::new();
    for (t, det) in &rep.trace {
        let sa = space.self_adjointness_defect(*t);
        rows.push(vec![num(*t), num(*det), num(sa)]);
        trace.push(json!({ "t": t, "det": det, "self_adjointness_defect": sa }));
    }
    Ok(Output { headers, rows, data: json!({ "trace": trace, "focal": instants }), summary, ok: true })
}

fn wilking(sc: &Scenario, cfg: &RunConfig) -> Result<Output, Failure> {
    let fiber = sc.fiber()?;
    let t1 = cfg.t1.unwrap_or(sc.probe.horizon);
    if t1 <= 0.0 {
        return Err(Failure::Usage("--t1 must be positive for wilking".into()));
    }
    let opts = cfg.opts();
    let sf = submersion_frame(&sc.metric, &sc.spec, &fiber, &sc.probe.params_centre(), &sc.probe.direction, t1, &opts)?;
    let rep = transversal_conjugate_points(&sf.frame, 0.0, (0.0, t1), &opts)?;
    let headers = vec!["t".into(), "dim_v".into(), "degenerate".into(), "det".into()];
    let mut rows = Vec::new();
    let mut trace = Vec::new();
    for (t, vol) in &rep.trace {
        let fv = sf.frame.at(*t)?;
        rows.push(vec![num(*t), fv.dim_v().to_string(), u8::from(fv.degenerate).to_string(), num(*vol)]);
        trace.push(json!({ "t": t, "dim_v": fv.dim_v(), "degenerate": fv.degenerate, "det": vol }));
    }
    let degeneracies: Vec<Value> =
        sf.frame.degeneracies().iter().map(|d| json!({ "t": d.t, "multiplicity": d.multiplicity() })).collect();
    let conjugate: Vec<Value> = rep.instants.iter().map(|f| json!({ "t": f.t, "multiplicity": f.multiplicity })).collect();
    let mut summary = vec![
        ("scenario".to_string(), sc.name.clone()),
        ("dim_v".into(), sf.frame.dim_v().to_string()),
        ("dim_h".into(), sf.frame.dim_h().to_string()),
        ("degeneracies".into(), degeneracies.len().to_string()),
        ("conjugate_instants".into(), rep.instants.len().to_string()),
    ];
    for d in sf.frame.degeneracies() {
        summary.push(("degeneracy".into(), format!("t = {}", num(d.t))));
    }
    for f in &rep.instants {
        summary.push(("conjugate".into(), format!("t = {} (multiplicity {})", num(f.t), f.multiplicity)));
    }
    let data = json!({ "trace": trace, "degeneracies": degeneracies, "conjugate": conjugate });
    Ok(Output { headers, rows, data, summary, ok: true })
}

fn submersion(sc: &Scenario, cfg: &RunConfig) -> Result<Output, Failure> {
    let n = sc.dim();
    let k = sc.spec.base_dim();
    let mut rng = Sampler::new(cfg.seed);
    let mut headers: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    headers.extend((1..=k).map(|i| format!("w{i}")));
    headers.extend(["induced".to_string(), "declared".into(), "defect".into()]);
    let mut rows = Vec::new();
    let mut points = Vec::new();
    let mut worst = 0.0f64;
    let mut singular = 0usize;
    let mut attempts = 0usize;
    while rows.len() < cfg.samples && attempts < 100 * cfg.samples {
        attempts += 1;
        let x = sc.region.sample(&mut rng);
        if !sc.spec.is_regular(&x) {
            singular += 1;
            continue;
        }
        let w = rng.direction(k);
        let induced = induced_base_norm(&sc.metric, &sc.spec, &x, &w)?;
        let declared = sc.spec.base_metric.as_ref().map(|b| b.norm(&sc.spec.project(&x), &w));
        let defect = declared.map(|d| (d - induced).abs());
        if let Some(d) = defect {
            worst = worst.max(d);
        }
        let mut row: Vec<String> = x.iter().chain(&w).map(|c| num(*c)).collect();
        row.push(num(induced));
        row.push(declared.map(num).unwrap_or_default());
        row.push(defect.map(num).unwrap_or_default());
        rows.push(row);
        points.push(json!({ "x": x, "w": w, "induced": induced, "declared": declared, "defect": defect }));
    }
    let declared = sc.spec.base_metric.is_some();
    let ok = !declared || worst < 1e-8;
    let summary = vec![
        ("scenario".to_string(), sc.name.clone()),
        ("samples".into(), rows.len().to_string()),
        ("singular_skipped".into(), singular.to_string()),
        (
            "max_defect".into(),
            if declared { format!("{} ({})", num(worst), if ok { "ok" } else { "FAIL" }) } else { "no declared base metric".into() },
        ),
    ];
    let data = json!({ "declared_base": declared, "max_defect": if declared { Some(worst) } else { None }, "points": points });
    Ok(Output { headers, rows, data, summary, ok })
}

fn verify_cmd(sc: &Scenario, cfg: &RunConfig) -> Result<Output, Failure> {
    let settings = VerifySettings {
        samples: cfg.samples,
        r_count: cfg.r_points.unwrap_or(50),
        seed: cfg.seed,
        opts: cfg.opts(),
        ..VerifySettings::default()
    };
    let kinds: Vec<CheckKind> = cfg.checks.iter().filter_map(|c| CheckKind::parse(c)).collect();
    let report = verify(sc, &kinds, &settings);
    let headers = vec!["check".into(), "status".into(), "series".into(), "x".into(), "residual".into()];
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let mut summary = vec![("scenario".to_string(), sc.name.clone())];
    for o in &report.outcomes {
        let name = o.kind.name();
        let status = o.status.name();
        let mut push = |series: &str, x: f64, r: f64| rows.push(vec![name.into(), status.into(), series.into(), num(x), num(r)]);
        let detail = match &o.detail {
            CheckDetail::Equifocality(rep) if o.kind == finsler_core::scenario::CheckKind::Containment => {
                for row in &rep.rows {
                    push("spread", row.r, row.spread);
                }
                json!({
                    "r": rep.rows.iter().map(|r| r.r).collect::<Vec<_>>(),
                    "spread": rep.rows.iter().map(|r| r.spread).collect::<Vec<_>>(),
                    "focal_radii": rep.focal_radii,
                })
            }
            CheckDetail::Equifocality(rep) => {
                for row in &rep.rows {
                    let bad = !row.rank_constant() || !row.rank_stable();
                    push("rank_variation", row.r, if bad { 1.0 } else { 0.0 });
                }
                json!({
                    "r": rep.rows.iter().map(|r| r.r).collect::<Vec<_>>(),
                    "focal": rep.rows.iter().map(|r| r.focal).collect::<Vec<_>>(),
                    "ranks": rep.rows.iter().map(|r| r.ranks.clone()).collect::<Vec<_>>(),
                    "refined_ranks": rep.rows.iter().map(|r| r.refined_ranks.clone()).collect::<Vec<_>>(),
                    "constant": rep.rows.iter().map(|r| r.rank_constant() && r.rank_stable()).collect::<Vec<_>>(),
                    "focal_radii": rep.focal_radii,
                })
            }
            CheckDetail::Cylinders(reps) => {
                let mut series = Vec::new();
                for s in reps.iter().flat_map(|r| &r.series) {
                    let label = format!("{} -> {} ({})", s.from, s.to, s.direction.name());
                    for (d, r) in s.distances.iter().zip(s.residuals()) {
                        push(&label, *d, r);
                    }
                    series.push(json!({
                        "from": s.from,
                        "to": s.to,
                        "direction": s.direction.name(),
                        "radius": s.radius,
                        "distances": s.distances,
                        "residuals": s.residuals(),
                    }));
                }
                json!({ "series": series })
            }
            CheckDetail::Horizontal(rep) => {
                for (t, r) in &rep.residuals {
                    push("orthogonality", *t, *r);
                }
                json!({
                    "t": rep.residuals.iter().map(|p| p.0).collect::<Vec<_>>(),
                    "residuals": rep.residuals.iter().map(|p| p.1).collect::<Vec<_>>(),
                    "skipped": rep.skipped,
                })
            }
            CheckDetail::Error(m) => json!({ "error": m }),
        };
        summary.push((name.into(), format!("{status} (max residual {}, tolerance {})", num(o.max_residual), num(o.tolerance))));
        checks.push(json!({
            "check": name,
            "status": status,
            "passed": o.passed,
            "max_residual": if o.max_residual.is_finite() { Some(o.max_residual) } else { None },
            "tolerance": o.tolerance,
            "detail": detail,
        }));
    }
    let ok = report.success();
    summary.push(("result".into(), if ok { "ok".into() } else { "FAILED".into() }));
    Ok(Output { headers, rows, data: json!({ "checks": checks }), summary, ok })
}
