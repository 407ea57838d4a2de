use finsler::scenario_file::{load, LoadError, ScenarioFile, BUILTIN_FILES};
use finsler_core::sampling::Sampler;
use finsler_core::scenario::{builtin, Comparison};

#[test]
fn files_reproduce_the_builtins() {
    for (name, text) in BUILTIN_FILES {
        let file = ScenarioFile::from_json(text).unwrap().build().unwrap();
        let sc = builtin(name).unwrap().unwrap();
        assert_eq!(file.name, sc.name);
        assert_eq!(file.description, sc.description);
        assert_eq!(file.region, sc.region);
        assert_eq!(file.singular, sc.singular);
        assert_eq!(file.probe.fiber, sc.probe.fiber);
        assert_eq!(file.probe.direction, sc.probe.direction);
        assert_eq!(file.probe.params_lo, sc.probe.params_lo);
        assert_eq!(file.probe.params_hi, sc.probe.params_hi);
        assert_eq!(file.probe.plaque_lo, sc.probe.plaque_lo);
        assert_eq!(file.probe.plaque_hi, sc.probe.plaque_hi);
        assert_eq!(file.probe.r_range, sc.probe.r_range);
        assert_eq!(file.probe.horizon, sc.probe.horizon);
        assert_eq!(file.probe.comparisons, sc.probe.comparisons);
        assert_eq!(file.negative_control, sc.negative_control);
        assert_eq!(file.expect_fail, sc.expect_fail);
        assert_eq!(file.spec.base_metric.is_some(), sc.spec.base_metric.is_some());

        let n = sc.dim();
        let k = sc.spec.base_dim();
        let mut rng = Sampler::new(17);
        for _ in 0..200 {
            let x = sc.region.sample(&mut rng);
            let v = rng.direction(n);
            let (a, b) = (file.metric.norm(&x, &v), sc.metric.norm(&x, &v));
            assert!((a - b).abs() <= 1e-14 * b, "{name}: F {a} vs {b}");
            let ga = file.metric.g_matrix(&x, &v);
            let gb = sc.metric.g_matrix(&x, &v);
            assert!((ga - gb).amax() < 1e-12, "{name}: g");
            let (pa, pb) = (file.spec.project(&x), sc.spec.project(&x));
            for i in 0..k {
                assert!((pa[i] - pb[i]).abs() < 1e-15, "{name}: pi");
            }
            if let (Some(fa), Some(fb)) = (&file.spec.base_metric, &sc.spec.base_metric) {
                let c = sc.spec.project(&x);
                if c.iter().all(|v| v.abs() > 0.05) {
                    let w = rng.direction(k);
                    let (a, b) = (fa.norm(&c, &w), fb.norm(&c, &w));
                    assert!((a - b).abs() <= 1e-14 * b, "{name}: base F {a} vs {b}");
                }
            }
        }
        let s = sc.probe.params_centre();
        let (fa, fb) = (file.fiber().unwrap(), sc.fiber().unwrap());
        let (xa, xb) = (fa.point_at(&s), fb.point_at(&s));
        for i in 0..n {
            assert!((xa[i] - xb[i]).abs() < 1e-15, "{name}: fiber point");
        }
        assert!((fa.tangent_basis(&s).unwrap() - fb.tangent_basis(&s).unwrap()).amax() < 1e-14);
        let za = file.zermelo.as_ref().unwrap();
        let zb = sc.zermelo.as_ref().unwrap();
        let x = sc.region.sample(&mut rng);
        assert_eq!(za.wind_at(&x), zb.wind_at(&x), "{name}: wind");
    }
}

#[test]
fn scenario_files_round_trip() {
    for (_, text) in BUILTIN_FILES {
        let file = ScenarioFile::from_json(text).unwrap();
        let again = ScenarioFile::from_json(&file.to_json()).unwrap();
        assert_eq!(file, again);
    }
}

#[test]
fn load_accepts_names_and_paths() {
    assert_eq!(load("fig2").unwrap().name, "FIG2");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("custom.json");
    let text = BUILTIN_FILES[0].1.replace("\"FIG1\"", "\"CUSTOM\"");
    std::fs::write(&path, text).unwrap();
    let sc = load(path.to_str().unwrap()).unwrap();
    assert_eq!(sc.name, "CUSTOM");
    assert!(matches!(load("no-such-scenario"), Err(LoadError::Unknown(_))));
}

fn fig1_with(from: &str, to: &str) -> Result<finsler_core::scenario::Scenario, LoadError> {
    let text = BUILTIN_FILES[0].1;
    assert!(text.contains(from), "{from}");
    ScenarioFile::from_json(&text.replace(from, to))?.build()
}

#[test]
fn malformed_files_are_rejected() {
    assert!(matches!(fig1_with("\"0.5\", \"0\", \"(sin", "\"0.5\", \"0\", \"(tan"), Err(LoadError::Expr { .. })));
    assert!(matches!(fig1_with("\"pi\": [\"x1\"", "\"pi\": [\"x4\""), Err(LoadError::Expr { .. })));
    assert!(matches!(fig1_with("\"kind\": \"zermelo\"", "\"kind\": \"randers\""), Err(LoadError::Invalid(_))));
    assert!(matches!(fig1_with("\"fiber\": [0.3, 0.1]", "\"fiber\": [0.3]"), Err(LoadError::Invalid(_))));
    assert!(matches!(fig1_with("\"name\": \"FIG1\"", "\"nom\": \"FIG1\""), Err(LoadError::Json(_))));
    assert!(matches!(
        fig1_with("\"W\": [\"0.5\", \"0\", \"(sin(x1)^2 + 1) / 4\"]", "\"W\": [\"0.5\", \"0\", \"x1\"]"),
        Err(LoadError::Core(finsler_core::Error::WindTooStrong { .. }))
    ));
}

#[test]
fn expectations_mark_negative_controls() {
    let text = BUILTIN_FILES[0].1.trim_end().trim_end_matches('}').to_string()
        + ", \"expect\": { \"rank\": \"fail\", \"containment\": \"pass\" } }";
    let sc = ScenarioFile::from_json(&text).unwrap().build().unwrap();
    assert!(sc.negative_control);
    assert_eq!(sc.expect_fail, vec![finsler_core::scenario::CheckKind::Rank]);
    let bad = BUILTIN_FILES[0].1.trim_end().trim_end_matches('}').to_string() + ", \"expect\": { \"speed\": \"fail\" } }";
    assert!(matches!(ScenarioFile::from_json(&bad).unwrap().build(), Err(LoadError::Invalid(_))));
}

#[test]
fn point_comparisons_are_loaded() {
    let sc = load(BUILTIN_FILES[1].0).unwrap();
    assert!(sc.probe.comparisons.iter().any(|c| matches!(c, Comparison::Point(p) if p == &vec![0.0, 0.0, 0.0])));
}
