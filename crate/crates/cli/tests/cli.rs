use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stiffcal"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// parameter -> (value, ci) from a parameter CSV.
fn parameters(path: &Path) -> BTreeMap<String, (f64, f64)> {
    let text = fs::read_to_string(path).unwrap();
    text.lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), (f[2].parse().unwrap(), f[3].parse().unwrap()))
        })
        .collect()
}

/// series -> points from a long-format CSV.
fn series(path: &Path) -> BTreeMap<String, Vec<(f64, f64)>> {
    let mut out: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for l in fs::read_to_string(path).unwrap().lines().skip(1) {
        let f: Vec<&str> = l.split(',').collect();
        out.entry(f[1].to_string())
            .or_default()
            .push((f[0].parse().unwrap(), f[2].parse().unwrap()));
    }
    out
}

fn output_digests(dir: &Path) -> serde_json::Value {
    let text = fs::read_to_string(dir.join("manifest.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["outputs"].clone()
}

#[test]
fn geom_ident_on_tracker_data() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("g");
    let stdout = run_ok(&["geom-ident", "--data", s(&data("table1.csv")), "--out", s(&out)]).stdout;
    assert!(String::from_utf8(stdout).unwrap().contains("L, [mm]"));
    let p = parameters(&out.join("geometry.csv"));
    assert!((p["L"].0 - 184.72).abs() < 0.2);
    assert!((p["a_x"].0 - 685.93).abs() < 2.0);
    assert!((p["a_y"].0 - 120.30).abs() < 2.0);
    let geometry: toml::Table = fs::read_to_string(out.join("compensator_geometry.toml")).unwrap().parse().unwrap();
    assert_eq!(geometry["q2_sign"].as_float(), Some(-1.0));
    let manifest = fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("table1.csv"));
    assert!(manifest.contains("\"seed\": 0"));
}

#[test]
fn simulate_is_reproducible_from_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    run_ok(&["simulate", "--kind", "geometry", "--model", s(&data("kr270_synthetic.toml")), "--seed", "7", "--out", s(&a)]);
    run_ok(&["simulate", "--kind", "geometry", "--model", s(&data("kr270_synthetic.toml")), "--seed", "7", "--out", s(&b)]);
    run_ok(&["simulate", "--kind", "geometry", "--model", s(&data("kr270_synthetic.toml")), "--seed", "8", "--out", s(&c)]);
    assert_eq!(output_digests(&a), output_digests(&b));
    assert_ne!(output_digests(&a), output_digests(&c));
    assert_eq!(fs::read(a.join("markers.csv")).unwrap(), fs::read(b.join("markers.csv")).unwrap());
}

#[test]
fn elasto_ident_recovers_simulation_truth() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("sim");
    let ident = tmp.path().join("ident");
    let model = data("kr270_synthetic.toml");
    run_ok(&[
        "simulate", "--kind", "deflection", "--model", s(&model), "--plan", s(&data("table3_plan.csv")),
        "--linear", "--sigma-mm", "0", "--out", s(&sim),
    ]);
    let stdout = run_ok(&["elasto-ident", "--records", s(&sim.join("records.csv")), "--model", s(&model), "--out", s(&ident)])
        .stdout;
    let report = String::from_utf8(stdout).unwrap();
    assert!(report.contains("equations: 405"), "{report}");
    let p = parameters(&ident.join("elasto.csv"));
    let truth = [("k3", 0.406), ("k4", 3.002), ("k5", 3.303), ("k6", 2.365), ("k2 (bare)", 0.302), ("K_c", 53984.0), ("s0", 458.0)];
    for (name, value) in truth {
        let (est, ci) = p[name];
        assert!((est / value - 1.0).abs() < 1e-6, "{name}: {est} vs {value}");
        assert!(ci.abs() < 1e-6 * value, "{name}: ci {ci}");
    }

    let curves = series(&ident.join("k2_equivalent.csv"));
    let bare = &curves["k2_bare"];
    let equivalent = &curves["k2_equivalent"];
    assert_eq!(equivalent.len(), 141);
    assert_eq!(curves["k2_identified"].len(), 5);
    for (e, b) in equivalent.iter().zip(bare) {
        assert_eq!(e.0, b.0);
        assert!(e.1 < b.1, "q2 = {}: {} >= {}", e.0, e.1, b.1);
    }
}

#[test]
fn elasto_ident_accepts_identified_geometry() {
    let tmp = tempfile::tempdir().unwrap();
    let (g, sim, ident) = (tmp.path().join("g"), tmp.path().join("sim"), tmp.path().join("ident"));
    let model = data("kr270_synthetic.toml");
    run_ok(&["geom-ident", "--data", s(&data("table1.csv")), "--out", s(&g)]);
    run_ok(&[
        "simulate", "--kind", "deflection", "--model", s(&model), "--plan", s(&data("table3_plan.csv")),
        "--seed", "3", "--out", s(&sim),
    ]);
    run_ok(&[
        "elasto-ident", "--records", s(&sim.join("records.csv")), "--model", s(&model),
        "--geometry", s(&g.join("compensator_geometry.toml")), "--samples", "200", "--out", s(&ident),
    ]);
    let p = parameters(&ident.join("elasto.csv"));
    let (kc, ci) = p["K_c"];
    assert!((kc - 53984.0).abs() < ci * 1.5, "K_c {kc} ± {ci}");
    let manifest = fs::read_to_string(ident.join("manifest.json")).unwrap();
    assert_eq!(manifest.matches("sha256").count(), 3 + 3);
}

#[test]
fn eta_curve_series_and_empty_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("eta");
    let model = data("kr270_synthetic.toml");
    run_ok(&["eta-curve", "--model", s(&model), "--s0-mm", "400,458,500", "--out", s(&out)]);
    let curves = series(&out.join("eta_curve.csv"));
    assert_eq!(curves.len(), 3);
    for points in curves.values() {
        assert_eq!(points.len(), 141);
        assert_eq!(points[0].0, -140.0);
        assert_eq!(points[140].0, 0.0);
    }
    let empty = run(&["eta-curve", "--model", s(&model), "--points", "0", "--out", s(&out)]);
    assert_eq!(empty.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&empty.stderr).contains("empty grid"));
}

#[test]
fn doe_writes_feasible_plan() {
    let tmp = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(data("doe_constraints.toml"))
        .unwrap()
        .replace("starts = 20", "starts = 3")
        .replace("levels = 3", "levels = 1");
    let constraints = tmp.path().join("c.toml");
    fs::write(&constraints, text).unwrap();
    let out = tmp.path().join("doe");
    let model = data("kr270_synthetic.toml");
    run_ok(&["doe", "--model", s(&model), "--constraints", s(&constraints), "--seed", "5", "--out", s(&out)]);
    let plan = fs::read_to_string(out.join("plan.csv")).unwrap();
    assert_eq!(plan.lines().count(), 16);
    let report = fs::read_to_string(out.join("doe_report.txt")).unwrap();
    assert!(report.contains("score"));

    let again = tmp.path().join("doe2");
    run_ok(&["doe", "--model", s(&model), "--constraints", s(&constraints), "--seed", "5", "--out", s(&again)]);
    assert_eq!(plan, fs::read_to_string(again.join("plan.csv")).unwrap());
}

#[test]
fn predict_single_and_batch() {
    let tmp = tempfile::tempdir().unwrap();
    let model = data("kr270_synthetic.toml");
    let one = tmp.path().join("one");
    run_ok(&[
        "predict", "--model", s(&model), "--q-deg", "0,-50,30,10,-60,20", "--wrench", "800,300,-1500,0,0,0",
        "--out", s(&one),
    ]);
    assert_eq!(fs::read_to_string(one.join("prediction.csv")).unwrap().lines().count(), 2);
    assert_eq!(fs::read_to_string(one.join("cartesian_stiffness.csv")).unwrap().lines().count(), 7);

    let batch = tmp.path().join("batch");
    run_ok(&["predict", "--model", s(&model), "--loads", s(&data("table3_plan.csv")), "--out", s(&batch)]);
    let text = fs::read_to_string(batch.join("prediction.csv")).unwrap();
    assert_eq!(text.lines().count(), 16);
    // 2600 N downward: the tool sinks
    for line in text.lines().skip(1) {
        let dz: f64 = line.split(',').nth(15).unwrap().parse().unwrap();
        assert!(dz < 0.0);
    }
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(run(&["geom-ident", "--bogus-flag"]).status.code(), Some(1));

    let missing = run(&["geom-ident", "--data", "/definitely/missing.csv", "--out", s(&out)]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("/definitely/missing.csv"));

    let singular = run(&[
        "predict", "--model", s(&data("kr270_synthetic.toml")), "--q-deg", "0,0,0,0,0,0", "--wrench", "0,0,-100,0,0,0",
        "--out", s(&out),
    ]);
    assert_eq!(singular.status.code(), Some(2), "{}", String::from_utf8_lossy(&singular.stderr));

    let short = run(&["predict", "--model", s(&data("kr270_synthetic.toml")), "--q-deg", "0,0", "--wrench", "1,0,0,0,0,0", "--out", s(&out)]);
    assert_eq!(short.status.code(), Some(1));
}
