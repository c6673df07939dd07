use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn conelab() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_conelab"));
    for var in [
        "CONELAB_TOL",
        "CONELAB_JET_ORDER",
        "CONELAB_GRID",
        "CONELAB_SEED",
        "CONELAB_FORMAT",
        "CONELAB_OUT",
        "CONELAB_TIMING",
    ] {
        cmd.env_remove(var);
    }
    cmd
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    conelab().args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn failed_ids(report: &Value) -> Vec<String> {
    report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["pass"] == false)
        .map(|c| c["id"].as_str().unwrap().to_string())
        .collect()
}

fn check<'a>(report: &'a Value, id: &str) -> &'a Value {
    report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["id"] == id)
        .unwrap_or_else(|| panic!("no check {id}"))
}

#[test]
fn cone_identities_pass() {
    let out = run(&["verify", "cone-identities"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["pass"], true);
    assert_eq!(r["schema_version"], 1);
    for c in r["checks"].as_array().unwrap() {
        assert!(c["threshold"].is_number());
        if c["kind"] == "residual-below" {
            assert!(c["value"].as_f64().unwrap() < 1e-8, "{c}");
        }
    }
}

#[test]
fn unknown_suite_is_a_usage_error() {
    assert_eq!(run(&["verify", "everything"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        run(&["verify", "cone-identities", "--tol", "2"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn cohomology_table_passes() {
    let out = run(&["verify", "cohomology"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = json(&out);
    assert_eq!(check(&r, "cohomology.so3-standard.h1")["value"], 0.0);
}

#[test]
fn holonomy_catalog_reports_the_dimension_table() {
    let out = run(&["verify", "holonomy-catalog", "--grid", "8"]);
    let r = json(&out);
    for (id, dim) in [
        ("holonomy-catalog.cone-sphere2.dim", 3.0),
        ("holonomy-catalog.cone-hyperbolic2.dim", 0.0),
        ("holonomy-catalog.doubled-cahen-wallach.dim", 5.0),
        ("holonomy-catalog.doubled-cahen-wallach.translations", 3.0),
        ("holonomy-catalog.doubled-sphere2.dim", 3.0),
    ] {
        let c = check(&r, id);
        assert_eq!(c["value"].as_f64(), Some(dim), "{id}");
        assert_eq!(c["pass"], true, "{id}");
    }
    // the e^z y^2 wave carries a three-dimensional span, see the decisions ledger
    assert_eq!(
        check(&r, "holonomy-catalog.doubled-plane-wave-exp.dim")["value"].as_f64(),
        Some(3.0)
    );
    assert_eq!(
        failed_ids(&r),
        [
            "holonomy-catalog.doubled-plane-wave-exp.dim",
            "holonomy-catalog.doubled-plane-wave-exp.published-distance"
        ]
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn holonomy_of_the_sphere_cone() {
    let out = run(&[
        "holonomy",
        "--chart",
        "cone:sphere2",
        "--point",
        "1,1.0472,0",
        "--order",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["dim"], 3);
    assert_eq!(r["basis"].as_array().unwrap().len(), 3);
    assert!(r["stabiliser"].is_null());
}

#[test]
fn holonomy_of_the_doubled_plane_wave() {
    let out = run(&[
        "holonomy",
        "--chart",
        "doubled:plane_wave_exp",
        "--point",
        "1,0,0,0,0",
        "--order",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["dim"], 3);
    assert_eq!(r["dim_by_order"], serde_json::json!([1, 3, 3, 3]));
    assert_eq!(r["stabiliser"]["in_stabiliser"], true);
    let line: Vec<f64> = serde_json::from_value(r["null_line"].clone()).unwrap();
    assert_eq!(line.len(), 5);
    let csv = run(&[
        "holonomy",
        "--chart",
        "doubled:plane_wave_exp",
        "--point",
        "1,0,0,0,0",
        "--format",
        "csv",
    ]);
    let text = String::from_utf8(csv.stdout).unwrap();
    assert!(text.starts_with("element,row,col,value\n"));
    assert_eq!(text.lines().count(), 1 + 3 * 25);
}

#[test]
fn holonomy_argument_errors() {
    assert_eq!(
        run(&["holonomy", "--chart", "torus", "--point", "1,0"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["holonomy", "--chart", "sphere2", "--point", "1,0,0"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["holonomy", "--chart", "sphere2", "--point", "5,0"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn holonomy_of_a_custom_chart() {
    let path = config("chart-pp-wave.toml");
    let out = run(&[
        "holonomy",
        "--chart",
        path.to_str().unwrap(),
        "--point",
        "0.3,0.5,0.7",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(json(&out)["dim"].as_u64().unwrap() >= 1);
}

#[test]
fn build_null_plane_configs() {
    for name in [
        "null-plane-basic.toml",
        "null-plane-linear.toml",
        "null-plane-warped-slice.toml",
    ] {
        let out = run(&[
            "build-null-plane",
            "--config",
            config(name).to_str().unwrap(),
            "--grid",
            "8",
        ]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{name}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let r = json(&out);
        assert!(r["chart"]["source"].as_str().unwrap().contains("f1"));
        for c in r["checks"].as_array().unwrap() {
            if c["kind"] == "residual-below" {
                assert!(c["value"].as_f64().unwrap() < 1e-8, "{name}: {c}");
            }
        }
    }
}

#[test]
fn build_null_plane_rejects_vanishing_f1() {
    let out = run(&[
        "build-null-plane",
        "--config",
        config("null-plane-corrupted.toml").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let r = json(&out);
    assert_eq!(r["pass"], false);
    assert!(r["checks"][0]["note"].as_str().unwrap().contains("f1"));
}

#[test]
fn build_null_plane_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(
        &bad,
        "m0_dim = 1\nf1 = \"1 +\"\nf2 = \"0\"\ng0 = [[\"1\"]]\n",
    )
    .unwrap();
    assert_eq!(
        run(&["build-null-plane", "--config", bad.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    let missing = dir.path().join("missing.toml");
    assert_eq!(
        run(&["build-null-plane", "--config", missing.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn out_directory_receives_both_formats_and_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a");
    let second = dir.path().join("b");
    for out in [&first, &second] {
        let run = conelab()
            .args([
                "verify",
                "null-plane",
                "--grid",
                "6",
                "--out",
                out.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert_eq!(run.status.code(), Some(0));
    }
    for name in ["report.json", "report.csv"] {
        let a = std::fs::read(first.join(name)).unwrap();
        let b = std::fs::read(second.join(name)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{name} differs between runs");
    }
    let csv = std::fs::read_to_string(first.join("report.csv")).unwrap();
    assert!(csv.starts_with("suite,id,anchor,kind,value,threshold,pass,note\n"));
}

#[test]
fn settings_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("verify.toml");
    std::fs::write(&file, "grid = 4\nseed = 5\ntol = 1e-9\n").unwrap();
    let f = file.to_str().unwrap();
    let settings = |cmd: &mut Command| json(&cmd.output().unwrap())["settings"].clone();

    let s = settings(conelab().args(["verify", "cone-identities", "--config", f]));
    assert_eq!(
        (s["grid"].as_u64(), s["seed"].as_u64(), s["tol"].as_f64()),
        (Some(4), Some(5), Some(1e-9))
    );

    let s = settings(
        conelab()
            .args(["verify", "cone-identities", "--config", f])
            .env("CONELAB_GRID", "6"),
    );
    assert_eq!((s["grid"].as_u64(), s["seed"].as_u64()), (Some(6), Some(5)));

    let s = settings(
        conelab()
            .args(["verify", "cone-identities", "--config", f, "--grid", "3"])
            .env("CONELAB_GRID", "6"),
    );
    assert_eq!(s["grid"].as_u64(), Some(3));

    let s = settings(conelab().args(["verify", "cone-identities"]));
    assert_eq!(
        (s["grid"].as_u64(), s["seed"].as_u64()),
        (Some(32), Some(7))
    );
}

#[test]
fn csv_format_from_the_environment() {
    let out = conelab()
        .args(["verify", "cone-identities"])
        .env("CONELAB_FORMAT", "csv")
        .output()
        .unwrap();
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .starts_with("suite,id,"));
}

#[test]
fn timing_is_opt_in() {
    let plain = json(&run(&["verify", "cone-identities"]));
    assert!(plain.get("timing_ms").is_none());
    let timed = json(&run(&["verify", "cone-identities", "--timing", "true"]));
    assert!(timed["timing_ms"].is_u64());
}

#[test]
fn repository_verify_config_is_accepted() {
    let out = run(&[
        "verify",
        "null-plane",
        "--config",
        config("verify.toml").to_str().unwrap(),
        "--grid",
        "6",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = json(&out);
    assert!(r["checks"]
        .as_array()
        .unwrap()
        .iter()
        .any(|c| c["id"].as_str().unwrap().contains("warped-slice")));
}
