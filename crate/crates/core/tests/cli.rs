//! End-to-end runs of the command-line front end against shipped and
//! hand-written plans.

mod common;

use std::fs;
use std::path::{Path, PathBuf};

use switchback_cv::cli::{execute, main_with_args, Overrides, Subcommand};
use switchback_cv::plan::OutputFormat;

use common::plan_path;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(cmd: Subcommand, plan: &Path, out_dir: &Path, format: Option<OutputFormat>) -> Run {
    let overrides = Overrides {
        out_dir: Some(out_dir.to_path_buf()),
        format,
        quiet: true,
        ..Overrides::default()
    };
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = execute(cmd, plan, &overrides, &mut out, &mut err);
    Run {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn write_plan(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("plan.toml");
    fs::write(&path, body).unwrap();
    path
}

const SYMMETRIC: &str = r#"
schema_version = 1
[box]
lower = [1.0, 1.0]
upper = [9.0, 9.0]
[demand]
model = "linear"
a = [100.0, 100.0]
b = [[10.0, 4.0], [4.0, 10.0]]
"#;

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn check_reports_contraction_and_writes_nothing_else() {
    let tmp = tempfile::tempdir().unwrap();
    let r = run(
        Subcommand::Check,
        &plan_path("symmetric_duopoly.toml"),
        tmp.path(),
        None,
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.contains("‖Dz‖∞ = 0.2 < 1"), "{}", r.stdout);
    let mut files: Vec<_> = fs::read_dir(tmp.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    files.sort();
    assert_eq!(files, ["check.json", "manifest.json"]);
}

#[test]
fn solve_returns_nash() {
    let tmp = tempfile::tempdir().unwrap();
    let r = run(
        Subcommand::Solve,
        &plan_path("symmetric_duopoly.toml"),
        tmp.path(),
        None,
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = json(&tmp.path().join("solve.json"));
    for key in ["result", "closed_form"] {
        let price: Vec<f64> = serde_json::from_value(v[key]["price"].clone()).unwrap();
        assert!(price.iter().all(|p| (p - 6.25).abs() <= 1e-8), "{key}: {price:?}");
    }
    assert_eq!(v["contraction"]["norm_sup"], 0.2);
}

#[test]
fn sweep_csv_has_one_row_per_level() {
    let tmp = tempfile::tempdir().unwrap();
    let r = run(
        Subcommand::Sweep,
        &plan_path("symmetric_duopoly.toml"),
        tmp.path(),
        Some(OutputFormat::Csv),
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    let mut rd = csv::Reader::from_path(tmp.path().join("sweep.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 5);
    let last: Vec<f64> = rows[4][2].split(';').map(|s| s.parse().unwrap()).collect();
    assert!(last.iter().all(|p| (p - 25.0 / 3.0).abs() <= 1e-8));
}

#[test]
fn design_masses_must_sum_to_one() {
    let tmp = tempfile::tempdir().unwrap();
    let body = format!(
        "{SYMMETRIC}\n[design]\nkind = \"table\"\ntable = {{ \"00\" = 0.3, \"01\" = 0.2, \"10\" = 0.2, \"11\" = 0.2 }}\n"
    );
    let plan = write_plan(tmp.path(), &body);
    let r = run(Subcommand::Check, &plan, &tmp.path().join("out"), None);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("design.table"), "{}", r.stderr);
}

#[test]
fn unknown_keys_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let plan = write_plan(tmp.path(), &format!("{SYMMETRIC}\n[solver]\ntolerance = 1e-9\n"));
    let r = run(Subcommand::Solve, &plan, &tmp.path().join("out"), None);
    assert_eq!(r.code, 2, "{}", r.stderr);
}

#[test]
fn non_contracting_market_exits_with_solver_status() {
    let tmp = tempfile::tempdir().unwrap();
    // Cross slopes close to own slopes: the update map is not a contraction.
    let body = SYMMETRIC.replace("[[10.0, 4.0], [4.0, 10.0]]", "[[10.0, 9.5], [9.5, 10.0]]")
        + "\n[conjecture]\nsource = \"matrix\"\nmatrix = [[0.0, 1.0], [1.0, 0.0]]\n";
    let plan = write_plan(tmp.path(), &body);
    let r = run(Subcommand::Solve, &plan, &tmp.path().join("out"), None);
    assert_eq!(r.code, 3, "{}{}", r.stdout, r.stderr);
    assert!(r.stderr.starts_with("error [solver]"), "{}", r.stderr);
}

#[test]
fn simulate_without_learning_section_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let plan = write_plan(tmp.path(), SYMMETRIC);
    let r = run(Subcommand::Simulate, &plan, &tmp.path().join("out"), None);
    assert_eq!(r.code, 2, "{}", r.stderr);
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

#[test]
fn reruns_reproduce_artifacts_and_quiet_changes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let plan = plan_path("rate.toml");
    let dirs: Vec<PathBuf> = (0..2).map(|k| tmp.path().join(format!("run{k}"))).collect();
    for (k, d) in dirs.iter().enumerate() {
        let mut args = vec![
            "switchback-cv".to_string(),
            "rate".into(),
            plan.display().to_string(),
            "--reps".into(),
            "4".into(),
            "--format".into(),
            "csv".into(),
            "--out-dir".into(),
            d.display().to_string(),
        ];
        if k == 1 {
            args.push("--quiet".into());
        }
        assert_eq!(main_with_args(args), 0);
    }
    let (a, b) = (dir_bytes(&dirs[0]), dir_bytes(&dirs[1]));
    assert_eq!(a, b);
    let names: Vec<&str> = a.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["manifest.json", "ratefit.json", "stats.csv"]);
    let manifest = json(&dirs[0].join("manifest.json"));
    assert_eq!(manifest["subcommand"], "rate");
    assert_eq!(manifest["artifacts"], serde_json::json!(["stats.csv", "ratefit.json"]));
    assert_eq!(manifest["plan_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn seed_override_changes_the_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let plan = plan_path("independent_nash.toml");
    let mut traces = Vec::new();
    for seed in [1u64, 2] {
        let d = tmp.path().join(format!("s{seed}"));
        let overrides = Overrides {
            seed: Some(seed),
            out_dir: Some(d.clone()),
            format: Some(OutputFormat::Csv),
            quiet: true,
            ..Overrides::default()
        };
        let code = execute(
            Subcommand::Simulate,
            &plan,
            &overrides,
            &mut Vec::new(),
            &mut Vec::new(),
        );
        assert_eq!(code, 0);
        assert_eq!(json(&d.join("manifest.json"))["seed"], seed);
        traces.push(fs::read_to_string(d.join("trace.csv")).unwrap());
    }
    assert_ne!(traces[0], traces[1]);
    assert!(traces[0].starts_with("run_id,batch,seller,p_hat"));
}
