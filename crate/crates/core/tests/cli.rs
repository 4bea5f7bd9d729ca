use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rsl::cli::CSV_HEADER;

fn rsl(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rsl"))
        .args(args)
        .env("RSL_OUTPUT_DIR", out)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const SPHERE: &str = r#"
lane = "model"
geometry.family = "RoundSphere"
geometry.dim = 2
flow.t_end = 0.2
checks.run = ["rate_general", "prop1", "main_theorem", "eq5", "eq7"]
"#;

const FLAT: &str = r#"
lane = "grid"
grid.topology = "rectangle"
grid.n = 16
flow.dt = 1e-5
flow.t_end = 1e-4
checks.run = ["rate2d", "eq5", "inverse_metric", "eq6", "eq7", "bianchi"]
"#;

#[test]
fn catalog_lists_every_check() {
    let dir = tempfile::tempdir().unwrap();
    let out = rsl(&["catalog"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in rsl::config::ALL_CHECKS {
        assert!(text.contains(name), "missing {name}");
    }
    assert!(text.contains("bump(cx, cy, amplitude, width)"));
}

#[test]
fn run_writes_csv_and_report_to_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sphere.toml", SPHERE);
    let out_dir = dir.path().join("out");
    let out = rsl(&["run", cfg.to_str().unwrap()], &out_dir);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let csv = std::fs::read_to_string(out_dir.join("sphere.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER.join(",").as_str()));
    assert_eq!(lines.count(), 51);

    let report = std::fs::read_to_string(out_dir.join("sphere.report.txt")).unwrap();
    assert_eq!(report, String::from_utf8(out.stdout).unwrap());
    assert_eq!(report.lines().count(), 5);
    assert!(report.lines().all(|l| l.contains(": PASS")));
    let leftovers: Vec<_> = std::fs::read_dir(&out_dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().ends_with(".tmp"))
        .collect();
    assert!(leftovers.is_empty());
}

#[test]
fn refine_reports_flat_metric_as_exact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "flat.toml", FLAT);
    let out_dir = dir.path().join("out");
    let out = rsl(&["refine", cfg.to_str().unwrap(), "--levels", "2"], &out_dir);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_to_string(out_dir.join("flat.refine.report.txt")).unwrap();
    assert!(report.contains("degenerate (exact)"));
    let csv = std::fs::read_to_string(out_dir.join("flat.refine.csv")).unwrap();
    assert!(csv.starts_with("level,nx,ny,dt,check,param,error,order"));
}

#[test]
fn refine_needs_level_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "flat.toml", FLAT);
    assert_eq!(rsl(&["refine", cfg.to_str().unwrap()], dir.path()).status.code(), Some(2));
    assert_eq!(
        rsl(&["refine", cfg.to_str().unwrap(), "--levels", "1"], dir.path()).status.code(),
        Some(2)
    );
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("missing_lane.toml", "grid.n = 8\n"),
        ("bad_phi.toml", &FLAT.replace("grid.n = 16", "grid.n = 16\ngrid.phi = \"wobble(1)\"")),
        ("cross_lane.toml", &format!("{SPHERE}grid.n = 8\n")),
        ("bad_check.toml", &SPHERE.replace("\"eq7\"", "\"eq8\"")),
        ("syntax.toml", "lane = \n"),
    ];
    for (name, text) in cases {
        let cfg = write(dir.path(), name, text);
        let out = rsl(&["run", cfg.to_str().unwrap()], dir.path());
        assert_eq!(out.status.code(), Some(2), "{name}");
    }
    let missing = dir.path().join("absent.toml");
    assert_eq!(rsl(&["run", missing.to_str().unwrap()], dir.path()).status.code(), Some(2));
    assert_eq!(rsl(&["bogus"], dir.path()).status.code(), Some(2));
}

#[test]
fn failed_check_exits_with_one_and_still_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "tight.toml", &format!("{SPHERE}checks.tol.rate_general = 1e-16\n"));
    let out = rsl(&["run", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let report = std::fs::read_to_string(dir.path().join("tight.report.txt")).unwrap();
    assert!(report.lines().any(|l| l.starts_with("rate_general: FAIL")));
}

#[test]
fn unstable_step_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "unstable.toml", &FLAT.replace("flow.dt = 1e-5", "flow.dt = 1e-2").replace("1e-4", "1e-1"));
    let out = rsl(&["run", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn shipped_scenarios_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut count = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            rsl::config::ScenarioConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            count += 1;
        }
    }
    assert!(count >= 5);
}
