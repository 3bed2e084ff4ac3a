use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bundle_interp::algebra::exp_se3;
use bundle_interp_cli::plotdata::quaternion;
use nalgebra::{Matrix3, Vector3};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bundle-interp"))
}

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../problems").join(name)
}

fn run(args: &[&Path]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .skip(1)
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect()
}

const TWO_POINT: &str = r#"{
  "bundle": {"base": {"kind": "euclidean", "dim": 1}, "group": {"kind": "so3"}},
  "connection": {"kind": "zero"},
  "waypoints": [{"t": 0, "x": [0]}, {"t": 1, "x": [1]}],
  "boundary": {"v0": [0], "vN": [0]}
}"#;

#[test]
fn two_point_flat_problem_is_the_hermite_cubic() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "p.json", TWO_POINT);
    let out = dir.path().join("t.csv");
    let o = run(&[Path::new("solve"), &p, &out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("t,x0,xdot0,xi0,xi1,xi2,g0,"));
    for key in ["#J=", "#residual=", "#converged=true"] {
        assert!(text.contains(key), "missing {key}");
    }
    for r in rows(&text) {
        let t = r[0];
        assert!((r[1] - (3.0 * t * t - 2.0 * t * t * t)).abs() < 1e-12);
        assert!((r[2] - (6.0 * t - 6.0 * t * t)).abs() < 1e-9);
    }
}

#[test]
fn schema_errors_exit_1_and_name_the_field() {
    let dir = TempDir::new().unwrap();
    let bad = TWO_POINT.replace(r#"{"t": 1, "x": [1]}"#, r#"{"t": 1, "x": [1]}, {"t": 0.5, "x": [2]}"#);
    let p = write(&dir, "p.json", &bad);
    let o = run(&[Path::new("solve"), &p, &dir.path().join("t.csv")]);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("waypoints[2].t"), "{err}");

    let p = write(&dir, "q.json", &TWO_POINT.replace("\"kind\": \"zero\"", "\"kind\": \"spiral\""));
    let o = run(&[Path::new("solve"), &p, &dir.path().join("t.csv")]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("connection"));

    let o = run(&[Path::new("solve"), &dir.path().join("missing.json"), &dir.path().join("t.csv")]);
    assert_eq!(code(&o), 1);
}

#[test]
fn forced_non_convergence_exits_2_with_partial_output() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("t.csv");
    let o = bin()
        .args(["solve", "--max-iters", "1"])
        .arg(shipped("swimmer.json"))
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.contains("#converged=false"));
}

#[test]
fn verify_passes_fresh_solutions_and_flags_corrupted_xi() {
    let dir = TempDir::new().unwrap();
    let problem = shipped("swimmer.json");
    let out = dir.path().join("t.csv");
    assert_eq!(code(&run(&[Path::new("solve"), &problem, &out])), 0);
    let o = run(&[Path::new("verify"), &out, &problem]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["passed"], true);

    // Corrupt one xi entry in the middle of the trajectory.
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let xi_col = lines[0].split(',').position(|h| h == "xi2").unwrap();
    let mut cells: Vec<String> = lines[20].split(',').map(String::from).collect();
    let v: f64 = cells[xi_col].parse().unwrap();
    cells[xi_col] = format!("{:.16e}", v + 1e-3);
    lines[20] = cells.join(",");
    let bad = write(&dir, "bad.csv", &(lines.join("\n") + "\n"));
    let o = run(&[Path::new("verify"), &bad, &problem]);
    assert_eq!(code(&o), 3);
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["failures"], serde_json::json!(["constraint_defect"]));
}

#[test]
fn verify_identities_alone_and_mismatched_files() {
    let o = bin().args(["verify", "--identities", "--seed", "5"]).output().unwrap();
    assert_eq!(code(&o), 0);
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let bundles: Vec<&str> = report["identities"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["bundle"].as_str().unwrap())
        .collect();
    assert_eq!(bundles, ["R^2 x so3", "R^2 x se3", "R^2 x so3xso3", "SO(3)^2 x se3"]);
    let names: Vec<&str> = report["identities"][0]["checks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert!(names.iter().any(|n| n.contains("jacobi")));
    assert!(names.iter().any(|n| n.contains("bianchi")));

    let dir = TempDir::new().unwrap();
    let out = dir.path().join("flat.csv");
    assert_eq!(code(&run(&[Path::new("solve"), &shipped("flat.json"), &out])), 0);
    let o = run(&[Path::new("verify"), &out, &shipped("so3_geodesic.json")]);
    assert_eq!(code(&o), 1);
    assert_eq!(code(&bin().arg("verify").output().unwrap()), 1);
}

#[test]
fn plotdata_passes_x_through_and_traces_a_helix() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("flat.csv");
    assert_eq!(code(&run(&[Path::new("solve"), &shipped("flat.json"), &out])), 0);
    let plot = dir.path().join("flat.plot.csv");
    assert_eq!(code(&run(&[Path::new("plotdata"), &out, &plot])), 0);
    let src = std::fs::read_to_string(&out).unwrap();
    let dst = std::fs::read_to_string(&plot).unwrap();
    assert!(dst.starts_with("t,x0,x1,xdot0,xdot1,xi0,xi1,xi2,g0_qw,g0_qx,g0_qy,g0_qz\n"));
    for (a, b) in src.lines().skip(1).zip(dst.lines().skip(1)) {
        let a: Vec<&str> = a.split(',').collect();
        let b: Vec<&str> = b.split(',').collect();
        assert_eq!(a[..3], b[..3]);
    }

    // x = t on ℝ¹ under a constant se(3) connection: constant body velocity
    // ξ = −A, so g(t) = exp(−tA) is a helix.
    let a = [0.0, 0.0, -0.8, -0.3, 0.0, -0.2];
    let problem = format!(
        r#"{{
          "bundle": {{"base": {{"kind": "euclidean", "dim": 1}}, "group": {{"kind": "se3"}}}},
          "connection": {{"kind": "constant", "matrix": {a:?}}},
          "waypoints": [{{"t": 0, "x": [0]}}, {{"t": 1, "x": [1]}}, {{"t": 2, "x": [2]}}],
          "boundary": {{"v0": [1], "vN": [1]}}
        }}"#
    );
    let p = write(&dir, "helix.json", &problem);
    let out = dir.path().join("helix.csv");
    assert_eq!(code(&run(&[Path::new("solve"), &p, &out])), 0);
    let plot = dir.path().join("helix.plot.csv");
    assert_eq!(code(&run(&[Path::new("plotdata"), &out, &plot])), 0);
    let text = std::fs::read_to_string(&plot).unwrap();
    assert!(text.lines().next().unwrap().ends_with("g0_px,g0_py,g0_pz,g0_qw,g0_qx,g0_qy,g0_qz"));
    for r in rows(&text) {
        let t = r[0];
        let m = exp_se3(&(Vector3::new(-a[0], -a[1], -a[2]) * t), &(Vector3::new(-a[3], -a[4], -a[5]) * t));
        let n = r.len();
        for i in 0..3 {
            assert!((r[n - 7 + i] - m[(i, 3)]).abs() < 1e-6, "t = {t}");
        }
        let q = quaternion(&Matrix3::from_fn(|i, j| m[(i, j)]));
        for i in 0..4 {
            assert!((r[n - 4 + i] - q[i]).abs() < 1e-6);
        }
    }

    let empty = write(&dir, "empty.csv", "");
    assert_eq!(code(&run(&[Path::new("plotdata"), &empty, &dir.path().join("e.csv")])), 1);
    let header_only = write(&dir, "h.csv", "t,x0,xdot0,xi0,xi1,xi2,g0,g1,g2,g3,g4,g5,g6,g7,g8\n");
    assert_eq!(code(&run(&[Path::new("plotdata"), &header_only, &dir.path().join("e.csv")])), 1);
}

#[test]
fn solve_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        assert_eq!(code(&run(&[Path::new("solve"), &shipped("so3_geodesic.json"), out])), 0);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn soft_group_waypoints_keep_base_waypoints_and_mark_the_audit_advisory() {
    let dir = TempDir::new().unwrap();
    let p = write(
        &dir,
        "soft.json",
        r#"{
          "bundle": {"base": {"kind": "euclidean", "dim": 2}, "group": {"kind": "so3"}},
          "connection": {"kind": "constant", "matrix": [0, 0, 0, 0, 1, 0]},
          "waypoints": [
            {"t": 0, "x": [0, 0]},
            {"t": 1, "x": [1, 0.5], "g": [1, 0, 0, 0, 1, 0, 0, 0, 1]}
          ],
          "boundary": {"v0": [1, 0], "vN": [0.5, 0.5]},
          "solver": {"group_waypoints": "soft", "soft_weight": 1000}
        }"#,
    );
    let out = dir.path().join("t.csv");
    assert_eq!(code(&run(&[Path::new("solve"), &p, &out])), 0);
    let o = run(&[Path::new("verify"), &out, &p]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let item = |name: &str| {
        report["checks"].as_array().unwrap().iter().find(|c| c["name"] == name).unwrap().clone()
    };
    assert_eq!(item("waypoint_interpolation")["value"], 0.0);
    assert_eq!(item("first_variation")["advisory"], true);
}
