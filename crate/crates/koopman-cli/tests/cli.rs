//! End-to-end runs of the `koopman` binary: artifact shapes, exit codes,
//! and byte-level determinism of the JSON report and CSV grid.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_koopman")
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

/// Report JSON with the run-dependent timing block removed; everything
/// else must be reproducible bit for bit.
fn report_sans_timing(dir: &Path, name: &str) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(&read(dir, name)).unwrap();
    v.as_object_mut().unwrap().remove("timing_seconds");
    v
}

/// Stable linear node with a nonresonant spectrum {−0.7, −1.9}.
const LINEAR: &str = "dim = 2\n\
                      f1 = -7/10*x1\n\
                      f2 = -19/10*x2\n\
                      box = -1 1 -1 1\n";

/// Cubic-damped oscillator on a box small enough for a certified
/// Bernstein solve at a modest degree.
const CUBIC: &str = "dim = 2\n\
                     f1 = -x2\n\
                     f2 = x1 - x2 + x1^2*x2\n\
                     box = -1 1 -1 1\n\
                     method = bernstein\n\
                     degree = 30\n";

/// Unit-circle limit cycle with angle-modulated attraction rate.
const MODULATED: &str = "dim = 2\n\
                         coords = polar\n\
                         fr = r*(1 - r^2)*(2 + cos(6*theta) - cos(10*theta))\n\
                         ftheta = 1\n";

#[test]
fn grid_has_exact_header_shape_and_abs_column() {
    let dir = scratch("grid-shape");
    std::fs::write(dir.join("sys.txt"), LINEAR).unwrap();
    let out = run_in(
        &dir,
        &[
            "analyze-fp", "sys.txt", "--order", "6", "--resolution", "3", "--samples", "5",
            "--report", "r.json", "--grid", "g.csv",
        ],
    );
    // Taylor expansions carry no residual certificate: completed, not
    // certified.
    assert_eq!(code(&out), 2, "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let grid = read(&dir, "g.csv");
    let lines: Vec<&str> = grid.lines().collect();
    assert_eq!(lines[0], "x1,x2,re_phi,im_phi,abs_phi,lyapunov,decreasing");
    assert_eq!(lines.len(), 1 + 9, "3x3 lattice means 9 data rows");

    let mut rows = Vec::new();
    for line in &lines[1..] {
        let fields: Vec<f64> = line.split(',').map(|f| f.parse().unwrap()).collect();
        assert_eq!(fields.len(), 7);
        rows.push(fields);
    }
    // Row-major with x2 varying fastest.
    assert_eq!((rows[0][0], rows[0][1]), (-1.0, -1.0));
    assert_eq!((rows[1][0], rows[1][1]), (-1.0, 0.0));
    assert_eq!((rows[2][0], rows[2][1]), (-1.0, 1.0));
    assert_eq!((rows[3][0], rows[3][1]), (0.0, -1.0));
    // abs_phi is exactly the root of the printed component squares, and
    // the decrease flag is boolean.
    for row in &rows {
        let (re, im, abs) = (row[2], row[3], row[4]);
        assert_eq!(abs, (re * re + im * im).sqrt());
        assert!(row[6] == 0.0 || row[6] == 1.0);
    }
}

#[test]
fn reruns_are_byte_identical() {
    let args = [
        "analyze-fp", "sys.txt", "--order", "8", "--resolution", "9", "--samples", "10",
        "--report", "r.json", "--grid", "g.csv",
    ];
    let a = scratch("determinism-a");
    let b = scratch("determinism-b");
    for dir in [&a, &b] {
        std::fs::write(dir.join("sys.txt"), LINEAR).unwrap();
        assert_eq!(code(&run_in(dir, &args)), 2);
    }
    assert_eq!(read(&a, "g.csv"), read(&b, "g.csv"), "grids differ");
    assert_eq!(
        report_sans_timing(&a, "r.json"),
        report_sans_timing(&b, "r.json"),
        "reports differ beyond timing"
    );
    // The sampling seed changes verification samples, never the solution
    // artifacts.
    let c = scratch("determinism-c");
    std::fs::write(c.join("sys.txt"), LINEAR).unwrap();
    let mut seeded: Vec<&str> = args.to_vec();
    seeded.extend_from_slice(&["--seed", "7"]);
    assert_eq!(code(&run_in(&c, &seeded)), 2);
    assert_eq!(read(&a, "g.csv"), read(&c, "g.csv"));
}

#[test]
fn certified_bernstein_analysis_round_trips() {
    let dir = scratch("bernstein-certified");
    std::fs::write(dir.join("sys.txt"), CUBIC).unwrap();
    let out = run_in(
        &dir,
        &[
            "analyze-fp", "sys.txt", "--resolution", "21", "--samples", "20",
            "--report", "r.json", "--grid", "g.csv",
        ],
    );
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&read(&dir, "r.json")).unwrap();
    assert_eq!(report["schema"], 1);
    assert_eq!(report["certified"], true);
    assert_eq!(report["basin"]["certified"], true);
    assert_eq!(report["verification"]["pass"], true);
    // The second member is the conjugate of the first, not a second solve.
    assert_eq!(report["eigenfunctions"][1]["conjugate_of"], 0);

    // verify rechecks the certificates from scratch and agrees.
    let out = run_in(&dir, &["verify", "r.json"]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let log = String::from_utf8_lossy(&out.stdout);
    assert!(
        log.contains("recomputed certified: true (report said true)"),
        "got: {log}"
    );

    // emit-grid reproduces the analysis grid bit for bit at the same
    // resolution, defaulting to the report's own lattice bounds.
    let out = run_in(&dir, &["emit-grid", "r.json", "--resolution", "21", "--out", "g2.csv"]);
    assert_eq!(code(&out), 0);
    assert_eq!(read(&dir, "g.csv"), read(&dir, "g2.csv"));

    // A unit-box 3x3 re-render has exactly nine data rows.
    let out = run_in(
        &dir,
        &[
            "emit-grid", "r.json", "--resolution", "3", "--box", "0", "1", "0", "1",
            "--out", "g3.csv",
        ],
    );
    assert_eq!(code(&out), 0);
    assert_eq!(read(&dir, "g3.csv").lines().count(), 1 + 9);
}

#[test]
fn parse_errors_exit_one_with_stage_and_position() {
    let dir = scratch("parse-error");
    std::fs::write(dir.join("sys.txt"), "dim = 2\nf1 = x3\nf2 = -x2\n").unwrap();
    let out = run_in(&dir, &["analyze-fp", "sys.txt", "--report", "r.json"]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("stage `parse`"), "got: {err}");
    assert!(err.contains("line 2, column 6"), "got: {err}");
    assert!(err.contains("undeclared variable `x3`"), "got: {err}");
    assert!(!dir.join("r.json").exists(), "no report on error");
}

#[test]
fn limit_cycle_analysis_certifies_and_round_trips() {
    let dir = scratch("lc-certified");
    std::fs::write(dir.join("sys.txt"), MODULATED).unwrap();
    let out = run_in(
        &dir,
        &[
            "analyze-lc", "sys.txt", "--nbar", "34", "--degree", "20", "--resolution", "15",
            "--samples", "15", "--report", "r.json", "--grid", "g.csv",
        ],
    );
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&read(&dir, "r.json")).unwrap();
    assert_eq!(report["certified"], true);
    let exponent = report["cycle"]["floquet_exponent"]["re"].as_f64().unwrap();
    assert!((exponent + 4.0).abs() < 1e-6, "Floquet exponent {exponent}");
    assert_eq!(report["verification"]["fresh_grid"]["pass"], true);

    // The analysis artifact is the annulus grid of log|φ|, row-major
    // with y varying fastest.
    let grid = read(&dir, "g.csv");
    let lines: Vec<&str> = grid.lines().collect();
    assert_eq!(lines[0], "theta,y,x1,x2,log_abs_phi");
    assert_eq!(lines.len(), 1 + 15 * 15);
    let first: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(first[0], "0"); // θ = 0
    assert_eq!(first[1], "0"); // y = 0: the cycle, where log|φ| dives
    let near_cycle: f64 = first[4].parse().unwrap();
    let off_cycle: f64 = lines[8].split(',').nth(4).unwrap().parse().unwrap();
    assert!(near_cycle < off_cycle, "log|φ| grows away from the cycle");

    // A rectangular contour grid is still available through emit-grid;
    // the annulus chart leaves its corners undefined.
    let out = run_in(&dir, &["emit-grid", "r.json", "--resolution", "9", "--out", "sq.csv"]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let square = read(&dir, "sq.csv");
    assert!(square.lines().nth(1).unwrap().contains("NaN"), "corner rows are NaN");

    let out = run_in(&dir, &["verify", "r.json"]);
    assert_eq!(code(&out), 0, "stdout: {}", String::from_utf8_lossy(&out.stdout));
    let log = String::from_utf8_lossy(&out.stdout);
    assert!(log.contains("fresh-grid defect"), "got: {log}");
    assert!(
        log.contains("recomputed certified: true (report said true)"),
        "got: {log}"
    );
}

#[test]
fn uncertified_lc_run_exits_two() {
    let dir = scratch("lc-uncertified");
    std::fs::write(dir.join("sys.txt"), MODULATED).unwrap();
    // Too little resolution to certify the strongly contracting mode, but
    // enough harmonics to represent the field: completed, not certified.
    let out = run_in(
        &dir,
        &[
            "analyze-lc", "sys.txt", "--nbar", "12", "--degree", "8", "--no-grid",
            "--samples", "10", "--report", "r.json",
        ],
    );
    assert_eq!(code(&out), 2, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&read(&dir, "r.json")).unwrap();
    assert_eq!(report["certified"], false);
    assert_eq!(report["artifacts"].as_array().unwrap().len(), 0);

    // Too few harmonics to represent the cos(10θ) modulation at all: the
    // field projection fails, and that is an error, not a completion.
    let out = run_in(
        &dir,
        &[
            "analyze-lc", "sys.txt", "--nbar", "6", "--degree", "8", "--no-grid",
            "--report", "r2.json",
        ],
    );
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("stage `projection`"), "got: {err}");
    assert!(!dir.join("r2.json").exists(), "no report on error");
}
