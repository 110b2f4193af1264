use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use deltabose_cli::output::parse_records_csv;
use deltabose_cli::JobSpec;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_deltabose"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn golden(name: &str) -> String {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    std::fs::read_to_string(p).unwrap()
}

/// Token-wise comparison: text must match exactly, numbers to `1e-9`
/// relative (or `1e-15` absolute, for error estimates near rounding).
fn assert_matches_golden(got: &str, name: &str) {
    let want = golden(name);
    let split = |s: &str| -> Vec<String> {
        s.split(|c: char| c == ',' || c.is_whitespace() || c == ';' || c == '"' || c == ':')
            .filter(|t| !t.is_empty())
            .map(String::from)
            .collect()
    };
    let (g, w) = (split(got), split(&want));
    assert_eq!(g.len(), w.len(), "{name}: token count differs\n{got}");
    assert_eq!(got.lines().next(), want.lines().next(), "{name}: header differs");
    for (a, b) in g.iter().zip(&w) {
        match (a.parse::<f64>(), b.parse::<f64>()) {
            (Ok(x), Ok(y)) => {
                let ok = x == y || (x - y).abs() <= 1e-9 * y.abs() || (x - y).abs() <= 1e-15;
                assert!(ok, "{name}: {a} vs golden {b}");
            }
            _ => assert_eq!(a, b, "{name}"),
        }
    }
}

#[test]
fn golden_outputs() {
    let out = run(&["eval", "--n", "1", "--t", "1", "--x", "0", "--y", "0", "--kappa", "0", "--method", "tw"]);
    assert!(out.status.success());
    assert_matches_golden(&stdout(&out), "eval_heat.json");

    let out = run(&[
        "eval", "--x", "0,0.5", "--y", "-0.25,0.25", "--t", "0.5", "--kappa", "1", "--method", "thm2", "--format",
        "csv",
    ]);
    assert_matches_golden(&stdout(&out), "eval_thm2.csv");

    let out = run(&["compare", "--x", "0,0.5", "--y", "0,0.5", "--t", "1", "--kappa", "-1", "--format", "csv"]);
    assert!(out.status.success());
    assert_matches_golden(&stdout(&out), "compare_repulsive.csv");

    let out = run(&["verify", "identities", "--seed", "1", "--format", "csv"]);
    assert!(out.status.success());
    assert_matches_golden(&stdout(&out), "verify_identities.csv");

    let out = run(&[
        "sweep", "--n", "2", "--kappa", "1", "--param", "t", "--values", "0.5,1", "--methods", "thm2,zero-point",
        "--format", "dat",
    ]);
    assert_matches_golden(&stdout(&out), "sweep_t.dat");
}

#[test]
fn heat_kernel_value() {
    let out = run(&["eval", "--n", "1", "--t", "1", "--x", "0", "--y", "0", "--kappa", "0", "--method", "tw"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((v["value"].as_f64().unwrap() - 0.282_094_791_8).abs() < 1e-10);
}

#[test]
fn zero_point_flag_matches_thm2() {
    let zp = run(&["eval", "--n", "2", "--t", "1", "--zero-point", "--kappa", "1", "--format", "csv"]);
    let th = run(&["eval", "--n", "2", "--t", "1", "--kappa", "1", "--method", "thm2", "--format", "csv"]);
    let a = &parse_records_csv(&stdout(&zp)).unwrap()[0];
    let b = &parse_records_csv(&stdout(&th)).unwrap()[0];
    assert_eq!(a.method, "zero-point");
    assert!(a.value > 0.0);
    assert!((a.value - b.value).abs() <= 1e-9 * b.value);
}

#[test]
fn csv_records_reproduce_the_query() {
    let out = run(&[
        "compare", "--x", "-0.3,0.1,0.7", "--y", "-0.2,0.2,0.2", "--t", "0.6", "--kappa", "-0.4", "--format", "csv",
    ]);
    assert!(out.status.success());
    let recs = parse_records_csv(&stdout(&out)).unwrap();
    assert_eq!(recs.len(), 2);
    for r in recs {
        assert_eq!(r.x, [-0.3, 0.1, 0.7]);
        assert_eq!(r.y, [-0.2, 0.2, 0.2]);
        assert_eq!(r.t, 0.6);
        assert_eq!(r.kappa, -0.4);
        assert_eq!(r.n, 3);
    }
}

#[test]
fn json_records_reproduce_the_query() {
    let out = run(&["eval", "--x", "0.1,0.30000000000000004", "--t", "0.7", "--kappa", "0.3"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["x"][1].as_f64().unwrap(), 0.1 + 0.2);
    assert_eq!(v["t"].as_f64().unwrap(), 0.7);
    assert_eq!(v["method"], "thm1");
}

#[test]
fn exit_codes() {
    let out = run(&["eval", "--x", "1,0", "--t", "1", "--kappa", "-1"]);
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8(out.stderr).unwrap();
    assert!(msg.contains("ordered sector"), "{msg}");

    let out = run(&["compare", "--n", "2", "--t", "1", "--kappa", "-1", "--methods", "tw,thm2"]);
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8(out.stderr).unwrap();
    assert!(msg.contains("allowed: tw, eigen"), "{msg}");

    let out = run(&["eval", "--n", "2", "--t", "1", "--kappa", "1", "--method", "pde", "--pde-du", "0.2", "--pde-dtau", "0.2"]);
    assert_eq!(out.status.code(), Some(1));

    let out = run(&["eval", "--n", "8", "--t", "1", "--kappa", "1", "--zero-point", "--tol", "1e-14"]);
    assert_eq!(out.status.code(), Some(3));

    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["verify", "poles"]).status.code(), Some(0));
}

#[test]
fn job_file_equals_flags() {
    let dir = tempfile::tempdir().unwrap();
    let job = dir.path().join("job.json");
    std::fs::write(
        &job,
        r#"{"command":"eval","x":[0,0.5],"y":[0,0.5],"t":1,"kappa":1,"methods":["thm2"],"format":"csv"}"#,
    )
    .unwrap();
    let a = run(&["--job", job.to_str().unwrap()]);
    let b = run(&["eval", "--x", "0,0.5", "--y", "0,0.5", "--t", "1", "--kappa", "1", "--method", "thm2", "--format", "csv"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);

    std::fs::write(&job, r#"{"command":"eval","n":2,"t":1,"kappa":1,"frobs":3}"#).unwrap();
    assert_eq!(run(&["--job", job.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn output_file_is_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<PathBuf> = ["one.csv", "two.csv"].iter().map(|n| dir.path().join(n)).collect();
    for (threads, path) in ["1", "3"].iter().zip(&paths) {
        let out = bin()
            .env("DELTABOSE_THREADS", threads)
            .args(["compare", "--x", "0,0.2", "--y", "0.1,0.4", "--t", "0.5", "--kappa", "0.8"])
            .args(["--methods", "thm1,thm2,mc", "--mc-paths", "10000", "--mc-steps", "1000", "--seed", "9"])
            .args(["--format", "csv", "-o", path.to_str().unwrap()])
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(out.stdout.is_empty());
    }
    let a = std::fs::read(&paths[0]).unwrap();
    assert_eq!(a, std::fs::read(&paths[1]).unwrap());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);
    let bad = bin().env("DELTABOSE_THREADS", "0").args(["verify", "identities"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn job_spec_round_trips_through_json() {
    let job = JobSpec::from_json(
        r#"{"command":"sweep","n":2,"kappa":-1,"sweep":{"param":"t","values":[0.25,0.5]},"methods":["tw","pde"],
            "pde_du":0.002,"format":"dat","output":"out.dat","seed":4}"#,
    )
    .unwrap();
    let again = JobSpec::from_json(&serde_json::to_string(&job).unwrap()).unwrap();
    assert_eq!(again, job);
}
