//! End-to-end runs of the binary: exit codes, report determinism, and the
//! file formats the subcommands exchange.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const EXAMPLE2: &str = "\
frame example2
world w0
world a1
world a2
world a3
world b1
world b2
designated w0
edge w0 *
biedge a1 a2
biedge a1 a3
biedge a2 a3
close reflexive
end
";

const UNIVERSAL5: &str = "\
frame s5
world w0
world v1
world v2
world v3
world v4
designated w0
edge * *
end
";

const TWO_ORBIT_SPEC: &str = "\
atoms = p
orbit 0: prior = mixture(0.5 @ theta:0.2; 0.5 @ theta:0.8)
orbit 1: prior = beta(2, 2)
coupling = independent
designated = point(theta:0.5)
";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_modalx"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, contents).unwrap();
    path
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON document")
}

#[test]
fn orbits_reports_example2_structure() {
    let dir = tempfile::tempdir().unwrap();
    let frame = write(dir.path(), "example2.frame", EXAMPLE2);
    let out = run(&["orbits", frame.to_str().unwrap()]);
    let doc = stdout_json(&out);
    assert_eq!(doc["stabilizer"]["order"], "12");
    let orbits = doc["orbits"].as_array().unwrap();
    assert_eq!(orbits.len(), 2);
    assert_eq!(orbits[0]["size"], 3);
    assert_eq!(orbits[1]["size"], 2);
    assert_eq!(orbits[0]["ext"]["holds"], true);
    assert_eq!(orbits[1]["ext"]["holds"], true);
    assert_eq!(doc["point_homogeneous"], false);
    assert_eq!(doc["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn check_labels_universal_frame_s5() {
    let dir = tempfile::tempdir().unwrap();
    let frame = write(dir.path(), "s5.frame", UNIVERSAL5);
    let out = run(&["check", frame.to_str().unwrap()]);
    let doc = stdout_json(&out);
    assert_eq!(doc["classification"]["label"], "S5");
    assert_eq!(doc["point_homogeneous"], true);
    assert_eq!(doc["cluster"]["size"], 5);
}

#[test]
fn verify_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let frame = write(dir.path(), "example2.frame", EXAMPLE2);
    let spec = write(dir.path(), "spec.cfg", TWO_ORBIT_SPEC);
    let args = [
        "verify",
        frame.to_str().unwrap(),
        "--spec",
        spec.to_str().unwrap(),
        "-n",
        "4000",
        "--seed",
        "7",
    ];
    let first = run(&args);
    let second = run(&args);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
    let doc = stdout_json(&first);
    assert_eq!(doc["pass"], true);
    assert_eq!(doc["seed"], 7);
    assert!(doc["dataset"]["fingerprint"].is_string());
}

#[test]
fn verify_output_does_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let frame = write(dir.path(), "example2.frame", EXAMPLE2);
    let spec = write(dir.path(), "spec.cfg", TWO_ORBIT_SPEC);
    let args = [
        "verify",
        frame.to_str().unwrap(),
        "--spec",
        spec.to_str().unwrap(),
        "-n",
        "4000",
        "--seed",
        "11",
    ];
    let default = run(&args);
    let single = bin()
        .args(args)
        .env("MODALX_THREADS", "1")
        .output()
        .expect("binary runs");
    assert!(default.status.success() && single.status.success());
    assert_eq!(default.stdout, single.stdout);
}

#[test]
fn sample_then_verify_and_posterior_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let frame = write(dir.path(), "example2.frame", EXAMPLE2);
    let spec = write(dir.path(), "spec.cfg", TWO_ORBIT_SPEC);
    let dataset = dir.path().join("data.csv");
    let out = run(&[
        "sample",
        frame.to_str().unwrap(),
        "--spec",
        spec.to_str().unwrap(),
        "-n",
        "4000",
        "--seed",
        "3",
        "--out",
        dataset.to_str().unwrap(),
    ]);
    let doc = stdout_json(&out);
    assert_eq!(doc["replicates"], 4000);

    let out = run(&[
        "verify",
        frame.to_str().unwrap(),
        "--spec",
        spec.to_str().unwrap(),
        "--data",
        dataset.to_str().unwrap(),
        "--tests",
        "rigidity,exchangeability",
    ]);
    let doc = stdout_json(&out);
    assert_eq!(doc["pass"], true);
    assert_eq!(doc["dataset"]["replicates"], 4000);

    let out = run(&[
        "posterior",
        frame.to_str().unwrap(),
        "--data",
        dataset.to_str().unwrap(),
        "--observed",
        "a1,a2,a3",
    ]);
    let doc = stdout_json(&out);
    let blocks = doc["posterior"].as_array().unwrap();
    // Orbit 1 is unobserved, so its shapes stay at the uniform prior.
    assert_eq!(blocks[1]["shapes"][0]["a"], 1.0);
    assert_eq!(blocks[1]["shapes"][0]["b"], 1.0);
    assert_ne!(blocks[0]["shapes"][0]["a"], 1.0);
}

#[test]
fn decompose_uniform_measure_splits_into_six_components() {
    let dir = tempfile::tempdir().unwrap();
    let frame = write(
        dir.path(),
        "three.frame",
        "frame three\nworld w0\nworld a1\nworld a2\ndesignated w0\nedge * *\nend\n",
    );
    let mut csv = String::from("valuation_index,probability\n");
    for i in 0..8 {
        csv.push_str(&format!("{i},0.125\n"));
    }
    let measure = write(dir.path(), "uniform.csv", &csv);
    let out = run(&[
        "decompose",
        frame.to_str().unwrap(),
        "--measure",
        measure.to_str().unwrap(),
        "--atoms",
        "1",
    ]);
    let doc = stdout_json(&out);
    assert_eq!(doc["component_count"], 6);
    assert_eq!(doc["reconstruction_error"], 0.0);
}

#[test]
fn decompose_rejects_noninvariant_measure_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let frame = write(
        dir.path(),
        "three.frame",
        "frame three\nworld w0\nworld a1\nworld a2\ndesignated w0\nedge * *\nend\n",
    );
    let measure = write(
        dir.path(),
        "point.csv",
        "valuation_index,probability\n2,1.0\n",
    );
    let out = run(&[
        "decompose",
        frame.to_str().unwrap(),
        "--measure",
        measure.to_str().unwrap(),
        "--atoms",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["invariance"]["invariant"], false);
}

#[test]
fn verify_fails_on_world_dependent_data_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let frame = write(dir.path(), "example2.frame", EXAMPLE2);
    let spec = write(dir.path(), "spec.cfg", TWO_ORBIT_SPEC);

    // a1 always true, a2 and a3 always false: rigidity is hopeless.
    let mut csv = String::from("# seed=9\n# spec=handmade\n# worlds=6\n# atoms=1\n# blocks=2\n");
    csv.push_str("replicate,latent_0,latent_1,world_0,world_1,world_2,world_3,world_4,world_5\n");
    for r in 0..2000 {
        let b = r % 2;
        csv.push_str(&format!("{r},theta:0.5,theta:0.5,0,1,0,0,{b},{b}\n"));
    }
    let dataset = write(dir.path(), "adversarial.csv", &csv);
    let out = run(&[
        "verify",
        frame.to_str().unwrap(),
        "--spec",
        spec.to_str().unwrap(),
        "--data",
        dataset.to_str().unwrap(),
        "--tests",
        "rigidity",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["pass"], false);
}

#[test]
fn emit_plot_data_writes_histogram_and_calibration_files() {
    let dir = tempfile::tempdir().unwrap();
    let frame = write(dir.path(), "example2.frame", EXAMPLE2);
    let spec = write(dir.path(), "spec.cfg", TWO_ORBIT_SPEC);
    let plots = dir.path().join("plots");
    let out = run(&[
        "verify",
        frame.to_str().unwrap(),
        "--spec",
        spec.to_str().unwrap(),
        "-n",
        "2000",
        "--seed",
        "5",
        "--tests",
        "rigidity",
        "--emit-plot-data",
        plots.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    for name in [
        "hist_orbit0_p.csv",
        "hist_orbit1_p.csv",
        "calibration_orbit0_p.csv",
        "calibration_orbit1_p.csv",
    ] {
        let path = plots.join(name);
        let contents = fs::read_to_string(&path).unwrap();
        assert!(contents.lines().count() > 1, "{name} has rows");
    }
}

#[test]
fn bad_inputs_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let frame = write(dir.path(), "example2.frame", EXAMPLE2);
    let spec = write(dir.path(), "spec.cfg", TWO_ORBIT_SPEC);

    // Missing file.
    let out = run(&["check", dir.path().join("absent.frame").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());

    // Malformed frame: edge before the world exists.
    let broken = write(dir.path(), "broken.frame", "frame x\nedge a b\nend\n");
    let out = run(&["check", broken.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    // Unknown test name.
    let out = run(&[
        "verify",
        frame.to_str().unwrap(),
        "--spec",
        spec.to_str().unwrap(),
        "--tests",
        "rigidity,nonsense",
    ]);
    assert_eq!(out.status.code(), Some(2));

    // Spec orbit count does not match the frame.
    let short = write(
        dir.path(),
        "short.cfg",
        "atoms = p\norbit 0: prior = beta(1, 1)\ndesignated = point(theta:0.5)\n",
    );
    let out = run(&[
        "sample",
        frame.to_str().unwrap(),
        "--spec",
        short.to_str().unwrap(),
        "-n",
        "10",
        "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));

    // Alpha outside (0, 1).
    let out = run(&[
        "verify",
        frame.to_str().unwrap(),
        "--spec",
        spec.to_str().unwrap(),
        "--alpha",
        "1.5",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn text_format_summarizes_orbits() {
    let dir = tempfile::tempdir().unwrap();
    let frame = write(dir.path(), "example2.frame", EXAMPLE2);
    let out = run(&["orbits", frame.to_str().unwrap(), "--format", "text"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("stabilizer order: 12"));
    assert!(text.contains("ext holds"));
}
