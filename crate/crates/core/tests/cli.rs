use std::path::Path;
use std::process::{Command, Output};

fn evidential(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evidential")).args(args).output().expect("binary runs")
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

const SMALL: [&str; 10] = ["--set", "d=3", "--set", "epochs=40", "--set", "n=40", "--set", "grid=12", "--set", "record_every=10"];

#[test]
fn generate_is_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let out = evidential(&["generate", "--out", dir.path().to_str().unwrap(), "--set", "n=100"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let rel = Path::new("datasets/train_n100.csv");
    assert_eq!(read(&a.path().join(rel)), read(&b.path().join(rel)));
    let manifest = String::from_utf8(read(&a.path().join("manifest_generate.json"))).unwrap();
    assert!(manifest.contains("\"seeds\"") && manifest.contains("\"wall_time_s\""));
}

#[test]
fn evaluate_without_reference_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = evidential(&["evaluate", "--out", dir.path().to_str().unwrap(), "--set", "n=30"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("reference_n30.csv"), "{stderr}");
}

#[test]
fn invalid_config_exits_with_one() {
    let out = evidential(&["generate", "--set", "n=abc"]);
    assert_eq!(out.status.code(), Some(1));
    let out = evidential(&["generate", "--set", "colour=blue"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key"));
    let out = evidential(&["reproduce", "fig9"]);
    assert_eq!(out.status.code(), Some(1));
    let out = evidential(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn numeric_failure_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = evidential(&["reproduce", "fig6", "--out", d, "--set", "lr=1000", "--set", "epochs=500", "--set", "n=30", "--set", "runs=1", "--set", "grid=5"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn pipeline_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    for cmd in ["generate", "train", "reference", "evaluate"] {
        let mut args = vec![cmd, "--out", d, "--set", "lambda=0,0.1"];
        args.extend(SMALL);
        let out = evidential(&args);
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let w1 = String::from_utf8(read(&dir.path().join("reports/w1.csv"))).unwrap();
    assert!(w1.starts_with("x,lambda,loss_kind,component,w1\n"));
    // Two losses × two λ × 12 grid points.
    assert_eq!(w1.lines().count(), 1 + 2 * 2 * 12);
    // Training again resumes from the finished checkpoints.
    let mut args = vec!["train", "--out", d, "--set", "lambda=0,0.1"];
    args.extend(SMALL);
    assert!(evidential(&args).status.success());
}

#[test]
fn reproduce_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let mut args = vec!["reproduce", "fig3", "--desk-scale", "--out", dir.path().to_str().unwrap()];
        args.extend(SMALL);
        let out = evidential(&args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let mut compared = 0;
    for sub in ["reports", "datasets", "reference", "plots"] {
        for entry in std::fs::read_dir(a.path().join(sub)).unwrap() {
            let path = entry.unwrap().path();
            let other = b.path().join(sub).join(path.file_name().unwrap());
            assert_eq!(read(&path), read(&other), "{}", path.display());
            compared += 1;
        }
    }
    assert!(compared >= 4);
    assert!(a.path().join("plots/fig3.svg").exists());
}

#[test]
fn plot_is_deterministic_and_checks_schema() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("band.csv");
    std::fs::write(&csv, "x,truth,mean,lo,hi,ref_lo,ref_hi\n0,0.5,0.5,0.5,0.5,0.4,0.6\n0.5,0.5,0.6,0.6,0.6,0.5,0.7\n1,0.5,0.5,0.5,0.5,0.3,0.8\n").unwrap();
    let mut svgs = Vec::new();
    for name in ["a.svg", "b.svg"] {
        let out_path = dir.path().join(name);
        let out = evidential(&["plot", "--kind", "band", "--input", csv.to_str().unwrap(), "--output", out_path.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        svgs.push(read(&out_path));
    }
    assert_eq!(svgs[0], svgs[1]);
    assert!(String::from_utf8_lossy(&svgs[0]).starts_with("<svg"));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "x,y\n0,1\n").unwrap();
    let out = evidential(&["plot", "--kind", "band", "--input", bad.to_str().unwrap(), "--output", dir.path().join("c.svg").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ref_hi"));
}

#[test]
fn oracles_subcommand_passes() {
    let out = evidential(&["oracles", "--json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["results"].as_array().unwrap().len() > 20);
}
