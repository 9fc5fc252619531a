#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn wayfind(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wayfind"))
        .args(args)
        .current_dir(dir)
        .env_remove("WAYFIND_SEED")
        .output()
        .expect("binary runs")
}

pub fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = wayfind(dir, args);
    assert!(
        out.status.success(),
        "wayfind {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Every artifact the pipeline writes, relative to its directory.
pub const ARTIFACTS: &[&str] = &[
    "data/network.json",
    "data/control_points.csv",
    "data/transforms.json",
    "data/trajectories.csv",
    "data/sequences.csv",
    "data/profiles.csv",
    "data/synth_summary.json",
    "data/provenance.json",
    "seq.csv",
    "seq.provenance.json",
    "d.csv",
    "d.encoders.json",
    "d.provenance.json",
    "rf.json",
    "rf.provenance.json",
    "mlr.json",
    "eval.json",
    "eval.provenance.json",
    "recall.tsv",
    "compare.tsv",
    "compare.provenance.json",
    "per_task.tsv",
    "ablate.tsv",
    "sweep.tsv",
    "sweep.provenance.json",
    "importance.tsv",
    "usage.tsv",
];

/// synth, map, featurize, train, eval and every experiment, at reduced scale.
pub fn run_pipeline(dir: &Path, seed: u64, agents: usize) -> PathBuf {
    let s = seed.to_string();
    let a = agents.to_string();
    std::fs::write(dir.join("mlr.params.json"), r#"{"max_iters": 40}"#).unwrap();
    std::fs::write(
        dir.join("exp.json"),
        r#"{"mlr": {"max_iters": 40}}"#,
    )
    .unwrap();
    let steps: Vec<Vec<&str>> = vec![
        vec!["--seed", &s, "synth", "--agents", &a, "--out-dir", "data"],
        vec!["map", "--net", "data/network.json", "--transforms", "data/control_points.csv", "--traj", "data/trajectories.csv", "--out", "seq.csv"],
        vec!["featurize", "--sequences", "seq.csv", "--net", "data/network.json", "--profiles", "data/profiles.csv", "--out", "d.csv"],
        vec!["--seed", &s, "train", "--algo", "rf", "--data", "d.csv", "--split", "train", "--out", "rf.json"],
        vec!["--seed", &s, "train", "--algo", "mlr", "--data", "d.csv", "--params", "mlr.params.json", "--split", "train", "--out", "mlr.json"],
        vec!["--seed", &s, "eval", "--model", "rf.json", "--data", "d.csv", "--split", "test", "--group-by", "device", "--profiles", "data/profiles.csv", "--out", "eval.json", "--recall-out", "recall.tsv"],
        vec!["--seed", &s, "exp", "compare", "--data", "d.csv", "--config", "exp.json", "--out", "compare.tsv"],
        vec!["--seed", &s, "exp", "per-task", "--data", "d.csv", "--out", "per_task.tsv"],
        vec!["--seed", &s, "exp", "ablate", "--data", "d.csv", "--out", "ablate.tsv"],
        vec!["--seed", &s, "exp", "sweep", "--data", "d.csv", "--param", "max_depth", "--from", "2", "--to", "20", "--step", "6", "--out", "sweep.tsv"],
        vec!["exp", "importance", "--model", "rf.json", "--out", "importance.tsv"],
        vec!["exp", "usage", "--sequences", "seq.csv", "--out", "usage.tsv"],
    ];
    for step in steps {
        ok(dir, &step);
    }
    dir.to_path_buf()
}

/// Relative paths of every file under `dir`, sorted.
pub fn files_under(dir: &Path) -> Vec<PathBuf> {
    fn walk(root: &Path, d: &Path, out: &mut Vec<PathBuf>) {
        for e in std::fs::read_dir(d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}
