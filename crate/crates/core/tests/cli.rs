use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lff_lab::experiments::{ExperimentConfig, EXPERIMENTS};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lff-lab"))
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn lff-lab")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

#[test]
fn list_names_every_experiment() {
    let out = run(&["list"]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = text(&out.stdout);
    assert_eq!(stdout.lines().count(), 10);
    for def in EXPERIMENTS {
        assert!(stdout.contains(def.name), "{} missing", def.name);
    }
}

#[test]
fn every_cookbook_config_parses_and_every_experiment_has_one() {
    let mut names = Vec::new();
    for entry in fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        let cfg = ExperimentConfig::parse(&fs::read_to_string(&path).unwrap())
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(path.file_stem().unwrap().to_str().unwrap(), cfg.experiment);
        names.push(cfg.experiment);
    }
    names.sort();
    let mut expected: Vec<String> = EXPERIMENTS.iter().map(|d| d.name.to_string()).collect();
    expected.sort();
    assert_eq!(names, expected);
}

#[test]
fn cookbook_configs_reproduce_the_presets() {
    // This one drops a preset net on purpose.
    let differs = ["basis-drift"];
    for def in EXPERIMENTS.iter().filter(|d| !differs.contains(&d.name)) {
        let text = fs::read_to_string(configs_dir().join(format!("{}.toml", def.name))).unwrap();
        assert_eq!(ExperimentConfig::parse(&text).unwrap(), (def.preset)(), "{}", def.name);
    }
}

#[test]
fn malformed_config_exits_1_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "experiment = \"contraction\"\n[kernel]\npointz = 3\n").unwrap();
    let out_dir = tmp.path().join("out");
    let out = run(&["run", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("pointz"), "{}", text(&out.stderr));
    assert!(!out_dir.exists());

    fs::write(&cfg, "experiment = \"no-such-thing\"\n").unwrap();
    let out = run(&["run", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out_dir.exists());
}

#[test]
fn failed_assertion_exits_2_and_keeps_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("short.toml");
    // One training step cannot bring any residual down to 10%.
    fs::write(&cfg, "experiment = \"flow-residual\"\n[kernel]\nsteps = 1\n").unwrap();
    let out_dir = tmp.path().join("out");
    let out = run(&["run", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", text(&out.stdout));
    assert!(text(&out.stdout).contains("FAIL high-sigma LFF beats ReLU net"));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "failed");
    assert!(out_dir.join("seed-0/residual.csv").exists());
}

#[test]
fn run_writes_config_echo_and_aggregate_averages_seeds() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, "experiment = \"contraction\"\nseeds = [3, 4]\n[kernel]\npoints = 41\n").unwrap();
    let out_dir = tmp.path().join("out");
    let out = run(&["run", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stdout));
    let echoed = ExperimentConfig::parse(&fs::read_to_string(out_dir.join("config.toml")).unwrap()).unwrap();
    assert_eq!(echoed.seeds, vec![3, 4]);
    assert_eq!(echoed.kernel.points, 41);
    assert!(fs::read_to_string(out_dir.join("summary.txt")).unwrap().contains("PASS reference bound"));

    let agg = run(&["aggregate", out_dir.to_str().unwrap()]);
    assert_eq!(agg.status.code(), Some(0));
    let metrics = fs::read_to_string(out_dir.join("metrics_agg.csv")).unwrap();
    assert!(metrics.starts_with("metric,value_mean,value_stderr,n_seeds\n"), "{metrics}");
    // The reference bound does not depend on the seed.
    let line = metrics.lines().find(|l| l.starts_with("reference_bound")).unwrap();
    assert!(line.ends_with(",0,2"), "{line}");
}

#[test]
fn aggregate_of_a_directory_without_seeds_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["aggregate", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn seed_flag_reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs_dir().join("ntk-spectrum.toml");
    let read_all = |d: &Path| {
        let mut files: Vec<(String, Vec<u8>)> = Vec::new();
        for name in ["config.toml", "summary.txt", "seed-7/spectrum.csv", "seed-7/metrics.csv"] {
            files.push((name.into(), fs::read(d.join(name)).unwrap()));
        }
        files
    };
    let mut seen = Vec::new();
    for sub in ["a", "b"] {
        let d = tmp.path().join(sub);
        let out = run(&["run", cfg.to_str().unwrap(), "--seed", "7", "--out", d.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
        seen.push(read_all(&d));
    }
    assert_eq!(seen[0], seen[1]);
}
