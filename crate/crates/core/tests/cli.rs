use std::fs;
use std::path::Path;
use std::process::Command as Process;

use qpi_sim::experiment::{run, Command, LoadedConfig};

const QPI: &str = "environment = \"frozenlake\"\nmap = \"4x4\"\ngamma = 0.9\nepsilon = 0.01\niterations = 3\nseeds = [3, 1, 2]\n";

fn write_config(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = LoadedConfig::from_file(&write_config(dir.path(), "qpi.toml", QPI)).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run(Command::RunQpi, &cfg, &a, None).unwrap();
    run(Command::RunQpi, &cfg, &b, None).unwrap();
    for f in ["run_1.csv", "run_2.csv", "run_3.csv", "summary.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let meta = fs::read_to_string(a.join("meta.txt")).unwrap();
    assert!(meta.contains(&format!("config_sha256 = {}", cfg.hash)));
    assert!(meta.starts_with("version = "));
    let summary = fs::read_to_string(a.join("summary.csv")).unwrap();
    let seeds: Vec<&str> = summary.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(seeds, ["1", "2", "3", "\"all\""]);
}

#[test]
fn csv_cells_are_numbers_or_quoted() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = LoadedConfig::from_file(&write_config(dir.path(), "qpi.toml", QPI)).unwrap();
    run(Command::RunQpi, &cfg, dir.path(), Some(vec![9])).unwrap();
    for f in ["run_9.csv", "summary.csv"] {
        let text = fs::read_to_string(dir.path().join(f)).unwrap();
        for cell in text.lines().skip(1).flat_map(|l| l.split(',')) {
            let quoted = cell.len() >= 2 && cell.starts_with('"') && cell.ends_with('"');
            assert!(quoted || cell.parse::<f64>().is_ok(), "{f}: {cell}");
            assert!(!cell.contains('e') || quoted, "{f}: {cell}");
        }
    }
}

#[test]
fn every_command_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (Command::VerifyBlockenc, "map = \"4x4\"\nseeds = [1]\n"),
        (Command::CostReport, "map = \"diagonal-8\"\nsamples = 100\n"),
        (Command::CollectSamples, "environment = \"pendulum\"\nsamples = 50\n"),
        (Command::RunQapi, "environment = \"frozenlake\"\nmap = \"4x4\"\nstrategy = \"global\"\niterations = 4\nepsilon = 0.001\nshots = 200000\n"),
        (Command::RunQapi, "environment = \"pendulum\"\nsamples = 300\niterations = 1\nepisodes = 1\nmax_steps = 50\ndegree = 2\n"),
    ];
    for (i, (cmd, text)) in cases.iter().enumerate() {
        let cfg = LoadedConfig::from_file(&write_config(dir.path(), &format!("{i}.toml"), text)).unwrap();
        let out = dir.path().join(i.to_string());
        let (records, _) = run(*cmd, &cfg, &out, None).unwrap();
        assert!(records.iter().all(|r| r.error.is_none()), "{}: {:?}", cmd.name(), records[0].error);
        assert!(out.join("run_1.csv").is_file() && out.join("summary.csv").is_file());
    }
    assert!(dir.path().join("2/samples_1.csv").is_file());
}

#[test]
fn binary_reports_bad_configs_on_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.toml", "gamma = 1.5\n");
    let out = Process::new(env!("CARGO_BIN_EXE_qpi-sim"))
        .args(["run-qpi", "--config"])
        .arg(&bad)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("error\tconfig\t"), "{err}");

    let good = write_config(dir.path(), "good.toml", QPI);
    let out = Process::new(env!("CARGO_BIN_EXE_qpi-sim"))
        .args(["run-qpi", "--seeds", "4,5", "--config"])
        .arg(&good)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("o/run_4.csv").is_file() && dir.path().join("o/run_5.csv").is_file());
    assert!(!dir.path().join("o/run_1.csv").exists());
}
