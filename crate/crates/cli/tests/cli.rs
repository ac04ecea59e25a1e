use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mobo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mobo")).args(args).output().unwrap()
}

fn light_config(dir: &Path) -> String {
    let path = dir.join("light.toml");
    fs::write(
        &path,
        "[session.acquisition]\nn_candidates = 64\nn_mc_samples = 32\n[session.fit]\nrestarts = 2\nmax_iters = 40\n",
    )
    .unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn demo_prints_twenty_iterations() {
    let dir = tempfile::tempdir().unwrap();
    let out = mobo(&["demo", "--config", &light_config(dir.path())]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let iterations: Vec<&str> = text.lines().filter(|l| l.contains(" p=[")).collect();
    assert_eq!(iterations.len(), 20);
    assert!(text.ends_with("finished after 20 iterations, stopped_early=false\n"));
}

#[test]
fn simulate_writes_a_log_per_session() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = mobo(&[
        "simulate",
        "--raters",
        "20",
        "--seeds",
        "1..20",
        "--out",
        out_dir.to_str().unwrap(),
        "--config",
        &light_config(dir.path()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let logs: usize = ["mobo", "random"].iter().map(|d| fs::read_dir(out_dir.join(d)).unwrap().count()).sum();
    assert_eq!(logs, 40);
    let csv = fs::read_to_string(out_dir.join("hypervolume.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 20 * 2 * 20);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("wrote 40 session logs"), "{stdout}");
}

#[test]
fn errors_are_one_machine_readable_line() {
    for (args, code, status) in [
        (vec!["simulate", "--out", "x", "--seeds", "5..1"], "invalid_args", 2),
        (vec!["simulate", "--raters", "3", "--seeds", "1,2", "--out", "x"], "invalid_args", 2),
        (vec!["frobnicate"], "invalid_args", 2),
        (vec!["analyze", "--data", "/definitely/missing.csv"], "io", 1),
        (vec!["serve", "--config", "/definitely/missing.toml"], "io", 1),
    ] {
        let out = mobo(&args);
        assert_eq!(out.status.code(), Some(status), "{args:?}");
        let err = String::from_utf8(out.stderr).unwrap();
        assert_eq!(err.lines().count(), 1, "{err}");
        assert!(err.starts_with(&format!("error code={code} message=\"")), "{err}");
    }
}

#[test]
fn analyze_reads_a_simulated_dataset() {
    use mobo_core::analysis::{records_from_session, write_csv};
    use mobo_core::synthetic::run_session;
    use mobo_core::{AcquisitionConfig, FitOptions, RaterPopulation, SessionConfig};

    let dir = tempfile::tempdir().unwrap();
    let config = SessionConfig {
        acquisition: AcquisitionConfig { n_candidates: 32, n_mc_samples: 16, ..Default::default() },
        fit: FitOptions { restarts: 1, max_iters: 20, ..Default::default() },
        total_iterations: 8,
        ..Default::default()
    };
    let pop = RaterPopulation { noise_sd: 0.2, ..Default::default() };
    let mut records = Vec::new();
    for k in 0..6u64 {
        let s = run_session(&pop.rater(k), "p", &config).unwrap();
        records.extend(records_from_session(&s, &format!("p{k}"), ["female", "male"][k as usize % 2]));
    }
    let data = dir.path().join("study.csv");
    write_csv(&records, fs::File::create(&data).unwrap()).unwrap();

    let out = mobo(&["analyze", "--data", data.to_str().unwrap(), "--pareto-only", "--space", "raw"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let line = text.lines().find(|l| l.starts_with("pareto designs (raw): ")).unwrap();
    assert!(line.contains("female: ") && line.contains(", male: "), "{line}");
    assert!(text.contains("\nparameters (female n="));
    assert!(text.contains("\ncorrelations (n="));
}
