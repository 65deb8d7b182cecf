use std::process::Command;

use icran::channels::{Antennas, ChannelDims};
use icran_bench::{realization_channel, run_experiment, AlgorithmSpec, ExperimentConfig, ResultTable};

fn config(scenario: ChannelDims, algorithms: &[&str]) -> ExperimentConfig {
    ExperimentConfig {
        version: 1,
        scenario,
        snr_grid: vec![0.0, 12.5],
        algorithms: algorithms.iter().map(|n| AlgorithmSpec::from_name(n).unwrap()).collect(),
        realizations: 3,
        base_seed: 40,
        output: None,
    }
}

fn run_with_threads(cfg: &ExperimentConfig, threads: usize) -> ResultTable {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| run_experiment(cfg).unwrap())
}

fn numeric_columns(t: &ResultTable) -> Vec<(String, u64, usize, u64, u64, usize, bool)> {
    t.rows
        .iter()
        .map(|r| (r.algorithm.clone(), r.snr_db.to_bits(), r.realization, r.seed, r.sum_rate.to_bits(), r.iterations, r.converged))
        .collect()
}

#[test]
fn results_do_not_depend_on_the_worker_count() {
    let cfg = config(ChannelDims::Parallel { users: 3, tones: 4 }, &["wmmse", "mdp", "scale", "iwfa"]);
    let one = run_with_threads(&cfg, 1);
    let four = run_with_threads(&cfg, 4);
    assert_eq!(numeric_columns(&one), numeric_columns(&four));
    assert_eq!(one.final_iterates, four.final_iterates);
    let means: Vec<u64> = one.summary().iter().map(|s| s.mean_sum_rate.to_bits()).collect();
    assert_eq!(means, four.summary().iter().map(|s| s.mean_sum_rate.to_bits()).collect::<Vec<_>>());
}

#[test]
fn sum_rates_rederive_from_serialized_iterates() {
    let cases = [
        config(ChannelDims::Parallel { users: 3, tones: 5 }, &["wmmse", "mdp", "scale", "iwfa"]),
        config(ChannelDims::Miso { users: 3, antennas: 2 }, &["cca"]),
        config(ChannelDims::Mimo { antennas: vec![Antennas::new(2, 2), Antennas::new(3, 2)] }, &["wmmse_mimo"]),
    ];
    for cfg in &cases {
        let table = run_experiment(cfg).unwrap();
        let mut json = Vec::new();
        table.write_json(&mut json).unwrap();
        let back: ResultTable = serde_json::from_slice(&json).unwrap();
        for (row, last) in back.rows.iter().zip(&back.final_iterates) {
            let ch = realization_channel(cfg, row.realization, row.snr_db).unwrap();
            let again = last.sum_rate(&ch).unwrap();
            assert!((again - row.sum_rate).abs() <= 1e-9, "{} {}: {again} vs {}", row.algorithm, row.snr_db, row.sum_rate);
        }
    }
}

#[test]
fn incompatible_or_malformed_configs_are_config_errors() {
    let bad = [
        r#"{"version":1,"scenario":{"kind":"parallel","users":2,"tones":2},"snr_grid":[0],"algorithms":[],"realizations":1}"#,
        r#"{"version":1,"scenario":{"kind":"miso","users":2,"antennas":2},"snr_grid":[0],"algorithms":[{"name":"wmmse"}],"realizations":1}"#,
        r#"{"version":1,"scenario":{"kind":"parallel","users":2,"tones":0},"snr_grid":[0],"algorithms":[{"name":"wmmse"}],"realizations":1}"#,
        r#"{"version":1,"scenario":{"kind":"parallel","users":2,"tones":2},"snr_grid":[0],"algorithms":[{"name":"wmmse","bogus":1}],"realizations":1}"#,
    ];
    for doc in bad {
        assert!(matches!(ExperimentConfig::from_json(doc), Err(icran_bench::BenchError::Config(_))), "{doc}");
    }
}

fn icran() -> Command {
    Command::new(env!("CARGO_BIN_EXE_icran"))
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"version":1,"scenario":{"kind":"parallel","users":2,"tones":2},"snr_grid":[0],"algorithms":[{"name":"nope"}],"realizations":1}"#).unwrap();
    let out = icran().args(["--quiet", "bench", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("wmmse"));

    let out = icran().args(["--quiet", "power", "--users", "6", "--target", "5"]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));

    let out = icran().args(["--quiet", "ia", "check", "--antennas", "2x2,2x2,2x2", "--dof", "2"]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));

    let out = icran().args(["--quiet", "ia", "check", "--antennas", "2x2,2x2,2x2", "--dof", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn cli_bench_writes_the_fixed_csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    let cfg = config(ChannelDims::Parallel { users: 2, tones: 3 }, &["wmmse", "mdp"]);
    std::fs::write(&cfg_path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let csv_path = dir.path().join("out.csv");
    let status = icran().args(["--quiet", "--out"]).arg(&csv_path).arg("bench").arg("--config").arg(&cfg_path).status().unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&csv_path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("algorithm,snr_db,realization,seed,sum_rate,iterations,wall_time_ms,converged"));
    assert_eq!(lines.count(), 2 * 2 * 3);
}

#[test]
fn cli_region_and_ia_outputs() {
    let out = icran().args(["--quiet", "region", "--alpha", "2", "--grid", "32"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("R1,R2,label\n"));
    assert!(text.lines().any(|l| l.ends_with(",hull")));

    let out = icran().args(["--quiet", "--format", "json", "ia", "solve", "--antennas", "2x2,2x2,2x2", "--dof", "1"]).output().unwrap();
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(doc["leakage"].as_array().unwrap().len() > 1);
}
