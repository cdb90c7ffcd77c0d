//! End-to-end contract of the `stie` binary: exit codes, file schemas,
//! header reproducibility, and byte-identical reruns.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use stie_cli::config::ExperimentConfig;
use stie_cli::output::extract_config_block;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_stie")
}

fn base_config(mode: &str, n_trials: u64) -> String {
    format!(
        r#"
alpha = 0.05
n_trials = {n_trials}
seed = 99
mode = "{mode}"
horizon = 80

[scenario]
rho1 = 0.1
rho2 = 0.1

[scenario.x]
mu0 = 0.0
mu1 = 1.0
sigma2 = 0.5

[scenario.y]
mu0 = 0.0
mu1 = 1.0
sigma2 = 0.5

[scenario.z]
mu0 = 0.0
mu1 = 1.0
sigma2 = 1.0
"#
    )
}

fn run_cli(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn data_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

#[test]
fn bad_configs_exit_2_and_name_the_problem() {
    let dir = tempfile::tempdir().unwrap();

    let bad_value = dir.path().join("bad_value.toml");
    fs::write(&bad_value, base_config("stie", 10).replace("sigma2 = 1.0", "sigma2 = -1.0")).unwrap();
    let out = run_cli(&["simulate", "--config", bad_value.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("scenario.z.sigma2"), "{stderr}");

    let unknown_key = dir.path().join("unknown_key.toml");
    fs::write(&unknown_key, base_config("stie", 10).replace("seed = 99", "seed = 99\nsigma = 2.0"))
        .unwrap();
    let out = run_cli(&["simulate", "--config", unknown_key.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sigma"));

    let out = run_cli(&["simulate", "--config", "/nonexistent/config.toml"]);
    assert_eq!(out.status.code(), Some(2));

    // A sweep run without a [sweep] section is a configuration error too.
    let no_sweep = dir.path().join("no_sweep.toml");
    fs::write(&no_sweep, base_config("stie", 10)).unwrap();
    let out = run_cli(&["sweep", "--config", no_sweep.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sweep"));

    // Unknown flags are usage errors; clap reports those with code 2.
    let out = run_cli(&["simulate", "--confg", "x.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_writes_both_tables_with_expected_rows() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("exp.toml");
    fs::write(&config_path, base_config("all", 25)).unwrap();
    let out_dir = dir.path().join("out");

    let out = run_cli(&[
        "simulate",
        "--config",
        config_path.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let trials = data_lines(&out_dir.join("trials.csv"));
    assert_eq!(
        trials[0],
        "trial_index,k1,k2,nu_bar_1,nu_bar_2,which_first,false_alarm_1,false_alarm_2,\
         coupling_1,coupling_2,delay_1,delay_2"
    );
    assert_eq!(trials.len(), 1 + 25);
    // Trial indices are the row order.
    for (i, row) in trials[1..].iter().enumerate() {
        assert!(row.starts_with(&format!("{i},")), "{row}");
    }

    let metrics = data_lines(&out_dir.join("metrics.csv"));
    assert!(metrics[0].starts_with("variant,alpha,n_trials,fa_rate_1,fa_rate_1_se,"));
    assert!(metrics[0].ends_with(",censored_count"));
    assert_eq!(metrics.len(), 1 + 3);
    assert!(metrics[1].starts_with("stie,"));
    assert!(metrics[2].starts_with("private-only,"));
    assert!(metrics[3].starts_with("no-exchange,"));
}

#[test]
fn reruns_are_byte_identical_and_seed_overrides_differ() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("exp.toml");
    fs::write(&config_path, base_config("stie", 40)).unwrap();
    let config = config_path.to_str().unwrap();

    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let out_c = dir.path().join("c");
    for (out_dir, extra) in [(&out_a, None), (&out_b, Some("1")), (&out_c, None)] {
        let mut args = vec!["simulate", "--config", config, "--out", out_dir.to_str().unwrap()];
        if let Some(threads) = extra {
            args.extend(["--threads", threads]);
        }
        let out = run_cli(&args);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["trials.csv", "metrics.csv"] {
        let a = fs::read(out_a.join(name)).unwrap();
        // Same config, different thread count: identical bytes.
        assert_eq!(a, fs::read(out_b.join(name)).unwrap(), "{name}");
        assert_eq!(a, fs::read(out_c.join(name)).unwrap(), "{name}");
    }

    // A command-line seed override changes the data (and the echoed config).
    let out_d = dir.path().join("d");
    let out = run_cli(&[
        "simulate", "--config", config, "--out", out_d.to_str().unwrap(), "--seed", "12345",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_ne!(fs::read(out_a.join("trials.csv")).unwrap(), fs::read(out_d.join("trials.csv")).unwrap());
}

#[test]
fn output_header_reproduces_the_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("exp.toml");
    // No explicit horizon: the resolved header must pin the one used.
    fs::write(&config_path, base_config("all", 10).replace("horizon = 80\n", "")).unwrap();
    let out_dir = dir.path().join("out");
    let out = run_cli(&[
        "simulate",
        "--config",
        config_path.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--seed",
        "777",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    for name in ["trials.csv", "metrics.csv"] {
        let text = fs::read_to_string(out_dir.join(name)).unwrap();
        let block = extract_config_block(&text).expect("header block present");
        let echoed: ExperimentConfig = toml::from_str(&block).expect("header parses");
        echoed.validate().expect("header validates");
        assert_eq!(echoed.seed, 777);
        assert!(echoed.horizon.is_some(), "resolved horizon is pinned in {name}");
        // Re-resolving the echoed config is a fixed point, so a rerun from
        // the header alone reproduces the run exactly.
        let resolved = echoed.clone().resolve(None, true).unwrap();
        assert_eq!(resolved, echoed);
    }
}

#[test]
fn theory_prints_constants_rate_and_both_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("exp.toml");
    fs::write(&config_path, base_config("stie", 10)).unwrap();
    let out = run_cli(&["theory", "--config", config_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    for needle in [
        "delay constants",
        "L1 = ",
        "L1~ = ",
        "error-coupling rate",
        "r* = ",
        "strong interaction (r* > 1):",
        "KL-rate convention",
        "SNR convention",
    ] {
        assert!(stdout.contains(needle), "missing {needle:?} in:\n{stdout}");
    }
    // sigma_S^2 = 0.5 with sigma_Z^2 = 1: inside the SNR threshold (0.6),
    // outside the KL one (1/3).
    assert!(stdout.contains("sigma_Z^2 / 3 = 0.3333333333333333: not strong"), "{stdout}");
    assert!(stdout.contains("3 sigma_Z^2 / 5 = 0.6: strong"), "{stdout}");
}

#[test]
fn sweep_writes_main_table_and_plot_files() {
    let dir = tempfile::tempdir().unwrap();

    let ratio_config = dir.path().join("ratio.toml");
    fs::write(
        &ratio_config,
        base_config("all", 10)
            + r#"
[sweep]
parameter = "sigma-ratio"
values = [1.0, 2.0]
trials_per_point = 100
"#,
    )
    .unwrap();
    let ratio_out = dir.path().join("ratio_out");
    let out = run_cli(&[
        "sweep",
        "--config",
        ratio_config.to_str().unwrap(),
        "--out",
        ratio_out.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let sweep_rows = data_lines(&ratio_out.join("sweep.csv"));
    assert_eq!(sweep_rows.len(), 1 + 2);
    assert!(sweep_rows[1].starts_with("sigma-ratio,1,"));
    assert!(sweep_rows[2].starts_with("sigma-ratio,2,"));
    assert!(ratio_out.join("delay_vs_ratio.csv").exists());
    assert!(ratio_out.join("delay_vs_ratio.svg").exists());
    // No alpha grid was given, so no exponent outputs.
    assert!(!ratio_out.join("exponent_vs_ratio.csv").exists());

    let alpha_config = dir.path().join("alpha.toml");
    fs::write(
        &alpha_config,
        base_config("stie", 10)
            + r#"
[sweep]
parameter = "alpha"
values = [0.1, 0.05]
trials_per_point = 100
"#,
    )
    .unwrap();
    let alpha_out = dir.path().join("alpha_out");
    let out = run_cli(&[
        "sweep",
        "--config",
        alpha_config.to_str().unwrap(),
        "--out",
        alpha_out.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(alpha_out.join("sweep.csv").exists());
    assert!(alpha_out.join("coupling_vs_alpha.csv").exists());
    assert!(alpha_out.join("coupling_vs_alpha.svg").exists());

    // The per-point alpha lands in the alpha column of sweep.csv.
    let rows = data_lines(&alpha_out.join("sweep.csv"));
    assert!(rows[1].starts_with("alpha,0.1,0.1,"));
    assert!(rows[2].starts_with("alpha,0.05,0.05,"));
}
