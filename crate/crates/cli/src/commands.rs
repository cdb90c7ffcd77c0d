//! The three subcommands: closed-form report, Monte Carlo tables, sweep.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use stie::sim::{aggregate, run_sweep, run_trials};
use stie::stopping::make_threshold;
use stie::theory::gaussian_strong_condition;

use crate::config::{CliError, ExperimentConfig, Result};
use crate::output;

fn runtime(e: stie::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))
}

/// The strong-interaction check assumes one common mean shift across all
/// three streams; returns it when the configuration has one.
fn common_shift(config: &ExperimentConfig) -> Option<f64> {
    let s = &config.scenario;
    let shifts = [s.x.mu1 - s.x.mu0, s.y.mu1 - s.y.mu0, s.z.mu1 - s.z.mu0];
    let first = shifts[0];
    shifts
        .iter()
        .all(|d| (d - first).abs() <= 1e-12 * first.abs().max(1.0))
        .then_some(first)
}

/// Renders the closed-form quantities for the configured scenario.
pub fn theory_report(config: &ExperimentConfig) -> Result<String> {
    let params = config.scenario_params(None);
    let (constants, rate) = params.theory(config.alpha).map_err(runtime)?;
    let s = &config.scenario;

    let mut out = String::new();
    let _ = writeln!(out, "scenario");
    let _ = writeln!(out, "  alpha = {}", config.alpha);
    let _ = writeln!(out, "  rho1 = {}, rho2 = {}", s.rho1, s.rho2);
    for (name, st) in [("x", &s.x), ("y", &s.y), ("z", &s.z)] {
        let _ = writeln!(out, "  {name}: mu0 = {}, mu1 = {}, sigma2 = {}", st.mu0, st.mu1, st.sigma2);
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "delay constants");
    let _ = writeln!(out, "  L1 = {}  (joint, subsystem 1)", constants.l1);
    let _ = writeln!(out, "  L1~ = {} (private fallback, subsystem 1)", constants.l1_tilde);
    let _ = writeln!(out, "  L2 = {}  (joint, subsystem 2)", constants.l2);
    let _ = writeln!(out, "  L2~ = {} (private fallback, subsystem 2)", constants.l2_tilde);
    let _ = writeln!(out);
    let _ = writeln!(out, "error-coupling rate (subsystem 1 view)");
    match &rate {
        Some(r) => {
            let _ = writeln!(out, "  b1 = {}", r.b1);
            let _ = writeln!(out, "  w* = {}", r.w_star);
            let _ = writeln!(out, "  r_a = {}", r.r_a);
            match r.r_b {
                Some(rb) => {
                    let _ = writeln!(out, "  r_b = {rb}");
                }
                None => {
                    let _ = writeln!(out, "  r_b: not defined (b1 <= 0)");
                }
            }
            let _ = writeln!(out, "  r* = {}", r.r_star);
            let _ = writeln!(out, "  case = {}", output::rate_case_label(r.case));
            let _ = writeln!(
                out,
                "  strong interaction (r* > 1): {}",
                if r.strong { "yes" } else { "no" }
            );
        }
        None => {
            let _ = writeln!(out, "  infeasible: the exponent gain is not positive here,");
            let _ = writeln!(out, "  so no decay rate beyond the trivial one is claimed");
        }
    }
    let _ = writeln!(out);
    match common_shift(config) {
        Some(shift) => {
            let sc = gaussian_strong_condition(s.x.sigma2, s.y.sigma2, s.z.sigma2, shift)
                .map_err(runtime)?;
            let _ = writeln!(out, "gaussian strong-signal thresholds (common shift {shift})");
            let _ = writeln!(
                out,
                "  KL-rate convention, need sigma_S^2 < sigma_Z^2 / 3 = {}: {}",
                s.z.sigma2 / 3.0,
                if sc.strong_kl { "strong" } else { "not strong" }
            );
            let _ = writeln!(
                out,
                "    margins: x {}, y {}",
                sc.margin_x_kl, sc.margin_y_kl
            );
            let _ = writeln!(
                out,
                "  SNR convention, need sigma_S^2 < 3 sigma_Z^2 / 5 = {}: {}",
                3.0 * s.z.sigma2 / 5.0,
                if sc.strong_snr { "strong" } else { "not strong" }
            );
            let _ = writeln!(
                out,
                "    margins: x {}, y {}",
                sc.margin_x_snr, sc.margin_y_snr
            );
            let _ = writeln!(
                out,
                "  prior-free general rate at these variances: r* = {} ({})",
                sc.general.r_star,
                if sc.general.strong { "strong" } else { "not strong" }
            );
        }
        None => {
            let _ = writeln!(
                out,
                "gaussian strong-signal thresholds: not applicable (stream shifts differ)"
            );
        }
    }
    Ok(out)
}

/// Runs the configured trial batch and writes `trials.csv` and
/// `metrics.csv` into `out_dir`. The config must already be resolved.
pub fn simulate(config: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    ensure_dir(out_dir)?;
    let params = config.scenario_params(None);
    let scenario = params.build(config.alpha).map_err(runtime)?;
    let threshold = make_threshold(config.alpha).map_err(runtime)?;
    let options = config.trial_options();
    let outcomes =
        run_trials(&scenario, &threshold, config.n_trials, config.seed, &options).map_err(runtime)?;

    let metrics: Vec<_> = config
        .mode
        .variants()
        .into_iter()
        .map(|v| aggregate(&outcomes, v, config.alpha))
        .collect::<std::result::Result<_, _>>()
        .map_err(runtime)?;

    let header = config.to_toml()?;
    output::write_trials_csv(&out_dir.join("trials.csv"), &header, &outcomes)?;
    output::write_metrics_csv(&out_dir.join("metrics.csv"), &header, &metrics)?;
    println!(
        "wrote {} trial rows and {} metrics rows to {}",
        outcomes.len(),
        metrics.len(),
        out_dir.display()
    );
    Ok(())
}

/// Runs the configured sweep and writes `sweep.csv` plus the plot files
/// for the swept parameter. The config must already be resolved.
pub fn sweep(config: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    let sweep_config = config
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("sweep: section is required by this subcommand".into()))?;
    ensure_dir(out_dir)?;
    let params = config.scenario_params(None);
    let rows = run_sweep(
        &params,
        config.alpha,
        &sweep_config.to_spec(),
        config.seed,
        &config.trial_options(),
    )
    .map_err(runtime)?;
    let header = config.to_toml()?;
    output::write_sweep_outputs(out_dir, &header, &rows)?;
    println!("wrote {} sweep rows to {}", rows.len(), out_dir.display());
    Ok(())
}
