//! Output files: CSV tables with a resolved-config header block and small
//! self-contained SVG charts.
//!
//! Every CSV starts with the full resolved configuration between
//! `# resolved-config-begin` and `# resolved-config-end` marker lines, so a
//! run can be reproduced from any one of its outputs. Floats are written
//! with Rust's shortest round-trip formatting; a missing value (censored
//! stop, infeasible analysis) is an empty cell.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use stie::sim::{AggregateMetrics, Estimate, SweepParameter, SweepRow, TrialOutcome, Variant};
use stie::theory::{predicted_stie_delay, RateCase};

use crate::config::{CliError, Result};

pub fn rate_case_label(case: RateCase) -> &'static str {
    match case {
        RateCase::FavorableDrift => "favorable-drift",
        RateCase::MatchedCrossing => "matched-crossing",
        RateCase::ClampedAtDrift => "clamped-at-drift",
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn fmt_opt_u64(v: Option<u64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn fmt_opt_f64(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Value and standard error cells for an optional estimate.
fn est_cells(e: Option<&Estimate>) -> (String, String) {
    match e {
        Some(e) => (fmt_f64(e.value), fmt_f64(e.se)),
        None => (String::new(), String::new()),
    }
}

/// Prefixes every line of the resolved-config TOML with `# ` so the block
/// survives as CSV comments and can be stripped back out verbatim.
fn header_block(config_toml: &str) -> String {
    let mut out = String::from("# resolved-config-begin\n");
    for line in config_toml.lines() {
        if line.is_empty() {
            out.push_str("#\n");
        } else {
            let _ = writeln!(out, "# {line}");
        }
    }
    out.push_str("# resolved-config-end\n");
    out
}

/// Recovers the TOML text from a header produced by [`header_block`].
/// Returns `None` when the markers are missing.
pub fn extract_config_block(file_text: &str) -> Option<String> {
    let mut inside = false;
    let mut toml_text = String::new();
    for line in file_text.lines() {
        match line {
            "# resolved-config-begin" => inside = true,
            "# resolved-config-end" => return inside.then_some(toml_text),
            _ if inside => {
                let body = line.strip_prefix('#')?;
                toml_text.push_str(body.strip_prefix(' ').unwrap_or(body));
                toml_text.push('\n');
            }
            _ => {}
        }
    }
    None
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

/// Per-trial table. The stopping-time columns are the composite
/// declarations; event flags and delays are derived from them.
pub fn write_trials_csv(path: &Path, config_toml: &str, outcomes: &[TrialOutcome]) -> Result<()> {
    let mut out = header_block(config_toml);
    out.push_str(
        "trial_index,k1,k2,nu_bar_1,nu_bar_2,which_first,false_alarm_1,false_alarm_2,\
         coupling_1,coupling_2,delay_1,delay_2\n",
    );
    for trial in outcomes {
        let stops = trial.stops(Variant::Stie).map_err(runtime)?;
        let ev = trial.events(Variant::Stie).map_err(runtime)?;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            trial.trial_index,
            trial.k1,
            trial.k2,
            fmt_opt_u64(stops.stop_1),
            fmt_opt_u64(stops.stop_2),
            ev.which_first.label(),
            ev.false_alarm_1,
            ev.false_alarm_2,
            ev.coupling_1,
            ev.coupling_2,
            fmt_opt_u64(ev.delay_1),
            fmt_opt_u64(ev.delay_2),
        );
    }
    write_file(path, &out)
}

fn runtime(e: stie::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

const METRICS_COLUMNS: &str = "variant,alpha,n_trials,fa_rate_1,fa_rate_1_se,fa_rate_2,fa_rate_2_se,\
    xi_1,xi_1_se,xi_2,xi_2_se,delta_hat,delay_m1_1,delay_m1_1_se,delay_m2_1,delay_m2_1_se,\
    delay_m1_2,delay_m1_2_se,delay_m2_2,delay_m2_2_se,censored_count";

fn metrics_cells(m: &AggregateMetrics) -> String {
    let (d1, d1se) = est_cells(m.delay_m1_1.as_ref());
    let (d1b, d1bse) = est_cells(m.delay_m2_1.as_ref());
    let (d2, d2se) = est_cells(m.delay_m1_2.as_ref());
    let (d2b, d2bse) = est_cells(m.delay_m2_2.as_ref());
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        m.variant.label(),
        fmt_f64(m.alpha),
        m.n_trials,
        fmt_f64(m.fa_1.value),
        fmt_f64(m.fa_1.se),
        fmt_f64(m.fa_2.value),
        fmt_f64(m.fa_2.se),
        fmt_f64(m.xi_1.value),
        fmt_f64(m.xi_1.se),
        fmt_f64(m.xi_2.value),
        fmt_f64(m.xi_2.se),
        fmt_opt_f64(m.delta_hat.as_ref().map(|e| e.value)),
        d1,
        d1se,
        d1b,
        d1bse,
        d2,
        d2se,
        d2b,
        d2bse,
        m.censored_count,
    )
}

/// One row per requested detector family, all from the same trials.
pub fn write_metrics_csv(path: &Path, config_toml: &str, rows: &[AggregateMetrics]) -> Result<()> {
    let mut out = header_block(config_toml);
    out.push_str(METRICS_COLUMNS);
    out.push('\n');
    for m in rows {
        out.push_str(&metrics_cells(m));
        out.push('\n');
    }
    write_file(path, &out)
}

/// Predicted first delay moment for subsystem 1 at this row's parameters,
/// available once the trials produced a preemption-probability estimate.
fn row_predicted_delay(row: &SweepRow) -> Option<f64> {
    let delta = row.stie.delta_hat.as_ref()?.value;
    predicted_stie_delay(&row.constants, delta, 1).ok()
}

/// Full sweep table: grid point, composite and baseline metrics, and the
/// closed-form quantities for the same parameters.
pub fn write_sweep_csv(path: &Path, config_toml: &str, rows: &[SweepRow]) -> Result<()> {
    let mut out = header_block(config_toml);
    out.push_str(
        "parameter,value,alpha,n_trials,\
         stie_fa_rate_1,stie_fa_rate_1_se,stie_fa_rate_2,stie_fa_rate_2_se,\
         stie_xi_1,stie_xi_1_se,stie_xi_2,stie_xi_2_se,stie_delta_hat,\
         stie_delay_m1_1,stie_delay_m1_1_se,stie_delay_m2_1,stie_delay_m2_1_se,\
         stie_delay_m1_2,stie_delay_m1_2_se,stie_delay_m2_2,stie_delay_m2_2_se,\
         stie_censored_count,\
         private_delay_m1_1,private_delay_m1_1_se,private_delay_m1_2,private_delay_m1_2_se,\
         private_fa_rate_1,private_fa_rate_1_se,\
         noex_delay_m1_1,noex_delay_m1_1_se,noex_xi_1,noex_xi_1_se,\
         l1,l1_tilde,l2,l2_tilde,predicted_stie_delay_1,\
         b1,w_star,r_a,r_b,r_star,strong,rate_case,\
         exponent_p,exponent_p_se,exponent_p_lo,exponent_p_hi,exponent_n_used\n",
    );
    for row in rows {
        let s = &row.stie;
        let p = &row.private_only;
        let (sd1, sd1se) = est_cells(s.delay_m1_1.as_ref());
        let (sd1b, sd1bse) = est_cells(s.delay_m2_1.as_ref());
        let (sd2, sd2se) = est_cells(s.delay_m1_2.as_ref());
        let (sd2b, sd2bse) = est_cells(s.delay_m2_2.as_ref());
        let (pd1, pd1se) = est_cells(p.delay_m1_1.as_ref());
        let (pd2, pd2se) = est_cells(p.delay_m1_2.as_ref());
        let (nd1, nd1se, nxi, nxise) = match &row.no_exchange {
            Some(n) => {
                let (v, se) = est_cells(n.delay_m1_1.as_ref());
                (v, se, fmt_f64(n.xi_1.value), fmt_f64(n.xi_1.se))
            }
            None => Default::default(),
        };
        let (b1, w_star, r_a, r_b, r_star, strong, case) = match &row.rate {
            Some(r) => (
                fmt_f64(r.b1),
                fmt_f64(r.w_star),
                fmt_f64(r.r_a),
                fmt_opt_f64(r.r_b),
                fmt_f64(r.r_star),
                r.strong.to_string(),
                rate_case_label(r.case).to_string(),
            ),
            None => Default::default(),
        };
        let (ep, epse, eplo, ephi, epn) = match &row.exponent {
            Some(f) => (
                fmt_f64(f.slope),
                fmt_f64(f.stderr),
                fmt_f64(f.lo),
                fmt_f64(f.hi),
                f.n_used.to_string(),
            ),
            None => Default::default(),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{sd1},{sd1se},{sd1b},{sd1bse},\
             {sd2},{sd2se},{sd2b},{sd2bse},{},{pd1},{pd1se},{pd2},{pd2se},{},{},\
             {nd1},{nd1se},{nxi},{nxise},{},{},{},{},{},\
             {b1},{w_star},{r_a},{r_b},{r_star},{strong},{case},\
             {ep},{epse},{eplo},{ephi},{epn}",
            row.parameter.label(),
            fmt_f64(row.value),
            fmt_f64(row.alpha),
            s.n_trials,
            fmt_f64(s.fa_1.value),
            fmt_f64(s.fa_1.se),
            fmt_f64(s.fa_2.value),
            fmt_f64(s.fa_2.se),
            fmt_f64(s.xi_1.value),
            fmt_f64(s.xi_1.se),
            fmt_f64(s.xi_2.value),
            fmt_f64(s.xi_2.se),
            fmt_opt_f64(s.delta_hat.as_ref().map(|e| e.value)),
            s.censored_count,
            fmt_f64(p.fa_1.value),
            fmt_f64(p.fa_1.se),
            fmt_f64(row.constants.l1),
            fmt_f64(row.constants.l1_tilde),
            fmt_f64(row.constants.l2),
            fmt_f64(row.constants.l2_tilde),
            fmt_opt_f64(row_predicted_delay(row)),
        );
    }
    write_file(path, &out)
}

/// Plot data for an alpha sweep: measured coupling probability against the
/// alpha^r_star reference curve.
pub fn write_coupling_vs_alpha(dir: &Path, config_toml: &str, rows: &[SweepRow]) -> Result<()> {
    let mut out = header_block(config_toml);
    out.push_str("alpha,xi_1,xi_1_se,xi_1_lo,xi_1_hi,r_star,theory_alpha_pow_r_star\n");
    let mut empirical = Vec::new();
    let mut theory = Vec::new();
    for row in rows {
        let xi = &row.stie.xi_1;
        let (r_star, theory_y) = match &row.rate {
            Some(r) => {
                theory.push((row.alpha, row.alpha.powf(r.r_star)));
                (fmt_f64(r.r_star), fmt_f64(row.alpha.powf(r.r_star)))
            }
            None => (String::new(), String::new()),
        };
        empirical.push((row.alpha, xi.value));
        let _ = writeln!(
            out,
            "{},{},{},{},{},{r_star},{theory_y}",
            fmt_f64(row.alpha),
            fmt_f64(xi.value),
            fmt_f64(xi.se),
            fmt_f64(xi.lo),
            fmt_f64(xi.hi),
        );
    }
    write_file(&dir.join("coupling_vs_alpha.csv"), &out)?;
    write_svg(
        &dir.join("coupling_vs_alpha.svg"),
        "coupled false-alarm probability vs alpha",
        "alpha",
        "xi_1",
        &[
            Series { name: "measured", points: empirical },
            Series { name: "alpha^r_star", points: theory },
        ],
        true,
        true,
    )
}

/// Plot data for a variance-ratio sweep: composite delay against the
/// private-only baseline and the predicted mixture.
pub fn write_delay_vs_ratio(dir: &Path, config_toml: &str, rows: &[SweepRow]) -> Result<()> {
    let mut out = header_block(config_toml);
    out.push_str(
        "ratio,stie_delay_m1_1,stie_delay_m1_1_se,private_delay_m1_1,private_delay_m1_1_se,\
         predicted_stie_delay_1,l1,l1_tilde\n",
    );
    let mut stie_pts = Vec::new();
    let mut private_pts = Vec::new();
    let mut predicted_pts = Vec::new();
    for row in rows {
        let (sd, sdse) = est_cells(row.stie.delay_m1_1.as_ref());
        let (pd, pdse) = est_cells(row.private_only.delay_m1_1.as_ref());
        let predicted = row_predicted_delay(row);
        if let Some(e) = &row.stie.delay_m1_1 {
            stie_pts.push((row.value, e.value));
        }
        if let Some(e) = &row.private_only.delay_m1_1 {
            private_pts.push((row.value, e.value));
        }
        if let Some(v) = predicted {
            predicted_pts.push((row.value, v));
        }
        let _ = writeln!(
            out,
            "{},{sd},{sdse},{pd},{pdse},{},{},{}",
            fmt_f64(row.value),
            fmt_opt_f64(predicted),
            fmt_f64(row.constants.l1),
            fmt_f64(row.constants.l1_tilde),
        );
    }
    write_file(&dir.join("delay_vs_ratio.csv"), &out)?;
    write_svg(
        &dir.join("delay_vs_ratio.svg"),
        "detection delay vs private/shared variance ratio",
        "sigma_Z^2 / sigma_S^2",
        "mean delay, subsystem 1",
        &[
            Series { name: "with exchange", points: stie_pts },
            Series { name: "private only", points: private_pts },
            Series { name: "predicted mixture", points: predicted_pts },
        ],
        false,
        false,
    )
}

/// Plot data for a variance-ratio sweep with an alpha grid: fitted coupling
/// exponent against the closed-form rate.
pub fn write_exponent_vs_ratio(dir: &Path, config_toml: &str, rows: &[SweepRow]) -> Result<()> {
    let mut out = header_block(config_toml);
    out.push_str("ratio,p_hat,p_se,p_lo,p_hi,r_star\n");
    let mut fitted = Vec::new();
    let mut theory = Vec::new();
    for row in rows {
        let (p, pse, plo, phi) = match &row.exponent {
            Some(f) => {
                fitted.push((row.value, f.slope));
                (fmt_f64(f.slope), fmt_f64(f.stderr), fmt_f64(f.lo), fmt_f64(f.hi))
            }
            None => Default::default(),
        };
        let r_star = match &row.rate {
            Some(r) => {
                theory.push((row.value, r.r_star));
                fmt_f64(r.r_star)
            }
            None => String::new(),
        };
        let _ = writeln!(out, "{},{p},{pse},{plo},{phi},{r_star}", fmt_f64(row.value));
    }
    write_file(&dir.join("exponent_vs_ratio.csv"), &out)?;
    write_svg(
        &dir.join("exponent_vs_ratio.svg"),
        "coupling decay exponent vs variance ratio",
        "sigma_Z^2 / sigma_S^2",
        "exponent",
        &[
            Series { name: "fitted", points: fitted },
            Series { name: "r_star", points: theory },
        ],
        false,
        false,
    )
}

pub struct Series {
    pub name: &'static str,
    pub points: Vec<(f64, f64)>,
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if a >= 1e4 || a < 1e-3 {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    }
}

/// Minimal dependency-free line chart. Log axes drop non-positive points.
pub fn write_svg(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    log_x: bool,
    log_y: bool,
) -> Result<()> {
    const W: f64 = 720.0;
    const H: f64 = 480.0;
    const LEFT: f64 = 80.0;
    const RIGHT: f64 = 690.0;
    const TOP: f64 = 48.0;
    const BOTTOM: f64 = 420.0;
    const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

    let tx = |v: f64| if log_x { v.log10() } else { v };
    let ty = |v: f64| if log_y { v.log10() } else { v };
    let usable = |v: f64, log: bool| v.is_finite() && (!log || v > 0.0);

    let cleaned: Vec<(&'static str, Vec<(f64, f64)>)> = series
        .iter()
        .map(|s| {
            let pts = s
                .points
                .iter()
                .filter(|(x, y)| usable(*x, log_x) && usable(*y, log_y))
                .map(|&(x, y)| (tx(x), ty(y)))
                .collect();
            (s.name, pts)
        })
        .collect();

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="13">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{title}</text>"#,
        (LEFT + RIGHT) / 2.0
    );

    let all: Vec<(f64, f64)> = cleaned.iter().flat_map(|(_, p)| p.iter().copied()).collect();
    if all.is_empty() {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">no plottable data</text>"#,
            (LEFT + RIGHT) / 2.0,
            (TOP + BOTTOM) / 2.0
        );
        out.push_str("</svg>\n");
        return write_file(path, &out);
    }

    let (mut x_min, mut x_max) = all
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (x, _)| (lo.min(*x), hi.max(*x)));
    let (mut y_min, mut y_max) = all
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, y)| (lo.min(*y), hi.max(*y)));
    if x_max == x_min {
        x_min -= 0.5;
        x_max += 0.5;
    }
    if y_max == y_min {
        y_min -= 0.5;
        y_max += 0.5;
    }
    let x_pad = 0.05 * (x_max - x_min);
    let y_pad = 0.05 * (y_max - y_min);
    x_min -= x_pad;
    x_max += x_pad;
    y_min -= y_pad;
    y_max += y_pad;

    let px = |x: f64| LEFT + (x - x_min) / (x_max - x_min) * (RIGHT - LEFT);
    let py = |y: f64| BOTTOM - (y - y_min) / (y_max - y_min) * (BOTTOM - TOP);

    let _ = writeln!(
        out,
        r##"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
        RIGHT - LEFT,
        BOTTOM - TOP
    );

    for i in 0..=4 {
        let fx = x_min + (x_max - x_min) * i as f64 / 4.0;
        let fy = y_min + (y_max - y_min) * i as f64 / 4.0;
        let x_val = if log_x { 10f64.powf(fx) } else { fx };
        let y_val = if log_y { 10f64.powf(fy) } else { fy };
        let _ = writeln!(
            out,
            r##"<line x1="{0}" y1="{BOTTOM}" x2="{0}" y2="{1}" stroke="#444"/>"##,
            px(fx),
            BOTTOM + 5.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            px(fx),
            BOTTOM + 20.0,
            tick_label(x_val)
        );
        let _ = writeln!(
            out,
            r##"<line x1="{1}" y1="{0}" x2="{LEFT}" y2="{0}" stroke="#444"/>"##,
            py(fy),
            LEFT - 5.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end" dominant-baseline="middle">{}</text>"#,
            LEFT - 8.0,
            py(fy),
            tick_label(y_val)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#,
        (LEFT + RIGHT) / 2.0,
        H - 12.0
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{y_label}</text>"#,
        (TOP + BOTTOM) / 2.0,
        (TOP + BOTTOM) / 2.0
    );

    for (i, (name, pts)) in cleaned.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        if pts.len() > 1 {
            let coords: Vec<String> =
                pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
            let _ = writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                coords.join(" ")
            );
        }
        for &(x, y) in pts {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                px(x),
                py(y)
            );
        }
        let ly = TOP + 16.0 + 18.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{0}" y1="{ly}" x2="{1}" y2="{ly}" stroke="{color}" stroke-width="1.5"/>"#,
            RIGHT - 150.0,
            RIGHT - 126.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" dominant-baseline="middle">{name}</text>"#,
            RIGHT - 120.0,
            ly
        );
    }
    out.push_str("</svg>\n");
    write_file(path, &out)
}

/// Routes a finished sweep to its plot files; the main table is always
/// written, extra files depend on the swept parameter.
pub fn write_sweep_outputs(dir: &Path, config_toml: &str, rows: &[SweepRow]) -> Result<()> {
    write_sweep_csv(&dir.join("sweep.csv"), config_toml, rows)?;
    match rows.first().map(|r| r.parameter) {
        Some(SweepParameter::Alpha) => write_coupling_vs_alpha(dir, config_toml, rows),
        Some(SweepParameter::SigmaRatio) => {
            write_delay_vs_ratio(dir, config_toml, rows)?;
            if rows.iter().any(|r| r.exponent.is_some()) {
                write_exponent_vs_ratio(dir, config_toml, rows)?;
            }
            Ok(())
        }
        _ => Ok(()),
    }
}
