//! Behavioral checks of the Monte Carlo harness: censoring accounting, the
//! false-alarm bound, paired detector comparisons, and sweep reproducibility.

use stie::sim::{
    aggregate, run_sweep, run_trials, ScenarioParams, StreamParams, SweepParameter, SweepSpec,
    TrialOptions, Variant,
};
use stie::stopping::make_threshold;

fn symmetric_params(rho: f64, private_sigma2: f64) -> ScenarioParams {
    let private = StreamParams { mu0: 0.0, mu1: 1.0, sigma2: private_sigma2 };
    let shared = StreamParams { mu0: 0.0, mu1: 1.0, sigma2: 1.0 };
    ScenarioParams { x: private, y: private, z: shared, rho1: rho, rho2: rho, horizon: None }
}

#[test]
fn no_change_regime_yields_only_false_alarms_or_censoring() {
    // A prior rate this small puts the change past any practical horizon, so
    // no trial can produce a delay observation.
    let mut params = symmetric_params(1e-9, 0.5);
    params.horizon = Some(150);
    let scenario = params.build(0.05).unwrap();
    let threshold = make_threshold(0.05).unwrap();
    let outcomes = run_trials(&scenario, &threshold, 3000, 21, &TrialOptions::default()).unwrap();

    let mut alarms = 0u64;
    let mut censored = 0u64;
    for o in &outcomes {
        assert!(o.k1 > 150 && o.k2 > 150);
        let e = o.events(Variant::Stie).unwrap();
        assert_eq!(e.delay_1, None);
        assert_eq!(e.delay_2, None);
        match o.stie.stop_1 {
            Some(s) => {
                assert!(e.false_alarm_1 && s < o.k1);
                alarms += 1;
            }
            None => censored += 1,
        }
    }
    assert_eq!(alarms + censored, 3000);
    let m = aggregate(&outcomes, Variant::Stie, 0.05).unwrap();
    assert!(m.delay_m1_1.is_none() && m.delay_m2_1.is_none());
    assert_eq!(m.fa_1.value, alarms as f64 / 3000.0);

    // The explicit no-change switches pin the change to horizon + 1 exactly.
    let forced = TrialOptions { force_no_change_1: true, force_no_change_2: true, ..TrialOptions::default() };
    let outcomes = run_trials(&scenario, &threshold, 100, 22, &forced).unwrap();
    assert!(outcomes.iter().all(|o| o.k1 == 151 && o.k2 == 151));
}

#[test]
fn false_alarm_splits_into_budget_plus_coupling() {
    // The non-coupled false-alarm rate must stay within the design level:
    // empirically, fa - coupling <= alpha + 3 SE of that difference, which is
    // itself a plain binomial rate because every coupling event is a false
    // alarm on the same trial.
    let alpha = 0.05;
    let params = symmetric_params(0.1, 0.5);
    let scenario = params.build(alpha).unwrap();
    let threshold = make_threshold(alpha).unwrap();
    let n = 20_000u64;
    let outcomes = run_trials(&scenario, &threshold, n, 31, &TrialOptions::default()).unwrap();

    let mut uncoupled_fa = 0u64;
    for o in &outcomes {
        let e = o.events(Variant::Stie).unwrap();
        assert!(!e.coupling_1 || e.false_alarm_1);
        assert!(!e.coupling_2 || e.false_alarm_2);
        uncoupled_fa += (e.false_alarm_1 && !e.coupling_1) as u64;
    }
    let p = uncoupled_fa as f64 / n as f64;
    let se = (p * (1.0 - p) / n as f64).sqrt();
    assert!(p <= alpha + 3.0 * se, "uncoupled fa {p} above level {alpha} (se {se})");

    let m = aggregate(&outcomes, Variant::Stie, alpha).unwrap();
    assert!(m.xi_1.value <= m.fa_1.value);
    assert!(m.xi_2.value <= m.fa_2.value);
    assert!(m.fa_1.value <= alpha + m.xi_1.value + 3.0 * se);
}

#[test]
fn shared_stream_speeds_up_the_joint_detector_when_peer_never_fails() {
    // With subsystem 2's change pinned past the horizon, the shared stream
    // switches exactly at subsystem 1's change, so the joint statistic sees
    // strictly more information than the private one.
    let params = symmetric_params(0.15, 0.5);
    let scenario = params.build(0.05).unwrap();
    let threshold = make_threshold(0.05).unwrap();
    let opts = TrialOptions { force_no_change_2: true, ..TrialOptions::default() };
    let outcomes = run_trials(&scenario, &threshold, 20_000, 41, &opts).unwrap();

    let mut joint_steps: Vec<u64> = Vec::new();
    let mut private_steps: Vec<u64> = Vec::new();
    let mut paired_diff_sum = 0f64;
    let mut paired_diff_sq = 0f64;
    let mut paired = 0u64;
    for o in &outcomes {
        joint_steps.push(o.joint.stop_1.unwrap_or(u64::MAX));
        private_steps.push(o.private_only.stop_1.unwrap_or(u64::MAX));
        if let (Some(a), Some(b)) = (o.joint.stop_1, o.private_only.stop_1) {
            let d = a as f64 - b as f64;
            paired_diff_sum += d;
            paired_diff_sq += d * d;
            paired += 1;
        }
    }
    let median = |v: &mut Vec<u64>| {
        v.sort_unstable();
        v[v.len() / 2]
    };
    assert!(median(&mut joint_steps) <= median(&mut private_steps));

    let mean = paired_diff_sum / paired as f64;
    let var = (paired_diff_sq / paired as f64 - mean * mean).max(0.0);
    let se = (var / paired as f64).sqrt();
    assert!(mean + 3.0 * se < 0.0, "joint not faster: mean diff {mean}, se {se}");
}

#[test]
fn exchange_beats_private_baseline_on_paired_delays() {
    let alpha = 1e-3;
    let params = symmetric_params(0.15, 0.25);
    let scenario = params.build(alpha).unwrap();
    let threshold = make_threshold(alpha).unwrap();
    let outcomes = run_trials(&scenario, &threshold, 20_000, 51, &TrialOptions::default()).unwrap();

    let mut sum = 0f64;
    let mut sum_sq = 0f64;
    let mut n = 0u64;
    for o in &outcomes {
        let stie = o.events(Variant::Stie).unwrap().delay_1;
        let private = o.events(Variant::PrivateOnly).unwrap().delay_1;
        if let (Some(a), Some(b)) = (stie, private) {
            let d = a as f64 - b as f64;
            sum += d;
            sum_sq += d * d;
            n += 1;
        }
    }
    assert!(n > 10_000, "too few paired delay observations: {n}");
    let mean = sum / n as f64;
    let var = (sum_sq / n as f64 - mean * mean).max(0.0);
    let se = (var / n as f64).sqrt();
    assert!(mean + 3.0 * se < 0.0, "exchange delay not smaller: mean diff {mean}, se {se}");
}

#[test]
fn sweep_is_reproducible_and_carries_consistent_theory() {
    let base = symmetric_params(0.2, 0.5);
    let spec = SweepSpec {
        parameter: SweepParameter::SigmaRatio,
        values: vec![1.0, 2.0],
        trials_per_point: 500,
        alpha_grid: None,
    };
    let opts = TrialOptions { compute_no_exchange: true, ..TrialOptions::default() };
    let rows = run_sweep(&base, 0.05, &spec, 61, &opts).unwrap();
    let again = run_sweep(&base, 0.05, &spec, 61, &opts).unwrap();
    assert_eq!(rows, again);
    assert_eq!(rows.len(), 2);

    // Hand recomputation of the delay constants for the ratio-2 row: private
    // variance 0.5 gives q = 1 on X and Y, the shared stream keeps q = 0.5.
    let row = &rows[1];
    assert!(row.no_exchange.is_some());
    let d = -(1.0f64 - 0.2).ln();
    let log_alpha_abs = -(0.05f64).ln();
    assert!((row.constants.l1 - log_alpha_abs / (1.0 + 0.5 + d)).abs() < 1e-12);
    assert!((row.constants.l1_tilde - log_alpha_abs / (1.0 + d)).abs() < 1e-12);
    assert_eq!(row.constants.l1, row.constants.l2);

    // Raising the ratio sharpens the private streams, so both scales and
    // the absolute benefit of the shared stream shrink.
    assert!(rows[1].constants.l1 < rows[1].constants.l1_tilde);
    let gap_ratio_1 = rows[0].constants.l1_tilde - rows[0].constants.l1;
    let gap_ratio_2 = rows[1].constants.l1_tilde - rows[1].constants.l1;
    assert!(gap_ratio_2 < gap_ratio_1);
}
