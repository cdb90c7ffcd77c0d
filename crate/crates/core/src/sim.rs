//! Monte Carlo harness: trial execution, metric estimation, exponent fits,
//! and parameter sweeps with attached closed-form predictions.
//!
//! Trials are mutually independent: trial i draws from its own counter-derived
//! RNG substream, so any single trial is reproducible in isolation and results
//! do not depend on scheduling. Aggregation uses exact integer accumulators,
//! making it independent of reduction order as well.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{Beta, ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::models::{GaussianShiftModel, GeometricPrior, InfoProfile, StreamScenario};
use crate::numerics::splitmix64;
use crate::statistics::NoExState;
use crate::stopping::{
    composite_from_crossings, make_threshold, stie_step, Phase, SubsystemDetector, Threshold,
};
use crate::theory::{coupling_rate, delay_constants, CouplingRate, DelayConstants};

/// Two-sided 95% normal quantile, used for all asymptotic intervals.
const Z_95: f64 = 1.959963984540054;

/// Seed-mixing stride for derived substream seeds (the splitmix64 increment).
const SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

/// Which detector pair a metric row refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Composite procedure with the one-bit exchange.
    Stie,
    /// Each subsystem thresholds the statistic of its private stream only.
    PrivateOnly,
    /// Each subsystem uses its private and the shared stream, no exchange.
    NoExchange,
}

impl Variant {
    pub fn label(self) -> &'static str {
        match self {
            Variant::Stie => "stie",
            Variant::PrivateOnly => "private-only",
            Variant::NoExchange => "no-exchange",
        }
    }
}

/// Per-trial switches for [`run_trials`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TrialOptions {
    /// Also run the no-exchange detectors on the same streams.
    pub compute_no_exchange: bool,
    /// Pin subsystem 1's change past the horizon (no-change regime).
    pub force_no_change_1: bool,
    /// Pin subsystem 2's change past the horizon (no-change regime).
    pub force_no_change_2: bool,
}

/// Declaration steps of one detector pair; `None` means censored by the
/// horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopPair {
    pub stop_1: Option<u64>,
    pub stop_2: Option<u64>,
}

/// Everything recorded about one simulated trial.
///
/// `joint` holds the first crossings of the two joint statistics run to the
/// horizon regardless of any declaration; they feed the preemption-probability
/// estimate. `stie` holds the composite declarations, `private_only` the
/// private-statistic first crossings (the no-shared-information baseline).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialOutcome {
    pub trial_index: u64,
    pub k1: u64,
    pub k2: u64,
    pub stie: StopPair,
    pub joint: StopPair,
    pub private_only: StopPair,
    pub no_exchange: Option<StopPair>,
}

impl TrialOutcome {
    /// Stopping times of the requested detector pair.
    pub fn stops(&self, variant: Variant) -> Result<StopPair> {
        match variant {
            Variant::Stie => Ok(self.stie),
            Variant::PrivateOnly => Ok(self.private_only),
            Variant::NoExchange => self.no_exchange.ok_or_else(|| {
                Error::invalid("variant", "trial was run without the no-exchange detectors".to_string())
            }),
        }
    }

    /// Alarm/delay events of the requested detector pair.
    pub fn events(&self, variant: Variant) -> Result<PairEvents> {
        Ok(pair_events(self.stops(variant)?, self.k1, self.k2))
    }
}

/// Order of declarations within a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WhichFirst {
    One,
    Two,
    Tie,
    Neither,
}

impl WhichFirst {
    pub fn label(self) -> &'static str {
        match self {
            WhichFirst::One => "1",
            WhichFirst::Two => "2",
            WhichFirst::Tie => "tie",
            WhichFirst::Neither => "neither",
        }
    }
}

/// Event view of one detector pair on one trial.
///
/// `false_alarm_u` is a declaration strictly before the subsystem's own
/// change. `coupling_1` marks the induced false alarm: subsystem 1 declares
/// no later than subsystem 2 does, inside the window from the peer's change
/// (inclusive) to its own (exclusive); `coupling_2` mirrors it. `delay_u` is
/// the declaration lag when the detector stopped at or after its change.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairEvents {
    pub which_first: WhichFirst,
    pub false_alarm_1: bool,
    pub false_alarm_2: bool,
    pub coupling_1: bool,
    pub coupling_2: bool,
    pub delay_1: Option<u64>,
    pub delay_2: Option<u64>,
}

/// Classifies one detector pair's stopping times against the change times.
/// A censored declaration counts as later than any finite one.
pub fn pair_events(stops: StopPair, k1: u64, k2: u64) -> PairEvents {
    let s1 = stops.stop_1.unwrap_or(u64::MAX);
    let s2 = stops.stop_2.unwrap_or(u64::MAX);
    let which_first = match (stops.stop_1, stops.stop_2) {
        (None, None) => WhichFirst::Neither,
        _ if s1 == s2 => WhichFirst::Tie,
        _ if s1 < s2 => WhichFirst::One,
        _ => WhichFirst::Two,
    };
    PairEvents {
        which_first,
        false_alarm_1: stops.stop_1.is_some_and(|s| s < k1),
        false_alarm_2: stops.stop_2.is_some_and(|s| s < k2),
        coupling_1: stops.stop_1.is_some_and(|s| s <= s2 && k2 <= s && s < k1),
        coupling_2: stops.stop_2.is_some_and(|s| s <= s1 && k1 <= s && s < k2),
        delay_1: stops.stop_1.filter(|&s| s >= k1).map(|s| s - k1),
        delay_2: stops.stop_2.filter(|&s| s >= k2).map(|s| s - k2),
    }
}

/// Runs one trial: draws change times and observations, drives the composite
/// detector pair, the raw joint and private statistics, and optionally the
/// no-exchange detectors, all over the same stream draws.
///
/// Observations are drawn lazily in a fixed order (k1, k2, then the (x, y, z)
/// triple per step), matching [`crate::models::sample_scenario_conditioned`];
/// the loop ends early once every tracked quantity is resolved, which cannot
/// change any outcome because later draws are never consumed by this trial.
pub fn run_single_trial<R: Rng + ?Sized>(
    scenario: &StreamScenario,
    threshold: &Threshold,
    options: &TrialOptions,
    trial_index: u64,
    rng: &mut R,
) -> Result<TrialOutcome> {
    let h = scenario.horizon as u64;
    let k1 = if options.force_no_change_1 { h + 1 } else { scenario.prior1.sample(rng) };
    let k2 = if options.force_no_change_2 { h + 1 } else { scenario.prior2.sample(rng) };
    let kz = k1.min(k2);

    let mut d1 = SubsystemDetector::new(scenario.prior1);
    let mut d2 = SubsystemDetector::new(scenario.prior2);
    let with_noex = options.compute_no_exchange;
    let mut nx1 = NoExState::new(scenario.prior1, scenario.prior2);
    let mut nx2 = NoExState::new(scenario.prior2, scenario.prior1);
    let mut noex_stop_1 = None;
    let mut noex_stop_2 = None;

    for n in 1..=h {
        let x = if n >= k1 { scenario.model_x.sample_post(rng) } else { scenario.model_x.sample_pre(rng) };
        let y = if n >= k2 { scenario.model_y.sample_post(rng) } else { scenario.model_y.sample_pre(rng) };
        let z = if n >= kz { scenario.model_z.sample_post(rng) } else { scenario.model_z.sample_pre(rng) };

        let (a, b, _messages) = stie_step(&d1, &d2, x, y, z, scenario, threshold)?;
        d1 = a;
        d2 = b;

        if with_noex {
            let llr_z = scenario.model_z.llr(z);
            nx1 = nx1.update(scenario.model_x.llr(x), llr_z);
            nx2 = nx2.update(scenario.model_y.llr(y), llr_z);
            if noex_stop_1.is_none() && nx1.log_lambda() >= threshold.log_b {
                noex_stop_1 = Some(n);
            }
            if noex_stop_2.is_none() && nx2.log_lambda() >= threshold.log_b {
                noex_stop_2 = Some(n);
            }
        }

        let resolved = d1.phase == Phase::Stopped
            && d2.phase == Phase::Stopped
            && d1.joint_crossed_at.is_some()
            && d2.joint_crossed_at.is_some()
            && d1.private_crossed_at.is_some()
            && d2.private_crossed_at.is_some()
            && (!with_noex || (noex_stop_1.is_some() && noex_stop_2.is_some()));
        if resolved {
            break;
        }
    }

    let stie = StopPair { stop_1: d1.declared_at, stop_2: d2.declared_at };
    debug_assert_eq!(
        composite_from_crossings(
            d1.joint_crossed_at,
            d2.joint_crossed_at,
            d1.private_crossed_at,
            d2.private_crossed_at,
        ),
        (stie.stop_1, stie.stop_2),
        "online composite declarations must match the offline crossing algebra"
    );

    Ok(TrialOutcome {
        trial_index,
        k1,
        k2,
        stie,
        joint: StopPair { stop_1: d1.joint_crossed_at, stop_2: d2.joint_crossed_at },
        private_only: StopPair { stop_1: d1.private_crossed_at, stop_2: d2.private_crossed_at },
        no_exchange: with_noex.then_some(StopPair { stop_1: noex_stop_1, stop_2: noex_stop_2 }),
    })
}

/// Runs `n_trials` independent trials in parallel, trial i on RNG substream i
/// of the master seed. Output order is by trial index.
pub fn run_trials(
    scenario: &StreamScenario,
    threshold: &Threshold,
    n_trials: u64,
    seed: u64,
    options: &TrialOptions,
) -> Result<Vec<TrialOutcome>> {
    if n_trials == 0 {
        return Err(Error::invalid("n_trials", "must be >= 1".to_string()));
    }
    (0..n_trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i);
            run_single_trial(scenario, threshold, options, i, &mut rng)
        })
        .collect()
}

/// Outcome of one single-stream detector trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SingleStreamOutcome {
    pub k: u64,
    pub stop: Option<u64>,
}

/// Monte Carlo for the plain one-stream detector: per trial, draws a change
/// time and observations, and stops at the first threshold crossing. Uses the
/// same substream-per-trial policy as [`run_trials`].
pub fn run_single_stream_trials(
    model: &GaussianShiftModel,
    prior: &GeometricPrior,
    threshold: &Threshold,
    horizon: usize,
    n_trials: u64,
    seed: u64,
) -> Result<Vec<SingleStreamOutcome>> {
    if n_trials == 0 {
        return Err(Error::invalid("n_trials", "must be >= 1".to_string()));
    }
    if horizon == 0 {
        return Err(Error::invalid("horizon", "must be >= 1".to_string()));
    }
    (0..n_trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i);
            let k = prior.sample(&mut rng);
            let mut state = crate::statistics::SrpState::new(*prior);
            let mut stop = None;
            for n in 1..=horizon as u64 {
                let obs = if n >= k { model.sample_post(&mut rng) } else { model.sample_pre(&mut rng) };
                state = state.update(model.llr(obs));
                if state.log_lambda >= threshold.log_b {
                    stop = Some(n);
                    break;
                }
            }
            Ok(SingleStreamOutcome { k, stop })
        })
        .collect()
}

/// A point estimate with its standard error and 95% interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Exact (Clopper-Pearson) two-sided binomial interval for `events`
/// successes in `n` trials at the given confidence level.
pub fn clopper_pearson(events: u64, n: u64, confidence: f64) -> Result<(f64, f64)> {
    if n == 0 || events > n {
        return Err(Error::invalid("counts", format!("need 0 <= events <= n with n >= 1, got {events}/{n}")));
    }
    if !(0.0..1.0).contains(&confidence) || confidence <= 0.0 {
        return Err(Error::invalid("confidence", format!("must lie strictly in (0, 1), got {confidence}")));
    }
    let tail = (1.0 - confidence) / 2.0;
    let (k, nf) = (events as f64, n as f64);
    let lo = if events == 0 {
        0.0
    } else {
        Beta::new(k, nf - k + 1.0).expect("valid shape").inverse_cdf(tail)
    };
    let hi = if events == n {
        1.0
    } else {
        Beta::new(k + 1.0, nf - k).expect("valid shape").inverse_cdf(1.0 - tail)
    };
    Ok((lo, hi))
}

/// Binomial rate estimate: sample proportion, asymptotic standard error, and
/// exact 95% interval.
pub fn rate_estimate(events: u64, n: u64) -> Result<Estimate> {
    let (lo, hi) = clopper_pearson(events, n, 0.95)?;
    let value = events as f64 / n as f64;
    let se = (value * (1.0 - value) / n as f64).sqrt();
    Ok(Estimate { value, se, lo, hi })
}

// Conditional delay moments from exact power sums over the usable trials.
// The standard errors are the asymptotic ones for a sample mean of d^m.
fn moment_estimates(count: u64, sum_d: u128, sum_d2: u128, sum_d4: u128) -> (Option<Estimate>, Option<Estimate>) {
    if count == 0 {
        return (None, None);
    }
    let n = count as f64;
    let m1 = sum_d as f64 / n;
    let m2 = sum_d2 as f64 / n;
    let m4 = sum_d4 as f64 / n;
    let var1 = (m2 - m1 * m1).max(0.0);
    let var2 = (m4 - m2 * m2).max(0.0);
    let se1 = (var1 / n).sqrt();
    let se2 = (var2 / n).sqrt();
    (
        Some(Estimate { value: m1, se: se1, lo: m1 - Z_95 * se1, hi: m1 + Z_95 * se1 }),
        Some(Estimate { value: m2, se: se2, lo: m2 - Z_95 * se2, hi: m2 + Z_95 * se2 }),
    )
}

/// Summary metrics of one detector pair over a batch of trials.
///
/// Rates keep every trial in the denominator (a censored trial is simply not
/// an alarm); censoring is surfaced through `censored_count` instead of being
/// dropped. Delay moments condition on trials whose declaration came at or
/// after the subsystem's change, so they carry the censoring bias noted in
/// the output metadata; `delay_trials_u` reports how many trials qualified.
/// `delta_hat` estimates the probability that subsystem 1's raw joint
/// statistic is preempted by subsystem 2's, from the joint crossings (it does
/// not depend on the variant); ties split evenly, and trials where neither
/// joint statistic ever crossed are excluded from its denominator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateMetrics {
    pub variant: Variant,
    pub alpha: f64,
    pub n_trials: u64,
    pub fa_1: Estimate,
    pub fa_2: Estimate,
    pub xi_1: Estimate,
    pub xi_2: Estimate,
    pub delta_hat: Option<Estimate>,
    pub delay_m1_1: Option<Estimate>,
    pub delay_m2_1: Option<Estimate>,
    pub delay_m1_2: Option<Estimate>,
    pub delay_m2_2: Option<Estimate>,
    pub delay_trials_1: u64,
    pub delay_trials_2: u64,
    pub censored_count: u64,
}

/// Reduces a batch of trials to the metric set of one detector pair.
/// Accumulation is exact (integer counters and power sums), so the result is
/// independent of trial order.
pub fn aggregate(outcomes: &[TrialOutcome], variant: Variant, alpha: f64) -> Result<AggregateMetrics> {
    if outcomes.is_empty() {
        return Err(Error::invalid("outcomes", "must be nonempty".to_string()));
    }
    let n = outcomes.len() as u64;
    let mut fa = [0u64; 2];
    let mut coupling = [0u64; 2];
    let mut censored = 0u64;
    let mut delay_count = [0u64; 2];
    let mut sum_d = [0u128; 2];
    let mut sum_d2 = [0u128; 2];
    let mut sum_d4 = [0u128; 2];
    let mut preempt_known = 0u64;
    let mut preempt_greater = 0u64;
    let mut preempt_ties = 0u64;

    for outcome in outcomes {
        let stops = outcome.stops(variant)?;
        let events = pair_events(stops, outcome.k1, outcome.k2);
        if stops.stop_1.is_none() || stops.stop_2.is_none() {
            censored += 1;
        }
        for (u, (alarm, couple, delay)) in [
            (events.false_alarm_1, events.coupling_1, events.delay_1),
            (events.false_alarm_2, events.coupling_2, events.delay_2),
        ]
        .into_iter()
        .enumerate()
        {
            fa[u] += alarm as u64;
            coupling[u] += couple as u64;
            if let Some(d) = delay {
                let d = d as u128;
                delay_count[u] += 1;
                sum_d[u] += d;
                sum_d2[u] += d * d;
                sum_d4[u] += (d * d) * (d * d);
            }
        }
        if outcome.joint.stop_1.is_some() || outcome.joint.stop_2.is_some() {
            preempt_known += 1;
            let v1 = outcome.joint.stop_1.unwrap_or(u64::MAX);
            let v2 = outcome.joint.stop_2.unwrap_or(u64::MAX);
            if v1 > v2 {
                preempt_greater += 1;
            } else if v1 == v2 {
                preempt_ties += 1;
            }
        }
    }

    let delta_hat = (preempt_known > 0).then(|| {
        let value = (preempt_greater as f64 + 0.5 * preempt_ties as f64) / preempt_known as f64;
        let se = (value * (1.0 - value) / preempt_known as f64).sqrt();
        Estimate { value, se, lo: value - Z_95 * se, hi: value + Z_95 * se }
    });
    let (delay_m1_1, delay_m2_1) = moment_estimates(delay_count[0], sum_d[0], sum_d2[0], sum_d4[0]);
    let (delay_m1_2, delay_m2_2) = moment_estimates(delay_count[1], sum_d[1], sum_d2[1], sum_d4[1]);

    Ok(AggregateMetrics {
        variant,
        alpha,
        n_trials: n,
        fa_1: rate_estimate(fa[0], n)?,
        fa_2: rate_estimate(fa[1], n)?,
        xi_1: rate_estimate(coupling[0], n)?,
        xi_2: rate_estimate(coupling[1], n)?,
        delta_hat,
        delay_m1_1,
        delay_m2_1,
        delay_m1_2,
        delay_m2_2,
        delay_trials_1: delay_count[0],
        delay_trials_2: delay_count[1],
        censored_count: censored,
    })
}

/// Least-squares fit of the coupling decay exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentFit {
    /// Slope of log coupling against log alpha.
    pub slope: f64,
    pub stderr: f64,
    /// 95% interval endpoints (Student's t on the residual degrees of freedom).
    pub lo: f64,
    pub hi: f64,
    pub n_used: usize,
    /// Points dropped because their coupling estimate was zero (no observed
    /// events) or not positive and finite.
    pub n_excluded: usize,
}

/// Fits log(coupling) = intercept + slope * log(alpha) by ordinary least
/// squares over the usable points. Needs at least 3 points with positive,
/// finite coupling estimates; zero-coupling points are excluded and counted.
pub fn fit_coupling_exponent(points: &[(f64, f64)]) -> Result<ExponentFit> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(alpha, xi)| *alpha > 0.0 && alpha.is_finite() && *xi > 0.0 && xi.is_finite())
        .map(|&(alpha, xi)| (alpha.ln(), xi.ln()))
        .collect();
    let n_excluded = points.len() - usable.len();
    if usable.len() < 3 {
        return Err(Error::invalid(
            "points",
            format!("need at least 3 points with positive coupling estimates, got {}", usable.len()),
        ));
    }
    let n = usable.len() as f64;
    let mean_x = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::invalid("points", "alpha values must not all coincide".to_string()));
    }
    let sxy: f64 = usable.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ssr: f64 = usable.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>().max(0.0);
    let df = n - 2.0;
    let stderr = (ssr / df / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, df).expect("valid dof").inverse_cdf(0.975);
    Ok(ExponentFit {
        slope,
        stderr,
        lo: slope - t * stderr,
        hi: slope + t * stderr,
        n_used: usable.len(),
        n_excluded,
    })
}

/// Gaussian stream description by plain parameters, the unit the sweep
/// machinery mutates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamParams {
    pub mu0: f64,
    pub mu1: f64,
    pub sigma2: f64,
}

impl StreamParams {
    pub fn build(&self) -> Result<GaussianShiftModel> {
        GaussianShiftModel::new(self.mu0, self.mu1, self.sigma2)
    }
}

/// Scenario description by plain parameters. `horizon: None` selects the
/// default rule of [`default_horizon`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioParams {
    pub x: StreamParams,
    pub y: StreamParams,
    pub z: StreamParams,
    pub rho1: f64,
    pub rho2: f64,
    pub horizon: Option<usize>,
}

impl ScenarioParams {
    /// Builds the runnable scenario for a given false-alarm level (the level
    /// enters only through the default horizon rule).
    pub fn build(&self, alpha: f64) -> Result<StreamScenario> {
        let model_x = self.x.build()?;
        let model_y = self.y.build()?;
        let model_z = self.z.build()?;
        let prior1 = GeometricPrior::new(self.rho1)?;
        let prior2 = GeometricPrior::new(self.rho2)?;
        let horizon = match self.horizon {
            Some(h) => h,
            None => default_horizon(&prior1, &prior2, &model_x.info_profile(), &model_y.info_profile(), alpha)?,
        };
        StreamScenario::new(model_x, model_y, model_z, prior1, prior2, horizon)
    }

    /// Closed-form predictions for this scenario at the given level: delay
    /// constants always, the coupling rate when its analysis is feasible.
    pub fn theory(&self, alpha: f64) -> Result<(DelayConstants, Option<CouplingRate>)> {
        let x = self.x.build()?.info_profile();
        let y = self.y.build()?.info_profile();
        let z = self.z.build()?.info_profile();
        let d1 = GeometricPrior::new(self.rho1)?.tail_rate();
        let d2 = GeometricPrior::new(self.rho2)?.tail_rate();
        let constants = delay_constants(alpha, x.q1, y.q1, z.q1, d1, d2)?;
        Ok((constants, coupling_rate(&x, &y, &z, d1, d2).ok()))
    }
}

/// Default observation window: the 1e-4 tail quantile of the slower prior
/// (so the change itself is almost surely inside the window) plus five times
/// the larger private-only delay scale, clamped to [10, 1_000_000].
pub fn default_horizon(
    prior1: &GeometricPrior,
    prior2: &GeometricPrior,
    x: &InfoProfile,
    y: &InfoProfile,
    alpha: f64,
) -> Result<usize> {
    if !alpha.is_finite() || alpha <= 0.0 || alpha >= 1.0 {
        return Err(Error::invalid("alpha", format!("must lie strictly in (0, 1), got {alpha}")));
    }
    let log_alpha_abs = -alpha.ln();
    let scale_1 = log_alpha_abs / (x.q1 + prior1.tail_rate());
    let scale_2 = log_alpha_abs / (y.q1 + prior2.tail_rate());
    let quantile = prior1.tail_quantile(1e-4).max(prior2.tail_quantile(1e-4));
    let raw = (quantile as f64 + 5.0 * scale_1.max(scale_2)).ceil();
    Ok((raw.max(10.0).min(1_000_000.0)) as usize)
}

/// Which scenario knob a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    /// The false-alarm level itself.
    Alpha,
    /// The shared-to-private variance ratio; each point sets the private
    /// variances of X and Y to sigma2(Z) / value.
    SigmaRatio,
    /// Both geometric prior rates at once.
    Rho,
}

impl SweepParameter {
    pub fn label(self) -> &'static str {
        match self {
            SweepParameter::Alpha => "alpha",
            SweepParameter::SigmaRatio => "sigma-ratio",
            SweepParameter::Rho => "rho",
        }
    }
}

/// A sweep: one knob, a grid of values, and a trial budget per grid point.
/// `alpha_grid`, when present, additionally fits a coupling decay exponent at
/// every point by rerunning the point across that grid of levels.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub trials_per_point: u64,
    pub alpha_grid: Option<Vec<f64>>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::invalid("sweep.values", "grid must be nonempty".to_string()));
        }
        if self.trials_per_point < 100 {
            return Err(Error::invalid(
                "sweep.trials_per_point",
                format!("must be >= 100, got {}", self.trials_per_point),
            ));
        }
        for &v in &self.values {
            let ok = match self.parameter {
                SweepParameter::Alpha => v.is_finite() && v > 0.0 && v < 1.0,
                SweepParameter::SigmaRatio => v.is_finite() && v > 0.0,
                SweepParameter::Rho => v.is_finite() && v > 0.0 && v < 1.0,
            };
            if !ok {
                return Err(Error::invalid(
                    "sweep.values",
                    format!("{v} is out of range for parameter {}", self.parameter.label()),
                ));
            }
        }
        if let Some(grid) = &self.alpha_grid {
            if grid.len() < 3 {
                return Err(Error::invalid(
                    "sweep.alpha_grid",
                    format!("needs at least 3 levels for an exponent fit, got {}", grid.len()),
                ));
            }
            if grid.iter().any(|&a| !a.is_finite() || a <= 0.0 || a >= 1.0) {
                return Err(Error::invalid("sweep.alpha_grid", "levels must lie strictly in (0, 1)".to_string()));
            }
        }
        Ok(())
    }
}

/// One sweep grid point: empirical metrics for the composite and baseline
/// pairs (plus no-exchange when enabled), side by side with the closed-form
/// predictions, and the per-point exponent fit when an alpha grid was given.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub parameter: SweepParameter,
    pub value: f64,
    pub alpha: f64,
    pub stie: AggregateMetrics,
    pub private_only: AggregateMetrics,
    pub no_exchange: Option<AggregateMetrics>,
    pub constants: DelayConstants,
    /// `None` when the rate analysis is infeasible at this point.
    pub rate: Option<CouplingRate>,
    pub exponent: Option<ExponentFit>,
}

fn point_config(
    base: &ScenarioParams,
    base_alpha: f64,
    parameter: SweepParameter,
    value: f64,
) -> (ScenarioParams, f64) {
    match parameter {
        SweepParameter::Alpha => (*base, value),
        SweepParameter::SigmaRatio => {
            let mut p = *base;
            let private_sigma2 = p.z.sigma2 / value;
            p.x.sigma2 = private_sigma2;
            p.y.sigma2 = private_sigma2;
            (p, base_alpha)
        }
        SweepParameter::Rho => {
            let mut p = *base;
            p.rho1 = value;
            p.rho2 = value;
            (p, base_alpha)
        }
    }
}

fn xi_points_over_grid(
    params: &ScenarioParams,
    grid: &[f64],
    trials: u64,
    point_seed: u64,
    options: &TrialOptions,
) -> Result<Vec<(f64, f64)>> {
    grid.iter()
        .enumerate()
        .map(|(j, &grid_alpha)| {
            let scenario = params.build(grid_alpha)?;
            let threshold = make_threshold(grid_alpha)?;
            let seed = splitmix64(point_seed ^ SEED_STRIDE.wrapping_mul(j as u64 + 1));
            let outcomes = run_trials(&scenario, &threshold, trials, seed, options)?;
            let metrics = aggregate(&outcomes, Variant::Stie, grid_alpha)?;
            Ok((grid_alpha, metrics.xi_1.value))
        })
        .collect()
}

/// Runs the sweep: per grid point, a fresh trial batch on a derived seed,
/// aggregated for the composite and baseline pairs, with theory attached.
pub fn run_sweep(
    base: &ScenarioParams,
    alpha: f64,
    spec: &SweepSpec,
    seed: u64,
    options: &TrialOptions,
) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    spec.values
        .iter()
        .enumerate()
        .map(|(i, &value)| {
            let (params, point_alpha) = point_config(base, alpha, spec.parameter, value);
            let scenario = params.build(point_alpha)?;
            let threshold = make_threshold(point_alpha)?;
            let point_seed = splitmix64(seed ^ SEED_STRIDE.wrapping_mul(i as u64 + 1));
            let outcomes = run_trials(&scenario, &threshold, spec.trials_per_point, point_seed, options)?;
            let stie = aggregate(&outcomes, Variant::Stie, point_alpha)?;
            let private_only = aggregate(&outcomes, Variant::PrivateOnly, point_alpha)?;
            let no_exchange = if options.compute_no_exchange {
                Some(aggregate(&outcomes, Variant::NoExchange, point_alpha)?)
            } else {
                None
            };
            let (constants, rate) = params.theory(point_alpha)?;
            let exponent = match &spec.alpha_grid {
                Some(grid) => {
                    let points = xi_points_over_grid(&params, grid, spec.trials_per_point, point_seed, options)?;
                    Some(fit_coupling_exponent(&points)?)
                }
                None => None,
            };
            Ok(SweepRow {
                parameter: spec.parameter,
                value,
                alpha: point_alpha,
                stie,
                private_only,
                no_exchange,
                constants,
                rate,
                exponent,
            })
        })
        .collect()
}
