//! Thresholds, stopping times, and the two-detector exchange procedure.
//!
//! Each subsystem runs two statistics in lockstep from step 1: a joint one
//! on its private stream plus the shared stream, and a private one on the
//! private stream alone. While no one has declared, a subsystem stops when
//! its joint statistic crosses the threshold and announces that with a
//! single bit. The peer then switches to its private statistic, because the
//! shared stream is explained by the announced fault, and declares at the
//! first step by which that private statistic has crossed. The composite
//! stopping times satisfy
//!
//! ```text
//! nu_bar_1 = nu_1            if nu_1 <= nu_2,
//! nu_bar_1 = max(nut_1, nu_2) if nu_1 >  nu_2,
//! ```
//!
//! (and symmetrically for subsystem 2), where nu_u is the first crossing of
//! the joint statistic and nut_u the first crossing of the private one.
//! Messages are delivered within the same step they are sent. A simultaneous
//! crossing of both joint statistics stops both subsystems with no switch.

use crate::error::{Error, Result};
use crate::models::{GeometricPrior, StreamScenario};
use crate::statistics::SrpState;

/// Declaration threshold for a posterior-odds statistic.
///
/// `log_b = ln((1 - alpha) / alpha)`; stopping at the first crossing keeps
/// the posterior miss mass, and hence the false-alarm probability of the
/// single-change procedure, at or below `alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    pub alpha: f64,
    pub log_b: f64,
}

/// Builds the threshold from a target false-alarm level in (0, 1).
pub fn make_threshold(alpha: f64) -> Result<Threshold> {
    if !alpha.is_finite() || alpha <= 0.0 || alpha >= 1.0 {
        return Err(Error::invalid("alpha", format!("must lie strictly in (0, 1), got {alpha}")));
    }
    Ok(Threshold { alpha, log_b: ((1.0 - alpha) / alpha).ln() })
}

/// First step n >= 1 at which the posterior-odds statistic over `llrs`
/// reaches the threshold; `None` if it never does within the stream.
pub fn srp_stopping_time(llrs: &[f64], prior: GeometricPrior, threshold: &Threshold) -> Option<u64> {
    let mut state = SrpState::new(prior);
    for (i, &r) in llrs.iter().enumerate() {
        state = state.update(r);
        if state.log_lambda >= threshold.log_b {
            return Some(i as u64 + 1);
        }
    }
    None
}

/// Detector lifecycle. `Joint` listens to private + shared, `PrivateOnly`
/// means the peer has declared and only the private statistic decides,
/// `Stopped` means this subsystem has declared.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Joint,
    PrivateOnly,
    Stopped,
}

/// The one-bit announcement a subsystem sends when it declares.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExchangeMessage {
    /// Sending subsystem, 1 or 2.
    pub sender: u8,
    /// Step at which the sender declared.
    pub declared_at: u64,
}

/// Per-subsystem detector state. Both statistics advance together on every
/// step until the subsystem stops; the first-crossing steps are recorded
/// because a declaration may legally point at a crossing that happened
/// before the peer's message arrived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubsystemDetector {
    pub phase: Phase,
    pub joint_stat: SrpState,
    pub private_stat: SrpState,
    /// First step at which the joint statistic crossed, if any.
    pub joint_crossed_at: Option<u64>,
    /// First step at which the private statistic crossed, if any.
    pub private_crossed_at: Option<u64>,
    /// Step at which this subsystem declared.
    pub declared_at: Option<u64>,
    /// Step at which the peer's declaration arrived.
    pub peer_declared_at: Option<u64>,
}

impl SubsystemDetector {
    pub fn new(prior: GeometricPrior) -> Self {
        Self {
            phase: Phase::Joint,
            joint_stat: SrpState::new(prior),
            private_stat: SrpState::new(prior),
            joint_crossed_at: None,
            private_crossed_at: None,
            declared_at: None,
            peer_declared_at: None,
        }
    }

    /// Steps observed so far; both internal statistics agree on this.
    pub fn step(&self) -> u64 {
        self.joint_stat.n
    }

    fn advance(&mut self, private_llr: f64, shared_llr: f64, threshold: &Threshold) {
        self.joint_stat = self.joint_stat.update(private_llr + shared_llr);
        self.private_stat = self.private_stat.update(private_llr);
        let n = self.joint_stat.n;
        if self.joint_crossed_at.is_none() && self.joint_stat.log_lambda >= threshold.log_b {
            self.joint_crossed_at = Some(n);
        }
        if self.private_crossed_at.is_none() && self.private_stat.log_lambda >= threshold.log_b {
            self.private_crossed_at = Some(n);
        }
    }

    fn stop(&mut self, n: u64) {
        self.phase = Phase::Stopped;
        self.declared_at = Some(n);
    }
}

/// Advances both detectors by one observation triple and resolves
/// declarations, switches, and messages for that step.
///
/// Both detectors' statistics advance on every step regardless of phase, so
/// the pair stays in lockstep for the whole trial; a stopped detector's
/// declaration is immutable. Message delivery is same-step: if one subsystem
/// declares through its joint statistic and the peer's private statistic has
/// already crossed (at this step or earlier), the peer declares at this very
/// step. Each subsystem sends at most one message per trial, when it
/// declares.
pub fn stie_step(
    det1: &SubsystemDetector,
    det2: &SubsystemDetector,
    x: f64,
    y: f64,
    z: f64,
    scenario: &StreamScenario,
    threshold: &Threshold,
) -> Result<(SubsystemDetector, SubsystemDetector, [Option<ExchangeMessage>; 2])> {
    if det1.step() != det2.step() {
        return Err(Error::StepMismatch { left: det1.step(), right: det2.step() });
    }
    let mut d1 = *det1;
    let mut d2 = *det2;
    let llr_z = scenario.model_z.llr(z);
    d1.advance(scenario.model_x.llr(x), llr_z, threshold);
    d2.advance(scenario.model_y.llr(y), llr_z, threshold);
    let n = d1.step();
    let mut messages = [None, None];

    let joint_fired_1 = d1.phase == Phase::Joint && d1.joint_crossed_at == Some(n);
    let joint_fired_2 = d2.phase == Phase::Joint && d2.joint_crossed_at == Some(n);

    match (joint_fired_1, joint_fired_2) {
        (true, true) => {
            // Simultaneous joint crossings: both declare, nobody switches.
            d1.stop(n);
            d2.stop(n);
            messages[0] = Some(ExchangeMessage { sender: 1, declared_at: n });
            messages[1] = Some(ExchangeMessage { sender: 2, declared_at: n });
        }
        (true, false) => {
            d1.stop(n);
            messages[0] = Some(ExchangeMessage { sender: 1, declared_at: n });
            if d2.phase == Phase::Joint {
                d2.phase = Phase::PrivateOnly;
                d2.peer_declared_at = Some(n);
                if d2.private_crossed_at.is_some() {
                    d2.stop(n);
                    messages[1] = Some(ExchangeMessage { sender: 2, declared_at: n });
                }
            }
        }
        (false, true) => {
            d2.stop(n);
            messages[1] = Some(ExchangeMessage { sender: 2, declared_at: n });
            if d1.phase == Phase::Joint {
                d1.phase = Phase::PrivateOnly;
                d1.peer_declared_at = Some(n);
                if d1.private_crossed_at.is_some() {
                    d1.stop(n);
                    messages[0] = Some(ExchangeMessage { sender: 1, declared_at: n });
                }
            }
        }
        (false, false) => {
            // A subsystem already cut over to its private statistic declares
            // at the first step by which that statistic has crossed. Its
            // peer is necessarily stopped, so no switch can follow.
            if d1.phase == Phase::PrivateOnly && d1.private_crossed_at.is_some() {
                d1.stop(n);
                messages[0] = Some(ExchangeMessage { sender: 1, declared_at: n });
            }
            if d2.phase == Phase::PrivateOnly && d2.private_crossed_at.is_some() {
                d2.stop(n);
                messages[1] = Some(ExchangeMessage { sender: 2, declared_at: n });
            }
        }
    }
    Ok((d1, d2, messages))
}

/// A phase transition observed during a trial, for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhaseEvent {
    pub step: u64,
    pub subsystem: u8,
    pub phase: Phase,
}

/// Outcome of one full exchange-procedure trial.
#[derive(Debug, Clone, PartialEq)]
pub struct StieTrial {
    /// Declaration step of subsystem 1, `None` if censored by the horizon.
    pub nu_bar_1: Option<u64>,
    /// Declaration step of subsystem 2, `None` if censored by the horizon.
    pub nu_bar_2: Option<u64>,
    /// Phase transitions in step order.
    pub transitions: Vec<PhaseEvent>,
}

/// Runs the full two-detector procedure over equal-length streams.
///
/// Empty streams yield a censored trial. The loop ends as soon as both
/// subsystems have declared or the streams are exhausted.
pub fn run_stie_trial(
    x: &[f64],
    y: &[f64],
    z: &[f64],
    scenario: &StreamScenario,
    threshold: &Threshold,
) -> Result<StieTrial> {
    if x.len() != y.len() || x.len() != z.len() {
        return Err(Error::invalid(
            "streams",
            format!("lengths must match, got x={}, y={}, z={}", x.len(), y.len(), z.len()),
        ));
    }
    let mut d1 = SubsystemDetector::new(scenario.prior1);
    let mut d2 = SubsystemDetector::new(scenario.prior2);
    let mut transitions = Vec::new();
    for i in 0..x.len() {
        if d1.phase == Phase::Stopped && d2.phase == Phase::Stopped {
            break;
        }
        let (p1, p2) = (d1.phase, d2.phase);
        let (n1, n2, _msgs) = stie_step(&d1, &d2, x[i], y[i], z[i], scenario, threshold)?;
        d1 = n1;
        d2 = n2;
        let n = d1.step();
        record_transition(&mut transitions, p1, &d1, n, 1);
        record_transition(&mut transitions, p2, &d2, n, 2);
    }
    Ok(StieTrial { nu_bar_1: d1.declared_at, nu_bar_2: d2.declared_at, transitions })
}

// A peer message can switch a detector to PrivateOnly and see it declare in
// the same step; the trace keeps the pass-through state visible.
fn record_transition(
    transitions: &mut Vec<PhaseEvent>,
    before: Phase,
    after: &SubsystemDetector,
    step: u64,
    subsystem: u8,
) {
    if after.phase == before {
        return;
    }
    if before == Phase::Joint && after.phase == Phase::Stopped && after.peer_declared_at == Some(step) {
        transitions.push(PhaseEvent { step, subsystem, phase: Phase::PrivateOnly });
    }
    transitions.push(PhaseEvent { step, subsystem, phase: after.phase });
}

/// The composite stopping times computed offline from the four first-crossing
/// times, applying the definition directly. `None` stands for "never within
/// the horizon". This is the algebraic reference for [`run_stie_trial`].
pub fn composite_from_crossings(
    nu_1: Option<u64>,
    nu_2: Option<u64>,
    nut_1: Option<u64>,
    nut_2: Option<u64>,
) -> (Option<u64>, Option<u64>) {
    let inf = u64::MAX;
    let v1 = nu_1.unwrap_or(inf);
    let v2 = nu_2.unwrap_or(inf);
    let nu_bar_1 = if v1 <= v2 {
        nu_1
    } else {
        // nu_2 < nu_1, so nu_2 is finite; the result is censored only if the
        // private statistic never crossed.
        nut_1.map(|t| t.max(v2))
    };
    let nu_bar_2 = if v2 <= v1 {
        nu_2
    } else {
        nut_2.map(|t| t.max(v1))
    };
    (nu_bar_1, nu_bar_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{GaussianShiftModel, StreamScenario};

    fn prior(rho: f64) -> GeometricPrior {
        GeometricPrior::new(rho).unwrap()
    }

    fn scenario(rho: f64, horizon: usize) -> StreamScenario {
        let m = GaussianShiftModel::new(1.0, 0.0, 0.5).unwrap();
        StreamScenario::new(m, m, m, prior(rho), prior(rho), horizon).unwrap()
    }

    /// Observation that produces a requested llr under the (1, 0, 0.5) model:
    /// llr(x) = 1 - 2x there, so x = (1 - llr) / 2.
    fn obs_for_llr(llr: f64) -> f64 {
        (1.0 - llr) / 2.0
    }

    #[test]
    fn threshold_known_values() {
        assert_eq!(make_threshold(0.5).unwrap().log_b, 0.0);
        assert!((make_threshold(1e-7).unwrap().log_b - 16.118095).abs() < 1e-5);
        assert!((make_threshold(0.01).unwrap().log_b - 4.59512).abs() < 1e-5);
        assert!(make_threshold(0.0).is_err());
        assert!(make_threshold(1.0).is_err());
        assert!(make_threshold(-0.1).is_err());
    }

    #[test]
    fn stopping_time_boundary_cases() {
        let p = prior(0.5);
        // alpha = 0.5 means log_b = 0; one neutral step gives lambda = 1.
        let t = make_threshold(0.5).unwrap();
        assert_eq!(srp_stopping_time(&[0.0, 0.0], p, &t), Some(1));
        // Strongly negative llrs never reach a real threshold.
        let t = make_threshold(0.01).unwrap();
        assert_eq!(srp_stopping_time(&[-5.0; 50], p, &t), None);
        assert_eq!(srp_stopping_time(&[], p, &t), None);
    }

    #[test]
    fn both_declare_at_step_one_when_threshold_is_trivial() {
        // rho = 0.5 with neutral observations gives lambda_1 = 1 on every
        // statistic, which meets the alpha = 0.5 threshold immediately.
        let sc = scenario(0.5, 4);
        let t = make_threshold(0.5).unwrap();
        let mid = obs_for_llr(0.0);
        let trial = run_stie_trial(&[mid; 4], &[mid; 4], &[mid; 4], &sc, &t).unwrap();
        assert_eq!(trial.nu_bar_1, Some(1));
        assert_eq!(trial.nu_bar_2, Some(1));
        // Simultaneous declaration leaves no private-only phase behind.
        assert!(trial.transitions.iter().all(|e| e.phase == Phase::Stopped));
    }

    #[test]
    fn peer_message_releases_a_waiting_private_crossing() {
        // Subsystem 1's private statistic crosses early, but its joint
        // statistic is held down by a hostile shared stream. Subsystem 2's
        // joint statistic crosses later; subsystem 1 must declare at that
        // same step, the larger of the two times.
        let sc = scenario(0.5, 30);
        let t = make_threshold(0.01).unwrap(); // log_b ~ 4.595
        let h = 30;

        // x: strong positive llr (+2 per step) so the private statistic of
        // subsystem 1 crosses within a few steps.
        let x: Vec<f64> = (0..h).map(|_| obs_for_llr(2.0)).collect();
        // z: strong negative llr (-3 per step) pins subsystem 1's joint
        // statistic below threshold while subsystem 2's joint statistic
        // must overcome it through y.
        let z: Vec<f64> = (0..h).map(|_| obs_for_llr(-3.0)).collect();
        // y: +4 per step, so y + z drifts at +1 per step and crosses later.
        let y: Vec<f64> = (0..h).map(|_| obs_for_llr(4.0)).collect();

        let trial = run_stie_trial(&x, &y, &z, &sc, &t).unwrap();
        let nu2 = trial.nu_bar_2.expect("subsystem 2 must declare");
        let nu1 = trial.nu_bar_1.expect("subsystem 1 must declare");

        // Independent single-stream references.
        let llr_x: Vec<f64> = x.iter().map(|&v| sc.model_x.llr(v)).collect();
        let nut1 = srp_stopping_time(&llr_x, sc.prior1, &t).unwrap();
        assert!(nut1 < nu2, "setup must give an early private crossing");
        assert_eq!(nu1, nu2, "held declaration is released by the peer message");
        assert!(trial
            .transitions
            .iter()
            .any(|e| e.subsystem == 1 && e.phase == Phase::PrivateOnly));
    }

    #[test]
    fn composite_algebra_handles_censoring() {
        // Both censored.
        assert_eq!(composite_from_crossings(None, None, None, None), (None, None));
        // Subsystem 1 crosses, 2 never does: 2 falls back to its private
        // statistic, which also never crosses.
        assert_eq!(composite_from_crossings(Some(5), None, Some(9), None), (Some(5), None));
        // Preempted side finishes on its private statistic, which crossed
        // between the peer's declaration and its own joint crossing.
        assert_eq!(
            composite_from_crossings(Some(10), Some(4), Some(7), Some(2)),
            (Some(7), Some(4))
        );
        // Private crossing before the peer's declaration snaps to the
        // declaration step itself.
        assert_eq!(composite_from_crossings(Some(10), Some(4), Some(3), None), (Some(4), Some(4)));
        // Tie goes through the joint branch on both sides.
        assert_eq!(composite_from_crossings(Some(6), Some(6), None, None), (Some(6), Some(6)));
    }

    #[test]
    fn detectors_must_advance_in_lockstep() {
        let sc = scenario(0.3, 8);
        let t = make_threshold(0.01).unwrap();
        let d1 = SubsystemDetector::new(sc.prior1);
        let mut d2 = SubsystemDetector::new(sc.prior2);
        d2.joint_stat = d2.joint_stat.update(0.0);
        d2.private_stat = d2.private_stat.update(0.0);
        let err = stie_step(&d1, &d2, 0.5, 0.5, 0.5, &sc, &t).unwrap_err();
        assert!(matches!(err, Error::StepMismatch { .. }));
    }

    #[test]
    fn empty_streams_are_censored() {
        let sc = scenario(0.3, 8);
        let t = make_threshold(0.01).unwrap();
        let trial = run_stie_trial(&[], &[], &[], &sc, &t).unwrap();
        assert_eq!(trial.nu_bar_1, None);
        assert_eq!(trial.nu_bar_2, None);
        let err = run_stie_trial(&[0.0], &[], &[0.0], &sc, &t).unwrap_err();
        assert!(matches!(err, Error::Invalid { .. }));
    }
}
