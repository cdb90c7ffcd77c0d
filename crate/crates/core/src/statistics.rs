//! Posterior-odds change statistics, maintained in the log domain.
//!
//! For a single stream with llr increments r_1, r_2, ... and a geometric
//! change prior with rate rho, the posterior odds of "change by now" are
//!
//! ```text
//! lambda_n = (1 / tail(n)) * sum_{k=1..n} pmf(k) * exp(R(k, n)),
//! R(k, n) = r_k + ... + r_n,
//! ```
//!
//! which the geometric prior collapses to the one-step recursion
//!
//! ```text
//! lambda_n = (lambda_{n-1} + rho) * exp(r_n) / (1 - rho),   lambda_0 = 0.
//! ```
//!
//! The recursion is the hot path; [`srp_direct`] keeps the quadratic-time sum
//! as an always-available cross-check. Both live in log space because
//! lambda_n reaches e^700 within a few hundred strongly post-change steps.
//!
//! [`NoExState`] maintains the two-fault statistic a subsystem would need if
//! no exchange bit existed: subsystem 1 then has to average over the peer's
//! unknown change time k2, because the shared stream switches at min(k1, k2).
//! With G the own prior and H the peer prior (pmf/tail as above),
//!
//! ```text
//! lambda_n = a_n / b_n,
//! a_n = sum_{k1=1..n} G.pmf(k1) e^{Rx(k1, n)} w_n(k1),
//! w_n(k1) = sum_{k2<k1} H.pmf(k2) e^{Rz(k2, n)} + H.tail(k1 - 1) e^{Rz(k1, n)},
//! b_n = G.tail(n) * ( H.tail(n) + sum_{k2=1..n} H.pmf(k2) e^{Rz(k2, n)} ),
//! ```
//!
//! where everything has been normalized by the all-pre-change likelihood so
//! only llr increments appear. Two running aggregates suffice:
//! u_n = sum_{k2<=n} H.pmf(k2) e^{Rz(k2, n)} obeys
//! u_n = (u_{n-1} + H.pmf(n)) e^{rz_n}, and the outer sum obeys
//! a_n = (a_{n-1} + G.pmf(n) (u_{n-1} + H.tail(n-1))) e^{rx_n + rz_n}.

use crate::models::GeometricPrior;
use crate::numerics::{log_add_exp, log_sum_exp};

/// Running count and cumulative sum of llr increments. The windowed sum
/// R(k, n) equals `cum(n) - cum(k-1)` when prefixes are retained.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LlrAccumulator {
    pub n: u64,
    pub cum_llr: f64,
}

impl LlrAccumulator {
    pub fn push(self, llr: f64) -> Self {
        Self { n: self.n + 1, cum_llr: self.cum_llr + llr }
    }
}

/// Posterior-odds state after n observations. `log_lambda` is -inf at n = 0
/// and strictly greater than -inf from the first update on, since the newest
/// change hypothesis k = n always contributes prior mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SrpState {
    pub n: u64,
    pub log_lambda: f64,
    prior: GeometricPrior,
}

impl SrpState {
    pub fn new(prior: GeometricPrior) -> Self {
        Self { n: 0, log_lambda: f64::NEG_INFINITY, prior }
    }

    pub fn prior(&self) -> GeometricPrior {
        self.prior
    }

    /// Posterior probability of "change has happened", lambda / (1 + lambda),
    /// evaluated stably from the log odds.
    pub fn posterior(&self) -> f64 {
        let l = self.log_lambda;
        if l > 0.0 {
            1.0 / (1.0 + (-l).exp())
        } else {
            let e = l.exp();
            e / (1.0 + e)
        }
    }

    pub fn update(self, llr_increment: f64) -> Self {
        srp_update(self, llr_increment)
    }
}

/// One step of the posterior-odds recursion:
/// `log_lambda' = logaddexp(log_lambda, ln rho) + llr - ln(1 - rho)`.
///
/// Infinite increments saturate: +inf pins the statistic at +inf, -inf
/// zeroes it for this step and the prior mass revives it on the next.
pub fn srp_update(state: SrpState, llr_increment: f64) -> SrpState {
    let p = state.prior;
    let log_lambda = log_add_exp(state.log_lambda, p.rho().ln()) + llr_increment - (-p.rho()).ln_1p();
    SrpState { n: state.n + 1, log_lambda, prior: p }
}

/// Quadratic-time evaluation of the defining sum, in the log domain.
///
/// Returns `ln lambda_n` for the full stream; `-inf` on an empty stream.
/// This is the reference route for the recursion and is exercised against it
/// in tests; production code uses [`srp_update`].
pub fn srp_direct(llrs: &[f64], prior: GeometricPrior) -> f64 {
    let n = llrs.len();
    if n == 0 {
        return f64::NEG_INFINITY;
    }
    // terms[k-1] = ln pmf(k) + R(k, n), built by suffix accumulation.
    let mut terms = vec![0.0f64; n];
    let mut suffix = 0.0;
    for k in (1..=n).rev() {
        suffix += llrs[k - 1];
        let log_pmf = prior.log_pmf(k as u64).expect("k >= 1");
        terms[k - 1] = log_pmf + suffix;
    }
    log_sum_exp(&terms) - prior.log_tail(n as u64)
}

/// No-exchange statistic state for one subsystem.
///
/// `own` is the prior of this subsystem's change time (the outer sum), and
/// `peer` the prior of the other subsystem's change time, marginalized out
/// through the shared stream. Both log aggregates are normalized by the
/// all-pre-change likelihood, so updates consume llr increments only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoExState {
    pub n: u64,
    log_outer: f64,
    log_inner: f64,
    own: GeometricPrior,
    peer: GeometricPrior,
}

impl NoExState {
    pub fn new(own: GeometricPrior, peer: GeometricPrior) -> Self {
        Self {
            n: 0,
            log_outer: f64::NEG_INFINITY,
            log_inner: f64::NEG_INFINITY,
            own,
            peer,
        }
    }

    pub fn update(self, own_llr: f64, shared_llr: f64) -> Self {
        noex_update(self, own_llr, shared_llr)
    }

    /// `ln lambda_n = ln a_n - ln b_n`; -inf at n = 0.
    pub fn log_lambda(&self) -> f64 {
        if self.n == 0 {
            return f64::NEG_INFINITY;
        }
        let log_b = self.own.log_tail(self.n) + log_add_exp(self.peer.log_tail(self.n), self.log_inner);
        self.log_outer - log_b
    }
}

/// One step of the no-exchange recursion; see the module docs for the two
/// aggregate identities. The inner aggregate must be combined with the peer
/// tail at its previous step, so the order of operations here matters.
pub fn noex_update(state: NoExState, own_llr: f64, shared_llr: f64) -> NoExState {
    let n_new = state.n + 1;
    let log_own_pmf = state.own.log_pmf(n_new).expect("n_new >= 1");
    let log_peer_pmf = state.peer.log_pmf(n_new).expect("n_new >= 1");
    let log_peer_tail_prev = state.peer.log_tail(state.n);

    let fresh = log_own_pmf + log_add_exp(state.log_inner, log_peer_tail_prev);
    let log_outer = own_llr + shared_llr + log_add_exp(state.log_outer, fresh);
    let log_inner = shared_llr + log_add_exp(state.log_inner, log_peer_pmf);

    NoExState { n: n_new, log_outer, log_inner, own: state.own, peer: state.peer }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prior(rho: f64) -> GeometricPrior {
        GeometricPrior::new(rho).unwrap()
    }

    #[test]
    fn recursion_known_steps_at_half_rho() {
        // Zero llr increments with rho = 1/2: lambda_1 = (0 + 0.5)/0.5 = 1,
        // lambda_2 = (1 + 0.5)/0.5 = 3.
        let s0 = SrpState::new(prior(0.5));
        assert_eq!(s0.n, 0);
        assert_eq!(s0.log_lambda, f64::NEG_INFINITY);
        let s1 = srp_update(s0, 0.0);
        assert!((s1.log_lambda.exp() - 1.0).abs() < 1e-12);
        let s2 = srp_update(s1, 0.0);
        assert!((s2.log_lambda.exp() - 3.0).abs() < 1e-12);
        assert_eq!(s2.n, 2);
    }

    #[test]
    fn direct_sum_known_values() {
        let p = prior(0.5);
        assert!((srp_direct(&[0.0], p).exp() - 1.0).abs() < 1e-12);
        assert!((srp_direct(&[0.0, 0.0], p).exp() - 3.0).abs() < 1e-12);
        assert_eq!(srp_direct(&[], p), f64::NEG_INFINITY);
    }

    #[test]
    fn recursion_matches_direct_sum_on_random_streams() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..200 {
            let rho = 0.01 + 0.98 * rng.random::<f64>();
            let p = prior(rho);
            let n = 1 + rng.random_range(0..120usize);
            let llrs: Vec<f64> = (0..n).map(|_| 4.0 * (rng.random::<f64>() - 0.3)).collect();
            let mut s = SrpState::new(p);
            for &r in &llrs {
                s = s.update(r);
            }
            let direct = srp_direct(&llrs, p);
            let scale = s.log_lambda.abs().max(direct.abs()).max(1.0);
            assert!(
                (s.log_lambda - direct).abs() <= 1e-9 * scale,
                "rho={rho} n={n} chain={} direct={direct}",
                s.log_lambda
            );
        }
    }

    #[test]
    fn statistic_is_positive_from_the_first_step() {
        // Even a very negative increment leaves lambda_n >= pmf(n)/tail(n) * e^r > 0.
        let mut s = SrpState::new(prior(0.05));
        s = s.update(-50.0);
        assert!(s.log_lambda.is_finite());
        s = s.update(-50.0);
        assert!(s.log_lambda.is_finite());
    }

    #[test]
    fn saturating_increments() {
        let s = SrpState::new(prior(0.3)).update(f64::INFINITY);
        assert_eq!(s.log_lambda, f64::INFINITY);
        let s = s.update(0.0);
        assert_eq!(s.log_lambda, f64::INFINITY);

        let s = SrpState::new(prior(0.3)).update(f64::NEG_INFINITY);
        assert_eq!(s.log_lambda, f64::NEG_INFINITY);
        // Prior mass revives the statistic on the next step.
        let s = s.update(0.0);
        assert!(s.log_lambda.is_finite());
    }

    #[test]
    fn posterior_is_a_probability_and_monotone_in_log_lambda() {
        let mut s = SrpState::new(prior(0.2));
        let mut last = s.posterior();
        assert_eq!(last, 0.0);
        for _ in 0..40 {
            s = s.update(0.7);
            let p = s.posterior();
            assert!((0.0..=1.0).contains(&p));
            assert!(p >= last);
            last = p;
        }
        assert!(last > 0.999);
    }

    #[test]
    fn accumulator_windows_are_prefix_differences() {
        let llrs = [0.3, -1.2, 0.8, 0.1];
        let mut prefix = vec![LlrAccumulator::default()];
        for &r in &llrs {
            prefix.push(prefix.last().unwrap().push(r));
        }
        // R(2, 4) = r_2 + r_3 + r_4.
        let want = llrs[1] + llrs[2] + llrs[3];
        let got = prefix[4].cum_llr - prefix[1].cum_llr;
        assert!((got - want).abs() < 1e-15);
        assert_eq!(prefix[4].n, 4);
    }

    #[test]
    fn noex_single_step_hand_expansion() {
        // One neutral observation (llr = 0) with rho1 = rho2 = 1/2:
        // a_1 = pmf1(1) * (pmf2(1) + tail2(1)) = 0.5, b_1 = tail1(1) * (tail2(1)
        // + pmf2(1)) = 0.5, so the statistic is exactly 1.
        let s = NoExState::new(prior(0.5), prior(0.5)).update(0.0, 0.0);
        assert!((s.log_lambda() - 0.0).abs() < 1e-12);
        assert_eq!(s.n, 1);
    }

    #[test]
    fn noex_starts_at_zero_odds() {
        let s = NoExState::new(prior(0.3), prior(0.7));
        assert_eq!(s.log_lambda(), f64::NEG_INFINITY);
    }

    #[test]
    fn noex_with_neutral_shared_stream_reduces_to_single_stream_odds() {
        // If every shared llr is exactly zero, the peer marginalization
        // integrates to one and the statistic must equal the single-stream
        // posterior odds on the own stream, for any pair of priors.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let own = prior(0.01 + 0.9 * rng.random::<f64>());
            let peer = prior(0.01 + 0.9 * rng.random::<f64>());
            let n = 1 + rng.random_range(0..60usize);
            let llrs: Vec<f64> = (0..n).map(|_| 3.0 * (rng.random::<f64>() - 0.4)).collect();
            let mut s = NoExState::new(own, peer);
            for &r in &llrs {
                s = s.update(r, 0.0);
            }
            let want = srp_direct(&llrs, own);
            let scale = want.abs().max(1.0);
            assert!(
                (s.log_lambda() - want).abs() < 1e-10 * scale,
                "noex={} srp={want}",
                s.log_lambda()
            );
        }
    }
}
