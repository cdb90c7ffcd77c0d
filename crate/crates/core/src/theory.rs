//! Closed-form predictions: detection-delay constants, the error-coupling
//! rate analysis, and the Gaussian strong-interaction condition.
//!
//! Notation used throughout: q1(S) and q0(S) are the post- and pre-change
//! divergences of stream S, var1(S)/var0(S) the llr variances, and d_u the
//! prior tail rate of subsystem u's change time. All rates are per step.

use crate::error::{Error, Result};
use crate::models::InfoProfile;

/// First-order delay scales at false-alarm level alpha.
///
/// `l1` is the joint-information delay of subsystem 1, |ln alpha| divided by
/// q1(X) + q1(Z) + d1, and `l1_tilde` the private-only delay, |ln alpha|
/// divided by q1(X) + d1. `l2`/`l2_tilde` mirror these through Y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayConstants {
    pub alpha: f64,
    pub l1: f64,
    pub l1_tilde: f64,
    pub l2: f64,
    pub l2_tilde: f64,
}

/// Computes the four delay scales. Requires alpha in (0, 1) and positive
/// rates; every denominator must be positive.
pub fn delay_constants(
    alpha: f64,
    q1_x: f64,
    q1_y: f64,
    q1_z: f64,
    d1: f64,
    d2: f64,
) -> Result<DelayConstants> {
    if !alpha.is_finite() || alpha <= 0.0 || alpha >= 1.0 {
        return Err(Error::invalid("alpha", format!("must lie strictly in (0, 1), got {alpha}")));
    }
    for (name, v) in [("q1_x", q1_x), ("q1_y", q1_y), ("q1_z", q1_z), ("d1", d1), ("d2", d2)] {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::invalid("rate", format!("{name} must be finite and >= 0, got {v}")));
        }
    }
    let log_alpha_abs = -alpha.ln();
    let denoms = [q1_x + q1_z + d1, q1_x + d1, q1_y + q1_z + d2, q1_y + d2];
    if denoms.iter().any(|&d| d <= 0.0) {
        return Err(Error::invalid("rates", "every delay denominator must be positive".to_string()));
    }
    Ok(DelayConstants {
        alpha,
        l1: log_alpha_abs / denoms[0],
        l1_tilde: log_alpha_abs / denoms[1],
        l2: log_alpha_abs / denoms[2],
        l2_tilde: log_alpha_abs / denoms[3],
    })
}

/// Which branch of the coupling-rate analysis produced the answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateCase {
    /// b1 <= 0: the joint statistic has no adverse drift during the window
    /// where only the peer's fault is present; only the matched rate exists.
    FavorableDrift,
    /// b1 > 0 and the rate-matching point sits at or above b1.
    MatchedCrossing,
    /// b1 > 0 but the matching point fell below b1; it is clamped to b1 and
    /// the matched rate is re-evaluated there.
    ClampedAtDrift,
}

/// Error-coupling decay exponent: P(coupled false alarm) ~ alpha^r_star.
///
/// `b1 = q0(X) - q1(Z) + d1` is the adverse drift rate subsystem 1's joint
/// statistic fights while only fault 2 is present. `r_b` exists only when
/// b1 > 0. `strong` means r_star > 1, in which case coupling decays faster
/// than the false-alarm budget itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingRate {
    pub b1: f64,
    pub w_star: f64,
    pub r_a: f64,
    pub r_b: Option<f64>,
    pub r_star: f64,
    pub strong: bool,
    pub case: RateCase,
}

/// Case analysis for the coupling exponent of subsystem 1.
///
/// With s = var1(X) + var1(Z), m = max(var0(X), var1(Z)) + var1(Y) and
/// g = min(q0(X), q1(Z)) + q1(Y) + d1 - d2:
///
/// ```text
/// w_star = sqrt(s / m) * g - b1,       r_a = g^2 / (w_star * m),
/// r_b    = 4 b1 / s                    (only when b1 > 0),
/// ```
///
/// and r_star = r_a when b1 <= 0, else max(r_a, r_b), with w_star clamped to
/// b1 (and r_a re-evaluated there) if the matching point falls below b1.
/// Requires g > 0; the analysis has no answer otherwise.
pub fn coupling_rate(
    x: &InfoProfile,
    y: &InfoProfile,
    z: &InfoProfile,
    d1: f64,
    d2: f64,
) -> Result<CouplingRate> {
    for (name, v) in [("d1", d1), ("d2", d2)] {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::invalid("rate", format!("{name} must be finite and >= 0, got {v}")));
        }
    }
    let s = x.var_llr_post + z.var_llr_post;
    let m = x.var_llr_pre.max(z.var_llr_post) + y.var_llr_post;
    if s <= 0.0 || m <= 0.0 {
        return Err(Error::invalid("variances", "variance sums must be positive".to_string()));
    }
    let b1 = x.q0 - z.q1 + d1;
    let g = x.q0.min(z.q1) + y.q1 + d1 - d2;
    if g <= 0.0 {
        return Err(Error::Infeasible(format!(
            "coupling-rate analysis needs min(q0_x, q1_z) + q1_y + d1 - d2 > 0, got {g}"
        )));
    }

    let w_matched = (s / m).sqrt() * g - b1;
    let (w_star, r_a, case) = if b1 <= 0.0 {
        // w_matched >= -b1 automatically here, the matched point is valid.
        (w_matched, g * g / (w_matched * m), RateCase::FavorableDrift)
    } else if w_matched >= b1 {
        (w_matched, g * g / (w_matched * m), RateCase::MatchedCrossing)
    } else {
        (b1, g * g / (b1 * m), RateCase::ClampedAtDrift)
    };
    let r_b = (b1 > 0.0).then(|| 4.0 * b1 / s);
    let r_star = match r_b {
        Some(rb) => r_a.max(rb),
        None => r_a,
    };
    Ok(CouplingRate { b1, w_star, r_a, r_b, r_star, strong: r_star > 1.0, case })
}

/// Verdict of the Gaussian strong-interaction check, reported under the two
/// divergence conventions in circulation plus the general-form cross-check.
///
/// For a common mean shift and private variance v_s against shared variance
/// v_z, "coupling decays faster than alpha" reduces to a variance-ratio
/// test. Measuring information by the KL divergence shift^2/(2 sigma^2)
/// gives the threshold v_s < v_z / 3; measuring it by the per-sample SNR
/// shift^2/sigma^2 gives v_s < 3 v_z / 5. Margins are `threshold - v_s`
/// (positive when the inequality holds).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrongCondition {
    pub strong_kl: bool,
    pub margin_x_kl: f64,
    pub margin_y_kl: f64,
    pub strong_snr: bool,
    pub margin_x_snr: f64,
    pub margin_y_snr: f64,
    /// General-form rate computed from the same parameters with vanishing
    /// prior rates, as an independent cross-check of the KL-convention
    /// verdict.
    pub general: CouplingRate,
}

/// Evaluates the strong-interaction condition for Gaussian streams with a
/// common mean shift `mu` and the given variances.
pub fn gaussian_strong_condition(
    sigma2_x: f64,
    sigma2_y: f64,
    sigma2_z: f64,
    mu: f64,
) -> Result<StrongCondition> {
    for (name, v) in [("sigma2_x", sigma2_x), ("sigma2_y", sigma2_y), ("sigma2_z", sigma2_z)] {
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::invalid("variance", format!("{name} must be finite and > 0, got {v}")));
        }
    }
    if !mu.is_finite() || mu == 0.0 {
        return Err(Error::invalid("mu", format!("mean shift must be finite and nonzero, got {mu}")));
    }
    let kl_threshold = sigma2_z / 3.0;
    let snr_threshold = 3.0 * sigma2_z / 5.0;
    let model = |s2: f64| crate::models::GaussianShiftModel::new(0.0, mu, s2).expect("validated");
    let x = model(sigma2_x).info_profile();
    let y = model(sigma2_y).info_profile();
    let z = model(sigma2_z).info_profile();
    // Vanishing prior rates isolate the stream-information part of the
    // condition, which is what the ratio thresholds capture.
    let general = coupling_rate(&x, &y, &z, 1e-9, 1e-9)?;
    Ok(StrongCondition {
        strong_kl: sigma2_x < kl_threshold && sigma2_y < kl_threshold,
        margin_x_kl: kl_threshold - sigma2_x,
        margin_y_kl: kl_threshold - sigma2_y,
        strong_snr: sigma2_x < snr_threshold && sigma2_y < snr_threshold,
        margin_x_snr: snr_threshold - sigma2_x,
        margin_y_snr: snr_threshold - sigma2_y,
        general,
    })
}

/// Predicted m-th delay moment of the exchange procedure for subsystem 1:
/// a mixture of the joint and private delay scales weighted by
/// `delta` = P(the peer declares first).
///
/// `m` must be 1 or 2 and `delta` must lie in [0, 1].
pub fn predicted_stie_delay(constants: &DelayConstants, delta: f64, m: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::invalid("delta", format!("must lie in [0, 1], got {delta}")));
    }
    if m != 1 && m != 2 {
        return Err(Error::invalid("m", format!("moment order must be 1 or 2, got {m}")));
    }
    let p = m as i32;
    Ok(constants.l1.powi(p) * (1.0 - delta) + constants.l1_tilde.powi(p) * delta)
}

/// Minimizes f(x) = (a + b x)^2 / (c + d x) over x >= 0 and returns
/// (argmin, minimum).
///
/// Requires a >= 0, c >= 0, d > 0, b != 0. Cases:
/// b <= 0 gives a zero at x = -a/b; for b > 0 the minimizer is
/// a/b - 2c/d when that is positive (minimum (4 b^2 / d)(a/b - c/d)),
/// otherwise the boundary x = 0 (minimum a^2 / c, needing c > 0).
pub fn minimize_quadratic_over_linear(a: f64, b: f64, c: f64, d: f64) -> Result<(f64, f64)> {
    for (name, v) in [("a", a), ("b", b), ("c", c), ("d", d)] {
        if !v.is_finite() {
            return Err(Error::invalid("coefficient", format!("{name} must be finite, got {v}")));
        }
    }
    if a < 0.0 || c < 0.0 {
        return Err(Error::invalid("coefficient", format!("need a >= 0 and c >= 0, got a={a}, c={c}")));
    }
    if d <= 0.0 {
        return Err(Error::invalid("d", format!("must be > 0, got {d}")));
    }
    if b == 0.0 {
        return Err(Error::Infeasible(
            "b = 0 admits no finite minimizer: the objective decays toward zero as x grows".to_string(),
        ));
    }
    if b < 0.0 {
        return Ok((-a / b, 0.0));
    }
    if a / b > 2.0 * c / d {
        let x = a / b - 2.0 * c / d;
        let f = (4.0 * b * b / d) * (a / b - c / d);
        Ok((x, f))
    } else {
        if c == 0.0 {
            return Err(Error::invalid(
                "c",
                "boundary minimizer x = 0 needs c > 0, the objective is undefined there".to_string(),
            ));
        }
        Ok((0.0, a * a / c))
    }
}
