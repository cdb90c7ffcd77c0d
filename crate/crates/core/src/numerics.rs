//! Log-domain arithmetic and small numeric helpers.
//!
//! The detection statistics grow exponentially along a trial (hundreds of
//! nats within a few hundred post-change steps), so every running statistic
//! in this crate lives in the log domain and combines terms through
//! [`log_add_exp`] / [`log_sum_exp`].

/// `ln(exp(a) + exp(b))` without overflow.
///
/// Semantics at the edges: if either argument is NaN the result is NaN;
/// `-inf` acts as the additive identity (`log_add_exp(-inf, x) == x`);
/// `+inf` saturates to `+inf`.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        return f64::NAN;
    }
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::INFINITY {
        return f64::INFINITY;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(sum_i exp(x_i))` without overflow. Empty input yields `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let mut hi = f64::NEG_INFINITY;
    for &x in xs {
        if x.is_nan() {
            return f64::NAN;
        }
        if x > hi {
            hi = x;
        }
    }
    if hi == f64::NEG_INFINITY || hi == f64::INFINITY {
        return hi;
    }
    let sum: f64 = xs.iter().map(|&x| (x - hi).exp()).sum();
    hi + sum.ln()
}

/// SplitMix64 step, used to derive independent sub-seeds from a master seed.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
