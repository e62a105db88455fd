//! Saturating log-space arithmetic.
//!
//! Zero probability is the finite sentinel [`LOG_ZERO`] rather than
//! `-inf`, so sums and products never produce NaN (`-inf - -inf`) and
//! comparisons stay total.

/// Log-space zero probability.
pub const LOG_ZERO: f64 = -1e30;

/// Anything at or below this counts as zero probability.
pub const LOG_ZERO_THRESHOLD: f64 = -1e29;

pub fn is_log_zero(x: f64) -> bool {
    x <= LOG_ZERO_THRESHOLD
}

/// log(exp(a) + exp(b)), saturating at [`LOG_ZERO`].
pub fn log_add(a: f64, b: f64) -> f64 {
    if is_log_zero(a) {
        return if is_log_zero(b) { LOG_ZERO } else { b };
    }
    if is_log_zero(b) {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// log(exp(a) · exp(b)) = a + b, saturating at [`LOG_ZERO`].
pub fn log_mul(a: f64, b: f64) -> f64 {
    if is_log_zero(a) || is_log_zero(b) {
        LOG_ZERO
    } else {
        a + b
    }
}

/// log Σ exp(x) over a slice, saturating at [`LOG_ZERO`].
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let hi = xs.iter().copied().fold(LOG_ZERO, f64::max);
    if is_log_zero(hi) {
        return LOG_ZERO;
    }
    hi + xs
        .iter()
        .filter(|x| !is_log_zero(**x))
        .map(|x| (x - hi).exp())
        .sum::<f64>()
        .ln()
}
