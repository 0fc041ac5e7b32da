//! Summary statistics used by the reports.

/// Rounds to `places` decimals, halves away from zero. A tiny nudge absorbs
/// binary representation error so that e.g. 2.325 rounds to 2.33.
pub fn round_half_up(x: f64, places: i32) -> f64 {
    let scale = 10f64.powi(places);
    let scaled = x * scale;
    (scaled + scaled.signum() * 1e-9).round() / scale
}

/// Signed relative decrease from `t1` to `t2` in percent, rounded to two
/// decimals. `None` when `t1` is not positive.
pub fn decrease_pct(t1: f64, t2: f64) -> Option<f64> {
    decrease_pct_raw(t1, t2).map(|d| round_half_up(d, 2))
}

pub fn decrease_pct_raw(t1: f64, t2: f64) -> Option<f64> {
    (t1 > 0.0).then(|| (t1 - t2) / t1 * 100.0)
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Sample standard deviation (n - 1 denominator). `None` below two samples.
pub fn sigma(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs)?;
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    Some((ss / (xs.len() - 1) as f64).sqrt())
}
