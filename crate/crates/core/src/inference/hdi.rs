use crate::error::{Error, Result};

/// Fewest draws for which an interval summary is reported.
pub const MIN_HDI_DRAWS: usize = 100;

/// Narrowest interval containing `ceil(mass * n)` of the draws. Among equally
/// narrow windows the lowest one wins.
pub fn hdi(draws: &[f64], mass: f64) -> Result<(f64, f64)> {
    if !(mass > 0.0 && mass <= 1.0) {
        return Err(Error::Parameter(format!("HDI mass must be in (0, 1], got {mass}")));
    }
    if draws.len() < MIN_HDI_DRAWS {
        return Err(Error::TooFewDraws {
            needed: MIN_HDI_DRAWS,
            got: draws.len(),
        });
    }
    if draws.iter().any(|v| v.is_nan()) {
        return Err(Error::Parameter("HDI input contains NaN".into()));
    }
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let k = ((mass * n as f64).ceil() as usize).clamp(1, n);
    let mut best = (sorted[0], sorted[k - 1]);
    for i in 1..=n - k {
        let (lo, hi) = (sorted[i], sorted[i + k - 1]);
        if hi - lo < best.1 - best.0 {
            best = (lo, hi);
        }
    }
    Ok(best)
}
