use std::f64::consts::{PI, SQRT_2};

pub use statrs::function::gamma::ln_gamma;

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln Σ exp(x_i)`, stable for large magnitudes. Empty input gives `-inf`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Upper tail `P(Z > a)` of the standard normal.
pub fn std_normal_sf(a: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(a / SQRT_2)
}

/// `ln P(Z > a)`, accurate far into the upper tail.
pub fn ln_std_normal_sf(a: f64) -> f64 {
    if a < 30.0 {
        std_normal_sf(a).ln()
    } else {
        // Asymptotic Mills-ratio expansion.
        let a2 = a * a;
        -0.5 * a2 - a.ln() - LN_SQRT_2PI + (1.0 - 1.0 / a2 + 3.0 / (a2 * a2)).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_matches_direct() {
        let v = [0.1, -2.0, 1.5];
        let direct = v.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&v) - direct).abs() < 1e-14);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn normal_tail_is_continuous_at_switch() {
        let below = ln_std_normal_sf(29.999_999);
        let above = ln_std_normal_sf(30.0);
        assert!((below - above).abs() < 1e-4, "{below} vs {above}");
        assert!((std_normal_sf(0.0) - 0.5).abs() < 1e-15);
    }
}
