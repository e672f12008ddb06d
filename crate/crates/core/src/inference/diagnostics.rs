//! Split R-hat and effective sample size for equal-length chains.

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Potential scale reduction after splitting each chain in half.
/// Returns `NaN` when fewer than 4 draws per chain are available and `1.0`
/// for a parameter that is constant across all chains.
pub fn split_rhat(chains: &[Vec<f64>]) -> f64 {
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    let half = n / 2;
    if half < 2 {
        return f64::NAN;
    }
    let halves: Vec<&[f64]> = chains
        .iter()
        .flat_map(|c| [&c[..half], &c[half..2 * half]])
        .collect();
    let stats: Vec<(f64, f64)> = halves.iter().map(|h| mean_var(h)).collect();
    let m = stats.len() as f64;
    let nh = half as f64;
    let grand = stats.iter().map(|s| s.0).sum::<f64>() / m;
    let b = nh / (m - 1.0) * stats.iter().map(|s| (s.0 - grand).powi(2)).sum::<f64>();
    let w = stats.iter().map(|s| s.1).sum::<f64>() / m;
    if w <= 0.0 {
        return if b <= 0.0 { 1.0 } else { f64::INFINITY };
    }
    let var_plus = (nh - 1.0) / nh * w + b / nh;
    (var_plus / w).sqrt()
}

fn autocovariance(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let (m, _) = mean_var(x);
    let c: Vec<f64> = x.iter().map(|v| v - m).collect();
    (0..n)
        .map(|lag| c[..n - lag].iter().zip(&c[lag..]).map(|(a, b)| a * b).sum::<f64>() / n as f64)
        .collect()
}

/// Multi-chain effective sample size using Geyer's initial monotone
/// positive sequence on the combined autocorrelation.
pub fn effective_sample_size(chains: &[Vec<f64>]) -> f64 {
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    let m = chains.len();
    if n < 4 || m == 0 {
        return f64::NAN;
    }
    let chains: Vec<&[f64]> = chains.iter().map(|c| &c[..n]).collect();
    let acov: Vec<Vec<f64>> = chains.iter().map(|c| autocovariance(c)).collect();
    let stats: Vec<(f64, f64)> = chains.iter().map(|c| mean_var(c)).collect();
    let nf = n as f64;
    let w = stats.iter().map(|s| s.1).sum::<f64>() / m as f64;
    let grand = stats.iter().map(|s| s.0).sum::<f64>() / m as f64;
    let b_over_n = if m > 1 {
        stats.iter().map(|s| (s.0 - grand).powi(2)).sum::<f64>() / (m as f64 - 1.0)
    } else {
        0.0
    };
    let var_plus = (nf - 1.0) / nf * w + b_over_n;
    if var_plus <= 0.0 {
        return (m * n) as f64;
    }
    let rho = |t: usize| {
        let mean_acov = acov.iter().map(|a| a[t]).sum::<f64>() / m as f64;
        1.0 - (w - mean_acov) / var_plus
    };

    let mut sum_pairs = 0.0;
    let mut prev_pair = f64::INFINITY;
    let mut t = 0;
    while t + 1 < n {
        let mut pair = rho(t) + rho(t + 1);
        if pair < 0.0 {
            break;
        }
        pair = pair.min(prev_pair);
        sum_pairs += pair;
        prev_pair = pair;
        t += 2;
    }
    let tau = (-1.0 + 2.0 * sum_pairs).max(1.0 / (m * n) as f64);
    (m * n) as f64 / tau
}
