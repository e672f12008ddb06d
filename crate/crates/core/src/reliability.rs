//! Zone-conditioned reliability indices: hurdle-Weibull interruption duration
//! (CAIDI, hours) and negative-binomial interruption frequency (CAIFI, per year).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{fit, Diagnostics, FitConfig, ParamSpace, Params, Support};
use crate::kernel::{Beta, HalfNormal, NegBinomial, Rng, Weibull};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BusReliability {
    pub caidi_hours: f64,
    pub caifi_per_year: u64,
}

/// One posterior draw of the duration model; vectors are indexed by `zone - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaidiDraw {
    pub p: Vec<f64>,
    pub shape: Vec<f64>,
    pub scale: Vec<f64>,
}

/// One posterior draw of the frequency model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaifiDraw {
    pub mu: Vec<f64>,
    pub dispersion: f64,
}

pub fn sample_caidi(draw: &CaidiDraw, zone: usize, rng: &mut Rng) -> Result<f64> {
    let z = zone_index(zone, draw.p.len())?;
    let p = draw.p[z];
    if p <= 0.0 || rng.uniform() >= p {
        return Ok(0.0);
    }
    Ok(Weibull::new(draw.shape[z], draw.scale[z])?.sample(rng))
}

pub fn sample_caifi(draw: &CaifiDraw, zone: usize, rng: &mut Rng) -> Result<u64> {
    let z = zone_index(zone, draw.mu.len())?;
    Ok(NegBinomial::new(draw.mu[z], draw.dispersion)?.sample(rng))
}

fn zone_index(zone: usize, count: usize) -> Result<usize> {
    if zone == 0 || zone > count {
        return Err(Error::Parameter(format!("zone {zone} outside 1..={count}")));
    }
    Ok(zone - 1)
}

/// Prior scales. The defaults are unit half-normals throughout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReliabilityPriors {
    pub weibull_shape_scale: f64,
    pub weibull_scale_scale: f64,
    pub frequency_mean_scale: f64,
    pub dispersion_scale: f64,
}

impl Default for ReliabilityPriors {
    fn default() -> Self {
        Self {
            weibull_shape_scale: 1.0,
            weibull_scale_scale: 1.0,
            frequency_mean_scale: 1.0,
            dispersion_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaidiPosterior {
    pub zone_count: usize,
    pub draws: Vec<CaidiDraw>,
    pub diagnostics: Diagnostics,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaifiPosterior {
    pub zone_count: usize,
    pub draws: Vec<CaifiDraw>,
    pub diagnostics: Diagnostics,
    pub warnings: Vec<String>,
}

fn check_zones(zones: &[usize], zone_count: usize) -> Result<()> {
    if zone_count == 0 {
        return Err(Error::Parameter("zone count must be >= 1".into()));
    }
    if let Some(z) = zones.iter().find(|&&z| z == 0 || z > zone_count) {
        return Err(Error::Data(format!("observation zone {z} outside 1..={zone_count}")));
    }
    Ok(())
}

/// Fit per-zone hurdle probabilities and Weibull parameters to one duration
/// per bus. `zones[i]` is the zone of `hours[i]`.
pub fn fit_caidi(
    zones: &[usize],
    hours: &[f64],
    zone_count: usize,
    priors: &ReliabilityPriors,
    config: &FitConfig,
) -> Result<CaidiPosterior> {
    if zones.len() != hours.len() {
        return Err(Error::Data("zone and duration columns differ in length".into()));
    }
    check_zones(zones, zone_count)?;
    if let Some((i, h)) = hours.iter().enumerate().find(|(_, h)| !(h.is_finite() && **h >= 0.0)) {
        return Err(Error::Data(format!("duration {i} is {h}; must be finite and >= 0")));
    }

    let mut zeros = vec![0.0; zone_count];
    let mut positive: Vec<Vec<f64>> = vec![Vec::new(); zone_count];
    for (&z, &h) in zones.iter().zip(hours) {
        if h > 0.0 {
            positive[z - 1].push(h);
        } else {
            zeros[z - 1] += 1.0;
        }
    }
    let mut warnings = Vec::new();
    for z in 0..zone_count {
        if positive[z].is_empty() {
            warnings.push(format!(
                "zone {}: no positive durations; Weibull parameters follow the prior",
                z + 1
            ));
        }
        if positive[z].is_empty() && zeros[z] == 0.0 {
            warnings.push(format!("zone {}: no duration observations", z + 1));
        }
    }
    let ln_x: Vec<Vec<f64>> = positive.iter().map(|xs| xs.iter().map(|x| x.ln()).collect()).collect();
    let sum_ln: Vec<f64> = ln_x.iter().map(|v| v.iter().sum()).collect();

    let mut space = ParamSpace::new();
    let g_p = space.add("p", Support::UnitInterval, zone_count);
    let g_shape = space.add("weibull_shape", Support::Positive, zone_count);
    let g_scale = space.add("weibull_scale", Support::Positive, zone_count);
    let hurdle_prior = Beta::new(1.0, 1.0)?;
    let shape_prior = HalfNormal::new(priors.weibull_shape_scale)?;
    let scale_prior = HalfNormal::new(priors.weibull_scale_scale)?;

    let target = |par: &Params| {
        let (p, k, lam) = (par.get(g_p), par.get(g_shape), par.get(g_scale));
        let mut lp = 0.0;
        for z in 0..zone_count {
            let n1 = positive[z].len() as f64;
            lp += hurdle_prior.ln_pdf(p[z]) + shape_prior.ln_pdf(k[z]) + scale_prior.ln_pdf(lam[z]);
            lp += zeros[z] * (-p[z]).ln_1p() + n1 * p[z].ln();
            if n1 > 0.0 {
                let ln_lam = lam[z].ln();
                let tail: f64 = ln_x[z].iter().map(|l| (k[z] * (l - ln_lam)).exp()).sum();
                lp += n1 * (k[z].ln() - k[z] * ln_lam) + (k[z] - 1.0) * sum_ln[z] - tail;
            }
        }
        lp
    };

    let mut init = Vec::with_capacity(3 * zone_count);
    for z in 0..zone_count {
        let n1 = positive[z].len() as f64;
        init.push(((n1 + 0.5) / (n1 + zeros[z] + 1.0)).clamp(0.01, 0.99));
    }
    init.extend(std::iter::repeat_n(1.0, zone_count));
    for xs in &positive {
        let m = if xs.is_empty() { 1.0 } else { xs.iter().sum::<f64>() / xs.len() as f64 };
        init.push(m.max(1e-3));
    }

    let ens = fit(&space, &target, &init, config)?;
    let draws = (0..ens.len())
        .map(|i| {
            let d = ens.draw(i);
            CaidiDraw {
                p: d.get(g_p).to_vec(),
                shape: d.get(g_shape).to_vec(),
                scale: d.get(g_scale).to_vec(),
            }
        })
        .collect();
    warnings.extend(ens.diagnostics.warnings.iter().cloned());
    Ok(CaidiPosterior {
        zone_count,
        draws,
        diagnostics: ens.diagnostics,
        warnings,
    })
}

/// Fit per-zone mean interruption counts with one network-wide dispersion.
pub fn fit_caifi(
    zones: &[usize],
    counts: &[u64],
    zone_count: usize,
    priors: &ReliabilityPriors,
    config: &FitConfig,
) -> Result<CaifiPosterior> {
    if zones.len() != counts.len() {
        return Err(Error::Data("zone and count columns differ in length".into()));
    }
    check_zones(zones, zone_count)?;

    // Histogram per zone: (count value, multiplicity).
    let mut hist: Vec<std::collections::BTreeMap<u64, f64>> = vec![Default::default(); zone_count];
    for (&z, &c) in zones.iter().zip(counts) {
        *hist[z - 1].entry(c).or_default() += 1.0;
    }
    let hist: Vec<Vec<(u64, f64)>> = hist.into_iter().map(|h| h.into_iter().collect()).collect();
    let mut warnings = Vec::new();
    for (z, h) in hist.iter().enumerate() {
        if h.is_empty() {
            warnings.push(format!("zone {}: no frequency observations; mean follows the prior", z + 1));
        }
    }

    let mut space = ParamSpace::new();
    let g_mu = space.add("mu", Support::Positive, zone_count);
    let g_disp = space.scalar("dispersion", Support::Positive);
    let mu_prior = HalfNormal::new(priors.frequency_mean_scale)?;
    let disp_prior = HalfNormal::new(priors.dispersion_scale)?;

    let target = |par: &Params| {
        let mu = par.get(g_mu);
        let a = par.scalar(g_disp);
        let mut lp = disp_prior.ln_pdf(a);
        for z in 0..zone_count {
            lp += mu_prior.ln_pdf(mu[z]);
            let Ok(nb) = NegBinomial::new(mu[z], a) else {
                return f64::NEG_INFINITY;
            };
            lp += hist[z].iter().map(|&(k, m)| m * nb.ln_pmf(k)).sum::<f64>();
        }
        lp
    };

    let mut init = Vec::with_capacity(zone_count + 1);
    for h in &hist {
        let n: f64 = h.iter().map(|e| e.1).sum();
        let s: f64 = h.iter().map(|&(k, m)| k as f64 * m).sum();
        init.push(if n > 0.0 { (s / n).max(0.01) } else { 0.5 });
    }
    init.push(1.0);

    let ens = fit(&space, &target, &init, config)?;
    let draws = (0..ens.len())
        .map(|i| {
            let d = ens.draw(i);
            CaifiDraw {
                mu: d.get(g_mu).to_vec(),
                dispersion: d.scalar(g_disp),
            }
        })
        .collect();
    warnings.extend(ens.diagnostics.warnings.iter().cloned());
    Ok(CaifiPosterior {
        zone_count,
        draws,
        diagnostics: ens.diagnostics,
        warnings,
    })
}
