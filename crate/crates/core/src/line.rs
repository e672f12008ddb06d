//! Zone-weighted ordered Gamma mixtures for per-km positive-sequence
//! resistance and X/R ratio, and the phase impedance matrix built from them.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::carson::{carson_zabc, conductor_from_sequence, LineConstruction, Zabc};
use crate::error::{Error, Result};
use crate::inference::{fit, Diagnostics, FitConfig, ParamSpace, Params, Support};
use crate::kernel::special::{ln_gamma, log_sum_exp};
use crate::kernel::{Dirichlet, Gamma, GammaMixture, HalfNormal, Rng};
use crate::phase::PhaseConfig;

pub const COMPONENTS: usize = 3;

/// Shape and rate of a Gamma with the given mean and coefficient of variation.
pub fn gamma_from_mean_cv(mean: f64, cv: f64) -> Result<Gamma> {
    if !(mean > 0.0 && cv > 0.0 && mean.is_finite() && cv.is_finite()) {
        return Err(Error::Parameter(format!("mean and cv must be > 0, got {mean} and {cv}")));
    }
    let shape = 1.0 / (cv * cv);
    Gamma::new(shape, shape / mean)
}

/// One posterior draw of a zone-weighted mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureDraw {
    /// Strictly increasing component means.
    pub means: [f64; COMPONENTS],
    pub cv: f64,
    /// Mixture weights per zone, indexed by `zone - 1`.
    pub weights: Vec<[f64; COMPONENTS]>,
}

impl MixtureDraw {
    pub fn distribution(&self, zone: usize) -> Result<GammaMixture> {
        if zone == 0 || zone > self.weights.len() {
            return Err(Error::Parameter(format!("zone {zone} outside 1..={}", self.weights.len())));
        }
        let comps = self
            .means
            .iter()
            .map(|&m| gamma_from_mean_cv(m, self.cv))
            .collect::<Result<Vec<_>>>()?;
        let w = self.weights[zone - 1];
        let s: f64 = w.iter().sum();
        GammaMixture::new(comps, w.iter().map(|v| v / s).collect())
    }

    /// Weights averaged over zones, each zone counted `zone_sizes[z]` times.
    pub fn pooled_weights(&self, zone_sizes: &[usize]) -> [f64; COMPONENTS] {
        let total: usize = zone_sizes.iter().sum();
        let mut out = [0.0; COMPONENTS];
        for (w, &n) in self.weights.iter().zip(zone_sizes) {
            for k in 0..COMPONENTS {
                out[k] += w[k] * n as f64 / total.max(1) as f64;
            }
        }
        out
    }
}

/// Posterior draws of both line mixtures, paired by index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinePosterior {
    pub zone_count: usize,
    pub resistance: Vec<MixtureDraw>,
    pub ratio: Vec<MixtureDraw>,
    /// Observed lines per zone.
    pub zone_sizes: Vec<usize>,
    pub resistance_diagnostics: Diagnostics,
    pub ratio_diagnostics: Diagnostics,
    pub warnings: Vec<String>,
}

/// Sampled electrical parameters of one line, per km.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineParams {
    pub r1_ohm_per_km: f64,
    pub x1_ohm_per_km: f64,
    pub rho: f64,
    pub phases: PhaseConfig,
    pub z_abc: Zabc,
}

impl LineParams {
    /// Impedance for the line's phases from its sequence values.
    pub fn build(r1: f64, rho: f64, phases: PhaseConfig, construction: &LineConstruction) -> Result<Self> {
        let x1 = rho * r1;
        let geometry = construction.geometry()?;
        let conductor = conductor_from_sequence(r1, x1, &geometry, &construction.earth)?;
        let z_abc = carson_zabc(phases, &conductor, &geometry, &construction.neutral, &construction.earth)?;
        Ok(Self {
            r1_ohm_per_km: r1,
            x1_ohm_per_km: x1,
            rho,
            phases,
            z_abc,
        })
    }

    pub fn z_total(&self, length_km: f64) -> Zabc {
        self.z_abc.map(|row| row.map(|z| z * length_km))
    }
}

/// Draw R1 and the X/R ratio for a line in `zone`, then build its matrix.
pub fn sample_line(
    resistance: &MixtureDraw,
    ratio: &MixtureDraw,
    zone: usize,
    phases: PhaseConfig,
    construction: &LineConstruction,
    rng: &mut Rng,
) -> Result<LineParams> {
    let r1 = sample_positive(&resistance.distribution(zone)?, rng);
    let rho = sample_positive(&ratio.distribution(zone)?, rng);
    LineParams::build(r1, rho, phases, construction)
}

// A Gamma draw can underflow to zero for tiny shapes; nudge it onto the support.
fn sample_positive(d: &GammaMixture, rng: &mut Rng) -> f64 {
    d.sample(rng).max(f64::MIN_POSITIVE)
}

/// Mixture priors. Component means and cv follow the fixed half-normals; the
/// Dirichlet concentration on zone weights is open and set here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinePriors {
    pub weight_concentration: f64,
}

impl Default for LinePriors {
    fn default() -> Self {
        Self {
            weight_concentration: 0.25,
        }
    }
}

/// Fit one zone-weighted mixture to positive observations.
pub fn fit_mixture(
    zones: &[usize],
    values: &[f64],
    zone_count: usize,
    priors: &LinePriors,
    config: &FitConfig,
    label: &str,
) -> Result<(Vec<MixtureDraw>, Diagnostics, Vec<String>)> {
    if zones.len() != values.len() {
        return Err(Error::Data(format!("{label}: zone and value columns differ in length")));
    }
    if values.is_empty() {
        return Err(Error::Data(format!("{label}: no observations")));
    }
    if let Some(z) = zones.iter().find(|&&z| z == 0 || z > zone_count) {
        return Err(Error::Data(format!("{label}: zone {z} outside 1..={zone_count}")));
    }
    if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::Data(format!("{label}: observation {i} is {v}; must be finite and > 0")));
    }
    let mut warnings = Vec::new();
    if values.len() < COMPONENTS {
        warnings.push(format!(
            "{label}: {} observations for {COMPONENTS} components",
            values.len()
        ));
    }

    let mut by_zone: Vec<Vec<(f64, f64)>> = vec![Vec::new(); zone_count];
    for (&z, &v) in zones.iter().zip(values) {
        by_zone[z - 1].push((v, v.ln()));
    }
    for (z, obs) in by_zone.iter().enumerate() {
        if obs.is_empty() {
            warnings.push(format!("{label}: zone {} has no observations; its weights follow the prior", z + 1));
        }
    }

    let mut space = ParamSpace::new();
    let g_means = space.add("means", Support::OrderedPositive, COMPONENTS);
    let g_cv = space.scalar("cv", Support::Positive);
    let g_w: Vec<_> = (0..zone_count)
        .map(|z| space.add(&format!("weights[{}]", z + 1), Support::Simplex, COMPONENTS))
        .collect();
    let unit = HalfNormal::new(1.0)?;
    let cv_prior = HalfNormal::new(0.5)?;
    let w_prior = Dirichlet::new(vec![priors.weight_concentration; COMPONENTS])?;

    let target = |p: &Params| {
        let mu = p.get(g_means);
        let cv = p.scalar(g_cv);
        let mut lp = unit.ln_pdf(mu[0]) + cv_prior.ln_pdf(cv);
        for k in 1..COMPONENTS {
            lp += unit.ln_pdf(mu[k] - mu[k - 1]);
        }
        let shape = 1.0 / (cv * cv);
        let rates: Vec<f64> = mu.iter().map(|m| shape / m).collect();
        let norm: Vec<f64> = rates.iter().map(|r| shape * r.ln() - ln_gamma(shape)).collect();
        let mut terms = [0.0; COMPONENTS];
        for (z, obs) in by_zone.iter().enumerate() {
            let w = p.get(g_w[z]);
            lp += w_prior.ln_pdf(w);
            let ln_w: Vec<f64> = w.iter().map(|v| v.ln()).collect();
            for &(x, lnx) in obs {
                for k in 0..COMPONENTS {
                    terms[k] = ln_w[k] + norm[k] + (shape - 1.0) * lnx - rates[k] * x;
                }
                lp += log_sum_exp(&terms);
            }
        }
        lp
    };

    // Start the means at spread quantiles so every chain begins in the same
    // labelling, with one free component between the outer two.
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |f: f64| sorted[((sorted.len() - 1) as f64 * f).round() as usize];
    let mut init_means = [q(1.0 / 6.0), q(0.5), q(5.0 / 6.0)];
    for k in 1..COMPONENTS {
        if init_means[k] <= init_means[k - 1] {
            init_means[k] = init_means[k - 1] * 1.1 + 1e-6;
        }
    }
    let mut init = init_means.to_vec();
    init.push(0.3);
    for _ in 0..zone_count {
        init.extend([1.0 / COMPONENTS as f64; COMPONENTS]);
    }

    let ens = fit(&space, &target, &init, config)?;
    let draws = (0..ens.len())
        .map(|i| {
            let d = ens.draw(i);
            MixtureDraw {
                means: d.get(g_means).try_into().expect("width"),
                cv: d.scalar(g_cv),
                weights: g_w.iter().map(|g| d.get(*g).try_into().expect("width")).collect(),
            }
        })
        .collect();
    warnings.extend(ens.diagnostics.warnings.iter().map(|w| format!("{label}: {w}")));
    Ok((draws, ens.diagnostics, warnings))
}

/// Fit both mixtures. `ratio[i]` is X1/R1 of line `i`.
pub fn fit_line_model(
    zones: &[usize],
    r1: &[f64],
    ratio: &[f64],
    zone_count: usize,
    priors: &LinePriors,
    config: &FitConfig,
) -> Result<LinePosterior> {
    let (resistance, rd, mut warnings) = fit_mixture(zones, r1, zone_count, priors, config, "resistance")?;
    let ratio_cfg = config.clone().with_seed(config.seed ^ 0x5a5a_5a5a);
    let (ratio, xd, w2) = fit_mixture(zones, ratio, zone_count, priors, &ratio_cfg, "x/r ratio")?;
    warnings.extend(w2);
    let mut zone_sizes = vec![0; zone_count];
    for &z in zones {
        zone_sizes[z - 1] += 1;
    }
    Ok(LinePosterior {
        zone_count,
        resistance,
        ratio,
        zone_sizes,
        resistance_diagnostics: rd,
        ratio_diagnostics: xd,
        warnings,
    })
}

/// Per-draw summary of the two heaviest components (by pooled weight),
/// returned in increasing order of mean as `(mean, pooled weight)`.
pub fn dominant_components(draw: &MixtureDraw, zone_sizes: &[usize]) -> [(f64, f64); 2] {
    let w = draw.pooled_weights(zone_sizes);
    let mut idx: Vec<usize> = (0..COMPONENTS).collect();
    idx.sort_by(|&a, &b| w[b].total_cmp(&w[a]));
    let mut top = [(draw.means[idx[0]], w[idx[0]]), (draw.means[idx[1]], w[idx[1]])];
    top.sort_by(|a, b| a.0.total_cmp(&b.0));
    top
}

pub fn zero_matrix() -> Zabc {
    [[Complex64::new(0.0, 0.0); 3]; 3]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Moments;

    #[test]
    fn gamma_conversion() {
        let g = gamma_from_mean_cv(1.0, 0.5).unwrap();
        assert_eq!((g.shape(), g.rate()), (4.0, 4.0));
        let g = gamma_from_mean_cv(2.0, 1.0).unwrap();
        assert_eq!((g.shape(), g.rate()), (1.0, 0.5));
        let g = gamma_from_mean_cv(3.7, 0.23).unwrap();
        assert!((g.variance().sqrt() / g.mean() - 0.23).abs() < 1e-12);
        assert!(gamma_from_mean_cv(0.0, 1.0).is_err());
        assert!(gamma_from_mean_cv(1.0, -1.0).is_err());
    }

    #[test]
    fn degenerate_weights_and_tiny_cv() {
        let d = MixtureDraw {
            means: [0.3, 0.7, 1.1],
            cv: 1e-9,
            weights: vec![[1.0, 0.0, 0.0]],
        };
        let mut rng = Rng::new(3);
        for _ in 0..100 {
            let x = d.distribution(1).unwrap().sample(&mut rng);
            assert!((x - 0.3).abs() < 1e-6);
        }
    }

    #[test]
    fn reactance_is_ratio_times_resistance() {
        let r = MixtureDraw {
            means: [0.2, 0.5, 0.9],
            cv: 0.3,
            weights: vec![[0.3, 0.3, 0.4]; 2],
        };
        let x = MixtureDraw {
            means: [0.8, 1.5, 2.5],
            cv: 0.2,
            weights: vec![[0.5, 0.3, 0.2]; 2],
        };
        let mut rng = Rng::new(4);
        let c = LineConstruction::default();
        for _ in 0..200 {
            let l = sample_line(&r, &x, 2, PhaseConfig::ABC, &c, &mut rng).unwrap();
            assert_eq!(l.x1_ohm_per_km, l.rho * l.r1_ohm_per_km);
            for i in 0..3 {
                assert!(l.z_abc[i][i].re > 0.0);
                for j in 0..3 {
                    assert!((l.z_abc[i][j] - l.z_abc[j][i]).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn dominant_components_sorted_by_mean() {
        let d = MixtureDraw {
            means: [0.2, 0.5, 0.8],
            cv: 0.1,
            weights: vec![[0.45, 0.05, 0.5]],
        };
        let top = dominant_components(&d, &[10]);
        assert_eq!(top[0].0, 0.2);
        assert_eq!(top[1].0, 0.8);
    }

    #[test]
    fn rejects_nonpositive_values() {
        let err = fit_mixture(&[1, 1], &[0.2, 0.0], 1, &LinePriors::default(), &FitConfig::default(), "r");
        assert!(err.is_err());
    }
}
