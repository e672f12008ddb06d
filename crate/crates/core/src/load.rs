//! Hierarchical per-phase active power demand with a network-wide power factor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{fit, Diagnostics, FitConfig, ParamSpace, Params, Support};
use crate::kernel::special::{ln_std_normal_sf, LN_SQRT_2PI};
use crate::kernel::{Beta, Dirichlet, Gamma, HalfNormal, Rng, TruncatedNormal};
use crate::phase::PhaseConfig;

/// Load category of a phase configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Mono = 0,
    Bi = 1,
    Tri = 2,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Mono, Category::Bi, Category::Tri];

    pub fn of(config: PhaseConfig) -> Self {
        match config.phase_count() {
            1 => Category::Mono,
            2 => Category::Bi,
            _ => Category::Tri,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::Mono => "mono",
            Category::Bi => "bi",
            Category::Tri => "tri",
        }
    }
}

/// One joint posterior draw of the load hierarchy. Per-category arrays are
/// indexed by [`Category`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadDraw {
    pub alpha_hp: f64,
    pub beta_hp: f64,
    pub alpha: [f64; 3],
    pub beta: [f64; 3],
    pub p_pot: [f64; 3],
    pub delta_bi: f64,
    pub delta_tri: [f64; 3],
    pub sigma_p: f64,
}

impl LoadDraw {
    /// Expected per-phase kW for a bus of the given configuration.
    pub fn mean_vector(&self, config: PhaseConfig) -> [f64; 3] {
        let mono = self.p_pot[Category::Mono as usize];
        let bi = self.p_pot[Category::Bi as usize];
        let tri = self.p_pot[Category::Tri as usize];
        let (d, e) = (bi * self.delta_bi, bi * (1.0 - self.delta_bi));
        match config {
            PhaseConfig::A => [mono, 0.0, 0.0],
            PhaseConfig::B => [0.0, mono, 0.0],
            PhaseConfig::C => [0.0, 0.0, mono],
            PhaseConfig::AB => [d, e, 0.0],
            PhaseConfig::CA => [d, 0.0, e],
            PhaseConfig::BC => [0.0, d, e],
            PhaseConfig::ABC => self.delta_tri.map(|s| tri * s),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = [self.alpha_hp, self.beta_hp, self.sigma_p]
            .into_iter()
            .chain(self.alpha)
            .chain(self.beta)
            .chain(self.p_pot);
        for v in pos {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Parameter(format!("load parameter must be > 0, got {v}")));
            }
        }
        if !(self.delta_bi > 0.0 && self.delta_bi < 1.0) {
            return Err(Error::Parameter(format!("delta_bi must lie in (0, 1), got {}", self.delta_bi)));
        }
        let s: f64 = self.delta_tri.iter().sum();
        if (s - 1.0).abs() > 1e-9 || self.delta_tri.iter().any(|v| *v <= 0.0) {
            return Err(Error::Parameter(format!("delta_tri must lie on the simplex, got {:?}", self.delta_tri)));
        }
        Ok(())
    }
}

/// Per-phase demand of one bus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BusDemand {
    pub p_kw: [f64; 3],
    pub q_kvar: [f64; 3],
    pub pf: f64,
}

impl BusDemand {
    pub fn zero(pf: f64) -> Self {
        Self {
            p_kw: [0.0; 3],
            q_kvar: [0.0; 3],
            pf,
        }
    }

    pub fn from_p(p_kw: [f64; 3], pf: f64) -> Self {
        let k = pf.acos().tan();
        Self {
            p_kw,
            q_kvar: p_kw.map(|p| p * k),
            pf,
        }
    }

    pub fn total_kw(&self) -> f64 {
        self.p_kw.iter().sum()
    }
}

/// Network power factor for a uniform variate `u`, using the closed upper
/// bounds `(0, 0.1649] -> 0.85`, `(0.1649, 0.27] -> 0.90`, else `0.95`.
pub fn power_factor(u: f64) -> f64 {
    if u > 0.0 && u <= 0.1649 {
        0.85
    } else if u > 0.1649 && u <= 0.27 {
        0.90
    } else {
        0.95
    }
}

/// Draw the single power factor of a network sample.
pub fn sample_power_factor(rng: &mut Rng) -> f64 {
    // 1 - [0, 1) is (0, 1], the interval the thresholds are stated on.
    power_factor(1.0 - rng.uniform())
}

/// Sample one bus's demand: truncated-normal deviations on active phases,
/// exact zeros elsewhere.
pub fn sample_demand(draw: &LoadDraw, config: PhaseConfig, pf: f64, rng: &mut Rng) -> Result<BusDemand> {
    let mu = draw.mean_vector(config);
    let active = config.phases();
    let mut p = [0.0; 3];
    for j in 0..3 {
        if !active[j] {
            continue;
        }
        p[j] = if draw.sigma_p == 0.0 {
            mu[j]
        } else {
            TruncatedNormal::new(mu[j], draw.sigma_p, 0.0)?.sample(rng)
        };
    }
    Ok(BusDemand::from_p(p, pf))
}

/// Observed demand of one loaded bus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadObservation {
    pub config: PhaseConfig,
    pub p_kw: [f64; 3],
}

/// Priors that the hierarchy leaves open.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoadPriors {
    /// Gamma(shape, rate) on both hyperparameters.
    pub hyper_shape: f64,
    pub hyper_rate: f64,
    /// Scale of the half-normal on `sigma_p`; `None` uses the empirical sd.
    pub sigma_scale: Option<f64>,
}

impl Default for LoadPriors {
    fn default() -> Self {
        Self {
            hyper_shape: 2.0,
            hyper_rate: 0.5,
            sigma_scale: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadPosterior {
    pub draws: Vec<LoadDraw>,
    pub diagnostics: Diagnostics,
    pub warnings: Vec<String>,
    /// Observed mean total kW per loaded bus.
    pub observed_mean_total_kw: f64,
}

impl LoadPosterior {
    pub fn column(&self, f: impl Fn(&LoadDraw) -> f64) -> Vec<f64> {
        self.draws.iter().map(f).collect()
    }
}

/// Sufficient statistics of one (category slot, phase) cell.
#[derive(Debug, Clone, Copy, Default)]
struct Cell {
    n: f64,
    sum: f64,
    sum_sq: f64,
}

impl Cell {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        self.sum += x;
        self.sum_sq += x * x;
    }

    /// Truncated-normal log likelihood at `mu`, `sigma`.
    fn ln_lik(&self, mu: f64, sigma: f64) -> f64 {
        if self.n == 0.0 {
            return 0.0;
        }
        let ss = (self.sum_sq - 2.0 * mu * self.sum + self.n * mu * mu).max(0.0);
        -self.n * (LN_SQRT_2PI + sigma.ln() + ln_std_normal_sf(-mu / sigma)) - 0.5 * ss / (sigma * sigma)
    }
}

pub fn fit_load_model(observations: &[LoadObservation], priors: &LoadPriors, config: &FitConfig) -> Result<LoadPosterior> {
    if observations.is_empty() {
        return Err(Error::Data("no load observations".into()));
    }
    let mut cells = [[Cell::default(); 3]; 7];
    let mut per_category = [0usize; 3];
    let mut phase_values = Vec::new();
    let mut totals = 0.0;
    for (i, obs) in observations.iter().enumerate() {
        let active = obs.config.phases();
        for j in 0..3 {
            let x = obs.p_kw[j];
            if !x.is_finite() || x < 0.0 {
                return Err(Error::Data(format!("load observation {i}: phase value {x} is not a finite kW >= 0")));
            }
            if active[j] {
                cells[obs.config.index()][j].push(x);
                phase_values.push(x);
            } else if x != 0.0 {
                return Err(Error::Data(format!(
                    "load observation {i}: {x} kW on phase {} absent from configuration {}",
                    ["A", "B", "C"][j],
                    obs.config
                )));
            }
        }
        per_category[Category::of(obs.config) as usize] += 1;
        totals += obs.p_kw.iter().sum::<f64>();
    }

    let mut warnings = Vec::new();
    for c in Category::ALL {
        if per_category[c as usize] == 0 {
            warnings.push(format!(
                "no {}-phase observations; its potential power follows the shared hyperprior",
                c.name()
            ));
        }
    }

    let n = phase_values.len() as f64;
    let mean = phase_values.iter().sum::<f64>() / n;
    let sd = (phase_values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
    let sigma_scale = priors
        .sigma_scale
        .unwrap_or_else(|| sd.max(1e-6 * mean.abs().max(1.0)));

    // Strongly coupled pairs share a block so the adapted proposal can follow
    // their correlation: the two hyperparameters, and each category's shape
    // with its rate.
    let mut space = ParamSpace::new();
    let g_hyper = space.add("hyper", Support::Positive, 2);
    let g_cat: Vec<_> = Category::ALL
        .iter()
        .map(|c| space.add(&format!("shape_rate_{}", c.name()), Support::Positive, 2))
        .collect();
    let g_pot = space.add("p_pot", Support::Positive, 3);
    let g_dbi = space.scalar("delta_bi", Support::UnitInterval);
    let g_dtri = space.add("delta_tri", Support::Simplex, 3);
    let g_sigma = space.scalar("sigma_p", Support::Positive);

    let hyper = Gamma::new(priors.hyper_shape, priors.hyper_rate)?;
    let split_bi = Beta::new(2.0, 2.0)?;
    let split_tri = Dirichlet::new(vec![2.0; 3])?;
    let sigma_prior = HalfNormal::new(sigma_scale)?;

    let to_draw = |p: &Params| -> LoadDraw {
        let hyper = p.get(g_hyper);
        let pair = |k: usize| p.get(g_cat[k]);
        LoadDraw {
            alpha_hp: hyper[0],
            beta_hp: hyper[1],
            alpha: [0, 1, 2].map(|k| pair(k)[0]),
            beta: [0, 1, 2].map(|k| pair(k)[1]),
            p_pot: p.get(g_pot).try_into().expect("width 3"),
            delta_bi: p.scalar(g_dbi),
            delta_tri: p.get(g_dtri).try_into().expect("width 3"),
            sigma_p: p.scalar(g_sigma),
        }
    };

    let target = |p: &Params| -> f64 {
        let d = to_draw(p);
        let mut lp = hyper.ln_pdf(d.alpha_hp) + hyper.ln_pdf(d.beta_hp);
        let Ok(parent) = Gamma::new(d.alpha_hp, d.beta_hp) else {
            return f64::NEG_INFINITY;
        };
        for k in 0..3 {
            lp += parent.ln_pdf(d.alpha[k]) + parent.ln_pdf(d.beta[k]);
            let Ok(pot) = Gamma::new(d.alpha[k], d.beta[k]) else {
                return f64::NEG_INFINITY;
            };
            lp += pot.ln_pdf(d.p_pot[k]);
        }
        lp += split_bi.ln_pdf(d.delta_bi) + split_tri.ln_pdf(&d.delta_tri) + sigma_prior.ln_pdf(d.sigma_p);
        if !lp.is_finite() {
            return f64::NEG_INFINITY;
        }
        for config in PhaseConfig::ALL {
            let mu = d.mean_vector(config);
            for j in 0..3 {
                lp += cells[config.index()][j].ln_lik(mu[j], d.sigma_p);
            }
        }
        lp
    };

    // Start at moment estimates so warm-up is spent mixing, not searching.
    let mut pot_init = [1.0; 3];
    for c in Category::ALL {
        let rows: Vec<&LoadObservation> = observations.iter().filter(|o| Category::of(o.config) == c).collect();
        if !rows.is_empty() {
            let m = rows.iter().map(|o| o.p_kw.iter().sum::<f64>()).sum::<f64>() / rows.len() as f64;
            pot_init[c as usize] = m.max(1e-3);
        }
    }
    let mut init = vec![2.0, 0.5];
    for p in pot_init {
        init.extend([1.0, 1.0 / p]);
    }
    init.extend(pot_init);
    init.push(0.5);
    init.extend([1.0 / 3.0; 3]);
    init.push((0.5 * sigma_scale).max(1e-6));

    let ensemble = fit(&space, &target, &init, config)?;
    let draws = (0..ensemble.len()).map(|i| to_draw(&ensemble.draw(i))).collect();
    warnings.extend(ensemble.diagnostics.warnings.iter().cloned());
    for w in &warnings {
        log::warn!("load model: {w}");
    }
    Ok(LoadPosterior {
        draws,
        diagnostics: ensemble.diagnostics,
        warnings,
        observed_mean_total_kw: totals / observations.len() as f64,
    })
}
