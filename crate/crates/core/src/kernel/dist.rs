//! Distribution families used by the generative model: samplers, log
//! densities and analytic moments.

use serde::{Deserialize, Serialize};

use super::rng::Rng;
use super::special::{ln_gamma, ln_std_normal_sf, log_sum_exp, std_normal_pdf, std_normal_sf, LN_SQRT_2PI};
use crate::error::{Error, Result};

/// Analytic first two moments.
pub trait Moments {
    fn mean(&self) -> f64;
    fn variance(&self) -> f64;
}

fn positive(name: &str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::Parameter(format!("{name} must be finite and > 0, got {value}")))
    }
}

/// Gamma with shape/rate parameterization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gamma {
    shape: f64,
    rate: f64,
}

impl Gamma {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        Ok(Self {
            shape: positive("gamma shape", shape)?,
            rate: positive("gamma rate", rate)?,
        })
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        sample_unit_gamma(self.shape, rng) / self.rate
    }

    /// `ln X` for `X ~ Gamma(shape, rate)`; stays finite when `X` underflows.
    pub fn sample_ln(&self, rng: &mut Rng) -> f64 {
        ln_sample_unit_gamma(self.shape, rng) - self.rate.ln()
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x < 0.0 || x.is_nan() {
            return f64::NEG_INFINITY;
        }
        if x == 0.0 {
            return match self.shape.partial_cmp(&1.0) {
                Some(std::cmp::Ordering::Less) => f64::INFINITY,
                Some(std::cmp::Ordering::Equal) => self.rate.ln(),
                _ => f64::NEG_INFINITY,
            };
        }
        self.shape * self.rate.ln() - ln_gamma(self.shape) + (self.shape - 1.0) * x.ln() - self.rate * x
    }
}

impl Moments for Gamma {
    fn mean(&self) -> f64 {
        self.shape / self.rate
    }
    fn variance(&self) -> f64 {
        self.shape / (self.rate * self.rate)
    }
}

/// Marsaglia–Tsang squeeze for `Gamma(shape, 1)`, with the `U^(1/α)` boost for α < 1.
fn sample_unit_gamma(shape: f64, rng: &mut Rng) -> f64 {
    if shape < 1.0 {
        let boosted = marsaglia_tsang(shape + 1.0, rng);
        return boosted * rng.open_uniform().powf(1.0 / shape);
    }
    marsaglia_tsang(shape, rng)
}

fn ln_sample_unit_gamma(shape: f64, rng: &mut Rng) -> f64 {
    if shape < 1.0 {
        let boosted = marsaglia_tsang(shape + 1.0, rng);
        return boosted.ln() + rng.open_uniform().ln() / shape;
    }
    marsaglia_tsang(shape, rng).ln()
}

fn marsaglia_tsang(shape: f64, rng: &mut Rng) -> f64 {
    debug_assert!(shape >= 1.0);
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x = rng.normal();
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u = rng.open_uniform();
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// Weibull with shape `k` and scale `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weibull {
    shape: f64,
    scale: f64,
}

impl Weibull {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        Ok(Self {
            shape: positive("weibull shape", shape)?,
            scale: positive("weibull scale", scale)?,
        })
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        self.scale * (-rng.open_uniform().ln()).powf(1.0 / self.shape)
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x <= 0.0 || x.is_nan() {
            return f64::NEG_INFINITY;
        }
        let z = x / self.scale;
        self.shape.ln() - self.scale.ln() + (self.shape - 1.0) * z.ln() - z.powf(self.shape)
    }
}

impl Moments for Weibull {
    fn mean(&self) -> f64 {
        self.scale * ln_gamma(1.0 + 1.0 / self.shape).exp()
    }
    fn variance(&self) -> f64 {
        let g1 = ln_gamma(1.0 + 1.0 / self.shape).exp();
        let g2 = ln_gamma(1.0 + 2.0 / self.shape).exp();
        self.scale * self.scale * (g2 - g1 * g1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Beta {
    a: f64,
    b: f64,
}

impl Beta {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        Ok(Self {
            a: positive("beta a", a)?,
            b: positive("beta b", b)?,
        })
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        let ln_x = ln_sample_unit_gamma(self.a, rng);
        let ln_y = ln_sample_unit_gamma(self.b, rng);
        // x / (x + y) in log space
        1.0 / (1.0 + (ln_y - ln_x).exp())
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return f64::NEG_INFINITY;
        }
        let ln_beta = ln_gamma(self.a) + ln_gamma(self.b) - ln_gamma(self.a + self.b);
        (self.a - 1.0) * x.ln() + (self.b - 1.0) * (1.0 - x).ln() - ln_beta
    }
}

impl Moments for Beta {
    fn mean(&self) -> f64 {
        self.a / (self.a + self.b)
    }
    fn variance(&self) -> f64 {
        let s = self.a + self.b;
        self.a * self.b / (s * s * (s + 1.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dirichlet {
    alpha: Vec<f64>,
}

impl Dirichlet {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.len() < 2 {
            return Err(Error::Parameter("dirichlet needs at least 2 components".into()));
        }
        for &a in &alpha {
            positive("dirichlet concentration", a)?;
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Normalized gamma variates, computed in log space so tiny
    /// concentrations never produce an all-zero vector.
    pub fn sample(&self, rng: &mut Rng) -> Vec<f64> {
        let logs: Vec<f64> = self.alpha.iter().map(|&a| ln_sample_unit_gamma(a, rng)).collect();
        let norm = log_sum_exp(&logs);
        let mut out: Vec<f64> = logs.iter().map(|l| (l - norm).exp()).collect();
        let total: f64 = out.iter().sum();
        out.iter_mut().for_each(|x| *x /= total);
        out
    }

    pub fn ln_pdf(&self, x: &[f64]) -> f64 {
        if x.len() != self.alpha.len() || x.iter().any(|&v| v < 0.0) {
            return f64::NEG_INFINITY;
        }
        let total: f64 = self.alpha.iter().sum();
        let mut lp = ln_gamma(total);
        for (&a, &v) in self.alpha.iter().zip(x) {
            lp += (a - 1.0) * v.ln() - ln_gamma(a);
        }
        lp
    }

    pub fn mean(&self) -> Vec<f64> {
        let total: f64 = self.alpha.iter().sum();
        self.alpha.iter().map(|a| a / total).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Categorical {
    probs: Vec<f64>,
}

impl Categorical {
    /// Accepts unnormalized nonnegative weights with a positive sum.
    pub fn new(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Parameter("categorical needs at least one category".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Parameter(format!("categorical weights must be finite and >= 0: {weights:?}")));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::Parameter("categorical weights sum to zero".into()));
        }
        Ok(Self {
            probs: weights.iter().map(|w| w / total).collect(),
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn sample(&self, rng: &mut Rng) -> usize {
        let target = rng.uniform();
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (k, &p) in self.probs.iter().enumerate() {
            if p > 0.0 {
                acc += p;
                last_positive = k;
                if target < acc {
                    return k;
                }
            }
        }
        // Rounding left `acc` a hair below 1.
        last_positive
    }

    pub fn ln_pmf(&self, k: usize) -> f64 {
        self.probs.get(k).map_or(f64::NEG_INFINITY, |p| p.ln())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bernoulli {
    p: f64,
}

impl Bernoulli {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Parameter(format!("bernoulli p must lie in [0, 1], got {p}")));
        }
        Ok(Self { p })
    }

    pub fn sample(&self, rng: &mut Rng) -> bool {
        rng.uniform() < self.p
    }

    pub fn ln_pmf(&self, outcome: bool) -> f64 {
        if outcome { self.p.ln() } else { (1.0 - self.p).ln() }
    }
}

impl Moments for Bernoulli {
    fn mean(&self) -> f64 {
        self.p
    }
    fn variance(&self) -> f64 {
        self.p * (1.0 - self.p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Poisson {
    lambda: f64,
}

impl Poisson {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::Parameter(format!("poisson rate must be finite and >= 0, got {lambda}")));
        }
        Ok(Self { lambda })
    }

    pub fn sample(&self, rng: &mut Rng) -> u64 {
        sample_poisson(self.lambda, rng)
    }

    pub fn ln_pmf(&self, k: u64) -> f64 {
        if self.lambda == 0.0 {
            return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
        }
        let k = k as f64;
        k * self.lambda.ln() - self.lambda - ln_gamma(k + 1.0)
    }
}

impl Moments for Poisson {
    fn mean(&self) -> f64 {
        self.lambda
    }
    fn variance(&self) -> f64 {
        self.lambda
    }
}

fn sample_poisson(lambda: f64, rng: &mut Rng) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    if lambda < 10.0 {
        let limit = (-lambda).exp();
        let mut k = 0u64;
        let mut prod = rng.uniform();
        while prod > limit {
            k += 1;
            prod *= rng.uniform();
        }
        return k;
    }
    // Hörmann's PTRS transformed rejection.
    let slam = lambda.sqrt();
    let ln_lam = lambda.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.uniform() - 0.5;
        let v = rng.open_uniform();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + lambda + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        if v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln() <= -lambda + k * ln_lam - ln_gamma(k + 1.0) {
            return k as u64;
        }
    }
}

/// Negative binomial in mean/dispersion form: variance `μ + μ²/α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegBinomial {
    mean: f64,
    dispersion: f64,
}

impl NegBinomial {
    pub fn new(mean: f64, dispersion: f64) -> Result<Self> {
        Ok(Self {
            mean: positive("negative binomial mean", mean)?,
            dispersion: positive("negative binomial dispersion", dispersion)?,
        })
    }

    /// Gamma–Poisson mixture: `λ ~ Gamma(α, α/μ)`, `k ~ Poisson(λ)`.
    pub fn sample(&self, rng: &mut Rng) -> u64 {
        let lambda = sample_unit_gamma(self.dispersion, rng) * self.mean / self.dispersion;
        sample_poisson(lambda, rng)
    }

    pub fn ln_pmf(&self, k: u64) -> f64 {
        let k = k as f64;
        let (mu, alpha) = (self.mean, self.dispersion);
        let ln_total = (alpha + mu).ln();
        ln_gamma(k + alpha) - ln_gamma(alpha) - ln_gamma(k + 1.0)
            + alpha * (alpha.ln() - ln_total)
            + k * (mu.ln() - ln_total)
    }

    /// `P(k = 0) = (α / (α + μ))^α`.
    pub fn zero_probability(&self) -> f64 {
        (self.dispersion * (self.dispersion.ln() - (self.dispersion + self.mean).ln())).exp()
    }
}

impl Moments for NegBinomial {
    fn mean(&self) -> f64 {
        self.mean
    }
    fn variance(&self) -> f64 {
        self.mean + self.mean * self.mean / self.dispersion
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfNormal {
    sigma: f64,
}

impl HalfNormal {
    pub fn new(sigma: f64) -> Result<Self> {
        Ok(Self {
            sigma: positive("half-normal sigma", sigma)?,
        })
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        self.sigma * rng.normal().abs()
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x < 0.0 || x.is_nan() {
            return f64::NEG_INFINITY;
        }
        let z = x / self.sigma;
        std::f64::consts::LN_2 - LN_SQRT_2PI - self.sigma.ln() - 0.5 * z * z
    }
}

impl Moments for HalfNormal {
    fn mean(&self) -> f64 {
        self.sigma * (2.0 / std::f64::consts::PI).sqrt()
    }
    fn variance(&self) -> f64 {
        self.sigma * self.sigma * (1.0 - 2.0 / std::f64::consts::PI)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normal {
    mean: f64,
    sd: f64,
}

impl Normal {
    pub fn new(mean: f64, sd: f64) -> Result<Self> {
        if !mean.is_finite() {
            return Err(Error::Parameter(format!("normal mean must be finite, got {mean}")));
        }
        Ok(Self {
            mean,
            sd: positive("normal sd", sd)?,
        })
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        self.mean + self.sd * rng.normal()
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let z = (x - self.mean) / self.sd;
        -LN_SQRT_2PI - self.sd.ln() - 0.5 * z * z
    }
}

impl Moments for Normal {
    fn mean(&self) -> f64 {
        self.mean
    }
    fn variance(&self) -> f64 {
        self.sd * self.sd
    }
}

/// Normal truncated to `[lower, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedNormal {
    mu: f64,
    sigma: f64,
    lower: f64,
}

impl TruncatedNormal {
    pub fn new(mu: f64, sigma: f64, lower: f64) -> Result<Self> {
        if !mu.is_finite() || !lower.is_finite() {
            return Err(Error::Parameter(format!("truncated normal needs finite mu/lower, got {mu}/{lower}")));
        }
        Ok(Self {
            mu,
            sigma: positive("truncated normal sigma", sigma)?,
            lower,
        })
    }

    fn alpha(&self) -> f64 {
        (self.lower - self.mu) / self.sigma
    }

    /// Plain rejection while the kept mass is at least 10%, else Robert's
    /// exponential proposal.
    pub fn sample(&self, rng: &mut Rng) -> f64 {
        let a = self.alpha();
        if std_normal_sf(a) >= 0.1 {
            loop {
                let z = rng.normal();
                if z >= a {
                    return self.mu + self.sigma * z;
                }
            }
        }
        let rate = 0.5 * (a + (a * a + 4.0).sqrt());
        loop {
            let z = a - rng.open_uniform().ln() / rate;
            let accept = (-0.5 * (z - rate) * (z - rate)).exp();
            if rng.uniform() <= accept {
                return (self.mu + self.sigma * z).max(self.lower);
            }
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x < self.lower || x.is_nan() {
            return f64::NEG_INFINITY;
        }
        let z = (x - self.mu) / self.sigma;
        -LN_SQRT_2PI - self.sigma.ln() - 0.5 * z * z - ln_std_normal_sf(self.alpha())
    }
}

impl Moments for TruncatedNormal {
    fn mean(&self) -> f64 {
        let a = self.alpha();
        self.mu + self.sigma * std_normal_pdf(a) / std_normal_sf(a)
    }
    fn variance(&self) -> f64 {
        let a = self.alpha();
        let lambda = std_normal_pdf(a) / std_normal_sf(a);
        self.sigma * self.sigma * (1.0 + a * lambda - lambda * lambda)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Uniform {
    low: f64,
    high: f64,
}

impl Uniform {
    pub fn new(low: f64, high: f64) -> Result<Self> {
        if !(low.is_finite() && high.is_finite() && low < high) {
            return Err(Error::Parameter(format!("uniform needs finite low < high, got [{low}, {high}]")));
        }
        Ok(Self { low, high })
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        self.low + (self.high - self.low) * rng.uniform()
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if (self.low..=self.high).contains(&x) {
            -(self.high - self.low).ln()
        } else {
            f64::NEG_INFINITY
        }
    }
}

impl Moments for Uniform {
    fn mean(&self) -> f64 {
        0.5 * (self.low + self.high)
    }
    fn variance(&self) -> f64 {
        (self.high - self.low).powi(2) / 12.0
    }
}

/// Finite mixture of Gamma components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaMixture {
    components: Vec<Gamma>,
    weights: Vec<f64>,
}

impl GammaMixture {
    pub fn new(components: Vec<Gamma>, weights: Vec<f64>) -> Result<Self> {
        if components.is_empty() || components.len() != weights.len() {
            return Err(Error::Parameter(format!(
                "mixture needs K >= 1 components with matching weights ({} vs {})",
                components.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Parameter(format!("mixture weights must be >= 0: {weights:?}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() >= 1e-12 {
            return Err(Error::Parameter(format!("mixture weights sum to {total}, not 1")));
        }
        Ok(Self { components, weights })
    }

    pub fn components(&self) -> &[Gamma] {
        &self.components
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        let k = Categorical { probs: self.weights.clone() }.sample(rng);
        self.components[k].sample(rng)
    }

    /// `ln Σ_k w_k f_k(x)`.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        let terms: Vec<f64> = self
            .components
            .iter()
            .zip(&self.weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|(c, w)| w.ln() + c.ln_pdf(x))
            .collect();
        log_sum_exp(&terms)
    }
}

impl Moments for GammaMixture {
    fn mean(&self) -> f64 {
        self.components.iter().zip(&self.weights).map(|(c, w)| w * c.mean()).sum()
    }
    fn variance(&self) -> f64 {
        let mean = self.mean();
        let second: f64 = self
            .components
            .iter()
            .zip(&self.weights)
            .map(|(c, w)| w * (c.variance() + c.mean() * c.mean()))
            .sum();
        second - mean * mean
    }
}
