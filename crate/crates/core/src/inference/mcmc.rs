//! Adaptive random-walk Metropolis-within-Gibbs over unconstrained space.
//!
//! Each parameter group is one Gibbs block. During warm-up every block tunes
//! its step size by Robbins–Monro toward the target acceptance rate, and
//! multi-dimensional blocks additionally learn a proposal covariance from
//! their own warm-up trajectory. An optional extra block spanning all
//! coordinates is updated after each sweep. Everything is frozen once
//! sampling starts.

use serde::{Deserialize, Serialize};

use super::diagnostics::{effective_sample_size, split_rhat};
use super::space::{ParamSpace, Params};
use crate::error::{Error, Result};
use crate::kernel::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub chains: usize,
    pub warmup: usize,
    /// Post-warm-up iterations per chain (before thinning).
    pub draws: usize,
    pub thin: usize,
    pub target_accept: f64,
    pub seed: u64,
    /// Std-dev of the per-chain perturbation of the initial point (unconstrained scale).
    pub init_jitter: f64,
    pub rhat_threshold: f64,
    /// Follow each sweep of per-group updates with one adaptive update of
    /// the whole vector, which lets the proposal learn cross-group
    /// correlations that single-group blocks cannot move along.
    pub joint_block: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            chains: 4,
            warmup: 2000,
            draws: 2000,
            thin: 4,
            target_accept: 0.35,
            seed: 0,
            init_jitter: 0.1,
            rhat_threshold: 1.05,
            joint_block: true,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 || self.draws == 0 || self.thin == 0 {
            return Err(Error::Config("chains, draws and thin must all be >= 1".into()));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::Config(format!(
                "target_accept must lie in (0, 1), got {}",
                self.target_accept
            )));
        }
        if !(self.init_jitter >= 0.0) {
            return Err(Error::Config("init_jitter must be >= 0".into()));
        }
        Ok(())
    }

    pub fn kept_per_chain(&self) -> usize {
        self.draws / self.thin
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarDiagnostic {
    pub name: String,
    pub rhat: f64,
    pub ess: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Post-warm-up acceptance rate per block, averaged over chains.
    pub acceptance: Vec<(String, f64)>,
    pub parameters: Vec<ScalarDiagnostic>,
    pub warnings: Vec<String>,
}

impl Diagnostics {
    pub fn max_rhat(&self) -> f64 {
        self.parameters
            .iter()
            .map(|p| p.rhat)
            .filter(|r| r.is_finite())
            .fold(1.0, f64::max)
    }

    pub fn min_ess(&self) -> f64 {
        self.parameters
            .iter()
            .map(|p| p.ess)
            .filter(|e| e.is_finite())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Pooled post-warm-up draws (constrained), chain-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorEnsemble {
    pub space: ParamSpace,
    pub draws: Vec<Vec<f64>>,
    pub chains: usize,
    pub diagnostics: Diagnostics,
}

impl PosteriorEnsemble {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn draw(&self, i: usize) -> Params<'_> {
        self.space.view(&self.draws[i])
    }

    /// All draws of the scalar at constrained position `index`.
    pub fn column(&self, index: usize) -> Vec<f64> {
        self.draws.iter().map(|d| d[index]).collect()
    }

    pub fn column_by_label(&self, label: &str) -> Option<Vec<f64>> {
        self.space
            .labels()
            .iter()
            .position(|l| l == label)
            .map(|i| self.column(i))
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.space.dim()];
        for d in &self.draws {
            for (acc, v) in m.iter_mut().zip(d) {
                *acc += v;
            }
        }
        m.iter_mut().for_each(|v| *v /= self.draws.len() as f64);
        m
    }
}

struct Block {
    range: std::ops::Range<usize>,
    log_scale: f64,
    chol: Vec<f64>,
    // Welford accumulators over the block's warm-up trajectory
    count: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
    adapted_cov: bool,
    accepted: usize,
    proposed: usize,
}

impl Block {
    fn new(range: std::ops::Range<usize>) -> Self {
        let d = range.len();
        let mut chol = vec![0.0; d * d];
        for i in 0..d {
            chol[i * d + i] = 1.0;
        }
        Self {
            range,
            log_scale: (0.1f64).ln(),
            chol,
            count: 0.0,
            mean: vec![0.0; d],
            m2: vec![0.0; d * d],
            adapted_cov: false,
            accepted: 0,
            proposed: 0,
        }
    }

    fn dim(&self) -> usize {
        self.range.len()
    }

    fn observe(&mut self, u: &[f64]) {
        let d = self.dim();
        let x = &u[self.range.clone()];
        self.count += 1.0;
        let delta: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        for i in 0..d {
            self.mean[i] += delta[i] / self.count;
        }
        for i in 0..d {
            for j in 0..d {
                self.m2[i * d + j] += delta[i] * (x[j] - self.mean[j]);
            }
        }
    }

    /// Refresh the proposal shape from the accumulated covariance.
    fn refresh_covariance(&mut self) {
        let d = self.dim();
        if self.count < (2 * d + 10) as f64 {
            return;
        }
        let mut cov: Vec<f64> = self.m2.iter().map(|v| v / (self.count - 1.0)).collect();
        for i in 0..d {
            cov[i * d + i] += 1e-10 + 1e-6 * cov[i * d + i];
        }
        if let Some(l) = cholesky(&cov, d) {
            if !self.adapted_cov {
                self.log_scale = (2.38 / (d as f64).sqrt()).ln();
                self.adapted_cov = true;
            }
            self.chol = l;
        }
    }

    fn propose(&self, u: &mut [f64], rng: &mut Rng) {
        let d = self.dim();
        let z: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        let scale = self.log_scale.exp();
        for i in 0..d {
            let mut step = 0.0;
            for (j, zj) in z.iter().enumerate().take(i + 1) {
                step += self.chol[i * d + j] * zj;
            }
            u[self.range.start + i] += scale * step;
        }
    }
}

fn cholesky(a: &[f64], d: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    Some(l)
}

struct ChainOutput {
    draws: Vec<Vec<f64>>,
    acceptance: Vec<f64>,
}

fn evaluate<F>(space: &ParamSpace, log_density: &F, u: &[f64], x: &mut [f64]) -> f64
where
    F: Fn(&Params) -> f64 + ?Sized,
{
    let log_jac = space.constrain(u, x);
    let lp = log_density(&space.view(x)) + log_jac;
    if lp.is_nan() { f64::NEG_INFINITY } else { lp }
}

fn run_chain<F>(
    space: &ParamSpace,
    log_density: &F,
    init_free: &[f64],
    config: &FitConfig,
    chain: usize,
) -> Result<ChainOutput>
where
    F: Fn(&Params) -> f64 + Sync + ?Sized,
{
    let mut rng = Rng::substream(config.seed, chain as u64, "mcmc-chain");
    let mut x = vec![0.0; space.dim()];

    let mut u = init_free.to_vec();
    let mut lp = f64::NEG_INFINITY;
    let mut jitter = config.init_jitter;
    for _ in 0..100 {
        let mut cand = init_free.to_vec();
        for v in cand.iter_mut() {
            *v += jitter * rng.normal();
        }
        let cand_lp = evaluate(space, log_density, &cand, &mut x);
        if cand_lp.is_finite() {
            u = cand;
            lp = cand_lp;
            break;
        }
        jitter *= 0.5;
    }
    if !lp.is_finite() {
        return Err(Error::Initialization { chain });
    }

    let mut blocks: Vec<Block> = space
        .groups()
        .iter()
        .enumerate()
        .filter(|(_, g)| g.free_dim() > 0)
        .map(|(gi, _)| Block::new(space.free_range(super::space::GroupId(gi))))
        .collect();
    if config.joint_block && blocks.len() > 1 {
        blocks.push(Block::new(0..space.free_dim()));
    }

    let cov_start = config.warmup / 4;
    let cov_first = config.warmup / 2;
    let total = config.warmup + config.draws;
    let mut kept = Vec::with_capacity(config.kept_per_chain());
    let mut proposal = u.clone();

    for iter in 0..total {
        let warm = iter < config.warmup;
        let gain = ((iter + 1) as f64).powf(-0.6);
        for block in blocks.iter_mut() {
            proposal.copy_from_slice(&u);
            block.propose(&mut proposal, &mut rng);
            let cand_lp = evaluate(space, log_density, &proposal, &mut x);
            let log_ratio = cand_lp - lp;
            let accept = log_ratio >= 0.0 || rng.open_uniform().ln() < log_ratio;
            if accept {
                u.copy_from_slice(&proposal);
                lp = cand_lp;
            }
            if warm {
                let prob = log_ratio.min(0.0).exp();
                block.log_scale += gain * (prob - config.target_accept);
                block.log_scale = block.log_scale.clamp(-20.0, 5.0);
                if iter >= cov_start {
                    block.observe(&u);
                }
                if block.dim() > 1 && iter >= cov_first && (iter - cov_first) % 100 == 0 {
                    block.refresh_covariance();
                }
            } else {
                block.proposed += 1;
                block.accepted += usize::from(accept);
            }
        }
        if !warm && (iter - config.warmup + 1) % config.thin == 0 {
            space.constrain(&u, &mut x);
            kept.push(x.clone());
        }
    }

    Ok(ChainOutput {
        draws: kept,
        acceptance: blocks
            .iter()
            .map(|b| b.accepted as f64 / b.proposed.max(1) as f64)
            .collect(),
    })
}

/// Sample the posterior defined by `log_density` (prior plus likelihood,
/// evaluated on constrained values) starting near the constrained point `init`.
pub fn fit<F>(space: &ParamSpace, log_density: &F, init: &[f64], config: &FitConfig) -> Result<PosteriorEnsemble>
where
    F: Fn(&Params) -> f64 + Sync + ?Sized,
{
    config.validate()?;
    let init_free = space.unconstrain(init)?;
    {
        let mut x = vec![0.0; space.dim()];
        if !evaluate(space, log_density, &init_free, &mut x).is_finite() {
            return Err(Error::Initialization { chain: 0 });
        }
    }

    let run = |chain: usize| run_chain(space, log_density, &init_free, config, chain);
    #[cfg(feature = "parallel")]
    let outputs: Vec<Result<ChainOutput>> = {
        use rayon::prelude::*;
        (0..config.chains).into_par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let outputs: Vec<Result<ChainOutput>> = (0..config.chains).map(run).collect();
    let outputs = outputs.into_iter().collect::<Result<Vec<_>>>()?;

    let mut block_names: Vec<String> = space
        .groups()
        .iter()
        .filter(|g| g.free_dim() > 0)
        .map(|g| g.name.clone())
        .collect();
    if config.joint_block && block_names.len() > 1 {
        block_names.push("joint".into());
    }
    let acceptance = block_names
        .into_iter()
        .enumerate()
        .map(|(bi, name)| {
            let mean = outputs.iter().map(|o| o.acceptance[bi]).sum::<f64>() / outputs.len() as f64;
            (name, mean)
        })
        .collect();

    let labels = space.labels();
    let mut parameters = Vec::with_capacity(labels.len());
    let mut warnings = Vec::new();
    for (i, name) in labels.into_iter().enumerate() {
        let per_chain: Vec<Vec<f64>> = outputs
            .iter()
            .map(|o| o.draws.iter().map(|d| d[i]).collect())
            .collect();
        let rhat = split_rhat(&per_chain);
        let ess = effective_sample_size(&per_chain);
        if rhat > config.rhat_threshold {
            warnings.push(format!("{name}: split R-hat {rhat:.3} exceeds {}", config.rhat_threshold));
        }
        parameters.push(ScalarDiagnostic { name, rhat, ess });
    }
    for w in &warnings {
        log::warn!("convergence: {w}");
    }

    let draws = outputs.into_iter().flat_map(|o| o.draws).collect();
    Ok(PosteriorEnsemble {
        space: space.clone(),
        draws,
        chains: config.chains,
        diagnostics: Diagnostics {
            acceptance,
            parameters,
            warnings,
        },
    })
}
