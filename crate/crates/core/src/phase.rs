//! Zone-conditioned phase-configuration probabilities and phase-consistent
//! allocation over a radial feeder.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{fit, hdi, Diagnostics, FitConfig, ParamSpace, Params, Support};
use crate::kernel::special::ln_gamma;
use crate::kernel::{Categorical, Dirichlet, HalfNormal, Rng};
use crate::topology::{Feeder, ZoneAssignment};

pub const CONFIG_COUNT: usize = 7;

/// Phase combination served at a bus. The discriminant is the fixed index
/// used by every probability vector in this crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PhaseConfig {
    A = 0,
    B = 1,
    C = 2,
    AB = 3,
    BC = 4,
    CA = 5,
    ABC = 6,
}

impl PhaseConfig {
    pub const ALL: [PhaseConfig; CONFIG_COUNT] = [
        PhaseConfig::A,
        PhaseConfig::B,
        PhaseConfig::C,
        PhaseConfig::AB,
        PhaseConfig::BC,
        PhaseConfig::CA,
        PhaseConfig::ABC,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Bit 0 = A, bit 1 = B, bit 2 = C.
    pub fn bits(self) -> u8 {
        match self {
            PhaseConfig::A => 0b001,
            PhaseConfig::B => 0b010,
            PhaseConfig::C => 0b100,
            PhaseConfig::AB => 0b011,
            PhaseConfig::BC => 0b110,
            PhaseConfig::CA => 0b101,
            PhaseConfig::ABC => 0b111,
        }
    }

    pub fn from_bits(bits: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.bits() == bits)
    }

    /// Active flags for phases A, B, C.
    pub fn phases(self) -> [bool; 3] {
        let b = self.bits();
        [b & 1 != 0, b & 2 != 0, b & 4 != 0]
    }

    pub fn phase_count(self) -> usize {
        self.bits().count_ones() as usize
    }

    pub fn is_subset_of(self, other: PhaseConfig) -> bool {
        self.bits() & !other.bits() == 0
    }

    pub fn label(self) -> &'static str {
        match self {
            PhaseConfig::A => "A",
            PhaseConfig::B => "B",
            PhaseConfig::C => "C",
            PhaseConfig::AB => "AB",
            PhaseConfig::BC => "BC",
            PhaseConfig::CA => "CA",
            PhaseConfig::ABC => "ABC",
        }
    }
}

impl fmt::Display for PhaseConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PhaseConfig {
    type Err = Error;

    /// Accepts any ordering of the letters, so `AC` and `CA` both parse.
    fn from_str(s: &str) -> Result<Self> {
        let mut bits = 0u8;
        for ch in s.trim().chars() {
            let bit = match ch.to_ascii_uppercase() {
                'A' => 1,
                'B' => 2,
                'C' => 4,
                _ => return Err(Error::Parameter(format!("unknown phase letter {ch:?} in {s:?}"))),
            };
            if bits & bit != 0 {
                return Err(Error::Parameter(format!("repeated phase in {s:?}")));
            }
            bits |= bit;
        }
        Self::from_bits(bits).ok_or_else(|| Error::Parameter(format!("empty phase configuration {s:?}")))
    }
}

/// Configurations a child may take under `parent`: every nonempty subset.
pub fn transition(parent: PhaseConfig) -> Vec<PhaseConfig> {
    PhaseConfig::ALL.into_iter().filter(|c| c.is_subset_of(parent)).collect()
}

/// Outcome of [`constrain`]: the restricted probability vector and whether
/// the uniform fallback had to be used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constrained {
    pub probs: [f64; CONFIG_COUNT],
    pub fallback: bool,
}

/// Mask `base` to the subsets of `parent` (minus any `prohibited`) and
/// renormalize. If no allowed entry has mass, the result is uniform over the
/// allowed set; if prohibitions empty the allowed set, they are ignored.
pub fn constrain(base: &[f64; CONFIG_COUNT], parent: PhaseConfig, prohibited: &[PhaseConfig]) -> Constrained {
    let mut allowed: Vec<PhaseConfig> = transition(parent)
        .into_iter()
        .filter(|c| !prohibited.contains(c))
        .collect();
    let mut fallback = false;
    if allowed.is_empty() {
        allowed = transition(parent);
        fallback = true;
    }
    let mut probs = [0.0; CONFIG_COUNT];
    for c in &allowed {
        probs[c.index()] = base[c.index()].max(0.0);
    }
    let total: f64 = probs.iter().sum();
    if total > 0.0 && total.is_finite() {
        probs.iter_mut().for_each(|p| *p /= total);
    } else {
        fallback = true;
        let u = 1.0 / allowed.len() as f64;
        for c in &allowed {
            probs[c.index()] = u;
        }
    }
    Constrained { probs, fallback }
}

/// Phase configuration of every bus, indexed like the topology's buses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseAllocation {
    pub configs: Vec<PhaseConfig>,
}

/// A line whose downstream bus carries a phase its upstream bus lacks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub line: usize,
    pub upstream: usize,
    pub downstream: usize,
}

impl PhaseAllocation {
    pub fn config(&self, bus: usize) -> PhaseConfig {
        self.configs[bus]
    }

    /// Every line whose downstream bus is not a subset of its upstream bus.
    pub fn violations(&self, feeder: &Feeder) -> Vec<Violation> {
        (0..feeder.topology.line_count())
            .filter_map(|l| {
                let up = feeder.line_upstream(l);
                let down = feeder.line_downstream(l);
                (!self.configs[down].is_subset_of(self.configs[up])).then_some(Violation {
                    line: l,
                    upstream: up,
                    downstream: down,
                })
            })
            .collect()
    }

    pub fn is_consistent(&self, feeder: &Feeder) -> bool {
        self.violations(feeder).is_empty()
    }

    pub fn counts(&self) -> [usize; CONFIG_COUNT] {
        let mut n = [0; CONFIG_COUNT];
        for c in &self.configs {
            n[c.index()] += 1;
        }
        n
    }
}

/// Scenario controls for allocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AllocationOptions {
    pub source: PhaseConfig,
    /// Configurations never chosen at a branch point.
    pub prohibited: Vec<PhaseConfig>,
}

impl Default for AllocationOptions {
    fn default() -> Self {
        Self {
            source: PhaseConfig::ABC,
            prohibited: Vec::new(),
        }
    }
}

/// Assign phases top-down: the source gets `options.source`, each branch
/// point samples from its zone's base vector restricted to its parent branch
/// point's subsets, and every other bus copies its nearest upstream branch
/// point. `base[z - 1]` is the vector for zone `z`.
///
/// Returns the allocation and the number of branch points that hit the
/// uniform fallback.
pub fn allocate(
    feeder: &Feeder,
    base: &[[f64; CONFIG_COUNT]],
    options: &AllocationOptions,
    rng: &mut Rng,
) -> Result<(PhaseAllocation, usize)> {
    let zones = &feeder.zones;
    if base.len() != zones.zone_count {
        return Err(Error::ZoneMismatch {
            model: base.len(),
            topology: zones.zone_count,
        });
    }
    let n = feeder.topology.bus_count();
    let h = &feeder.hierarchy;
    let src = feeder.topology.source();
    let mut configs = vec![options.source; n];
    let mut fallbacks = 0;
    for &r in &h.ramification {
        if r == src {
            continue;
        }
        let parent = configs[h.parent[r].expect("branch point without parent")];
        let c = constrain(&base[zones.bus_zone[r] - 1], parent, &options.prohibited);
        if c.fallback {
            fallbacks += 1;
        }
        let k = Categorical::new(&c.probs)?.sample(rng);
        configs[r] = PhaseConfig::ALL[k];
    }
    for v in 0..n {
        if !h.is_ramification(v) {
            configs[v] = configs[h.governing(v)];
        }
    }
    if fallbacks > 0 {
        log::warn!("{fallbacks} branch point(s) had no allowed probability mass; used uniform fallback");
    }
    Ok((PhaseAllocation { configs }, fallbacks))
}

/// One posterior draw: per-zone concentration rows and the matching base
/// probability vectors drawn from `Dirichlet(A_z + n_z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDraw {
    pub concentration: Vec<[f64; CONFIG_COUNT]>,
    pub base: Vec<[f64; CONFIG_COUNT]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePosterior {
    pub zone_count: usize,
    /// Observed configuration counts per zone.
    pub counts: Vec<[u64; CONFIG_COUNT]>,
    pub draws: Vec<PhaseDraw>,
    pub diagnostics: Diagnostics,
    pub warnings: Vec<String>,
}

/// Interval summary of one zone's probability for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSummary {
    pub zone: usize,
    pub config: PhaseConfig,
    pub observed: f64,
    pub mean: f64,
    pub hdi: (f64, f64),
}

impl PhasePosterior {
    pub fn base_column(&self, zone: usize, config: PhaseConfig) -> Vec<f64> {
        self.draws.iter().map(|d| d.base[zone - 1][config.index()]).collect()
    }

    pub fn mean_base(&self, zone: usize) -> [f64; CONFIG_COUNT] {
        let mut m = [0.0; CONFIG_COUNT];
        for d in &self.draws {
            for (acc, v) in m.iter_mut().zip(&d.base[zone - 1]) {
                *acc += v;
            }
        }
        m.map(|v| v / self.draws.len() as f64)
    }

    pub fn summary(&self, mass: f64) -> Result<Vec<ConfigSummary>> {
        let mut out = Vec::new();
        for z in 1..=self.zone_count {
            let total: u64 = self.counts[z - 1].iter().sum();
            let mean = self.mean_base(z);
            for c in PhaseConfig::ALL {
                out.push(ConfigSummary {
                    zone: z,
                    config: c,
                    observed: if total > 0 {
                        self.counts[z - 1][c.index()] as f64 / total as f64
                    } else {
                        f64::NAN
                    },
                    mean: mean[c.index()],
                    hdi: hdi(&self.base_column(z, c), mass)?,
                });
            }
        }
        Ok(out)
    }
}

/// Log marginal probability of a sequence with the given category counts
/// under a Dirichlet(`alpha`) prior on the category probabilities.
pub fn dirichlet_categorical_ln(alpha: &[f64], counts: &[u64]) -> f64 {
    let a0: f64 = alpha.iter().sum();
    let n: u64 = counts.iter().sum();
    let mut lp = ln_gamma(a0) - ln_gamma(a0 + n as f64);
    for (&a, &c) in alpha.iter().zip(counts) {
        if c > 0 {
            lp += ln_gamma(a + c as f64) - ln_gamma(a);
        }
    }
    lp
}

/// Fit the per-zone concentration matrix to observed configurations.
/// `observed[bus]` is `None` for buses without a recorded configuration.
pub fn fit_phase_model(
    observed: &[Option<PhaseConfig>],
    zones: &ZoneAssignment,
    config: &FitConfig,
) -> Result<PhasePosterior> {
    if observed.len() != zones.bus_zone.len() {
        return Err(Error::Data(format!(
            "{} phase observations for {} buses",
            observed.len(),
            zones.bus_zone.len()
        )));
    }
    let z_count = zones.zone_count;
    let mut counts = vec![[0u64; CONFIG_COUNT]; z_count];
    for (bus, obs) in observed.iter().enumerate() {
        if let Some(c) = obs {
            counts[zones.bus_zone[bus] - 1][c.index()] += 1;
        }
    }
    fit_phase_counts(counts, config)
}

/// Fit directly from per-zone configuration counts.
pub fn fit_phase_counts(counts: Vec<[u64; CONFIG_COUNT]>, config: &FitConfig) -> Result<PhasePosterior> {
    let z_count = counts.len();
    if counts.iter().flatten().all(|&c| c == 0) {
        return Err(Error::Data("no observed phase configurations".into()));
    }
    let mut warnings = Vec::new();
    for (z, row) in counts.iter().enumerate() {
        if row.iter().all(|&c| c == 0) {
            warnings.push(format!("zone {} has no phase observations; posterior equals the prior", z + 1));
        }
    }

    let mut space = ParamSpace::new();
    let ids: Vec<_> = (0..z_count)
        .map(|z| space.add(&format!("A[{}]", z + 1), Support::Positive, CONFIG_COUNT))
        .collect();
    let prior = HalfNormal::new(1.0)?;
    let target = |p: &Params| {
        let mut lp = 0.0;
        for (z, id) in ids.iter().enumerate() {
            let a = p.get(*id);
            lp += a.iter().map(|&v| prior.ln_pdf(v)).sum::<f64>();
            lp += dirichlet_categorical_ln(a, &counts[z]);
        }
        lp
    };
    let init = vec![0.8; space.dim()];
    let ensemble = fit(&space, &target, &init, config)?;

    let mut rng = Rng::substream(config.seed, 0, "phase-base");
    let mut draws = Vec::with_capacity(ensemble.len());
    for i in 0..ensemble.len() {
        let p = ensemble.draw(i);
        let mut concentration = Vec::with_capacity(z_count);
        let mut base = Vec::with_capacity(z_count);
        for (z, id) in ids.iter().enumerate() {
            let a: [f64; CONFIG_COUNT] = p.get(*id).try_into().expect("row width");
            let post: Vec<f64> = a.iter().zip(&counts[z]).map(|(a, &n)| a + n as f64).collect();
            let c = Dirichlet::new(post)?.sample(&mut rng);
            concentration.push(a);
            base.push(c.try_into().expect("row width"));
        }
        draws.push(PhaseDraw { concentration, base });
    }
    warnings.extend(ensemble.diagnostics.warnings.iter().cloned());
    Ok(PhasePosterior {
        zone_count: z_count,
        counts,
        draws,
        diagnostics: ensemble.diagnostics,
        warnings,
    })
}
