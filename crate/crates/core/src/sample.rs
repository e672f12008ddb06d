//! Synthetic network samples and their generation from a fitted model.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::carson::LineConstruction;
use crate::error::{Error, Result};
use crate::kernel::Rng;
use crate::line::{sample_line, LineParams};
use crate::load::{sample_demand, sample_power_factor, BusDemand};
use crate::model::FittedModel;
use crate::phase::{allocate, AllocationOptions, PhaseAllocation, PhaseConfig};
use crate::powerflow::{solve, PowerFlowOptions, PowerFlowResult};
use crate::reliability::{sample_caidi, sample_caifi, BusReliability};
use crate::topology::Feeder;

pub const SAMPLE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator: String,
    pub model_version: String,
    pub seed: u64,
    pub draw_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBus {
    pub id: String,
    pub zone: usize,
    pub phases: PhaseConfig,
    pub no_load: bool,
    pub demand: BusDemand,
    pub reliability: Option<BusReliability>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleLine {
    pub id: String,
    /// Upstream end.
    pub from: String,
    /// Downstream end.
    pub to: String,
    pub length_km: f64,
    pub zone: usize,
    pub params: LineParams,
}

/// One complete synthetic network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSample {
    pub schema_version: u32,
    pub sample_id: u64,
    pub provenance: Provenance,
    pub power_factor: f64,
    pub buses: Vec<SampleBus>,
    pub lines: Vec<SampleLine>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerateOptions {
    pub allocation: AllocationOptions,
    pub construction: LineConstruction,
}

/// Generate sample `sample_id`. All sub-models use the same uniformly chosen
/// posterior draw. The stream depends only on `(seed, sample_id)`, so samples
/// can be produced in any order or in parallel.
pub fn generate_sample(
    model: &FittedModel,
    feeder: &Feeder,
    options: &GenerateOptions,
    seed: u64,
    sample_id: u64,
) -> Result<SyntheticSample> {
    model.check_compatible(feeder)?;
    let mut rng = Rng::substream(seed, sample_id, "sample");
    let draw_index = rng.below(model.draw_count());
    let t = &feeder.topology;
    let zones = &feeder.zones;

    let (allocation, _) = allocate(feeder, &model.phase.draws[draw_index].base, &options.allocation, &mut rng)?;

    let load = &model.load.draws[draw_index];
    let pf = sample_power_factor(&mut rng);
    let mut demands = Vec::with_capacity(t.bus_count());
    for (b, bus) in t.buses().iter().enumerate() {
        demands.push(if bus.no_load {
            BusDemand::zero(pf)
        } else {
            sample_demand(load, allocation.config(b), pf, &mut rng)?
        });
    }

    let mut reliability = vec![None; t.bus_count()];
    if let (Some(caidi), Some(caifi)) = (&model.caidi, &model.caifi) {
        let (cd, fd) = (&caidi.draws[draw_index], &caifi.draws[draw_index]);
        for (b, slot) in reliability.iter_mut().enumerate() {
            let z = zones.bus_zone[b];
            *slot = Some(BusReliability {
                caidi_hours: sample_caidi(cd, z, &mut rng)?,
                caifi_per_year: sample_caifi(fd, z, &mut rng)?,
            });
        }
    }

    let (rd, xd) = (&model.lines.resistance[draw_index], &model.lines.ratio[draw_index]);
    let mut lines = Vec::with_capacity(t.line_count());
    for (l, line) in t.lines().iter().enumerate() {
        let up = feeder.line_upstream(l);
        let down = feeder.line_downstream(l);
        let z = zones.line_zone[l];
        let params = sample_line(rd, xd, z, allocation.config(down), &options.construction, &mut rng)?;
        lines.push(SampleLine {
            id: line.id.clone(),
            from: t.buses()[up].id.clone(),
            to: t.buses()[down].id.clone(),
            length_km: line.length_km,
            zone: z,
            params,
        });
    }

    let buses = t
        .buses()
        .iter()
        .enumerate()
        .map(|(b, bus)| SampleBus {
            id: bus.id.clone(),
            zone: zones.bus_zone[b],
            phases: allocation.config(b),
            no_load: bus.no_load,
            demand: demands[b],
            reliability: reliability[b],
        })
        .collect();

    Ok(SyntheticSample {
        schema_version: SAMPLE_SCHEMA_VERSION,
        sample_id,
        provenance: Provenance {
            generator: format!("gridsynth {}", env!("CARGO_PKG_VERSION")),
            model_version: model.model_version.clone(),
            seed,
            draw_index,
        },
        power_factor: pf,
        buses,
        lines,
    })
}

impl SyntheticSample {
    pub fn load(path: &Path) -> Result<Self> {
        let s: Self = serde_json::from_slice(&std::fs::read(path)?)?;
        if s.schema_version != SAMPLE_SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "{}: sample schema version {} (expected {SAMPLE_SCHEMA_VERSION})",
                path.display(),
                s.schema_version
            )));
        }
        Ok(s)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn allocation(&self) -> PhaseAllocation {
        PhaseAllocation {
            configs: self.buses.iter().map(|b| b.phases).collect(),
        }
    }

    /// Check that the sample covers every bus and line of `feeder` exactly
    /// once, in topology order, and that demand sparsity and line phases match
    /// the allocation.
    pub fn audit(&self, feeder: &Feeder) -> Result<()> {
        let t = &feeder.topology;
        if self.buses.len() != t.bus_count() || self.lines.len() != t.line_count() {
            return Err(Error::IncompleteSample(format!(
                "sample {} has {} buses / {} lines, topology has {} / {}",
                self.sample_id,
                self.buses.len(),
                self.lines.len(),
                t.bus_count(),
                t.line_count()
            )));
        }
        for (b, (sb, tb)) in self.buses.iter().zip(t.buses()).enumerate() {
            if sb.id != tb.id {
                return Err(Error::IncompleteSample(format!("bus {b} is {:?}, expected {:?}", sb.id, tb.id)));
            }
            let active = sb.phases.phases();
            for p in 0..3 {
                if !active[p] && (sb.demand.p_kw[p] != 0.0 || sb.demand.q_kvar[p] != 0.0) {
                    return Err(Error::IncompleteSample(format!(
                        "bus {:?} has demand on a phase outside {}",
                        sb.id, sb.phases
                    )));
                }
            }
        }
        for (l, (sl, tl)) in self.lines.iter().zip(t.lines()).enumerate() {
            if sl.id != tl.id {
                return Err(Error::IncompleteSample(format!("line {l} is {:?}, expected {:?}", sl.id, tl.id)));
            }
            let down = feeder.line_downstream(l);
            if sl.params.phases != self.buses[down].phases {
                return Err(Error::IncompleteSample(format!(
                    "line {:?} carries {} but feeds a {} bus",
                    sl.id, sl.params.phases, self.buses[down].phases
                )));
            }
        }
        Ok(())
    }

    /// Solve the sample's power flow on `feeder`.
    pub fn power_flow(&self, feeder: &Feeder, options: &PowerFlowOptions) -> Result<PowerFlowResult> {
        self.audit(feeder)?;
        let phases: Vec<PhaseConfig> = self.buses.iter().map(|b| b.phases).collect();
        let loads: Vec<BusDemand> = self.buses.iter().map(|b| b.demand).collect();
        let lines: Vec<LineParams> = self.lines.iter().map(|l| l.params.clone()).collect();
        solve(feeder, &phases, &loads, &lines, options)
    }
}
