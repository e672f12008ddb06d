//! The full fitted model: every posterior, with versioned JSON persistence.

use std::fmt::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{write_atomic, TrainingData};
use crate::error::{Error, Result};
use crate::inference::{Diagnostics, FitConfig};
use crate::line::{fit_line_model, LinePosterior, LinePriors};
use crate::load::{fit_load_model, LoadObservation, LoadPosterior, LoadPriors};
use crate::phase::{fit_phase_model, PhasePosterior};
use crate::reliability::{fit_caidi, fit_caifi, CaidiPosterior, CaifiPosterior, ReliabilityPriors};
use crate::topology::{DistanceMetric, Feeder};

pub const MODEL_FORMAT: &str = "gridsynth-fitted-model";
pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Priors {
    pub load: LoadPriors,
    pub reliability: ReliabilityPriors,
    pub line: LinePriors,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub format: String,
    pub schema_version: u32,
    /// Version of the crate that produced the file.
    pub model_version: String,
    pub zone_count: usize,
    pub distance_metric: DistanceMetric,
    /// Zone edges of the reference feeder, for information.
    pub zone_edges: Vec<f64>,
    pub fit: FitConfig,
    pub priors: Priors,
    pub phase: PhasePosterior,
    pub load: LoadPosterior,
    pub caidi: Option<CaidiPosterior>,
    pub caifi: Option<CaifiPosterior>,
    pub lines: LinePosterior,
    pub warnings: Vec<String>,
}

// Each sub-model gets its own seed so their chains never share a stream.
fn sub_config(config: &FitConfig, k: u64) -> FitConfig {
    config
        .clone()
        .with_seed(config.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(k))
}

/// Fit every sub-model on the reference feeder. Reliability is skipped, with
/// a warning, when the data has no reliability table.
pub fn fit_model(
    feeder: &Feeder,
    data: &TrainingData,
    metric: DistanceMetric,
    priors: &Priors,
    config: &FitConfig,
) -> Result<FittedModel> {
    config.validate()?;
    let zones = &feeder.zones;
    let z_count = zones.zone_count;
    let mut warnings: Vec<String> = zones.warnings.clone();

    log::info!("fitting phase model");
    let phase = fit_phase_model(&data.phases, zones, &sub_config(config, 1))?;

    log::info!("fitting load model");
    let mut obs = Vec::with_capacity(data.loads.len());
    for row in &data.loads {
        let config = data.phases[row.bus].ok_or_else(|| {
            Error::Data(format!("bus {:?} has demand but no phase", feeder.topology.buses()[row.bus].id))
        })?;
        obs.push(LoadObservation { config, p_kw: row.p_kw });
    }
    let load = fit_load_model(&obs, &priors.load, &sub_config(config, 2))?;

    let (caidi, caifi) = match &data.reliability {
        Some(rows) => {
            log::info!("fitting reliability model");
            let (mut dz, mut dv, mut fz, mut fv) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            for r in rows {
                let z = zones.bus_zone[r.bus];
                if let Some(h) = r.caidi_hours {
                    dz.push(z);
                    dv.push(h);
                }
                if let Some(c) = r.caifi_count {
                    fz.push(z);
                    fv.push(c);
                }
            }
            let d = fit_caidi(&dz, &dv, z_count, &priors.reliability, &sub_config(config, 3))?;
            let f = fit_caifi(&fz, &fv, z_count, &priors.reliability, &sub_config(config, 4))?;
            (Some(d), Some(f))
        }
        None => {
            warnings.push("no reliability table; samples carry no CAIDI/CAIFI values".into());
            (None, None)
        }
    };

    log::info!("fitting line model");
    let lz: Vec<usize> = data.lines.iter().map(|r| zones.line_zone[r.line]).collect();
    let r1: Vec<f64> = data.lines.iter().map(|r| r.r1_ohm_per_km).collect();
    let ratio: Vec<f64> = data.lines.iter().map(|r| r.x1_ohm_per_km / r.r1_ohm_per_km).collect();
    let lines = fit_line_model(&lz, &r1, &ratio, z_count, &priors.line, &sub_config(config, 5))?;

    for w in phase
        .warnings
        .iter()
        .chain(&load.warnings)
        .chain(caidi.iter().flat_map(|c| &c.warnings))
        .chain(caifi.iter().flat_map(|c| &c.warnings))
        .chain(&lines.warnings)
    {
        warnings.push(w.clone());
    }
    warnings.dedup();

    Ok(FittedModel {
        format: MODEL_FORMAT.into(),
        schema_version: MODEL_SCHEMA_VERSION,
        model_version: env!("CARGO_PKG_VERSION").into(),
        zone_count: z_count,
        distance_metric: metric,
        zone_edges: zones.edges.clone(),
        fit: config.clone(),
        priors: priors.clone(),
        phase,
        load,
        caidi,
        caifi,
        lines,
        warnings,
    })
}

impl FittedModel {
    /// Number of joint posterior draws available to generation.
    pub fn draw_count(&self) -> usize {
        let mut n = self.phase.draws.len().min(self.load.draws.len());
        n = n.min(self.lines.resistance.len()).min(self.lines.ratio.len());
        if let Some(c) = &self.caidi {
            n = n.min(c.draws.len());
        }
        if let Some(c) = &self.caifi {
            n = n.min(c.draws.len());
        }
        n
    }

    pub fn check_compatible(&self, feeder: &Feeder) -> Result<()> {
        if self.zone_count != feeder.zones.zone_count {
            return Err(Error::ZoneMismatch {
                model: self.zone_count,
                topology: feeder.zones.zone_count,
            });
        }
        if self.draw_count() == 0 {
            return Err(Error::Format("fitted model holds no posterior draws".into()));
        }
        Ok(())
    }

    /// Plain-text convergence summary of every sub-model.
    pub fn diagnostics_report(&self) -> String {
        let mut parts: Vec<(&str, &Diagnostics)> = vec![("phase", &self.phase.diagnostics), ("load", &self.load.diagnostics)];
        if let Some(c) = &self.caidi {
            parts.push(("caidi", &c.diagnostics));
        }
        if let Some(c) = &self.caifi {
            parts.push(("caifi", &c.diagnostics));
        }
        parts.push(("line resistance", &self.lines.resistance_diagnostics));
        parts.push(("line x/r ratio", &self.lines.ratio_diagnostics));

        let mut s = String::new();
        let _ = writeln!(s, "posterior draws: {}", self.draw_count());
        let _ = writeln!(s, "{:<16} {:>8} {:>9}  acceptance", "sub-model", "max R-hat", "min ESS");
        for (name, d) in parts {
            let acc: Vec<String> = d.acceptance.iter().map(|(g, a)| format!("{g}={a:.2}")).collect();
            let _ = writeln!(s, "{name:<16} {:>8.3} {:>9.0}  {}", d.max_rhat(), d.min_ess(), acc.join(" "));
        }
        if self.caidi.is_none() {
            let _ = writeln!(s, "reliability: absent");
        }
        if !self.warnings.is_empty() {
            let _ = writeln!(s, "\nwarnings:");
            for w in &self.warnings {
                let _ = writeln!(s, "  {w}");
            }
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)? + "\n")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let head: serde_json::Value = serde_json::from_slice(&bytes)?;
        let format = head.get("format").and_then(|v| v.as_str());
        if format != Some(MODEL_FORMAT) {
            return Err(Error::Format(format!("{} is not a fitted model file", path.display())));
        }
        let version = head.get("schema_version").and_then(|v| v.as_u64());
        if version != Some(MODEL_SCHEMA_VERSION as u64) {
            return Err(Error::Format(format!(
                "{}: model schema version {version:?}, this build reads {MODEL_SCHEMA_VERSION}",
                path.display()
            )));
        }
        Ok(serde_json::from_value(head)?)
    }
}
