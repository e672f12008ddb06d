//! Run configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::FitConfig;
use crate::model::Priors;
use crate::powerflow::PowerFlowOptions;
use crate::sample::GenerateOptions;
use crate::topology::DistanceMetric;

/// Input and output locations. Relative paths resolve against the directory
/// holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    pub topology: PathBuf,
    pub buses: PathBuf,
    pub lines: PathBuf,
    /// Optional; reliability is not modelled without it.
    pub reliability: Option<PathBuf>,
    pub model: PathBuf,
    pub samples: PathBuf,
    pub report: PathBuf,
    pub opendss: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            topology: "topology.json".into(),
            buses: "buses.csv".into(),
            lines: "lines.csv".into(),
            reliability: None,
            model: "model.json".into(),
            samples: "samples".into(),
            report: "report".into(),
            opendss: "opendss".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Limits {
    pub vmin_pu: f64,
    pub vmax_pu: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            vmin_pu: 0.9,
            vmax_pu: 1.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub zones: usize,
    pub samples: usize,
    pub distance_metric: DistanceMetric,
    pub fit: FitConfig,
    pub priors: Priors,
    pub generate: GenerateOptions,
    pub powerflow: PowerFlowOptions,
    pub limits: Limits,
    /// Also write per-sample voltage magnitudes during validation.
    pub voltage_tables: bool,
    pub paths: Paths,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            zones: 4,
            samples: 20,
            distance_metric: DistanceMetric::Kilometers,
            fit: FitConfig::default(),
            priors: Priors::default(),
            generate: GenerateOptions::default(),
            powerflow: PowerFlowOptions::default(),
            limits: Limits::default(),
            voltage_tables: true,
            paths: Paths::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Read `path` and resolve relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut c = Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        c.resolve(path.parent().unwrap_or(Path::new("")));
        Ok(c)
    }

    pub fn resolve(&mut self, base: &Path) {
        let p = &mut self.paths;
        for path in [
            &mut p.topology,
            &mut p.buses,
            &mut p.lines,
            &mut p.model,
            &mut p.samples,
            &mut p.report,
            &mut p.opendss,
        ] {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        if let Some(r) = p.reliability.as_mut().filter(|r| r.is_relative()) {
            *r = base.join(&*r);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.zones == 0 {
            return Err(Error::Config("zones must be >= 1".into()));
        }
        self.fit.validate()?;
        self.powerflow.validate()?;
        self.generate.construction.validate().map_err(|e| Error::Config(e.to_string()))?;
        let l = &self.limits;
        if !(l.vmin_pu > 0.0 && l.vmin_pu < l.vmax_pu) {
            return Err(Error::Config(format!(
                "voltage limits must satisfy 0 < vmin < vmax, got {} and {}",
                l.vmin_pu, l.vmax_pu
            )));
        }
        let pr = &self.priors;
        let positive = [
            pr.load.hyper_shape,
            pr.load.hyper_rate,
            pr.load.sigma_scale.unwrap_or(1.0),
            pr.reliability.weibull_shape_scale,
            pr.reliability.weibull_scale_scale,
            pr.reliability.frequency_mean_scale,
            pr.reliability.dispersion_scale,
            pr.line.weight_concentration,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Config("prior parameters must be finite and > 0".into()));
        }
        if self.generate.allocation.prohibited.contains(&self.generate.allocation.source) {
            return Err(Error::Config(format!(
                "source configuration {} is prohibited",
                self.generate.allocation.source
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::PhaseConfig;

    #[test]
    fn round_trip() {
        let mut c = RunConfig::default();
        c.generate.allocation.prohibited = vec![PhaseConfig::CA];
        c.paths.reliability = Some("rel.csv".into());
        c.priors.load.sigma_scale = Some(2.0);
        let back = RunConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_files_use_defaults() {
        let c = RunConfig::from_toml("seed = 9\n[fit]\nchains = 2\n").unwrap();
        assert_eq!((c.seed, c.fit.chains, c.fit.warmup), (9, 2, 2000));
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::from_toml("zones = 0").is_err());
        assert!(RunConfig::from_toml("[limits]\nvmin_pu = 1.2").is_err());
        assert!(RunConfig::from_toml("typo = 1").is_err());
        assert!(RunConfig::from_toml("[fit]\nthin = 0").is_err());
        assert!(RunConfig::from_toml("[generate.allocation]\nprohibited = [\"ABC\"]").is_err());
    }

    #[test]
    fn resolves_relative_paths() {
        let mut c = RunConfig::default();
        c.paths.model = "/abs/model.json".into();
        c.paths.reliability = Some("reliability.csv".into());
        c.resolve(Path::new("/data"));
        assert_eq!(c.paths.topology, Path::new("/data/topology.json"));
        assert_eq!(c.paths.model, Path::new("/abs/model.json"));
        assert_eq!(c.paths.reliability.as_deref(), Some(Path::new("/data/reliability.csv")));
    }
}
