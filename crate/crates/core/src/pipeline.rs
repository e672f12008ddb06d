//! File-based fit, generate, validate and export steps driven by a
//! [`RunConfig`].

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::config::RunConfig;
use crate::data::{write_atomic, TrainingData};
use crate::error::{Error, Result};
use crate::model::{fit_model, FittedModel};
use crate::opendss;
use crate::sample::{generate_sample, SyntheticSample};
use crate::topology::{Feeder, NetworkTopology};
use crate::validate::{validate_samples, voltage_csv, ValidationReport};

pub fn load_feeder(config: &RunConfig) -> Result<Feeder> {
    let topology = NetworkTopology::load(&config.paths.topology)?;
    Feeder::analyze(topology, config.zones, config.distance_metric)
}

pub fn fit(config: &RunConfig) -> Result<FittedModel> {
    config.validate()?;
    let feeder = load_feeder(config)?;
    let p = &config.paths;
    let data = TrainingData::load(&feeder.topology, &p.buses, &p.lines, p.reliability.as_deref())?;
    let model = fit_model(
        &feeder,
        &data,
        config.distance_metric,
        &config.priors,
        &config.fit.clone().with_seed(config.seed),
    )?;
    for w in &model.warnings {
        log::warn!("{w}");
    }
    model.save(&p.model)?;
    write_atomic(&diagnostics_path(&p.model), model.diagnostics_report().as_bytes())?;
    Ok(model)
}

/// `model.json` -> `model.diagnostics.txt`.
pub fn diagnostics_path(model: &Path) -> PathBuf {
    model.with_extension("diagnostics.txt")
}

pub fn sample_path(dir: &Path, id: u64) -> PathBuf {
    dir.join(format!("sample_{id:05}.json"))
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub path: PathBuf,
    /// Wall time spent building the sample, excluding the file write.
    pub elapsed: Duration,
}

/// Generate `config.samples` samples from the saved model and write one JSON
/// file each.
pub fn generate(config: &RunConfig) -> Result<Vec<Generated>> {
    config.validate()?;
    let feeder = load_feeder(config)?;
    let model = FittedModel::load(&config.paths.model)?;
    model.check_compatible(&feeder)?;
    let ids: Vec<u64> = (0..config.samples as u64).collect();
    let one = |id: &u64| -> Result<Generated> {
        let start = Instant::now();
        let s = generate_sample(&model, &feeder, &config.generate, config.seed, *id)?;
        let elapsed = start.elapsed();
        let path = sample_path(&config.paths.samples, *id);
        write_atomic(&path, s.to_json()?.as_bytes())?;
        Ok(Generated { path, elapsed })
    };
    #[cfg(feature = "parallel")]
    let out = {
        use rayon::prelude::*;
        ids.par_iter().map(one).collect::<Result<Vec<_>>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let out = ids.iter().map(one).collect::<Result<Vec<_>>>()?;
    Ok(out)
}

/// All sample files in `dir`, in file-name order.
pub fn load_samples(dir: &Path) -> Result<Vec<SyntheticSample>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::Config(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|x| x == "json")
                && p.file_name().is_some_and(|n| n.to_string_lossy().starts_with("sample_"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Config(format!("no sample files in {}", dir.display())));
    }
    files.iter().map(|f| SyntheticSample::load(f)).collect()
}

/// Validate every sample and write `report.json`, `report.txt`,
/// `samples.csv` and, if enabled, one voltage table per sample.
pub fn validate(config: &RunConfig) -> Result<ValidationReport> {
    config.validate()?;
    let feeder = load_feeder(config)?;
    let samples = load_samples(&config.paths.samples)?;
    let model = if config.paths.model.exists() {
        Some(FittedModel::load(&config.paths.model)?)
    } else {
        log::warn!("no fitted model at {}; skipping the phase frequency table", config.paths.model.display());
        None
    };
    let (report, results) = validate_samples(&feeder, &samples, model.as_ref(), &config.powerflow, &config.limits)?;
    let dir = &config.paths.report;
    write_atomic(&dir.join("report.json"), (serde_json::to_string_pretty(&report)? + "\n").as_bytes())?;
    write_atomic(&dir.join("report.txt"), report.to_text().as_bytes())?;
    write_atomic(&dir.join("samples.csv"), report.samples_csv()?.as_bytes())?;
    if config.voltage_tables {
        for (s, r) in samples.iter().zip(&results).filter_map(|(s, r)| Some((s, r.as_ref()?))) {
            let path = dir.join("voltages").join(format!("sample_{:05}.csv", s.sample_id));
            write_atomic(&path, voltage_csv(s, r).as_bytes())?;
        }
    }
    Ok(report)
}

/// Write one OpenDSS script per sample.
pub fn export_opendss(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let feeder = load_feeder(config)?;
    let samples = load_samples(&config.paths.samples)?;
    let mut out = Vec::new();
    for s in &samples {
        let path = config.paths.opendss.join(format!("sample_{:05}.dss", s.sample_id));
        write_atomic(&path, opendss::export(s, &feeder, config.powerflow.base_kv)?.as_bytes())?;
        out.push(path);
    }
    Ok(out)
}
