//! A self-contained demonstration feeder with known ground truth.
//!
//! The reference attribute tables are themselves drawn from a one-draw
//! "truth" model, so fitted posteriors can be compared with the values that
//! generated the data.

use std::fmt::Write;
use std::path::Path;

use crate::config::RunConfig;
use crate::data::write_atomic;
use crate::error::Result;
use crate::inference::{Diagnostics, FitConfig};
use crate::line::{LinePosterior, MixtureDraw};
use crate::load::{LoadDraw, LoadPosterior};
use crate::model::{FittedModel, Priors, MODEL_FORMAT, MODEL_SCHEMA_VERSION};
use crate::phase::{PhaseDraw, PhasePosterior};
use crate::reliability::{CaidiDraw, CaidiPosterior, CaifiDraw, CaifiPosterior};
use crate::sample::{generate_sample, GenerateOptions, SyntheticSample};
use crate::topology::{Bus, DistanceMetric, Feeder, LineRecord, NetworkTopology};

pub const DEMO_ZONES: usize = 4;
pub const SOURCE: &str = "src";
const TRUNK: usize = 42;

/// Deterministic radial feeder: a 42-bus trunk with laterals at every third
/// trunk bus and sub-laterals on every other lateral. 127 buses in total.
pub fn topology() -> NetworkTopology {
    let mut buses = vec![Bus {
        no_load: true,
        ..Bus::at(SOURCE, 0.0, 0.0)
    }];
    let mut lines = Vec::new();
    let link = |lines: &mut Vec<LineRecord>, from: &str, to: &str, km: f64| {
        lines.push(LineRecord {
            id: format!("L{}", lines.len() + 1),
            from: from.into(),
            to: to.into(),
            length_km: km,
        });
    };

    let mut prev = SOURCE.to_string();
    for k in 1..=TRUNK {
        let id = format!("t{k}");
        let x = 0.2 * k as f64;
        buses.push(Bus {
            no_load: k % 10 == 0,
            ..Bus::at(&id, x, 0.0)
        });
        link(&mut lines, &prev, &id, 0.2);
        if k % 3 == 0 {
            let side = if k % 2 == 0 { 1.0 } else { -1.0 };
            let len = 3 + (k * 7) % 6;
            let mut up = id.clone();
            for j in 1..=len {
                let lid = format!("t{k}_{j}");
                buses.push(Bus::at(&lid, x, side * 0.12 * j as f64));
                link(&mut lines, &up, &lid, 0.12);
                if j == 2 && k % 6 == 0 {
                    let mut sup = lid.clone();
                    for m in 1..=3 {
                        let sid = format!("t{k}_{j}_{m}");
                        buses.push(Bus::at(&sid, x + 0.1 * m as f64, side * 0.24));
                        link(&mut lines, &sup, &sid, 0.1);
                        sup = sid;
                    }
                }
                up = lid;
            }
        }
        prev = id;
    }
    NetworkTopology::new(buses, lines, SOURCE).expect("demo topology is valid")
}

/// Single-draw model holding the ground-truth parameters.
pub fn truth_model() -> FittedModel {
    let base = vec![
        [0.02, 0.02, 0.02, 0.02, 0.02, 0.02, 0.88],
        [0.05, 0.05, 0.05, 0.05, 0.05, 0.05, 0.70],
        [0.10, 0.10, 0.10, 0.07, 0.07, 0.06, 0.50],
        [0.20, 0.20, 0.20, 0.10, 0.10, 0.10, 0.10],
    ];
    let load = LoadDraw {
        alpha_hp: 2.0,
        beta_hp: 0.5,
        alpha: [2.0; 3],
        beta: [0.4, 0.17, 0.07],
        p_pot: [5.0, 12.0, 30.0],
        delta_bi: 0.55,
        delta_tri: [0.30, 0.33, 0.37],
        sigma_p: 1.5,
    };
    let caidi = CaidiDraw {
        p: vec![0.5, 0.6, 0.7, 0.8],
        shape: vec![1.5, 1.2, 1.0, 0.8],
        scale: vec![1.5, 2.0, 3.0, 4.0],
    };
    let caifi = CaifiDraw {
        mu: vec![0.8, 1.0, 1.3, 1.6],
        dispersion: 2.0,
    };
    let resistance = MixtureDraw {
        means: [0.15, 0.4, 1.0],
        cv: 0.1,
        weights: vec![[0.7, 0.2, 0.1], [0.5, 0.3, 0.2], [0.3, 0.4, 0.3], [0.2, 0.4, 0.4]],
    };
    let ratio = MixtureDraw {
        means: [0.5, 1.2, 2.5],
        cv: 0.1,
        weights: vec![[0.2, 0.3, 0.5], [0.3, 0.4, 0.3], [0.4, 0.4, 0.2], [0.5, 0.3, 0.2]],
    };
    let z = DEMO_ZONES;
    FittedModel {
        format: MODEL_FORMAT.into(),
        schema_version: MODEL_SCHEMA_VERSION,
        model_version: format!("{} (demo truth)", env!("CARGO_PKG_VERSION")),
        zone_count: z,
        distance_metric: DistanceMetric::Kilometers,
        zone_edges: Vec::new(),
        fit: FitConfig::default(),
        priors: Priors::default(),
        phase: PhasePosterior {
            zone_count: z,
            counts: vec![[0; 7]; z],
            draws: vec![PhaseDraw {
                concentration: base.clone(),
                base,
            }],
            diagnostics: Diagnostics::default(),
            warnings: Vec::new(),
        },
        load: LoadPosterior {
            draws: vec![load],
            diagnostics: Diagnostics::default(),
            warnings: Vec::new(),
            observed_mean_total_kw: f64::NAN,
        },
        caidi: Some(CaidiPosterior {
            zone_count: z,
            draws: vec![caidi],
            diagnostics: Diagnostics::default(),
            warnings: Vec::new(),
        }),
        caifi: Some(CaifiPosterior {
            zone_count: z,
            draws: vec![caifi],
            diagnostics: Diagnostics::default(),
            warnings: Vec::new(),
        }),
        lines: LinePosterior {
            zone_count: z,
            resistance: vec![resistance],
            ratio: vec![ratio],
            zone_sizes: vec![1; z],
            resistance_diagnostics: Diagnostics::default(),
            ratio_diagnostics: Diagnostics::default(),
            warnings: Vec::new(),
        },
        warnings: Vec::new(),
    }
}

pub fn feeder() -> Result<Feeder> {
    Feeder::analyze(topology(), DEMO_ZONES, DistanceMetric::Kilometers)
}

/// The reference network drawn from the truth model.
pub fn reference_sample(seed: u64) -> Result<SyntheticSample> {
    generate_sample(&truth_model(), &feeder()?, &GenerateOptions::default(), seed, 0)
}

pub struct DemoTables {
    pub buses: String,
    pub reliability: String,
    pub lines: String,
}

pub fn tables(sample: &SyntheticSample) -> DemoTables {
    let mut buses = String::from("bus_id,phase,p_a_kw,p_b_kw,p_c_kw\n");
    let mut reliability = String::from("bus_id,caidi_hours,caifi_count\n");
    for b in &sample.buses {
        if b.no_load {
            let _ = writeln!(buses, "{},{},,,", b.id, b.phases);
        } else {
            let p = b.demand.p_kw;
            let _ = writeln!(buses, "{},{},{:.4},{:.4},{:.4}", b.id, b.phases, p[0], p[1], p[2]);
        }
        if let Some(r) = b.reliability {
            let _ = writeln!(reliability, "{},{:.4},{}", b.id, r.caidi_hours, r.caifi_per_year);
        }
    }
    let mut lines = String::from("line_id,r1_ohm_per_km,x1_ohm_per_km\n");
    for l in &sample.lines {
        let _ = writeln!(lines, "{},{:.6},{:.6}", l.id, l.params.r1_ohm_per_km, l.params.x1_ohm_per_km);
    }
    DemoTables {
        buses,
        reliability,
        lines,
    }
}

pub fn config(seed: u64) -> RunConfig {
    let mut c = RunConfig {
        seed,
        zones: DEMO_ZONES,
        ..RunConfig::default()
    };
    c.paths.reliability = Some("reliability.csv".into());
    c
}

/// Write the topology, attribute tables and a run config into `dir`.
/// Returns the config with paths resolved against `dir`.
pub fn write_inputs(dir: &Path, seed: u64) -> Result<RunConfig> {
    let sample = reference_sample(seed)?;
    let t = tables(&sample);
    write_atomic(&dir.join("topology.json"), topology().to_json()?.as_bytes())?;
    write_atomic(&dir.join("buses.csv"), t.buses.as_bytes())?;
    write_atomic(&dir.join("reliability.csv"), t.reliability.as_bytes())?;
    write_atomic(&dir.join("lines.csv"), t.lines.as_bytes())?;
    let mut cfg = config(seed);
    write_atomic(&dir.join("gridsynth.toml"), cfg.to_toml()?.as_bytes())?;
    cfg.resolve(dir);
    Ok(cfg)
}
