//! Browser bindings for the demo page: phase allocation on the demo feeder,
//! Carson impedance matrices and a voltage profile. Every call returns JSON.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use gridsynth::carson::{positive_sequence, LineConstruction};
use gridsynth::demo;
use gridsynth::kernel::Rng;
use gridsynth::line::LineParams;
use gridsynth::phase::{allocate, AllocationOptions, PhaseConfig};
use gridsynth::powerflow::PowerFlowOptions;

#[derive(Serialize)]
struct BusView {
    id: String,
    x: f64,
    y: f64,
    zone: usize,
    phases: PhaseConfig,
}

#[derive(Serialize)]
struct LineView {
    from: usize,
    to: usize,
    phases: PhaseConfig,
}

#[derive(Serialize)]
struct AllocationView {
    buses: Vec<BusView>,
    lines: Vec<LineView>,
    counts: [usize; 7],
    consistent: bool,
    fallbacks: usize,
}

fn json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

/// Allocate phases on the demo feeder. Bit `k` of `prohibited_mask`
/// prohibits configuration `k` in the order A, B, C, AB, BC, CA, ABC.
pub fn allocation(seed: u64, prohibited_mask: u32) -> Result<String, String> {
    let feeder = demo::feeder().map_err(|e| e.to_string())?;
    let model = demo::truth_model();
    let options = AllocationOptions {
        source: PhaseConfig::ABC,
        prohibited: PhaseConfig::ALL
            .into_iter()
            .filter(|c| prohibited_mask & (1 << c.index()) != 0)
            .collect(),
    };
    let mut rng = Rng::new(seed);
    let (alloc, fallbacks) =
        allocate(&feeder, &model.phase.draws[0].base, &options, &mut rng).map_err(|e| e.to_string())?;
    let t = &feeder.topology;
    let buses = t
        .buses()
        .iter()
        .enumerate()
        .map(|(b, bus)| BusView {
            id: bus.id.clone(),
            x: bus.x.unwrap_or(0.0),
            y: bus.y.unwrap_or(0.0),
            zone: feeder.zones.bus_zone[b],
            phases: alloc.config(b),
        })
        .collect();
    let lines = (0..t.line_count())
        .map(|l| LineView {
            from: feeder.line_upstream(l),
            to: feeder.line_downstream(l),
            phases: alloc.config(feeder.line_downstream(l)),
        })
        .collect();
    json(&AllocationView {
        buses,
        lines,
        counts: alloc.counts(),
        consistent: alloc.is_consistent(&feeder),
        fallbacks,
    })
}

#[derive(Serialize)]
struct CarsonView {
    /// Row-major 3x3 of `[re, im]` in ohm/km.
    z_abc: Vec<Vec<[f64; 2]>>,
    z1: [f64; 2],
}

/// Phase-frame impedance of a line with the given sequence values and
/// spacings. A non-positive `neutral_height_m` omits the neutral.
#[allow(clippy::too_many_arguments)]
pub fn carson(
    phases: &str,
    r1_ohm_per_km: f64,
    x1_ohm_per_km: f64,
    d_ab_m: f64,
    d_bc_m: f64,
    d_ac_m: f64,
    neutral_height_m: f64,
    resistivity_ohm_m: f64,
) -> Result<String, String> {
    let config: PhaseConfig = phases.parse().map_err(|_| format!("unknown phase configuration {phases:?}"))?;
    let mut c = LineConstruction {
        d_ab_m,
        d_bc_m,
        d_ac_m,
        neutral_height_m: (neutral_height_m > 0.0).then_some(neutral_height_m),
        ..LineConstruction::default()
    };
    c.earth.resistivity_ohm_m = resistivity_ohm_m;
    c.validate().map_err(|e| e.to_string())?;
    if !(r1_ohm_per_km > 0.0 && x1_ohm_per_km > 0.0) {
        return Err("R1 and X1 must be > 0".into());
    }
    let p = LineParams::build(r1_ohm_per_km, x1_ohm_per_km / r1_ohm_per_km, config, &c).map_err(|e| e.to_string())?;
    let full = LineParams::build(r1_ohm_per_km, x1_ohm_per_km / r1_ohm_per_km, PhaseConfig::ABC, &c)
        .map_err(|e| e.to_string())?;
    let z1 = positive_sequence(&full.z_abc);
    json(&CarsonView {
        z_abc: p.z_abc.iter().map(|row| row.iter().map(|z| [z.re, z.im]).collect()).collect(),
        z1: [z1.re, z1.im],
    })
}

#[derive(Serialize)]
struct ProfilePoint {
    bus: String,
    distance_km: f64,
    phase: char,
    magnitude_pu: f64,
}

#[derive(Serialize)]
struct ProfileView {
    points: Vec<ProfilePoint>,
    converged: bool,
    iterations: usize,
    min_pu: f64,
    max_pu: f64,
    total_kw: f64,
}

/// Draw a demo network from the ground-truth model, scale every load by
/// `load_scale` and solve its power flow.
pub fn profile(seed: u64, load_scale: f64) -> Result<String, String> {
    if !(load_scale >= 0.0 && load_scale.is_finite()) {
        return Err("load scale must be a finite number >= 0".into());
    }
    let feeder = demo::feeder().map_err(|e| e.to_string())?;
    let mut sample = demo::reference_sample(seed).map_err(|e| e.to_string())?;
    let mut total_kw = 0.0;
    for b in &mut sample.buses {
        for p in 0..3 {
            b.demand.p_kw[p] *= load_scale;
            b.demand.q_kvar[p] *= load_scale;
        }
        total_kw += b.demand.total_kw();
    }
    let r = sample
        .power_flow(&feeder, &PowerFlowOptions::default())
        .map_err(|e| e.to_string())?;
    let points: Vec<ProfilePoint> = r
        .magnitudes()
        .map(|(b, p, m)| ProfilePoint {
            bus: sample.buses[b].id.clone(),
            distance_km: feeder.paths.distance_km[b],
            phase: ['A', 'B', 'C'][p],
            magnitude_pu: m,
        })
        .collect();
    let min_pu = points.iter().map(|p| p.magnitude_pu).fold(f64::INFINITY, f64::min);
    let max_pu = points.iter().map(|p| p.magnitude_pu).fold(f64::NEG_INFINITY, f64::max);
    json(&ProfileView {
        points,
        converged: r.converged,
        iterations: r.iterations,
        min_pu,
        max_pu,
        total_kw,
    })
}

#[wasm_bindgen]
pub fn allocate_phases(seed: u32, prohibited_mask: u32) -> Result<String, JsValue> {
    allocation(seed as u64, prohibited_mask).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn carson_matrix(
    phases: &str,
    r1_ohm_per_km: f64,
    x1_ohm_per_km: f64,
    d_ab_m: f64,
    d_bc_m: f64,
    d_ac_m: f64,
    neutral_height_m: f64,
    resistivity_ohm_m: f64,
) -> Result<String, JsValue> {
    carson(
        phases,
        r1_ohm_per_km,
        x1_ohm_per_km,
        d_ab_m,
        d_bc_m,
        d_ac_m,
        neutral_height_m,
        resistivity_ohm_m,
    )
    .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn voltage_profile(seed: u32, load_scale: f64) -> Result<String, JsValue> {
    profile(seed as u64, load_scale).map_err(|e| JsValue::from_str(&e))
}
