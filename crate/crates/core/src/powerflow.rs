//! Three-phase unbalanced backward/forward sweep for radial feeders with
//! constant-power wye loads, plus voltage screening and summaries.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::line::LineParams;
use crate::load::BusDemand;
use crate::phase::PhaseConfig;
use crate::topology::Feeder;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PowerFlowOptions {
    /// Magnitude of the balanced source voltage in per unit.
    pub slack_voltage_pu: f64,
    /// Line-to-line base voltage.
    pub base_kv: f64,
    pub base_kva: f64,
    /// Convergence threshold on the largest per-phase power mismatch, as a
    /// fraction of `base_kva`.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for PowerFlowOptions {
    fn default() -> Self {
        Self {
            slack_voltage_pu: 1.0,
            base_kv: 12.47,
            base_kva: 1000.0,
            tolerance: 1e-6,
            max_iterations: 100,
        }
    }
}

impl PowerFlowOptions {
    pub fn validate(&self) -> Result<()> {
        let ok = self.slack_voltage_pu > 0.0
            && self.base_kv > 0.0
            && self.base_kva > 0.0
            && self.tolerance > 0.0
            && self.max_iterations > 0;
        if !ok {
            return Err(Error::Config("power-flow options must all be positive".into()));
        }
        Ok(())
    }

    /// Line-to-neutral base voltage in volts.
    pub fn base_ln_volts(&self) -> f64 {
        self.base_kv * 1000.0 / 3f64.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerFlowResult {
    /// Per-bus phase-to-neutral voltages in per unit; zero on absent phases.
    pub voltages_pu: Vec<[Complex64; 3]>,
    /// Series current of each line in amperes, keyed by line index.
    pub line_currents_a: Vec<[Complex64; 3]>,
    pub active: Vec<[bool; 3]>,
    pub converged: bool,
    pub iterations: usize,
    pub max_mismatch_kva: f64,
}

impl PowerFlowResult {
    /// Magnitudes of active phases as `(bus, phase, |V|)`.
    pub fn magnitudes(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.voltages_pu.iter().enumerate().flat_map(move |(b, v)| {
            (0..3).filter(move |&p| self.active[b][p]).map(move |p| (b, p, v[p].norm()))
        })
    }
}

fn balanced_set(mag: f64) -> [Complex64; 3] {
    let a = 2.0 * std::f64::consts::PI / 3.0;
    [
        Complex64::from_polar(mag, 0.0),
        Complex64::from_polar(mag, -a),
        Complex64::from_polar(mag, a),
    ]
}

/// Solve one snapshot. `lines[l]` carries the per-km matrix of topology line
/// `l`; `phases[b]` and `loads[b]` describe bus `b`.
pub fn solve(
    feeder: &Feeder,
    phases: &[PhaseConfig],
    loads: &[BusDemand],
    lines: &[LineParams],
    options: &PowerFlowOptions,
) -> Result<PowerFlowResult> {
    options.validate()?;
    let t = &feeder.topology;
    t.require_radial()?;
    let n = t.bus_count();
    if phases.len() != n || loads.len() != n || lines.len() != t.line_count() {
        return Err(Error::IncompleteSample(format!(
            "power flow needs {n} phase entries, {n} loads and {} lines; got {}, {} and {}",
            t.line_count(),
            phases.len(),
            loads.len(),
            lines.len()
        )));
    }

    let vbase = options.base_ln_volts();
    let active: Vec<[bool; 3]> = phases.iter().map(|c| c.phases()).collect();
    let s_spec: Vec<[Complex64; 3]> = loads
        .iter()
        .map(|d| [0, 1, 2].map(|p| Complex64::new(d.p_kw[p], d.q_kvar[p]) * 1000.0))
        .collect();
    let z_line: Vec<[[Complex64; 3]; 3]> = t
        .lines()
        .iter()
        .zip(lines)
        .map(|(l, p)| p.z_total(l.length_km))
        .collect();

    let src = t.source();
    let slack = balanced_set(options.slack_voltage_pu * vbase);
    let mask = |v: [Complex64; 3], a: [bool; 3]| [0, 1, 2].map(|p| if a[p] { v[p] } else { Complex64::new(0.0, 0.0) });
    let mut v: Vec<[Complex64; 3]> = (0..n).map(|b| mask(slack, active[b])).collect();
    let order = &feeder.paths.order;
    let parent = &feeder.paths.parent;
    let parent_line = &feeder.paths.parent_line;
    let mut i_line = vec![[Complex64::new(0.0, 0.0); 3]; t.line_count()];
    let tol_va = options.tolerance * options.base_kva * 1000.0;

    let mut converged = false;
    let mut iterations = 0;
    let mut max_mismatch = f64::INFINITY;
    while iterations < options.max_iterations {
        iterations += 1;
        let i_load: Vec<[Complex64; 3]> = (0..n)
            .map(|b| {
                [0, 1, 2].map(|p| {
                    if active[b][p] && s_spec[b][p] != Complex64::new(0.0, 0.0) {
                        (s_spec[b][p] / v[b][p]).conj()
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
            })
            .collect();

        // Backward: accumulate currents from the leaves toward the source.
        let mut injected = i_load.clone();
        for &b in order.iter().rev() {
            if let (Some(pb), Some(l)) = (parent[b], parent_line[b]) {
                i_line[l] = mask(injected[b], active[b]);
                for p in 0..3 {
                    injected[pb][p] += i_line[l][p];
                }
            }
        }

        // Forward: voltage drops from the source outward.
        v[src] = mask(slack, active[src]);
        for &b in order.iter() {
            if let (Some(pb), Some(l)) = (parent[b], parent_line[b]) {
                let z = &z_line[l];
                let mut vb = [Complex64::new(0.0, 0.0); 3];
                for p in 0..3 {
                    if !active[b][p] {
                        continue;
                    }
                    let drop: Complex64 = (0..3).map(|q| z[p][q] * i_line[l][q]).sum();
                    vb[p] = v[pb][p] - drop;
                }
                v[b] = vb;
            }
        }

        max_mismatch = 0.0;
        for b in 0..n {
            for p in 0..3 {
                if active[b][p] {
                    let s = v[b][p] * i_load[b][p].conj();
                    max_mismatch = f64::max(max_mismatch, (s - s_spec[b][p]).norm());
                }
            }
        }
        if !max_mismatch.is_finite() {
            break;
        }
        if max_mismatch < tol_va {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("power flow did not converge in {iterations} iterations");
    }

    Ok(PowerFlowResult {
        voltages_pu: v.iter().map(|row| row.map(|x| x / vbase)).collect(),
        line_currents_a: i_line,
        active,
        converged,
        iterations,
        max_mismatch_kva: max_mismatch / 1000.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitViolation {
    pub bus: usize,
    pub phase: usize,
    pub magnitude_pu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    pub pass: bool,
    pub violations: Vec<LimitViolation>,
}

/// Pass iff every active phase magnitude lies in `[vmin, vmax]`.
pub fn check_limits(result: &PowerFlowResult, vmin: f64, vmax: f64) -> LimitReport {
    let violations: Vec<LimitViolation> = result
        .magnitudes()
        .filter(|&(_, _, m)| !(m >= vmin && m <= vmax))
        .map(|(bus, phase, magnitude_pu)| LimitViolation {
            bus,
            phase,
            magnitude_pu,
        })
        .collect();
    LimitReport {
        pass: violations.is_empty(),
        violations,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseStats {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
    pub count: usize,
}

/// Voltage magnitude statistics per phase over all buses of all converged
/// results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoltageStats {
    pub phases: [PhaseStats; 3],
}

impl VoltageStats {
    /// Plain-text table with one column per phase.
    pub fn table(&self) -> String {
        let mut out = String::from("Statistic  Phase A  Phase B  Phase C\n");
        let rows: [(&str, fn(&PhaseStats) -> f64); 3] =
            [("Min", |s| s.min), ("Mean", |s| s.mean), ("Max", |s| s.max)];
        for (name, f) in rows {
            out.push_str(&format!("{name:<9}"));
            for s in &self.phases {
                out.push_str(&format!("  {:>7.3}", f(s)));
            }
            out.push('\n');
        }
        out
    }
}

pub fn summarize<'a>(results: impl IntoIterator<Item = &'a PowerFlowResult>) -> Result<VoltageStats> {
    let mut acc = [(f64::INFINITY, 0.0, f64::NEG_INFINITY, 0usize); 3];
    let mut any = false;
    for r in results.into_iter().filter(|r| r.converged) {
        any = true;
        for (_, p, m) in r.magnitudes() {
            let a = &mut acc[p];
            a.0 = a.0.min(m);
            a.1 += m;
            a.2 = a.2.max(m);
            a.3 += 1;
        }
    }
    if !any {
        return Err(Error::NoConvergedResults);
    }
    Ok(VoltageStats {
        phases: acc.map(|(min, sum, max, count)| {
            if count == 0 {
                PhaseStats {
                    min: f64::NAN,
                    mean: f64::NAN,
                    max: f64::NAN,
                    count,
                }
            } else {
                PhaseStats {
                    min,
                    mean: sum / count as f64,
                    max,
                    count,
                }
            }
        }),
    })
}
