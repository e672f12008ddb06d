//! Ensemble validation: phase consistency, power-flow convergence, voltage
//! limits and summary tables.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::config::Limits;
use crate::error::Result;
use crate::inference::hdi;
use crate::model::FittedModel;
use crate::phase::{PhaseConfig, CONFIG_COUNT};
use crate::powerflow::{check_limits, summarize, PowerFlowOptions, PowerFlowResult, VoltageStats};
use crate::sample::SyntheticSample;
use crate::topology::Feeder;

/// Line whose downstream phases are not a subset of its upstream phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffendingEdge {
    pub sample_id: u64,
    pub line: String,
    pub upstream: String,
    pub upstream_phases: PhaseConfig,
    pub downstream: String,
    pub downstream_phases: PhaseConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleCheck {
    pub sample_id: u64,
    pub phase_violations: usize,
    /// Power flow is only attempted on complete, phase-consistent samples.
    pub solved: bool,
    pub converged: bool,
    pub iterations: usize,
    pub max_mismatch_kva: f64,
    pub within_limits: bool,
    pub vmin_pu: f64,
    pub vmax_pu: f64,
}

/// Fitted and generated frequency of one configuration in one zone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseFrequency {
    pub zone: usize,
    pub config: PhaseConfig,
    pub observed: f64,
    pub posterior_mean: f64,
    pub hdi: (f64, f64),
    pub generated: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub samples: Vec<SampleCheck>,
    pub offending_edges: Vec<OffendingEdge>,
    /// Samples that could not be solved, with the reason.
    pub errors: Vec<(u64, String)>,
    pub consistency_rate: f64,
    pub convergence_rate: f64,
    /// Share of all samples that converged with every voltage in limits.
    pub limit_pass_rate: f64,
    pub limits: Limits,
    pub voltage_stats: Option<VoltageStats>,
    pub phase_frequencies: Vec<PhaseFrequency>,
    pub hdi_mass: f64,
}

pub const HDI_MASS: f64 = 0.94;

struct Outcome {
    check: SampleCheck,
    offending: Vec<OffendingEdge>,
    error: Option<String>,
    result: Option<PowerFlowResult>,
}

fn check_sample(feeder: &Feeder, s: &SyntheticSample, options: &PowerFlowOptions, limits: &Limits) -> Outcome {
    let mut check = SampleCheck {
        sample_id: s.sample_id,
        phase_violations: 0,
        solved: false,
        converged: false,
        iterations: 0,
        max_mismatch_kva: f64::NAN,
        within_limits: false,
        vmin_pu: f64::NAN,
        vmax_pu: f64::NAN,
    };
    if let Err(e) = s.audit(feeder) {
        return Outcome {
            check,
            offending: Vec::new(),
            error: Some(e.to_string()),
            result: None,
        };
    }
    let buses = feeder.topology.buses();
    let offending: Vec<OffendingEdge> = s
        .allocation()
        .violations(feeder)
        .into_iter()
        .map(|v| OffendingEdge {
            sample_id: s.sample_id,
            line: feeder.topology.lines()[v.line].id.clone(),
            upstream: buses[v.upstream].id.clone(),
            upstream_phases: s.buses[v.upstream].phases,
            downstream: buses[v.downstream].id.clone(),
            downstream_phases: s.buses[v.downstream].phases,
        })
        .collect();
    check.phase_violations = offending.len();
    if !offending.is_empty() {
        return Outcome {
            check,
            offending,
            error: Some("phase-inconsistent; power flow skipped".into()),
            result: None,
        };
    }
    match s.power_flow(feeder, options) {
        Ok(r) => {
            let lim = check_limits(&r, limits.vmin_pu, limits.vmax_pu);
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for (_, _, m) in r.magnitudes() {
                lo = lo.min(m);
                hi = hi.max(m);
            }
            check.solved = true;
            check.converged = r.converged;
            check.iterations = r.iterations;
            check.max_mismatch_kva = r.max_mismatch_kva;
            check.within_limits = r.converged && lim.pass;
            check.vmin_pu = lo;
            check.vmax_pu = hi;
            let error = (!r.converged).then(|| format!("did not converge in {} iterations", r.iterations));
            Outcome {
                check,
                offending,
                error,
                result: Some(r),
            }
        }
        Err(e) => Outcome {
            check,
            offending,
            error: Some(e.to_string()),
            result: None,
        },
    }
}

/// Check every sample. Per-sample problems (incomplete or inconsistent
/// samples, failed solves) are recorded in the report; only a non-radial
/// feeder is an error. `results[i]` is `None` where sample `i` was not solved.
pub fn validate_samples(
    feeder: &Feeder,
    samples: &[SyntheticSample],
    model: Option<&FittedModel>,
    options: &PowerFlowOptions,
    limits: &Limits,
) -> Result<(ValidationReport, Vec<Option<PowerFlowResult>>)> {
    feeder.topology.require_radial()?;
    options.validate()?;
    let one = |s: &SyntheticSample| check_sample(feeder, s, options, limits);
    #[cfg(feature = "parallel")]
    let outcomes: Vec<Outcome> = {
        use rayon::prelude::*;
        samples.par_iter().map(one).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<Outcome> = samples.iter().map(one).collect();

    let mut checks = Vec::with_capacity(samples.len());
    let mut results = Vec::with_capacity(samples.len());
    let mut offending_edges = Vec::new();
    let mut errors = Vec::new();
    for o in outcomes {
        if let Some(e) = o.error {
            errors.push((o.check.sample_id, e));
        }
        offending_edges.extend(o.offending);
        checks.push(o.check);
        results.push(o.result);
    }

    let n = checks.len().max(1) as f64;
    let rate = |f: fn(&SampleCheck) -> bool| checks.iter().filter(|c| f(c)).count() as f64 / n;
    let consistency_rate = rate(|c| c.phase_violations == 0);
    let convergence_rate = rate(|c| c.converged);
    let limit_pass_rate = rate(|c| c.within_limits);
    let voltage_stats = summarize(results.iter().flatten()).ok();

    let mut phase_frequencies = Vec::new();
    if let Some(m) = model {
        let z_count = m.zone_count;
        let mut generated = vec![[0usize; CONFIG_COUNT]; z_count];
        for s in samples {
            for b in s.buses.iter().filter(|b| (1..=z_count).contains(&b.zone)) {
                generated[b.zone - 1][b.phases.index()] += 1;
            }
        }
        for z in 1..=z_count {
            let total_obs: u64 = m.phase.counts[z - 1].iter().sum();
            let total_gen: usize = generated[z - 1].iter().sum();
            for c in PhaseConfig::ALL {
                let column = m.phase.base_column(z, c);
                let mean = column.iter().sum::<f64>() / column.len() as f64;
                let interval = hdi(&column, HDI_MASS).unwrap_or((f64::NAN, f64::NAN));
                phase_frequencies.push(PhaseFrequency {
                    zone: z,
                    config: c,
                    observed: ratio(m.phase.counts[z - 1][c.index()] as f64, total_obs as f64),
                    posterior_mean: mean,
                    hdi: interval,
                    generated: ratio(generated[z - 1][c.index()] as f64, total_gen as f64),
                });
            }
        }
    }

    Ok((
        ValidationReport {
            samples: checks,
            offending_edges,
            errors,
            consistency_rate,
            convergence_rate,
            limit_pass_rate,
            limits: limits.clone(),
            voltage_stats,
            phase_frequencies,
            hdi_mass: HDI_MASS,
        },
        results,
    ))
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else {
        f64::NAN
    }
}

impl ValidationReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let w = &mut s;
        let _ = writeln!(w, "samples:            {}", self.samples.len());
        let _ = writeln!(w, "phase consistency:  {:.1}%", 100.0 * self.consistency_rate);
        let _ = writeln!(w, "power-flow converged: {:.1}%", 100.0 * self.convergence_rate);
        let _ = writeln!(
            w,
            "within [{}, {}] pu: {:.1}%",
            self.limits.vmin_pu,
            self.limits.vmax_pu,
            100.0 * self.limit_pass_rate
        );
        if let Some(v) = &self.voltage_stats {
            let _ = writeln!(w, "\nvoltage magnitude (pu) over converged samples\n{}", v.table());
        }
        if !self.offending_edges.is_empty() {
            let _ = writeln!(w, "\nphase-inconsistent edges");
            for e in &self.offending_edges {
                let _ = writeln!(
                    w,
                    "  sample {} line {}: {} ({}) -> {} ({})",
                    e.sample_id, e.line, e.upstream, e.upstream_phases, e.downstream, e.downstream_phases
                );
            }
        }
        if !self.errors.is_empty() {
            let _ = writeln!(w, "\nsamples not solved or not converged");
            for (id, e) in &self.errors {
                let _ = writeln!(w, "  sample {id}: {e}");
            }
        }
        if !self.phase_frequencies.is_empty() {
            let _ = writeln!(
                w,
                "\nphase configuration frequencies ({:.0}% HDI of the base probability)",
                100.0 * self.hdi_mass
            );
            let _ = writeln!(w, "zone  config  observed  posterior  hdi_low  hdi_high  generated");
            for f in &self.phase_frequencies {
                let _ = writeln!(
                    w,
                    "{:>4}  {:<6}  {:>8.4}  {:>9.4}  {:>7.4}  {:>8.4}  {:>9.4}",
                    f.zone, f.config, f.observed, f.posterior_mean, f.hdi.0, f.hdi.1, f.generated
                );
            }
        }
        s
    }

    /// One CSV row per sample.
    pub fn samples_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for c in &self.samples {
            w.serialize(c).map_err(|e| crate::Error::Format(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| crate::Error::Format(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Per-bus voltage magnitudes of one solved sample as CSV.
pub fn voltage_csv(sample: &SyntheticSample, result: &PowerFlowResult) -> String {
    let mut s = String::from("bus_id,phase,magnitude_pu,angle_deg\n");
    for (b, p, m) in result.magnitudes() {
        let _ = writeln!(
            s,
            "{},{},{m:.6},{:.4}",
            sample.buses[b].id,
            ["A", "B", "C"][p],
            result.voltages_pu[b][p].arg().to_degrees()
        );
    }
    s
}
