//! OpenDSS script export of a synthetic sample.

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::sample::SyntheticSample;
use crate::topology::Feeder;

const PHASE_NODES: [&str; 3] = ["1", "2", "3"];

/// Bus and element names may not contain OpenDSS separators.
fn check_name(kind: &str, id: &str) -> Result<()> {
    let ok = !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || "_-".contains(c));
    if ok {
        Ok(())
    } else {
        Err(Error::Format(format!(
            "{kind} id {id:?} cannot be written to OpenDSS (use letters, digits, '_' and '-')"
        )))
    }
}

fn nodes(active: [bool; 3]) -> Vec<usize> {
    (0..3).filter(|&p| active[p]).collect()
}

fn bus_ref(id: &str, phases: &[usize]) -> String {
    let mut s = id.to_string();
    for &p in phases {
        s.push('.');
        s.push_str(PHASE_NODES[p]);
    }
    s
}

/// Lower-triangular matrix in OpenDSS `(a | b c | ...)` syntax.
fn triangle(phases: &[usize], f: impl Fn(usize, usize) -> f64) -> String {
    let rows: Vec<String> = phases
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            phases[..=i]
                .iter()
                .map(|&q| format!("{:.9}", f(p, q)))
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect();
    format!("({})", rows.join(" | "))
}

/// Render `sample` as a self-contained OpenDSS script. Phases map A, B, C to
/// nodes 1, 2, 3. The source is a stiff three-phase Vsource at `base_kv`,
/// and each loaded phase becomes its own single-phase wye load so unbalanced
/// per-phase demand is kept exactly.
///
/// The sample must be complete for `feeder`.
pub fn export(sample: &SyntheticSample, feeder: &Feeder, base_kv: f64) -> Result<String> {
    if !(base_kv > 0.0) {
        return Err(Error::Parameter(format!("base kV must be > 0, got {base_kv}")));
    }
    sample.audit(feeder)?;
    let t = &feeder.topology;
    let source_bus = t.buses()[t.source()].id.as_str();
    for b in &sample.buses {
        check_name("bus", &b.id)?;
    }
    for l in &sample.lines {
        check_name("line", &l.id)?;
    }

    let mut s = String::new();
    let w = &mut s;
    let _ = writeln!(w, "! gridsynth sample {} (posterior draw {}, seed {})", sample.sample_id, sample.provenance.draw_index, sample.provenance.seed);
    let _ = writeln!(w, "! network power factor {}", sample.power_factor);
    let _ = writeln!(w, "Clear");
    let _ = writeln!(
        w,
        "New Circuit.gridsynth_{} basekv={base_kv} pu=1.0 angle=0 phases=3 bus1={source_bus} MVAsc3=1e9 MVAsc1=1e9",
        sample.sample_id
    );
    let _ = writeln!(w);

    for l in &sample.lines {
        let ph = nodes(l.params.phases.phases());
        let z = &l.params.z_abc;
        let _ = writeln!(
            w,
            "New Line.{} bus1={} bus2={} phases={} length={} units=km rmatrix={} xmatrix={} cmatrix={}",
            l.id,
            bus_ref(&l.from, &ph),
            bus_ref(&l.to, &ph),
            ph.len(),
            l.length_km,
            triangle(&ph, |p, q| z[p][q].re),
            triangle(&ph, |p, q| z[p][q].im),
            triangle(&ph, |_, _| 0.0),
        );
    }
    let _ = writeln!(w);

    let kv_ln = base_kv / 3f64.sqrt();
    for b in &sample.buses {
        for p in 0..3 {
            let (kw, kvar) = (b.demand.p_kw[p], b.demand.q_kvar[p]);
            if kw == 0.0 && kvar == 0.0 {
                continue;
            }
            let _ = writeln!(
                w,
                "New Load.{}_{} bus1={}.{} phases=1 conn=wye model=1 kv={kv_ln:.6} kw={kw:.6} kvar={kvar:.6}",
                b.id,
                ["a", "b", "c"][p],
                b.id,
                PHASE_NODES[p],
            );
        }
    }
    let _ = writeln!(w);
    let _ = writeln!(w, "Set voltagebases=[{base_kv}]");
    let _ = writeln!(w, "Calcvoltagebases");
    let _ = writeln!(w, "Solve");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_syntax() {
        let t = triangle(&[0, 2], |p, q| (10 * p + q) as f64);
        assert_eq!(t, "(0.000000000 | 20.000000000 22.000000000)");
        assert_eq!(bus_ref("x", &[0, 2]), "x.1.3");
    }

    #[test]
    fn names() {
        assert!(check_name("bus", "b_12-a").is_ok());
        assert!(check_name("bus", "b.1").is_err());
        assert!(check_name("bus", "b 1").is_err());
    }
}
