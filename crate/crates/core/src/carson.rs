//! Phase impedance matrices from modified Carson's equations with Kron
//! reduction of a grounded neutral. SI units throughout: metres, ohms per km.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::PhaseConfig;

pub type Zabc = [[Complex64; 3]; 3];

const MU0: f64 = 4.0e-7 * PI;

/// Earth-return constants of the modified equations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EarthModel {
    pub frequency_hz: f64,
    pub resistivity_ohm_m: f64,
}

impl Default for EarthModel {
    fn default() -> Self {
        Self {
            frequency_hz: 60.0,
            resistivity_ohm_m: 100.0,
        }
    }
}

impl EarthModel {
    /// Earth-return resistance added to every self and mutual term, ohm/km.
    pub fn earth_resistance(&self) -> f64 {
        let omega = 2.0 * PI * self.frequency_hz;
        omega * MU0 / 8.0 * 1000.0
    }

    /// `omega * mu0 / (2 pi)` in ohm/km.
    pub fn reactance_factor(&self) -> f64 {
        MU0 * self.frequency_hz * 1000.0
    }

    /// Equivalent depth of the earth-return path in metres. The constant
    /// 7.6786 comes from the series truncation of the modified equations
    /// when written with lengths in feet.
    pub fn equivalent_depth_m(&self) -> f64 {
        0.3048 * 7.6786f64.exp() * (self.resistivity_ohm_m / self.frequency_hz).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conductor {
    pub gmr_m: f64,
    pub r_ac_ohm_per_km: f64,
}

impl Conductor {
    /// 4/0 6/1 ACSR, a common overhead neutral.
    pub const ACSR_4_0: Conductor = Conductor {
        gmr_m: 0.002_481,
        r_ac_ohm_per_km: 0.3679,
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.gmr_m > 0.0 && self.gmr_m.is_finite()) || !(self.r_ac_ohm_per_km >= 0.0) {
            return Err(Error::Parameter(format!(
                "conductor needs gmr > 0 and resistance >= 0, got {} m / {} ohm/km",
                self.gmr_m, self.r_ac_ohm_per_km
            )));
        }
        Ok(())
    }
}

/// Conductor positions (metres) on a pole top.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub phases: [(f64, f64); 3],
    pub neutral: Option<(f64, f64)>,
}

fn distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

impl Geometry {
    /// Place phases from their three pairwise spacings (A at the origin, B on
    /// the x axis) with the neutral `neutral_height_m` above the highest phase
    /// and centred over the span. A height of `None` omits the neutral.
    pub fn from_spacings(d_ab: f64, d_bc: f64, d_ac: f64, neutral_height_m: Option<f64>) -> Result<Self> {
        if [d_ab, d_bc, d_ac].iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::Parameter(format!(
                "phase spacings must be > 0, got {d_ab}/{d_bc}/{d_ac}"
            )));
        }
        let cx = (d_ab * d_ab + d_ac * d_ac - d_bc * d_bc) / (2.0 * d_ab);
        let cy2 = d_ac * d_ac - cx * cx;
        if cy2 < -1e-9 * d_ac * d_ac {
            return Err(Error::Parameter(format!(
                "spacings {d_ab}/{d_bc}/{d_ac} violate the triangle inequality"
            )));
        }
        let phases = [(0.0, 0.0), (d_ab, 0.0), (cx, cy2.max(0.0).sqrt())];
        let neutral = match neutral_height_m {
            None => None,
            Some(h) if h.is_finite() && h > 0.0 => {
                let xs = phases.map(|p| p.0);
                let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let top = phases.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
                Some((0.5 * (lo + hi), top + h))
            }
            Some(h) => return Err(Error::Parameter(format!("neutral height must be > 0, got {h}"))),
        };
        Ok(Self { phases, neutral })
    }

    /// Geometric mean of the three phase-to-phase distances.
    pub fn gmd(&self) -> f64 {
        let p = &self.phases;
        (distance(p[0], p[1]) * distance(p[1], p[2]) * distance(p[0], p[2])).cbrt()
    }

    fn validate(&self) -> Result<()> {
        let mut pts: Vec<(f64, f64)> = self.phases.to_vec();
        pts.extend(self.neutral);
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                if !(distance(pts[i], pts[j]) > 0.0) {
                    return Err(Error::Parameter("two conductors share a position".into()));
                }
            }
        }
        Ok(())
    }
}

/// Line construction shared by every generated line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LineConstruction {
    pub d_ab_m: f64,
    pub d_bc_m: f64,
    pub d_ac_m: f64,
    /// Height of the neutral above the phase plane; `None` for no neutral.
    pub neutral_height_m: Option<f64>,
    pub neutral: Conductor,
    pub earth: EarthModel,
}

impl Default for LineConstruction {
    fn default() -> Self {
        Self {
            d_ab_m: 0.6,
            d_bc_m: 0.6,
            d_ac_m: 1.2,
            neutral_height_m: Some(1.2),
            neutral: Conductor::ACSR_4_0,
            earth: EarthModel::default(),
        }
    }
}

impl LineConstruction {
    pub fn geometry(&self) -> Result<Geometry> {
        Geometry::from_spacings(self.d_ab_m, self.d_bc_m, self.d_ac_m, self.neutral_height_m)
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry()?.validate()?;
        self.neutral.validate()?;
        if !(self.earth.frequency_hz > 0.0 && self.earth.resistivity_ohm_m > 0.0) {
            return Err(Error::Parameter("frequency and earth resistivity must be > 0".into()));
        }
        Ok(())
    }
}

/// Phase conductor whose transposed, neutral-free positive-sequence
/// impedance on `geometry` is exactly `r1 + j x1`.
pub fn conductor_from_sequence(r1: f64, x1: f64, geometry: &Geometry, earth: &EarthModel) -> Result<Conductor> {
    let c = Conductor {
        gmr_m: geometry.gmd() * (-x1 / earth.reactance_factor()).exp(),
        r_ac_ohm_per_km: r1,
    };
    c.validate()?;
    Ok(c)
}

/// Build the primitive matrix for the active phases plus the neutral,
/// Kron-reduce the neutral, and place the result in a 3x3 with zero rows and
/// columns for absent phases.
pub fn carson_zabc(
    config: PhaseConfig,
    phase: &Conductor,
    geometry: &Geometry,
    neutral: &Conductor,
    earth: &EarthModel,
) -> Result<Zabc> {
    phase.validate()?;
    geometry.validate()?;
    let active: Vec<usize> = (0..3).filter(|&j| config.phases()[j]).collect();
    let mut pos: Vec<(f64, f64)> = active.iter().map(|&j| geometry.phases[j]).collect();
    let mut cond: Vec<Conductor> = vec![*phase; active.len()];
    if let Some(n) = geometry.neutral {
        neutral.validate()?;
        pos.push(n);
        cond.push(*neutral);
    }

    let re = earth.earth_resistance();
    let k = earth.reactance_factor();
    let de = earth.equivalent_depth_m();
    let m = pos.len();
    let mut prim = vec![vec![Complex64::new(0.0, 0.0); m]; m];
    for i in 0..m {
        for j in 0..m {
            prim[i][j] = if i == j {
                Complex64::new(cond[i].r_ac_ohm_per_km + re, k * (de / cond[i].gmr_m).ln())
            } else {
                Complex64::new(re, k * (de / distance(pos[i], pos[j])).ln())
            };
        }
    }

    let np = active.len();
    let mut reduced = vec![vec![Complex64::new(0.0, 0.0); np]; np];
    for i in 0..np {
        for j in 0..np {
            let mut z = prim[i][j];
            if geometry.neutral.is_some() {
                z -= prim[i][np] * prim[np][j] / prim[np][np];
            }
            reduced[i][j] = z;
        }
    }

    let mut out = [[Complex64::new(0.0, 0.0); 3]; 3];
    for (a, &pi) in active.iter().enumerate() {
        for (b, &pj) in active.iter().enumerate() {
            out[pi][pj] = reduced[a][b];
        }
    }
    // Enforce exact symmetry against rounding in the reduction.
    for i in 0..3 {
        for j in i + 1..3 {
            let avg = 0.5 * (out[i][j] + out[j][i]);
            out[i][j] = avg;
            out[j][i] = avg;
        }
    }
    Ok(out)
}

/// Positive-sequence impedance of a transposed three-phase matrix:
/// mean self term minus mean mutual term.
pub fn positive_sequence(z: &Zabc) -> Complex64 {
    let zs = (z[0][0] + z[1][1] + z[2][2]) / 3.0;
    let zm = (z[0][1] + z[1][2] + z[0][2]) / 3.0;
    zs - zm
}
