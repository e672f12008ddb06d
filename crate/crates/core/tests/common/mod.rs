#![allow(dead_code)]

use gridsynth::topology::{Bus, LineRecord, NetworkTopology};
use gridsynth::carson::{Conductor, EarthModel, Geometry, Zabc};
use gridsynth::kernel::Rng;
use gridsynth::phase::PhaseConfig;
use num_complex::Complex64;
use proptest::prelude::*;

/// Tree on `parents.len() + 1` buses: bus `i + 1` hangs off bus
/// `parents[i] % (i + 1)`. Extra chords (if any) close cycles.
pub fn build(parents: &[usize], lengths: &[f64], chords: &[(usize, usize, f64)]) -> NetworkTopology {
    let n = parents.len() + 1;
    let buses = (0..n).map(|i| Bus::new(format!("n{i}"))).collect();
    let mut lines: Vec<LineRecord> = parents
        .iter()
        .zip(lengths)
        .enumerate()
        .map(|(i, (&p, &len))| LineRecord {
            id: format!("l{i}"),
            from: format!("n{}", p % (i + 1)),
            to: format!("n{}", i + 1),
            length_km: len,
        })
        .collect();
    for (k, &(a, b, len)) in chords.iter().enumerate() {
        let (a, b) = (a % n, b % n);
        if a != b {
            lines.push(LineRecord {
                id: format!("c{k}"),
                from: format!("n{a}"),
                to: format!("n{b}"),
                length_km: len,
            });
        }
    }
    NetworkTopology::new(buses, lines, "n0").unwrap()
}

/// Random radial feeder with 2..=max buses.
pub fn tree(max: usize) -> impl Strategy<Value = NetworkTopology> {
    (1..max).prop_flat_map(|m| {
        (prop::collection::vec(any::<usize>(), m), prop::collection::vec(0.01f64..2.0, m))
            .prop_map(|(p, l)| build(&p, &l, &[]))
    })
}

pub const FT_PER_M: f64 = 1.0 / 0.3048;
pub const KM_PER_MILE: f64 = 1.609_344;

/// Modified Carson's equations written out in Kersting's imperial form
/// (ohm/mile, feet), with the neutral eliminated by the explicit
/// `z_ij - z_in z_nj / z_nn` formula. Shares no code with the library.
pub fn imperial_oracle(
    phase_pos_ft: &[(f64, f64)],
    phase_gmr_ft: f64,
    phase_r_mi: f64,
    neutral: Option<((f64, f64), f64, f64)>,
    f: f64,
    rho: f64,
) -> Vec<Vec<Complex64>> {
    let pi = std::f64::consts::PI;
    // omega mu0 / 8 and omega mu0 / (2 pi), per mile
    let r_earth = pi * pi * f * 1e-7 * 1609.344;
    let k = 4.0 * pi * f * 1e-7 * 1609.344;
    let term = 7.6786 + 0.5 * (rho / f).ln();
    let dist = |a: (f64, f64), b: (f64, f64)| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();

    let mut pos: Vec<(f64, f64)> = phase_pos_ft.to_vec();
    let mut gmr = vec![phase_gmr_ft; pos.len()];
    let mut r = vec![phase_r_mi; pos.len()];
    if let Some((p, g, rn)) = neutral {
        pos.push(p);
        gmr.push(g);
        r.push(rn);
    }
    let m = pos.len();
    let mut prim = vec![vec![Complex64::new(0.0, 0.0); m]; m];
    for i in 0..m {
        for j in 0..m {
            prim[i][j] = if i == j {
                Complex64::new(r[i] + r_earth, k * ((1.0 / gmr[i]).ln() + term))
            } else {
                Complex64::new(r_earth, k * ((1.0 / dist(pos[i], pos[j])).ln() + term))
            };
        }
    }
    let np = phase_pos_ft.len();
    let mut out = vec![vec![Complex64::new(0.0, 0.0); np]; np];
    for i in 0..np {
        for j in 0..np {
            out[i][j] = if neutral.is_some() {
                prim[i][j] - prim[i][np] * prim[np][j] / prim[np][np]
            } else {
                prim[i][j]
            };
        }
    }
    out
}

pub fn to_ft(p: (f64, f64)) -> (f64, f64) {
    (p.0 * FT_PER_M, p.1 * FT_PER_M)
}

/// Reference four-wire construction used by the Carson checks.
pub fn reference() -> (Conductor, Geometry, Conductor, EarthModel) {
    (
        Conductor {
            gmr_m: 0.00787,
            r_ac_ohm_per_km: 0.19,
        },
        Geometry::from_spacings(0.6, 0.6, 1.2, Some(1.2)).unwrap(),
        Conductor::ACSR_4_0,
        EarthModel::default(),
    )
}

/// Oracle matrix for `config`, placed in a 3x3 in ohm/km.
pub fn oracle_for(config: PhaseConfig, c: &Conductor, g: &Geometry, n: &Conductor, e: &EarthModel) -> Zabc {
    let active: Vec<usize> = (0..3).filter(|&p| config.phases()[p]).collect();
    let pos: Vec<(f64, f64)> = active.iter().map(|&p| to_ft(g.phases[p])).collect();
    let neutral = g
        .neutral
        .map(|p| (to_ft(p), n.gmr_m * FT_PER_M, n.r_ac_ohm_per_km * KM_PER_MILE));
    let z = imperial_oracle(
        &pos,
        c.gmr_m * FT_PER_M,
        c.r_ac_ohm_per_km * KM_PER_MILE,
        neutral,
        e.frequency_hz,
        e.resistivity_ohm_m,
    );
    let mut out = [[Complex64::new(0.0, 0.0); 3]; 3];
    for (a, &i) in active.iter().enumerate() {
        for (b, &j) in active.iter().enumerate() {
            out[i][j] = z[a][b] / KM_PER_MILE;
        }
    }
    out
}

pub fn max_diff(a: &Zabc, b: &Zabc) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            d = d.max((a[i][j].re - b[i][j].re).abs()).max((a[i][j].im - b[i][j].im).abs());
        }
    }
    d
}

/// Receiving-end magnitude of a single-phase two-bus circuit, from
/// `|V|^4 + (2(RP + XQ) - |Vs|^2)|V|^2 + (R^2 + X^2)(P^2 + Q^2) = 0`
/// (larger root), all in SI.
pub fn two_bus_oracle(vs: f64, r: f64, x: f64, p: f64, q: f64) -> f64 {
    let b = 2.0 * (r * p + x * q) - vs * vs;
    let c = (r * r + x * x) * (p * p + q * q);
    ((-b + (b * b - 4.0 * c).sqrt()) / 2.0).sqrt()
}

/// Check sample mean and variance against analytic values, each within four
/// standard errors. The variance's standard error is the exact finite-sample
/// one, `(mu4 - sigma^4 (n-3)/(n-1)) / n`, with sample moments plugged in.
pub fn moment_mismatch(name: &str, xs: &[f64], mean: f64, var: f64) -> Option<String> {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let s2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    let se_mean = (var / n).sqrt();
    let se_var = ((m4 - s2 * s2 * (n - 3.0) / (n - 1.0)).max(0.0) / n).sqrt();
    if (m - mean).abs() > 4.0 * se_mean {
        return Some(format!("{name}: mean {m} vs {mean} (se {se_mean})"));
    }
    if (s2 - var).abs() > 4.0 * se_var {
        return Some(format!("{name}: variance {s2} vs {var} (se {se_var})"));
    }
    None
}

pub fn check_moments(name: &str, xs: &[f64], mean: f64, var: f64) {
    if let Some(e) = moment_mismatch(name, xs, mean, var) {
        panic!("{e}");
    }
}


/// A sampler paired with closed-form moments written out here rather than
/// taken from the kernel's own `Moments` impls.
pub struct MomentCase {
    pub name: String,
    pub mean: f64,
    pub var: f64,
    pub draw: Box<dyn FnMut(&mut Rng) -> f64>,
}

fn case(name: String, mean: f64, var: f64, draw: impl FnMut(&mut Rng) -> f64 + 'static) -> MomentCase {
    MomentCase {
        name,
        mean,
        var,
        draw: Box::new(draw),
    }
}

pub fn moment_cases() -> Vec<MomentCase> {
    use gridsynth::kernel::*;
    use statrs::distribution::{Continuous, ContinuousCDF};
    use statrs::function::gamma::gamma as g;

    let mut out = Vec::new();
    for (a, b) in [(0.3, 1.0), (1.0, 2.0), (2.5, 0.5), (40.0, 8.0)] {
        let d = Gamma::new(a, b).unwrap();
        out.push(case(format!("gamma({a}, {b})"), a / b, a / (b * b), move |r| d.sample(r)));
    }
    for (k, l) in [(0.8, 1.5), (1.5, 2.0), (3.0, 0.7)] {
        let d = Weibull::new(k, l).unwrap();
        let m1 = g(1.0 + 1.0 / k);
        let m2 = g(1.0 + 2.0 / k);
        out.push(case(format!("weibull({k}, {l})"), l * m1, l * l * (m2 - m1 * m1), move |r| d.sample(r)));
    }
    for (a, b) in [(0.5, 0.5), (2.0, 5.0), (30.0, 3.0)] {
        let d = Beta::new(a, b).unwrap();
        let s = a + b;
        out.push(case(format!("beta({a}, {b})"), a / s, a * b / (s * s * (s + 1.0)), move |r| d.sample(r)));
    }
    let alpha = [0.4, 1.0, 2.5, 6.0];
    let a0: f64 = alpha.iter().sum();
    for (k, &ak) in alpha.iter().enumerate() {
        let d = Dirichlet::new(alpha.to_vec()).unwrap();
        let var = ak * (a0 - ak) / (a0 * a0 * (a0 + 1.0));
        out.push(case(format!("dirichlet[{k}]"), ak / a0, var, move |r| d.sample(r)[k]));
    }
    let probs = [0.142, 0.137, 0.131, 0.187, 0.143, 0.223, 0.038];
    for (k, &p) in probs.iter().enumerate() {
        let d = Categorical::new(&probs).unwrap();
        out.push(case(format!("categorical[{k}]"), p, p * (1.0 - p), move |r| (d.sample(r) == k) as u8 as f64));
    }
    for p in [0.03, 0.5, 0.9] {
        let d = Bernoulli::new(p).unwrap();
        out.push(case(format!("bernoulli({p})"), p, p * (1.0 - p), move |r| d.sample(r) as u8 as f64));
    }
    for l in [0.2, 3.5, 9.9, 10.0, 47.0, 900.0] {
        let d = Poisson::new(l).unwrap();
        out.push(case(format!("poisson({l})"), l, l, move |r| d.sample(r) as f64));
    }
    for (m, a) in [(0.8, 0.5), (2.0, 2.0), (15.0, 10.0), (4.0, 1e6)] {
        let d = NegBinomial::new(m, a).unwrap();
        out.push(case(format!("negbinomial({m}, {a})"), m, m + m * m / a, move |r| d.sample(r) as f64));
    }
    let pi = std::f64::consts::PI;
    let h = HalfNormal::new(2.0).unwrap();
    out.push(case("halfnormal(2)".into(), 2.0 * (2.0 / pi).sqrt(), 4.0 * (1.0 - 2.0 / pi), move |r| h.sample(r)));
    let n = Normal::new(-3.0, 0.7).unwrap();
    out.push(case("normal(-3, 0.7)".into(), -3.0, 0.49, move |r| n.sample(r)));
    let u = Uniform::new(-1.0, 4.0).unwrap();
    out.push(case("uniform(-1, 4)".into(), 1.5, 25.0 / 12.0, move |r| u.sample(r)));
    let std = statrs::distribution::Normal::new(0.0, 1.0).unwrap();
    for (mu, s, lo) in [(5.0, 2.0, 0.0), (0.0, 1.0, 0.5), (1.0, 1.0, 4.5), (-20.0, 3.0, 0.0)] {
        let d = TruncatedNormal::new(mu, s, lo).unwrap();
        let a: f64 = (lo - mu) / s;
        let lam = std.pdf(a) / std.sf(a);
        let mean = mu + s * lam;
        let var = s * s * (1.0 + a * lam - lam * lam);
        out.push(case(format!("truncnormal({mu}, {s}, {lo})"), mean, var, move |r| d.sample(r)));
    }
    let comps = [(20.0, 100.0), (44.0, 55.0), (9.0, 5.0)];
    let w = [0.5, 0.35, 0.15];
    let mean: f64 = comps.iter().zip(w).map(|((a, b), w)| w * a / b).sum();
    let second: f64 = comps.iter().zip(w).map(|((a, b), w)| w * (a / (b * b) + (a / b) * (a / b))).sum();
    let d = GammaMixture::new(comps.iter().map(|&(a, b)| Gamma::new(a, b).unwrap()).collect(), w.to_vec()).unwrap();
    out.push(case("gamma mixture".into(), mean, second - mean * mean, move |r| d.sample(r)));
    out
}
