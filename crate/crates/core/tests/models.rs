use gridsynth::carson::{positive_sequence, LineConstruction};
use gridsynth::inference::FitConfig;
use gridsynth::kernel::{Categorical, NegBinomial, Poisson, Rng, Weibull};
use gridsynth::line::{fit_line_model, gamma_from_mean_cv, sample_line, LinePriors, MixtureDraw};
use gridsynth::load::{fit_load_model, sample_demand, LoadDraw, LoadObservation, LoadPriors};
use gridsynth::phase::PhaseConfig;
use gridsynth::reliability::{fit_caidi, fit_caifi, sample_caidi, sample_caifi, CaidiDraw, CaifiDraw, ReliabilityPriors};
use proptest::prelude::*;
use statrs::function::gamma::gamma;

fn quick(seed: u64) -> FitConfig {
    FitConfig {
        warmup: 800,
        draws: 800,
        thin: 2,
        ..FitConfig::default()
    }
    .with_seed(seed)
}

fn truth_load() -> LoadDraw {
    LoadDraw {
        alpha_hp: 2.0,
        beta_hp: 0.5,
        alpha: [4.0; 3],
        beta: [1.0; 3],
        p_pot: [3.0, 7.0, 15.0],
        delta_bi: 0.6,
        delta_tri: [0.3, 0.33, 0.37],
        sigma_p: 0.8,
    }
}

#[test]
fn sampled_demand_is_nonnegative_and_sparse() {
    // mean near zero on purpose so the truncation is exercised
    let draw = LoadDraw {
        p_pot: [0.2, 0.4, 0.6],
        sigma_p: 1.0,
        ..truth_load()
    };
    let mut rng = Rng::new(3);
    for i in 0..1_000_000 {
        let c = PhaseConfig::ALL[i % 7];
        let d = sample_demand(&draw, c, 0.9, &mut rng).unwrap();
        for p in 0..3 {
            if c.phases()[p] {
                assert!(d.p_kw[p] >= 0.0);
            } else {
                assert_eq!((d.p_kw[p], d.q_kvar[p]), (0.0, 0.0));
            }
        }
    }
}

#[test]
fn predictive_total_demand_matches_training_mean() {
    let truth = truth_load();
    let mut rng = Rng::new(17);
    let mix = Categorical::new(&[0.2, 0.2, 0.2, 0.08, 0.08, 0.08, 0.16]).unwrap();
    let obs: Vec<LoadObservation> = (0..1500)
        .map(|_| {
            let config = PhaseConfig::ALL[mix.sample(&mut rng)];
            let p_kw = sample_demand(&truth, config, 0.9, &mut rng).unwrap().p_kw;
            LoadObservation { config, p_kw }
        })
        .collect();
    let post = fit_load_model(&obs, &LoadPriors::default(), &quick(5)).unwrap();
    assert!(post.diagnostics.max_rhat() < 1.1, "R-hat {}", post.diagnostics.max_rhat());

    let n = 40_000;
    let mut total = 0.0;
    for _ in 0..n {
        let draw = &post.draws[rng.below(post.draws.len())];
        let config = obs[rng.below(obs.len())].config;
        total += sample_demand(draw, config, 0.9, &mut rng).unwrap().total_kw();
    }
    let predicted = total / n as f64;
    let observed = post.observed_mean_total_kw;
    assert!(
        (predicted - observed).abs() <= 0.05 * observed,
        "predictive mean {predicted} vs training mean {observed}"
    );
}

#[test]
fn caidi_zero_fraction_matches_hurdle() {
    let draw = CaidiDraw {
        p: vec![0.3, 0.75, 0.98],
        shape: vec![1.2, 0.8, 2.0],
        scale: vec![2.0, 3.0, 1.0],
    };
    let n = 100_000;
    for z in 1..=3 {
        let mut rng = Rng::new(z as u64);
        let zeros = (0..n).filter(|_| sample_caidi(&draw, z, &mut rng).unwrap() == 0.0).count();
        let q = 1.0 - draw.p[z - 1];
        let se = (q * (1.0 - q) / n as f64).sqrt();
        let frac = zeros as f64 / n as f64;
        assert!((frac - q).abs() <= 3.0 * se, "zone {z}: zero fraction {frac} vs {q}");
    }
}

proptest! {
    #[test]
    fn caifi_and_caidi_stay_on_support(
        mu in prop::collection::vec(0.01f64..30.0, 1..5),
        dispersion in 0.05f64..50.0,
        p in 0.0f64..1.0,
        seed in any::<u64>(),
    ) {
        let f = CaifiDraw { mu: mu.clone(), dispersion };
        let d = CaidiDraw { p: vec![p; mu.len()], shape: vec![0.7; mu.len()], scale: vec![2.0; mu.len()] };
        let mut rng = Rng::new(seed);
        for z in 1..=mu.len() {
            for _ in 0..50 {
                // u64 already rules out negatives; the call must not error either
                sample_caifi(&f, z, &mut rng).unwrap();
                let h = sample_caidi(&d, z, &mut rng).unwrap();
                prop_assert!(h >= 0.0 && h.is_finite());
            }
        }
        prop_assert!(sample_caifi(&f, mu.len() + 1, &mut rng).is_err());
    }
}

#[test]
fn worked_reliability_sampler_cases() {
    let n = 100_000;
    let mean_se = |xs: &[f64]| {
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        (m, (v / xs.len() as f64).sqrt())
    };
    for (p, expected) in [(1.0, 2.0), (0.5, 1.0)] {
        let d = CaidiDraw {
            p: vec![p],
            shape: vec![1.0],
            scale: vec![2.0],
        };
        let mut rng = Rng::new(40);
        let xs: Vec<f64> = (0..n).map(|_| sample_caidi(&d, 1, &mut rng).unwrap()).collect();
        let (m, se) = mean_se(&xs);
        assert!((m - expected).abs() <= 3.0 * se, "p {p}: mean {m} vs {expected}");
    }

    let mut rng = Rng::new(41);
    let rare = CaifiDraw {
        mu: vec![0.001],
        dispersion: 1.0,
    };
    let zeros = (0..n).filter(|_| sample_caifi(&rare, 1, &mut rng).unwrap() == 0).count();
    assert!(zeros as f64 >= 0.998 * n as f64, "{zeros} zeros");

    for (dispersion, var) in [(1.0, 6.0), (1e9, 2.0)] {
        let d = CaifiDraw {
            mu: vec![2.0],
            dispersion,
        };
        let mut rng = Rng::new(42);
        let xs: Vec<f64> = (0..n).map(|_| sample_caifi(&d, 1, &mut rng).unwrap() as f64).collect();
        let (m, _) = mean_se(&xs);
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        // sd of the sample variance is about var * sqrt(2 / n) for these shapes; 5% is several of those
        assert!((v - var).abs() <= 0.05 * var, "dispersion {dispersion}: variance {v} vs {var}");
    }
}

#[test]
fn equidispersed_counts_push_dispersion_high() {
    let mut rng = Rng::new(31);
    let pois = Poisson::new(2.0).unwrap();
    let counts: Vec<u64> = (0..3000).map(|_| pois.sample(&mut rng)).collect();
    let zones = vec![1; counts.len()];
    // the unit default prior keeps dispersion near 1, so widen it
    let wide = ReliabilityPriors {
        dispersion_scale: 100.0,
        ..Default::default()
    };
    let post = fit_caifi(&zones, &counts, 1, &wide, &quick(3)).unwrap();
    let mut a: Vec<f64> = post.draws.iter().map(|d| d.dispersion).collect();
    a.sort_by(f64::total_cmp);
    let q05 = a[a.len() / 20];
    assert!(q05 > 10.0, "5% quantile of dispersion {q05}");
}

struct ReliabilityData {
    zones: Vec<usize>,
    hours: Vec<f64>,
    counts: Vec<u64>,
}

fn reliability_data(scale: f64, seed: u64) -> ReliabilityData {
    let p = [0.4, 0.6, 0.8];
    let shape = [1.4, 1.0, 0.8];
    let lam = [1.0, 1.5, 2.5];
    let mu = [0.7, 1.2, 2.0];
    let mut rng = Rng::new(seed);
    let mut out = ReliabilityData {
        zones: Vec::new(),
        hours: Vec::new(),
        counts: Vec::new(),
    };
    for i in 0..900 {
        let z = i % 3;
        out.zones.push(z + 1);
        let h = if rng.uniform() < p[z] {
            Weibull::new(shape[z], lam[z] * scale).unwrap().sample(&mut rng)
        } else {
            0.0
        };
        out.hours.push(h);
        out.counts.push(NegBinomial::new(mu[z] * scale, 1.5).unwrap().sample(&mut rng));
    }
    out
}

fn predictive_means(data: &ReliabilityData, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let pr = ReliabilityPriors::default();
    let d = fit_caidi(&data.zones, &data.hours, 3, &pr, &quick(seed)).unwrap();
    let f = fit_caifi(&data.zones, &data.counts, 3, &pr, &quick(seed + 1)).unwrap();
    let caidi = (0..3)
        .map(|z| {
            d.draws
                .iter()
                .map(|w| w.p[z] * w.scale[z] * gamma(1.0 + 1.0 / w.shape[z]))
                .sum::<f64>()
                / d.draws.len() as f64
        })
        .collect();
    let caifi = (0..3)
        .map(|z| f.draws.iter().map(|w| w.mu[z]).sum::<f64>() / f.draws.len() as f64)
        .collect();
    (caidi, caifi)
}

#[test]
fn scaled_up_reliability_data_transfers_monotonically() {
    let base = predictive_means(&reliability_data(1.0, 8), 40);
    let scaled = predictive_means(&reliability_data(1.6, 8), 40);
    for z in 0..3 {
        assert!(scaled.0[z] > base.0[z], "zone {}: CAIDI {} vs {}", z + 1, scaled.0[z], base.0[z]);
        assert!(scaled.1[z] > base.1[z], "zone {}: CAIFI {} vs {}", z + 1, scaled.1[z], base.1[z]);
    }
}

#[test]
fn separated_mixture_has_three_modes() {
    let truth = MixtureDraw {
        means: [0.2, 0.8, 1.6],
        cv: 0.1,
        weights: vec![[1.0 / 3.0; 3]],
    };
    let construction = LineConstruction::default();
    let mut rng = Rng::new(50);
    let width = 0.01;
    let mut hist = vec![0usize; 250];
    for _ in 0..100_000 {
        let line = sample_line(&truth, &truth, 1, PhaseConfig::ABC, &construction, &mut rng).unwrap();
        let bin = (line.r1_ohm_per_km / width) as usize;
        if bin < hist.len() {
            hist[bin] += 1;
        }
    }
    // search each region between neighbouring midpoints for its peak
    let cuts = [0.0, 0.5, 1.2, 2.5];
    let peaks: Vec<usize> = (0..3)
        .map(|k| {
            let (lo, hi) = ((cuts[k] / width) as usize, (cuts[k + 1] / width) as usize);
            (lo..hi).max_by_key(|&i| hist[i]).unwrap()
        })
        .collect();
    for (k, &p) in peaks.iter().enumerate() {
        let mode = (p as f64 + 0.5) * width;
        let m = truth.means[k];
        assert!((mode - m).abs() <= 0.1 * m, "component {k}: mode {mode} vs mean {m}");
    }
    for w in peaks.windows(2) {
        let valley = hist[w[0]..w[1]].iter().min().unwrap();
        assert!(2 * valley < hist[w[0]].min(hist[w[1]]), "no dip between bins {} and {}", w[0], w[1]);
    }
}

#[test]
fn line_draws_are_ordered_and_build_valid_matrices() {
    let r_means = [0.2, 0.8, 1.6];
    let x_means = [0.5, 1.2, 2.5];
    let mut rng = Rng::new(12);
    let (mut zones, mut r1, mut ratio) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..600 {
        let z = i % 2;
        let w = if z == 0 { [0.6, 0.3, 0.1] } else { [0.2, 0.4, 0.4] };
        let k = Categorical::new(&w).unwrap().sample(&mut rng);
        zones.push(z + 1);
        r1.push(gamma_from_mean_cv(r_means[k], 0.15).unwrap().sample(&mut rng));
        ratio.push(gamma_from_mean_cv(x_means[k], 0.15).unwrap().sample(&mut rng));
    }
    let post = fit_line_model(&zones, &r1, &ratio, 2, &LinePriors::default(), &quick(21)).unwrap();
    for d in post.resistance.iter().chain(&post.ratio) {
        assert!(d.means.windows(2).all(|w| w[0] < w[1]), "{:?}", d.means);
    }

    let construction = LineConstruction::default();
    for (i, (r, x)) in post.resistance.iter().zip(&post.ratio).enumerate().step_by(7) {
        let config = PhaseConfig::ALL[i % 7];
        let line = sample_line(r, x, 1 + i % 2, config, &construction, &mut rng).unwrap();
        let z = &line.z_abc;
        for a in 0..3 {
            for b in 0..3 {
                assert!((z[a][b] - z[b][a]).norm() <= 1e-12);
            }
            if config.phases()[a] {
                assert!(z[a][a].re > 0.0);
            }
        }
        let full = sample_line(r, x, 1, PhaseConfig::ABC, &construction, &mut Rng::new(i as u64)).unwrap();
        let z1 = positive_sequence(&full.z_abc);
        assert!((z1.re - full.r1_ohm_per_km).abs() <= 0.1 * full.r1_ohm_per_km, "{z1} vs r1 {}", full.r1_ohm_per_km);
        assert!((z1.im - full.x1_ohm_per_km).abs() <= 0.1 * full.x1_ohm_per_km, "{z1} vs x1 {}", full.x1_ohm_per_km);
    }
}
