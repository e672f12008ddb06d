use gridsynth::kernel::{
    Bernoulli, Beta, Categorical, Dirichlet, Gamma, GammaMixture, HalfNormal, Moments, NegBinomial, Normal, Poisson, Rng,
    TruncatedNormal, Uniform, Weibull,
};

mod common;
use common::check_moments;

const N: usize = 100_000;
const SUPPORT_N: usize = 1_000_000;

fn draws(seed: u64, mut f: impl FnMut(&mut Rng) -> f64) -> Vec<f64> {
    let mut rng = Rng::new(seed);
    (0..N).map(|_| f(&mut rng)).collect()
}

fn check<D: Moments>(name: &str, d: &D, seed: u64, f: impl FnMut(&mut Rng) -> f64) {
    check_moments(name, &draws(seed, f), d.mean(), d.variance());
}

#[test]
fn gamma() {
    for (i, (a, b)) in [(0.3, 1.0), (1.0, 2.0), (2.5, 0.5), (40.0, 8.0)].into_iter().enumerate() {
        let d = Gamma::new(a, b).unwrap();
        check(&format!("gamma({a}, {b})"), &d, 100 + i as u64, |r| d.sample(r));
    }
}

#[test]
fn weibull() {
    for (i, (k, l)) in [(0.8, 1.5), (1.5, 2.0), (3.0, 0.7)].into_iter().enumerate() {
        let d = Weibull::new(k, l).unwrap();
        check(&format!("weibull({k}, {l})"), &d, 200 + i as u64, |r| d.sample(r));
    }
}

#[test]
fn beta() {
    for (i, (a, b)) in [(0.5, 0.5), (2.0, 5.0), (30.0, 3.0)].into_iter().enumerate() {
        let d = Beta::new(a, b).unwrap();
        check(&format!("beta({a}, {b})"), &d, 300 + i as u64, |r| d.sample(r));
    }
}

#[test]
fn dirichlet_components() {
    let alpha = vec![0.4, 1.0, 2.5, 6.0];
    let a0: f64 = alpha.iter().sum();
    let d = Dirichlet::new(alpha.clone()).unwrap();
    let mut rng = Rng::new(400);
    let xs: Vec<Vec<f64>> = (0..N).map(|_| d.sample(&mut rng)).collect();
    for (k, &ak) in alpha.iter().enumerate() {
        let col: Vec<f64> = xs.iter().map(|x| x[k]).collect();
        let mean = ak / a0;
        let var = ak * (a0 - ak) / (a0 * a0 * (a0 + 1.0));
        check_moments(&format!("dirichlet[{k}]"), &col, mean, var);
    }
}

#[test]
fn categorical_frequencies() {
    let p = [0.142, 0.137, 0.131, 0.187, 0.143, 0.223, 0.038];
    let d = Categorical::new(&p).unwrap();
    let mut rng = Rng::new(500);
    let ks: Vec<usize> = (0..N).map(|_| d.sample(&mut rng)).collect();
    for (k, &pk) in p.iter().enumerate() {
        let ind: Vec<f64> = ks.iter().map(|&x| (x == k) as u8 as f64).collect();
        check_moments(&format!("categorical[{k}]"), &ind, pk, pk * (1.0 - pk));
    }
}

#[test]
fn bernoulli() {
    for (i, p) in [0.03, 0.5, 0.9].into_iter().enumerate() {
        let d = Bernoulli::new(p).unwrap();
        check(&format!("bernoulli({p})"), &d, 600 + i as u64, |r| d.sample(r) as u8 as f64);
    }
}

#[test]
fn poisson_both_samplers() {
    // below 10 uses multiplication of uniforms, above uses transformed rejection
    for (i, l) in [0.2, 3.5, 9.9, 10.0, 47.0, 900.0].into_iter().enumerate() {
        let d = Poisson::new(l).unwrap();
        check(&format!("poisson({l})"), &d, 700 + i as u64, |r| d.sample(r) as f64);
    }
}

#[test]
fn negative_binomial() {
    for (i, (m, a)) in [(0.8, 0.5), (2.0, 2.0), (15.0, 10.0), (4.0, 1e6)].into_iter().enumerate() {
        let d = NegBinomial::new(m, a).unwrap();
        check(&format!("negbinomial({m}, {a})"), &d, 800 + i as u64, |r| d.sample(r) as f64);
    }
}

#[test]
fn normal_family() {
    let h = HalfNormal::new(2.0).unwrap();
    check("halfnormal(2)", &h, 900, |r| h.sample(r));
    let n = Normal::new(-3.0, 0.7).unwrap();
    check("normal(-3, 0.7)", &n, 901, |r| n.sample(r));
    let u = Uniform::new(-1.0, 4.0).unwrap();
    check("uniform(-1, 4)", &u, 902, |r| u.sample(r));
}

#[test]
fn truncated_normal_both_regimes() {
    // lower bound below, near and far above the mean
    for (i, (mu, s, lo)) in [(5.0, 2.0, 0.0), (0.0, 1.0, 0.5), (1.0, 1.0, 4.5), (-20.0, 3.0, 0.0)]
        .into_iter()
        .enumerate()
    {
        let d = TruncatedNormal::new(mu, s, lo).unwrap();
        check(&format!("truncnormal({mu}, {s}, {lo})"), &d, 1000 + i as u64, |r| d.sample(r));
    }
}

#[test]
fn gamma_mixture() {
    let comps = vec![
        Gamma::new(20.0, 100.0).unwrap(),
        Gamma::new(44.0, 55.0).unwrap(),
        Gamma::new(9.0, 5.0).unwrap(),
    ];
    let d = GammaMixture::new(comps, vec![0.5, 0.35, 0.15]).unwrap();
    check("gamma mixture", &d, 1100, |r| d.sample(r));
}

#[test]
fn dirichlet_draws_stay_on_the_simplex() {
    for (i, alpha) in [vec![0.05, 0.05, 0.05], vec![1.0; 7], vec![0.3, 50.0]].into_iter().enumerate() {
        let d = Dirichlet::new(alpha).unwrap();
        let mut rng = Rng::new(1200 + i as u64);
        for _ in 0..SUPPORT_N {
            let x = d.sample(&mut rng);
            assert!(x.iter().all(|v| (0.0..=1.0).contains(v)), "{x:?}");
            assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-12, "{x:?}");
        }
    }
}

#[test]
fn truncated_normal_respects_its_lower_bound() {
    for (i, (mu, s, lo)) in [(0.0, 1.0, 0.0), (0.0, 1.0, 1.2), (0.0, 1.0, 8.0), (3.0, 0.1, 0.0)].into_iter().enumerate() {
        let d = TruncatedNormal::new(mu, s, lo).unwrap();
        let mut rng = Rng::new(1300 + i as u64);
        for _ in 0..SUPPORT_N {
            let x = d.sample(&mut rng);
            assert!(x >= lo && x.is_finite(), "draw {x} below {lo}");
        }
    }
}

#[test]
fn substreams_are_reproducible_and_distinct() {
    let a: Vec<f64> = {
        let mut r = Rng::substream(7, 3, "load");
        (0..5).map(|_| r.uniform()).collect()
    };
    let b: Vec<f64> = {
        let mut r = Rng::substream(7, 3, "load");
        (0..5).map(|_| r.uniform()).collect()
    };
    let c: Vec<f64> = {
        let mut r = Rng::substream(7, 4, "load");
        (0..5).map(|_| r.uniform()).collect()
    };
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn moments_match_independent_closed_forms() {
    for (i, mut c) in common::moment_cases().into_iter().enumerate() {
        let xs = draws(5000 + i as u64, &mut c.draw);
        check_moments(&c.name, &xs, c.mean, c.var);
    }
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

#[test]
fn worked_sampler_cases() {
    let g = Gamma::new(4.0, 4.0).unwrap();
    let (m, _) = mean_and_se(&draws(1400, |r| g.sample(r)));
    assert!((m - 1.0).abs() <= 3.0 * 0.5 / (N as f64).sqrt(), "gamma(4, 4) mean {m}");

    let w = Weibull::new(1.0, 2.0).unwrap();
    let (m, se) = mean_and_se(&draws(1401, |r| w.sample(r)));
    assert!((m - 2.0).abs() <= 3.0 * se, "weibull(1, 2) mean {m}");

    let nb = NegBinomial::new(2.0, 1.0).unwrap();
    check_moments("negbinomial(2, 1)", &draws(1402, |r| nb.sample(r) as f64), 2.0, 6.0);

    let comps = vec![Gamma::new(4.0, 4.0).unwrap(), Gamma::new(4.0, 4.0 / 3.0).unwrap()];
    let mix = GammaMixture::new(comps, vec![0.5, 0.5]).unwrap();
    let (m, se) = mean_and_se(&draws(1403, |r| mix.sample(r)));
    assert!((m - 2.0).abs() <= 3.0 * se, "mixture mean {m}");
}

#[test]
fn gamma_density_integrates_to_one() {
    let g = Gamma::new(4.0, 4.0).unwrap();
    let h = 1e-4;
    let xs: Vec<f64> = (0..=200_000).map(|i| i as f64 * h).collect();
    let f: Vec<f64> = xs.iter().map(|&x| if x > 0.0 { g.ln_pdf(x).exp() } else { 0.0 }).collect();
    let area = h * (f.iter().sum::<f64>() - 0.5 * (f[0] + f[f.len() - 1]));
    assert!((area - 1.0).abs() < 1e-3, "area {area}");
}
