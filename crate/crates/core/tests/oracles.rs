//! Checks against quantities computed independently of the library.

use approx::assert_relative_eq;
use rand::Rng;
use rand_distr::{Distribution, Exp};
use statrs::distribution::{ContinuousCDF, Normal};
use winratio_core::parametric_oracles::{wp_bernoulli, wp_exponential, wp_normal, wp_ordinal_categorical};
use winratio_core::{
    hodges_lehmann, strata_weights, streams, stratified_wp, van_elteren, wilcoxon_test, wp_test, StratifiedData,
    Stratum, TwoSample, WeightScheme,
};

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).unwrap()
}

fn score(a: f64, b: f64) -> f64 {
    if a > b {
        1.0
    } else if a == b {
        0.5
    } else {
        0.0
    }
}

fn tied_sample(seed: u64, n1: usize, n2: usize) -> TwoSample<f64> {
    let mut rng = streams::stream(seed, 0);
    let y1 = (0..n1).map(|_| rng.random_range(0..8) as f64).collect();
    let y2 = (0..n2).map(|_| rng.random_range(1..9) as f64).collect();
    TwoSample::new(y1, y2).unwrap()
}

#[test]
fn normal_closed_form_matches_statrs() {
    for (m1, s1, m2, s2) in [(0.0_f64, 1.0, 1.0, 1.0), (2.0, 4.0, 4.0, 2.0), (1.0, 0.5, -1.0, 3.0)] {
        let expected = std_normal().cdf((m2 - m1) / f64::sqrt(s1 * s1 + s2 * s2));
        assert_relative_eq!(wp_normal(m1, s1, m2, s2).unwrap(), expected, epsilon = 1e-12);
    }
}

#[test]
fn bernoulli_and_categorical_by_enumeration() {
    let (p, q) = (0.7, 0.4);
    let expected = p * (1.0 - q) + 0.5 * (p * q + (1.0 - p) * (1.0 - q));
    assert_relative_eq!(wp_bernoulli(p, q).unwrap(), expected, epsilon = 1e-15);

    let placebo = [0.2, 0.3, 0.1, 0.4];
    let active = [0.1, 0.2, 0.3, 0.4];
    let mut brute = 0.0;
    for (j, pa) in active.iter().enumerate() {
        for (i, pp) in placebo.iter().enumerate() {
            brute += pa * pp * score(j as f64, i as f64);
        }
    }
    assert_relative_eq!(wp_ordinal_categorical(&placebo, &active).unwrap(), brute, epsilon = 1e-15);
}

#[test]
fn exponential_closed_form_by_simulation() {
    // placebo rate 0.5, active rate 0.25: active survives longer
    let (theta, kappa) = wp_exponential(0.5, 0.25).unwrap();
    let mut rng = streams::stream(11, 0);
    let (e1, e2) = (Exp::new(0.5).unwrap(), Exp::new(0.25).unwrap());
    let m = 400_000;
    let wins = (0..m).filter(|_| e2.sample(&mut rng) > e1.sample(&mut rng)).count() as f64 / m as f64;
    assert!((wins - theta).abs() < 4.0 * (theta * (1.0 - theta) / m as f64).sqrt());
    assert_relative_eq!(kappa, theta / (1.0 - theta), epsilon = 1e-12);
}

#[test]
fn wp_test_against_brute_force_placements() {
    let s = tied_sample(5, 23, 31);
    let (y1, y2) = (s.placebo(), s.active());
    let (n1, n2) = (y1.len() as f64, y2.len() as f64);
    let p: Vec<f64> = y2.iter().map(|&a| y1.iter().map(|&b| score(a, b)).sum::<f64>() / n1).collect();
    let q: Vec<f64> = y1.iter().map(|&b| y2.iter().map(|&a| score(a, b)).sum::<f64>() / n2).collect();
    let theta = p.iter().sum::<f64>() / n2;
    let var = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)
    };
    let se = (var(&p) / n2 + var(&q) / n1).sqrt();
    let est = wp_test(&s, 0.05).unwrap();
    assert_relative_eq!(est.estimate, theta, epsilon = 1e-14);
    assert_relative_eq!(est.se, se, epsilon = 1e-14);
    let z = (theta - 0.5) / se;
    assert_relative_eq!(est.z, z, epsilon = 1e-12);
    assert_relative_eq!(est.p_value, 2.0 * (1.0 - std_normal().cdf(z.abs())), epsilon = 1e-10);
    let c = std_normal().inverse_cdf(0.975);
    assert_relative_eq!(est.ci_lower, theta - c * se, epsilon = 1e-9);
    assert_relative_eq!(est.ci_upper, (theta + c * se).min(1.0), epsilon = 1e-9);
}

#[test]
fn wilcoxon_against_tie_corrected_textbook_variance() {
    let s = tied_sample(9, 17, 12);
    let mut pooled: Vec<f64> = s.placebo().iter().chain(s.active()).copied().collect();
    let n = pooled.len() as f64;
    let (n1, n2) = (s.n_placebo() as f64, s.n_active() as f64);
    // rank sum through counting: rank = #below + (#equal + 1)/2
    let w: f64 = s
        .active()
        .iter()
        .map(|&a| {
            let below = pooled.iter().filter(|&&x| x < a).count() as f64;
            let equal = pooled.iter().filter(|&&x| x == a).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .sum();
    pooled.sort_by(f64::total_cmp);
    let mut ties = 0.0;
    let mut i = 0;
    while i < pooled.len() {
        let t = pooled[i..].iter().take_while(|&&x| x == pooled[i]).count();
        ties += (t * t * t - t) as f64;
        i += t;
    }
    let var = n1 * n2 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    let z = (w - n2 * (n + 1.0) / 2.0) / var.sqrt();
    let r = wilcoxon_test(&s).unwrap();
    assert_eq!(r.rank_sum, Some(w));
    assert_relative_eq!(r.z, z, epsilon = 1e-12);
}

#[test]
fn hodges_lehmann_is_median_of_differences() {
    let s = tied_sample(3, 6, 7);
    let mut d: Vec<f64> = s
        .active()
        .iter()
        .flat_map(|&a| s.placebo().iter().map(move |&b| a - b))
        .collect();
    d.sort_by(f64::total_cmp);
    let m = d.len();
    let median = if m % 2 == 1 {
        d[m / 2]
    } else {
        0.5 * (d[m / 2 - 1] + d[m / 2])
    };
    assert_eq!(hodges_lehmann(&s).unwrap(), median);
}

#[test]
fn stratified_estimate_is_weighted_mean() {
    let a = tied_sample(21, 10, 14);
    let b = tied_sample(22, 30, 25);
    let data = StratifiedData::new(
        vec![Stratum::new("a", a.clone()), Stratum::new("b", b.clone())],
        WeightScheme::SampleSize,
    )
    .unwrap();
    let (ta, tb) = (wp_test(&a, 0.05).unwrap(), wp_test(&b, 0.05).unwrap());
    let wa = 10.0 * 14.0 / 24.0;
    let wb = 30.0 * 25.0 / 55.0;
    let (wa, wb) = (wa / (wa + wb), wb / (wa + wb));
    let est = stratified_wp(&data, 0.05).unwrap();
    assert_relative_eq!(est.estimate.estimate, wa * ta.estimate + wb * tb.estimate, epsilon = 1e-14);
    let se = (wa * wa * ta.se * ta.se + wb * wb * tb.se * tb.se).sqrt();
    assert_relative_eq!(est.estimate.se, se, epsilon = 1e-14);
}

#[test]
fn van_elteren_weights_and_statistic() {
    let w = strata_weights(&[(4, 6), (10, 10)], &WeightScheme::VanElteren).unwrap();
    let (c1, c2) = (24.0 / 11.0, 100.0 / 21.0);
    assert_relative_eq!(w[0], c1 / (c1 + c2), epsilon = 1e-15);

    // sum of within-stratum Wilcoxon statistics weighted by 1/(N_h + 1)
    let a = tied_sample(31, 12, 9);
    let b = tied_sample(32, 15, 20);
    let data = StratifiedData::new(
        vec![Stratum::new("a", a.clone()), Stratum::new("b", b.clone())],
        WeightScheme::VanElteren,
    )
    .unwrap();
    let mut num = 0.0;
    let mut var = 0.0;
    for s in [&a, &b] {
        let r = wilcoxon_test(s).unwrap();
        let (n1, n2) = (s.n_placebo() as f64, s.n_active() as f64);
        let n = n1 + n2;
        let centred = r.rank_sum.unwrap() - n2 * (n + 1.0) / 2.0;
        let sd = centred / r.z;
        num += centred / (n + 1.0);
        var += (sd / (n + 1.0)).powi(2);
    }
    assert_relative_eq!(van_elteren(&data).unwrap().z, num / var.sqrt(), epsilon = 1e-12);
}
