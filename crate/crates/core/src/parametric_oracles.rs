//! Closed-form win probabilities for common parametric families, sampling
//! from those families, and a Monte-Carlo estimate of the asymptotic
//! variance components of θ̂.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;
use crate::outcome::win_score;
use crate::streams;

/// A response distribution. Higher values are better.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum DistSpec {
    Normal { mean: f64, sd: f64 },
    /// Uniform on [δ, a + δ].
    UniformShift { a: f64, delta: f64 },
    Exponential { rate: f64 },
    /// 1 with probability `p`, else 0.
    Bernoulli { p: f64 },
    /// Categories 1..=K with the given probabilities.
    OrdinalCategorical { probs: Vec<f64> },
}

const PROB_SUM_TOLERANCE: f64 = 1e-9;

fn check_probability(p: f64, what: &str) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} must lie in [0, 1], got {p}")))
    }
}

fn check_probs(probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::invalid("categorical distribution needs at least one category"));
    }
    if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
        return Err(Error::invalid("category probabilities must be non-negative"));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > PROB_SUM_TOLERANCE {
        return Err(Error::invalid(format!("category probabilities sum to {total}, not 1")));
    }
    Ok(())
}

fn check_positive(x: f64, what: &str) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} must be positive, got {x}")))
    }
}

impl DistSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            DistSpec::Normal { mean, sd } => {
                if !mean.is_finite() {
                    return Err(Error::invalid("normal mean must be finite"));
                }
                check_positive(*sd, "standard deviation")
            }
            DistSpec::UniformShift { a, delta } => {
                check_positive(*a, "uniform width a")?;
                if !(0.0..=*a).contains(delta) {
                    return Err(Error::invalid(format!("shift {delta} outside [0, {a}]")));
                }
                Ok(())
            }
            DistSpec::Exponential { rate } => check_positive(*rate, "rate"),
            DistSpec::Bernoulli { p } => check_probability(*p, "success probability"),
            DistSpec::OrdinalCategorical { probs } => check_probs(probs),
        }
    }

    /// Quantile transform of a latent standard normal value. Feeding
    /// correlated latents gives a Gaussian copula.
    pub fn from_latent(&self, z: f64) -> f64 {
        match self {
            DistSpec::Normal { mean, sd } => mean + sd * z,
            DistSpec::UniformShift { a, delta } => delta + a * normal::cdf(z),
            // 1 − Φ(z) = Φ(−z) keeps precision in the upper tail
            DistSpec::Exponential { rate } => -normal::cdf(-z).ln() / rate,
            DistSpec::Bernoulli { p } => {
                if normal::cdf(-z) < *p {
                    1.0
                } else {
                    0.0
                }
            }
            DistSpec::OrdinalCategorical { probs } => {
                let u = normal::cdf(z);
                let mut cumulative = 0.0;
                for (k, p) in probs.iter().enumerate() {
                    cumulative += p;
                    if u < cumulative {
                        return (k + 1) as f64;
                    }
                }
                probs.iter().rposition(|&p| p > 0.0).map_or(1.0, |k| (k + 1) as f64)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.from_latent(rng.sample(StandardNormal))
    }

    pub fn sample_n<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.sample(rng)).collect()
    }
}

/// θ = Φ((m₂ − m₁)/√(s₁² + s₂²)) for normal placebo (m₁, s₁) and active (m₂, s₂).
pub fn wp_normal(m1: f64, s1: f64, m2: f64, s2: f64) -> Result<f64> {
    check_positive(s1, "placebo standard deviation")?;
    check_positive(s2, "active standard deviation")?;
    Ok(normal::cdf((m2 - m1) / (s1 * s1 + s2 * s2).sqrt()))
}

/// Placebo U[0, a] against active U[δ, a + δ].
pub fn wp_uniform_shift(a: f64, delta: f64) -> Result<f64> {
    DistSpec::UniformShift { a, delta }.validate()?;
    Ok(0.5 + (2.0 * a - delta) * delta / (2.0 * a * a))
}

/// Placebo rate λ, active rate φ: returns (θ, κ) = (λ/(λ + φ), λ/φ).
pub fn wp_exponential(lambda: f64, phi: f64) -> Result<(f64, f64)> {
    check_positive(lambda, "placebo rate")?;
    check_positive(phi, "active rate")?;
    Ok((lambda / (lambda + phi), lambda / phi))
}

/// Active-versus-placebo hazard ratio `hr`: returns (1/(1 + hr), 1/hr).
pub fn wp_prop_hazards(hr: f64) -> Result<(f64, f64)> {
    check_positive(hr, "hazard ratio")?;
    Ok((1.0 / (1.0 + hr), 1.0 / hr))
}

/// Active success probability `p` against placebo `q`.
pub fn wp_bernoulli(p: f64, q: f64) -> Result<f64> {
    check_probability(p, "active probability")?;
    check_probability(q, "placebo probability")?;
    Ok((p - q) / 2.0 + 0.5)
}

/// Placebo and active probabilities over the same ordered categories.
pub fn wp_ordinal_categorical(probs1: &[f64], probs2: &[f64]) -> Result<f64> {
    if probs1.len() != probs2.len() {
        return Err(Error::LengthMismatch {
            what: "active category probabilities",
            expected: probs1.len(),
            found: probs2.len(),
        });
    }
    check_probs(probs1)?;
    check_probs(probs2)?;
    let mut below = 0.0;
    let mut theta = 0.0;
    for (p1, p2) in probs1.iter().zip(probs2) {
        theta += p2 * below + 0.5 * p2 * p1;
        below += p1;
    }
    Ok(theta)
}

/// Closed-form θ for a placebo/active pair, where one exists.
pub fn closed_form_theta(placebo: &DistSpec, active: &DistSpec) -> Result<Option<f64>> {
    placebo.validate()?;
    active.validate()?;
    use DistSpec::*;
    let theta = match (placebo, active) {
        (Normal { mean: m1, sd: s1 }, Normal { mean: m2, sd: s2 }) => wp_normal(*m1, *s1, *m2, *s2)?,
        (UniformShift { a: a1, delta: d1 }, UniformShift { a: a2, delta: d2 }) if a1 == a2 => {
            if d2 >= d1 {
                wp_uniform_shift(*a1, d2 - d1)?
            } else {
                1.0 - wp_uniform_shift(*a1, d1 - d2)?
            }
        }
        (Exponential { rate: r1 }, Exponential { rate: r2 }) => {
            // longer survival wins, so a lower active rate is better
            wp_exponential(*r1, *r2)?.0
        }
        (Bernoulli { p: q }, Bernoulli { p }) => wp_bernoulli(*p, *q)?,
        (OrdinalCategorical { probs: p1 }, OrdinalCategorical { probs: p2 }) if p1.len() == p2.len() => {
            wp_ordinal_categorical(p1, p2)?
        }
        _ => return Ok(None),
    };
    Ok(Some(theta))
}

/// Asymptotic variance components of θ̂ with the tie-aware kernel
/// h(ξ, η) = 1{ξ < η} + ½·1{ξ = η}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceComponents {
    /// Cov(h(ξ, η), h(ξ, η′)): shared placebo draw.
    pub sigma10_sq: f64,
    /// Cov(h(ξ, η), h(ξ′, η)): shared active draw.
    pub sigma01_sq: f64,
    pub theta: f64,
    pub draws: u64,
}

impl VarianceComponents {
    /// Limit of N·var(θ̂) when n₁/N → λ.
    pub fn asymptotic_n_var(&self, lambda: f64) -> f64 {
        self.sigma10_sq / lambda + self.sigma01_sq / (1.0 - lambda)
    }
}

pub const MIN_VARIANCE_DRAWS: u64 = 100_000;
const BLOCK_DRAWS: u64 = 1 << 16;

#[derive(Default, Clone, Copy)]
struct KernelSums {
    h: f64,
    shared_placebo: f64,
    shared_active: f64,
}

/// Monte-Carlo estimate from `draws` independent quadruples (ξ, ξ′, η, η′).
/// Draws are generated in fixed blocks with their own streams, so the result
/// depends only on `(draws, seed)`.
pub fn variance_components_mc(
    placebo: &DistSpec,
    active: &DistSpec,
    draws: u64,
    seed: u64,
) -> Result<VarianceComponents> {
    placebo.validate()?;
    active.validate()?;
    if draws < MIN_VARIANCE_DRAWS {
        return Err(Error::invalid(format!(
            "variance components need at least {MIN_VARIANCE_DRAWS} draws, got {draws}"
        )));
    }
    let blocks = draws.div_ceil(BLOCK_DRAWS);
    let partial: Vec<KernelSums> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = streams::stream(seed, b);
            let count = BLOCK_DRAWS.min(draws - b * BLOCK_DRAWS);
            let mut sums = KernelSums::default();
            for _ in 0..count {
                let x = placebo.sample(&mut rng);
                let x2 = placebo.sample(&mut rng);
                let y = active.sample(&mut rng);
                let y2 = active.sample(&mut rng);
                let h = win_score(&y, &x);
                sums.h += h + win_score(&y2, &x) + win_score(&y, &x2);
                sums.shared_placebo += h * win_score(&y2, &x);
                sums.shared_active += h * win_score(&y, &x2);
            }
            sums
        })
        .collect();
    let total = partial.iter().fold(KernelSums::default(), |acc, s| KernelSums {
        h: acc.h + s.h,
        shared_placebo: acc.shared_placebo + s.shared_placebo,
        shared_active: acc.shared_active + s.shared_active,
    });
    let m = draws as f64;
    let theta = total.h / (3.0 * m);
    Ok(VarianceComponents {
        sigma10_sq: total.shared_placebo / m - theta * theta,
        sigma01_sq: total.shared_active / m - theta * theta,
        theta,
        draws,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::outcome::TwoSample;
    use crate::wincore::wp_test;

    #[test]
    fn normal_examples() {
        assert!((wp_normal(0.0, 1.0, 1.0, 1.0).unwrap() - 0.76).abs() < 0.005);
        assert!((wp_normal(0.0, 1.0, 1.0, 2.0).unwrap() - 0.67).abs() < 0.005);
        assert!((wp_normal(2.0, 4.0, 4.0, 2.0).unwrap() - 0.673).abs() < 0.0005);
        assert!(wp_normal(0.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn uniform_shift_values() {
        assert_eq!(wp_uniform_shift(3.0, 0.0).unwrap(), 0.5);
        assert_eq!(wp_uniform_shift(3.0, 3.0).unwrap(), 1.0);
        assert_eq!(wp_uniform_shift(1.0, 0.5).unwrap(), 0.875);
        assert!(wp_uniform_shift(1.0, 1.5).is_err());
        assert!(wp_uniform_shift(1.0, -0.1).is_err());
    }

    #[test]
    fn exponential_and_hazards() {
        assert_eq!(wp_exponential(2.0, 2.0).unwrap(), (0.5, 1.0));
        let (t, k) = wp_exponential(2.0, 1.0).unwrap();
        assert!((t - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(k, 2.0);
        assert_eq!(wp_prop_hazards(1.0).unwrap().0, 0.5);
        let (t, k) = wp_prop_hazards(0.5).unwrap();
        assert!((t - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(k, 2.0);
        assert!(wp_prop_hazards(0.0).is_err());
        for &(l, f) in &[(0.3, 1.7), (2.0, 0.1), (1.0, 1.0)] {
            let a = wp_exponential(l, f).unwrap();
            let b = wp_prop_hazards(f / l).unwrap();
            assert!((a.0 - b.0).abs() < 1e-15 && (a.1 - b.1).abs() < 1e-12);
        }
    }

    #[test]
    fn bernoulli_values() {
        assert_eq!(wp_bernoulli(0.3, 0.3).unwrap(), 0.5);
        // enumerate the four joint outcomes of (η, ξ)
        let (p, q) = (0.6, 0.4);
        let enumerated = p * (1.0 - q) + 0.5 * (p * q + (1.0 - p) * (1.0 - q));
        assert!((wp_bernoulli(p, q).unwrap() - enumerated).abs() < 1e-15);
        assert!((wp_bernoulli(p, q).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(wp_bernoulli(1.0, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn categorical_values() {
        assert!((wp_ordinal_categorical(&[1.0, 0.0], &[0.8, 0.2]).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(wp_ordinal_categorical(&[0.2, 0.5, 0.3], &[0.2, 0.5, 0.3]).unwrap(), 0.5);
        assert_eq!(wp_ordinal_categorical(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert!(wp_ordinal_categorical(&[1.0], &[0.5, 0.5]).is_err());
        assert!(wp_ordinal_categorical(&[0.5, 0.6], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn closed_forms_stay_in_unit_interval() {
        let specs = [
            DistSpec::Normal { mean: 1.0, sd: 2.0 },
            DistSpec::Normal { mean: -3.0, sd: 0.5 },
            DistSpec::UniformShift { a: 2.0, delta: 0.0 },
            DistSpec::UniformShift { a: 2.0, delta: 1.5 },
            DistSpec::Exponential { rate: 0.5 },
            DistSpec::Exponential { rate: 3.0 },
            DistSpec::Bernoulli { p: 0.1 },
            DistSpec::Bernoulli { p: 0.9 },
            DistSpec::OrdinalCategorical { probs: vec![0.1, 0.2, 0.7] },
            DistSpec::OrdinalCategorical { probs: vec![0.6, 0.3, 0.1] },
        ];
        for a in &specs {
            for b in &specs {
                if let Some(t) = closed_form_theta(a, b).unwrap() {
                    assert!((0.0..=1.0).contains(&t));
                    let back = closed_form_theta(b, a).unwrap().unwrap();
                    assert!((t + back - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn sampling_respects_support() {
        let mut rng = streams::stream(1, 0);
        let u = DistSpec::UniformShift { a: 2.0, delta: 0.5 };
        assert!(u.sample_n(&mut rng, 1000).iter().all(|v| (0.5..=2.5).contains(v)));
        let c = DistSpec::OrdinalCategorical { probs: vec![0.0, 1.0, 0.0] };
        assert!(c.sample_n(&mut rng, 100).iter().all(|&v| v == 2.0));
        let b = DistSpec::Bernoulli { p: 0.0 };
        assert!(b.sample_n(&mut rng, 100).iter().all(|&v| v == 0.0));
        let b = DistSpec::Bernoulli { p: 1.0 };
        assert!(b.sample_n(&mut rng, 100).iter().all(|&v| v == 1.0));
        let e = DistSpec::Exponential { rate: 2.0 };
        assert!(e.sample_n(&mut rng, 1000).iter().all(|&v| v >= 0.0 && v.is_finite()));
    }

    fn mc_theta(a: &DistSpec, b: &DistSpec, draws: usize, seed: u64) -> f64 {
        let mut rng = streams::stream(seed, 0);
        let mut total = 0.0;
        for _ in 0..draws {
            let x = a.sample(&mut rng);
            let y = b.sample(&mut rng);
            total += win_score(&y, &x);
        }
        total / draws as f64
    }

    #[test]
    fn closed_forms_match_simulation() {
        let cases = [
            (DistSpec::UniformShift { a: 1.0, delta: 0.0 }, DistSpec::UniformShift { a: 1.0, delta: 0.5 }),
            (DistSpec::Exponential { rate: 2.0 }, DistSpec::Exponential { rate: 1.0 }),
            (DistSpec::Normal { mean: 2.0, sd: 4.0 }, DistSpec::Normal { mean: 4.0, sd: 2.0 }),
            (DistSpec::Bernoulli { p: 0.4 }, DistSpec::Bernoulli { p: 0.6 }),
            (
                DistSpec::OrdinalCategorical { probs: vec![0.5, 0.3, 0.2] },
                DistSpec::OrdinalCategorical { probs: vec![0.2, 0.3, 0.5] },
            ),
        ];
        for (k, (a, b)) in cases.iter().enumerate() {
            let exact = closed_form_theta(a, b).unwrap().unwrap();
            let draws = 1_000_000;
            let est = mc_theta(a, b, draws, 100 + k as u64);
            // binomial-type error bound: sd ≤ 0.5/√draws
            assert!((est - exact).abs() < 5.0 * 0.5 / (draws as f64).sqrt(), "case {k}: {est} vs {exact}");
        }
    }

    #[test]
    fn large_samples_cover_closed_form() {
        let pairs = [
            (DistSpec::Normal { mean: 0.0, sd: 1.0 }, DistSpec::Normal { mean: 1.0, sd: 2.0 }),
            (DistSpec::Exponential { rate: 1.0 }, DistSpec::Exponential { rate: 0.7 }),
            (DistSpec::Bernoulli { p: 0.3 }, DistSpec::Bernoulli { p: 0.45 }),
        ];
        for (k, (a, b)) in pairs.iter().enumerate() {
            let exact = closed_form_theta(a, b).unwrap().unwrap();
            let mut inside = 0;
            let reps = 20;
            for r in 0..reps {
                let mut rng = streams::stream(900 + k as u64, r);
                let s = TwoSample::new(a.sample_n(&mut rng, 5000), b.sample_n(&mut rng, 5000)).unwrap();
                let est = wp_test(&s, 0.05).unwrap();
                if (est.estimate - exact).abs() < 4.0 * est.se {
                    inside += 1;
                }
            }
            assert!(inside >= reps - 1, "pair {k}: {inside}/{reps}");
        }
    }

    #[test]
    fn variance_components_symmetric_for_identical_specs() {
        let spec = DistSpec::Normal { mean: 0.0, sd: 1.0 };
        let vc = variance_components_mc(&spec, &spec, 400_000, 5).unwrap();
        // continuous identical distributions: both components equal 1/12
        assert!((vc.sigma10_sq - vc.sigma01_sq).abs() < 0.004);
        assert!((vc.sigma10_sq - 1.0 / 12.0).abs() < 0.003);
        assert!((vc.theta - 0.5).abs() < 0.003);
    }

    #[test]
    fn variance_components_degenerate() {
        let spec = DistSpec::Bernoulli { p: 0.0 };
        let vc = variance_components_mc(&spec, &spec, 100_000, 5).unwrap();
        assert_eq!(vc.sigma10_sq, 0.0);
        assert_eq!(vc.sigma01_sq, 0.0);
    }

    #[test]
    fn variance_components_are_deterministic() {
        let a = DistSpec::Normal { mean: 2.0, sd: 4.0 };
        let b = DistSpec::Normal { mean: 4.0, sd: 2.0 };
        let x = variance_components_mc(&a, &b, 200_000, 11).unwrap();
        let y = variance_components_mc(&a, &b, 200_000, 11).unwrap();
        assert_eq!(x, y);
        assert!(variance_components_mc(&a, &b, 99_999, 11).is_err());
    }
}
