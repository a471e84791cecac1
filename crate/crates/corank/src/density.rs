//! Reference residual densities: spherical Gaussian, multivariate t, and the
//! three-component Gaussian mixture used for the banana-shaped cloud fixture.
//!
//! Each density exposes a seeded sampler, log-density, and location score
//! `phi = -grad log f`; the spherically symmetric ones additionally expose
//! their radial CDF and quantile, which realize the population
//! center-outward distribution function in closed form.

use crate::error::{Error, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared as ChiSquaredSampler, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor};
use statrs::function::gamma::ln_gamma;

/// A two-dimensional Gaussian mixture component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
}

impl MixtureComponent {
    fn cholesky(&self) -> [[f64; 2]; 2] {
        let a = self.cov[0][0];
        let b = self.cov[0][1];
        let c = self.cov[1][1];
        let l11 = a.sqrt();
        let l21 = b / l11;
        let l22 = (c - l21 * l21).sqrt();
        [[l11, 0.0], [l21, l22]]
    }

    fn det(&self) -> f64 {
        self.cov[0][0] * self.cov[1][1] - self.cov[0][1] * self.cov[0][1]
    }

    fn inv(&self) -> [[f64; 2]; 2] {
        let det = self.det();
        [
            [self.cov[1][1] / det, -self.cov[0][1] / det],
            [-self.cov[0][1] / det, self.cov[0][0] / det],
        ]
    }
}

/// Named reference densities for residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ReferenceDensity {
    SphericalGaussian { d: usize },
    MultivariateT { d: usize, nu: f64 },
    GaussianMixture { components: Vec<MixtureComponent> },
}

impl ReferenceDensity {
    pub fn gaussian(d: usize) -> Self {
        ReferenceDensity::SphericalGaussian { d }
    }

    pub fn student_t(d: usize, nu: f64) -> Self {
        ReferenceDensity::MultivariateT { d, nu }
    }

    /// The banana-shaped three-component mixture fixture (d = 2): equal
    /// weights, means (-3,0), (0,0), (3,1.5), and mildly anisotropic
    /// covariances.
    pub fn banana_mixture() -> Self {
        ReferenceDensity::GaussianMixture {
            components: vec![
                MixtureComponent {
                    weight: 1.0 / 3.0,
                    mean: [-3.0, 0.0],
                    cov: [[1.0, 0.0], [0.0, 1.0]],
                },
                MixtureComponent {
                    weight: 1.0 / 3.0,
                    mean: [0.0, 0.0],
                    cov: [[2.0, 0.5], [0.5, 1.0]],
                },
                MixtureComponent {
                    weight: 1.0 / 3.0,
                    mean: [3.0, 1.5],
                    cov: [[1.0, -0.4], [-0.4, 1.5]],
                },
            ],
        }
    }

    /// Look up a density by catalog name: `gaussian`, `t3` (or `t<nu>`),
    /// `mixture`.
    pub fn by_name(name: &str, d: usize) -> Result<Self> {
        match name {
            "gaussian" => Ok(Self::gaussian(d)),
            "mixture" => {
                if d != 2 {
                    return Err(Error::invalid("f0", "mixture fixture is d = 2 only"));
                }
                Ok(Self::banana_mixture())
            }
            _ => {
                if let Some(nu) = name.strip_prefix('t').and_then(|s| s.parse::<f64>().ok()) {
                    if nu <= 0.0 {
                        return Err(Error::invalid("f0", "t degrees of freedom must be positive"));
                    }
                    Ok(Self::student_t(d, nu))
                } else {
                    Err(Error::invalid("f0", format!("unknown density `{name}`")))
                }
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            ReferenceDensity::SphericalGaussian { .. } => "gaussian".into(),
            ReferenceDensity::MultivariateT { nu, .. } => format!("t{nu}"),
            ReferenceDensity::GaussianMixture { .. } => "mixture".into(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ReferenceDensity::SphericalGaussian { d } => *d,
            ReferenceDensity::MultivariateT { d, .. } => *d,
            ReferenceDensity::GaussianMixture { .. } => 2,
        }
    }

    pub fn is_spherical(&self) -> bool {
        !matches!(self, ReferenceDensity::GaussianMixture { .. })
    }

    /// One draw.
    pub fn sample_one(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            ReferenceDensity::SphericalGaussian { d } => {
                (0..*d).map(|_| StandardNormal.sample(rng)).collect()
            }
            ReferenceDensity::MultivariateT { d, nu } => {
                let w: f64 = ChiSquaredSampler::new(*nu).unwrap().sample(rng);
                let scale = (*nu / w).sqrt();
                (0..*d)
                    .map(|_| {
                        let g: f64 = StandardNormal.sample(rng);
                        scale * g
                    })
                    .collect()
            }
            ReferenceDensity::GaussianMixture { components } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut chosen = &components[components.len() - 1];
                for comp in components {
                    acc += comp.weight;
                    if u < acc {
                        chosen = comp;
                        break;
                    }
                }
                let l = chosen.cholesky();
                let g0: f64 = StandardNormal.sample(rng);
                let g1: f64 = StandardNormal.sample(rng);
                vec![
                    chosen.mean[0] + l[0][0] * g0,
                    chosen.mean[1] + l[1][0] * g0 + l[1][1] * g1,
                ]
            }
        }
    }

    /// `n` i.i.d. draws.
    pub fn sample(&self, rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|_| self.sample_one(rng)).collect()
    }

    pub fn log_density(&self, z: &[f64]) -> f64 {
        match self {
            ReferenceDensity::SphericalGaussian { d } => {
                let sq: f64 = z.iter().map(|x| x * x).sum();
                -0.5 * (*d as f64) * (2.0 * std::f64::consts::PI).ln() - 0.5 * sq
            }
            ReferenceDensity::MultivariateT { d, nu } => {
                let df = *nu;
                let dd = *d as f64;
                let sq: f64 = z.iter().map(|x| x * x).sum();
                ln_gamma((df + dd) / 2.0)
                    - ln_gamma(df / 2.0)
                    - 0.5 * dd * (df * std::f64::consts::PI).ln()
                    - 0.5 * (df + dd) * (1.0 + sq / df).ln()
            }
            ReferenceDensity::GaussianMixture { components } => {
                let logs: Vec<f64> = components
                    .iter()
                    .map(|c| c.weight.ln() + gaussian2_log_density(c, z))
                    .collect();
                log_sum_exp(&logs)
            }
        }
    }

    /// Location score `phi(z) = -grad log f(z)`.
    pub fn location_score(&self, z: &[f64]) -> Vec<f64> {
        match self {
            ReferenceDensity::SphericalGaussian { .. } => z.to_vec(),
            ReferenceDensity::MultivariateT { d, nu } => {
                let sq: f64 = z.iter().map(|x| x * x).sum();
                let factor = (*nu + *d as f64) / (*nu + sq);
                z.iter().map(|x| factor * x).collect()
            }
            ReferenceDensity::GaussianMixture { components } => {
                let logs: Vec<f64> = components
                    .iter()
                    .map(|c| c.weight.ln() + gaussian2_log_density(c, z))
                    .collect();
                let total = log_sum_exp(&logs);
                let mut score = vec![0.0; 2];
                for (c, &lg) in components.iter().zip(&logs) {
                    let resp = (lg - total).exp();
                    let dx = [z[0] - c.mean[0], z[1] - c.mean[1]];
                    let inv = c.inv();
                    score[0] += resp * (inv[0][0] * dx[0] + inv[0][1] * dx[1]);
                    score[1] += resp * (inv[1][0] * dx[0] + inv[1][1] * dx[1]);
                }
                score
            }
        }
    }

    /// CDF of `||Z||` for the spherically symmetric densities; `None` for the
    /// mixture.
    pub fn radial_cdf(&self, r: f64) -> Option<f64> {
        if r <= 0.0 {
            return if self.is_spherical() { Some(0.0) } else { None };
        }
        match self {
            ReferenceDensity::SphericalGaussian { d } => {
                let chi2 = ChiSquared::new(*d as f64).ok()?;
                Some(chi2.cdf(r * r))
            }
            ReferenceDensity::MultivariateT { d, nu } => {
                // ||Z||^2 / d follows a Fisher F(d, nu) law.
                let f = FisherSnedecor::new(*d as f64, *nu).ok()?;
                Some(f.cdf(r * r / *d as f64))
            }
            ReferenceDensity::GaussianMixture { .. } => None,
        }
    }

    /// Inverse of [`Self::radial_cdf`].
    pub fn radial_quantile(&self, p: f64) -> Option<f64> {
        if !(0.0..1.0).contains(&p) {
            return None;
        }
        if p == 0.0 {
            return if self.is_spherical() { Some(0.0) } else { None };
        }
        match self {
            ReferenceDensity::SphericalGaussian { d } => {
                let chi2 = ChiSquared::new(*d as f64).ok()?;
                Some(chi2.inverse_cdf(p).sqrt())
            }
            ReferenceDensity::MultivariateT { d, nu } => {
                let f = FisherSnedecor::new(*d as f64, *nu).ok()?;
                Some((f.inverse_cdf(p) * *d as f64).sqrt())
            }
            ReferenceDensity::GaussianMixture { .. } => None,
        }
    }
}

fn gaussian2_log_density(c: &MixtureComponent, z: &[f64]) -> f64 {
    let dx = [z[0] - c.mean[0], z[1] - c.mean[1]];
    let inv = c.inv();
    let quad = dx[0] * (inv[0][0] * dx[0] + inv[0][1] * dx[1])
        + dx[1] * (inv[1][0] * dx[0] + inv[1][1] * dx[1]);
    -(2.0 * std::f64::consts::PI).ln() - 0.5 * c.det().ln() - 0.5 * quad
}

fn log_sum_exp(logs: &[f64]) -> f64 {
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + logs.iter().map(|l| (l - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;
    use crate::stats::{mean, standard_error, variance};
    use approx::assert_relative_eq;

    #[test]
    fn gaussian_log_density_matches_formula() {
        let f = ReferenceDensity::gaussian(2);
        let z = [0.3, -1.1];
        let want = -(2.0 * std::f64::consts::PI).ln() - 0.5 * (0.09 + 1.21);
        assert_relative_eq!(f.log_density(&z), want, epsilon = 1e-12);
        assert_eq!(f.location_score(&z), z.to_vec());
    }

    #[test]
    fn gaussian_radial_cdf_median() {
        let f = ReferenceDensity::gaussian(2);
        let median = (2.0f64 * std::f64::consts::LN_2).sqrt();
        assert_relative_eq!(f.radial_cdf(median).unwrap(), 0.5, epsilon = 1e-10);
        assert_relative_eq!(f.radial_quantile(0.5).unwrap(), median, epsilon = 1e-8);
    }

    #[test]
    fn t_density_integrates_against_sampler_moments() {
        // For t(5) in d = 2, per-coordinate variance is nu/(nu-2) = 5/3.
        let f = ReferenceDensity::student_t(2, 5.0);
        let mut rng = seeded_rng(3, 0);
        let draws = f.sample(&mut rng, 200_000);
        let xs: Vec<f64> = draws.iter().map(|z| z[0]).collect();
        assert!(mean(&xs).abs() < 4.0 * standard_error(&xs));
        assert_relative_eq!(variance(&xs), 5.0 / 3.0, max_relative = 0.05);
    }

    #[test]
    fn t_radial_cdf_matches_empirical() {
        let f = ReferenceDensity::student_t(2, 3.0);
        let mut rng = seeded_rng(5, 0);
        let draws = f.sample(&mut rng, 100_000);
        let below: usize = draws
            .iter()
            .filter(|z| z.iter().map(|x| x * x).sum::<f64>().sqrt() < 1.5)
            .count();
        let p_hat = below as f64 / 100_000.0;
        let p = f.radial_cdf(1.5).unwrap();
        assert!((p_hat - p).abs() < 0.006, "p_hat {p_hat} vs p {p}");
    }

    #[test]
    fn t_score_is_gradient_of_log_density() {
        let f = ReferenceDensity::student_t(2, 3.0);
        let z = [0.7, -0.2];
        let h = 1e-6;
        for coord in 0..2 {
            let mut zp = z.to_vec();
            let mut zm = z.to_vec();
            zp[coord] += h;
            zm[coord] -= h;
            let num = -(f.log_density(&zp) - f.log_density(&zm)) / (2.0 * h);
            assert_relative_eq!(f.location_score(&z)[coord], num, epsilon = 1e-5);
        }
    }

    #[test]
    fn mixture_density_normalizes_and_scores() {
        let f = ReferenceDensity::banana_mixture();
        // Importance-check normalization: E_g[f/g] = 1 with g a wide Gaussian.
        let mut rng = seeded_rng(9, 0);
        let mut acc = 0.0;
        let m = 200_000;
        let scale = 6.0;
        for _ in 0..m {
            let g0: f64 = rand_distr::StandardNormal.sample(&mut rng);
            let g1: f64 = rand_distr::StandardNormal.sample(&mut rng);
            let z = [scale * g0, scale * g1];
            let log_g = -(2.0 * std::f64::consts::PI * scale * scale).ln()
                - 0.5 * (z[0] * z[0] + z[1] * z[1]) / (scale * scale);
            acc += (f.log_density(&z) - log_g).exp();
        }
        assert_relative_eq!(acc / m as f64, 1.0, max_relative = 0.05);

        // Score equals -grad log f numerically.
        let z = [1.2, 0.4];
        let h = 1e-6;
        for coord in 0..2 {
            let mut zp = z.to_vec();
            let mut zm = z.to_vec();
            zp[coord] += h;
            zm[coord] -= h;
            let num = -(f.log_density(&zp) - f.log_density(&zm)) / (2.0 * h);
            assert_relative_eq!(f.location_score(&z)[coord], num, epsilon = 1e-5);
        }
    }

    #[test]
    fn by_name_round_trip() {
        assert_eq!(ReferenceDensity::by_name("gaussian", 3).unwrap().dim(), 3);
        assert_eq!(
            ReferenceDensity::by_name("t3", 2).unwrap().name(),
            "t3".to_string()
        );
        assert!(ReferenceDensity::by_name("mixture", 3).is_err());
        assert!(ReferenceDensity::by_name("cauchyish", 2).is_err());
    }
}
