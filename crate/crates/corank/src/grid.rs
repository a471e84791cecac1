//! The spherical grid on the unit ball.
//!
//! The grid discretizes the spherical uniform distribution: the product of
//! `n_s` unit directions and `n_r` radii `j / (n_r + 1)`, plus `n_0` copies of
//! the origin. The empirical center-outward distribution function is the
//! least-squares optimal pairing of data with this grid.

use crate::error::{Error, Result};
use crate::rng::seeded_rng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// How to split `n` into `n_r * n_s + n_0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorizePolicy {
    /// Balanced split: `n_r = floor(sqrt(n))`, `n_s = floor(n / n_r)`.
    Auto,
    /// Caller-chosen radius and direction counts.
    Explicit { n_r: usize, n_s: usize },
}

/// Factorization of the grid size, dimension, and direction seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub d: usize,
    pub n_r: usize,
    pub n_s: usize,
    pub n_0: usize,
    pub seed: u64,
}

impl GridSpec {
    /// Structural validation: the counts must tile `n` exactly. The stricter
    /// balance condition `n_0 < min(n_r, n_s)` is enforced by [`factorize`],
    /// not here, so that small hand-built grids remain expressible.
    pub fn new(n: usize, d: usize, n_r: usize, n_s: usize, n_0: usize, seed: u64) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("d", "dimension must be at least 1"));
        }
        if n_r == 0 || n_s == 0 {
            return Err(Error::invalid("n_r/n_s", "counts must be positive"));
        }
        if n_r * n_s + n_0 != n {
            return Err(Error::invalid(
                "n",
                format!("n_r * n_s + n_0 = {} does not equal n = {n}", n_r * n_s + n_0),
            ));
        }
        Ok(GridSpec {
            n,
            d,
            n_r,
            n_s,
            n_0,
            seed,
        })
    }

    /// The radii `j / (n_r + 1)`, `j = 1..=n_r`.
    pub fn radii(&self) -> Vec<f64> {
        (1..=self.n_r)
            .map(|j| j as f64 / (self.n_r + 1) as f64)
            .collect()
    }
}

/// Factorize `n` into a [`GridSpec`] satisfying `n_0 < min(n_r, n_s)`.
pub fn factorize(n: usize, d: usize, policy: FactorizePolicy, seed: u64) -> Result<GridSpec> {
    if n < 4 {
        return Err(Error::invalid("n", format!("need n >= 4, got {n}")));
    }
    match policy {
        FactorizePolicy::Auto => {
            let mut n_r = (n as f64).sqrt().floor() as usize;
            loop {
                if n_r == 0 {
                    return Err(Error::invalid("n", "no valid factorization"));
                }
                let n_s = n / n_r;
                let n_0 = n - n_r * n_s;
                if n_0 < n_r.min(n_s) {
                    return GridSpec::new(n, d, n_r, n_s, n_0, seed);
                }
                n_r -= 1;
            }
        }
        FactorizePolicy::Explicit { n_r, n_s } => {
            if n_r * n_s > n {
                return Err(Error::invalid(
                    "n_r/n_s",
                    format!("n_r * n_s = {} exceeds n = {n}", n_r * n_s),
                ));
            }
            let n_0 = n - n_r * n_s;
            if n_0 >= n_r.min(n_s) {
                return Err(Error::invalid(
                    "n_0",
                    format!("n_0 = {n_0} must be < min(n_r, n_s) = {}", n_r.min(n_s)),
                ));
            }
            GridSpec::new(n, d, n_r, n_s, n_0, seed)
        }
    }
}

/// The realized grid: `n` points in the unit ball.
///
/// Points are stored radius-major (all directions at radius `1/(n_r+1)`
/// first), with the `n_0` origin copies appended last; this order is part of
/// the deterministic contract.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub spec: GridSpec,
    pub points: Vec<Vec<f64>>,
    pub directions: Vec<Vec<f64>>,
    pub radii: Vec<f64>,
}

impl Grid {
    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn d(&self) -> usize {
        self.spec.d
    }
}

/// One point drawn uniformly from the unit sphere in dimension `d`.
pub fn sample_unit_direction(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    if d == 1 {
        return vec![if rng.random::<bool>() { 1.0 } else { -1.0 }];
    }
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Build the grid for `spec`: equispaced directions for `d = 2` (offset 0,
/// first direction `(1, 0)`), `{+1, -1}` for `d = 1`, seeded i.i.d. uniform
/// directions for `d >= 3`.
pub fn make_grid(spec: GridSpec) -> Result<Grid> {
    let directions: Vec<Vec<f64>> = match spec.d {
        1 => {
            if spec.n_s != 2 {
                return Err(Error::invalid(
                    "n_s",
                    format!("d = 1 requires n_s = 2, got {}", spec.n_s),
                ));
            }
            vec![vec![1.0], vec![-1.0]]
        }
        2 => (0..spec.n_s)
            .map(|k| {
                let angle = 2.0 * std::f64::consts::PI * k as f64 / spec.n_s as f64;
                vec![angle.cos(), angle.sin()]
            })
            .collect(),
        _ => {
            let mut rng = seeded_rng(spec.seed, 0);
            (0..spec.n_s)
                .map(|_| sample_unit_direction(spec.d, &mut rng))
                .collect()
        }
    };

    let radii = spec.radii();
    let mut points = Vec::with_capacity(spec.n);
    for &r in &radii {
        for dir in &directions {
            points.push(dir.iter().map(|x| r * x).collect());
        }
    }
    points.extend(std::iter::repeat_n(vec![0.0; spec.d], spec.n_0));

    Ok(Grid {
        spec,
        points,
        directions,
        radii,
    })
}

/// `m` i.i.d. draws from the spherical uniform on the unit ball: direction
/// uniform on the sphere, radius uniform on `(0, 1)`, independent.
pub fn sample_spherical_uniform(d: usize, m: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if d == 0 {
        return Err(Error::invalid("d", "dimension must be at least 1"));
    }
    if m == 0 {
        return Err(Error::invalid("m", "need at least one draw"));
    }
    let mut rng = seeded_rng(seed, 0);
    Ok((0..m)
        .map(|_| {
            let dir = sample_unit_direction(d, &mut rng);
            let r: f64 = rng.random::<f64>();
            dir.into_iter().map(|x| r * x).collect()
        })
        .collect())
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
