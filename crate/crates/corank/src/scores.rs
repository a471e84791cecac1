//! Score functions on the unit ball and the linear / partial-sum rank
//! statistics built from center-outward ranks and signs.
//!
//! A tangent function is a bounded, centered direction of density
//! perturbation on residual space; composing it with the population
//! center-outward quantile map of the reference density turns it into a
//! score on the unit ball that can be evaluated at empirical images. Vector
//! location scores (Wilcoxon, sign, Gaussian) live on the ball directly.

use crate::assignment::{solve_assignment, solve_assignment_warm};
use crate::codf::{codf_closed_form_spherical, EmpiricalCodf, RankSign};
use crate::density::ReferenceDensity;
use crate::error::{Error, Result};
use crate::grid::norm;
use crate::rng::seeded_rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type RadialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A bounded element of the tangent space for location shifts: a direction
/// `eta` of density perturbation `(1 + n^{-1/2} eta) f0`, centered so that
/// its `f0`-mean vanishes.
#[derive(Clone)]
pub struct TangentFunction {
    pub label: String,
    raw: ScalarFn,
    /// Sup-norm bound of the centered function.
    pub bound: f64,
    /// Constant subtracted from the raw function.
    pub centering: f64,
    centered: bool,
}

impl std::fmt::Debug for TangentFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TangentFunction")
            .field("label", &self.label)
            .field("bound", &self.bound)
            .field("centering", &self.centering)
            .field("centered", &self.centered)
            .finish()
    }
}

impl TangentFunction {
    /// An uncentered tangent candidate; call [`Self::centered_under`] before
    /// using it in statistics that require a genuine tangent direction.
    pub fn new(
        label: impl Into<String>,
        bound: f64,
        raw: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        TangentFunction {
            label: label.into(),
            raw: Arc::new(raw),
            bound,
            centering: 0.0,
            centered: false,
        }
    }

    /// An odd (or otherwise exactly centered) function needs no Monte Carlo
    /// centering constant; the caller asserts `integral eta f0 = 0`.
    pub fn new_centered(
        label: impl Into<String>,
        bound: f64,
        raw: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        let mut t = Self::new(label, bound, raw);
        t.centered = true;
        t
    }

    /// The zero tangent (no density perturbation).
    pub fn zero() -> Self {
        Self::new_centered("zero", 0.0, |_| 0.0)
    }

    /// Estimate the centering constant under `f0` by Monte Carlo and return
    /// the centered tangent. The bound grows by the centering constant.
    pub fn centered_under(self, f0: &ReferenceDensity, draws: usize, seed: u64) -> Result<Self> {
        if draws == 0 {
            return Err(Error::invalid("draws", "need at least one draw"));
        }
        let mut rng = seeded_rng(seed, 0);
        let mut acc = 0.0;
        for _ in 0..draws {
            let z = f0.sample_one(&mut rng);
            acc += (self.raw)(&z);
        }
        let centering = acc / draws as f64;
        Ok(TangentFunction {
            label: self.label,
            raw: self.raw,
            bound: self.bound + centering.abs(),
            centering,
            centered: true,
        })
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    /// The centered value `eta(z)`.
    pub fn eval(&self, z: &[f64]) -> f64 {
        (self.raw)(z) - self.centering
    }
}

/// A score function on the closed unit ball, `m = dim_out` outputs per point.
#[derive(Clone)]
pub struct BallScore {
    pub label: String,
    pub dim_out: usize,
    eval: VectorFn,
}

impl std::fmt::Debug for BallScore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BallScore")
            .field("label", &self.label)
            .field("dim_out", &self.dim_out)
            .finish()
    }
}

impl BallScore {
    pub fn new(
        label: impl Into<String>,
        dim_out: usize,
        eval: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        BallScore {
            label: label.into(),
            dim_out,
            eval: Arc::new(eval),
        }
    }

    pub fn eval(&self, u: &[f64]) -> Vec<f64> {
        (self.eval)(u)
    }
}

/// The population center-outward quantile map of a spherically symmetric
/// reference: `u -> q(||u||) u / ||u||` with `q` the radial quantile, and
/// `0 -> 0`.
pub fn spherical_quantile_map(f0: &ReferenceDensity) -> Result<VectorFn> {
    if !f0.is_spherical() {
        return Err(Error::invalid(
            "f0",
            "quantile map requires a spherically symmetric reference",
        ));
    }
    let f0 = f0.clone();
    Ok(Arc::new(move |u: &[f64]| {
        let r = norm(u);
        if r == 0.0 {
            return vec![0.0; u.len()];
        }
        let q = f0
            .radial_quantile(r.min(1.0 - 1e-15))
            .expect("spherical reference has a radial quantile");
        u.iter().map(|x| q * x / r).collect()
    }))
}

/// Compose a tangent function with the population quantile map of the
/// reference: the resulting ball score evaluates `eta` where the grid point
/// "lives" in residual space. Its exact mean over any full grid approximates
/// the vanishing `f0`-mean of `eta`.
pub fn ball_score_from_tangent(eta: &TangentFunction, quantile_map: VectorFn) -> BallScore {
    let eta = eta.clone();
    BallScore {
        label: format!("{}@quantile", eta.label),
        dim_out: 1,
        eval: Arc::new(move |u: &[f64]| vec![eta.eval(&quantile_map(u))]),
    }
}

/// Score catalog, addressable by name:
/// `wilcoxon` (identity), `sign` (unit direction), `gaussian_location`
/// (Gaussian quantile map), `tanh1` / `sin1` (bounded scalar tangents of the
/// first coordinate, composed with the Gaussian quantile map).
pub fn catalog_score(name: &str, d: usize) -> Result<BallScore> {
    match name {
        "wilcoxon" => Ok(BallScore::new("wilcoxon", d, |u| u.to_vec())),
        "sign" => Ok(BallScore::new("sign", d, |u| {
            let r = norm(u);
            if r == 0.0 {
                vec![0.0; u.len()]
            } else {
                u.iter().map(|x| x / r).collect()
            }
        })),
        "gaussian_location" => {
            let q = spherical_quantile_map(&ReferenceDensity::gaussian(d))?;
            Ok(BallScore {
                label: "gaussian_location".into(),
                dim_out: d,
                eval: q,
            })
        }
        "tanh1" | "sin1" => {
            let eta = catalog_tangent(name, d)?;
            let q = spherical_quantile_map(&ReferenceDensity::gaussian(d))?;
            Ok(ball_score_from_tangent(&eta, q))
        }
        _ => Err(Error::invalid("score", format!("unknown score `{name}`"))),
    }
}

/// Tangent catalog: odd bounded functions of the first coordinate, exactly
/// centered under any spherically symmetric reference.
pub fn catalog_tangent(name: &str, _d: usize) -> Result<TangentFunction> {
    match name {
        "zero" => Ok(TangentFunction::zero()),
        "tanh1" => Ok(TangentFunction::new_centered("tanh1", 1.0, |z| z[0].tanh())),
        "sin1" => Ok(TangentFunction::new_centered("sin1", 1.0, |z| z[0].sin())),
        _ => Err(Error::invalid("eta", format!("unknown tangent `{name}`"))),
    }
}

/// A computed rank statistic: the value vector, the standardizing divisor,
/// and the grid mean of the score used for centering.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankStatValue {
    pub value: Vec<f64>,
    pub standardizer: f64,
    pub grid_mean: Vec<f64>,
}

fn centered_constants(constants: &[f64], n: usize) -> Result<(Vec<f64>, f64)> {
    if constants.len() != n {
        return Err(Error::SizeMismatch {
            field: "constants",
            expected: n,
            actual: constants.len(),
        });
    }
    let cbar = constants.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = constants.iter().map(|c| c - cbar).collect();
    let ssq: f64 = centered.iter().map(|c| c * c).sum();
    if ssq <= 0.0 {
        return Err(Error::invalid(
            "constants",
            "all constants equal: standardizer is zero",
        ));
    }
    Ok((centered, ssq.sqrt()))
}

fn grid_mean_of(scores: &[Vec<f64>], m: usize) -> Vec<f64> {
    let n = scores.len() as f64;
    let mut mean = vec![0.0; m];
    for s in scores {
        for (acc, v) in mean.iter_mut().zip(s) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= n);
    mean
}

/// The approximate-score linear rank statistic
/// `T_a = (sum (c_i - cbar)^2)^{-1/2} sum (c_i - cbar) J(image_i)`.
///
/// Depends on the data only through the stored images, hence is measurable
/// with respect to the ranks and signs.
pub fn approximate_score_statistic(
    constants: &[f64],
    score: &BallScore,
    ranksigns: &[RankSign],
) -> Result<RankStatValue> {
    let (centered, standardizer) = centered_constants(constants, ranksigns.len())?;
    let scores: Vec<Vec<f64>> = ranksigns.iter().map(|rs| score.eval(&rs.image)).collect();
    let mut value = vec![0.0; score.dim_out];
    for (c, s) in centered.iter().zip(&scores) {
        for (acc, v) in value.iter_mut().zip(s) {
            *acc += c * v;
        }
    }
    value.iter_mut().for_each(|v| *v /= standardizer);
    Ok(RankStatValue {
        value,
        standardizer,
        grid_mean: grid_mean_of(&scores, score.dim_out),
    })
}

/// The centered partial-sum statistic
/// `T(u) = n^{-1/2} sum_{i <= floor(un)} (b(image_i) - bbar)`, with `bbar`
/// the exact mean of the score over all `n` grid points. At `u = 1` the sum
/// telescopes to zero exactly, making the process a discrete bridge.
pub fn partial_sum_statistic(
    score: &BallScore,
    ranksigns: &[RankSign],
    u: f64,
) -> Result<RankStatValue> {
    Ok(partial_sum_profile(score, ranksigns, &[u])?.pop().unwrap())
}

/// [`partial_sum_statistic`] at several `u` values in one pass: the score is
/// evaluated once per observation, and each requested statistic snapshots
/// the running sum, so single-`u` and profile evaluations agree bit for bit.
pub fn partial_sum_profile(
    score: &BallScore,
    ranksigns: &[RankSign],
    u_list: &[f64],
) -> Result<Vec<RankStatValue>> {
    let n = ranksigns.len();
    if n == 0 {
        return Err(Error::invalid("ranksigns", "empty sequence"));
    }
    let mut cuts = Vec::with_capacity(u_list.len());
    for &u in u_list {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::invalid("u", format!("u = {u} outside [0, 1]")));
        }
        cuts.push(((u * n as f64).floor() as usize).min(n));
    }

    let dim = score.dim_out;
    let mut running = vec![0.0; dim];
    let mut snapshots: Vec<Vec<f64>> = vec![Vec::new(); u_list.len()];
    for (slot, &m) in cuts.iter().enumerate() {
        if m == 0 {
            snapshots[slot] = vec![0.0; dim];
        }
    }
    for (i, rs) in ranksigns.iter().enumerate() {
        let s = score.eval(&rs.image);
        for (acc, v) in running.iter_mut().zip(&s) {
            *acc += v;
        }
        for (slot, &m) in cuts.iter().enumerate() {
            if m == i + 1 {
                snapshots[slot] = running.clone();
            }
        }
    }
    let total = running;
    let standardizer = (n as f64).sqrt();
    Ok(cuts
        .iter()
        .zip(snapshots)
        .map(|(&m, partial)| {
            let fraction = m as f64 / n as f64;
            let value: Vec<f64> = partial
                .iter()
                .zip(&total)
                .map(|(p, t)| (p - fraction * t) / standardizer)
                .collect();
            RankStatValue {
                value,
                standardizer,
                grid_mean: total.iter().map(|t| t / n as f64).collect(),
            }
        })
        .collect())
}

/// Reference-law ingredients for the exact-score estimator: a sampler for
/// `f0`, its population center-outward distribution function, and (when
/// spherical) the radial quantile used to warm-start the inner solves.
#[derive(Clone)]
pub struct ExactScoreReference {
    pub sampler: Arc<dyn Fn(&mut ChaCha8Rng, usize) -> Vec<Vec<f64>> + Send + Sync>,
    pub population_codf: VectorFn,
    pub radial_quantile: Option<RadialFn>,
}

impl ExactScoreReference {
    pub fn spherical(f0: &ReferenceDensity) -> Result<Self> {
        if !f0.is_spherical() {
            return Err(Error::invalid("f0", "exact scores need a spherical reference"));
        }
        let f_sample = f0.clone();
        let f_cdf = f0.clone();
        let f_q = f0.clone();
        Ok(ExactScoreReference {
            sampler: Arc::new(move |rng, n| f_sample.sample(rng, n)),
            population_codf: Arc::new(move |z| {
                codf_closed_form_spherical(|r| f_cdf.radial_cdf(r).unwrap(), z)
            }),
            radial_quantile: Some(Arc::new(move |p| f_q.radial_quantile(p).unwrap())),
        })
    }
}

/// The exact-score linear rank statistic, with the conditional expectation
/// `E[J(F(Z)) | Z matched to grid point g]` estimated by Monte Carlo:
/// `replicates` datasets of size `n` are drawn from the reference, each is
/// paired with the grid, and the population-score values of the data point
/// landing on `g` are averaged.
pub fn exact_score_statistic_mc(
    constants: &[f64],
    score: &BallScore,
    codf: &EmpiricalCodf,
    reference: &ExactScoreReference,
    replicates: usize,
    seed: u64,
) -> Result<RankStatValue> {
    let table = exact_score_table(score, &codf.grid, reference, replicates, seed)?;
    exact_score_statistic_from_table(constants, &table, codf)
}

/// The estimated exact-score table (one row per grid index). It depends
/// only on the score, grid, and reference, so callers evaluating many
/// datasets against the same grid compute it once and reuse it with
/// [`exact_score_statistic_from_table`].
pub fn exact_score_table(
    score: &BallScore,
    grid: &crate::grid::Grid,
    reference: &ExactScoreReference,
    replicates: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if replicates == 0 {
        return Err(Error::invalid("replicates", "replicate budget must be positive"));
    }
    let n = grid.n();
    let m = score.dim_out;
    let tables: Vec<Vec<f64>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = seeded_rng(seed, r as u64);
            let data = (reference.sampler)(&mut rng, n);
            let assignment = match &reference.radial_quantile {
                Some(q) => solve_assignment_warm(&data, grid, |p| q(p)),
                None => solve_assignment(&data, grid),
            }
            .expect("reference draws are finite");
            let mut table = vec![0.0; n * m];
            for (i, &g) in assignment.permutation.iter().enumerate() {
                let s = score.eval(&(reference.population_codf)(&data[i]));
                for (k, v) in s.iter().enumerate() {
                    table[g * m + k] = *v;
                }
            }
            table
        })
        .collect();
    // Average in replicate order for bit reproducibility.
    let mut acc = vec![0.0; n * m];
    for table in &tables {
        for (a, v) in acc.iter_mut().zip(table) {
            *a += v;
        }
    }
    Ok(acc
        .chunks(m)
        .map(|row| row.iter().map(|v| v / replicates as f64).collect())
        .collect())
}

/// Form the exact-score linear statistic from a precomputed table.
pub fn exact_score_statistic_from_table(
    constants: &[f64],
    table: &[Vec<f64>],
    codf: &EmpiricalCodf,
) -> Result<RankStatValue> {
    let n = codf.source_count();
    if table.len() != n {
        return Err(Error::SizeMismatch {
            field: "table",
            expected: n,
            actual: table.len(),
        });
    }
    let (centered, standardizer) = centered_constants(constants, n)?;
    let m = table[0].len();
    let mut value = vec![0.0; m];
    let mut grid_mean = vec![0.0; m];
    for (i, c) in centered.iter().enumerate() {
        let row = &table[codf.permutation[i]];
        for k in 0..m {
            value[k] += c * row[k];
            grid_mean[k] += row[k];
        }
    }
    value.iter_mut().for_each(|v| *v /= standardizer);
    grid_mean.iter_mut().for_each(|v| *v /= n as f64);
    Ok(RankStatValue {
        value,
        standardizer,
        grid_mean,
    })
}
