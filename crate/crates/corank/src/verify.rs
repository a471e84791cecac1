//! Monte Carlo verification harness: each check turns one of the testable
//! claims about center-outward ranks into a reproducible pass/fail report.
//!
//! Every check is deterministic given its seed: replicates draw from
//! independent ChaCha streams and are aggregated in fixed index order, so
//! reports are bit-for-bit reproducible regardless of scheduling. Negative
//! controls are part of the gates: a run in which the negative control
//! passes is itself a failure.

use crate::codf::{codf_closed_form_spherical, empirical_codf, ranks_and_signs, RankSign};
use crate::density::ReferenceDensity;
use crate::error::{Error, Result};
use crate::grid::{factorize, make_grid, norm, FactorizePolicy, Grid};
use crate::limit::{extract_bridge, loglik_drift, sample_drift_path, DriftConfig};
use crate::models::{
    information_structure, log_likelihood_ratio_finite_n, LocalParam, ModelSpec,
};
use crate::rng::{derive_seed, seeded_rng};
use crate::scores::{
    ball_score_from_tangent, catalog_score, catalog_tangent, partial_sum_profile,
    spherical_quantile_map, BallScore, TangentFunction,
};
use crate::stats::{chi_square_2x2, chi_square_gof, correlation, ks_two_sample, mean, variance};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

/// Outcome of one harness check: named statistics, named p-values, declared
/// thresholds, and the overall verdict. Everything except `runtime_seconds`
/// is reproducible bit for bit from the config and seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub replicates: usize,
    pub seed: u64,
    pub alpha: f64,
    pub thresholds: BTreeMap<String, f64>,
    pub statistics: BTreeMap<String, f64>,
    pub p_values: BTreeMap<String, f64>,
    pub pass: bool,
    pub runtime_seconds: f64,
}

impl CheckReport {
    fn new(name: &str, replicates: usize, seed: u64, alpha: f64) -> Self {
        CheckReport {
            name: name.into(),
            replicates,
            seed,
            alpha,
            thresholds: BTreeMap::new(),
            statistics: BTreeMap::new(),
            p_values: BTreeMap::new(),
            pass: true,
            runtime_seconds: 0.0,
        }
    }

    fn stat(&mut self, key: impl Into<String>, value: f64) {
        self.statistics.insert(key.into(), value);
    }

    fn threshold(&mut self, key: impl Into<String>, value: f64) {
        self.thresholds.insert(key.into(), value);
    }

    /// Record a p-value that must exceed `alpha`.
    fn gate_p_above(&mut self, key: impl Into<String>, p: f64) {
        let key = key.into();
        if p <= self.alpha {
            self.pass = false;
        }
        self.p_values.insert(key, p);
    }

    /// Record a statistic that must not exceed `bound`.
    fn gate_at_most(&mut self, key: impl Into<String>, value: f64, bound: f64) {
        let key = key.into();
        if !(value <= bound) {
            self.pass = false;
        }
        self.thresholds.insert(format!("{key}.max"), bound);
        self.statistics.insert(key, value);
    }

    /// Record a condition that must hold.
    fn gate(&mut self, key: impl Into<String>, ok: bool) {
        if !ok {
            self.pass = false;
        }
        self.statistics.insert(key.into(), if ok { 1.0 } else { 0.0 });
    }

    /// Everything except the wall clock, for reproducibility comparisons.
    pub fn results_equal(&self, other: &CheckReport) -> bool {
        self.name == other.name
            && self.replicates == other.replicates
            && self.seed == other.seed
            && self.alpha == other.alpha
            && self.thresholds == other.thresholds
            && self.statistics == other.statistics
            && self.p_values == other.p_values
            && self.pass == other.pass
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn resolve_grid(n: usize, d: usize, n_r: Option<usize>, n_s: Option<usize>, seed: u64) -> Result<Grid> {
    let policy = match (n_r, n_s) {
        (Some(r), Some(s)) => FactorizePolicy::Explicit { n_r: r, n_s: s },
        (None, None) => FactorizePolicy::Auto,
        _ => {
            return Err(Error::invalid(
                "n_r/n_s",
                "give both explicit counts or neither",
            ))
        }
    };
    make_grid(factorize(n, d, policy, seed)?)
}

fn spherical_by_name(name: &str, d: usize) -> Result<ReferenceDensity> {
    let f0 = ReferenceDensity::by_name(name, d)?;
    if !f0.is_spherical() {
        return Err(Error::invalid(
            "f0",
            format!("`{name}` is not spherically symmetric"),
        ));
    }
    Ok(f0)
}

fn solve_ranks(
    data: &[Vec<f64>],
    grid: &Grid,
    warm: Option<&ReferenceDensity>,
    tie_seed: u64,
) -> Vec<RankSign> {
    let codf = match warm {
        Some(f0) if f0.is_spherical() => crate::assignment::solve_assignment_warm(data, grid, |p| {
            f0.radial_quantile(p).unwrap()
        })
        .map(|assignment| crate::codf::EmpiricalCodf {
            grid: grid.clone(),
            images: assignment
                .permutation
                .iter()
                .map(|&j| grid.points[j].clone())
                .collect(),
            permutation: assignment.permutation,
            cost: assignment.cost,
        }),
        _ => empirical_codf(data, grid),
    }
    .expect("sampled data are finite");
    ranks_and_signs(&codf, tie_seed).expect("images sit on grid radii")
}

fn two_sample_split(n: usize, split: f64) -> Vec<f64> {
    let m = ((split * n as f64).floor() as usize).clamp(1, n - 1);
    (0..n).map(|i| if i < m { 1.0 } else { 0.0 }).collect()
}

/// Scalar views of a (possibly vector) statistic: each component plus the
/// squared norm. The squared norm is what separates scale families that
/// per-component tests can miss.
fn scalarize(label: &str, value: &[f64]) -> Vec<(String, f64)> {
    let mut out: Vec<(String, f64)> = value
        .iter()
        .enumerate()
        .map(|(i, v)| (format!("{label}[{i}]"), *v))
        .collect();
    out.push((
        format!("{label}.sqnorm"),
        value.iter().map(|v| v * v).sum(),
    ));
    out
}

// ---------------------------------------------------------------------------
// Distribution-freeness
// ---------------------------------------------------------------------------

/// Configuration for [`check_distribution_freeness`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DfreeConfig {
    pub densities: Vec<String>,
    pub d: usize,
    pub score: String,
    /// Fraction of observations in the first group of the two-sample
    /// constants.
    pub split: f64,
    pub n: usize,
    pub n_r: Option<usize>,
    pub n_s: Option<usize>,
    pub replicates: usize,
    pub seed: u64,
    pub alpha: f64,
}

impl Default for DfreeConfig {
    fn default() -> Self {
        DfreeConfig {
            densities: vec!["gaussian".into(), "t3".into(), "mixture".into()],
            d: 2,
            score: "wilcoxon".into(),
            split: 0.5,
            n: 60,
            n_r: Some(6),
            n_s: Some(10),
            replicates: 20_000,
            seed: 20_240_001,
            alpha: 0.001,
        }
    }
}

/// Exact distribution-freeness of rank statistics: the sampling law of the
/// approximate-score statistic must not depend on the generating density,
/// the marginal rank must be uniform, and a non-rank statistic (the residual
/// mean, the negative control) must visibly depend on the density.
pub fn check_distribution_freeness(cfg: &DfreeConfig) -> Result<CheckReport> {
    let start = Instant::now();
    if cfg.densities.len() < 2 {
        return Err(Error::invalid("densities", "need at least two densities"));
    }
    let grid = resolve_grid(cfg.n, cfg.d, cfg.n_r, cfg.n_s, derive_seed(cfg.seed, 1))?;
    if grid.spec.n_0 != 0 {
        return Err(Error::invalid(
            "n",
            format!("need n_0 = 0 for exact rank uniformity, got n_0 = {}", grid.spec.n_0),
        ));
    }
    let densities: Vec<ReferenceDensity> = cfg
        .densities
        .iter()
        .map(|name| ReferenceDensity::by_name(name, cfg.d))
        .collect::<Result<_>>()?;
    let score = catalog_score(&cfg.score, cfg.d)?;
    let constants = two_sample_split(cfg.n, cfg.split);

    let mut report = CheckReport::new("distribution_freeness", cfg.replicates, cfg.seed, cfg.alpha);
    report.threshold("alpha", cfg.alpha);

    struct PerDensity {
        rank_counts: Vec<u64>,
        stat_coords: Vec<Vec<f64>>,
        control_coords: Vec<Vec<f64>>,
        labels: Vec<String>,
    }

    let mut samples: Vec<PerDensity> = Vec::new();
    for (q, f) in densities.iter().enumerate() {
        let grid_ref = &grid;
        let score_ref = &score;
        let constants_ref = &constants;
        let rows: Vec<(usize, Vec<f64>, Vec<f64>)> = (0..cfg.replicates)
            .into_par_iter()
            .map(|r| {
                let stream = (q * cfg.replicates + r) as u64;
                let mut rng = seeded_rng(cfg.seed, stream);
                let data = f.sample(&mut rng, cfg.n);
                let rs = solve_ranks(&data, grid_ref, None, derive_seed(cfg.seed, stream));
                let stat =
                    crate::scores::approximate_score_statistic(constants_ref, score_ref, &rs)
                        .expect("constants are non-degenerate");
                let mut control = vec![0.0; cfg.d];
                for z in &data {
                    for (acc, v) in control.iter_mut().zip(z) {
                        *acc += v / cfg.n as f64;
                    }
                }
                (rs[0].rank, stat.value, control)
            })
            .collect();

        let mut rank_counts = vec![0u64; grid.spec.n_r];
        let mut stat_coords: Vec<Vec<f64>> = Vec::new();
        let mut control_coords: Vec<Vec<f64>> = Vec::new();
        let mut labels: Vec<String> = Vec::new();
        for (rank, stat, control) in rows {
            assert!(rank >= 1, "n_0 = 0 grids have no zero ranks");
            rank_counts[rank - 1] += 1;
            let s = scalarize("stat", &stat);
            let c = scalarize("control", &control);
            if stat_coords.is_empty() {
                stat_coords = vec![Vec::with_capacity(cfg.replicates); s.len()];
                control_coords = vec![Vec::with_capacity(cfg.replicates); c.len()];
                labels = s.iter().map(|(l, _)| l.clone()).collect();
            }
            for (vec, (_, v)) in stat_coords.iter_mut().zip(&s) {
                vec.push(*v);
            }
            for (vec, (_, v)) in control_coords.iter_mut().zip(&c) {
                vec.push(*v);
            }
        }
        samples.push(PerDensity {
            rank_counts,
            stat_coords,
            control_coords,
            labels,
        });
    }

    // Marginal rank uniformity per density.
    let expected = vec![cfg.replicates as f64 / grid.spec.n_r as f64; grid.spec.n_r];
    for (name, s) in cfg.densities.iter().zip(&samples) {
        let out = chi_square_gof(&s.rank_counts, &expected)?;
        report.gate_p_above(format!("rank_uniformity.{name}"), out.p_value);
    }

    // Pairwise KS on every scalar coordinate of the rank statistic.
    for a in 0..samples.len() {
        for b in (a + 1)..samples.len() {
            for (idx, label) in samples[a].labels.iter().enumerate() {
                let out = ks_two_sample(&samples[a].stat_coords[idx], &samples[b].stat_coords[idx])?;
                report.gate_p_above(
                    format!("freeness.{}.vs.{}.{label}", cfg.densities[a], cfg.densities[b]),
                    out.p_value,
                );
            }
        }
    }

    // Negative control: the residual mean must fail freeness for every pair
    // of genuinely different densities.
    for a in 0..samples.len() {
        for b in (a + 1)..samples.len() {
            if cfg.densities[a] == cfg.densities[b] {
                continue;
            }
            let mut min_p = 1.0f64;
            for idx in 0..samples[a].control_coords.len() {
                let out =
                    ks_two_sample(&samples[a].control_coords[idx], &samples[b].control_coords[idx])?;
                min_p = min_p.min(out.p_value);
            }
            let key = format!(
                "negative_control.{}.vs.{}.min_p",
                cfg.densities[a], cfg.densities[b]
            );
            report.stat(&key, min_p);
            report.gate(
                format!(
                    "negative_control.{}.vs.{}.failed_as_expected",
                    cfg.densities[a], cfg.densities[b]
                ),
                min_p < cfg.alpha,
            );
        }
    }

    report.runtime_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

// ---------------------------------------------------------------------------
// Basu independence at finite n
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BasuConfig {
    pub f0: String,
    pub d: usize,
    pub n: usize,
    pub n_r: Option<usize>,
    pub n_s: Option<usize>,
    pub replicates: usize,
    pub seed: u64,
    pub alpha: f64,
}

impl Default for BasuConfig {
    fn default() -> Self {
        BasuConfig {
            f0: "gaussian".into(),
            d: 2,
            n: 60,
            n_r: Some(6),
            n_s: Some(10),
            replicates: 20_000,
            seed: 20_240_002,
            alpha: 0.001,
        }
    }
}

/// Finite-sample independence of (rank, sign) from the order statistic,
/// proxied by the permutation-symmetric statistic `sum ||Z_i||^2`: sample
/// correlations within `3 / sqrt(N)` and a median-split chi-square.
/// Also checks the rank-sign independence of the first observation.
pub fn check_basu_independence(cfg: &BasuConfig) -> Result<CheckReport> {
    let start = Instant::now();
    let f0 = ReferenceDensity::by_name(&cfg.f0, cfg.d)?;
    let grid = resolve_grid(cfg.n, cfg.d, cfg.n_r, cfg.n_s, derive_seed(cfg.seed, 1))?;
    let mut report = CheckReport::new("basu_independence", cfg.replicates, cfg.seed, cfg.alpha);
    let corr_bound = 3.0 / (cfg.replicates as f64).sqrt();
    report.threshold("corr_bound", corr_bound);
    report.threshold("alpha", cfg.alpha);

    let grid_ref = &grid;
    let rows: Vec<(f64, Vec<f64>, f64)> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let stream = r as u64;
            let mut rng = seeded_rng(cfg.seed, stream);
            let data = f0.sample(&mut rng, cfg.n);
            let rs = solve_ranks(&data, grid_ref, None, derive_seed(cfg.seed, stream));
            let symmetric: f64 = data.iter().map(|z| z.iter().map(|x| x * x).sum::<f64>()).sum();
            (rs[0].rank as f64, rs[0].sign.clone(), symmetric)
        })
        .collect();

    let ranks: Vec<f64> = rows.iter().map(|(r, _, _)| *r).collect();
    let symmetric: Vec<f64> = rows.iter().map(|(_, _, s)| *s).collect();

    let c = correlation(&ranks, &symmetric).unwrap_or(0.0);
    report.gate_at_most("corr.rank_vs_symmetric", c.abs(), corr_bound);
    for coord in 0..cfg.d {
        let signs: Vec<f64> = rows.iter().map(|(_, s, _)| s[coord]).collect();
        let c = correlation(&signs, &symmetric).unwrap_or(0.0);
        report.gate_at_most(format!("corr.sign{coord}_vs_symmetric"), c.abs(), corr_bound);
        let c = correlation(&ranks, &signs).unwrap_or(0.0);
        report.gate_at_most(format!("corr.rank_vs_sign{coord}"), c.abs(), corr_bound);
    }

    // Median-split 2x2 independence test.
    let median_of = |xs: &[f64]| {
        let mut v = xs.to_vec();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v[v.len() / 2]
    };
    let (rank_med, sym_med) = (median_of(&ranks), median_of(&symmetric));
    let mut table = [[0u64; 2]; 2];
    for (r, s) in ranks.iter().zip(&symmetric) {
        table[(*r <= rank_med) as usize][(*s <= sym_med) as usize] += 1;
    }
    let out = chi_square_2x2(table)?;
    report.gate_p_above("median_split.p", out.p_value);

    // Negative control: a statistic correlated with itself.
    let self_corr = correlation(&symmetric, &symmetric).unwrap_or(0.0);
    report.gate("negative_control.self_corr_is_one", (self_corr - 1.0).abs() < 1e-12);

    report.runtime_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

// ---------------------------------------------------------------------------
// Glivenko-Cantelli consistency
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GcConfig {
    pub f0: String,
    pub d: usize,
    pub n_list: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
    /// Required ratio of the first to the last median error.
    pub ratio_threshold: f64,
}

impl Default for GcConfig {
    fn default() -> Self {
        GcConfig {
            f0: "gaussian".into(),
            d: 2,
            n_list: vec![400, 1600, 3600],
            replicates: 50,
            seed: 20_240_003,
            ratio_threshold: 1.4,
        }
    }
}

/// Uniform consistency of the empirical center-outward map at the sample
/// points: the median of `max_i ||F_n(Z_i) - F(Z_i)||` must decrease
/// strictly along `n_list`, with overall shrinkage at least
/// `ratio_threshold`. Needs a spherically symmetric reference so the
/// population map has a closed form.
pub fn check_glivenko_cantelli(cfg: &GcConfig) -> Result<CheckReport> {
    let start = Instant::now();
    let f0 = spherical_by_name(&cfg.f0, cfg.d)?;
    if cfg.n_list.is_empty() {
        return Err(Error::invalid("n_list", "need at least one sample size"));
    }
    let mut report = CheckReport::new("glivenko_cantelli", cfg.replicates, cfg.seed, 0.0);
    report.threshold("ratio_threshold", cfg.ratio_threshold);

    let mut medians: Vec<f64> = Vec::new();
    for (ni, &n) in cfg.n_list.iter().enumerate() {
        let grid = match factorize(n, cfg.d, FactorizePolicy::Auto, derive_seed(cfg.seed, n as u64))
            .and_then(make_grid)
        {
            Ok(g) => g,
            Err(e) => {
                report.stat(format!("skipped.n{n}"), 1.0);
                report.gate(format!("factorization.n{n}"), false);
                let _ = e;
                continue;
            }
        };
        let grid_ref = &grid;
        let f0_ref = &f0;
        let mut errors: Vec<f64> = (0..cfg.replicates)
            .into_par_iter()
            .map(|r| {
                let stream = (ni * cfg.replicates + r) as u64;
                let mut rng = seeded_rng(cfg.seed, stream);
                let data = f0_ref.sample(&mut rng, n);
                let rs = solve_ranks(&data, grid_ref, Some(f0_ref), derive_seed(cfg.seed, stream));
                data.iter()
                    .zip(&rs)
                    .map(|(z, r)| {
                        let oracle =
                            codf_closed_form_spherical(|t| f0_ref.radial_cdf(t).unwrap(), z);
                        let diff: Vec<f64> =
                            r.image.iter().zip(&oracle).map(|(a, b)| a - b).collect();
                        norm(&diff)
                    })
                    .fold(0.0f64, f64::max)
            })
            .collect();
        errors.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = errors[errors.len() / 2];
        report.stat(format!("median_sup_error.n{n}"), median);
        medians.push(median);
    }

    let strictly_decreasing = medians.windows(2).all(|w| w[0] > w[1]);
    report.gate("medians_strictly_decreasing", strictly_decreasing);
    if let (Some(first), Some(last)) = (medians.first(), medians.last()) {
        let ratio = first / last;
        report.stat("shrinkage_ratio", ratio);
        report.gate("shrinkage_ratio_met", ratio >= cfg.ratio_threshold);
    } else {
        report.gate("enough_sizes", false);
    }

    report.runtime_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

// ---------------------------------------------------------------------------
// Null rank ensemble shared by the bridge-law and joint-convergence checks
// ---------------------------------------------------------------------------

/// One local alternative `(tau, eta)` by tangent catalog name.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalSpec {
    pub tau: Vec<f64>,
    pub eta: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleConfig {
    pub f0: String,
    pub d: usize,
    pub locals: Vec<LocalSpec>,
    /// Tangents appearing in partial sums (catalog names).
    pub tangents: Vec<String>,
    pub u_list: Vec<f64>,
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    pub alpha: f64,
    /// Monte Carlo draws for the information structure.
    pub info_draws: usize,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            f0: "gaussian".into(),
            d: 2,
            locals: vec![
                LocalSpec {
                    tau: vec![0.6, -0.4],
                    eta: Some("tanh1".into()),
                },
                LocalSpec {
                    tau: vec![0.0, 0.0],
                    eta: None,
                },
            ],
            tangents: vec!["tanh1".into()],
            u_list: vec![0.25, 0.5, 0.75],
            n: 2000,
            replicates: 5000,
            seed: 20_240_005,
            alpha: 0.001,
        info_draws: 1_000_000,
        }
    }
}

/// Joint null-hypothesis samples of the finite-`n` statistics: one row per
/// replicate of (LLR per local alternative, centered partial sum per
/// (tangent, u)).
pub struct NullRankEnsemble {
    pub config: EnsembleConfig,
    pub grid: Grid,
    pub tangents: Vec<TangentFunction>,
    pub scores: Vec<BallScore>,
    /// `llr[j][r]`: log-likelihood ratio of local `j` in replicate `r`.
    pub llr: Vec<Vec<f64>>,
    /// `partial[t][u][r]`: partial sum of tangent `t` at `u_list[u]`.
    pub partial: Vec<Vec<Vec<f64>>>,
    /// Exact grid variance of each centered tangent score.
    pub sigma_b2: Vec<f64>,
}

/// Simulate the finite-`n` null ensemble. The same draw serves the bridge
/// variance check and the joint weak-convergence check.
pub fn simulate_null_ensemble(cfg: &EnsembleConfig) -> Result<NullRankEnsemble> {
    let f0 = spherical_by_name(&cfg.f0, cfg.d)?;
    let model = ModelSpec::location(f0.clone());
    for u in &cfg.u_list {
        if !(0.0..=1.0).contains(u) {
            return Err(Error::invalid("u_list", format!("u = {u} outside [0, 1]")));
        }
    }
    let grid = resolve_grid(cfg.n, cfg.d, None, None, derive_seed(cfg.seed, 1))?;

    let tangents: Vec<TangentFunction> = cfg
        .tangents
        .iter()
        .map(|name| catalog_tangent(name, cfg.d))
        .collect::<Result<_>>()?;
    let qmap = spherical_quantile_map(&f0)?;
    let scores: Vec<BallScore> = tangents
        .iter()
        .map(|t| ball_score_from_tangent(t, Arc::clone(&qmap)))
        .collect();

    // Local alternatives: tangent names must resolve within the list so the
    // finite-n and limit grams agree.
    let locals: Vec<LocalParam> = cfg
        .locals
        .iter()
        .map(|spec| {
            let eta = match &spec.eta {
                None => TangentFunction::zero(),
                Some(name) => {
                    if !cfg.tangents.contains(name) {
                        return Err(Error::invalid(
                            "locals",
                            format!("tangent `{name}` missing from the tangent list"),
                        ));
                    }
                    catalog_tangent(name, cfg.d)?
                }
            };
            LocalParam::new(vec![0.0; cfg.d], spec.tau.clone(), eta, cfg.n)
        })
        .collect::<Result<_>>()?;

    // Exact grid variance of each centered score (the finite-population
    // oracle ingredient).
    let sigma_b2: Vec<f64> = scores
        .iter()
        .map(|score| {
            let vals: Vec<f64> = grid.points.iter().map(|g| score.eval(g)[0]).collect();
            let m = mean(&vals);
            vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / vals.len() as f64
        })
        .collect();

    let grid_ref = &grid;
    let f0_ref = &f0;
    let model_ref = &model;
    let locals_ref = &locals;
    let scores_ref = &scores;
    let rows: Vec<(Vec<f64>, Vec<Vec<f64>>)> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let stream = r as u64;
            let mut rng = seeded_rng(cfg.seed, stream);
            let data = f0_ref.sample(&mut rng, cfg.n);
            let llrs: Vec<f64> = locals_ref
                .iter()
                .map(|local| {
                    log_likelihood_ratio_finite_n(model_ref, &data, local)
                        .expect("perturbation positive by construction")
                })
                .collect();
            let rs = solve_ranks(&data, grid_ref, Some(f0_ref), derive_seed(cfg.seed, stream));
            let partials: Vec<Vec<f64>> = scores_ref
                .iter()
                .map(|score| {
                    partial_sum_profile(score, &rs, &cfg.u_list)
                        .expect("u values validated")
                        .into_iter()
                        .map(|v| v.value[0])
                        .collect()
                })
                .collect();
            (llrs, partials)
        })
        .collect();

    let mut llr = vec![Vec::with_capacity(cfg.replicates); locals.len()];
    let mut partial =
        vec![vec![Vec::with_capacity(cfg.replicates); cfg.u_list.len()]; tangents.len()];
    for (llrs, partials) in rows {
        for (j, v) in llrs.into_iter().enumerate() {
            llr[j].push(v);
        }
        for (t, per_u) in partials.into_iter().enumerate() {
            for (u, v) in per_u.into_iter().enumerate() {
                partial[t][u].push(v);
            }
        }
    }

    Ok(NullRankEnsemble {
        config: cfg.clone(),
        grid,
        tangents,
        scores,
        llr,
        partial,
        sigma_b2,
    })
}

// ---------------------------------------------------------------------------
// Bridge law of the partial-sum process
// ---------------------------------------------------------------------------

/// Variance and covariance of the centered partial sums against the
/// finite-population sampling oracle: under the null the images are an
/// exchangeable draw without replacement from the grid, so
/// `Var T(u) = m (n - m) sigma_b^2 / (n (n - 1))` with `m = floor(un)`, and
/// the covariance across `u` values is `m_a (n - m_b) sigma_b^2 / (n (n-1))`.
/// The gates compare against the limiting bridge values `u(1-u) sigma_b^2`
/// and `(min - product) sigma_b^2` at the declared tolerances.
pub fn check_bridge_law(ensemble: &NullRankEnsemble) -> Result<CheckReport> {
    let start = Instant::now();
    let cfg = &ensemble.config;
    let mut report = CheckReport::new("bridge_law", cfg.replicates, cfg.seed, cfg.alpha);
    let var_tolerance = 0.05;
    report.threshold("variance_relative_tolerance", var_tolerance);
    report.threshold("covariance_se_band", 3.0);
    let n = cfg.n as f64;

    for (t, label) in cfg.tangents.iter().enumerate() {
        let sigma = ensemble.sigma_b2[t];
        report.stat(format!("sigma_b2.{label}"), sigma);
        for (ui, &u) in cfg.u_list.iter().enumerate() {
            let sample = &ensemble.partial[t][ui];
            let v = variance(sample);
            let bridge = u * (1.0 - u) * sigma;
            let m = (u * n).floor();
            let exact = m * (n - m) / (n * (n - 1.0)) * sigma;
            report.stat(format!("var.{label}.u{u}"), v);
            report.stat(format!("var_exact_oracle.{label}.u{u}"), exact);
            if bridge > 0.0 {
                report.gate_at_most(
                    format!("var_rel_err.{label}.u{u}"),
                    (v - bridge).abs() / bridge,
                    var_tolerance,
                );
            }
            // Joint Gaussianity across u values: empirical covariance within
            // three standard errors of the oracle.
            for (uj, &u2) in cfg.u_list.iter().enumerate().skip(ui + 1) {
                let other = &ensemble.partial[t][uj];
                let cov = crate::stats::covariance(sample, other);
                let oracle = (u.min(u2) - u * u2) * sigma;
                // Standard error of the sample covariance by the delta
                // method.
                let (ma, mb) = (mean(sample), mean(other));
                let m22 = sample
                    .iter()
                    .zip(other)
                    .map(|(x, y)| (x - ma).powi(2) * (y - mb).powi(2))
                    .sum::<f64>()
                    / sample.len() as f64;
                let se = ((m22 - cov * cov).max(0.0) / sample.len() as f64).sqrt();
                report.stat(format!("cov.{label}.u{u}.u{u2}"), cov);
                report.gate_at_most(
                    format!("cov_err_in_se.{label}.u{u}.u{u2}"),
                    (cov - oracle).abs() / se,
                    3.0,
                );
            }
        }
    }

    report.runtime_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

// ---------------------------------------------------------------------------
// Joint weak convergence to the Brownian drift experiment
// ---------------------------------------------------------------------------

/// Compare the finite-`n` joint law of (LLRs, centered partial sums) under
/// the null with the limit law of (Girsanov log-likelihoods, bridge values):
/// per-coordinate two-sample KS plus vanishing cross-correlations in both
/// samples (rank statistics are exactly independent of the likelihood
/// ratios at finite `n`; bridges are independent of endpoints in the
/// limit).
pub fn check_joint_weak_convergence(ensemble: &NullRankEnsemble) -> Result<CheckReport> {
    let start = Instant::now();
    let cfg = &ensemble.config;
    let f0 = spherical_by_name(&cfg.f0, cfg.d)?;
    let model = ModelSpec::location(f0.clone());
    let mut report =
        CheckReport::new("joint_weak_convergence", cfg.replicates, cfg.seed, cfg.alpha);
    let corr_bound = 3.0 / (cfg.replicates as f64).sqrt();
    report.threshold("alpha", cfg.alpha);
    report.threshold("corr_bound", corr_bound);

    // The limit experiment runs on the information structure of the same
    // model and tangent list.
    let info = information_structure(
        &model,
        &ensemble.tangents,
        cfg.info_draws,
        derive_seed(cfg.seed, 2),
    )?;
    let mut time_grid: Vec<f64> = cfg.u_list.clone();
    time_grid.push(0.0);
    time_grid.push(1.0);
    time_grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    time_grid.dedup();
    let config = Arc::new(DriftConfig::new(
        info,
        time_grid.clone(),
        vec![0.0; cfg.d],
        None,
        derive_seed(cfg.seed, 3),
    )?);

    let tangent_index = |name: &Option<String>| -> Result<Option<usize>> {
        match name {
            None => Ok(None),
            Some(n) => cfg
                .tangents
                .iter()
                .position(|t| t == n)
                .map(Some)
                .ok_or_else(|| Error::invalid("locals", format!("tangent `{n}` not in gram"))),
        }
    };

    // Limit-side ensemble.
    let mut limit_llr: Vec<Vec<f64>> = vec![Vec::with_capacity(cfg.replicates); cfg.locals.len()];
    let mut limit_bridge: Vec<Vec<Vec<f64>>> =
        vec![vec![Vec::with_capacity(cfg.replicates); cfg.u_list.len()]; cfg.tangents.len()];
    let u_positions: Vec<usize> = cfg
        .u_list
        .iter()
        .map(|u| time_grid.iter().position(|t| t == u).unwrap())
        .collect();
    for r in 0..cfg.replicates {
        let path = sample_drift_path(&config, r as u64);
        for (j, spec) in cfg.locals.iter().enumerate() {
            let idx = tangent_index(&spec.eta)?;
            limit_llr[j].push(loglik_drift(&path, &spec.tau, idx)?);
        }
        for t in 0..cfg.tangents.len() {
            let bridge = extract_bridge(&path, t)?;
            for (ui, &pos) in u_positions.iter().enumerate() {
                limit_bridge[t][ui].push(bridge.values[pos]);
            }
        }
    }

    // Marginal agreement per coordinate.
    for (j, spec) in cfg.locals.iter().enumerate() {
        let label = format!("llr{j}[tau={:?},eta={:?}]", spec.tau, spec.eta);
        let finite = &ensemble.llr[j];
        let limit = &limit_llr[j];
        if variance(finite) < 1e-300 && variance(limit) < 1e-300 {
            // Degenerate coordinate (the null itself): identically zero on
            // both sides.
            report.gate(format!("degenerate.{label}"), finite[0] == 0.0 && limit[0] == 0.0);
            continue;
        }
        let out = ks_two_sample(finite, limit)?;
        report.gate_p_above(format!("ks.{label}"), out.p_value);
    }
    for (t, name) in cfg.tangents.iter().enumerate() {
        for (ui, &u) in cfg.u_list.iter().enumerate() {
            let out = ks_two_sample(&ensemble.partial[t][ui], &limit_bridge[t][ui])?;
            report.gate_p_above(format!("ks.partial.{name}.u{u}"), out.p_value);
        }
    }

    // Cross-correlations vanish in both samples.
    for (j, spec) in cfg.locals.iter().enumerate() {
        for (t, name) in cfg.tangents.iter().enumerate() {
            for (ui, &u) in cfg.u_list.iter().enumerate() {
                if let Some(c) = correlation(&ensemble.llr[j], &ensemble.partial[t][ui]) {
                    report.gate_at_most(
                        format!("corr.finite.llr{j}.{name}.u{u}"),
                        c.abs(),
                        corr_bound,
                    );
                }
                if let Some(c) = correlation(&limit_llr[j], &limit_bridge[t][ui]) {
                    report.gate_at_most(
                        format!("corr.limit.llr{j}.{name}.u{u}"),
                        c.abs(),
                        corr_bound,
                    );
                }
                let _ = spec;
            }
        }
    }

    report.runtime_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Convenience wrapper: simulate the ensemble and run both checks it feeds.
pub fn check_bridge_and_joint(cfg: &EnsembleConfig) -> Result<(CheckReport, CheckReport)> {
    let ensemble = simulate_null_ensemble(cfg)?;
    Ok((
        check_bridge_law(&ensemble)?,
        check_joint_weak_convergence(&ensemble)?,
    ))
}

// ---------------------------------------------------------------------------
// Efficiency / asymptotic representation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EfficiencyConfig {
    pub f0: String,
    pub alt_density: String,
    pub d: usize,
    pub score: String,
    pub split: f64,
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    pub alpha: f64,
    pub min_correlation: f64,
    pub variance_ratio_tolerance: f64,
}

impl Default for EfficiencyConfig {
    fn default() -> Self {
        EfficiencyConfig {
            f0: "gaussian".into(),
            alt_density: "t3".into(),
            d: 2,
            score: "gaussian_location".into(),
            split: 0.5,
            n: 2000,
            replicates: 500,
            seed: 20_240_008,
            alpha: 0.001,
            min_correlation: 0.95,
            variance_ratio_tolerance: 0.10,
        }
    }
}

/// Semiparametric efficiency of the matched-score rank statistic: at the
/// reference density it reproduces the parametric contrast statistic
/// (correlation at least `min_correlation`, variance ratio within
/// `variance_ratio_tolerance` of one), while under a different generating
/// density its law is unchanged (distribution-free) and the parametric
/// statistic's is not.
pub fn check_efficiency(cfg: &EfficiencyConfig) -> Result<CheckReport> {
    let start = Instant::now();
    let f0 = spherical_by_name(&cfg.f0, cfg.d)?;
    let alt = ReferenceDensity::by_name(&cfg.alt_density, cfg.d)?;
    let model = ModelSpec::location(f0.clone());
    let score = catalog_score(&cfg.score, cfg.d)?;
    let grid = resolve_grid(cfg.n, cfg.d, None, None, derive_seed(cfg.seed, 1))?;
    let constants = two_sample_split(cfg.n, cfg.split);
    let mut report = CheckReport::new("efficiency", cfg.replicates, cfg.seed, cfg.alpha);
    report.threshold("min_correlation", cfg.min_correlation);
    report.threshold("variance_ratio_tolerance", cfg.variance_ratio_tolerance);
    report.threshold("alpha", cfg.alpha);

    let centered: Vec<f64> = {
        let cbar = constants.iter().sum::<f64>() / cfg.n as f64;
        constants.iter().map(|c| c - cbar).collect()
    };
    let ssq: f64 = centered.iter().map(|c| c * c).sum::<f64>();
    let standardizer = ssq.sqrt();

    let run = |density: &ReferenceDensity, stream_base: u64| -> Vec<(Vec<f64>, Vec<f64>)> {
        let grid_ref = &grid;
        let score_ref = &score;
        let centered_ref = &centered;
        let model_ref = &model;
        (0..cfg.replicates)
            .into_par_iter()
            .map(|r| {
                let stream = stream_base + r as u64;
                let mut rng = seeded_rng(cfg.seed, stream);
                let data = density.sample(&mut rng, cfg.n);
                // Parametric contrast statistic with the same constants.
                let mut parametric = vec![0.0; cfg.d];
                for (i, z) in data.iter().enumerate() {
                    let phi = model_ref.f0.location_score(z);
                    for (acc, v) in parametric.iter_mut().zip(&phi) {
                        *acc += centered_ref[i] * v;
                    }
                }
                parametric.iter_mut().for_each(|v| *v /= standardizer);

                let rs = solve_ranks(&data, grid_ref, Some(density), derive_seed(cfg.seed, stream));
                let rank_stat =
                    crate::scores::approximate_score_statistic(centered_ref, score_ref, &rs)
                        .expect("constants non-degenerate");
                (parametric, rank_stat.value)
            })
            .collect()
    };

    let null_rows = run(&f0, 0);
    let alt_rows = run(&alt, cfg.replicates as u64);

    // Correlation and variance ratio per component at the reference density.
    let mut min_corr = f64::INFINITY;
    for coord in 0..cfg.d {
        let a: Vec<f64> = null_rows.iter().map(|(p, _)| p[coord]).collect();
        let b: Vec<f64> = null_rows.iter().map(|(_, t)| t[coord]).collect();
        let c = correlation(&a, &b).unwrap_or(0.0);
        min_corr = min_corr.min(c);
        report.stat(format!("corr.coord{coord}"), c);
        let ratio = variance(&b) / variance(&a);
        report.stat(format!("variance_ratio.coord{coord}"), ratio);
        report.gate_at_most(
            format!("variance_ratio_err.coord{coord}"),
            (ratio - 1.0).abs(),
            cfg.variance_ratio_tolerance,
        );
    }
    report.gate("correlation_met", min_corr >= cfg.min_correlation);
    report.stat("min_correlation_observed", min_corr);

    // Law invariance of the rank statistic, law shift of the parametric one.
    let mut rank_min_p = 1.0f64;
    let mut param_min_p = 1.0f64;
    for coord_label in 0..=cfg.d {
        let pick = |rows: &[(Vec<f64>, Vec<f64>)], parametric: bool| -> Vec<f64> {
            rows.iter()
                .map(|(p, t)| {
                    let v = if parametric { p } else { t };
                    if coord_label < cfg.d {
                        v[coord_label]
                    } else {
                        v.iter().map(|x| x * x).sum()
                    }
                })
                .collect()
        };
        let out = ks_two_sample(&pick(&null_rows, false), &pick(&alt_rows, false))?;
        rank_min_p = rank_min_p.min(out.p_value);
        report.gate_p_above(format!("rank_stat_invariance.coord{coord_label}"), out.p_value);
        let out = ks_two_sample(&pick(&null_rows, true), &pick(&alt_rows, true))?;
        param_min_p = param_min_p.min(out.p_value);
    }
    report.stat("parametric_shift_min_p", param_min_p);
    report.stat("rank_invariance_min_p", rank_min_p);
    report.gate("negative_control.parametric_law_shifts", param_min_p < cfg.alpha);

    report.runtime_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}
