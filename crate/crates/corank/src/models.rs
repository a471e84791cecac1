//! Concrete unspecified-density experiments: location shifts and linear
//! regression with i.i.d. residuals from a reference density, local
//! reparametrizations `theta_0 + n^{-1/2} tau` and
//! `(1 + n^{-1/2} eta) f0`, their exact finite-sample likelihood ratios,
//! parametric central sequences, Monte Carlo information quantities, and the
//! classical tangent-space projection.

use crate::density::ReferenceDensity;
use crate::error::{Error, Result};
use crate::rng::seeded_rng;
use crate::scores::TangentFunction;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Residual structure of the experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Location,
    LinearRegression,
}

/// An unspecified-density experiment: the residual map plus the reference
/// density `f0` at which local perturbations are anchored.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Residual dimension.
    pub d: usize,
    /// Parameter dimension: `d` for location, `q * d` for regression with
    /// `q` covariates per observation.
    pub k: usize,
    /// `n x q` covariate rows; present iff `kind == LinearRegression`.
    pub covariates: Option<Vec<Vec<f64>>>,
    pub f0: ReferenceDensity,
}

impl ModelSpec {
    pub fn location(f0: ReferenceDensity) -> Self {
        let d = f0.dim();
        ModelSpec {
            kind: ModelKind::Location,
            d,
            k: d,
            covariates: None,
            f0,
        }
    }

    pub fn regression(f0: ReferenceDensity, covariates: Vec<Vec<f64>>) -> Result<Self> {
        if covariates.is_empty() {
            return Err(Error::invalid("covariates", "need at least one row"));
        }
        let q = covariates[0].len();
        if q == 0 || covariates.iter().any(|c| c.len() != q) {
            return Err(Error::invalid("covariates", "rows must share a positive width"));
        }
        let d = f0.dim();
        Ok(ModelSpec {
            kind: ModelKind::LinearRegression,
            d,
            k: q * d,
            covariates: Some(covariates),
            f0,
        })
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.k {
            return Err(Error::SizeMismatch {
                field: "theta",
                expected: self.k,
                actual: theta.len(),
            });
        }
        Ok(())
    }

    /// Mean of observation `i` as a function of the parameter: `theta` for
    /// location, `Theta^T c_i` for regression (with `theta` laid out as `q`
    /// consecutive blocks of length `d`).
    fn mean_of(&self, theta: &[f64], i: usize) -> Vec<f64> {
        match self.kind {
            ModelKind::Location => theta.to_vec(),
            ModelKind::LinearRegression => {
                let c = &self.covariates.as_ref().unwrap()[i];
                let mut mu = vec![0.0; self.d];
                for (j, cj) in c.iter().enumerate() {
                    for l in 0..self.d {
                        mu[l] += cj * theta[j * self.d + l];
                    }
                }
                mu
            }
        }
    }

    fn check_data(&self, data: &[Vec<f64>]) -> Result<()> {
        if let Some(cov) = &self.covariates {
            if cov.len() != data.len() {
                return Err(Error::SizeMismatch {
                    field: "data",
                    expected: cov.len(),
                    actual: data.len(),
                });
            }
        }
        for x in data {
            if x.len() != self.d {
                return Err(Error::SizeMismatch {
                    field: "data[i]",
                    expected: self.d,
                    actual: x.len(),
                });
            }
        }
        Ok(())
    }
}

/// JSON-facing experiment description: density by catalog name, covariates
/// by CSV path, tangent by catalog name.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub kind: String,
    pub d: usize,
    pub f0: String,
    /// CSV path of covariate rows (regression only).
    pub covariates: Option<String>,
    pub theta0: Vec<f64>,
    pub tau: Vec<f64>,
    /// Tangent catalog name; absent means the zero tangent.
    pub eta: Option<String>,
    pub n: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            kind: "location".into(),
            d: 2,
            f0: "gaussian".into(),
            covariates: None,
            theta0: vec![0.0, 0.0],
            tau: vec![0.0, 0.0],
            eta: None,
            n: 100,
            seed: 1,
        }
    }
}

impl ModelConfig {
    /// Resolve the config into a model and the local parameter it localizes.
    pub fn build(&self) -> Result<(ModelSpec, LocalParam)> {
        let f0 = ReferenceDensity::by_name(&self.f0, self.d)?;
        let model = match self.kind.as_str() {
            "location" => ModelSpec::location(f0),
            "linear_regression" => {
                let path = self.covariates.as_ref().ok_or_else(|| {
                    Error::invalid("covariates", "linear_regression needs a covariate file")
                })?;
                let rows = crate::serialize::read_data_csv(std::fs::File::open(path)?)?;
                ModelSpec::regression(f0, rows)?
            }
            other => {
                return Err(Error::invalid(
                    "kind",
                    format!("unknown model kind `{other}`"),
                ))
            }
        };
        let eta = match &self.eta {
            None => crate::scores::TangentFunction::zero(),
            Some(name) => crate::scores::catalog_tangent(name, self.d)?,
        };
        let local = LocalParam::new(self.theta0.clone(), self.tau.clone(), eta, self.n)?;
        Ok((model, local))
    }
}

/// Residuals `Z_i(theta)`.
pub fn residuals(model: &ModelSpec, data: &[Vec<f64>], theta: &[f64]) -> Result<Vec<Vec<f64>>> {
    model.check_theta(theta)?;
    model.check_data(data)?;
    Ok(data
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let mu = model.mean_of(theta, i);
            x.iter().zip(&mu).map(|(xv, mv)| xv - mv).collect()
        })
        .collect())
}

/// A local parameter around `(theta0, f0)`: the shift direction `tau`, the
/// density perturbation direction `eta`, and the sample size setting the
/// localization rate.
#[derive(Debug, Clone)]
pub struct LocalParam {
    pub theta0: Vec<f64>,
    pub tau: Vec<f64>,
    pub eta: TangentFunction,
    pub n: usize,
}

impl LocalParam {
    pub fn new(theta0: Vec<f64>, tau: Vec<f64>, eta: TangentFunction, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", "sample size must be positive"));
        }
        if theta0.len() != tau.len() {
            return Err(Error::SizeMismatch {
                field: "tau",
                expected: theta0.len(),
                actual: tau.len(),
            });
        }
        let lp = LocalParam {
            theta0,
            tau,
            eta,
            n,
        };
        lp.check_positivity()?;
        Ok(lp)
    }

    fn scale(&self) -> f64 {
        1.0 / (self.n as f64).sqrt()
    }

    /// `theta_n = theta0 + n^{-1/2} tau`.
    pub fn theta_n(&self) -> Vec<f64> {
        let s = self.scale();
        self.theta0
            .iter()
            .zip(&self.tau)
            .map(|(t0, t)| t0 + s * t)
            .collect()
    }

    fn check_positivity(&self) -> Result<()> {
        if self.scale() * self.eta.bound >= 1.0 {
            return Err(Error::invalid(
                "eta",
                format!(
                    "n^(-1/2) * sup|eta| = {} >= 1: perturbed density not positive",
                    self.scale() * self.eta.bound
                ),
            ));
        }
        Ok(())
    }
}

/// Draw `n` observations under the local law: residuals from
/// `(1 + n^{-1/2} eta) f0` by rejection against `f0`, then the inverse
/// residual map at `theta_n`. Deterministic given `seed`.
pub fn sample_local(model: &ModelSpec, local: &LocalParam, seed: u64) -> Result<Vec<Vec<f64>>> {
    Ok(sample_local_with_stats(model, local, seed)?.0)
}

/// As [`sample_local`], also returning the total number of rejection
/// proposals (for acceptance-rate diagnostics).
pub fn sample_local_with_stats(
    model: &ModelSpec,
    local: &LocalParam,
    seed: u64,
) -> Result<(Vec<Vec<f64>>, u64)> {
    model.check_theta(&local.theta0)?;
    local.check_positivity()?;
    if !local.eta.is_centered() {
        return Err(Error::invalid("eta", "tangent must be centered under f0"));
    }
    if let Some(cov) = &model.covariates {
        if cov.len() != local.n {
            return Err(Error::SizeMismatch {
                field: "n",
                expected: cov.len(),
                actual: local.n,
            });
        }
    }
    let s = local.scale();
    let envelope = 1.0 + s * local.eta.bound;
    let theta_n = local.theta_n();
    let mut rng = seeded_rng(seed, 0);
    let mut proposals = 0u64;
    let mut data = Vec::with_capacity(local.n);
    for i in 0..local.n {
        let z = loop {
            proposals += 1;
            let z = model.f0.sample_one(&mut rng);
            let weight = 1.0 + s * local.eta.eval(&z);
            if weight < 0.0 {
                return Err(Error::invalid(
                    "eta",
                    "perturbed density negative at a sampled point (bound too small)",
                ));
            }
            let u: f64 = rng.random();
            if u * envelope < weight {
                break z;
            }
        };
        let mu = model.mean_of(&theta_n, i);
        data.push(z.iter().zip(&mu).map(|(zv, mv)| zv + mv).collect());
    }
    Ok((data, proposals))
}

/// The parametric central sequence `n^{-1/2} sum_i s_i` with per-observation
/// score `phi_f0(Z_i)` (location) or `c_i (x) phi_f0(Z_i)` (regression).
pub fn central_sequence(model: &ModelSpec, data: &[Vec<f64>], theta: &[f64]) -> Result<Vec<f64>> {
    let resid = residuals(model, data, theta)?;
    let n = resid.len();
    let scale = 1.0 / (n as f64).sqrt();
    let mut delta = vec![0.0; model.k];
    for (i, z) in resid.iter().enumerate() {
        let phi = model.f0.location_score(z);
        if phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("score"));
        }
        match model.kind {
            ModelKind::Location => {
                for (acc, v) in delta.iter_mut().zip(&phi) {
                    *acc += v;
                }
            }
            ModelKind::LinearRegression => {
                let c = &model.covariates.as_ref().unwrap()[i];
                for (j, cj) in c.iter().enumerate() {
                    for (l, v) in phi.iter().enumerate() {
                        delta[j * model.d + l] += cj * v;
                    }
                }
            }
        }
    }
    delta.iter_mut().for_each(|v| *v *= scale);
    Ok(delta)
}

/// Exact finite-`n` log-likelihood ratio of the local law `(tau, eta)`
/// against `(0, 0)`:
/// `sum_i [log f0(Z_i(theta_n)) + log(1 + n^{-1/2} eta(Z_i(theta_n)))
///         - log f0(Z_i(theta0))]`.
pub fn log_likelihood_ratio_finite_n(
    model: &ModelSpec,
    data: &[Vec<f64>],
    local: &LocalParam,
) -> Result<f64> {
    let resid_null = residuals(model, data, &local.theta0)?;
    let resid_local = residuals(model, data, &local.theta_n())?;
    let s = local.scale();
    let mut llr = 0.0;
    for (z0, z1) in resid_null.iter().zip(&resid_local) {
        let perturbation = 1.0 + s * local.eta.eval(z1);
        if perturbation <= 0.0 {
            return Err(Error::Numerical(
                "perturbed density non-positive at a residual".into(),
            ));
        }
        llr += model.f0.log_density(z1) + perturbation.ln() - model.f0.log_density(z0);
    }
    if !llr.is_finite() {
        return Err(Error::NonFinite("log_likelihood_ratio"));
    }
    Ok(llr)
}

/// Monte Carlo estimates of the information quantities at `(theta0, f0)`:
/// the parametric block, the parameter-tangent cross informations, and the
/// tangent gram matrix, each with componentwise standard errors.
#[derive(Debug, Clone)]
pub struct InformationStructure {
    pub tangent_labels: Vec<String>,
    /// `k x k` parametric information.
    pub i_tt: DMatrix<f64>,
    /// `k x l`: column `j` is the cross information with tangent `j`.
    pub i_teta: DMatrix<f64>,
    /// `l x l` tangent gram matrix.
    pub i_etaeta: DMatrix<f64>,
    pub se_i_tt: DMatrix<f64>,
    pub se_i_teta: DMatrix<f64>,
    pub se_i_etaeta: DMatrix<f64>,
    pub draws: usize,
    pub seed: u64,
}

impl InformationStructure {
    pub fn k(&self) -> usize {
        self.i_tt.nrows()
    }

    pub fn tangent_count(&self) -> usize {
        self.i_etaeta.nrows()
    }

    pub fn cross_for_label(&self, label: &str) -> Option<DVector<f64>> {
        let idx = self.tangent_labels.iter().position(|l| l == label)?;
        Some(self.i_teta.column(idx).into_owned())
    }

    /// The `(k + l) x (k + l)` block gram of `(Delta_int, Delta_nuis)`.
    pub fn block_gram(&self) -> DMatrix<f64> {
        let k = self.k();
        let l = self.tangent_count();
        let mut g = DMatrix::zeros(k + l, k + l);
        g.view_mut((0, 0), (k, k)).copy_from(&self.i_tt);
        g.view_mut((0, k), (k, l)).copy_from(&self.i_teta);
        g.view_mut((k, 0), (l, k)).copy_from(&self.i_teta.transpose());
        g.view_mut((k, k), (l, l)).copy_from(&self.i_etaeta);
        g
    }

    /// Symmetry and positivity checks: the parametric block must be positive
    /// definite, the tangent gram positive semidefinite up to `-1e-9`.
    pub fn validate(&self) -> Result<()> {
        let sym_err = (&self.i_tt - self.i_tt.transpose()).abs().max();
        if sym_err > 1e-9 {
            return Err(Error::Numerical(format!(
                "parametric information not symmetric (max asymmetry {sym_err})"
            )));
        }
        let eig_tt = self.i_tt.clone().symmetric_eigen().eigenvalues;
        if eig_tt.min() <= 0.0 {
            return Err(Error::Numerical(format!(
                "parametric information not positive definite (min eigenvalue {})",
                eig_tt.min()
            )));
        }
        if self.tangent_count() > 0 {
            let eig = self.i_etaeta.clone().symmetric_eigen().eigenvalues;
            if eig.min() < -1e-9 {
                return Err(Error::Numerical(format!(
                    "tangent gram indefinite (min eigenvalue {})",
                    eig.min()
                )));
            }
        }
        Ok(())
    }
}

/// Estimate the information structure by Monte Carlo with `draws` reference
/// draws. Covariate moments enter exactly for regression models.
pub fn information_structure(
    model: &ModelSpec,
    tangent_list: &[TangentFunction],
    draws: usize,
    seed: u64,
) -> Result<InformationStructure> {
    if draws < 2 {
        return Err(Error::invalid("draws", "need at least two draws"));
    }
    for eta in tangent_list {
        if !eta.is_centered() {
            return Err(Error::invalid(
                "tangent_list",
                format!("tangent `{}` is not centered", eta.label),
            ));
        }
    }
    let d = model.d;
    let l = tangent_list.len();
    let mut rng = seeded_rng(seed, 0);

    // Accumulate first and second moments of the per-draw products.
    let mut phi2 = DMatrix::zeros(d, d);
    let mut phi2_sq = DMatrix::zeros(d, d);
    let mut cross = DMatrix::zeros(d, l);
    let mut cross_sq = DMatrix::zeros(d, l);
    let mut gram = DMatrix::zeros(l, l);
    let mut gram_sq = DMatrix::zeros(l, l);
    for _ in 0..draws {
        let z = model.f0.sample_one(&mut rng);
        let phi = model.f0.location_score(&z);
        let etas: Vec<f64> = tangent_list.iter().map(|t| t.eval(&z)).collect();
        for a in 0..d {
            for b in 0..d {
                let v = phi[a] * phi[b];
                phi2[(a, b)] += v;
                phi2_sq[(a, b)] += v * v;
            }
            for j in 0..l {
                let v = phi[a] * etas[j];
                cross[(a, j)] += v;
                cross_sq[(a, j)] += v * v;
            }
        }
        for i in 0..l {
            for j in 0..l {
                let v = etas[i] * etas[j];
                gram[(i, j)] += v;
                gram_sq[(i, j)] += v * v;
            }
        }
    }
    let nf = draws as f64;
    let finalize = |sum: DMatrix<f64>, sum_sq: DMatrix<f64>| {
        let mean = sum / nf;
        let variance = sum_sq / nf - mean.component_mul(&mean);
        let se = variance.map(|v| (v.max(0.0) / nf).sqrt());
        (mean, se)
    };
    let (i_phi, se_phi) = finalize(phi2, phi2_sq);
    let (i_cross, se_cross) = finalize(cross, cross_sq);
    let (i_gram, se_gram) = finalize(gram, gram_sq);

    // Lift the residual-level quantities to parameter space.
    let (i_tt, se_i_tt, i_teta, se_i_teta) = match model.kind {
        ModelKind::Location => (i_phi, se_phi, i_cross, se_cross),
        ModelKind::LinearRegression => {
            let cov = model.covariates.as_ref().unwrap();
            let q = cov[0].len();
            let n = cov.len() as f64;
            let mut second = DMatrix::zeros(q, q);
            let mut first = DVector::zeros(q);
            for c in cov {
                for a in 0..q {
                    first[a] += c[a] / n;
                    for b in 0..q {
                        second[(a, b)] += c[a] * c[b] / n;
                    }
                }
            }
            (
                second.kronecker(&i_phi),
                second.abs().kronecker(&se_phi),
                first.kronecker(&i_cross),
                first.abs().kronecker(&se_cross),
            )
        }
    };

    let info = InformationStructure {
        tangent_labels: tangent_list.iter().map(|t| t.label.clone()).collect(),
        i_tt,
        i_teta,
        i_etaeta: i_gram,
        se_i_tt,
        se_i_teta,
        se_i_etaeta: se_gram,
        draws,
        seed,
    };
    info.validate()?;
    Ok(info)
}

/// The tangent-space projection of the interest score on the orthocomplement
/// of the nuisance scores: `Delta* = Delta_int - G_tn G_nn^{-1} Delta_nuis`,
/// together with the efficient information `G_tt - G_tn G_nn^{-1} G_tn^T`.
pub fn tangent_projection(
    delta_int: &DVector<f64>,
    delta_nuis: &DVector<f64>,
    g_tt: &DMatrix<f64>,
    g_tn: &DMatrix<f64>,
    g_nn: &DMatrix<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let k = delta_int.len();
    let m = delta_nuis.len();
    if g_tt.shape() != (k, k) || g_tn.shape() != (k, m) || g_nn.shape() != (m, m) {
        return Err(Error::invalid("gram", "inconsistent block shapes"));
    }
    let svd = g_nn.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= 0.0 || smax / smin >= 1e12 {
        return Err(Error::Numerical(format!(
            "nuisance gram ill-conditioned (condition number {:e})",
            if smin > 0.0 { smax / smin } else { f64::INFINITY }
        )));
    }
    let g_nn_inv = g_nn
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("nuisance gram not invertible".into()))?;
    let slope = g_tn * &g_nn_inv;
    let projected = delta_int - &slope * delta_nuis;
    let efficient = g_tt - &slope * g_tn.transpose();
    Ok((projected, efficient))
}
