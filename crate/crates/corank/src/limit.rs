//! The limiting Brownian-drift experiment on a finite time grid.
//!
//! The observation is a `(k + l)`-dimensional Brownian motion whose
//! finite-dimensional covariance is the information block gram and whose
//! drift encodes the local parameter `(tau, eta)`. Log-likelihood ratios
//! depend on the path only through its endpoint (Girsanov), while the
//! bridges extracted from the nuisance components are drift-free: they are
//! the ancillary part of the experiment.

use crate::error::{Error, Result};
use crate::models::InformationStructure;
use crate::rng::seeded_rng;
use nalgebra::{DMatrix, DVector};
use rand_distr::Distribution;
use std::sync::Arc;

/// Configuration of the drift experiment: the information structure (block
/// gram at `u = 1`), the sampling time grid, and the drift parameter under
/// which paths are drawn.
#[derive(Debug, Clone)]
pub struct DriftConfig {
    pub info: InformationStructure,
    pub time_grid: Vec<f64>,
    pub tau: Vec<f64>,
    pub eta_index: Option<usize>,
    pub seed: u64,
    gram: DMatrix<f64>,
    sqrt_gram: DMatrix<f64>,
    drift: DVector<f64>,
}

impl DriftConfig {
    /// `{0.0, 0.1, ..., 1.0}`.
    pub fn default_time_grid() -> Vec<f64> {
        (0..=10).map(|i| i as f64 / 10.0).collect()
    }

    pub fn new(
        info: InformationStructure,
        time_grid: Vec<f64>,
        tau: Vec<f64>,
        eta_index: Option<usize>,
        seed: u64,
    ) -> Result<Self> {
        let mut grid = time_grid;
        if grid.first() != Some(&0.0) {
            grid.insert(0, 0.0);
        }
        if grid.last() != Some(&1.0) {
            return Err(Error::invalid("time_grid", "last point must be 1"));
        }
        if grid.windows(2).any(|w| w[0] >= w[1]) || grid.iter().any(|&u| !(0.0..=1.0).contains(&u))
        {
            return Err(Error::invalid(
                "time_grid",
                "points must be strictly increasing within [0, 1]",
            ));
        }
        if tau.len() != info.k() {
            return Err(Error::SizeMismatch {
                field: "tau",
                expected: info.k(),
                actual: tau.len(),
            });
        }
        if let Some(idx) = eta_index {
            if idx >= info.tangent_count() {
                return Err(Error::invalid(
                    "eta_index",
                    format!("index {idx} out of range for {} tangents", info.tangent_count()),
                ));
            }
        }

        let gram = info.block_gram();
        let eigen = gram.clone().symmetric_eigen();
        if eigen.eigenvalues.min() < -1e-9 {
            return Err(Error::Numerical(format!(
                "block gram indefinite (min eigenvalue {})",
                eigen.eigenvalues.min()
            )));
        }
        // Floor tiny negative eigenvalues at zero before taking the root.
        let floored = eigen.eigenvalues.map(|l| l.max(0.0).sqrt());
        let sqrt_gram = &eigen.eigenvectors * DMatrix::from_diagonal(&floored)
            * eigen.eigenvectors.transpose();

        let drift = drift_vector(&info, &tau, eta_index)?;
        Ok(DriftConfig {
            info,
            time_grid: grid,
            tau,
            eta_index,
            seed,
            gram,
            sqrt_gram,
            drift,
        })
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }
}

/// Mean vector of the endpoint under `(tau, eta)`: the interest block gets
/// `I_tt tau + I_{t,eta}`, each nuisance component `I_{t,eta_j}^T tau +
/// I_{eta_j, eta}`.
fn drift_vector(
    info: &InformationStructure,
    tau: &[f64],
    eta_index: Option<usize>,
) -> Result<DVector<f64>> {
    let k = info.k();
    let l = info.tangent_count();
    if tau.len() != k {
        return Err(Error::SizeMismatch {
            field: "tau",
            expected: k,
            actual: tau.len(),
        });
    }
    if let Some(idx) = eta_index {
        if idx >= l {
            return Err(Error::invalid("eta_index", "tangent index out of range"));
        }
    }
    let tau_v = DVector::from_column_slice(tau);
    let mut drift = DVector::zeros(k + l);
    let mut top = &info.i_tt * &tau_v;
    if let Some(idx) = eta_index {
        top += info.i_teta.column(idx);
    }
    drift.rows_mut(0, k).copy_from(&top);
    for j in 0..l {
        let mut val = info.i_teta.column(j).dot(&tau_v);
        if let Some(idx) = eta_index {
            val += info.i_etaeta[(j, idx)];
        }
        drift[k + j] = val;
    }
    Ok(drift)
}

/// A sampled path of the drift experiment: one `(k + l)`-vector per time
/// grid point, starting at the origin.
#[derive(Debug, Clone)]
pub struct DriftPath {
    pub values: Vec<DVector<f64>>,
    pub config: Arc<DriftConfig>,
}

impl DriftPath {
    pub fn endpoint(&self) -> &DVector<f64> {
        self.values.last().unwrap()
    }
}

/// A Brownian bridge extracted from one nuisance component:
/// `B(u) = Delta_nuis(u) - u * Delta_nuis(1)`, zero at both ends exactly.
#[derive(Debug, Clone)]
pub struct BridgePath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

/// Sample one path under the config's `(tau, eta)` drift. Gaussian
/// increments are exact (no discretization error); `stream` selects the
/// replicate substream of the config seed.
pub fn sample_drift_path(config: &Arc<DriftConfig>, stream: u64) -> DriftPath {
    let mut rng = seeded_rng(config.seed, stream);
    let dim = config.dim();
    let mut values = Vec::with_capacity(config.time_grid.len());
    values.push(DVector::zeros(dim));
    for w in config.time_grid.windows(2) {
        let dt = w[1] - w[0];
        let z = DVector::from_fn(dim, |_, _| {
            rand_distr::StandardNormal.sample(&mut rng)
        });
        let increment = &config.drift * dt + &config.sqrt_gram * z * dt.sqrt();
        let prev = values.last().unwrap();
        values.push(prev + increment);
    }
    DriftPath {
        values,
        config: Arc::clone(config),
    }
}

/// Gaussian-shift log-likelihood ratio of `(tau, eta)` against `(0, 0)`
/// evaluated at an endpoint vector:
/// `Delta_I^T tau + Delta_II,eta - [tau^T I_tt tau + 2 tau^T I_t,eta
///  + I_eta,eta] / 2`.
pub fn loglik_shift(
    config: &DriftConfig,
    endpoint: &DVector<f64>,
    tau: &[f64],
    eta_index: Option<usize>,
) -> Result<f64> {
    let info = &config.info;
    let k = info.k();
    if endpoint.len() != config.dim() {
        return Err(Error::SizeMismatch {
            field: "endpoint",
            expected: config.dim(),
            actual: endpoint.len(),
        });
    }
    if tau.len() != k {
        return Err(Error::SizeMismatch {
            field: "tau",
            expected: k,
            actual: tau.len(),
        });
    }
    let tau_v = DVector::from_column_slice(tau);
    let mut linear = endpoint.rows(0, k).dot(&tau_v);
    let mut quad = (&info.i_tt * &tau_v).dot(&tau_v);
    if let Some(idx) = eta_index {
        if idx >= info.tangent_count() {
            return Err(Error::invalid("eta_index", "tangent index out of range"));
        }
        linear += endpoint[k + idx];
        quad += 2.0 * info.i_teta.column(idx).dot(&tau_v);
        quad += info.i_etaeta[(idx, idx)];
    }
    Ok(linear - 0.5 * quad)
}

/// Girsanov log-likelihood ratio of the drift experiment: a function of the
/// path's endpoint only, computed by the very same arithmetic as
/// [`loglik_shift`] so the two coincide bit for bit.
pub fn loglik_drift(path: &DriftPath, tau: &[f64], eta_index: Option<usize>) -> Result<f64> {
    loglik_shift(&path.config, path.endpoint(), tau, eta_index)
}

/// Extract the Brownian bridge of nuisance component `eta_index`.
pub fn extract_bridge(path: &DriftPath, eta_index: usize) -> Result<BridgePath> {
    let info = &path.config.info;
    if eta_index >= info.tangent_count() {
        return Err(Error::invalid("eta_index", "tangent index out of range"));
    }
    let coord = info.k() + eta_index;
    let end = path.endpoint()[coord];
    let values = path
        .config
        .time_grid
        .iter()
        .zip(&path.values)
        .map(|(&u, v)| v[coord] - u * end)
        .collect();
    Ok(BridgePath {
        times: path.config.time_grid.clone(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{correlation, mean, standard_error, variance};
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    /// Information structure with exact entries (zero standard errors) for
    /// k = 2, one tangent: I_tt = I, I_teta = (0.2, 0), I_etaeta = 1.
    fn toy_info() -> InformationStructure {
        InformationStructure {
            tangent_labels: vec!["eta".into()],
            i_tt: DMatrix::identity(2, 2),
            i_teta: dmatrix![0.2; 0.0],
            i_etaeta: dmatrix![1.0],
            se_i_tt: DMatrix::zeros(2, 2),
            se_i_teta: DMatrix::zeros(2, 1),
            se_i_etaeta: DMatrix::zeros(1, 1),
            draws: 0,
            seed: 0,
        }
    }

    fn toy_config(tau: Vec<f64>, eta_index: Option<usize>, seed: u64) -> Arc<DriftConfig> {
        Arc::new(
            DriftConfig::new(
                toy_info(),
                DriftConfig::default_time_grid(),
                tau,
                eta_index,
                seed,
            )
            .unwrap(),
        )
    }

    #[test]
    fn loglik_hand_example() {
        // Delta_I(1) = (1, 0), Delta_II(1) = 0.5, tau = (1, 1):
        // 1 + 0.5 - (2 + 0.4 + 1) / 2 = -0.2.
        let config = toy_config(vec![0.0, 0.0], None, 0);
        let endpoint = nalgebra::dvector![1.0, 0.0, 0.5];
        let v = loglik_shift(&config, &endpoint, &[1.0, 1.0], Some(0)).unwrap();
        assert_relative_eq!(v, -0.2, epsilon = 1e-14);
        // Null parameter: identically zero.
        assert_eq!(loglik_shift(&config, &endpoint, &[0.0, 0.0], None).unwrap(), 0.0);
    }

    #[test]
    fn loglik_tau_zero_depends_on_endpoint_only() {
        let config = toy_config(vec![0.0, 0.0], None, 3);
        let path = sample_drift_path(&config, 0);
        let endpoint = path.endpoint().clone();
        let got = loglik_drift(&path, &[0.0, 0.0], Some(0)).unwrap();
        let k = 2;
        assert_relative_eq!(
            got,
            endpoint[k] - 0.5 * config.info.i_etaeta[(0, 0)],
            epsilon = 1e-14
        );
    }

    #[test]
    fn shift_and_drift_coincide_exactly() {
        let config = toy_config(vec![0.3, -0.1], Some(0), 11);
        for stream in 0..200 {
            let path = sample_drift_path(&config, stream);
            let a = loglik_drift(&path, &[0.7, 0.2], Some(0)).unwrap();
            let b = loglik_shift(&config, path.endpoint(), &[0.7, 0.2], Some(0)).unwrap();
            assert!(a == b, "bitwise equality required, got {a} vs {b}");
        }
    }

    #[test]
    fn null_paths_match_gram() {
        let config = toy_config(vec![0.0, 0.0], None, 21);
        let reps = 20_000;
        let mut endpoints: Vec<Vec<f64>> = vec![Vec::with_capacity(reps); 3];
        for stream in 0..reps {
            let path = sample_drift_path(&config, stream as u64);
            assert_eq!(path.values[0], nalgebra::dvector![0.0, 0.0, 0.0]);
            for c in 0..3 {
                endpoints[c].push(path.endpoint()[c]);
            }
        }
        for c in 0..3 {
            let m = mean(&endpoints[c]);
            assert!(m.abs() < 3.0 * standard_error(&endpoints[c]), "mean[{c}] = {m}");
        }
        let gram = config.gram();
        for a in 0..3 {
            for b in 0..3 {
                let cov = crate::stats::covariance(&endpoints[a], &endpoints[b]);
                assert!(
                    (cov - gram[(a, b)]).abs() < 0.03,
                    "cov[{a}{b}] = {cov} vs {}",
                    gram[(a, b)]
                );
            }
        }
    }

    #[test]
    fn drifted_paths_have_the_stated_mean() {
        let tau = vec![0.5, -0.25];
        let config = toy_config(tau.clone(), Some(0), 33);
        let reps = 20_000;
        let mut first = Vec::with_capacity(reps);
        let mut third = Vec::with_capacity(reps);
        for stream in 0..reps {
            let path = sample_drift_path(&config, stream as u64);
            first.push(path.endpoint()[0]);
            third.push(path.endpoint()[2]);
        }
        // E Delta_int(1) = I_tt tau + I_teta = (0.5 + 0.2, -0.25).
        let m = mean(&first);
        assert!((m - 0.7).abs() < 3.0 * standard_error(&first), "mean {m}");
        // E Delta_nuis(1) = I_teta^T tau + I_etaeta = 0.1 + 1.0.
        let m3 = mean(&third);
        assert!((m3 - 1.1).abs() < 3.0 * standard_error(&third), "mean {m3}");
    }

    #[test]
    fn bridge_formula_and_endpoints() {
        let config = toy_config(vec![0.0, 0.0], None, 5);
        let path = sample_drift_path(&config, 7);
        let bridge = extract_bridge(&path, 0).unwrap();
        assert_eq!(bridge.values[0], 0.0);
        assert_eq!(*bridge.values.last().unwrap(), 0.0);
        // Mid-grid value matches the defining formula.
        let k = 2;
        let u = bridge.times[5];
        let want = path.values[5][k] - u * path.endpoint()[k];
        assert_eq!(bridge.values[5], want);
        assert!(extract_bridge(&path, 1).is_err());
    }

    #[test]
    fn bridge_variance_and_ancillarity() {
        // Bridge marginals have variance u(1-u) I_etaeta and do not depend
        // on the drift; corr(B(u), endpoint) vanishes.
        let reps = 10_000;
        let config_null = toy_config(vec![0.0, 0.0], None, 8);
        let config_drift = toy_config(vec![1.0, -0.5], Some(0), 8);
        let mut b_null = Vec::with_capacity(reps);
        let mut b_drift = Vec::with_capacity(reps);
        let mut endpoints = Vec::with_capacity(reps);
        for stream in 0..reps {
            let p0 = sample_drift_path(&config_null, stream as u64);
            let p1 = sample_drift_path(&config_drift, (reps + stream) as u64);
            b_null.push(extract_bridge(&p0, 0).unwrap().values[5]);
            b_drift.push(extract_bridge(&p1, 0).unwrap().values[5]);
            endpoints.push(p0.endpoint()[2]);
        }
        let u = 0.5;
        let want = u * (1.0 - u) * 1.0;
        let got = variance(&b_null);
        assert!((got - want).abs() < 3.0 * want * (2.0 / reps as f64).sqrt() + 0.01);

        let ks = crate::stats::ks_two_sample(&b_null, &b_drift).unwrap();
        assert!(ks.p_value > 0.001, "bridge law changed under drift: p = {}", ks.p_value);

        let corr = correlation(&b_null, &endpoints).unwrap();
        assert!(corr.abs() < 3.0 / (reps as f64).sqrt(), "corr {corr}");
    }

    #[test]
    fn loglik_normalization() {
        let config = toy_config(vec![0.0, 0.0], None, 13);
        let reps = 10_000;
        let mut exp_llr = Vec::with_capacity(reps);
        for stream in 0..reps {
            let path = sample_drift_path(&config, stream as u64);
            exp_llr.push(loglik_drift(&path, &[0.4, 0.1], Some(0)).unwrap().exp());
        }
        let m = mean(&exp_llr);
        assert!(
            (m - 1.0).abs() < 3.0 * standard_error(&exp_llr),
            "mean exp(LLR) = {m}"
        );
    }

    #[test]
    fn config_validation() {
        let info = toy_info();
        assert!(DriftConfig::new(info.clone(), vec![0.0, 0.5], vec![0.0, 0.0], None, 0).is_err());
        assert!(DriftConfig::new(
            info.clone(),
            vec![0.5, 0.5, 1.0],
            vec![0.0, 0.0],
            None,
            0
        )
        .is_err());
        assert!(DriftConfig::new(info.clone(), vec![0.5, 1.0], vec![0.0], None, 0).is_err());
        assert!(
            DriftConfig::new(info.clone(), vec![0.5, 1.0], vec![0.0, 0.0], Some(3), 0).is_err()
        );
        // Missing leading zero is inserted.
        let c = DriftConfig::new(info, vec![0.5, 1.0], vec![0.0, 0.0], None, 0).unwrap();
        assert_eq!(c.time_grid, vec![0.0, 0.5, 1.0]);
    }
}
