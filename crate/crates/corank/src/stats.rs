//! Statistical test utilities used by the verification harness: one- and
//! two-sample Kolmogorov-Smirnov tests, chi-square goodness of fit, and
//! moment helpers.

use crate::error::{Error, Result};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Outcome of a hypothesis test: the statistic and its (asymptotic) p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestOutcome {
    pub statistic: f64,
    pub p_value: f64,
}

/// Complement of the Kolmogorov CDF, `Q(z) = 1 - K(z)`, via the two power
/// series of Press et al. (2007), four terms each.
pub fn kolmogorov_sf(z: f64) -> f64 {
    if z <= 0.0 {
        return 1.0;
    }
    if z < 1.18 {
        let factor = (2.0 * std::f64::consts::PI).sqrt() / z;
        let t = (-std::f64::consts::PI * std::f64::consts::PI / (8.0 * z * z)).exp();
        (1.0 - factor * (t + t.powi(9) + t.powi(25) + t.powi(49))).max(0.0)
    } else {
        let t = (-2.0 * z * z).exp();
        (2.0 * (t - t.powi(4) + t.powi(9))).clamp(0.0, 1.0)
    }
}

fn ks_p_value(statistic: f64, effective_n: f64) -> f64 {
    let sqrt_n = effective_n.sqrt();
    kolmogorov_sf((sqrt_n + 0.12 + 0.11 / sqrt_n) * statistic)
}

fn sorted_copy(sample: &[f64], field: &'static str) -> Result<Vec<f64>> {
    if sample.is_empty() {
        return Err(Error::invalid(field, "empty sample"));
    }
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(field));
    }
    let mut v = sample.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(v)
}

/// Two-sample Kolmogorov-Smirnov test (asymptotic p-value).
pub fn ks_two_sample(sample_a: &[f64], sample_b: &[f64]) -> Result<TestOutcome> {
    let a = sorted_copy(sample_a, "sample_a")?;
    let b = sorted_copy(sample_b, "sample_b")?;
    let (na, nb) = (a.len() as f64, b.len() as f64);

    let mut i = 0usize;
    let mut j = 0usize;
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }

    let effective_n = na * nb / (na + nb);
    Ok(TestOutcome {
        statistic: d,
        p_value: ks_p_value(d, effective_n),
    })
}

/// One-sample Kolmogorov-Smirnov test against the CDF `cdf`.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<TestOutcome> {
    let v = sorted_copy(sample, "sample")?;
    let n = v.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs());
        d = d.max(((i + 1) as f64 / n - f).abs());
    }
    Ok(TestOutcome {
        statistic: d,
        p_value: ks_p_value(d, n),
    })
}

/// Chi-square goodness-of-fit test of observed counts against expected
/// counts; degrees of freedom `cells - 1`.
pub fn chi_square_gof(observed: &[u64], expected: &[f64]) -> Result<TestOutcome> {
    if observed.len() != expected.len() {
        return Err(Error::SizeMismatch {
            field: "expected",
            expected: observed.len(),
            actual: expected.len(),
        });
    }
    if observed.len() < 2 {
        return Err(Error::invalid("observed", "need at least two cells"));
    }
    if expected.iter().any(|&e| e <= 0.0) {
        return Err(Error::invalid("expected", "expected counts must be positive"));
    }
    let stat: f64 = observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| {
            let diff = o as f64 - e;
            diff * diff / e
        })
        .sum();
    let df = (observed.len() - 1) as f64;
    let dist = ChiSquared::new(df).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(TestOutcome {
        statistic: stat,
        p_value: 1.0 - dist.cdf(stat),
    })
}

/// Chi-square independence test on a 2x2 contingency table (1 df, no
/// continuity correction).
pub fn chi_square_2x2(table: [[u64; 2]; 2]) -> Result<TestOutcome> {
    let row: Vec<f64> = table.iter().map(|r| (r[0] + r[1]) as f64).collect();
    let col = [
        (table[0][0] + table[1][0]) as f64,
        (table[0][1] + table[1][1]) as f64,
    ];
    let total = row[0] + row[1];
    if total == 0.0 || row.iter().any(|&x| x == 0.0) || col.iter().any(|&x| x == 0.0) {
        return Err(Error::invalid("table", "degenerate margin"));
    }
    let mut stat = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let e = row[i] * col[j] / total;
            let diff = table[i][j] as f64 - e;
            stat += diff * diff / e;
        }
    }
    let dist = ChiSquared::new(1.0).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(TestOutcome {
        statistic: stat,
        p_value: 1.0 - dist.cdf(stat),
    })
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (divisor `n - 1`).
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Sample covariance (divisor `n - 1`).
pub fn covariance(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let (mx, my) = (mean(xs), mean(ys));
    xs.iter()
        .zip(ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / (xs.len() as f64 - 1.0)
}

/// Pearson correlation; `None` when either sample is (numerically) constant.
pub fn correlation(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let (vx, vy) = (variance(xs), variance(ys));
    if vx <= 1e-300 || vy <= 1e-300 {
        return None;
    }
    Some(covariance(xs, ys) / (vx * vy).sqrt())
}

/// Standard error of the sample mean.
pub fn standard_error(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Ordinary least squares fit `y ~ a + b x`, returning
/// `(intercept, slope, intercept standard error)`.
pub fn simple_regression(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let (mx, my) = (mean(xs), mean(ys));
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    let sigma2 = rss / (n - 2.0);
    let se_intercept = (sigma2 * (1.0 / n + mx * mx / sxx)).sqrt();
    (intercept, slope, se_intercept)
}
