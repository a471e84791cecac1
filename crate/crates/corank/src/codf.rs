//! The empirical center-outward distribution function and the ranks and
//! signs it induces.
//!
//! `empirical_codf` maps each observation to the grid point it is optimally
//! paired with; the scaled norm of that image is the center-outward rank (an
//! integer by grid construction) and its direction the center-outward sign.
//! For `d = 1` this reduces to the classical `2F - 1` ranks.

use crate::assignment::solve_assignment;
use crate::error::{Error, Result};
use crate::grid::{norm, sample_unit_direction, Grid};
use crate::rng::seeded_rng;

/// The empirical center-outward distribution function: `images[i]` is the
/// grid point matched to observation `i`, so the image multiset equals the
/// grid multiset exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCodf {
    pub grid: Grid,
    pub images: Vec<Vec<f64>>,
    pub permutation: Vec<usize>,
    pub cost: f64,
}

impl EmpiricalCodf {
    pub fn source_count(&self) -> usize {
        self.images.len()
    }
}

/// Solve the optimal pairing and extract images.
pub fn empirical_codf(points: &[Vec<f64>], grid: &Grid) -> Result<EmpiricalCodf> {
    let assignment = solve_assignment(points, grid)?;
    let images = assignment
        .permutation
        .iter()
        .map(|&j| grid.points[j].clone())
        .collect();
    Ok(EmpiricalCodf {
        grid: grid.clone(),
        images,
        permutation: assignment.permutation,
        cost: assignment.cost,
    })
}

/// Center-outward rank and sign of one observation.
///
/// `rank` is `(n_r + 1) * ||image||`, an integer in `0..=n_r`; `sign` is the
/// unit direction of the image, or a seeded uniform direction for
/// origin-matched observations (rank 0).
#[derive(Debug, Clone, PartialEq)]
pub struct RankSign {
    pub rank: usize,
    pub sign: Vec<f64>,
    pub image: Vec<f64>,
}

/// Extract ranks and signs from an empirical center-outward distribution
/// function. Observations matched to an origin copy receive rank 0 and an
/// independent uniform sign drawn from `tie_seed` (the documented tie-break
/// when `n_0 > 0`).
pub fn ranks_and_signs(codf: &EmpiricalCodf, tie_seed: u64) -> Result<Vec<RankSign>> {
    let n_r = codf.grid.spec.n_r;
    let scale = (n_r + 1) as f64;
    let mut tie_rng = seeded_rng(tie_seed, 0);
    codf.images
        .iter()
        .map(|image| {
            let r = norm(image);
            let rank_real = scale * r;
            let rank = rank_real.round();
            if (rank_real - rank).abs() >= 1e-9 || rank < 0.0 || rank > n_r as f64 {
                return Err(Error::Numerical(format!(
                    "image norm {r} does not sit on a grid radius (rank {rank_real})"
                )));
            }
            let sign = if rank == 0.0 {
                sample_unit_direction(codf.grid.d(), &mut tie_rng)
            } else {
                image.iter().map(|x| x / r).collect()
            };
            Ok(RankSign {
                rank: rank as usize,
                sign,
                image: image.clone(),
            })
        })
        .collect()
}

/// An empirical quantile contour: the data points of one rank level,
/// ordered by sign angle, forming a closed polyline.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    pub rank: usize,
    /// The contour order `rank / (n_r + 1)`.
    pub order: f64,
    pub points: Vec<Vec<f64>>,
}

/// Group data points by center-outward rank and order each group by sign
/// angle (d = 2 only): piecewise-linear empirical quantile contours.
pub fn rank_contours(
    data: &[Vec<f64>],
    ranksigns: &[RankSign],
    n_r: usize,
    ranks: &[usize],
) -> Result<Vec<Contour>> {
    if data.len() != ranksigns.len() {
        return Err(Error::SizeMismatch {
            field: "data",
            expected: ranksigns.len(),
            actual: data.len(),
        });
    }
    if data.iter().any(|p| p.len() != 2) {
        return Err(Error::invalid("data", "contours are defined for d = 2 only"));
    }
    ranks
        .iter()
        .map(|&rank| {
            if rank == 0 || rank > n_r {
                return Err(Error::invalid(
                    "ranks",
                    format!("rank {rank} outside 1..={n_r}"),
                ));
            }
            let mut members: Vec<(f64, Vec<f64>)> = data
                .iter()
                .zip(ranksigns)
                .filter(|(_, rs)| rs.rank == rank)
                .map(|(p, rs)| (rs.sign[1].atan2(rs.sign[0]), p.clone()))
                .collect();
            members.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            Ok(Contour {
                rank,
                order: rank as f64 / (n_r + 1) as f64,
                points: members.into_iter().map(|(_, p)| p).collect(),
            })
        })
        .collect()
}

/// The population center-outward distribution function of a spherically
/// symmetric law with radial CDF `radial_cdf`:
/// `z -> radial_cdf(||z||) * z / ||z||`, with `0 -> 0`.
pub fn codf_closed_form_spherical(radial_cdf: impl Fn(f64) -> f64, z: &[f64]) -> Vec<f64> {
    let r = norm(z);
    if r == 0.0 {
        return vec![0.0; z.len()];
    }
    let scale = radial_cdf(r) / r;
    z.iter().map(|x| scale * x).collect()
}
