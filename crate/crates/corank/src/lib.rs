//! Measure-transportation center-outward ranks and signs, the
//! distribution-free rank statistics built on them, a simulator of the
//! limiting Brownian-drift experiment, and a Monte Carlo harness verifying
//! the testable properties of the construction.

pub mod assignment;
pub mod codf;
pub mod density;
pub mod error;
pub mod grid;
pub mod limit;
pub mod models;
pub mod rng;
pub mod scores;
pub mod serialize;
pub mod stats;
pub mod verify;

pub use assignment::{
    brute_force_assignment, minimize_dense, solve_assignment, solve_assignment_warm, Assignment,
};
pub use codf::{
    codf_closed_form_spherical, empirical_codf, rank_contours, ranks_and_signs, Contour,
    EmpiricalCodf, RankSign,
};
pub use density::ReferenceDensity;
pub use error::{Error, Result};
pub use grid::{factorize, make_grid, sample_spherical_uniform, FactorizePolicy, Grid, GridSpec};
pub use limit::{
    extract_bridge, loglik_drift, loglik_shift, sample_drift_path, BridgePath, DriftConfig,
    DriftPath,
};
pub use models::{
    central_sequence, information_structure, log_likelihood_ratio_finite_n, residuals,
    sample_local, tangent_projection, InformationStructure, LocalParam, ModelKind, ModelSpec,
};
pub use scores::{
    approximate_score_statistic, ball_score_from_tangent, catalog_score, catalog_tangent,
    exact_score_statistic_mc, partial_sum_profile, partial_sum_statistic, BallScore,
    ExactScoreReference, RankStatValue, TangentFunction,
};
pub use verify::CheckReport;
