//! `corank`: center-outward ranks and signs, rank statistics, quantile
//! contours, Brownian-drift simulation, and the Monte Carlo verification
//! harness, as a single subcommand-style binary.
//!
//! Exit codes: 0 on success (all gates pass), 1 when a verification gate
//! fails, 2 on usage, configuration, or I/O errors.

use clap::{Args, Parser, Subcommand};
use corank::codf::{rank_contours, RankSign};
use corank::grid::{factorize, make_grid, FactorizePolicy, Grid};
use corank::limit::{extract_bridge, loglik_drift, sample_drift_path, DriftConfig};
use corank::models::{information_structure, residuals, ModelSpec};
use corank::scores::{catalog_score, catalog_tangent};
use corank::serialize::{read_data_csv, read_ranks_csv, write_ranks_csv, GridMeta, StatRecord};
use corank::stats::{ks_one_sample, mean, variance};
use corank::verify::{
    check_basu_independence, check_bridge_law, check_distribution_freeness, check_efficiency,
    check_glivenko_cantelli, check_joint_weak_convergence, simulate_null_ensemble, BasuConfig,
    CheckReport, DfreeConfig, EfficiencyConfig, EnsembleConfig, GcConfig,
};
use corank::{empirical_codf, ranks_and_signs, ReferenceDensity};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "corank", version, about = "Center-outward ranks, distribution-free rank statistics, and the Brownian-drift limit experiment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct GridArgs {
    /// Radius count (with --ns); omit both for the automatic factorization.
    #[arg(long = "nr")]
    n_r: Option<usize>,
    /// Direction count (with --nr).
    #[arg(long = "ns")]
    n_s: Option<usize>,
    /// Seed for grid directions (d >= 3) and recorded in artifacts.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Build a grid and dump its metadata (and optionally its points).
    Grid {
        /// Number of grid points.
        #[arg(long)]
        n: usize,
        /// Dimension.
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[command(flatten)]
        grid: GridArgs,
        /// Metadata JSON output path.
        #[arg(long)]
        output: PathBuf,
        /// Optional CSV of grid points.
        #[arg(long)]
        points: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Compute center-outward ranks and signs of residuals.
    Ranks {
        /// Input CSV of observations, one row per observation.
        #[arg(long)]
        input: PathBuf,
        /// Residual map: `location` or `linear_regression`.
        #[arg(long, default_value = "location")]
        model: String,
        /// Location parameter; residuals are data - theta. Defaults to zero.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        theta: Option<Vec<f64>>,
        /// Covariate CSV for the regression residual map (theta then has
        /// one block of length d per covariate column).
        #[arg(long)]
        covariates: Option<PathBuf>,
        #[command(flatten)]
        grid: GridArgs,
        /// Seed for the rank-0 sign tie-break.
        #[arg(long)]
        tie_seed: Option<u64>,
        /// Output CSV of ranks and signs.
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Compute a rank statistic from a ranks CSV.
    Stat {
        /// Ranks CSV produced by `corank ranks`.
        #[arg(long)]
        input: PathBuf,
        /// Score name: wilcoxon, sign, gaussian_location, tanh1, sin1.
        #[arg(long, default_value = "wilcoxon")]
        score: String,
        /// Two-sample split fraction for the regression constants.
        #[arg(long, default_value_t = 0.5)]
        split: f64,
        /// Optional CSV of explicit constants (one column).
        #[arg(long)]
        constants: Option<PathBuf>,
        /// When set, compute the centered partial-sum statistic at this u
        /// instead of the linear statistic.
        #[arg(long)]
        u: Option<f64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output JSON record.
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Empirical quantile contours (d = 2): rank-level polylines.
    Contours {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        theta: Option<Vec<f64>>,
        /// Contour ranks j (orders j / (n_r + 1)).
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        orders: Vec<usize>,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        tie_seed: Option<u64>,
        /// Output CSV: order, rank, position, x1, x2.
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Simulate the limiting Brownian-drift experiment.
    Simulate {
        /// JSON config; defaults are used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Number of paths (overrides config).
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Per-path CSV output.
        #[arg(long)]
        output: PathBuf,
        /// Summary JSON output.
        #[arg(long)]
        summary: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Run a verification check and emit its report.
    Verify {
        #[command(subcommand)]
        check: VerifyCommand,
    },
}

#[derive(Args, Clone)]
struct VerifyArgs {
    /// JSON config for the check; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report JSON output (stdout when omitted).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Replicate count override.
    #[arg(long, alias = "replicates")]
    reps: Option<usize>,
    /// Gate level override.
    #[arg(long)]
    alpha: Option<f64>,
    /// Downgrade gate failures to warnings (exit 0).
    #[arg(long)]
    diagnostic: bool,
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum VerifyCommand {
    /// Exact distribution-freeness of rank statistics across densities.
    Dfree(VerifyArgs),
    /// Finite-n independence of (rank, sign) from symmetric statistics.
    Basu(VerifyArgs),
    /// Glivenko-Cantelli consistency of the empirical map.
    Gc(VerifyArgs),
    /// Bridge law of the centered partial-sum process.
    Bridge(VerifyArgs),
    /// Joint weak convergence to the Brownian-drift experiment.
    Joint(VerifyArgs),
    /// Semiparametric efficiency of matched-score rank statistics.
    Eff(VerifyArgs),
}

/// Limit-experiment simulation config.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct SimulateConfig {
    d: usize,
    f0: String,
    tangents: Vec<String>,
    /// Drift parameter of the sampling law.
    tau: Vec<f64>,
    /// Tangent (by name) driving the density drift, if any.
    eta: Option<String>,
    time_grid: Option<Vec<f64>>,
    /// Local parameters at which log-likelihoods are evaluated.
    locals: Vec<corank::verify::LocalSpec>,
    paths: usize,
    seed: u64,
    info_draws: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            d: 2,
            f0: "gaussian".into(),
            tangents: vec!["tanh1".into()],
            tau: vec![0.0, 0.0],
            eta: None,
            time_grid: None,
            locals: vec![corank::verify::LocalSpec {
                tau: vec![0.5, 0.0],
                eta: Some("tanh1".into()),
            }],
            paths: 10_000,
            seed: 20_240_006,
            info_draws: 1_000_000,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn ensure_writable(path: &Path, force: bool) -> corank::Result<()> {
    if path.exists() && !force {
        return Err(corank::Error::invalid(
            "output",
            format!("{} exists; pass --force to overwrite", path.display()),
        ));
    }
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    Ok(())
}

fn write_json(path: &Path, force: bool, value: &serde_json::Value) -> corank::Result<()> {
    ensure_writable(path, force)?;
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

/// Sidecar metadata for CSV artifacts: tool version, full config, seed.
fn write_sidecar(path: &Path, force: bool, config: serde_json::Value, seed: u64) -> corank::Result<()> {
    let meta_path = path.with_extension(format!(
        "{}.meta.json",
        path.extension().and_then(|e| e.to_str()).unwrap_or("csv")
    ));
    write_json(
        &meta_path,
        force,
        &json!({ "tool_version": VERSION, "seed": seed, "config": config }),
    )
}

fn build_grid(n: usize, d: usize, args: &GridArgs) -> corank::Result<Grid> {
    let policy = match (args.n_r, args.n_s) {
        (Some(r), Some(s)) => FactorizePolicy::Explicit { n_r: r, n_s: s },
        (None, None) => FactorizePolicy::Auto,
        _ => {
            return Err(corank::Error::invalid(
                "nr/ns",
                "give both --nr and --ns or neither",
            ))
        }
    };
    make_grid(factorize(n, d, policy, args.seed)?)
}

fn rank_pipeline(
    input: &Path,
    theta: &Option<Vec<f64>>,
    covariates: &Option<PathBuf>,
    grid_args: &GridArgs,
    tie_seed: Option<u64>,
) -> corank::Result<(Vec<Vec<f64>>, Grid, Vec<RankSign>)> {
    let data = read_data_csv(fs::File::open(input)?)?;
    let d = data[0].len();
    let f0 = ReferenceDensity::gaussian(d);
    let model = match covariates {
        None => ModelSpec::location(f0),
        Some(path) => ModelSpec::regression(f0, read_data_csv(fs::File::open(path)?)?)?,
    };
    let theta = theta.clone().unwrap_or_else(|| vec![0.0; model.k]);
    let resid = residuals(&model, &data, &theta)?;
    if resid.len() > 20_000 {
        return Err(corank::Error::invalid(
            "input",
            "n beyond the dense assignment budget (20000)",
        ));
    }
    let grid = build_grid(resid.len(), d, grid_args)?;
    let codf = empirical_codf(&resid, &grid)?;
    let rs = ranks_and_signs(&codf, tie_seed.unwrap_or(grid_args.seed))?;
    Ok((data, grid, rs))
}

fn run(cli: Cli) -> corank::Result<ExitCode> {
    match cli.command {
        Command::Grid {
            n,
            d,
            grid,
            output,
            points,
            force,
        } => {
            let g = build_grid(n, d, &grid)?;
            let meta = GridMeta::from(&g);
            write_json(
                &output,
                force,
                &json!({
                    "tool_version": VERSION,
                    "seed": grid.seed,
                    "config": { "n": n, "d": d, "n_r": g.spec.n_r, "n_s": g.spec.n_s },
                    "grid": meta,
                }),
            )?;
            if let Some(points_path) = points {
                ensure_writable(&points_path, force)?;
                let mut w = csv::Writer::from_path(&points_path)?;
                w.write_record((1..=d).map(|i| format!("x{i}")))?;
                for p in &g.points {
                    w.write_record(p.iter().map(|v| format!("{v}")))?;
                }
                w.flush()?;
                write_sidecar(&points_path, force, json!({ "n": n, "d": d }), grid.seed)?;
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Ranks {
            input,
            model,
            theta,
            covariates,
            grid,
            tie_seed,
            output,
            force,
        } => {
            match model.as_str() {
                "location" => {
                    if covariates.is_some() {
                        return Err(corank::Error::invalid(
                            "covariates",
                            "location model takes no covariates",
                        ));
                    }
                }
                "linear_regression" => {
                    if covariates.is_none() {
                        return Err(corank::Error::invalid(
                            "covariates",
                            "linear_regression needs --covariates",
                        ));
                    }
                }
                other => {
                    return Err(corank::Error::invalid(
                        "model",
                        format!("unknown model `{other}`"),
                    ))
                }
            }
            let (_, g, rs) = rank_pipeline(&input, &theta, &covariates, &grid, tie_seed)?;
            ensure_writable(&output, force)?;
            write_ranks_csv(fs::File::create(&output)?, &rs)?;
            write_sidecar(
                &output,
                force,
                json!({
                    "input": input.display().to_string(),
                    "model": model,
                    "theta": theta,
                    "grid": GridMeta::from(&g),
                    "tie_seed": tie_seed,
                }),
                grid.seed,
            )?;
            Ok(ExitCode::SUCCESS)
        }

        Command::Stat {
            input,
            score,
            split,
            constants,
            u,
            seed,
            output,
            force,
        } => {
            let rs = read_ranks_csv(fs::File::open(&input)?)?;
            let d = rs[0].sign.len();
            let n = rs.len();
            let score_fn = catalog_score(&score, d)?;
            let (name, stat, u_val) = match u {
                Some(u) => {
                    let stat = corank::partial_sum_statistic(&score_fn, &rs, u)?;
                    (format!("partial_sum[{score}]"), stat, Some(u))
                }
                None => {
                    let consts = match &constants {
                        Some(path) => read_data_csv(fs::File::open(path)?)?
                            .into_iter()
                            .map(|row| row[0])
                            .collect(),
                        None => {
                            let m = ((split * n as f64).floor() as usize).clamp(1, n - 1);
                            (0..n).map(|i| if i < m { 1.0 } else { 0.0 }).collect::<Vec<f64>>()
                        }
                    };
                    let stat = corank::approximate_score_statistic(&consts, &score_fn, &rs)?;
                    (format!("approximate_score[{score}]"), stat, None)
                }
            };
            let record = StatRecord::new(name, &stat, u_val, n, None, seed);
            write_json(
                &output,
                force,
                &json!({
                    "tool_version": VERSION,
                    "seed": seed,
                    "config": { "input": input.display().to_string(), "score": score, "split": split, "u": u },
                    "stat": record,
                }),
            )?;
            Ok(ExitCode::SUCCESS)
        }

        Command::Contours {
            input,
            theta,
            orders,
            grid,
            tie_seed,
            output,
            force,
        } => {
            if orders.is_empty() {
                return Err(corank::Error::invalid("orders", "no contour ranks given"));
            }
            let (data, g, rs) = rank_pipeline(&input, &theta, &None, &grid, tie_seed)?;
            let contours = rank_contours(&data, &rs, g.spec.n_r, &orders)?;
            ensure_writable(&output, force)?;
            let mut w = csv::Writer::from_path(&output)?;
            w.write_record(["order", "rank", "position", "x1", "x2"])?;
            for c in &contours {
                for (pos, p) in c.points.iter().enumerate() {
                    w.write_record([
                        format!("{}", c.order),
                        c.rank.to_string(),
                        pos.to_string(),
                        format!("{}", p[0]),
                        format!("{}", p[1]),
                    ])?;
                }
            }
            w.flush()?;
            write_sidecar(
                &output,
                force,
                json!({
                    "input": input.display().to_string(),
                    "orders": orders,
                    "grid": GridMeta::from(&g),
                }),
                grid.seed,
            )?;
            Ok(ExitCode::SUCCESS)
        }

        Command::Simulate {
            config,
            paths,
            seed,
            output,
            summary,
            force,
        } => {
            let mut cfg: SimulateConfig = match &config {
                Some(path) => serde_json::from_str(&fs::read_to_string(path)?)?,
                None => SimulateConfig::default(),
            };
            if let Some(p) = paths {
                cfg.paths = p;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            run_simulate(&cfg, &output, &summary, force)?;
            Ok(ExitCode::SUCCESS)
        }

        Command::Verify { check } => run_verify(check),
    }
}

fn run_simulate(
    cfg: &SimulateConfig,
    output: &Path,
    summary: &Path,
    force: bool,
) -> corank::Result<()> {
    let f0 = ReferenceDensity::by_name(&cfg.f0, cfg.d)?;
    let model = ModelSpec::location(f0);
    let tangents: Vec<_> = cfg
        .tangents
        .iter()
        .map(|t| catalog_tangent(t, cfg.d))
        .collect::<corank::Result<_>>()?;
    let info = information_structure(
        &model,
        &tangents,
        cfg.info_draws,
        corank::rng::derive_seed(cfg.seed, 2),
    )?;
    let tangent_index = |name: &Option<String>| -> corank::Result<Option<usize>> {
        match name {
            None => Ok(None),
            Some(n) => cfg
                .tangents
                .iter()
                .position(|t| t == n)
                .map(Some)
                .ok_or_else(|| corank::Error::invalid("eta", format!("unknown tangent `{n}`"))),
        }
    };
    let eta_index = tangent_index(&cfg.eta)?;
    let time_grid = cfg
        .time_grid
        .clone()
        .unwrap_or_else(DriftConfig::default_time_grid);
    let drift = Arc::new(DriftConfig::new(
        info,
        time_grid,
        cfg.tau.clone(),
        eta_index,
        cfg.seed,
    )?);

    ensure_writable(output, force)?;
    let mut w = csv::Writer::from_path(output)?;
    let dim = drift.dim();
    let mut header: Vec<String> = vec!["path".into()];
    header.extend((0..dim).map(|c| format!("endpoint_{c}")));
    header.extend((0..cfg.locals.len()).map(|j| format!("loglik_{j}")));
    for (t, name) in cfg.tangents.iter().enumerate() {
        for u in &drift.time_grid {
            header.push(format!("bridge_{name}_{u}"));
            let _ = t;
        }
    }
    w.write_record(&header)?;

    let mut endpoint_cols: Vec<Vec<f64>> = vec![Vec::with_capacity(cfg.paths); dim];
    let mut exp_loglik: Vec<Vec<f64>> = vec![Vec::with_capacity(cfg.paths); cfg.locals.len()];
    let mut bridge_samples: Vec<Vec<Vec<f64>>> =
        vec![vec![Vec::with_capacity(cfg.paths); drift.time_grid.len()]; cfg.tangents.len()];
    for r in 0..cfg.paths {
        let path = sample_drift_path(&drift, r as u64);
        let mut row: Vec<String> = vec![r.to_string()];
        for c in 0..dim {
            let v = path.endpoint()[c];
            endpoint_cols[c].push(v);
            row.push(format!("{v}"));
        }
        for (j, local) in cfg.locals.iter().enumerate() {
            let idx = tangent_index(&local.eta)?;
            let ll = loglik_drift(&path, &local.tau, idx)?;
            exp_loglik[j].push(ll.exp());
            row.push(format!("{ll}"));
        }
        for t in 0..cfg.tangents.len() {
            let bridge = extract_bridge(&path, t)?;
            for (ui, v) in bridge.values.iter().enumerate() {
                bridge_samples[t][ui].push(*v);
                row.push(format!("{v}"));
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    write_sidecar(output, force, serde_json::to_value(cfg)?, cfg.seed)?;

    // Summary: endpoint moments, likelihood-ratio normalization, bridge
    // variances with normality p-values.
    let mut cov = vec![vec![0.0; dim]; dim];
    for a in 0..dim {
        for b in 0..dim {
            cov[a][b] = corank::stats::covariance(&endpoint_cols[a], &endpoint_cols[b]);
        }
    }
    let mut bridge_summary = serde_json::Map::new();
    for (t, name) in cfg.tangents.iter().enumerate() {
        let i_etaeta = drift.info.i_etaeta[(t, t)];
        for (ui, &u) in drift.time_grid.iter().enumerate() {
            if u == 0.0 || u == 1.0 {
                continue;
            }
            let sample = &bridge_samples[t][ui];
            let var = variance(sample);
            let scale = (u * (1.0 - u) * i_etaeta).sqrt();
            let p = if scale > 0.0 {
                let normal = statrs_normal_cdf();
                ks_one_sample(sample, |x| normal(x / scale))?.p_value
            } else {
                1.0
            };
            bridge_summary.insert(
                format!("{name}.u{u}"),
                json!({ "variance": var, "target": u * (1.0 - u) * i_etaeta, "normal_ks_p": p }),
            );
        }
    }
    write_json(
        summary,
        force,
        &json!({
            "tool_version": VERSION,
            "seed": cfg.seed,
            "config": cfg,
            "paths": cfg.paths,
            "endpoint_mean": (0..dim).map(|c| mean(&endpoint_cols[c])).collect::<Vec<f64>>(),
            "endpoint_covariance": cov,
            "mean_exp_loglik": exp_loglik.iter().map(|v| mean(v)).collect::<Vec<f64>>(),
            "bridges": bridge_summary,
        }),
    )?;
    Ok(())
}

fn statrs_normal_cdf() -> impl Fn(f64) -> f64 {
    |x: f64| 0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

/// Abramowitz-Stegun 7.1.26 rational approximation, |error| < 1.5e-7.
fn erf(x: f64) -> f64 {
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let y = 1.0
        - (((((1.061405429 * t - 1.453152027) * t) + 1.421413741) * t - 0.284496736) * t
            + 0.254829592)
            * t
            * (-x * x).exp();
    sign * y
}

fn run_verify(check: VerifyCommand) -> corank::Result<ExitCode> {
    let (args, report) = match check {
        VerifyCommand::Dfree(args) => {
            let mut cfg: DfreeConfig = load_config(&args)?;
            override_common(&mut cfg.seed, &mut cfg.replicates, &mut cfg.alpha, &args);
            (args, check_distribution_freeness(&cfg)?)
        }
        VerifyCommand::Basu(args) => {
            let mut cfg: BasuConfig = load_config(&args)?;
            override_common(&mut cfg.seed, &mut cfg.replicates, &mut cfg.alpha, &args);
            (args, check_basu_independence(&cfg)?)
        }
        VerifyCommand::Gc(args) => {
            let mut cfg: GcConfig = load_config(&args)?;
            if let Some(s) = args.seed {
                cfg.seed = s;
            }
            if let Some(r) = args.reps {
                cfg.replicates = r;
            }
            (args, check_glivenko_cantelli(&cfg)?)
        }
        VerifyCommand::Bridge(args) => {
            let mut cfg: EnsembleConfig = load_config(&args)?;
            override_common(&mut cfg.seed, &mut cfg.replicates, &mut cfg.alpha, &args);
            let ensemble = simulate_null_ensemble(&cfg)?;
            (args, check_bridge_law(&ensemble)?)
        }
        VerifyCommand::Joint(args) => {
            let mut cfg: EnsembleConfig = load_config(&args)?;
            override_common(&mut cfg.seed, &mut cfg.replicates, &mut cfg.alpha, &args);
            let ensemble = simulate_null_ensemble(&cfg)?;
            (args, check_joint_weak_convergence(&ensemble)?)
        }
        VerifyCommand::Eff(args) => {
            let mut cfg: EfficiencyConfig = load_config(&args)?;
            override_common(&mut cfg.seed, &mut cfg.replicates, &mut cfg.alpha, &args);
            (args, check_efficiency(&cfg)?)
        }
    };
    emit_report(&args, &report)
}

fn load_config<T: Default + for<'de> Deserialize<'de>>(args: &VerifyArgs) -> corank::Result<T> {
    match &args.config {
        Some(path) => Ok(serde_json::from_str(&fs::read_to_string(path)?)?),
        None => Ok(T::default()),
    }
}

fn override_common(seed: &mut u64, reps: &mut usize, alpha: &mut f64, args: &VerifyArgs) {
    if let Some(s) = args.seed {
        *seed = s;
    }
    if let Some(r) = args.reps {
        *reps = r;
    }
    if let Some(a) = args.alpha {
        *alpha = a;
    }
}

fn emit_report(args: &VerifyArgs, report: &CheckReport) -> corank::Result<ExitCode> {
    let wrapped = json!({
        "tool_version": VERSION,
        "seed": report.seed,
        "diagnostic": args.diagnostic,
        "report": report,
    });
    match &args.output {
        Some(path) => write_json(path, args.force, &wrapped)?,
        None => println!("{}", serde_json::to_string_pretty(&wrapped)?),
    }
    if report.pass {
        Ok(ExitCode::SUCCESS)
    } else if args.diagnostic {
        eprintln!("warning: check `{}` failed (diagnostic mode)", report.name);
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("check `{}` failed", report.name);
        Ok(ExitCode::from(1))
    }
}
