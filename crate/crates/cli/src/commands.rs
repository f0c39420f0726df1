use std::fs;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use num_rational::BigRational;
use spme_core::config::GnMode;
use spme_core::estimators::{mc_ito_residual, run_paths};
use spme_core::{
    epsilon_sweep, monotonicity_check, smoothing_rate_fit, validate_assumptions, Error, ExactLadder, Field, Grid,
    LadderTable, McEstimate, ProblemSpec, RunConfig, SolverConfig, Stepper,
};

use crate::report::{estimates_csv, paths_csv, EstimateRow, RunDir};
use crate::{Cli, Command, Outcome};

/// Sample budget of the assumption checks.
const VALIDATION_BUDGET: usize = 256;

/// A configuration that could not be read or parsed.
#[derive(Debug)]
struct ConfigError(String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_)) | Some(Error::Io(_)) => 2,
        _ => 1,
    }
}

struct Loaded {
    bytes: Vec<u8>,
    config: RunConfig,
    spec: ProblemSpec,
    solver: SolverConfig,
}

fn load(path: &Path, seed: Option<u64>) -> Result<Loaded> {
    let bytes = fs::read(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    let mut config = RunConfig::from_toml_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    if let Some(seed) = seed {
        config.noise.seed = seed;
    }
    let spec = config.problem().map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    let solver = config.solver();
    Ok(Loaded {
        bytes,
        config,
        spec,
        solver,
    })
}

/// Prints the assumption report when some condition fails.
fn precheck(spec: &ProblemSpec) -> Result<bool> {
    let report = validate_assumptions(spec, VALIDATION_BUDGET)?;
    if !report.all_pass() {
        eprintln!("{report}");
        return Ok(false);
    }
    Ok(true)
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!(ConfigError("--threads must be ≥ 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build()?;
    let threads = pool.current_num_threads();
    pool.install(|| dispatch(cli, threads))
}

fn dispatch(cli: &Cli, threads: usize) -> Result<Outcome> {
    match &cli.command {
        Command::Validate(a) => validate(&a.config, cli.seed),
        Command::MoserLadder {
            d,
            mtilde,
            mu,
            alpha,
            n_free,
            n_max,
        } => moser_ladder(*d, mtilde, mu, alpha, *n_free, *n_max),
        Command::GnCheck(a) => gn_check(&a.config, cli.seed),
        Command::MonotonicityCheck(a) => monotonicity(&a.config, cli.seed),
        Command::Simulate { cfg, paths } => experiment(cli, threads, "simulate", &cfg.config, |l, dir| simulate(l, dir, *paths)),
        Command::SweepEpsilon { cfg, paths, max_ratio } => {
            experiment(cli, threads, "sweep-epsilon", &cfg.config, |l, dir| sweep(l, dir, *paths, *max_ratio))
        }
        Command::Smoothing { cfg, paths } => experiment(cli, threads, "smoothing", &cfg.config, |l, dir| smoothing(l, dir, *paths)),
        Command::ItoCheck { cfg, paths } => experiment(cli, threads, "ito-check", &cfg.config, |l, dir| ito(l, dir, *paths)),
    }
}

/// Loads, validates and runs an experiment inside a run directory.
fn experiment(
    cli: &Cli,
    threads: usize,
    name: &str,
    path: &Path,
    body: impl FnOnce(&Loaded, &mut RunDir) -> Result<Outcome>,
) -> Result<Outcome> {
    let loaded = load(path, cli.seed)?;
    if !precheck(&loaded.spec)? {
        return Ok(Outcome::Fail);
    }
    let mut dir = RunDir::create(
        &cli.out,
        name,
        path,
        &loaded.bytes,
        loaded.config.clone(),
        loaded.config.noise.seed,
        threads,
    )?;
    match body(&loaded, &mut dir) {
        Ok(outcome) => {
            let out = dir.finish()?;
            println!("run directory: {}", out.display());
            Ok(outcome)
        }
        Err(err) => {
            dir.fail(&err)?;
            Err(err)
        }
    }
}

fn validate(path: &Path, seed: Option<u64>) -> Result<Outcome> {
    let loaded = load(path, seed)?;
    let report = validate_assumptions(&loaded.spec, VALIDATION_BUDGET)?;
    println!("{report}");
    Ok(if report.all_pass() { Outcome::Pass } else { Outcome::Fail })
}

fn parse_rational(what: &str, s: &str) -> Result<BigRational> {
    if let Ok(q) = BigRational::from_str(s.trim()) {
        return Ok(q);
    }
    let v: f64 = s.trim().parse().map_err(|_| ConfigError(format!("{what}: cannot parse `{s}`")))?;
    BigRational::from_float(v).ok_or_else(|| anyhow!(ConfigError(format!("{what}: `{s}` is not finite"))))
}

fn moser_ladder(d: usize, mtilde: &str, mu: &str, alpha: &str, n_free: Option<f64>, n_max: usize) -> Result<Outcome> {
    let m = parse_rational("--mtilde", mtilde)?;
    let mu = match mu.trim() {
        "inf" | "infinity" | "∞" => None,
        other => Some(parse_rational("--mu", other)?),
    };
    let alpha = parse_rational("--alpha", alpha)?;
    let ladder = match ExactLadder::new(d, m, mu, alpha) {
        Ok(l) => l,
        Err(e @ Error::Admissibility { .. }) => {
            eprintln!("error: {e}");
            return Ok(Outcome::Fail);
        }
        Err(e) => bail!(ConfigError(e.to_string())),
    };
    print!("{}", LadderTable { ladder: &ladder, n_free, n_max });
    println!("θ̃ = {} ≈ {:.6}", ladder.theta, spme_core::moser::LadderScalar::as_f64(&ladder.theta));
    Ok(Outcome::Pass)
}

fn gn_check(path: &Path, seed: Option<u64>) -> Result<Outcome> {
    let l = load(path, seed)?;
    let stepper = Stepper::<f64>::new(&l.spec, &l.solver)?;
    let fields: Vec<Field<f64>> = match l.config.experiment.gn_mode {
        GnMode::Frozen => {
            let noise = stepper.noise_model()?;
            let xi = stepper.initial_field(&noise, 0);
            vec![xi; noise.n_steps]
        }
        GnMode::Trajectory => {
            let mut solver = l.solver.clone();
            solver.record_every = 1;
            let traj = Stepper::<f64>::new(&l.spec, &solver)?.solve_path(0)?;
            traj.snapshots.into_iter().skip(1).map(|(_, f)| f).collect()
        }
    };
    let dt = stepper.noise_model()?.dt;
    let eta = l.config.experiment.eta;
    println!("{:>6}  {:>8}  {:>12}  {:>14}  {:>14}  result", "λ", "q", "N(λ)^q", "lhs", "rhs");
    let mut all = true;
    for &lambda in &l.config.experiment.lambda {
        let r = stepper.grid.gn_check(&fields, dt, lambda, eta)?;
        all &= r.pass;
        println!(
            "{:>6}  {:>8.4}  {:>12.6}  {:>14.6}  {:>14.6}  {}",
            lambda,
            r.q,
            r.constant_pow_q,
            r.lhs,
            r.rhs,
            if r.pass { "PASS" } else { "FAIL" }
        );
    }
    Ok(if all { Outcome::Pass } else { Outcome::Fail })
}

fn monotonicity(path: &Path, seed: Option<u64>) -> Result<Outcome> {
    let l = load(path, seed)?;
    let pairs = l.config.experiment.pairs;
    let coarse = Grid::<f64>::new(&l.spec.domain, &l.spec.nodes)?;
    let fine_nodes: Vec<usize> = l.spec.nodes.iter().map(|n| 2 * n + 1).collect();
    let fine = Grid::<f64>::new(&l.spec.domain, &fine_nodes)?;
    let a = monotonicity_check(&l.spec, &coarse, pairs, l.config.noise.seed)?;
    let b = monotonicity_check(&l.spec, &fine, pairs, l.config.noise.seed)?;
    let drift = (a.fitted_n - b.fitted_n).abs() / a.fitted_n.abs().max(f64::MIN_POSITIVE);
    let phi_ok = a.phi_term_max <= 1e-12 && b.phi_term_max <= 1e-12;
    let stable = drift <= 0.2;
    println!("{:>10}  {:>14}  {:>14}", "nodes", "Φ-term max", "fitted N");
    println!("{:>10?}  {:>14.6e}  {:>14.6}", l.spec.nodes, a.phi_term_max, a.fitted_n);
    println!("{:>10?}  {:>14.6e}  {:>14.6}", fine_nodes, b.phi_term_max, b.fitted_n);
    println!("Φ-term ≤ 1e-12: {}", if phi_ok { "PASS" } else { "FAIL" });
    println!("fitted N relative change {drift:.4}: {}", if stable { "PASS" } else { "FAIL" });
    Ok(if phi_ok && stable { Outcome::Pass } else { Outcome::Fail })
}

fn paths_or_default(l: &Loaded, paths: Option<usize>) -> usize {
    paths.unwrap_or(l.config.experiment.paths)
}

fn simulate(l: &Loaded, dir: &mut RunDir, paths: Option<usize>) -> Result<Outcome> {
    let m = paths_or_default(l, paths);
    if m == 0 {
        bail!(ConfigError("--paths must be ≥ 1".into()));
    }
    let statistic = l.config.experiment.statistic;
    let mut solver = l.solver.clone();
    if let spme_core::Statistic::SupLp(p) | spme_core::Statistic::TerminalLp(p) = statistic {
        if !solver.p_list.contains(&p) {
            solver.p_list.push(p);
        }
    }
    let stepper = Stepper::<f64>::new(&l.spec, &solver)?;
    let first = stepper.solve_path(0).map_err(|e| Error::Path {
        path: 0,
        source: Box::new(e),
    })?;
    let mut buf = Vec::new();
    first.write_norms_csv(&mut buf)?;
    dir.write("trajectory.csv", &buf)?;
    let mut buf = Vec::new();
    stepper.grid.write_csv(first.final_state(), &mut buf)?;
    dir.write("field_final.csv", &buf)?;

    let alpha = l.spec.alpha;
    let values = run_paths(&stepper, m, |traj| Ok(statistic.evaluate(&traj).powf(alpha)))?;
    let estimate = if m >= 2 {
        McEstimate::from_values(statistic.label(), alpha, solver.seed, values)?
    } else {
        McEstimate {
            statistic: statistic.label(),
            alpha,
            samples: 1,
            mean: values[0],
            stderr: f64::NAN,
            ci_low: f64::NAN,
            ci_high: f64::NAN,
            seed: solver.seed,
            values,
        }
    };
    let rows = [EstimateRow {
        param: "paths",
        value: m as f64,
        estimate: &estimate,
    }];
    dir.write("estimates.csv", &estimates_csv(&rows))?;
    dir.write("paths.csv", &paths_csv(&rows))?;
    println!(
        "{}^{}: mean = {:.6e}, stderr = {:.3e}, M = {}",
        estimate.statistic, alpha, estimate.mean, estimate.stderr, m
    );
    Ok(Outcome::Pass)
}

fn sweep(l: &Loaded, dir: &mut RunDir, paths: Option<usize>, max_ratio: f64) -> Result<Outcome> {
    let m = paths_or_default(l, paths);
    let eps = &l.config.experiment.eps_list;
    let sweep = epsilon_sweep(&l.spec, &l.solver, m, eps)?;
    let rows: Vec<EstimateRow> = eps
        .iter()
        .zip(&sweep.estimates)
        .map(|(&e, est)| EstimateRow {
            param: "epsilon",
            value: e,
            estimate: est,
        })
        .collect();
    dir.write("estimates.csv", &estimates_csv(&rows))?;
    dir.write("paths.csv", &paths_csv(&rows))?;
    let min = sweep.estimates.iter().map(|e| e.mean).fold(f64::INFINITY, f64::min);
    println!("{:>10}  {:>14}  {:>12}  {:>8}", "ε", "E‖u‖²_∞", "stderr", "ratio");
    for (e, est) in eps.iter().zip(&sweep.estimates) {
        println!("{:>10}  {:>14.6e}  {:>12.3e}  {:>8.4}", e, est.mean, est.stderr, est.mean / min);
    }
    let ok = sweep.ratio <= max_ratio;
    println!("max/min ratio {:.4} (bound {max_ratio}): {}", sweep.ratio, if ok { "PASS" } else { "FAIL" });
    Ok(if ok { Outcome::Pass } else { Outcome::Fail })
}

fn smoothing(l: &Loaded, dir: &mut RunDir, paths: Option<usize>) -> Result<Outcome> {
    let m = paths_or_default(l, paths);
    let rho = &l.config.experiment.rho_list;
    let fit = smoothing_rate_fit(&l.spec, &l.solver, m, rho)?;
    let rows: Vec<EstimateRow> = rho
        .iter()
        .zip(&fit.estimates)
        .map(|(&r, est)| EstimateRow {
            param: "rho",
            value: r,
            estimate: est,
        })
        .collect();
    dir.write("estimates.csv", &estimates_csv(&rows))?;
    dir.write("paths.csv", &paths_csv(&rows))?;
    let ratefit = format!(
        "slope,intercept,slope_ci_low,slope_ci_high,neg_theta_ref,blow_up,pathwise_monotone\n{},{},{},{},{},{},{}\n",
        fit.slope, fit.intercept, fit.slope_ci.0, fit.slope_ci.1, -fit.theta_ref, fit.blow_up, fit.pathwise_monotone
    );
    dir.write("ratefit.csv", ratefit.as_bytes())?;
    println!("{:>8}  {:>14}  {:>12}", "ρ", "E‖u‖²_∞,ρ", "stderr");
    for (r, est) in rho.iter().zip(&fit.estimates) {
        println!("{:>8}  {:>14.6e}  {:>12.3e}", r, est.mean, est.stderr);
    }
    let ok = fit.within_reference() && fit.pathwise_monotone;
    println!(
        "slope = {:.4} [{:.4}, {:.4}], -θ̃ = {:.4}, path-wise monotone: {}: {}",
        fit.slope,
        fit.slope_ci.0,
        fit.slope_ci.1,
        -fit.theta_ref,
        fit.pathwise_monotone,
        if ok { "PASS" } else { "FAIL" }
    );
    Ok(if ok { Outcome::Pass } else { Outcome::Fail })
}

fn ito(l: &Loaded, dir: &mut RunDir, paths: Option<usize>) -> Result<Outcome> {
    let m = paths_or_default(l, paths);
    let p = l.config.experiment.p;
    let dt = l.solver.dt;
    let mut estimates = Vec::new();
    for h in [dt, dt / 2.0] {
        let mut solver = l.solver.clone();
        solver.dt = h;
        estimates.push(mc_ito_residual(&l.spec, &solver, m, p).context("Itô residual")?);
    }
    let rows = [
        EstimateRow {
            param: "dt",
            value: dt,
            estimate: &estimates[0],
        },
        EstimateRow {
            param: "dt",
            value: dt / 2.0,
            estimate: &estimates[1],
        },
    ];
    dir.write("estimates.csv", &estimates_csv(&rows))?;
    dir.write("paths.csv", &paths_csv(&rows))?;
    let ratio = estimates[0].mean / estimates[1].mean;
    let ok = (1.2..=2.8).contains(&ratio);
    for (h, e) in [dt, dt / 2.0].iter().zip(&estimates) {
        println!("dt = {h:<10} mean cumulative residual = {:.6e} ± {:.2e}", e.mean, e.stderr);
    }
    println!("halving ratio {ratio:.4} (accepted [1.2, 2.8]): {}", if ok { "PASS" } else { "FAIL" });
    Ok(if ok { Outcome::Pass } else { Outcome::Fail })
}
