//! Acceptance gate: one line per criterion, non-zero exit if any fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use num_rational::BigRational;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use spme_core::estimators::mc_ito_residual;
use spme_core::moser::iteration_constants;
use spme_core::{
    epsilon_sweep, monotonicity_check, newton_solve, smoothing_exponent, smoothing_rate_fit, viscosity_convergence,
    ExactLadder, Field, FnSpec, Grid, InitialData, NoiseIncrements, PhiSpec, ProblemSpec, SolverConfig, Stepper,
};

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn heat_benchmark() -> Result<String, String> {
    let start = Instant::now();
    let spec = ProblemSpec::new(1, 127, 0.1, PhiSpec::linear(), InitialData::Function(FnSpec::sine(1.0, &[1.0])));
    let dt = 1e-4;
    let traj = Stepper::<f64>::new(&spec, &SolverConfig::new(dt))
        .and_then(|s| s.solve_path(0))
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let h = 1.0 / 128.0;
    let lam = 4.0 / (h * h) * (PI * h / 2.0).sin().powi(2);
    let sup0 = traj.norms[0].sup;
    let mut worst = 0.0f64;
    for (n, rec) in traj.norms.iter().enumerate() {
        let want = sup0 * (1.0 + dt * lam).powi(-(n as i32));
        worst = worst.max((rec.sup - want).abs() / want);
    }
    let last = traj.norms.last().unwrap();
    let continuum = (-PI * PI * 0.1).exp();
    let rel = (last.sup - continuum).abs() / continuum;
    ensure(worst <= 1e-10, format!("eigenmode relative error {worst:e}"))?;
    ensure(rel <= 0.05, format!("continuum relative error {rel:.4}"))?;
    ensure(elapsed < Duration::from_secs(1), format!("runtime {elapsed:?}"))?;
    Ok(format!(
        "eigenmode rel err {worst:.2e} ≤ 1e-10, continuum rel err {rel:.2e} ≤ 5%, {elapsed:.2?} < 1 s"
    ))
}

fn hminus1_norm() -> Result<String, String> {
    let g = Grid::<f64>::unit(1, 255).map_err(|e| e.to_string())?;
    let v = g.sample(|x| (PI * x[0]).sin());
    let n = g.norm_hminus1(&v).map_err(|e| e.to_string())?;
    let want = 1.0 / (PI * 2f64.sqrt());
    let rel = (n - want).abs() / want;
    ensure(rel < 0.01, format!("‖sin‖_H⁻¹ = {n}, rel err {rel:e}"))?;
    Ok(format!("‖sin(πx)‖_H⁻¹ = {n:.6} vs {want:.6}, rel err {rel:.2e} < 1%"))
}

/// Random smooth trajectory: low sine modes with time-modulated coefficients.
fn smooth_trajectory(g: &Grid<f64>, rng: &mut ChaCha8Rng, steps: usize) -> Vec<Field<f64>> {
    let modes: Vec<Field<f64>> = g.modes_by_eigenvalue().into_iter().take(6).map(|k| g.sine_mode(&k)).collect();
    let amp = 0.1 + 5.0 * uniform(rng);
    let coeffs: Vec<(f64, f64, f64)> = (0..modes.len())
        .map(|k| {
            let scale = amp / (k + 1) as f64;
            (
                scale * (2.0 * uniform(rng) - 1.0),
                scale * (2.0 * uniform(rng) - 1.0),
                10.0 * uniform(rng),
            )
        })
        .collect();
    (0..steps)
        .map(|n| {
            let t = n as f64 / steps as f64;
            let mut out = vec![0.0; g.len()];
            for (e, &(a, b, w)) in modes.iter().zip(&coeffs) {
                let c = a + b * (w * t).sin();
                for (o, &x) in out.iter_mut().zip(e.iter()) {
                    *o += c * x;
                }
            }
            Field(out)
        })
        .collect()
}

fn gn_corpus() -> Result<String, String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let grids = [
        Grid::<f64>::unit(1, 63).map_err(|e| e.to_string())?,
        Grid::<f64>::unit(2, 15).map_err(|e| e.to_string())?,
    ];
    let steps = 20;
    let mut checks = 0;
    let mut violations = 0;
    let mut worst = 0.0f64;
    for g in &grids {
        for _ in 0..1000 {
            let traj = smooth_trajectory(g, &mut rng, steps);
            for lambda in [1.0, 1.5, 2.0] {
                let r = g.gn_check(&traj, 1.0 / steps as f64, lambda, 0.05).map_err(|e| e.to_string())?;
                checks += 1;
                worst = worst.max(r.lhs / r.rhs);
                if !r.pass {
                    violations += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(violations == 0, format!("{violations} violations out of {checks}"))?;
    ensure(elapsed < Duration::from_secs(30), format!("runtime {elapsed:?}"))?;
    Ok(format!(
        "2×1000 trajectories (d=1,2), {checks} checks, 0 violations, max lhs/rhs {worst:.3}, {elapsed:.2?} < 30 s"
    ))
}

fn maximum_principle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 31;
    let spec = ProblemSpec::new(1, n, 0.02, PhiSpec::power(2.0), InitialData::Function(FnSpec::zero()));
    let stepper = Stepper::<f64>::new(&spec, &SolverConfig::new(1e-3)).map_err(|e| e.to_string())?;
    let dw = NoiseIncrements::zero(0, 0);
    let mut steps = 0;
    let mut worst_inf = f64::NEG_INFINITY;
    let mut worst_l1 = f64::NEG_INFINITY;
    for field in 0..100 {
        let scale = 0.1 + 3.0 * uniform(&mut rng);
        let mut u = Field(
            (0..n)
                .map(|_| {
                    // every other field has zero patches (compact support)
                    let v = scale * uniform(&mut rng);
                    if field % 2 == 1 && uniform(&mut rng) < 0.4 {
                        0.0
                    } else {
                        v
                    }
                })
                .collect(),
        );
        for k in 0..20 {
            let (next, _) = stepper.step(&u, k as f64 * 1e-3, &dw).map_err(|e| e.to_string())?;
            let (a, b) = (next.max_abs(), u.max_abs());
            let l1 = |f: &Field<f64>| f.iter().map(|v| v.abs()).sum::<f64>() * stepper.grid.cell_volume();
            worst_inf = worst_inf.max(a - b);
            worst_l1 = worst_l1.max(l1(&next) - l1(&u));
            ensure(a <= b, format!("field {field} step {k}: ‖u⁺‖∞ = {a} > ‖u‖∞ = {b}"))?;
            ensure(l1(&next) <= l1(&u) + 1e-9, format!("field {field} step {k}: L₁ grew"))?;
            u = next;
            steps += 1;
        }
    }
    Ok(format!(
        "100 fields, {steps} steps: max Δ‖·‖∞ = {worst_inf:.2e} ≤ 0, max Δ‖·‖₁ = {worst_l1:.2e} ≤ 1e-9"
    ))
}

/// Nonlinear Gauss–Seidel with a bisection solve per node.
fn gauss_seidel_oracle(rhs: &[f64], dt: f64, h: f64, eps: f64) -> Vec<f64> {
    let psi = |r: f64| r.abs() * r + eps * r;
    let k = dt / (h * h);
    let n = rhs.len();
    let mut u = vec![0.0; n];
    for _sweep in 0..10_000 {
        let mut change = 0.0f64;
        for j in 0..n {
            let left = if j > 0 { psi(u[j - 1]) } else { 0.0 };
            let right = if j + 1 < n { psi(u[j + 1]) } else { 0.0 };
            let f = |x: f64| x + k * (2.0 * psi(x) - left - right) - rhs[j];
            let (mut lo, mut hi) = (-100.0, 100.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if f(mid) > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let x = 0.5 * (lo + hi);
            change = change.max((x - u[j]).abs());
            u[j] = x;
        }
        if change < 1e-14 {
            break;
        }
    }
    u
}

fn newton_oracle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let g = Grid::<f64>::unit(1, 17).map_err(|e| e.to_string())?;
    let (dt, eps) = (1e-3, 0.01);
    let mut cfg = SolverConfig::new(dt);
    cfg.newton_tol = 1e-13;
    let h = 1.0 / 18.0;
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let rhs: Vec<f64> = (0..17).map(|_| 4.0 * uniform(&mut rng) - 2.0).collect();
        let (u, _) = newton_solve(
            &g,
            dt,
            |r: f64| r.abs() * r + eps * r,
            |r: f64| 2.0 * r.abs() + eps,
            &rhs,
            &vec![0.0; 17],
            &cfg,
        )
        .map_err(|e| e.to_string())?;
        let oracle = gauss_seidel_oracle(&rhs, dt, h, eps);
        for (a, b) in u.iter().zip(&oracle) {
            worst = worst.max((a - b).abs());
        }
    }
    ensure(worst <= 1e-8, format!("max-norm gap {worst:e}"))?;
    Ok(format!("50 right-hand sides, max |Newton − Gauss–Seidel| = {worst:.2e} ≤ 1e-8"))
}

fn pme_noise(spec: &mut ProblemSpec, g_amp: f64) {
    spec.coeffs.nu = vec![FnSpec::constant(0.5)];
    spec.coeffs.g = vec![FnSpec::sine(g_amp, &[1.0])];
}

fn uniform_in_epsilon() -> Result<String, String> {
    let start = Instant::now();
    let mut spec = ProblemSpec::new(1, 31, 0.5, PhiSpec::power(2.0), InitialData::Function(FnSpec::sine(1.0, &[1.0])));
    pme_noise(&mut spec, 0.5);
    spec.coeffs.f = FnSpec::sine(1.0, &[2.0]);
    let cfg = SolverConfig::new(1e-3).with_seed(7);
    let sweep = epsilon_sweep(&spec, &cfg, 200, &[1e-1, 1e-2, 1e-3, 1e-4]).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(sweep.ratio <= 1.5, format!("max/min ratio {}", sweep.ratio))?;
    ensure(elapsed < Duration::from_secs(300), format!("runtime {elapsed:?}"))?;
    Ok(format!(
        "M=200, ε ∈ {{1e-1..1e-4}}: max/min ratio {:.4} ≤ 1.5, {elapsed:.2?} < 5 min",
        sweep.ratio
    ))
}

fn smoothing_rate() -> Result<String, String> {
    let theta = smoothing_exponent(&ExactLadder::new(1, q(1, 1), None, q(2, 1)).map_err(|e| e.to_string())?);
    ensure(theta == q(2, 3), format!("θ̃ = {theta}"))?;
    let mut spec = ProblemSpec::new(1, 31, 1.0, PhiSpec::power(2.0), InitialData::random_signs(1.0));
    pme_noise(&mut spec, 0.3);
    let cfg = SolverConfig::new(1e-3).with_seed(7);
    let fit = smoothing_rate_fit(&spec, &cfg, 200, &[0.02, 0.05, 0.1, 0.2, 0.4]).map_err(|e| e.to_string())?;
    ensure(fit.pathwise_monotone, "window statistic not monotone on some path")?;
    ensure(
        fit.slope >= -2.0 / 3.0 && fit.slope <= 0.0,
        format!("slope {} outside [-2/3, 0]", fit.slope),
    )?;
    ensure(!fit.blow_up, "non-finite estimate")?;
    Ok(format!(
        "slope {:.4} ∈ [−θ̃, 0] with θ̃ = {theta}, window statistic monotone on all 200 paths",
        fit.slope
    ))
}

fn ito_identity() -> Result<String, String> {
    let mut spec = ProblemSpec::new(1, 15, 0.2, PhiSpec::linear(), InitialData::Function(FnSpec::sine(1.0, &[1.0])));
    pme_noise(&mut spec, 0.5);
    let coarse = mc_ito_residual(&spec, &SolverConfig::new(2e-3).with_seed(11), 200, 2.0).map_err(|e| e.to_string())?;
    let fine = mc_ito_residual(&spec, &SolverConfig::new(1e-3).with_seed(11), 200, 2.0).map_err(|e| e.to_string())?;
    let ratio = coarse.mean / fine.mean;
    ensure((1.2..=2.8).contains(&ratio), format!("ratio {ratio}"))?;
    Ok(format!(
        "mean cumulative residual {:.3e} → {:.3e} as Δt halves, ratio {ratio:.3} ∈ [1.2, 2.8]",
        coarse.mean, fine.mean
    ))
}

fn viscosity_cauchy() -> Result<String, String> {
    let eps = [0.1, 0.05, 0.025, 0.0125, 0.00625];
    let cfg = SolverConfig::new(1e-3);
    let xi = InitialData::Function(FnSpec::sine(1.0, &[1.0]));
    let pme = ProblemSpec::new(1, 31, 0.2, PhiSpec::power(2.0), xi.clone());
    let r = viscosity_convergence(&pme, &cfg, 2, &eps).map_err(|e| e.to_string())?;
    ensure(r.strictly_decreasing(), format!("PME D_j not decreasing: {:?}", r.means()))?;
    let heat = ProblemSpec::new(1, 31, 0.2, PhiSpec::linear(), xi);
    let h = viscosity_convergence(&heat, &cfg, 2, &eps).map_err(|e| e.to_string())?;
    let ratios = h.ratios();
    ensure(
        ratios.iter().all(|r| (2.5..=5.5).contains(r)),
        format!("heat ratios {ratios:?}"),
    )?;
    Ok(format!(
        "PME D_j strictly decreasing over 4 differences; heat ratios {:?} ⊂ [2.5, 5.5]",
        ratios.iter().map(|r| (r * 1000.0).round() / 1000.0).collect::<Vec<_>>()
    ))
}

fn moser_arithmetic() -> Result<String, String> {
    let l = ExactLadder::new(1, q(1, 1), None, q(2, 1)).map_err(|e| e.to_string())?;
    ensure(l.mu_conj == q(1, 1), "μ'")?;
    ensure(l.gamma_bar == q(3, 1), "γ̄")?;
    ensure(l.delta == q(3, 2), "δ")?;
    ensure(l.ladder(3)[1..] == [q(4, 1), q(13, 1), q(40, 1)], "p_1..p_3")?;
    ensure(l.n0 == 1, "n₀")?;
    ensure(l.kappa == q(8, 1), "κ")?;
    ensure(l.theta == q(2, 3), "θ̃")?;
    let ic = iteration_constants(&l, 10.0, 40).map_err(|e| e.to_string())?;
    let (p20, p40) = (ic.product_to(20).unwrap(), ic.product_to(40).unwrap());
    let gap = (p40 - p20).abs() / p20;
    ensure(gap < 1e-6, format!("product gap {gap:e}"))?;
    Ok(format!(
        "μ'=1, γ̄=3, δ=3/2, p=4,13,40, n₀=1, κ=8, θ̃=2/3 exactly; |∏40−∏20|/∏20 = {gap:.2e} < 1e-6"
    ))
}

fn monotonicity() -> Result<String, String> {
    let mut spec = ProblemSpec::new(1, 63, 1.0, PhiSpec::power(2.0), InitialData::Function(FnSpec::zero()));
    spec.coeffs.b = vec![FnSpec::poly(vec![0.0, 1.0, -1.0])];
    spec.coeffs.c = FnSpec::constant(1.0);
    spec.coeffs.nu = vec![FnSpec::constant(0.5)];
    let coarse = Grid::<f64>::unit(1, 63).map_err(|e| e.to_string())?;
    let fine = Grid::<f64>::unit(1, 127).map_err(|e| e.to_string())?;
    let a = monotonicity_check(&spec, &coarse, 500, 9).map_err(|e| e.to_string())?;
    let b = monotonicity_check(&spec, &fine, 500, 9).map_err(|e| e.to_string())?;
    let phi = a.phi_term_max.max(b.phi_term_max);
    ensure(phi <= 1e-12, format!("Φ-term {phi:e}"))?;
    let drift = (a.fitted_n - b.fitted_n).abs() / a.fitted_n.abs();
    ensure(drift <= 0.2, format!("fitted N {} vs {}", a.fitted_n, b.fitted_n))?;
    Ok(format!(
        "Φ-term max {phi:.2e} ≤ 1e-12 on 500 pairs; fitted N {:.4} (h=1/64) vs {:.4} (h=1/128), change {:.2}%",
        a.fitted_n,
        b.fitted_n,
        100.0 * drift
    ))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn run_cli(out: &Path, threads: usize, args: &[&str]) -> Result<Vec<u8>, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_spme-lab"))
        .arg("--out")
        .arg(out)
        .arg("--threads")
        .arg(threads.to_string())
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(
        status.status.success(),
        format!("{args:?} failed: {}", String::from_utf8_lossy(&status.stderr)),
    )?;
    let dir = std::fs::read_dir(out)
        .map_err(|e| e.to_string())?
        .next()
        .ok_or("no run directory")?
        .map_err(|e| e.to_string())?
        .path();
    std::fs::read(dir.join("estimates.csv")).map_err(|e| e.to_string())
}

fn determinism() -> Result<String, String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let pme = fixture("pme_m2.toml");
    let pme = pme.to_str().unwrap();
    let experiments: [&[&str]; 3] = [
        &["simulate", pme, "--paths", "24"],
        &["sweep-epsilon", pme, "--paths", "24"],
        &["smoothing", pme, "--paths", "24"],
    ];
    for (i, args) in experiments.iter().enumerate() {
        let runs: Vec<Vec<u8>> = [1usize, 4, 4]
            .iter()
            .enumerate()
            .map(|(k, &threads)| run_cli(&tmp.path().join(format!("{i}-{k}")), threads, args))
            .collect::<Result<_, _>>()?;
        ensure(runs[0] == runs[1] && runs[1] == runs[2], format!("{} estimates differ", args[0]))?;
    }
    Ok("simulate, sweep-epsilon, smoothing: estimates.csv byte-identical across reruns and --threads 1/4".into())
}

fn main() {
    let criteria: [(&str, Check); 12] = [
        ("1 heat benchmark", heat_benchmark),
        ("2 H⁻¹ norm", hminus1_norm),
        ("3 Gagliardo–Nirenberg corpus", gn_corpus),
        ("4 degenerate maximum principle", maximum_principle),
        ("5 Newton vs Gauss–Seidel oracle", newton_oracle),
        ("6 uniform-in-ε boundedness", uniform_in_epsilon),
        ("7 smoothing rate", smoothing_rate),
        ("8 Itô L_p identity", ito_identity),
        ("9 viscosity Cauchy property", viscosity_cauchy),
        ("10 Moser arithmetic", moser_arithmetic),
        ("11 monotonicity", monotonicity),
        ("12 determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        match outcome {
            Ok(detail) => println!("PASS  [{name}] {detail} ({took:.2?})"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  [{name}] {detail} ({took:.2?})");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 12 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
