//! Monte Carlo moments along simulated paths and path-wise checks of the
//! Itô formula, the stochastic Gronwall bound, monotonicity and the
//! vanishing-viscosity limit.
//!
//! Paths run in parallel on the current rayon pool; results are collected by
//! path index and reduced sequentially, so estimates do not depend on the
//! number of threads.

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::model::{stratonovich_to_ito, ProblemSpec};
use crate::moser::{smoothing_exponent, MoserLadder};
use crate::noise::NoiseModel;
use crate::scalar::Scalar;
use crate::solver::{SolverConfig, Stepper, Trajectory};

/// Per-path statistic; [`mc_moment`] averages its `α`-th power.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "param", rename_all = "snake_case")]
pub enum Statistic {
    /// `sup_t ‖u_t‖_{L_p}`.
    SupLp(f64),
    /// `‖u‖_{L_∞(Q_T)}`.
    SupInf,
    /// `‖u‖_{L_∞((ρ,T)×Q)}`.
    SupInfWindow(f64),
    /// `sup_t ‖u_t‖_{H^{-1}}`.
    HminusOne,
    /// `‖u_T‖_{L_p}`.
    TerminalLp(f64),
}

impl Statistic {
    pub fn label(&self) -> String {
        match self {
            Statistic::SupLp(p) => format!("sup_lp(p={p})"),
            Statistic::SupInf => "sup_inf".into(),
            Statistic::SupInfWindow(rho) => format!("sup_inf_window(rho={rho})"),
            Statistic::HminusOne => "sup_hminus1".into(),
            Statistic::TerminalLp(p) => format!("terminal_lp(p={p})"),
        }
    }

    /// Adjusts the solver configuration so the statistic can be evaluated.
    fn prepare(&self, cfg: &mut SolverConfig) {
        match *self {
            Statistic::SupLp(p) | Statistic::TerminalLp(p) => {
                if !cfg.p_list.contains(&p) {
                    cfg.p_list.push(p);
                }
            }
            Statistic::HminusOne => cfg.record_hminus1 = true,
            _ => {}
        }
    }

    fn check(&self, horizon: f64) -> Result<()> {
        match *self {
            Statistic::SupLp(p) | Statistic::TerminalLp(p) if !(p >= 1.0) => {
                Err(Error::domain("L_p exponent", format!("need p ≥ 1, got {p}")))
            }
            Statistic::SupInfWindow(rho) if !(rho > 0.0 && rho < horizon) => {
                Err(Error::domain("window ρ", format!("need ρ ∈ (0, {horizon}), got {rho}")))
            }
            _ => Ok(()),
        }
    }

    pub fn evaluate<T: Scalar>(&self, traj: &Trajectory<T>) -> f64 {
        match *self {
            Statistic::SupLp(p) => traj.sup_lp(p).unwrap_or(f64::NAN),
            Statistic::SupInf => traj.sup_norm(),
            Statistic::SupInfWindow(rho) => traj.sup_norm_after(rho),
            Statistic::HminusOne => traj.sup_hminus1().unwrap_or(f64::NAN),
            Statistic::TerminalLp(p) => {
                let k = traj.p_list.iter().position(|&q| q == p);
                k.map_or(f64::NAN, |k| traj.norms.last().map_or(f64::NAN, |r| r.lp[k]))
            }
        }
    }
}

/// Sample mean with a normal 95% interval.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub statistic: String,
    pub alpha: f64,
    pub samples: usize,
    pub mean: f64,
    pub stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
    /// Per-path values (already raised to `α`).
    #[serde(skip)]
    pub values: Vec<f64>,
}

impl McEstimate {
    pub fn from_values(statistic: impl Into<String>, alpha: f64, seed: u64, values: Vec<f64>) -> Result<Self> {
        let m = values.len();
        if m < 2 {
            return Err(Error::domain("sample count", format!("need M ≥ 2, got {m}")));
        }
        let mean = values.iter().sum::<f64>() / m as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
        let stderr = (var / m as f64).sqrt();
        Ok(McEstimate {
            statistic: statistic.into(),
            alpha,
            samples: m,
            mean,
            stderr,
            ci_low: mean - 1.96 * stderr,
            ci_high: mean + 1.96 * stderr,
            seed,
            values,
        })
    }

    pub fn overlaps(&self, other: &McEstimate) -> bool {
        self.ci_low <= other.ci_high && other.ci_low <= self.ci_high
    }
}

/// Runs paths `0..m` and maps each trajectory; the first failing path (by
/// index) aborts the run.
pub fn run_paths<T, R, F>(stepper: &Stepper<T>, m: usize, f: F) -> Result<Vec<R>>
where
    T: Scalar,
    R: Send,
    F: Fn(Trajectory<T>) -> Result<R> + Sync,
{
    let results: Vec<Result<R>> = (0..m as u64)
        .into_par_iter()
        .map(|i| {
            stepper
                .solve_path(i)
                .and_then(&f)
                .map_err(|e| Error::Path {
                    path: i,
                    source: Box::new(e),
                })
        })
        .collect();
    results.into_iter().collect()
}

/// `E[stat(u)^α]` over `m` paths with `α = spec.alpha`.
pub fn mc_moment(spec: &ProblemSpec, cfg: &SolverConfig, m: usize, statistic: Statistic) -> Result<McEstimate> {
    if m < 2 {
        return Err(Error::domain("sample count", format!("need M ≥ 2, got {m}")));
    }
    statistic.check(spec.horizon)?;
    let mut cfg = cfg.clone();
    statistic.prepare(&mut cfg);
    cfg.record_every = cfg.record_every.max(1);
    let stepper = Stepper::<f64>::new(spec, &cfg)?;
    let alpha = spec.alpha;
    let values = run_paths(&stepper, m, |traj| Ok(statistic.evaluate(&traj).powf(alpha)))?;
    McEstimate::from_values(statistic.label(), alpha, cfg.seed, values)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpsilonSweep {
    pub epsilons: Vec<f64>,
    pub estimates: Vec<McEstimate>,
    /// `max/min` of the estimates across ε.
    pub ratio: f64,
}

/// `E‖u^ε‖²_{L_∞(Q_T)}` per ε, all with the same noise paths.
pub fn epsilon_sweep(spec: &ProblemSpec, cfg: &SolverConfig, m: usize, eps_list: &[f64]) -> Result<EpsilonSweep> {
    if eps_list.is_empty() || eps_list.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::domain("ε list", "need positive values"));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::domain("ε list", "must be strictly decreasing"));
    }
    let mut estimates = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let mut s = spec.clone();
        s.epsilon = eps;
        s.alpha = 2.0;
        estimates.push(mc_moment(&s, cfg, m, Statistic::SupInf)?);
    }
    let max = estimates.iter().map(|e| e.mean).fold(f64::NEG_INFINITY, f64::max);
    let min = estimates.iter().map(|e| e.mean).fold(f64::INFINITY, f64::min);
    Ok(EpsilonSweep {
        epsilons: eps_list.to_vec(),
        estimates,
        ratio: max / min,
    })
}

/// Least-squares fit of `log E‖u‖²_{L_∞((ρ,T)×Q)}` against `log ρ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateFit {
    pub rho: Vec<f64>,
    pub estimates: Vec<McEstimate>,
    pub slope: f64,
    pub intercept: f64,
    /// 95% interval of the slope (Student t with `k-2` degrees of freedom).
    pub slope_ci: (f64, f64),
    /// `θ̃` at `α = 2`; the fit is compared with `-θ̃`.
    pub theta_ref: f64,
    /// Some estimate was not finite; the fit uses the finite subset.
    pub blow_up: bool,
    /// Every path had a non-increasing window statistic in ρ.
    pub pathwise_monotone: bool,
}

impl RateFit {
    pub fn within_reference(&self) -> bool {
        self.slope >= -self.theta_ref && self.slope <= 0.0
    }
}

/// Ordinary least squares `y = a + b x`; returns `(b, a, stderr(b))`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let se = if x.len() > 2 {
        let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    (slope, intercept, se)
}

pub fn smoothing_rate_fit(spec: &ProblemSpec, cfg: &SolverConfig, m: usize, rho_list: &[f64]) -> Result<RateFit> {
    if m < 2 {
        return Err(Error::domain("sample count", format!("need M ≥ 2, got {m}")));
    }
    if rho_list.len() < 2 {
        return Err(Error::domain("ρ list", "need at least two values"));
    }
    if rho_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("ρ list", "must be strictly increasing"));
    }
    for &rho in rho_list {
        Statistic::SupInfWindow(rho).check(spec.horizon)?;
    }
    let stepper = Stepper::<f64>::new(spec, cfg)?;
    let per_path = run_paths(&stepper, m, |traj| {
        Ok(rho_list
            .iter()
            .map(|&rho| traj.sup_norm_after(rho).powi(2))
            .collect::<Vec<f64>>())
    })?;
    let pathwise_monotone = per_path.iter().all(|v| v.windows(2).all(|w| w[1] <= w[0]));
    let estimates = rho_list
        .iter()
        .enumerate()
        .map(|(k, &rho)| {
            McEstimate::from_values(
                Statistic::SupInfWindow(rho).label(),
                2.0,
                cfg.seed,
                per_path.iter().map(|v| v[k]).collect(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let finite: Vec<(f64, f64)> = rho_list
        .iter()
        .zip(&estimates)
        .filter(|(_, e)| e.mean.is_finite() && e.mean > 0.0)
        .map(|(&r, e)| (r.ln(), e.mean.ln()))
        .collect();
    let blow_up = finite.len() < rho_list.len();
    let (xs, ys): (Vec<f64>, Vec<f64>) = finite.into_iter().unzip();
    let (slope, intercept, se) = if xs.len() >= 2 {
        linear_fit(&xs, &ys)
    } else {
        (f64::NAN, f64::NAN, f64::NAN)
    };
    let half = if xs.len() > 2 {
        let t = StudentsT::new(0.0, 1.0, (xs.len() - 2) as f64)
            .map(|d| d.inverse_cdf(0.975))
            .unwrap_or(f64::NAN);
        t * se
    } else {
        f64::NAN
    };
    let theta_ref = reference_theta(spec)?;
    Ok(RateFit {
        rho: rho_list.to_vec(),
        estimates,
        slope,
        intercept,
        slope_ci: (slope - half, slope + half),
        theta_ref,
        blow_up,
        pathwise_monotone,
    })
}

/// Residual of the discrete `L_p` Itô formula along one path.
#[derive(Clone, Debug, PartialEq)]
pub struct ItoResidual {
    pub per_step: Vec<f64>,
    pub cumulative: f64,
}

/// `r_n = ‖u_{n+1}‖_p^p - ‖u_n‖_p^p - p(|u_n|^{p-2}u_n, D(u_n))Δt
///  - ½p(p-1)(|u_n|^{p-2}, |S(u_n)ΔW|²) - p(|u_n|^{p-2}u_n, S(u_n)ΔW)`
/// where `D` is the full discrete drift and `S(u)ΔW` the noise increment of
/// the step. Needs every state and increment recorded.
pub fn ito_identity_residual<T: Scalar>(stepper: &Stepper<T>, traj: &Trajectory<T>, p: f64) -> Result<ItoResidual> {
    if !(p >= 2.0) {
        return Err(Error::domain("p", format!("need p ≥ 2, got {p}")));
    }
    let steps = traj.newton_iters.len();
    if traj.snapshots.len() != steps + 1 || traj.increments.len() != steps {
        return Err(Error::domain(
            "trajectory",
            "needs record_every = 1 and recorded increments",
        ));
    }
    let g = &stepper.grid;
    let w = g.cell_volume().as_f64();
    let dt = traj.dt;
    let pow = |v: f64| if p == 2.0 { 1.0 } else { v.abs().powf(p - 2.0) };
    let mut per_step = Vec::with_capacity(steps);
    for n in 0..steps {
        let (t, u) = (&traj.snapshots[n].0, &traj.snapshots[n].1);
        let next = &traj.snapshots[n + 1].1;
        let tt = T::of(*t);
        let implicit = stepper.implicit_drift(u, tt);
        let explicit = stepper.explicit_drift(u, tt);
        let noise = stepper.noise_term(u, tt, &traj.increments[n]);
        let mut drift = 0.0;
        let mut qv = 0.0;
        let mut mart = 0.0;
        for j in 0..u.len() {
            let v = u[j].as_f64();
            let wgt = pow(v);
            let s = noise[j].as_f64();
            drift += wgt * v * (implicit[j] + explicit[j]).as_f64();
            qv += wgt * s * s;
            mart += wgt * v * s;
        }
        let lp_next = g.lp_power(next, p).as_f64();
        let lp_now = g.lp_power(u, p).as_f64();
        let r = lp_next - lp_now - w * (p * drift * dt + 0.5 * p * (p - 1.0) * qv + p * mart);
        per_step.push(r);
    }
    Ok(ItoResidual {
        cumulative: per_step.iter().sum(),
        per_step,
    })
}

/// Mean cumulative Itô residual over `m` paths.
pub fn mc_ito_residual(spec: &ProblemSpec, cfg: &SolverConfig, m: usize, p: f64) -> Result<McEstimate> {
    let mut cfg = cfg.clone();
    cfg.record_every = 1;
    cfg.record_increments = true;
    cfg.record_hminus1 = false;
    let stepper = Stepper::<f64>::new(spec, &cfg)?;
    let values = run_paths(&stepper, m, |traj| Ok(ito_identity_residual(&stepper, &traj, p)?.cumulative))?;
    McEstimate::from_values(format!("ito_residual(p={p})"), 1.0, cfg.seed, values)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GronwallCheck {
    /// `E sup_t ‖u_t‖_{L_p}^α`.
    pub lhs: McEstimate,
    /// `E‖ξ‖_{L_p}^α + (∫_0^T ‖f‖_{L_p}^p + ‖|g|_{ℓ₂}‖_{L_p}^p dt)^{α/p}`.
    pub rhs: f64,
    pub fitted_n: f64,
    /// False when the data functional vanishes but the moment does not.
    pub consistent: bool,
}

pub fn gronwall_check(spec: &ProblemSpec, cfg: &SolverConfig, m: usize, p: f64, alpha: f64) -> Result<GronwallCheck> {
    if !(p >= 2.0) || !(alpha > 0.0) {
        return Err(Error::domain("Gronwall exponents", format!("p = {p}, α = {alpha}")));
    }
    let mut s = spec.clone();
    s.alpha = alpha;
    let lhs = mc_moment(&s, cfg, m, Statistic::SupLp(p))?;

    let stepper = Stepper::<f64>::new(spec, cfg)?;
    let noise = stepper.noise_model()?;
    let g = &stepper.grid;
    let xi_term = (0..m as u64)
        .map(|i| g.lp_unchecked(&stepper.initial_field(&noise, i), p).powf(alpha))
        .sum::<f64>()
        / m as f64;
    let co = &stepper.spec.coeffs;
    let dom = g.domain().clone();
    let mut free = 0.0;
    for step in 0..noise.n_steps {
        let t = step as f64 * noise.dt;
        let v1 = g.sample(|x| co.f.eval(t, x, &dom).abs());
        let v2 = g.sample(|x| co.g.iter().map(|gk| gk.eval(t, x, &dom).powi(2)).sum::<f64>().sqrt());
        free += (g.lp_power(&v1, p) + g.lp_power(&v2, p)) * noise.dt;
    }
    let rhs = xi_term + free.powf(alpha / p);
    let consistent = rhs > 0.0 || lhs.mean == 0.0;
    let fitted_n = if rhs > 0.0 { lhs.mean / rhs } else { 0.0 };
    Ok(GronwallCheck {
        lhs,
        rhs,
        fitted_n,
        consistent,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub pairs: usize,
    /// `max -(Φ(φ)-Φ(ψ), φ-ψ)_h` over all pairs; must be ≤ 0.
    pub phi_term_max: f64,
    /// `max [2⟨A(φ)-A(ψ), φ-ψ⟩_{H⁻¹} + Σ_k ‖M^k(φ)-M^k(ψ)‖²_{H⁻¹}] / ‖φ-ψ‖²_{H⁻¹}`
    /// over the smooth pairs.
    pub fitted_n: f64,
}

/// Number of low sine modes in the smooth random fields.
const SMOOTH_MODES: usize = 8;

/// Evaluates the monotonicity inequality at `t = 0` on `n_pairs` smooth
/// random pairs (low sine modes, same coefficients on every grid) and as many
/// node-wise rough pairs for the `Φ` term.
pub fn monotonicity_check(spec: &ProblemSpec, grid: &Grid<f64>, n_pairs: usize, seed: u64) -> Result<MonotonicityReport> {
    let mut s = stratonovich_to_ito(spec);
    s.domain = grid.domain().clone();
    s.nodes = grid.nodes().to_vec();
    let stepper = Stepper::<f64>::new(&s, &SolverConfig::new(s.horizon))?;
    let g = &stepper.grid;
    let d_transport = if s.coeffs.sigma.is_zero() { 0 } else { s.dim() };
    let modes: Vec<Field<f64>> = g
        .modes_by_eigenvalue()
        .into_iter()
        .take(SMOOTH_MODES)
        .map(|k| {
            // unit sup-scale, independent of the grid
            let e = g.sine_mode(&k);
            let scale = e.max_abs();
            e.scaled(1.0 / scale)
        })
        .collect();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut uniform = move || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0;

    let phi = &s.phi;
    let phi_term = |a: &[f64], b: &[f64]| -> f64 {
        -g.inner(
            &a.iter().map(|&v| phi.eval(v)).zip(b.iter().map(|&v| phi.eval(v))).map(|(x, y)| x - y).collect::<Vec<_>>(),
            &a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>(),
        )
    };

    let mut phi_max = f64::NEG_INFINITY;
    let mut fitted = f64::NEG_INFINITY;
    for _ in 0..n_pairs {
        let mut smooth = || {
            let amp = 2.0 * uniform().abs() + 0.05;
            let mut out = vec![0.0; g.len()];
            for e in &modes {
                let a = amp * uniform();
                for (o, &x) in out.iter_mut().zip(e.iter()) {
                    *o += a * x;
                }
            }
            out
        };
        let (a, b) = (smooth(), smooth());
        phi_max = phi_max.max(phi_term(&a, &b));
        fitted = fitted.max(full_ratio(&stepper, d_transport, &a, &b)?);
    }
    for _ in 0..n_pairs {
        let amp = 2.0 * uniform().abs() + 0.05;
        let a: Vec<f64> = (0..g.len()).map(|_| amp * uniform()).collect();
        let b: Vec<f64> = (0..g.len()).map(|_| amp * uniform()).collect();
        phi_max = phi_max.max(phi_term(&a, &b));
    }
    Ok(MonotonicityReport {
        pairs: n_pairs,
        phi_term_max: if n_pairs == 0 { 0.0 } else { phi_max },
        fitted_n: if n_pairs == 0 { 0.0 } else { fitted },
    })
}

fn full_ratio(stepper: &Stepper<f64>, d_transport: usize, a: &[f64], b: &[f64]) -> Result<f64> {
    let g = &stepper.grid;
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let norm2 = g.inner_hminus1(&diff, &diff)?;
    if norm2 == 0.0 {
        return Ok(0.0);
    }
    let drift = |u: &[f64]| -> Vec<f64> {
        let im = stepper.implicit_drift(u, 0.0);
        let ex = stepper.explicit_drift(u, 0.0);
        im.iter().zip(&ex).map(|(x, y)| x + y).collect()
    };
    let (da, db) = (drift(a), drift(b));
    let ddrift: Vec<f64> = da.iter().zip(&db).map(|(x, y)| x - y).collect();
    let mut lhs = 2.0 * g.inner_hminus1(&ddrift, &diff)?;
    let ma = stepper.noise_integrands(a, 0.0, d_transport);
    let mb = stepper.noise_integrands(b, 0.0, d_transport);
    for (x, y) in ma.iter().zip(&mb) {
        let dm: Vec<f64> = x.iter().zip(y).map(|(p, q)| p - q).collect();
        lhs += g.inner_hminus1(&dm, &dm)?;
    }
    Ok(lhs / norm2)
}

/// `D_j = E ∫_0^T ‖u^{ε_j} - u^{ε_{j+1}}‖²_{H⁻¹} dt` for consecutive ε.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ViscosityReport {
    pub epsilons: Vec<f64>,
    pub differences: Vec<McEstimate>,
}

impl ViscosityReport {
    pub fn means(&self) -> Vec<f64> {
        self.differences.iter().map(|e| e.mean).collect()
    }

    pub fn strictly_decreasing(&self) -> bool {
        self.means().windows(2).all(|w| w[1] < w[0])
    }

    /// `D_j / D_{j+1}`.
    pub fn ratios(&self) -> Vec<f64> {
        self.means().windows(2).map(|w| w[0] / w[1]).collect()
    }
}

pub fn viscosity_convergence(spec: &ProblemSpec, cfg: &SolverConfig, m: usize, eps_list: &[f64]) -> Result<ViscosityReport> {
    if eps_list.len() < 2 || eps_list.iter().any(|&e| !(e >= 0.0)) {
        return Err(Error::domain("ε list", "need at least two non-negative values"));
    }
    if m < 2 {
        return Err(Error::domain("sample count", format!("need M ≥ 2, got {m}")));
    }
    let mut cfg = cfg.clone();
    cfg.record_every = 1;
    cfg.record_hminus1 = false;
    let steppers = eps_list
        .iter()
        .map(|&eps| {
            let mut s = spec.clone();
            s.epsilon = eps;
            Stepper::<f64>::new(&s, &cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let per_path: Vec<Result<Vec<f64>>> = (0..m as u64)
        .into_par_iter()
        .map(|i| {
            let trajs = steppers
                .iter()
                .map(|st| st.solve_path(i))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| Error::Path {
                    path: i,
                    source: Box::new(e),
                })?;
            let g = &steppers[0].grid;
            trajs
                .windows(2)
                .map(|w| {
                    let mut acc = 0.0;
                    for ((_, a), (_, b)) in w[0].snapshots.iter().zip(&w[1].snapshots).skip(1) {
                        acc += g.inner_hminus1(&a.sub(b), &a.sub(b))? * w[0].dt;
                    }
                    Ok(acc)
                })
                .collect()
        })
        .collect();
    let per_path = per_path.into_iter().collect::<Result<Vec<_>>>()?;
    let differences = (0..eps_list.len() - 1)
        .map(|j| {
            McEstimate::from_values(
                format!("viscosity_cauchy(eps={},{})", eps_list[j], eps_list[j + 1]),
                1.0,
                cfg.seed,
                per_path.iter().map(|v| v[j]).collect(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ViscosityReport {
        epsilons: eps_list.to_vec(),
        differences,
    })
}

/// Noise model of `spec` under `cfg` (exposed for reports).
pub fn noise_model_for(spec: &ProblemSpec, cfg: &SolverConfig) -> Result<NoiseModel> {
    Stepper::<f64>::new(spec, cfg)?.noise_model()
}

/// `θ̃` at `α = 2` for a spec.
pub fn reference_theta(spec: &ProblemSpec) -> Result<f64> {
    let ladder = MoserLadder::from_params(spec.dim(), spec.m_tilde().max(f64::MIN_POSITIVE), spec.mu, 2.0)?;
    Ok(smoothing_exponent(&ladder))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::func::{FnSpec, TimeFn};
    use crate::model::InitialData;
    use crate::phi::PhiSpec;

    fn zero_spec() -> ProblemSpec {
        ProblemSpec::new(1, 15, 0.05, PhiSpec::power(2.0), InitialData::Function(FnSpec::zero()))
    }

    #[test]
    fn zero_data_gives_zero_moments() {
        let cfg = SolverConfig::new(5e-3);
        for stat in [
            Statistic::SupInf,
            Statistic::SupLp(2.0),
            Statistic::SupInfWindow(0.01),
            Statistic::HminusOne,
            Statistic::TerminalLp(4.0),
        ] {
            let e = mc_moment(&zero_spec(), &cfg, 4, stat).unwrap();
            assert_eq!((e.mean, e.stderr), (0.0, 0.0), "{stat:?}");
        }
    }

    #[test]
    fn estimate_rejects_single_sample() {
        assert!(McEstimate::from_values("x", 1.0, 0, vec![1.0]).is_err());
        let e = McEstimate::from_values("x", 1.0, 0, vec![1.0, 3.0]).unwrap();
        assert_eq!(e.mean, 2.0);
        assert!((e.ci_high - e.mean - 1.96 * e.stderr).abs() < 1e-15);
    }

    #[test]
    fn window_statistic_rejects_bad_rho() {
        let cfg = SolverConfig::new(5e-3);
        assert!(mc_moment(&zero_spec(), &cfg, 2, Statistic::SupInfWindow(0.0)).is_err());
        assert!(mc_moment(&zero_spec(), &cfg, 2, Statistic::SupInfWindow(0.05)).is_err());
    }

    #[test]
    fn path_failure_reports_index() {
        let mut spec = zero_spec();
        spec.xi = InitialData::Function(FnSpec::sine(1.0, &[1.0]));
        spec.phi = PhiSpec::power(3.0);
        let mut cfg = SolverConfig::new(5e-3);
        cfg.newton_max_iter = 1;
        cfg.newton_tol = 1e-15;
        let err = mc_moment(&spec, &cfg, 3, Statistic::SupInf).unwrap_err();
        assert!(matches!(err, Error::Path { path: 0, .. }), "{err}");
    }

    #[test]
    fn fit_recovers_power_law() {
        let x: Vec<f64> = (1..6).map(|i| (i as f64).ln()).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.3 - 0.5 * v).collect();
        let (b, a, se) = linear_fit(&x, &y);
        assert!((b + 0.5).abs() < 1e-12 && (a - 0.3).abs() < 1e-12 && se < 1e-10);
    }

    #[test]
    fn zero_path_has_zero_ito_residual() {
        let mut cfg = SolverConfig::new(5e-3);
        cfg.record_increments = true;
        let mut spec = zero_spec();
        spec.coeffs.nu = vec![FnSpec::constant(0.5)];
        let st = Stepper::<f64>::new(&spec, &cfg).unwrap();
        let traj = st.solve_path(0).unwrap();
        let r = ito_identity_residual(&st, &traj, 3.0).unwrap();
        assert!(r.per_step.iter().all(|&v| v == 0.0));
        assert!(ito_identity_residual(&st, &traj, 1.5).is_err());
    }

    #[test]
    fn ito_residual_needs_full_record() {
        let cfg = SolverConfig::new(5e-3);
        let st = Stepper::<f64>::new(&zero_spec(), &cfg).unwrap();
        let traj = st.solve_path(0).unwrap();
        assert!(ito_identity_residual(&st, &traj, 2.0).is_err());
    }

    #[test]
    fn gronwall_all_zero_is_consistent() {
        let r = gronwall_check(&zero_spec(), &SolverConfig::new(5e-3), 2, 2.0, 2.0).unwrap();
        assert_eq!((r.lhs.mean, r.rhs), (0.0, 0.0));
        assert!(r.consistent);
    }

    #[test]
    fn monotonicity_identical_pairs_and_phi_sign() {
        let mut spec = zero_spec();
        spec.coeffs.sigma = TimeFn::constant(0.3);
        let g = Grid::<f64>::unit(1, 31).unwrap();
        let r = monotonicity_check(&spec, &g, 50, 1).unwrap();
        assert!(r.phi_term_max <= 0.0);
        assert!(r.fitted_n.is_finite());
        let st = Stepper::<f64>::new(&spec, &SolverConfig::new(0.05)).unwrap();
        let v: Vec<f64> = (0..15).map(|i| i as f64).collect();
        assert_eq!(full_ratio(&st, 1, &v, &v).unwrap(), 0.0);
    }

    #[test]
    fn viscosity_identical_slots_vanish() {
        let mut spec = zero_spec();
        spec.xi = InitialData::Function(FnSpec::sine(1.0, &[1.0]));
        let r = viscosity_convergence(&spec, &SolverConfig::new(5e-3), 2, &[0.1, 0.1]).unwrap();
        assert_eq!(r.means(), vec![0.0]);
    }
}
