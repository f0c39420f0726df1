//! Semi-implicit Euler–Maruyama time stepping.
//!
//! One step solves
//! `u⁺ - Δt Δ_h(Φ(u⁺) + κ(t) u⁺) = u + Δt (b·∇_h u + c u + f) + σ ∇_h u·Δβ̃ + Σ_k (ν^k u + g^k) Δw^k`
//! with `κ = ε + σ²/2` (Itô form). The implicit part is a monotone system
//! solved by damped Newton; the noise is explicit.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::func::FnSpec;
use crate::grid::{Field, Grid};
use crate::linalg::{solve_tridiagonal, BandMatrix};
use crate::model::{stratonovich_to_ito, InitialData, ProblemSpec};
use crate::noise::{NoiseIncrements, NoiseModel};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scheme {
    FiniteDifference,
    /// Galerkin projection on the `n_modes` lowest sine modes.
    GalerkinSpectral { n_modes: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub jacobian_floor: f64,
    pub scheme: Scheme,
    /// Field snapshots every `record_every` steps (norms are kept every step).
    pub record_every: usize,
    /// `L_p` norms tracked along the path.
    pub p_list: Vec<f64>,
    pub record_hminus1: bool,
    /// Keep the per-step noise increments (needed by the Itô residual).
    pub record_increments: bool,
    pub seed: u64,
}

impl SolverConfig {
    pub fn new(dt: f64) -> Self {
        SolverConfig {
            dt,
            newton_tol: 1e-10,
            newton_max_iter: 50,
            jacobian_floor: 1e-12,
            scheme: Scheme::FiniteDifference,
            record_every: 1,
            p_list: vec![2.0],
            record_hminus1: true,
            record_increments: false,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::domain("dt", format!("need dt > 0, got {}", self.dt)));
        }
        if self.record_every == 0 {
            return Err(Error::domain("record_every", "need ≥ 1"));
        }
        if !(self.newton_tol > 0.0) || self.newton_max_iter == 0 {
            return Err(Error::domain("Newton settings", "tolerance and iteration cap must be positive"));
        }
        if !(self.jacobian_floor >= 0.0) {
            return Err(Error::domain("jacobian_floor", "must be ≥ 0"));
        }
        if let Some(p) = self.p_list.iter().find(|&&p| !(p >= 1.0)) {
            return Err(Error::domain("L_p exponent", format!("need p ≥ 1, got {p}")));
        }
        Ok(())
    }
}

/// Norms of one recorded state.
#[derive(Clone, Debug, PartialEq)]
pub struct NormRecord {
    pub t: f64,
    /// `‖u‖_{L_p}` for each entry of the configured `p_list`.
    pub lp: Vec<f64>,
    pub sup: f64,
    pub hminus1: Option<f64>,
}

/// One simulated path.
#[derive(Clone, Debug)]
pub struct Trajectory<T> {
    pub path_index: u64,
    pub p_list: Vec<f64>,
    pub dt: f64,
    /// Norms at `t_0 = 0, t_1, ..., t_N`.
    pub norms: Vec<NormRecord>,
    /// Newton iterations of step `n → n+1`.
    pub newton_iters: Vec<usize>,
    /// `(t, u_t)` every `record_every` steps, always including both ends.
    pub snapshots: Vec<(f64, Field<T>)>,
    /// `Δβ̃, Δw` of every step when requested.
    pub increments: Vec<NoiseIncrements>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn times(&self) -> Vec<f64> {
        self.norms.iter().map(|r| r.t).collect()
    }

    /// `max_{t_n, x_j} |u|`, the discrete `L_∞(Q_T)` norm.
    pub fn sup_norm(&self) -> f64 {
        self.norms.iter().map(|r| r.sup).fold(0.0, f64::max)
    }

    /// `max_{t_n ≥ ρ, x_j} |u|`.
    pub fn sup_norm_after(&self, rho: f64) -> f64 {
        self.norms
            .iter()
            .filter(|r| r.t >= rho - 1e-12 * rho.abs().max(1.0))
            .map(|r| r.sup)
            .fold(0.0, f64::max)
    }

    /// `sup_t ‖u_t‖_{L_p}` for a tracked `p`.
    pub fn sup_lp(&self, p: f64) -> Option<f64> {
        let k = self.p_list.iter().position(|&q| q == p)?;
        Some(self.norms.iter().map(|r| r.lp[k]).fold(0.0, f64::max))
    }

    pub fn sup_hminus1(&self) -> Option<f64> {
        self.norms
            .iter()
            .map(|r| r.hminus1)
            .try_fold(0.0f64, |m, v| v.map(|v| m.max(v)))
    }

    pub fn final_state(&self) -> &Field<T> {
        &self.snapshots.last().expect("trajectory has an initial snapshot").1
    }

    /// CSV of the norm series: `t, norm_p..., norm_inf, norm_hm1, newton_iters`.
    pub fn write_norms_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        let mut header = vec!["t".to_string()];
        header.extend(self.p_list.iter().map(|p| format!("norm_p{p}")));
        header.push("norm_inf".into());
        header.push("norm_hm1".into());
        header.push("newton_iters".into());
        writeln!(out, "{}", header.join(","))?;
        for (n, rec) in self.norms.iter().enumerate() {
            let mut row = vec![format!("{}", rec.t)];
            row.extend(rec.lp.iter().map(|v| format!("{v}")));
            row.push(format!("{}", rec.sup));
            row.push(rec.hminus1.map_or(String::new(), |v| format!("{v}")));
            let iters = if n == 0 { 0 } else { self.newton_iters[n - 1] };
            row.push(iters.to_string());
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Newton solve of `u - Δt Δ_h Ψ(u) = rhs` for non-decreasing `Ψ`.
///
/// The Jacobian `I - Δt Δ_h diag(max(Ψ', floor))` is column diagonally
/// dominant, so it is factored without pivoting. Steps are halved while the
/// residual grows. Returns the solution and the number of Newton updates.
pub fn newton_solve<T, P, D>(
    grid: &Grid<T>,
    dt: T,
    psi: P,
    dpsi: D,
    rhs: &[T],
    u_init: &[T],
    cfg: &SolverConfig,
) -> Result<(Field<T>, usize)>
where
    T: Scalar,
    P: Fn(T) -> T,
    D: Fn(T) -> T,
{
    let n = grid.len();
    grid.check(&Field(rhs.to_vec()))?;
    let rhs_norm = euclid(rhs);
    let target = effective_tol::<T>(cfg.newton_tol, n) * (T::one() + rhs_norm);
    let floor = T::of(cfg.jacobian_floor);
    let mut u = u_init.to_vec();
    let mut work = vec![T::zero(); n];
    let mut residual = vec![T::zero(); n];

    let eval = |u: &[T], work: &mut Vec<T>, res: &mut Vec<T>| -> T {
        let psi_u: Vec<T> = u.iter().map(|&v| psi(v)).collect();
        grid.laplacian_into(&psi_u, work);
        for i in 0..n {
            res[i] = u[i] - dt * work[i] - rhs[i];
        }
        euclid(res)
    };

    let mut r_norm = eval(&u, &mut work, &mut residual);
    let mut trial = vec![T::zero(); n];
    let mut trial_res = vec![T::zero(); n];
    for iter in 0..=cfg.newton_max_iter {
        if !r_norm.is_finite() {
            return Err(Error::NonFinite("Newton residual"));
        }
        if r_norm <= target {
            return Ok((Field(u), iter));
        }
        if iter == cfg.newton_max_iter {
            break;
        }
        let slopes: Vec<T> = u.iter().map(|&v| dpsi(v).max(floor)).collect();
        let neg: Vec<T> = residual.iter().map(|&r| -r).collect();
        let delta = jacobian_solve(grid, dt, &slopes, &neg);
        let mut lambda = T::one();
        loop {
            for i in 0..n {
                trial[i] = u[i] + lambda * delta[i];
            }
            let t_norm = eval(&trial, &mut work, &mut trial_res);
            if t_norm < r_norm || lambda < T::of(1.0 / 1024.0) {
                std::mem::swap(&mut u, &mut trial);
                std::mem::swap(&mut residual, &mut trial_res);
                r_norm = t_norm;
                break;
            }
            lambda = lambda / T::of(2.0);
        }
    }
    Err(Error::Convergence {
        iterations: cfg.newton_max_iter,
        residual: r_norm.as_f64(),
    })
}

/// Newton tolerance, floored at what the precision of `T` can resolve.
fn effective_tol<T: Scalar>(tol: f64, n: usize) -> T {
    let floor = T::epsilon() * T::of(16.0) * T::of_usize(n).sqrt();
    T::of(tol).max(floor)
}

fn euclid<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

/// Solves `(I - Δt Δ_h diag(s)) δ = r`.
fn jacobian_solve<T: Scalar>(grid: &Grid<T>, dt: T, slopes: &[T], r: &[T]) -> Vec<T> {
    let n = grid.len();
    let two = T::of(2.0);
    if grid.dim() == 1 {
        let k = dt / (grid.spacing()[0] * grid.spacing()[0]);
        let mut lower = vec![T::zero(); n];
        let mut upper = vec![T::zero(); n];
        let diag: Vec<T> = slopes.iter().map(|&s| T::one() + two * k * s).collect();
        for i in 0..n {
            if i > 0 {
                lower[i] = -k * slopes[i - 1];
            }
            if i + 1 < n {
                upper[i] = -k * slopes[i + 1];
            }
        }
        return solve_tridiagonal(&lower, &diag, &upper, r);
    }
    let bw = grid.stride(1);
    let mut m = BandMatrix::zeros(n, bw);
    for i in 0..n {
        m.add(i, i, T::one());
    }
    for axis in 0..grid.dim() {
        let h = grid.spacing()[axis];
        let k = dt / (h * h);
        for i in 0..n {
            m.add(i, i, two * k * slopes[i]);
            for fwd in [false, true] {
                if let Some(j) = grid.neighbour(i, axis, fwd) {
                    m.add(i, j, -k * slopes[j]);
                }
            }
        }
    }
    m.solve(r)
}

/// Orthogonal projection onto the `n_modes` lowest discrete sine modes.
pub fn galerkin_project<T: Scalar>(grid: &Grid<T>, v: &[T], n_modes: usize) -> Result<Field<T>> {
    grid.check(&Field(v.to_vec()))?;
    let basis = GalerkinBasis::new(grid, n_modes)?;
    Ok(basis.synthesize(&basis.analyze(grid, v)))
}

/// Sine modes `e_k` (columns), ordered by eigenvalue, with `-Δ_h e_k = λ_k e_k`.
struct GalerkinBasis<T> {
    modes: Vec<Field<T>>,
    eigenvalues: Vec<T>,
    len: usize,
}

impl<T: Scalar> GalerkinBasis<T> {
    fn new(grid: &Grid<T>, n_modes: usize) -> Result<Self> {
        if n_modes == 0 || n_modes > grid.len() {
            return Err(Error::domain(
                "n_modes",
                format!("need 1 ≤ n_modes ≤ {}, got {n_modes}", grid.len()),
            ));
        }
        let order = grid.modes_by_eigenvalue();
        let chosen = &order[..n_modes];
        Ok(GalerkinBasis {
            modes: chosen.iter().map(|k| grid.sine_mode(k)).collect(),
            eigenvalues: chosen.iter().map(|k| grid.eigenvalue(k)).collect(),
            len: grid.len(),
        })
    }

    fn analyze(&self, grid: &Grid<T>, v: &[T]) -> Vec<T> {
        self.modes.iter().map(|e| grid.inner(e, v)).collect()
    }

    fn synthesize(&self, coeffs: &[T]) -> Field<T> {
        let mut out = vec![T::zero(); self.len];
        for (e, &a) in self.modes.iter().zip(coeffs) {
            if a == T::zero() {
                continue;
            }
            for (o, &x) in out.iter_mut().zip(e.iter()) {
                *o = *o + a * x;
            }
        }
        Field(out)
    }
}

/// Spatial profile of a coefficient cached on the grid nodes.
struct Profile<T> {
    values: Vec<T>,
    spec: FnSpec,
}

impl<T: Scalar> Profile<T> {
    fn new(grid: &Grid<T>, spec: &FnSpec) -> Option<Self> {
        if spec.is_zero() {
            return None;
        }
        let dom = grid.domain();
        Some(Profile {
            values: (0..grid.len()).map(|i| spec.spatial(&grid.coords(i), dom)).collect(),
            spec: spec.clone(),
        })
    }

    #[inline]
    fn factor(&self, t: T) -> T {
        self.spec.time_factor(t)
    }
}

/// Step operator for one problem on one grid.
pub struct Stepper<T: Scalar> {
    pub spec: ProblemSpec,
    pub grid: Grid<T>,
    b: Vec<Option<Profile<T>>>,
    c: Option<Profile<T>>,
    f: Option<Profile<T>>,
    nu: Vec<Option<Profile<T>>>,
    g: Vec<Option<Profile<T>>>,
    basis: Option<GalerkinBasis<T>>,
    pub cfg: SolverConfig,
}

impl<T: Scalar> Stepper<T> {
    /// Prepares the Itô form of `spec` on its grid.
    pub fn new(spec: &ProblemSpec, cfg: &SolverConfig) -> Result<Self> {
        spec.check_shape()?;
        cfg.validate()?;
        let spec = stratonovich_to_ito(spec);
        let grid = Grid::new(&spec.domain, &spec.nodes)?;
        let co = &spec.coeffs;
        let k = co.k_noise();
        let basis = match cfg.scheme {
            Scheme::FiniteDifference => None,
            Scheme::GalerkinSpectral { n_modes } => Some(GalerkinBasis::new(&grid, n_modes)?),
        };
        Ok(Stepper {
            b: co.b.iter().map(|f| Profile::new(&grid, f)).collect(),
            c: Profile::new(&grid, &co.c),
            f: Profile::new(&grid, &co.f),
            nu: (0..k).map(|i| co.nu.get(i).and_then(|f| Profile::new(&grid, f))).collect(),
            g: (0..k).map(|i| co.g.get(i).and_then(|f| Profile::new(&grid, f))).collect(),
            basis,
            grid,
            spec,
            cfg: cfg.clone(),
        })
    }

    pub fn noise_model(&self) -> Result<NoiseModel> {
        let d_transport = if self.spec.coeffs.sigma.is_zero() {
            0
        } else {
            self.spec.dim()
        };
        NoiseModel::new(
            d_transport,
            self.spec.coeffs.k_noise(),
            self.cfg.seed,
            self.cfg.dt,
            self.spec.horizon,
        )
    }

    /// `b·∇_h u + c u + f` at time `t`.
    pub fn explicit_drift(&self, u: &[T], t: T) -> Vec<T> {
        let n = u.len();
        let mut out = vec![T::zero(); n];
        for (axis, b) in self.b.iter().enumerate() {
            if let Some(b) = b {
                let du = self.grid.central_difference(u, axis);
                let s = b.factor(t);
                for i in 0..n {
                    out[i] = out[i] + s * b.values[i] * du[i];
                }
            }
        }
        if let Some(c) = &self.c {
            let s = c.factor(t);
            for i in 0..n {
                out[i] = out[i] + s * c.values[i] * u[i];
            }
        }
        if let Some(f) = &self.f {
            let s = f.factor(t);
            for i in 0..n {
                out[i] = out[i] + s * f.values[i];
            }
        }
        out
    }

    /// Noise integrand `M^k(u)` for the merged channel list (transport first).
    pub fn noise_integrands(&self, u: &[T], t: T, d_transport: usize) -> Vec<Vec<T>> {
        let n = u.len();
        let mut out = Vec::new();
        if d_transport > 0 {
            let sigma = self.spec.coeffs.sigma.eval(t);
            for axis in 0..d_transport {
                out.push(self.grid.central_difference(u, axis).iter().map(|&v| sigma * v).collect());
            }
        }
        for k in 0..self.nu.len() {
            let mut m = vec![T::zero(); n];
            if let Some(nu) = &self.nu[k] {
                let s = nu.factor(t);
                for i in 0..n {
                    m[i] = m[i] + s * nu.values[i] * u[i];
                }
            }
            if let Some(g) = &self.g[k] {
                let s = g.factor(t);
                for i in 0..n {
                    m[i] = m[i] + s * g.values[i];
                }
            }
            out.push(m);
        }
        out
    }

    /// `Σ_k M^k(u) ΔW^k`.
    pub fn noise_term(&self, u: &[T], t: T, dw: &NoiseIncrements) -> Vec<T> {
        let mut out = vec![T::zero(); u.len()];
        let incs: Vec<f64> = dw.transport.iter().chain(&dw.multiplicative).copied().collect();
        for (m, &w) in self.noise_integrands(u, t, dw.transport.len()).iter().zip(&incs) {
            if w == 0.0 {
                continue;
            }
            let w = T::of(w);
            for (o, &v) in out.iter_mut().zip(m) {
                *o = *o + v * w;
            }
        }
        out
    }

    /// `Δ_h(Φ(u) + κ(t) u)`.
    pub fn implicit_drift(&self, u: &[T], t: T) -> Vec<T> {
        let kappa = self.spec.linear_laplacian_coeff(t);
        let psi: Vec<T> = u.iter().map(|&v| self.spec.phi.eval(v) + kappa * v).collect();
        let mut out = vec![T::zero(); u.len()];
        self.grid.laplacian_into(&psi, &mut out);
        out
    }

    /// Right-hand side of the implicit system for the step from `t`.
    pub fn step_rhs(&self, state: &[T], t: T, dw: &NoiseIncrements) -> Result<Vec<T>> {
        let dt = T::of(self.cfg.dt);
        let drift = self.explicit_drift(state, t);
        let noise = self.noise_term(state, t, dw);
        let rhs: Vec<T> = (0..state.len())
            .map(|i| state[i] + dt * drift[i] + noise[i])
            .collect();
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("step right-hand side"));
        }
        Ok(rhs)
    }

    /// One semi-implicit step from `(t, state)`; returns `u⁺` and the Newton
    /// iteration count.
    pub fn step(&self, state: &Field<T>, t: T, dw: &NoiseIncrements) -> Result<(Field<T>, usize)> {
        self.grid.check(state)?;
        if !dw.all_finite() {
            return Err(Error::NonFinite("noise increments"));
        }
        let rhs = self.step_rhs(state, t, dw)?;
        let dt = T::of(self.cfg.dt);
        let kappa = self.spec.linear_laplacian_coeff(t);
        let phi = &self.spec.phi;
        let psi = |r: T| phi.eval(r) + kappa * r;
        let dpsi = |r: T| phi.derivative(r) + kappa;
        match &self.basis {
            None => newton_solve(&self.grid, dt, psi, dpsi, &rhs, state, &self.cfg),
            Some(basis) => self.galerkin_newton(basis, dt, psi, dpsi, &rhs, state),
        }
    }

    /// Newton in modal coordinates for
    /// `a + Δt Λ Sᵀ W Ψ(S a) = Sᵀ W rhs`.
    fn galerkin_newton(
        &self,
        basis: &GalerkinBasis<T>,
        dt: T,
        psi: impl Fn(T) -> T,
        dpsi: impl Fn(T) -> T,
        rhs: &[T],
        state: &[T],
    ) -> Result<(Field<T>, usize)> {
        let grid = &self.grid;
        let nm = basis.modes.len();
        let target_rhs = basis.analyze(grid, rhs);
        let tol = effective_tol::<T>(self.cfg.newton_tol, grid.len()) * (T::one() + euclid(&target_rhs));
        let floor = T::of(self.cfg.jacobian_floor);
        let mut a = basis.analyze(grid, state);
        let residual = |a: &[T]| -> (Vec<T>, Field<T>) {
            let u = basis.synthesize(a);
            let psi_u: Vec<T> = u.iter().map(|&v| psi(v)).collect();
            let proj = basis.analyze(grid, &psi_u);
            let r = (0..nm)
                .map(|k| a[k] + dt * basis.eigenvalues[k] * proj[k] - target_rhs[k])
                .collect();
            (r, u)
        };
        let (mut r, mut u) = residual(&a);
        let mut r_norm = euclid(&r);
        let w = grid.cell_volume();
        for iter in 0..=self.cfg.newton_max_iter {
            if !r_norm.is_finite() {
                return Err(Error::NonFinite("Galerkin residual"));
            }
            if r_norm <= tol {
                return Ok((u, iter));
            }
            if iter == self.cfg.newton_max_iter {
                break;
            }
            let slopes: Vec<T> = u.iter().map(|&v| dpsi(v).max(floor)).collect();
            let jac = DMatrix::<f64>::from_fn(nm, nm, |k, l| {
                let ip: T = basis.modes[k]
                    .iter()
                    .zip(basis.modes[l].iter())
                    .zip(&slopes)
                    .map(|((&x, &y), &s)| x * y * s)
                    .sum::<T>()
                    * w;
                let base = if k == l { T::one() } else { T::zero() };
                (base + dt * basis.eigenvalues[k] * ip).as_f64()
            });
            let rhs_v = DVector::<f64>::from_iterator(nm, r.iter().map(|v| -v.as_f64()));
            let delta = jac
                .lu()
                .solve(&rhs_v)
                .ok_or(Error::Convergence {
                    iterations: iter,
                    residual: r_norm.as_f64(),
                })?;
            let mut lambda = T::one();
            loop {
                let trial: Vec<T> = (0..nm).map(|k| a[k] + lambda * T::of(delta[k])).collect();
                let (tr, tu) = residual(&trial);
                let t_norm = euclid(&tr);
                if t_norm < r_norm || lambda < T::of(1.0 / 1024.0) {
                    a = trial;
                    r = tr;
                    u = tu;
                    r_norm = t_norm;
                    break;
                }
                lambda = lambda / T::of(2.0);
            }
        }
        let _ = r;
        Err(Error::Convergence {
            iterations: self.cfg.newton_max_iter,
            residual: r_norm.as_f64(),
        })
    }

    /// Initial field of path `path_index` (projected for the Galerkin scheme).
    pub fn initial_field(&self, noise: &NoiseModel, path_index: u64) -> Field<T> {
        let grid = &self.grid;
        let raw = match &self.spec.xi {
            InitialData::Function(f) => grid.sample(|x| f.spatial(x, grid.domain())),
            InitialData::RandomSigns(rs) => {
                let mut s = noise.initial_stream(path_index);
                let amp = T::of(rs.l2_norm) / (T::of_usize(grid.len()) * grid.cell_volume()).sqrt();
                Field((0..grid.len()).map(|_| amp * T::of(s.sign())).collect())
            }
        };
        match &self.basis {
            None => raw,
            Some(b) => b.synthesize(&b.analyze(grid, &raw)),
        }
    }

    fn norm_record(&self, u: &[T], t: f64) -> Result<NormRecord> {
        let g = &self.grid;
        Ok(NormRecord {
            t,
            lp: self
                .cfg
                .p_list
                .iter()
                .map(|&p| g.lp_unchecked(u, p).as_f64())
                .collect(),
            sup: g.lp_unchecked(u, f64::INFINITY).as_f64(),
            hminus1: if self.cfg.record_hminus1 {
                Some(g.norm_hminus1(u)?.as_f64())
            } else {
                None
            },
        })
    }

    /// Integrates path `path_index` over the horizon.
    pub fn solve_path(&self, path_index: u64) -> Result<Trajectory<T>> {
        let noise = self.noise_model()?;
        let mut stream = noise.stream(path_index);
        let mut u = self.initial_field(&noise, path_index);
        if !u.all_finite() {
            return Err(Error::NonFinite("initial data"));
        }
        let dt = noise.dt;
        let mut traj = Trajectory {
            path_index,
            p_list: self.cfg.p_list.clone(),
            dt,
            norms: vec![self.norm_record(&u, 0.0)?],
            newton_iters: Vec::with_capacity(noise.n_steps),
            snapshots: vec![(0.0, u.clone())],
            increments: Vec::new(),
        };
        for step in 0..noise.n_steps {
            let t = step as f64 * dt;
            let dw = stream.at(step);
            let (next, iters) = self.step(&u, T::of(t), &dw).map_err(|e| Error::Step {
                time: t,
                source: Box::new(e),
            })?;
            u = next;
            let t_next = (step + 1) as f64 * dt;
            traj.norms.push(self.norm_record(&u, t_next)?);
            traj.newton_iters.push(iters);
            if (step + 1) % self.cfg.record_every == 0 || step + 1 == noise.n_steps {
                traj.snapshots.push((t_next, u.clone()));
            }
            if self.cfg.record_increments {
                traj.increments.push(dw);
            }
        }
        Ok(traj)
    }
}

/// Convenience wrapper: prepares the stepper and integrates one path.
pub fn solve_path<T: Scalar>(spec: &ProblemSpec, cfg: &SolverConfig, path_index: u64) -> Result<Trajectory<T>> {
    Stepper::new(spec, cfg)?.solve_path(path_index)
}
