//! Problem instances and sampling-based checks of the structural assumptions.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::func::{BoxDomain, FnSpec, TimeFn};
use crate::phi::PhiSpec;
use crate::scalar::Scalar;

/// Moment/integrability exponent `μ ∈ [2, ∞]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinite,
}

impl Exponent {
    /// `μ ∈ Γ_d = [2,∞] ∩ ((d+2)/2, ∞]`.
    pub fn admissible(&self, dim: usize) -> bool {
        match *self {
            Exponent::Infinite => true,
            Exponent::Finite(mu) => mu >= 2.0 && mu > (dim as f64 + 2.0) / 2.0,
        }
    }

    /// Conjugate exponent `μ' = μ/(μ-1)`.
    pub fn conjugate(&self) -> f64 {
        match *self {
            Exponent::Infinite => 1.0,
            Exponent::Finite(mu) => mu / (mu - 1.0),
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Infinite => write!(f, "inf"),
            Exponent::Finite(mu) => write!(f, "{mu}"),
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::Infinite => s.serialize_str("inf"),
            Exponent::Finite(mu) => s.serialize_f64(*mu),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) if v.is_infinite() && v > 0.0 => Ok(Exponent::Infinite),
            Raw::Num(v) => Ok(Exponent::Finite(v)),
            Raw::Text(s) if matches!(s.as_str(), "inf" | "infinity" | "∞") => Ok(Exponent::Infinite),
            Raw::Text(s) => s
                .parse::<f64>()
                .map(Exponent::Finite)
                .map_err(|_| serde::de::Error::custom(format!("invalid exponent `{s}`"))),
        }
    }
}

/// How the transport noise `σ ∂_i u dβ̃^i` is to be read.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseConvention {
    #[default]
    Stratonovich,
    Ito,
}

/// Drift and noise coefficients of the equation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSet {
    /// Transport drift `b^i`, one per axis; must vanish on `∂Q`.
    pub b: Vec<FnSpec>,
    pub c: FnSpec,
    /// Transport noise amplitude `σ(t)`.
    pub sigma: TimeFn,
    /// Multiplicative noise `ν^k`, `k < K_noise`.
    pub nu: Vec<FnSpec>,
    pub f: FnSpec,
    /// Additive noise `g^k`, `k < K_noise`.
    pub g: Vec<FnSpec>,
}

impl CoefficientSet {
    pub fn zero(dim: usize) -> Self {
        CoefficientSet {
            b: vec![FnSpec::zero(); dim],
            c: FnSpec::zero(),
            sigma: TimeFn::constant(0.0),
            nu: Vec::new(),
            f: FnSpec::zero(),
            g: Vec::new(),
        }
    }

    pub fn k_noise(&self) -> usize {
        self.nu.len().max(self.g.len())
    }

    pub fn nu_k(&self, k: usize) -> Option<&FnSpec> {
        self.nu.get(k).filter(|f| !f.is_zero())
    }

    pub fn g_k(&self, k: usize) -> Option<&FnSpec> {
        self.g.get(k).filter(|f| !f.is_zero())
    }

    pub fn has_noise(&self) -> bool {
        !self.sigma.is_zero()
            || self.nu.iter().any(|f| !f.is_zero())
            || self.g.iter().any(|f| !f.is_zero())
    }
}

/// Initial condition generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialData {
    /// Independent node-wise signs scaled to a prescribed discrete `L_2`
    /// norm. Drawn per path from the noise seed.
    RandomSigns(RandomSigns),
    Function(FnSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomSigns {
    pub kind: RandomKind,
    #[serde(default = "unit")]
    pub l2_norm: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RandomKind {
    RandomSigns,
}

fn unit() -> f64 {
    1.0
}

impl InitialData {
    pub fn random_signs(l2_norm: f64) -> Self {
        InitialData::RandomSigns(RandomSigns {
            kind: RandomKind::RandomSigns,
            l2_norm,
        })
    }

    pub fn is_random(&self) -> bool {
        matches!(self, InitialData::RandomSigns(_))
    }
}

/// One SPDE problem instance together with its spatial resolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub domain: BoxDomain,
    /// Interior nodes per axis.
    pub nodes: Vec<usize>,
    pub horizon: f64,
    pub phi: PhiSpec,
    pub coeffs: CoefficientSet,
    pub epsilon: f64,
    pub convention: NoiseConvention,
    /// Whether the drift already carries `σ²/2 Δu`.
    pub ito_correction: bool,
    pub xi: InitialData,
    pub mu: Exponent,
    pub alpha: f64,
}

impl ProblemSpec {
    /// Deterministic problem on the unit box with all coefficients zero.
    pub fn new(dim: usize, nodes: usize, horizon: f64, phi: PhiSpec, xi: InitialData) -> Self {
        ProblemSpec {
            domain: BoxDomain::unit(dim),
            nodes: vec![nodes; dim],
            horizon,
            phi,
            coeffs: CoefficientSet::zero(dim),
            epsilon: 0.0,
            convention: NoiseConvention::Stratonovich,
            ito_correction: false,
            xi,
            mu: Exponent::Infinite,
            alpha: 2.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// `m̃ = m - 1`.
    pub fn m_tilde(&self) -> f64 {
        self.phi.exponent() - 1.0
    }

    /// Structural well-formedness (lengths, signs). Assumption violations
    /// are reported by [`validate_assumptions`] instead.
    pub fn check_shape(&self) -> Result<()> {
        let d = self.dim();
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if d == 0 || self.domain.upper.len() != d {
            return bad("domain bounds must have one entry per axis");
        }
        if (0..d).any(|i| !(self.domain.length(i) > 0.0)) {
            return bad("domain upper bounds must exceed lower bounds");
        }
        if self.nodes.len() != d {
            return bad("nodes must have one entry per axis");
        }
        if self.coeffs.b.len() != d {
            return bad("b must have one component per axis");
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad("horizon must be positive");
        }
        if !(self.alpha > 0.0) {
            return bad("alpha must be positive");
        }
        if !(self.epsilon >= 0.0) {
            return bad("epsilon must be non-negative");
        }
        if self.phi.exponent() < 1.0 {
            return bad("Φ growth exponent m must be ≥ 1");
        }
        Ok(())
    }

    /// Laplacian coefficient multiplying `u` in the implicit drift:
    /// `ε` plus the Itô correction `σ(t)²/2` when present.
    pub fn linear_laplacian_coeff<T: Scalar>(&self, t: T) -> T {
        let mut k = T::of(self.epsilon);
        if self.ito_correction {
            let s = self.coeffs.sigma.eval(t);
            k = k + s * s / T::of(2.0);
        }
        k
    }

    /// `‖ξ‖_∞` estimate on the configured grid.
    pub fn xi_sup_estimate(&self) -> f64 {
        match &self.xi {
            InitialData::RandomSigns(rs) => {
                let n: usize = self.nodes.iter().product();
                let cell: f64 = (0..self.dim())
                    .map(|i| self.domain.length(i) / (self.nodes[i] as f64 + 1.0))
                    .product();
                rs.l2_norm / (n as f64 * cell).sqrt()
            }
            InitialData::Function(f) => {
                let mut best = 0.0f64;
                let d = self.dim();
                let total: usize = self.nodes.iter().product();
                let mut x = vec![0.0; d];
                for lin in 0..total {
                    let mut rem = lin;
                    for i in 0..d {
                        let n = self.nodes[i];
                        let h = self.domain.length(i) / (n as f64 + 1.0);
                        x[i] = self.domain.lower[i] + h * ((rem % n) as f64 + 1.0);
                        rem /= n;
                    }
                    best = best.max(f.spatial(&x, &self.domain).abs());
                }
                best
            }
        }
    }
}

/// Itô form of the equation: Stratonovich transport noise becomes Itô noise
/// plus `σ²/2 Δu` in the drift. Idempotent.
pub fn stratonovich_to_ito(spec: &ProblemSpec) -> ProblemSpec {
    let mut out = spec.clone();
    if spec.convention == NoiseConvention::Stratonovich {
        out.convention = NoiseConvention::Ito;
        out.ito_correction = true;
    }
    out
}

/// The equation rewritten in divergence form with a strictly elliptic
/// principal part (`θ = ε`, `c = c̄`, `m̃ = m - 1`).
#[derive(Clone, Debug, PartialEq)]
pub struct NondegenerateCoefficients {
    spec: ProblemSpec,
    pub theta: f64,
    pub m_tilde: f64,
}

pub fn as_nondegenerate(spec: &ProblemSpec) -> Result<NondegenerateCoefficients> {
    if !(spec.epsilon > 0.0) {
        return Err(Error::Degenerate {
            epsilon: spec.epsilon,
        });
    }
    Ok(NondegenerateCoefficients {
        spec: stratonovich_to_ito(spec),
        theta: spec.epsilon,
        m_tilde: spec.m_tilde(),
    })
}

impl NondegenerateCoefficients {
    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    /// Number of noise channels `d + K_noise` in the merged numbering.
    pub fn channels(&self) -> usize {
        self.dim() + self.spec.coeffs.k_noise()
    }

    /// Diagonal entry of `a^{ij}`: `Φ'(r) + ε + σ²/2`.
    pub fn a<T: Scalar>(&self, t: T, r: T) -> T {
        self.spec.phi.derivative(r) + self.spec.linear_laplacian_coeff(t)
    }

    /// `F^i = b^i r`.
    pub fn flux<T: Scalar>(&self, i: usize, t: T, x: &[T], r: T) -> T {
        self.spec.coeffs.b[i].eval(t, x, &self.spec.domain) * r
    }

    /// `F = (c - ∂_i b^i) r + f`.
    pub fn source<T: Scalar>(&self, t: T, x: &[T], r: T) -> T {
        let co = &self.spec.coeffs;
        let dom = &self.spec.domain;
        let div_b = (0..self.dim()).fold(T::zero(), |acc, i| acc + co.b[i].grad(t, x, dom)[i]);
        (co.c.eval(t, x, dom) - div_b) * r + co.f.eval(t, x, dom)
    }

    /// `g^{ik} = I_{i=k, k<d} σ r` (channels 0-based).
    pub fn g<T: Scalar>(&self, i: usize, k: usize, t: T, r: T) -> T {
        if i == k && k < self.dim() {
            self.spec.coeffs.sigma.eval(t) * r
        } else {
            T::zero()
        }
    }

    /// `∂_r g^{ik}`.
    pub fn g_r<T: Scalar>(&self, i: usize, k: usize, t: T) -> T {
        self.g(i, k, t, T::one())
    }

    /// `G^k = I_{k≥d} (ν^{k-d} r + g^{k-d})`.
    pub fn big_g<T: Scalar>(&self, k: usize, t: T, x: &[T], r: T) -> T {
        let d = self.dim();
        if k < d {
            return T::zero();
        }
        let co = &self.spec.coeffs;
        let dom = &self.spec.domain;
        let nu = co.nu_k(k - d).map_or(T::zero(), |f| f.eval(t, x, dom));
        let g = co.g_k(k - d).map_or(T::zero(), |f| f.eval(t, x, dom));
        nu * r + g
    }

    /// `V¹ = |f|`.
    pub fn v1<T: Scalar>(&self, t: T, x: &[T]) -> T {
        self.spec.coeffs.f.eval(t, x, &self.spec.domain).abs()
    }

    /// `V² = |g|_{ℓ₂}`.
    pub fn v2<T: Scalar>(&self, t: T, x: &[T]) -> T {
        let co = &self.spec.coeffs;
        (0..co.k_noise())
            .map(|k| co.g_k(k).map_or(T::zero(), |f| f.eval(t, x, &self.spec.domain)))
            .map(|v| v * v)
            .sum::<T>()
            .sqrt()
    }

    /// `(a^{ij} - ½ ∂_r g^{ik} ∂_r g^{jk}) ξ^i ξ^j` for a diagonal `a`.
    pub fn ellipticity_form<T: Scalar>(&self, t: T, r: T, xi: &[T]) -> T {
        let d = self.dim();
        let a = self.a(t, r);
        let mut q = T::zero();
        for i in 0..d {
            for j in 0..d {
                let mut gg = T::zero();
                for k in 0..d {
                    gg = gg + self.g_r(i, k, t) * self.g_r(j, k, t);
                }
                let aij = if i == j { a } else { T::zero() };
                q = q + (aij - gg / T::of(2.0)) * xi[i] * xi[j];
            }
        }
        q
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }
}

/// Outcome of one assumption check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionResult {
    pub id: &'static str,
    pub pass: bool,
    /// Point `(t, x, r)` attaining the worst margin.
    pub witness: Option<Witness>,
    /// Worst value of `lhs - rhs` (negative means violated) or the measured
    /// constant for existence-type conditions.
    pub margin: f64,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub t: f64,
    pub x: Vec<f64>,
    pub r: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub conditions: Vec<ConditionResult>,
    /// Measured constants (`K`, `λ`, `C`, `c̄`, `N_V`, noise tail).
    pub empirical: BTreeMap<String, f64>,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.conditions.iter().all(|c| c.pass)
    }

    pub fn first_failure(&self) -> Option<&ConditionResult> {
        self.conditions.iter().find(|c| !c.pass)
    }

    pub fn get(&self, id: &str) -> Option<&ConditionResult> {
        self.conditions.iter().find(|c| c.id == id)
    }

    /// `Err` naming the first failed condition.
    pub fn into_result(self) -> Result<Self> {
        match self.first_failure() {
            None => Ok(self),
            Some(c) => Err(Error::Validation {
                condition: c.id.to_string(),
                detail: if c.note.is_empty() {
                    format!("margin {:e}", c.margin)
                } else {
                    c.note.clone()
                },
            }),
        }
    }
}

impl fmt::Display for AssumptionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<30} {:<6} {:>14}  witness / note", "condition", "pass", "margin")?;
        for c in &self.conditions {
            let w = match &c.witness {
                Some(w) => format!("t={:.4} x={:?} r={:.4}", w.t, w.x, w.r),
                None => String::new(),
            };
            let sep = if w.is_empty() || c.note.is_empty() { "" } else { "; " };
            writeln!(
                f,
                "{:<30} {:<6} {:>14.6e}  {w}{sep}{}",
                c.id,
                if c.pass { "PASS" } else { "FAIL" },
                c.margin + 0.0,
                c.note
            )?;
        }
        for (k, v) in &self.empirical {
            writeln!(f, "  {k} = {v:.6e}")?;
        }
        Ok(())
    }
}

/// Van der Corput radical inverse for the Halton sequence.
fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let (mut f, mut out) = (inv, 0.0);
    while i > 0 {
        out += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    out
}

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// Deterministic low-discrepancy sample of `(t, x, r)` plus a unit vector.
struct Sample {
    t: f64,
    x: Vec<f64>,
    r: f64,
    dir: Vec<f64>,
}

fn samples(spec: &ProblemSpec, budget: usize, r_max: f64) -> Vec<Sample> {
    let d = spec.dim();
    (1..=budget as u64)
        .map(|i| {
            let u = |k: usize| radical_inverse(i, PRIMES[k % PRIMES.len()]);
            let t = spec.horizon * u(0);
            let x = (0..d)
                .map(|a| spec.domain.lower[a] + spec.domain.length(a) * u(1 + a))
                .collect();
            let r = r_max * (2.0 * u(1 + d) - 1.0);
            let raw: Vec<f64> = (0..d).map(|a| 2.0 * u(2 + d + a) - 1.0).collect();
            let n = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
            let dir = if n > 1e-12 {
                raw.iter().map(|v| v / n).collect()
            } else {
                let mut e = vec![0.0; d];
                e[0] = 1.0;
                e
            };
            Sample { t, x, r, dir }
        })
        .collect()
}

/// Points on `∂Q`: for each face, a Halton sample of the face.
fn boundary_samples(spec: &ProblemSpec, per_face: usize) -> Vec<(f64, Vec<f64>)> {
    let d = spec.dim();
    let mut out = Vec::new();
    for axis in 0..d {
        for side in [spec.domain.lower[axis], spec.domain.upper[axis]] {
            for i in 1..=per_face as u64 {
                let t = spec.horizon * radical_inverse(i, 2);
                let x = (0..d)
                    .map(|a| {
                        if a == axis {
                            side
                        } else {
                            spec.domain.lower[a] + spec.domain.length(a) * radical_inverse(i, PRIMES[1 + a])
                        }
                    })
                    .collect();
                out.push((t, x));
            }
        }
    }
    out
}

/// Worst-case tracker for one inequality.
struct Worst {
    margin: f64,
    witness: Option<Witness>,
}

impl Worst {
    fn new() -> Self {
        Worst {
            margin: f64::INFINITY,
            witness: None,
        }
    }

    fn see(&mut self, margin: f64, t: f64, x: &[f64], r: f64) {
        if margin < self.margin || (margin.is_nan() && !self.margin.is_nan()) {
            self.margin = margin;
            self.witness = Some(Witness { t, x: x.to_vec(), r });
        }
    }
}

/// Checks the structural assumptions on a deterministic sample of
/// `(t, x, r)` and unit vectors, returning every margin.
pub fn validate_assumptions(spec: &ProblemSpec, sample_budget: usize) -> Result<AssumptionReport> {
    if sample_budget == 0 {
        return Err(Error::domain("sample_budget", "need at least one sample"));
    }
    let d = spec.dim();
    if spec.domain.upper.len() != d || spec.coeffs.b.len() != d || spec.nodes.len() != d {
        return Err(Error::Config("per-axis vectors must have length d".into()));
    }
    let mut report = AssumptionReport::default();
    let dom = &spec.domain;
    let ito = stratonovich_to_ito(spec);
    let r_max = 10.0 * (1.0 + spec.xi_sup_estimate());
    let pts = samples(spec, sample_budget, r_max);
    let m = spec.phi.exponent();
    let m_tilde = m - 1.0;
    let mid: Vec<f64> = (0..d).map(|a| 0.5 * (dom.lower[a] + dom.upper[a])).collect();

    // μ ∈ Γ_d
    let ok = spec.mu.admissible(d);
    report.conditions.push(ConditionResult {
        id: "mu_admissible",
        pass: ok,
        witness: None,
        margin: match spec.mu {
            Exponent::Infinite => f64::INFINITY,
            Exponent::Finite(mu) => (mu - 2.0).min(mu - (d as f64 + 2.0) / 2.0),
        },
        note: if ok {
            String::new()
        } else {
            format!(
                "μ = {} ∉ Γ_d = [2,∞] ∩ ({}/2, ∞] for d = {d}",
                spec.mu,
                d + 2
            )
        },
    });

    report.conditions.push(ConditionResult {
        id: "dimension_supported",
        pass: d == 1 || d == 2,
        witness: None,
        margin: 2.0 - d as f64,
        note: if d <= 2 {
            String::new()
        } else {
            format!("grids are available for d ∈ {{1, 2}}, got d = {d}")
        },
    });

    report.conditions.push(ConditionResult {
        id: "epsilon_nonnegative",
        pass: spec.epsilon >= 0.0,
        witness: None,
        margin: spec.epsilon,
        note: String::new(),
    });

    // Φ on a sign-symmetric grid; the unit probes ±1 come first.
    let n_r = sample_budget.max(16);
    let mut rs = vec![1.0, -1.0, 0.0];
    rs.extend((1..=n_r).flat_map(|i| {
        let r = r_max * i as f64 / n_r as f64;
        [r, -r]
    }));
    let phi = &spec.phi;
    let phi0 = phi.eval(0.0f64);
    report.conditions.push(ConditionResult {
        id: "phi_zero",
        pass: phi0 == 0.0,
        witness: Some(Witness {
            t: 0.0,
            x: mid.clone(),
            r: 0.0,
        }),
        margin: -phi0.abs(),
        note: String::new(),
    });

    let mut mono = Worst::new();
    for &r in &rs {
        mono.see(phi.derivative(r), 0.0, &mid, r);
    }
    let mut sorted = rs.clone();
    sorted.sort_by(f64::total_cmp);
    for w in sorted.windows(2) {
        let slope = (phi.eval(w[1]) - phi.eval(w[0])) / (w[1] - w[0]);
        if slope < mono.margin {
            mono.see(slope, 0.0, &mid, w[0]);
        }
    }
    report.conditions.push(ConditionResult {
        id: "phi_monotone",
        pass: mono.margin >= 0.0,
        witness: mono.witness,
        margin: mono.margin,
        note: if mono.margin >= 0.0 {
            String::new()
        } else {
            "Φ must be non-decreasing".into()
        },
    });

    // c̄|r|^{m-1} ≤ Φ'(r)
    let cbar = match phi.nominal_cbar() {
        Some(c) => c,
        None => rs
            .iter()
            .filter(|r| **r != 0.0)
            .map(|&r| phi.derivative(r) / r.abs().powf(m_tilde))
            .fold(f64::INFINITY, f64::min),
    };
    let mut lower = Worst::new();
    for &r in &rs {
        let scale = 1.0 + cbar.abs() * r.abs().powf(m_tilde);
        lower.see((phi.derivative(r) - cbar * r.abs().powf(m_tilde)) / scale, 0.0, &mid, r);
    }
    let lower_ok = cbar > 0.0 && lower.margin >= -1e-12;
    report.conditions.push(ConditionResult {
        id: "phi_derivative_lower",
        pass: lower_ok,
        witness: lower.witness,
        margin: lower.margin,
        note: if lower_ok {
            format!("c̄ = {cbar}")
        } else {
            format!("no c̄ > 0 with c̄|r|^(m-1) ≤ Φ'(r); best c̄ = {cbar:e}")
        },
    });
    report.empirical.insert("cbar".into(), cbar);

    // rΦ(r) ≥ λ|r|^{m+1} - C and |Φ'(r)| ≤ C|r|^{m-1} + C
    let lambda = rs
        .iter()
        .filter(|r| r.abs() >= 1.0)
        .map(|&r| r * phi.eval(r) / r.abs().powf(m + 1.0))
        .fold(f64::INFINITY, f64::min);
    let growth_c = rs
        .iter()
        .map(|&r| phi.derivative(r).abs() / (r.abs().powf(m_tilde) + 1.0))
        .fold(0.0, f64::max);
    let coercive = lambda > 0.0 && growth_c.is_finite();
    report.conditions.push(ConditionResult {
        id: "phi_coercive_growth",
        pass: coercive,
        witness: None,
        margin: lambda,
        note: format!("λ = {lambda:.4e}, C = {growth_c:.4e}"),
    });
    report.empirical.insert("lambda".into(), lambda);
    report.empirical.insert("C_phi".into(), growth_c);

    // Non-degenerate form: ellipticity and growth bounds.
    match as_nondegenerate(spec) {
        Err(_) => report.conditions.push(ConditionResult {
            id: "ellipticity",
            pass: true,
            witness: None,
            margin: 0.0,
            note: "ε = 0: degenerate problem, checked through the Φ conditions only".into(),
        }),
        Ok(nd) => {
            let theta = nd.theta;
            let mut ell = Worst::new();
            for s in &pts {
                let q = nd.ellipticity_form(s.t, s.r, &s.dir);
                let rhs = cbar * s.r.abs().powf(m_tilde) + theta;
                ell.see(q - rhs, s.t, &s.x, s.r);
            }
            for &r in &rs[..3] {
                let q = nd.ellipticity_form(0.0, r, &unit_dir(d));
                ell.see(q - (cbar * r.abs().powf(m_tilde) + theta), 0.0, &mid, r);
            }
            let tol = 1e-12 * (1.0 + theta);
            report.conditions.push(ConditionResult {
                id: "ellipticity",
                pass: ell.margin >= -tol,
                witness: ell.witness,
                margin: ell.margin,
                note: format!("θ = ε = {theta}, c = c̄ = {cbar}, m̃ = {m_tilde}"),
            });

            let k_noise = nd.channels();
            let (mut k_f, mut k_g, mut n_v, mut tail) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
            for s in &pts {
                let (t, x, r) = (s.t, &s.x[..], s.r);
                let flux: f64 = (0..d).map(|i| nd.flux(i, t, x, r).abs()).sum();
                let div_flux: f64 = (0..d)
                    .map(|i| ito.coeffs.b[i].grad(t, x, dom)[i] * r)
                    .sum::<f64>()
                    .abs();
                let v1 = nd.v1(t, x);
                let v2 = nd.v2(t, x);
                if r.abs() > 1e-9 {
                    let lhs_f = nd.source(t, x, r).abs() + flux + div_flux;
                    k_f = k_f.max((lhs_f - v1) / r.abs());
                    let big_g: f64 = (0..k_noise)
                        .map(|k| nd.big_g(k, t, x, r).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    let small_g: f64 = (0..d)
                        .map(|i| (0..k_noise).map(|k| nd.g(i, k, t, r).powi(2)).sum::<f64>().sqrt())
                        .sum();
                    k_g = k_g.max((big_g + small_g - v2) / r.abs());
                }
                n_v = n_v.max(v1 + v2);
                let kn = ito.coeffs.k_noise();
                if kn > 0 {
                    let nu = ito.coeffs.nu_k(kn - 1).map_or(0.0, |f| f.eval(t, x, dom));
                    let g = ito.coeffs.g_k(kn - 1).map_or(0.0, |f| f.eval(t, x, dom));
                    tail = tail.max(nu.hypot(g));
                }
            }
            let k_dg = ito.coeffs.sigma.sup_abs();
            for (id, val, note) in [
                ("growth_drift", k_f, "|F| + |F^i| + |∂_i F^i| ≤ V¹ + K|r|"),
                ("growth_noise", k_g, "|G|_ℓ₂ + |g^i|_ℓ₂ + derivatives ≤ V² + K|r|"),
                ("noise_r_derivative", k_dg, "|∂_r g^i|_ℓ₂ + |∂_r ∂_i g^i|_ℓ₂ ≤ K"),
                ("bounded_free_terms", n_v, "|V¹| + |V²| ≤ N"),
            ] {
                report.conditions.push(ConditionResult {
                    id,
                    pass: val.is_finite(),
                    witness: None,
                    margin: val,
                    note: note.into(),
                });
            }
            // G^k vanishes on the transport channels, so Σ_{k ∈ 𝔑_g} |∂_i G^k|² = 0.
            report.conditions.push(ConditionResult {
                id: "transport_channel_regularity",
                pass: true,
                witness: None,
                margin: 0.0,
                note: "𝔑_g = {1..d}; G^k ≡ 0 there".into(),
            });
            report.empirical.insert("K_drift".into(), k_f);
            report.empirical.insert("K_noise".into(), k_g);
            report.empirical.insert("N_V".into(), n_v);
            report.empirical.insert("noise_tail".into(), tail);
        }
    }

    // b^i = 0 on ∂Q
    let mut bnd = Worst::new();
    for (t, x) in boundary_samples(spec, sample_budget.clamp(4, 64)) {
        let worst = spec
            .coeffs
            .b
            .iter()
            .map(|b| b.eval(t, &x, dom).abs())
            .fold(0.0, f64::max);
        bnd.see(-worst, t, &x, 0.0);
    }
    report.conditions.push(ConditionResult {
        id: "drift_vanishes_on_boundary",
        pass: bnd.margin >= -1e-12,
        witness: bnd.witness.filter(|_| bnd.margin < -1e-12),
        margin: bnd.margin,
        note: String::new(),
    });

    // |σ|+|b|+|c|+|ν| + |∇b|+|∇c|+|∇ν| + |∇²b| ≤ K
    let co = &spec.coeffs;
    let mut k_coef = 0.0f64;
    for s in &pts {
        let (t, x) = (s.t, &s.x[..]);
        let norm = |v: Vec<f64>| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let mut acc = co.sigma.eval(t).abs() + co.c.eval(t, x, dom).abs() + norm(co.c.grad(t, x, dom));
        for b in &co.b {
            acc += b.eval(t, x, dom).abs() + norm(b.grad(t, x, dom)) + norm(b.hessian(t, x, dom));
        }
        let nu_sq: f64 = co.nu.iter().map(|f| f.eval(t, x, dom).powi(2)).sum();
        let dnu_sq: f64 = co.nu.iter().map(|f| f.grad(t, x, dom).iter().map(|v| v * v).sum::<f64>()).sum();
        acc += nu_sq.sqrt() + dnu_sq.sqrt();
        k_coef = k_coef.max(acc);
    }
    report.conditions.push(ConditionResult {
        id: "coefficient_bound",
        pass: k_coef.is_finite(),
        witness: None,
        margin: k_coef,
        note: "|σ|+|b|+|c|+|ν|+|∇b|+|∇c|+|∇ν|+|∇²b| ≤ K".into(),
    });
    report.empirical.insert("K_coefficients".into(), k_coef);
    Ok(report)
}

fn unit_dir(d: usize) -> Vec<f64> {
    let mut e = vec![0.0; d];
    e[0] = 1.0;
    e
}
