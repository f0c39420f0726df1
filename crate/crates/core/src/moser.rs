//! Exponent ladder of the Moser iteration.
//!
//! `γ = 1 + 2/d`, `γ̄ = γ/μ'`, `δ = m̃γ̄/(γ̄-1)`, `p_n = m̃(1 + γ̄ + ... + γ̄^n)`.
//! The ladder is generic over the arithmetic so the identities can be checked
//! exactly with [`num_rational::BigRational`].

use std::fmt::{self, Debug, Display};

use num_traits::{FromPrimitive, Num, ToPrimitive};

use crate::error::{Error, Result};
use crate::model::Exponent;

/// Arithmetic the ladder is computed in.
pub trait LadderScalar: Num + Clone + PartialOrd + FromPrimitive + ToPrimitive + Debug + Display {
    fn lit(v: i64) -> Self {
        Self::from_i64(v).expect("integer literal is representable")
    }

    fn as_f64(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn pow(&self, n: usize) -> Self {
        let mut out = Self::one();
        for _ in 0..n {
            out = out * self.clone();
        }
        out
    }
}

impl<S: Num + Clone + PartialOrd + FromPrimitive + ToPrimitive + Debug + Display> LadderScalar for S {}

#[derive(Clone, Debug, PartialEq)]
pub struct MoserLadder<S> {
    pub d: usize,
    pub m_tilde: S,
    /// `None` encodes `μ = ∞`.
    pub mu: Option<S>,
    pub alpha: S,
    pub mu_conj: S,
    pub gamma: S,
    pub gamma_bar: S,
    pub delta: S,
    pub n0: usize,
    pub kappa: S,
    pub theta: S,
}

/// Search limit for `n₀`; `γ̄ > 1` makes the search finite.
const N0_LIMIT: usize = 100_000;

impl<S: LadderScalar> MoserLadder<S> {
    /// Builds the ladder; `mu = None` means `μ = ∞`.
    pub fn new(d: usize, m_tilde: S, mu: Option<S>, alpha: S) -> Result<Self> {
        if d == 0 {
            return Err(Error::domain("dimension", "need d ≥ 1"));
        }
        if !(m_tilde > S::zero()) {
            return Err(Error::domain("m̃", format!("need m̃ > 0, got {m_tilde}")));
        }
        if !(alpha > S::zero()) {
            return Err(Error::domain("α", format!("need α > 0, got {alpha}")));
        }
        let two = S::lit(2);
        let mu_conj = match &mu {
            None => S::one(),
            Some(mu) => {
                let bound = (S::lit(d as i64) + two.clone()) / two.clone();
                if !(*mu >= two && *mu > bound) {
                    return Err(Error::Admissibility {
                        mu: mu.to_string(),
                        dim: d,
                    });
                }
                mu.clone() / (mu.clone() - S::one())
            }
        };
        let gamma = S::one() + two.clone() / S::lit(d as i64);
        let gamma_bar = gamma.clone() / mu_conj.clone();
        if !(gamma_bar > S::one()) {
            return Err(Error::domain("γ̄", format!("need γ̄ > 1, got {gamma_bar}")));
        }
        let delta = m_tilde.clone() * gamma_bar.clone() / (gamma_bar.clone() - S::one());
        let theta = alpha.clone() * mu_conj.clone() / delta.clone() / (gamma_bar.clone() - S::one());
        let mut ladder = MoserLadder {
            d,
            m_tilde,
            mu,
            alpha,
            mu_conj,
            gamma,
            gamma_bar,
            delta,
            n0: 0,
            kappa: S::zero(),
            theta,
        };
        ladder.kappa = ladder.compute_kappa()?;
        ladder.n0 = ladder.compute_n0()?;
        Ok(ladder)
    }

    /// `p_n`, computed through `p_{k+1} = m̃ + γ̄ p_k`.
    pub fn p(&self, n: usize) -> S {
        let mut p = self.m_tilde.clone();
        for _ in 0..n {
            p = self.m_tilde.clone() + self.gamma_bar.clone() * p;
        }
        p
    }

    /// `p_0, ..., p_{n_max}`.
    pub fn ladder(&self, n_max: usize) -> Vec<S> {
        let mut out = Vec::with_capacity(n_max + 1);
        let mut p = self.m_tilde.clone();
        for _ in 0..=n_max {
            out.push(p.clone());
            p = self.m_tilde.clone() + self.gamma_bar.clone() * p;
        }
        out
    }

    /// `αμ'/(δγ̄^n)`.
    pub fn exponent(&self, n: usize) -> S {
        self.alpha.clone() * self.mu_conj.clone() / (self.delta.clone() * self.gamma_bar.pow(n))
    }

    /// Members `p_n/μ' ≥ 2` of 𝔑 up to index `n_max`.
    pub fn admissible_exponents(&self, n_max: usize) -> Vec<S> {
        let two = S::lit(2);
        self.ladder(n_max)
            .into_iter()
            .map(|p| p / self.mu_conj.clone())
            .filter(|l| *l >= two)
            .collect()
    }

    /// Both `2p/(p-1)` and `4p/(p-2)` decrease for `p > 2`, so the supremum
    /// over 𝔑 is attained at its smallest member, or at the next one when the
    /// smallest equals 2.
    fn compute_kappa(&self) -> Result<S> {
        let two = S::lit(2);
        let four = S::lit(4);
        let term = |p: &S| {
            let a = two.clone() * p.clone() / (p.clone() - S::one());
            if *p == two {
                a
            } else {
                let b = four.clone() * p.clone() / (p.clone() - two.clone());
                if b > a {
                    b
                } else {
                    a
                }
            }
        };
        let mut best: Option<S> = None;
        let mut p = self.m_tilde.clone();
        for _ in 0..N0_LIMIT {
            let l = p.clone() / self.mu_conj.clone();
            if l >= two {
                let v = term(&l);
                best = Some(match best {
                    Some(b) if b >= v => b,
                    _ => v,
                });
                if l > two {
                    return Ok(best.expect("set above"));
                }
            }
            p = self.m_tilde.clone() + self.gamma_bar.clone() * p;
        }
        Err(Error::domain("κ", "ladder does not reach 2 within the search limit"))
    }

    /// Minimal `n ≥ 1` with `p_n ≥ 2μ'` and `αμ'/(δγ̄^n) < 1`.
    fn compute_n0(&self) -> Result<usize> {
        let target = S::lit(2) * self.mu_conj.clone();
        let mut p = self.p(1);
        let mut g = self.gamma_bar.clone();
        let num = self.alpha.clone() * self.mu_conj.clone();
        for n in 1..N0_LIMIT {
            if p >= target && num.clone() < self.delta.clone() * g.clone() {
                return Ok(n);
            }
            p = self.m_tilde.clone() + self.gamma_bar.clone() * p;
            g = g * self.gamma_bar.clone();
        }
        Err(Error::domain("n₀", "not found within the search limit"))
    }

    /// Floating-point copy of the ladder.
    pub fn to_f64(&self) -> MoserLadder<f64> {
        MoserLadder {
            d: self.d,
            m_tilde: self.m_tilde.as_f64(),
            mu: self.mu.as_ref().map(|m| m.as_f64()),
            alpha: self.alpha.as_f64(),
            mu_conj: self.mu_conj.as_f64(),
            gamma: self.gamma.as_f64(),
            gamma_bar: self.gamma_bar.as_f64(),
            delta: self.delta.as_f64(),
            n0: self.n0,
            kappa: self.kappa.as_f64(),
            theta: self.theta.as_f64(),
        }
    }
}

impl MoserLadder<f64> {
    /// Ladder from the floating-point model parameters.
    pub fn from_params(d: usize, m_tilde: f64, mu: Exponent, alpha: f64) -> Result<Self> {
        let mu = match mu {
            Exponent::Infinite => None,
            Exponent::Finite(m) => Some(m),
        };
        MoserLadder::new(d, m_tilde, mu, alpha)
    }
}

/// `θ̃ = (αμ'/δ) Σ_{n≥1} γ̄^{-n} = (αμ'/δ)/(γ̄-1)`.
pub fn smoothing_exponent<S: LadderScalar>(ladder: &MoserLadder<S>) -> S {
    ladder.theta.clone()
}

/// `c_n` with the free constant `N = n_free`.
pub fn c_n<S: LadderScalar>(ladder: &MoserLadder<S>, n_free: f64, n: usize) -> Result<f64> {
    let e = ladder.exponent(n).as_f64();
    if !(e < 1.0) {
        return Err(Error::domain(
            "c_n",
            format!("αμ'/(δγ̄^n) = {e} ≥ 1 at n = {n} (n₀ = {})", ladder.n0),
        ));
    }
    let l = ladder.to_f64();
    let gn = l.gamma_bar.powi(n as i32);
    let p = ladder.p(n).as_f64();
    let log_c = n_free.ln() / gn
        + e * (l.delta * gn / (l.mu_conj * l.alpha)).ln()
        - (1.0 - e).ln()
        + e * (n_free.ln() + l.kappa * (p.ln() - l.mu_conj.ln()));
    Ok(log_c.exp())
}

/// `λ_n = (p_n/μ')^{-αp_n/(δγ̄^n)}`.
pub fn lambda_n<S: LadderScalar>(ladder: &MoserLadder<S>, n: usize) -> f64 {
    let l = ladder.to_f64();
    let p = ladder.p(n).as_f64();
    let e = l.alpha * p / (l.delta * l.gamma_bar.powi(n as i32));
    (-e * (p / l.mu_conj).ln()).exp()
}

/// `c_n`, `∏ c_n`, `λ_n`, `Σ λ_n` for `n = n₀..=n_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationConstants {
    pub n_free: f64,
    pub indices: Vec<usize>,
    pub c: Vec<f64>,
    pub products: Vec<f64>,
    pub lambda: Vec<f64>,
    pub lambda_sums: Vec<f64>,
}

impl IterationConstants {
    /// Partial product `∏_{k=n₀}^{n} c_k`.
    pub fn product_to(&self, n: usize) -> Option<f64> {
        self.indices.iter().position(|&k| k == n).map(|i| self.products[i])
    }

    pub fn lambda_sum_to(&self, n: usize) -> Option<f64> {
        self.indices.iter().position(|&k| k == n).map(|i| self.lambda_sums[i])
    }
}

pub fn iteration_constants<S: LadderScalar>(
    ladder: &MoserLadder<S>,
    n_free: f64,
    n_max: usize,
) -> Result<IterationConstants> {
    if !(n_free > 0.0) {
        return Err(Error::domain("N_free", format!("need N > 0, got {n_free}")));
    }
    if n_max < ladder.n0 {
        return Err(Error::domain("n_max", format!("need n_max ≥ n₀ = {}", ladder.n0)));
    }
    let mut out = IterationConstants {
        n_free,
        indices: Vec::new(),
        c: Vec::new(),
        products: Vec::new(),
        lambda: Vec::new(),
        lambda_sums: Vec::new(),
    };
    let (mut log_prod, mut sum) = (0.0f64, 0.0f64);
    for n in ladder.n0..=n_max {
        let c = c_n(ladder, n_free, n)?;
        let lam = lambda_n(ladder, n);
        log_prod += c.ln();
        sum += lam;
        out.indices.push(n);
        out.c.push(c);
        out.products.push(log_prod.exp());
        out.lambda.push(lam);
        out.lambda_sums.push(sum);
    }
    Ok(out)
}

/// Plain-text ladder table: `n, p_n, αμ'/(δγ̄^n), λ_n, c_n(N)`.
pub struct LadderTable<'a, S> {
    pub ladder: &'a MoserLadder<S>,
    /// `c_n` is only tabulated when the free constant is given.
    pub n_free: Option<f64>,
    pub n_max: usize,
}

impl<S: LadderScalar> fmt::Display for LadderTable<'_, S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let l = self.ladder;
        let mu = l.mu.as_ref().map_or("inf".to_string(), |m| m.to_string());
        writeln!(
            f,
            "d = {}, m̃ = {}, μ = {mu}, α = {}",
            l.d, l.m_tilde, l.alpha
        )?;
        writeln!(
            f,
            "μ' = {}, γ = {}, γ̄ = {}, δ = {}, n₀ = {}, κ = {}, θ̃ = {}",
            l.mu_conj, l.gamma, l.gamma_bar, l.delta, l.n0, l.kappa, l.theta
        )?;
        write!(f, "{:>4}  {:>14}  {:>14}  {:>14}", "n", "p_n", "αμ'/(δγ̄^n)", "λ_n")?;
        match self.n_free {
            Some(nf) => writeln!(f, "  {:>14}", format!("c_n(N={nf})"))?,
            None => writeln!(f)?,
        }
        for n in 0..=self.n_max {
            write!(
                f,
                "{:>4}  {:>14}  {:>14.6e}  {:>14.6e}",
                n,
                format!("{:.6}", l.p(n).as_f64()),
                l.exponent(n).as_f64(),
                lambda_n(l, n),
            )?;
            match self.n_free {
                Some(nf) => {
                    let c = c_n(l, nf, n).map_or("-".to_string(), |c| format!("{c:.6e}"));
                    writeln!(f, "  {c:>14}")?
                }
                None => writeln!(f)?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn one_dimensional_bounded_case() {
        let l = MoserLadder::new(1, q(1, 1), None, q(2, 1)).unwrap();
        assert_eq!(l.mu_conj, q(1, 1));
        assert_eq!(l.gamma_bar, q(3, 1));
        assert_eq!(l.delta, q(3, 2));
        assert_eq!(l.ladder(3), vec![q(1, 1), q(4, 1), q(13, 1), q(40, 1)]);
        assert_eq!(l.n0, 1);
        assert_eq!(l.kappa, q(8, 1));
        assert_eq!(smoothing_exponent(&l), q(2, 3));
    }

    #[test]
    fn two_dimensional_ladder() {
        let l = MoserLadder::new(2, q(1, 1), None, q(2, 1)).unwrap();
        assert_eq!(l.gamma_bar, q(2, 1));
        assert_eq!(l.delta, q(2, 1));
        assert_eq!(l.ladder(3)[1..], [q(3, 1), q(7, 1), q(15, 1)]);
        assert_eq!(l.theta, q(1, 1));
    }

    #[test]
    fn inadmissible_mu() {
        let err = MoserLadder::new(3, q(1, 1), Some(q(2, 1)), q(2, 1));
        assert!(matches!(err, Err(Error::Admissibility { dim: 3, .. })));
        assert!(MoserLadder::from_params(3, 1.0, Exponent::Finite(2.0), 2.0).is_err());
        assert!(MoserLadder::from_params(1, 1.0, Exponent::Finite(2.0), 2.0).is_ok());
    }

    #[test]
    fn kappa_skips_indicator_at_two() {
        // p = 1/2, 3/2, 7/2, ...
        let l = MoserLadder::new(2, q(1, 2), None, q(1, 1)).unwrap();
        let p = q(7, 2);
        let want = q(4, 1) * p.clone() / (p - q(2, 1));
        assert_eq!(l.kappa, want);
        // p_1 = 2 exactly: sup over {2, 4, ...} of the two terms
        let l = MoserLadder::new(1, q(1, 2), None, q(1, 1)).unwrap();
        assert_eq!(l.ladder(1)[1], q(2, 1));
        assert_eq!(l.kappa, q(4, 1) * q(13, 2) / (q(13, 2) - q(2, 1)));
    }

    #[test]
    fn float_ladder_agrees() {
        let e = MoserLadder::new(1, q(1, 1), None, q(2, 1)).unwrap().to_f64();
        let f = MoserLadder::from_params(1, 1.0, Exponent::Infinite, 2.0).unwrap();
        assert_eq!(e, f);
    }

    #[test]
    fn products_and_sums_converge() {
        let l = MoserLadder::new(1, q(1, 1), None, q(2, 1)).unwrap();
        let ic = iteration_constants(&l, 10.0, 40).unwrap();
        let (p20, p40) = (ic.product_to(20).unwrap(), ic.product_to(40).unwrap());
        assert!((p40 - p20).abs() / p20 < 1e-6);
        assert!(ic.lambda_sum_to(40).unwrap() - ic.lambda_sum_to(20).unwrap() < 1e-8);
    }

    #[test]
    fn unit_free_constant_drops_factor() {
        let l = MoserLadder::from_params(1, 1.0, Exponent::Infinite, 2.0).unwrap();
        for n in 1..6 {
            let e = l.exponent(n);
            let gn = 3f64.powi(n as i32);
            let p = l.p(n);
            let want = (1.5 * gn / 2.0).powf(e) / (1.0 - e) * p.powf(8.0 * e);
            assert!((c_n(&l, 1.0, n).unwrap() / want - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn c_n_undefined_below_n0() {
        let l = MoserLadder::from_params(1, 1.0, Exponent::Infinite, 6.0).unwrap();
        assert!(l.n0 > 1);
        assert!(c_n(&l, 10.0, 0).is_err());
        assert!(iteration_constants(&l, 10.0, 0).is_err());
    }

    #[test]
    fn table_renders() {
        let l = MoserLadder::from_params(1, 1.0, Exponent::Infinite, 2.0).unwrap();
        let s = LadderTable { ladder: &l, n_free: Some(10.0), n_max: 3 }.to_string();
        assert!(s.contains("θ̃ = 0.666"));
        assert_eq!(s.lines().count(), 3 + 4);
    }
}
