//! Uniform Dirichlet grids on a box, discrete Laplacian and the `L_p`,
//! `H¹₀` and `H⁻¹` norms.
//!
//! Nodes are the interior points `a_i + h_i j`, `j = 1..=n_i`; boundary
//! values are implicitly zero. Linear index runs fastest along axis 0.

use std::io::Write;
use std::ops::{Deref, DerefMut};

use crate::error::{Error, Result};
use crate::func::BoxDomain;
use crate::linalg::solve_tridiagonal;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    dim: usize,
    n: Vec<usize>,
    h: Vec<T>,
    lower: Vec<T>,
    domain: BoxDomain,
}

/// Values at the interior nodes of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Field<T>(pub Vec<T>);

impl<T> Deref for Field<T> {
    type Target = Vec<T>;
    fn deref(&self) -> &Vec<T> {
        &self.0
    }
}

impl<T> DerefMut for Field<T> {
    fn deref_mut(&mut self) -> &mut Vec<T> {
        &mut self.0
    }
}

impl<T: Scalar> Field<T> {
    pub fn zeros(len: usize) -> Self {
        Field(vec![T::zero(); len])
    }

    pub fn all_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, a: T) -> Self {
        Field(self.iter().map(|&v| a * v).collect())
    }

    pub fn sub(&self, other: &Field<T>) -> Self {
        Field(self.iter().zip(other.iter()).map(|(&a, &b)| a - b).collect())
    }

    pub fn add(&self, other: &Field<T>) -> Self {
        Field(self.iter().zip(other.iter()).map(|(&a, &b)| a + b).collect())
    }

    pub fn max_abs(&self) -> T {
        self.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

/// `L_p` exponent; `p = ∞` is `f64::INFINITY`.
pub type LpExponent = f64;

impl<T: Scalar> Grid<T> {
    pub fn new(domain: &BoxDomain, nodes: &[usize]) -> Result<Self> {
        let dim = domain.dim();
        if !(1..=2).contains(&dim) {
            return Err(Error::domain("grid dimension", format!("d = {dim} (supported: 1, 2)")));
        }
        if nodes.len() != dim {
            return Err(Error::Shape {
                expected: dim,
                got: nodes.len(),
            });
        }
        if let Some(&n) = nodes.iter().find(|&&n| n < 3) {
            return Err(Error::domain("grid", format!("need ≥ 3 interior nodes per axis, got {n}")));
        }
        let h = (0..dim)
            .map(|i| T::of(domain.length(i) / (nodes[i] as f64 + 1.0)))
            .collect();
        Ok(Grid {
            dim,
            n: nodes.to_vec(),
            h,
            lower: domain.lower.iter().map(|&a| T::of(a)).collect(),
            domain: domain.clone(),
        })
    }

    /// Unit interval/square with `n` interior nodes per axis.
    pub fn unit(dim: usize, n: usize) -> Result<Self> {
        Self::new(&BoxDomain::unit(dim), &vec![n; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> &[usize] {
        &self.n
    }

    pub fn spacing(&self) -> &[T] {
        &self.h
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.n.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight `h^d` of every node.
    pub fn cell_volume(&self) -> T {
        self.h.iter().fold(T::one(), |a, &h| a * h)
    }

    /// Linear index offset of a unit step along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.n[..axis].iter().product()
    }

    /// Per-axis node index (0-based) of a linear index.
    pub fn multi_index(&self, lin: usize) -> [usize; 2] {
        let mut out = [0; 2];
        let mut rem = lin;
        for (a, &n) in self.n.iter().enumerate() {
            out[a] = rem % n;
            rem /= n;
        }
        out
    }

    pub fn coords(&self, lin: usize) -> Vec<T> {
        let mi = self.multi_index(lin);
        (0..self.dim)
            .map(|a| self.lower[a] + self.h[a] * T::of_usize(mi[a] + 1))
            .collect()
    }

    /// All node coordinates, in linear order.
    pub fn all_coords(&self) -> Vec<Vec<T>> {
        (0..self.len()).map(|i| self.coords(i)).collect()
    }

    pub fn zeros(&self) -> Field<T> {
        Field::zeros(self.len())
    }

    pub fn sample(&self, f: impl Fn(&[T]) -> T) -> Field<T> {
        Field((0..self.len()).map(|i| f(&self.coords(i))).collect())
    }

    pub fn check(&self, v: &Field<T>) -> Result<()> {
        if v.len() != self.len() {
            return Err(Error::Shape {
                expected: self.len(),
                got: v.len(),
            });
        }
        Ok(())
    }

    /// Neighbour along `axis` in direction `+1`/`-1`, `None` at the boundary.
    #[inline]
    pub fn neighbour(&self, lin: usize, axis: usize, forward: bool) -> Option<usize> {
        let mi = self.multi_index(lin);
        let s = self.stride(axis);
        if forward {
            (mi[axis] + 1 < self.n[axis]).then(|| lin + s)
        } else {
            (mi[axis] > 0).then(|| lin - s)
        }
    }

    /// `(Δ_h v)_j = Σ_axis (v_{j-e} + v_{j+e} - 2 v_j) / h²`.
    pub fn apply_laplacian(&self, v: &Field<T>) -> Result<Field<T>> {
        self.check(v)?;
        let mut out = self.zeros();
        self.laplacian_into(v, &mut out);
        Ok(out)
    }

    pub(crate) fn laplacian_into(&self, v: &[T], out: &mut [T]) {
        let two = T::of(2.0);
        for o in out.iter_mut() {
            *o = T::zero();
        }
        for axis in 0..self.dim {
            let inv_h2 = (self.h[axis] * self.h[axis]).recip();
            let s = self.stride(axis);
            let n = self.n[axis];
            for (lin, o) in out.iter_mut().enumerate() {
                let k = (lin / s) % n;
                let left = if k > 0 { v[lin - s] } else { T::zero() };
                let right = if k + 1 < n { v[lin + s] } else { T::zero() };
                *o = *o + (left + right - two * v[lin]) * inv_h2;
            }
        }
    }

    /// Centred difference `(v_{j+e} - v_{j-e}) / 2h` along `axis`.
    pub fn central_difference(&self, v: &[T], axis: usize) -> Field<T> {
        let s = self.stride(axis);
        let n = self.n[axis];
        let inv = (T::of(2.0) * self.h[axis]).recip();
        Field(
            (0..self.len())
                .map(|lin| {
                    let k = (lin / s) % n;
                    let left = if k > 0 { v[lin - s] } else { T::zero() };
                    let right = if k + 1 < n { v[lin + s] } else { T::zero() };
                    (right - left) * inv
                })
                .collect(),
        )
    }

    /// Discrete `L_2` inner product with node weight `h^d`.
    pub fn inner(&self, a: &[T], b: &[T]) -> T {
        a.iter().zip(b).map(|(&x, &y)| x * y).sum::<T>() * self.cell_volume()
    }

    /// `(Σ_j |v_j|^p h^d)^{1/p}`; `p = ∞` gives `max |v_j|`.
    pub fn norm_lp(&self, v: &[T], p: LpExponent) -> Result<T> {
        if !(p >= 1.0) {
            return Err(Error::domain("L_p exponent", format!("need p ≥ 1, got {p}")));
        }
        Ok(self.lp_unchecked(v, p))
    }

    pub(crate) fn lp_unchecked(&self, v: &[T], p: f64) -> T {
        if p.is_infinite() {
            return v.iter().fold(T::zero(), |m, x| m.max(x.abs()));
        }
        self.lp_power(v, p).powf(T::of(1.0 / p))
    }

    /// `Σ_j |v_j|^p h^d`, the `p`-th power of the `L_p` norm.
    pub fn lp_power(&self, v: &[T], p: f64) -> T {
        let s: T = if p == 1.0 {
            v.iter().map(|x| x.abs()).sum()
        } else if p == 2.0 {
            v.iter().map(|&x| x * x).sum()
        } else {
            let pp = T::of(p);
            v.iter().map(|x| x.abs().powf(pp)).sum()
        };
        s * self.cell_volume()
    }

    /// `‖∇_h v‖²` from forward differences including the two boundary cells
    /// of every grid line; equals `(v, -Δ_h v)` exactly.
    pub fn h10_squared(&self, v: &[T]) -> T {
        let mut total = T::zero();
        for axis in 0..self.dim {
            let s = self.stride(axis);
            let n = self.n[axis];
            let mut acc = T::zero();
            for (lin, &x) in v.iter().enumerate() {
                let k = (lin / s) % n;
                // the cell to the left of this node, plus the last boundary cell
                let left = if k > 0 { v[lin - s] } else { T::zero() };
                acc = acc + (x - left) * (x - left);
                if k + 1 == n {
                    acc = acc + x * x;
                }
            }
            total = total + acc / (self.h[axis] * self.h[axis]);
        }
        total * self.cell_volume()
    }

    pub fn norm_h10(&self, v: &[T]) -> T {
        self.h10_squared(v).sqrt()
    }

    /// Solves `-Δ_h w = rhs`. Exact tridiagonal elimination in one
    /// dimension (`tol` unused); conjugate gradients in two, stopping at
    /// relative residual `tol` or after `10 N` iterations.
    pub fn solve_poisson(&self, rhs: &[T], tol: f64) -> Result<Field<T>> {
        if rhs.len() != self.len() {
            return Err(Error::Shape {
                expected: self.len(),
                got: rhs.len(),
            });
        }
        if !(tol > 0.0) {
            return Err(Error::domain("Poisson tolerance", format!("need tol > 0, got {tol}")));
        }
        if self.dim == 1 {
            let n = self.n[0];
            let ih2 = (self.h[0] * self.h[0]).recip();
            let off = vec![-ih2; n];
            let diag = vec![T::of(2.0) * ih2; n];
            return Ok(Field(solve_tridiagonal(&off, &diag, &off, rhs)));
        }
        self.conjugate_gradient(rhs, tol)
    }

    fn conjugate_gradient(&self, rhs: &[T], tol: f64) -> Result<Field<T>> {
        let n = self.len();
        let b_norm = rhs.iter().map(|&v| v * v).sum::<T>().sqrt();
        let mut x = vec![T::zero(); n];
        if b_norm == T::zero() {
            return Ok(Field(x));
        }
        let mut r = rhs.to_vec();
        let mut p = r.clone();
        let mut ap = vec![T::zero(); n];
        let mut rr: T = r.iter().map(|&v| v * v).sum();
        let target = T::of(tol) * b_norm;
        let cap = 10 * n;
        for _ in 0..cap {
            if rr.sqrt() <= target {
                return Ok(Field(x));
            }
            self.laplacian_into(&p, &mut ap);
            for v in ap.iter_mut() {
                *v = -*v;
            }
            let pap: T = p.iter().zip(&ap).map(|(&a, &b)| a * b).sum();
            let alpha = rr / pap;
            for i in 0..n {
                x[i] = x[i] + alpha * p[i];
                r[i] = r[i] - alpha * ap[i];
            }
            let rr_new: T = r.iter().map(|&v| v * v).sum();
            let beta = rr_new / rr;
            for i in 0..n {
                p[i] = r[i] + beta * p[i];
            }
            rr = rr_new;
        }
        if rr.sqrt() <= target {
            return Ok(Field(x));
        }
        Err(Error::PoissonSolver {
            iterations: cap,
            residual: (rr.sqrt() / b_norm).as_f64(),
        })
    }

    /// `(a, (-Δ_h)^{-1} b)`, the discrete `H⁻¹` inner product.
    pub fn inner_hminus1(&self, a: &[T], b: &[T]) -> Result<T> {
        let w = self.solve_poisson(b, 1e-12)?;
        Ok(self.inner(a, &w))
    }

    /// `‖v‖_{H⁻¹} = (v, (-Δ_h)^{-1} v)^{1/2}`.
    pub fn norm_hminus1(&self, v: &[T]) -> Result<T> {
        Ok(self.inner_hminus1(v, v)?.max(T::zero()).sqrt())
    }

    /// Eigenvalue of `-Δ_h` for the sine mode with 1-based wavenumbers `k`.
    pub fn eigenvalue(&self, k: &[usize]) -> T {
        let two = T::of(2.0);
        (0..self.dim)
            .map(|a| {
                let arg = T::PI() * T::of_usize(k[a]) / (two * T::of_usize(self.n[a] + 1));
                let s = arg.sin();
                T::of(4.0) * s * s / (self.h[a] * self.h[a])
            })
            .sum()
    }

    /// Discrete sine mode with 1-based wavenumbers `k`, orthonormal in the
    /// `h^d`-weighted inner product.
    pub fn sine_mode(&self, k: &[usize]) -> Field<T> {
        let norm = (0..self.dim).fold(T::one(), |acc, a| {
            acc * (T::of(2.0) / T::of(self.domain.length(a))).sqrt()
        });
        Field(
            (0..self.len())
                .map(|lin| {
                    let mi = self.multi_index(lin);
                    (0..self.dim).fold(norm, |acc, a| {
                        let arg = T::PI() * T::of_usize(k[a] * (mi[a] + 1)) / T::of_usize(self.n[a] + 1);
                        acc * arg.sin()
                    })
                })
                .collect(),
        )
    }

    /// Wavenumber tuples of all sine modes, ordered by increasing eigenvalue
    /// (ties broken lexicographically).
    pub fn modes_by_eigenvalue(&self) -> Vec<Vec<usize>> {
        let mut modes: Vec<Vec<usize>> = if self.dim == 1 {
            (1..=self.n[0]).map(|k| vec![k]).collect()
        } else {
            let mut m = Vec::with_capacity(self.len());
            for k2 in 1..=self.n[1] {
                for k1 in 1..=self.n[0] {
                    m.push(vec![k1, k2]);
                }
            }
            m
        };
        modes.sort_by(|a, b| {
            self.eigenvalue(a)
                .partial_cmp(&self.eigenvalue(b))
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.cmp(b))
        });
        modes
    }

    /// Writes one CSV row per node: coordinates then value.
    pub fn write_csv<W: Write>(&self, v: &[T], mut out: W) -> Result<()> {
        let header = if self.dim == 1 { "x,value" } else { "x,y,value" };
        writeln!(out, "{header}")?;
        for (lin, val) in v.iter().enumerate() {
            let c = self.coords(lin);
            let coords: Vec<String> = c.iter().map(|x| format!("{x}")).collect();
            writeln!(out, "{},{}", coords.join(","), val)?;
        }
        Ok(())
    }
}

/// Result of a space-time Gagliardo–Nirenberg check.
#[derive(Clone, Debug, PartialEq)]
pub struct GnCheck {
    pub q: f64,
    pub constant_pow_q: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// `N(λ)^q` for the space-time embedding constant in dimension `d`.
pub fn gn_constant_pow_q(dim: usize, lambda: f64) -> f64 {
    let d = dim as f64;
    let q = 2.0 * (d + lambda) / d;
    let base = match dim {
        1 => (1.0 + lambda) / lambda,
        2 => (q * (d - 1.0) / d).max((lambda + 2.0) / 2.0),
        _ => 2.0 * (d - 1.0) / (d - 2.0),
    };
    base * base
}

/// `sup_{λ ∈ [1,2]} N(λ)`, evaluated on a fine grid of λ.
pub fn gn_constant_sup(dim: usize) -> f64 {
    (0..=1000)
        .map(|i| {
            let lambda = 1.0 + i as f64 / 1000.0;
            let q = 2.0 * (dim as f64 + lambda) / dim as f64;
            gn_constant_pow_q(dim, lambda).powf(1.0 / q)
        })
        .fold(0.0, f64::max)
}

impl<T: Scalar> Grid<T> {
    /// Space-time embedding
    /// `Σ_t ‖v_t‖_q^q dt ≤ N(λ)^q (Σ_t ‖∇v_t‖² dt)(sup_t ‖v_t‖_λ^λ)^{2/d}`
    /// with `q = 2(d+λ)/d`, accepted with relative slack `eta`.
    pub fn gn_check(&self, fields: &[Field<T>], dt: f64, lambda: f64, eta: f64) -> Result<GnCheck> {
        if !(1.0..=2.0).contains(&lambda) {
            return Err(Error::domain("λ", format!("need λ ∈ [1, 2], got {lambda}")));
        }
        if fields.is_empty() {
            return Err(Error::domain("trajectory", "no fields"));
        }
        let d = self.dim as f64;
        let q = 2.0 * (d + lambda) / d;
        let mut lhs = 0.0;
        let mut grad = 0.0;
        let mut sup_lam = 0.0f64;
        for v in fields {
            self.check(v)?;
            lhs += self.lp_power(v, q).as_f64() * dt;
            grad += self.h10_squared(v).as_f64() * dt;
            sup_lam = sup_lam.max(self.lp_power(v, lambda).as_f64());
        }
        let c = gn_constant_pow_q(self.dim, lambda);
        let rhs = c * grad * sup_lam.powf(2.0 / d);
        Ok(GnCheck {
            q,
            constant_pow_q: c,
            lhs,
            rhs,
            pass: lhs <= rhs * (1.0 + eta),
        })
    }
}
