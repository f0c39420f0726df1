//! Named registry of coefficient functions.
//!
//! Every spatial profile is a product of one-dimensional factors, one per
//! axis, scaled by an amplitude and an optional time modulation
//! `1 + t_amp * sin(omega * t)`. The product form gives closed-form
//! gradients and Hessians, which the assumption checks need.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Axis-aligned box `Q = Π [lower_i, upper_i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxDomain {
    pub fn unit(dim: usize) -> Self {
        BoxDomain {
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn length(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.length(i)).product()
    }

    /// True when `x` lies on the boundary of the box (within `tol`).
    pub fn on_boundary(&self, x: &[f64], tol: f64) -> bool {
        x.iter()
            .enumerate()
            .any(|(i, &xi)| (xi - self.lower[i]).abs() <= tol || (xi - self.upper[i]).abs() <= tol)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FnKind {
    /// `params = [value]`
    Const,
    /// `params = [a0, a1, ...]`, value `Π_i Σ_k a_k x_i^k`
    Poly,
    /// `params = [amp, k_1, ..., k_d]`, value `amp Π_i sin(k_i π (x_i - a_i) / L_i)`
    Sine,
    /// `params = [amp, width, c_1, ..., c_d]`, smooth compactly supported bump
    Bump,
}

/// A coefficient function of `(t, x)` chosen from the registry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FnSpec {
    pub kind: FnKind,
    #[serde(default)]
    pub params: Vec<f64>,
    #[serde(default)]
    pub t_amp: f64,
    #[serde(default)]
    pub omega: f64,
}

/// Value and first two derivatives of a one-dimensional factor.
#[derive(Clone, Copy, Debug)]
struct Jet<T> {
    v: T,
    d1: T,
    d2: T,
}

impl FnSpec {
    pub fn new(kind: FnKind, params: Vec<f64>) -> Self {
        FnSpec {
            kind,
            params,
            t_amp: 0.0,
            omega: 0.0,
        }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn constant(v: f64) -> Self {
        Self::new(FnKind::Const, vec![v])
    }

    pub fn poly(coeffs: Vec<f64>) -> Self {
        Self::new(FnKind::Poly, coeffs)
    }

    pub fn sine(amp: f64, modes: &[f64]) -> Self {
        let mut p = vec![amp];
        p.extend_from_slice(modes);
        Self::new(FnKind::Sine, p)
    }

    pub fn bump(amp: f64, width: f64) -> Self {
        Self::new(FnKind::Bump, vec![amp, width])
    }

    pub fn with_time(mut self, t_amp: f64, omega: f64) -> Self {
        self.t_amp = t_amp;
        self.omega = omega;
        self
    }

    /// Identically zero regardless of `(t, x)`.
    pub fn is_zero(&self) -> bool {
        match self.kind {
            FnKind::Const | FnKind::Sine | FnKind::Bump => {
                self.params.first().copied().unwrap_or(0.0) == 0.0
            }
            FnKind::Poly => self.params.iter().all(|&a| a == 0.0),
        }
    }

    pub fn is_time_independent(&self) -> bool {
        self.t_amp == 0.0 || self.omega == 0.0
    }

    /// Spatially constant (so derivatives in `x` vanish).
    pub fn is_spatially_constant(&self) -> bool {
        self.kind == FnKind::Const || self.is_zero()
    }

    pub fn time_factor<T: Scalar>(&self, t: T) -> T {
        if self.is_time_independent() {
            T::one()
        } else {
            T::one() + T::of(self.t_amp) * (T::of(self.omega) * t).sin()
        }
    }

    fn amplitude<T: Scalar>(&self) -> T {
        match self.kind {
            FnKind::Const | FnKind::Sine | FnKind::Bump => {
                T::of(self.params.first().copied().unwrap_or(0.0))
            }
            FnKind::Poly => T::one(),
        }
    }

    fn factor<T: Scalar>(&self, axis: usize, x: T, dom: &BoxDomain) -> Jet<T> {
        match self.kind {
            FnKind::Const => Jet {
                v: T::one(),
                d1: T::zero(),
                d2: T::zero(),
            },
            FnKind::Poly => {
                // Horner for value and both derivatives.
                let (mut v, mut d1, mut d2) = (T::zero(), T::zero(), T::zero());
                for &a in self.params.iter().rev() {
                    d2 = d2 * x + d1 * T::of(2.0);
                    d1 = d1 * x + v;
                    v = v * x + T::of(a);
                }
                Jet { v, d1, d2 }
            }
            FnKind::Sine => {
                let k = self.params.get(1 + axis).copied().unwrap_or(1.0);
                let w = T::of(k * std::f64::consts::PI / dom.length(axis));
                let arg = w * (x - T::of(dom.lower[axis]));
                let (s, c) = arg.sin_cos();
                Jet {
                    v: s,
                    d1: w * c,
                    d2: -w * w * s,
                }
            }
            FnKind::Bump => {
                let min_len = (0..dom.dim())
                    .map(|i| dom.length(i))
                    .fold(f64::INFINITY, f64::min);
                let width = self.params.get(1).copied().unwrap_or(0.25 * min_len);
                let centre = self
                    .params
                    .get(2 + axis)
                    .copied()
                    .unwrap_or(0.5 * (dom.lower[axis] + dom.upper[axis]));
                let inv_w = T::of(1.0 / width);
                let s = (x - T::of(centre)) * inv_w;
                let q = T::one() - s * s;
                if q <= T::zero() {
                    return Jet {
                        v: T::zero(),
                        d1: T::zero(),
                        d2: T::zero(),
                    };
                }
                let v = (T::one() - q.recip()).exp();
                let two = T::of(2.0);
                let g = -two * s / (q * q);
                let dg = -two / (q * q) - T::of(8.0) * s * s / (q * q * q);
                Jet {
                    v,
                    d1: v * g * inv_w,
                    d2: v * (g * g + dg) * inv_w * inv_w,
                }
            }
        }
    }

    fn jets<T: Scalar>(&self, x: &[T], dom: &BoxDomain) -> Vec<Jet<T>> {
        x.iter()
            .enumerate()
            .map(|(axis, &xi)| self.factor(axis, xi, dom))
            .collect()
    }

    /// Time-independent spatial profile at `x`.
    pub fn spatial<T: Scalar>(&self, x: &[T], dom: &BoxDomain) -> T {
        if self.kind == FnKind::Const {
            return self.amplitude();
        }
        self.jets(x, dom)
            .iter()
            .fold(self.amplitude::<T>(), |acc, j| acc * j.v)
    }

    pub fn eval<T: Scalar>(&self, t: T, x: &[T], dom: &BoxDomain) -> T {
        self.spatial(x, dom) * self.time_factor(t)
    }

    /// Spatial gradient at `(t, x)`.
    pub fn grad<T: Scalar>(&self, t: T, x: &[T], dom: &BoxDomain) -> Vec<T> {
        if self.kind == FnKind::Const {
            return vec![T::zero(); x.len()];
        }
        let jets = self.jets(x, dom);
        let scale = self.amplitude::<T>() * self.time_factor(t);
        (0..x.len())
            .map(|j| {
                jets.iter()
                    .enumerate()
                    .fold(scale, |acc, (i, jet)| acc * if i == j { jet.d1 } else { jet.v })
            })
            .collect()
    }

    /// Spatial Hessian at `(t, x)`, row-major `d × d`.
    pub fn hessian<T: Scalar>(&self, t: T, x: &[T], dom: &BoxDomain) -> Vec<T> {
        let d = x.len();
        if self.kind == FnKind::Const {
            return vec![T::zero(); d * d];
        }
        let jets = self.jets(x, dom);
        let scale = self.amplitude::<T>() * self.time_factor(t);
        let mut out = vec![T::zero(); d * d];
        for j in 0..d {
            for k in 0..d {
                out[j * d + k] = jets.iter().enumerate().fold(scale, |acc, (i, jet)| {
                    let f = if j == k && i == j {
                        jet.d2
                    } else if i == j || i == k {
                        jet.d1
                    } else {
                        jet.v
                    };
                    acc * f
                });
            }
        }
        out
    }
}

/// A function of time only (the transport noise amplitude).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeFn {
    #[serde(default)]
    pub value: f64,
    #[serde(default)]
    pub t_amp: f64,
    #[serde(default)]
    pub omega: f64,
}

impl TimeFn {
    pub fn constant(value: f64) -> Self {
        TimeFn {
            value,
            t_amp: 0.0,
            omega: 0.0,
        }
    }

    pub fn eval<T: Scalar>(&self, t: T) -> T {
        let base = T::of(self.value);
        if self.t_amp == 0.0 || self.omega == 0.0 {
            base
        } else {
            base * (T::one() + T::of(self.t_amp) * (T::of(self.omega) * t).sin())
        }
    }

    pub fn is_zero(&self) -> bool {
        self.value == 0.0
    }

    /// `sup_t |σ(t)|`.
    pub fn sup_abs(&self) -> f64 {
        self.value.abs() * (1.0 + self.t_amp.abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_grad(f: &FnSpec, x: &[f64], dom: &BoxDomain) -> Vec<f64> {
        let h = 1e-6;
        (0..x.len())
            .map(|i| {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[i] += h;
                xm[i] -= h;
                (f.spatial(&xp, dom) - f.spatial(&xm, dom)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn poly_logistic_profile() {
        let dom = BoxDomain::unit(1);
        let b = FnSpec::poly(vec![0.0, 1.0, -1.0]);
        assert!((b.spatial(&[0.25], &dom) - 0.1875f64).abs() < 1e-15);
        assert!((b.grad(0.0, &[0.25], &dom)[0] - 0.5f64).abs() < 1e-15);
        assert!((b.hessian(0.0, &[0.25], &dom)[0] + 2.0f64).abs() < 1e-15);
        assert_eq!(b.spatial(&[0.0f64], &dom), 0.0);
        assert_eq!(b.spatial(&[1.0f64], &dom), 0.0);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let dom = BoxDomain {
            lower: vec![0.0, -1.0],
            upper: vec![1.0, 2.0],
        };
        let fns = [
            FnSpec::sine(0.7, &[2.0, 1.0]),
            FnSpec::poly(vec![0.3, -1.0, 0.5]),
            FnSpec::new(FnKind::Bump, vec![1.3, 0.6, 0.4, 0.3]),
        ];
        let x = [0.37, 0.21];
        for f in &fns {
            let g = f.grad(0.0, &x, &dom);
            let fd = fd_grad(f, &x, &dom);
            for (a, b) in g.iter().zip(&fd) {
                assert!((a - b).abs() < 1e-6, "{f:?}: {a} vs {b}");
            }
            // mixed partials are symmetric
            let hs = f.hessian(0.0, &x, &dom);
            assert!((hs[1] - hs[2]).abs() < 1e-12);
        }
    }

    #[test]
    fn bump_has_compact_support() {
        let dom = BoxDomain::unit(1);
        let f = FnSpec::bump(2.0, 0.2);
        assert_eq!(f.spatial(&[0.1f64], &dom), 0.0);
        assert!((f.spatial(&[0.5f64], &dom) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn time_modulation() {
        let f = FnSpec::constant(2.0).with_time(0.5, std::f64::consts::PI);
        let dom = BoxDomain::unit(1);
        assert!((f.eval(0.5, &[0.3], &dom) - 3.0f64).abs() < 1e-14);
        assert!(!f.is_time_independent());
        assert_eq!(TimeFn::constant(0.5).eval(3.0f64), 0.5);
    }

    #[test]
    fn parses_from_toml() {
        let f: FnSpec = toml::from_str("kind = \"sine\"\nparams = [1.0, 2.0]").unwrap();
        assert_eq!(f, FnSpec::sine(1.0, &[2.0]));
    }
}
