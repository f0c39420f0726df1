//! The nonlinearity Φ of the porous-medium drift `Δ(Φ(u))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Nonlinearity of the drift.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PhiSpec {
    /// `Φ(r) = |r|^{m-1} r`, `m ≥ 1`.
    #[serde(rename = "power")]
    PowerLaw { m: f64 },
    /// Piecewise-linear interpolation through `(r_i, values_i)` with linear
    /// extrapolation by the end slopes. `m` is the growth exponent used for
    /// the lower derivative bound `c̄|r|^{m-1} ≤ Φ'(r)`.
    Tabulated {
        r: Vec<f64>,
        values: Vec<f64>,
        #[serde(default = "one")]
        m: f64,
    },
    /// Power law with derivative capped at `cap`:
    /// `Φ_cap(r) = ∫_0^r min{m|s|^{m-1}, cap} ds`.
    Truncated { m: f64, cap: f64 },
}

fn one() -> f64 {
    1.0
}

impl PhiSpec {
    pub fn power(m: f64) -> Self {
        PhiSpec::PowerLaw { m }
    }

    pub fn linear() -> Self {
        PhiSpec::PowerLaw { m: 1.0 }
    }

    /// Tabulated Φ; abscissae must be strictly increasing and finite.
    /// Monotonicity of the values is not required here, it is checked by
    /// assumption validation.
    pub fn tabulated(r: Vec<f64>, values: Vec<f64>, m: f64) -> Result<Self> {
        if r.len() < 2 || r.len() != values.len() {
            return Err(Error::domain(
                "tabulated Φ",
                format!("need ≥ 2 matching samples, got {} / {}", r.len(), values.len()),
            ));
        }
        if r.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tabulated Φ samples"));
        }
        if r.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("tabulated Φ", "abscissae must be strictly increasing"));
        }
        Ok(PhiSpec::Tabulated { r, values, m })
    }

    /// Growth exponent `m` (so `m̃ = m - 1`).
    pub fn exponent(&self) -> f64 {
        match self {
            PhiSpec::PowerLaw { m } | PhiSpec::Truncated { m, .. } | PhiSpec::Tabulated { m, .. } => *m,
        }
    }

    /// Nominal `c̄` in `c̄|r|^{m-1} ≤ Φ'(r)`: `m` for the power law. `None`
    /// where it has to be measured (tabulated) or fails (truncated).
    pub fn nominal_cbar(&self) -> Option<f64> {
        match self {
            PhiSpec::PowerLaw { m } => Some(*m),
            // Φ' is bounded at infinity, so c̄|r|^(m-1) ≤ Φ' fails for m > 1.
            PhiSpec::Truncated { m, .. } | PhiSpec::Tabulated { m, .. } if *m > 1.0 => Some(0.0),
            _ => None,
        }
    }

    pub fn eval<T: Scalar>(&self, r: T) -> T {
        match self {
            PhiSpec::PowerLaw { m } => power_value(*m, r),
            PhiSpec::Truncated { m, cap } => {
                let (m, cap) = (*m, *cap);
                let s = threshold(m, cap);
                let a = r.abs();
                if a <= T::of(s) {
                    power_value(m, r)
                } else {
                    let tail = T::of(s.powf(m)) + T::of(cap) * (a - T::of(s));
                    if r < T::zero() {
                        -tail
                    } else {
                        tail
                    }
                }
            }
            PhiSpec::Tabulated { r: knots, values, .. } => {
                let (j, slope) = segment(knots, values, r.as_f64());
                T::of(values[j]) + T::of(slope) * (r - T::of(knots[j]))
            }
        }
    }

    pub fn derivative<T: Scalar>(&self, r: T) -> T {
        match self {
            PhiSpec::PowerLaw { m } => power_derivative(*m, r),
            PhiSpec::Truncated { m, cap } => power_derivative(*m, r).min(T::of(*cap)),
            PhiSpec::Tabulated { r: knots, values, .. } => T::of(segment(knots, values, r.as_f64()).1),
        }
    }

    /// Lipschitz truncation: the primitive of `min{Φ'(s), n}` from 0.
    pub fn truncate(&self, n: f64) -> Result<PhiSpec> {
        if !(n > 0.0) {
            return Err(Error::domain("truncation level", format!("need n > 0, got {n}")));
        }
        Ok(match self {
            PhiSpec::PowerLaw { m } => PhiSpec::Truncated { m: *m, cap: n },
            PhiSpec::Truncated { m, cap } => PhiSpec::Truncated {
                m: *m,
                cap: cap.min(n),
            },
            PhiSpec::Tabulated { r, values, m } => truncate_table(r, values, *m, n),
        })
    }
}

fn power_value<T: Scalar>(m: f64, r: T) -> T {
    if m == 1.0 {
        r
    } else if m == 2.0 {
        r.abs() * r
    } else {
        r.abs().powf(T::of(m - 1.0)) * r
    }
}

fn power_derivative<T: Scalar>(m: f64, r: T) -> T {
    if m == 1.0 {
        T::one()
    } else if m == 2.0 {
        T::of(2.0) * r.abs()
    } else {
        T::of(m) * r.abs().powf(T::of(m - 1.0))
    }
}

/// `|s|` beyond which `m|s|^{m-1}` exceeds `cap`.
fn threshold(m: f64, cap: f64) -> f64 {
    if m == 1.0 {
        if cap >= 1.0 {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        (cap / m).powf(1.0 / (m - 1.0))
    }
}

/// Index of the segment containing `r` and its slope. Knots belong to the
/// segment on their right, except the last knot.
fn segment(knots: &[f64], values: &[f64], r: f64) -> (usize, f64) {
    let last = knots.len() - 2;
    let j = knots.partition_point(|&k| k <= r).saturating_sub(1).min(last);
    let slope = (values[j + 1] - values[j]) / (knots[j + 1] - knots[j]);
    (j, slope)
}

fn truncate_table(knots: &[f64], values: &[f64], m: f64, n: f64) -> PhiSpec {
    let mut r: Vec<f64> = knots.to_vec();
    if let Err(pos) = r.binary_search_by(|k| k.total_cmp(&0.0)) {
        r.insert(pos, 0.0);
    }
    let slopes: Vec<f64> = r
        .windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            segment(knots, values, mid).1.min(n)
        })
        .collect();
    let zero = r.iter().position(|&k| k == 0.0).expect("0 inserted");
    let mut out = vec![0.0; r.len()];
    for j in zero + 1..r.len() {
        out[j] = out[j - 1] + slopes[j - 1] * (r[j] - r[j - 1]);
    }
    for j in (0..zero).rev() {
        out[j] = out[j + 1] - slopes[j] * (r[j + 1] - r[j]);
    }
    PhiSpec::Tabulated { r, values: out, m }
}
