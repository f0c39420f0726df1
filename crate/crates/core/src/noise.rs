//! Reproducible Wiener increments from a counter-based generator.
//!
//! Each `(seed, path)` pair selects a ChaCha key/stream; the draw for
//! `(step, channel)` sits at a fixed word position of that stream, so any
//! increment can be regenerated independently of evaluation order.

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Stream tags separating Wiener increments from initial-data draws.
const WIENER_TAG: u64 = 0;
const INITIAL_TAG: u64 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseModel {
    /// Transport channels `β̃^1..β̃^d` (0 or `d`).
    pub d_transport: usize,
    /// Multiplicative/additive channels `w^1..w^K`.
    pub k_noise: usize,
    pub seed: u64,
    pub dt: f64,
    pub n_steps: usize,
}

impl NoiseModel {
    /// Model for horizon `t_final`; `dt` must divide it to within `1e-9`
    /// relative, and is then snapped so that `dt * n_steps == t_final`.
    pub fn new(d_transport: usize, k_noise: usize, seed: u64, dt: f64, t_final: f64) -> Result<Self> {
        if !(dt > 0.0) || !(t_final > 0.0) {
            return Err(Error::domain("time step", format!("dt = {dt}, T = {t_final}")));
        }
        let n_steps = (t_final / dt).round() as usize;
        if n_steps == 0 || (n_steps as f64 * dt - t_final).abs() > 1e-9 * t_final {
            return Err(Error::domain(
                "time step",
                format!("dt = {dt} does not divide T = {t_final}"),
            ));
        }
        Ok(NoiseModel {
            d_transport,
            k_noise,
            seed,
            dt: t_final / n_steps as f64,
            n_steps,
        })
    }

    pub fn channels(&self) -> usize {
        self.d_transport + self.k_noise
    }

    pub fn stream(&self, path_index: u64) -> IncrementStream {
        IncrementStream {
            rng: keyed(self.seed, path_index, WIENER_TAG),
            channels: self.channels(),
            d_transport: self.d_transport,
            std: self.dt.sqrt(),
            normal: Normal::standard(),
        }
    }

    /// Independent uniform bits for path-specific random initial data.
    pub fn initial_stream(&self, path_index: u64) -> InitialStream {
        InitialStream {
            rng: keyed(self.seed, path_index, INITIAL_TAG),
        }
    }
}

fn keyed(seed: u64, path: u64, tag: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    // 64-bit stream id: path in the high bits, tag in the lowest bit
    rng.set_stream((path << 1) | tag);
    rng
}

/// Open-interval uniform from the top 53 bits.
#[inline]
fn uniform(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Increments of one time step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NoiseIncrements {
    /// `Δβ̃^i`.
    pub transport: Vec<f64>,
    /// `Δw^k`.
    pub multiplicative: Vec<f64>,
}

impl NoiseIncrements {
    pub fn zero(d_transport: usize, k_noise: usize) -> Self {
        NoiseIncrements {
            transport: vec![0.0; d_transport],
            multiplicative: vec![0.0; k_noise],
        }
    }

    pub fn all_finite(&self) -> bool {
        self.transport.iter().chain(&self.multiplicative).all(|v| v.is_finite())
    }
}

pub struct IncrementStream {
    rng: ChaCha12Rng,
    channels: usize,
    d_transport: usize,
    std: f64,
    normal: Normal,
}

impl IncrementStream {
    /// Increments of step `step`; a pure function of `(seed, path, step)`.
    pub fn at(&mut self, step: usize) -> NoiseIncrements {
        // one 64-bit draw = two 32-bit words
        self.rng.set_word_pos(2 * (step as u128) * self.channels as u128);
        let mut out = NoiseIncrements::zero(self.d_transport, self.channels - self.d_transport);
        for c in 0..self.channels {
            let z = self.normal.inverse_cdf(uniform(self.rng.next_u64())) * self.std;
            if c < self.d_transport {
                out.transport[c] = z;
            } else {
                out.multiplicative[c - self.d_transport] = z;
            }
        }
        out
    }
}

pub struct InitialStream {
    rng: ChaCha12Rng,
}

impl InitialStream {
    /// `±1` with equal probability.
    pub fn sign(&mut self) -> f64 {
        if self.rng.next_u64() >> 63 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn uniform(&mut self) -> f64 {
        uniform(self.rng.next_u64())
    }
}
