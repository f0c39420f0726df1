//! Numerical laboratory for the stochastic porous medium equation
//! `du = [Δ(Φ(u)) + εΔu + H_t u + f] dt + σ ∂_i u ∘ dβ̃^i + Σ_k (ν^k u + g^k) dw^k`
//! on a box with zero Dirichlet data.

pub mod config;
pub mod error;
pub mod estimators;
pub mod func;
pub mod grid;
pub mod linalg;
pub mod model;
pub mod moser;
pub mod noise;
pub mod phi;
pub mod scalar;
pub mod solver;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use estimators::{
    epsilon_sweep, gronwall_check, ito_identity_residual, mc_moment, monotonicity_check, smoothing_rate_fit,
    viscosity_convergence, McEstimate, RateFit, Statistic,
};
pub use func::{BoxDomain, FnKind, FnSpec, TimeFn};
pub use grid::{Field, Grid};
pub use model::{
    as_nondegenerate, stratonovich_to_ito, validate_assumptions, AssumptionReport, CoefficientSet, Exponent,
    InitialData, NoiseConvention, NondegenerateCoefficients, ProblemSpec,
};
pub use moser::{iteration_constants, smoothing_exponent, IterationConstants, LadderTable, MoserLadder};
pub use noise::{NoiseIncrements, NoiseModel};
pub use phi::PhiSpec;
pub use scalar::Scalar;
pub use solver::{galerkin_project, newton_solve, solve_path, Scheme, SolverConfig, Stepper, Trajectory};

pub type Grid64 = Grid<f64>;
pub type Grid32 = Grid<f32>;
pub type Field64 = Field<f64>;
pub type Field32 = Field<f32>;
pub type Trajectory64 = Trajectory<f64>;

/// Ladder in exact rational arithmetic.
pub type ExactLadder = MoserLadder<num_rational::BigRational>;
pub type FloatLadder = MoserLadder<f64>;
