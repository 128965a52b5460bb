//! Simulated bifurcation for Ising ground states, with an exact reduction of
//! integer mean-variance portfolio selection to Ising form.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common `f64` and `f32` instantiations.

#![allow(clippy::needless_range_loop)]

pub mod bench;
pub mod encoding;
pub mod error;
pub mod fixtures;
pub mod ising;
pub mod markets;
pub mod sb;
pub mod scalar;

pub use encoding::{
    decode_spins, encode_weights, markowitz_to_ising, utility, EncodingMatrix, IsingReduction,
    MarkowitzProblem, WeightVector,
};
pub use error::{Error, Result};
pub use ising::{brute_force_ground_state, energy, GroundState, IsingModel, SpinVector};
pub use sb::{solve, SolverConfig, SolverResult, Xi0};
pub use scalar::Scalar;

pub type Ising64 = IsingModel<f64>;
pub type Ising32 = IsingModel<f32>;
pub type Markowitz64 = MarkowitzProblem<f64>;
pub type Markowitz32 = MarkowitzProblem<f32>;
pub type Reduction64 = IsingReduction<f64>;
pub type SolverResult64 = SolverResult<f64>;
pub type GroundState64 = GroundState<f64>;
pub type PriceSeries64 = markets::PriceSeries<f64>;
