//! Minimax tests for detecting a planted elevated-mean submatrix in Gaussian
//! noise, with the separation-rate calculator, adaptive variants, an exact
//! second-moment lower bound, and a Monte Carlo harness.

pub mod adaptive;
pub mod cli;
pub mod detectors;
pub mod error;
pub mod gauss;
pub mod harness;
pub mod lower_bound;
pub mod model;
pub mod rates;
pub mod rng;
pub mod subsets;

pub use error::{Error, Result};
pub use model::{Matrix, Observation, PlantedMean, ProblemShape};
pub use rng::SeedSpec;
