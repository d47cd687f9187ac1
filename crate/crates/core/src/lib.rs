//! Stationary averages of stochastic differential equations on the torus.
//!
//! The crate simulates `dX = f(X) dt + g(X) dW` on `[0, 2π)^d` with weak
//! one-step schemes, estimates `∫φ dμ` by time averages along a single
//! trajectory, and checks the observed convergence rates against spectral
//! reference solutions of the stationary Fokker-Planck and Poisson equations.

pub mod error;
pub mod estimators;
pub mod experiments;
pub mod fit;
pub mod noise;
pub mod observable;
pub mod oracle;
pub mod schemes;
pub mod torus;

pub use error::{Error, Result};
pub use estimators::{EstimatorResult, TrajectorySpec};
pub use noise::{NoiseKind, NoiseModel, RngStream};
pub use observable::Observable;
pub use schemes::{SchemeConfig, SchemeKind, Stepper};
pub use torus::{CatalogProblem, SdeProblem, TorusPoint};
