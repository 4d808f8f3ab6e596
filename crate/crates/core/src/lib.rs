//! Greedy kernel surrogates for warm-starting implicit time integrators.
//!
//! A surrogate of the discrete one-step map `(dt, u_i) -> u_{i+1}` is trained
//! offline from precomputed implicit Euler trajectories with a vectorial kernel
//! orthogonal greedy algorithm (VKOGA). Online, the surrogate prediction is used
//! as the Newton starting point at every step, so the integrator still converges
//! to the same fixed point but typically needs fewer iterations.
//!
//! Module map:
//!
//! | Module | Purpose |
//! |--------|---------|
//! | [`kernel`] | Gaussian kernel, kernel matrices, kernel expansions |
//! | [`vkoga`] | Greedy center selection and Newton-basis training |
//! | [`model_select`] | Shape-parameter selection by k-fold cross validation |
//! | [`ode`] | Newton solver, implicit Euler steps, step initializers |
//! | [`burgers`] | Finite-volume Burgers test problem |
//! | [`pipeline`] | Offline/online phases, comparison runs, model files |
//! | [`config`] | Experiment configuration files and presets |
//! | [`report`] | CSV and table output for comparison runs |

pub mod burgers;
pub mod config;
pub mod error;
pub mod kernel;
pub mod model_select;
pub mod ode;
pub mod pipeline;
pub mod report;
pub mod vkoga;

pub use error::{Error, Result};
