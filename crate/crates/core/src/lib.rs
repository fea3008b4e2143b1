//! Recursive ensemble learning flows in reproducing-kernel function spaces.
//!
//! The ensemble evolves as a linear recursion with memory,
//!
//! ```text
//! F_{t+1} = θ_0 F_t + θ_1 F_{t-1} + … + θ_{m-1} F_{t-m+1} + η_t h_t
//! ```
//!
//! where each `h_t` is a base learner fitted to pseudo-residuals of the
//! current ensemble. With `m = 2` and `θ = (1, 1)` this is the Fibonacci
//! flow, whose companion matrix has the golden ratio as dominant eigenvalue.
//!
//! Module map:
//!
//! | module | contents |
//! |--------|----------|
//! | [`rkhs`] | kernels, random feature maps, function representation, inner products |
//! | [`spectral`] | companion matrices, roots, power envelopes, step schedules |
//! | [`learners`] | losses, pseudo-residuals, kernel / random-feature ridge learners |
//! | [`recursion`] | state update, α-coefficient matrix, orthogonalization, averaging |
//! | [`algorithms`] | training drivers for every ensemble variant |
//! | [`diagnostics`] | bound values, descent and convergence monitors, leave-one-out |
//! | [`odelimit`] | continuous-time limit and its discretizations |
//! | [`harness`] | synthetic data, config files, experiment orchestration, traces |

pub mod algorithms;
pub mod diagnostics;
mod error;
pub mod harness;
pub mod learners;
pub mod odelimit;
pub mod par;
pub mod recursion;
pub mod rkhs;
pub mod spectral;

pub use error::{Error, Result};

/// The golden ratio `(1 + √5) / 2`.
pub const PHI: f64 = 1.618_033_988_749_895;
