//! Privacy-constrained strategic communication of a jointly Gaussian
//! source `X` and private attribute `θ` under MSE distortion.
//!
//! * [`model`]: source statistics and exact MMSE algebra.
//! * [`equilibrium`]: closed-form equilibria for the noiseless, compression
//!   and Gaussian-channel settings.
//! * [`curves`]: privacy/distortion and rate/distortion sweeps with shape checks.
//! * [`montecarlo`]: seeded simulation of encoder/decoder chains.
//! * [`oracle`]: brute-force constrained search used to cross-check the solvers.

pub mod curves;
pub mod equilibrium;
pub mod error;
pub mod model;
pub mod montecarlo;
pub mod oracle;

pub use equilibrium::{
    solve, solve_setting1, solve_setting2, solve_setting3, ChannelSpec, EncoderPolicy,
    EquilibriumSolution, Scenario, Setting,
};
pub use error::{Error, Result};
pub use model::{gaussian_conditional_entropy, privacy_bounds, validate_model, PrivacyBounds, SourceModel};
