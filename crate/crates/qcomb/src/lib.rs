//! Spectral and transport observables for continuous-time quantum walks on
//! random comb graphs: the graph is a spine (a line) with a half-infinite
//! tooth attached independently at each site with probability `1 - p`.
//!
//! The crate covers
//! - random comb generation, run statistics and k-chain classification ([`comb`]),
//! - the binary-chain Hamiltonian on the spine, its spectral flow in the
//!   disorder strength and the E>4 counting formula ([`chainspec`]),
//! - normalizable E>4 eigenstates with their tooth tails ([`boundstates`]),
//! - the E<4 scattering matrix, its column states and phase-shift
//!   eigensystem ([`smatrix`]),
//! - Monte Carlo Lyapunov exponents and integrated densities of states via
//!   Riccati recursions, with transfer-matrix and Thouless cross-checks and
//!   the small-energy scaling limit ([`riccati`]),
//! - localization and escape probabilities for a walker started on the
//!   spine, with an independent time-evolution oracle ([`diffusion`]).
//!
//! All ensemble operations derive per-sample RNG streams from a single
//! master seed, so results are reproducible across runs and thread counts.

pub mod boundstates;
pub mod chainspec;
pub mod comb;
pub mod diffusion;
mod error;
pub mod linalg;
pub mod quad;
pub mod riccati;
pub mod rng;
pub mod smatrix;

pub use error::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Largest energy of a normalizable state, `E_max = 16/3` (reached at
/// tooth decay rate `sigma = ln 3`).
pub const E_MAX: f64 = 16.0 / 3.0;

/// Upper end of the tooth decay-rate interval, `ln 3`.
pub const SIGMA_MAX: f64 = 1.0986122886681098;
