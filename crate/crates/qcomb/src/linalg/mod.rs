//! Small dedicated solvers for the matrices that appear on the spine:
//! real symmetric tridiagonal (plus periodic corner) eigenproblems and
//! complex symmetric tridiagonal (plus corner) linear systems.

mod ctridiag;
mod tridiag;

pub use ctridiag::{CTridiagPeriodic, CTriLU};
pub use tridiag::SymTridiagPeriodic;
