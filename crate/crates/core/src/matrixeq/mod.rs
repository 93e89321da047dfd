//! Dense matrix equations at reduced order: Lyapunov, the generalized
//! continuous-time Riccati equation, and Bernoulli-based initial feedback.

mod bernoulli;
mod care;
mod lyap;

pub use bernoulli::{bernoulli_stabilize, InitialFeedback};
pub use care::{care_residual, care_residual_bound, care_solve, CareSolution, IMAG_AXIS_TOL};
pub use lyap::{lyap_residual, lyap_solve, symmetrize};
