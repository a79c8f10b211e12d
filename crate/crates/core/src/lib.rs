//! Minimizing-movement schemes for one-dimensional gradient flows
//! `∂ρ/∂t = div(ρ ∇c*[∇(F'(ρ) + V)])` with no-flux boundary, plus the
//! reference solvers and diagnostics used to check them.

pub mod convex;
pub mod density;
pub mod diagnostics;
pub mod jko;
pub mod model;
pub mod numerics;
pub mod refsolve;
pub mod transport;

pub use model::Model;
