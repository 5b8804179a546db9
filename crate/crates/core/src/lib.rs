//! Optimal consumption and investment when raising a past consumption peak or
//! lowering a past consumption valley carries a utility cost.
//!
//! The problem is solved in closed form through its convex dual. [`model`]
//! holds parameters and derived constants, [`dual`] evaluates the dual value
//! function, [`primal`] maps wealth back to controls, and [`simulate`] runs
//! Monte Carlo experiments on top of the feedback policy.

mod error;
pub mod dual;
pub mod model;
pub mod primal;
pub mod roots;
pub mod simulate;
pub mod stats;
pub mod verify;

pub use error::{AssumptionViolation, Error, ModelError, Result, SolveError};
