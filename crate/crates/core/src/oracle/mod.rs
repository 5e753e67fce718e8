//! Slow reference computations used to check the closed forms.
//!
//! Nothing in here is on the localization path. The quadrature engine
//! integrates the range-factor messages directly (either the exact factor or
//! its Taylor-substituted version), the EKF reference evaluates the filter
//! equations in exact rational arithmetic, and the trilateration solver is a
//! plain Gauss-Newton least-squares fit.

mod ekf;
mod printed;
mod quadrature;
mod trilateration;

pub use ekf::{ekf_predict_exact, ekf_update_exact};
pub use printed::{printed_agent_coefficients, printed_anchor_coefficients};
pub use quadrature::{
    integrate_agent_message, integrate_anchor_message, Bounds, IntegrandMode, QuadratureSpec,
    MIN_NODES,
};
pub use trilateration::{trilaterate, MAX_ITERATIONS, STEP_TOLERANCE};
