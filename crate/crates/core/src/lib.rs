//! Simulation and epistemic verification laboratory for simultaneous
//! agreement under crash failures.
//!
//! The crate has four layers:
//!
//! - [`model`]: agents, values, crash adversaries, scenario enumeration and
//!   deterministic run generation;
//! - [`exchanges`]: the six information-exchange state machines (FloodSet,
//!   Counting, Counting with perfect recall, Vectorized, SendWaste, full
//!   information) and their standard decision rules;
//! - [`epistemics`]: a brute-force model checker over exhaustively
//!   enumerated run spaces — indistinguishability, `K_i`, `E_N`, `C_N`
//!   (fixpoint), `D_N`, and the knowledge-based decision program;
//! - [`analysis`]: cross-protocol experiments — agreement auditing,
//!   decision-time comparison, the waste oracle and resource measurement.
//!
//! [`verification`] drives the full machine-check of one configuration and
//! produces the serializable report the command-line front end emits.

pub mod analysis;
pub mod epistemics;
pub mod exchanges;
pub mod model;
pub mod verification;
