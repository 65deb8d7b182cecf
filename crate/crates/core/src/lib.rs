//! Resource allocation for interference channels.
//!
//! The crate covers the classical toolbox for scalar, parallel (multicarrier),
//! MISO and MIMO interference channels when interference is treated as noise:
//!
//! - [`channels`]: channel instances, seeded generation, SINR and rate evaluators.
//! - [`utilities`]: system utility functions and a finite-difference gradient oracle.
//! - [`power_control`]: max-min SINR, autonomous power control, QoS min-power
//!   feasibility, closed form and fixed-point iteration.
//! - [`waterfilling`]: water-filling best responses, rate-adaptive and
//!   fixed-margin iterative water-filling games, convergence certificates.
//! - [`wsrm`]: weighted sum-rate maximization (interference pricing, successive
//!   convex approximation, WMMSE, cyclic gradient projection for MISO).
//! - [`rate_region`]: two-user rate regions, time-sharing hulls, convexity and
//!   FDMA optimality checks, MISO Pareto boundary.
//! - [`alignment`]: linear interference alignment and its feasibility bounds.
//!
//! Noise power is normalized to one everywhere and rates are in bits.

pub mod alignment;
pub mod channels;
pub mod error;
pub mod linalg;
pub mod power_control;
pub mod rate_region;
pub mod trace;
pub mod utilities;
pub mod waterfilling;
pub mod wsrm;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use trace::{SolverTrace, Termination};

/// Dense complex matrix used for MIMO channels and beamformers.
pub type CMatrix = nalgebra::DMatrix<Complex64>;
/// Dense complex column vector used for MISO channels and beamformers.
pub type CVector = nalgebra::DVector<Complex64>;
