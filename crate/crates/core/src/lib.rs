//! Joint user scheduling and beamforming for the downlink of multicell
//! joint-transmission networks.
//!
//! The crate is organised bottom-up:
//!
//! * [`scenario`] draws the network geometry and the statistical channel model.
//! * [`phy`] holds SINR, rate and per-BS power accounting plus QoS targets.
//! * [`conic`] is the convex-subproblem interface (linear objective, linear and
//!   second-order-cone constraints) with a Clarabel-backed solver.
//! * [`duality`] implements the virtual-uplink machinery: weighting matrix,
//!   MMSE receivers, both power mappings and the per-BS multiplier update.
//! * [`sca`], [`exhaustive`] and [`zfbf`] are the three schedulers.

pub mod conic;
pub mod duality;
mod error;
pub mod exhaustive;
pub mod linalg;
pub mod phy;
pub mod sca;
pub mod scenario;
pub mod schedule;
pub mod zfbf;

pub use error::{Error, Result};
pub use phy::{RateTargets, ValidationReport};
pub use scenario::{ChannelSet, NetworkConfig, UserPlacement};
pub use schedule::{ScheduleSolution, TraceRow};

/// Complex baseband sample type used throughout.
pub type C64 = num_complex::Complex64;
