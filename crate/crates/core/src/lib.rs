//! Wall-clock simulation of a drifting singlet-triplet qubit.
//!
//! The crate is organised bottom-up:
//!
//! - [`noise`]: sums of Ornstein-Uhlenbeck processes on the charge and magnetic
//!   axes, with exact fast-forwarding and continuous/aliased spectra.
//! - [`qubit`]: the exchange-plus-gradient Hamiltonian, closed-form step
//!   unitaries and time-ordered propagation of sampled control timelines.
//! - [`pulse`]: Gaussian-smoothed pulse rendering, simplex pulse optimisation of
//!   the Clifford generators and the 24-element Clifford quotient group.
//! - [`fid`]: analytic free-induction-decay envelopes, T2* solving, closed-form
//!   power calibration and Monte Carlo cross-checks.
//! - [`rb`]: circuit sampling, wall-clock pass execution with SPAM fast-forward
//!   and the RB decay fit.
//! - [`stats`]: eCDFs, two-sample K-S distances, percentile thresholds and
//!   type I/II error grids.
//! - [`attribution`]: correlated re-execution under component masks and
//!   sorted-percentile bootstrap curves.

pub mod attribution;
pub mod error;
pub mod fid;
pub mod noise;
pub mod pulse;
pub mod qubit;
pub mod rb;
pub mod seeds;
pub mod stats;

pub use error::{Error, Result};
