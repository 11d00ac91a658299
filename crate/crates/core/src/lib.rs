//! Design and analysis toolkit for tunable-cavity QED circuits built from two
//! inductively coupled rf SQUIDs: a flux-tunable lumped-element readout cavity
//! and an rf SQUID phase qubit.
//!
//! All quantities inside the library are SI (rad/s, H, F, J, A). Conversion to
//! the GHz / nH / pF / µA units used in configuration files happens in
//! [`config`] and at the command-line boundary.
//!
//! Module map:
//!
//! - [`squid`]: flux quantization, branch tracking, plasma frequencies.
//! - [`potential`]: reduced single-phase potentials and well metrics.
//! - [`levels`]: finite-difference diagonalization of the qubit well.
//! - [`coupling`]: tunable inductive coupling, dispersive shifts, normal modes.
//! - [`loss`]: Purcell, bias-line and dielectric decay budgets.
//! - [`readout`]: notch line shape, tunneling-readout flux optimization, SNR.
//! - [`schedule`]: static vs. dynamic cavity-flux schedules.
//! - [`fit`]: least-squares parameter extraction and flux-axis calibration.
//! - [`config`], [`io`]: design and schedule files, CSV tables.

pub mod coherence;
pub mod config;
pub mod constants;
pub mod coupling;
pub mod eigen;
mod error;
pub mod fit;
pub mod io;
pub mod levels;
pub mod loss;
pub mod params;
pub mod potential;
pub mod readout;
pub mod schedule;
pub mod squid;

pub use config::DesignPreset;
pub use error::{Error, ErrorClass, Result};
pub use params::{CircuitParams, Flavor, FluxBias, JunctionParams};
pub use squid::{SquidBranch, Stability};
