//! Analytical pipeline for time-delay reservoir computers: kernel equilibria
//! and stability, discrete and continuous simulation, the VAR(1) surrogate,
//! closed-form memory capacity and capacity-driven architecture search.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod jet;
pub mod kernels;
pub mod linalg;
pub mod optimize;
pub mod readout;
pub mod reservoir;
pub mod setup;
pub mod tasks;
pub mod varmodel;

pub use error::{Error, Result};
pub use kernels::{Certificate, Equilibrium, Kernel};
pub use linalg::{LyapunovMethod, Matrix, Vector};
pub use readout::{CapacityReport, McOutcome, McSettings, SimModel};
pub use reservoir::{InputMask, NeuronLayer, ReservoirConfig};
pub use setup::{OperatingPoint, Setup};
pub use tasks::{MemoryTask, TaskStatistics};
pub use varmodel::{QPolynomial, VarApprox};
