//! Three-layer ReLU networks under power-law initialization scalings.
//!
//! The crate trains `f(x) = (1/alpha) A relu(W2 relu(W1 x))` (biases folded
//! into the weight matrices) with full-batch gradient descent, measures how far
//! each layer moves from its initialization, and maps which initialization
//! exponents give linear, critical or condensed training dynamics.
//!
//! Modules, bottom up:
//! - [`scaling`]: power laws in the width, presets, the `(gamma2, gamma3)` coordinates
//! - [`model`]: network, loss, gradients, training, checkpoints
//! - [`data`]: the 1-d toy task and the IDX (MNIST) reader
//! - [`metrics`]: relative change, cosine geometry, condensation index
//! - [`experiment`]: width sweeps, slope fits, phase scans
//! - [`plot`]: dependency-free SVG output
//! - [`cli`]: the `relu-phase` command line

pub mod cli;
pub mod data;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod plot;
pub mod scaling;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use model::{init_network, init_network_seeded, Dataset, Network, Schedule, StepSize, StopReason, TrainRecord};
pub use scaling::{config_from_gammas, kappas, preset, HyperConfig, PhasePoint, PowerLaw, Preset};
