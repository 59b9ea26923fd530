//! Learning the Δ-lag flow map of ODE systems with a residual network.
//!
//! A fully connected ReLU network `N(·; Θ)` is wrapped by an identity skip,
//! `p_out = p_in + N(p_in; Θ)`, and trained by per-sample SGD on pairs
//! `(x(t0), x(t0 + Δ))` whose targets come from one step of forward Euler,
//! Heun's RK2 or the 3/8-rule RK4. A refined-mesh RK4 (`h = Δ/1000`)
//! supplies reference states for evaluation.
//!
//! Modules, bottom up:
//!
//! - [`system`]: benchmark systems, autonomization and coordinate scaling
//! - [`integrators`]: one-step schemes and the refined reference stepper
//! - [`dataset`]: learning-set generation and its CSV/JSON encoding
//! - [`network`]: the core network, backpropagation and SGD updates
//! - [`training`]: the epoch loop and multi-seed averaging
//! - [`metrics`]: error functionals and log-log order fitting
//! - [`rollout`]: trajectories from repeated one-step application
//! - [`experiment`]: declarative experiment configs and their runners

pub mod dataset;
pub mod error;
pub mod experiment;
pub mod integrators;
pub mod metrics;
pub mod network;
pub mod rollout;
pub mod system;
pub mod training;

pub use dataset::{DataPair, LearningSet, TargetKind};
pub use error::{Error, Result};
pub use integrators::StepScheme;
pub use metrics::ErrorReport;
pub use network::{Architecture, NetParams};
pub use rollout::Trajectory;
pub use system::{Domain, OdeSystem};
pub use training::{TrainConfig, TrainRecord};
