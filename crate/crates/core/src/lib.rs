//! Coupled epidemic and selfish-response model: equilibria, stability,
//! Filippov-aware trajectory integration, stochastic agent simulation and
//! contact-trace replay.

pub mod basin;
pub mod diagnostics;
pub mod equilibrium;
pub mod integrator;
pub mod model;
pub mod output;
pub mod par;
pub mod stochastic;
pub mod trace;

pub use equilibrium::{Equilibrium, EquilibriumKind};
pub use integrator::{integrate, IntegratorConfig, Trajectory};
pub use model::{ModelParams, ResponseSpec, State};
