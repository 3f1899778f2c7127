//! Randomized stochastic gradient schemes for stochastic nonconvex, possibly nonsmooth,
//! potential games.
//!
//! The crate provides:
//!
//! * strategy profiles and box constraint sets ([`sets`]),
//! * counter-based reproducible random streams ([`rng`]),
//! * game models and two benchmark games ([`games`]),
//! * randomized smoothing and stationarity residuals ([`smoothing`], [`metrics`]),
//! * the four solvers: RSG, RS-RSG, biased RS-RSG and the lower-level SA routine ([`solvers`]),
//! * a configuration-driven experiment harness ([`harness`]).

pub mod error;
pub mod games;
pub mod harness;
pub mod metrics;
pub mod rng;
pub mod sets;
pub mod smoothing;
pub mod solvers;

pub use error::{Error, Result};
pub use games::{
    cournot::{CournotGame, CournotPotential},
    hierarchical::{HierGame, HierPotential},
    ExactFollower, Game, HierarchicalGame, NonsmoothGame, Players, Potential, SmoothGame,
};
pub use metrics::ResidualReport;
pub use rng::{OutputDistribution, Purpose, RandomStream, StreamKey};
pub use sets::{BoxSet, Partition, StrategyProfile};
pub use smoothing::PiecewiseLinear1D;
pub use solvers::{RunRecord, SampleCounts, SolverConfig, TracePoint};
