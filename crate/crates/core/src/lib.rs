//! Search-and-detect planning for a camera-equipped UAV: geometry, coverage
//! bookkeeping, a POMDP model of the search task, an online belief-tree
//! solver, a simulated world and the mission runners that tie them together.

pub mod coverage;
pub mod error;
pub mod geo;
pub mod metrics;
pub mod mission;
pub mod model;
pub mod scenario;
pub mod solver;
pub mod stats;
pub mod world;
