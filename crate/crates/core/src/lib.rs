pub mod artifacts;
pub mod belief;
pub mod bench;
pub mod config;
pub mod environment;
pub mod error;
pub mod executor;
pub mod geometry;
pub mod linalg;
pub mod metric;
pub mod planner;
pub mod propagation;
pub mod sampling;
pub mod system;
pub mod validity;
