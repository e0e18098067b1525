//! Planning of spatially separated, unidirectional drone-delivery route
//! networks ("tubes") over a discretized 3D urban environment.
//!
//! The pipeline: a [`scenario::Scenario`] describes the world (vertiports,
//! obstacle prisms, ground-risk polygons, a flyable altitude band) and the
//! delivery demand. [`grid::discretize`] turns it into an immutable voxel
//! [`grid::GridGraph`]. [`prioritizer`] orders the demand into one or more
//! planning sequences, [`planner::plan_network`] plans each sequence with the
//! any-angle single-route search in [`pathfinder`], reserving path and buffer
//! cells as it goes, and keeps the cheapest feasible network. [`oracle`]
//! holds exact small-instance solvers used to verify near-optimality.

pub mod geometry;
pub mod grid;
pub mod oracle;
pub mod pathfinder;
pub mod planner;
pub mod prioritizer;
pub mod scenario;

pub use grid::{discretize, Cell, CostBreakdown, GridGraph, OccupancyOverlay, Route};
pub use pathfinder::{find_path, CostWeights, OdEndpoints};
pub use planner::{plan_network, plan_sequence, PlannerConfig, RouteNetwork};
pub use prioritizer::{generate_sequences, ODSequence, PrioritySpec};
pub use scenario::{load_benchmark_map, load_scenario, ODRequest, Scenario, Urgency};
