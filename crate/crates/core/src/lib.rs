//! Radial MV distribution networks: data model, measurement series, exact power flow, the
//! convex branch-flow OPF used to clear a local flexibility market, and the case harness that
//! compares market designs over a day.

pub mod harness;
pub mod network;
pub mod opf;
pub mod powerflow;
pub mod timeseries;

pub use network::{
    FeederMap, LineSegment, NetworkError, NetworkModel, Node, NodeKind, OperatingLimits, RadialNetwork,
};
pub use powerflow::{
    realized_costs, solve_sweep, NodePower, PowerFlowError, PowerFlowResult, PriceSet, RealizedCosts,
};
pub use timeseries::{FeederHeadSeries, MeasurementSeries, PowerSeries, SeriesError};
