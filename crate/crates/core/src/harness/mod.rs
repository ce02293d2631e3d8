//! Day-long market case studies on a radial network.
//!
//! * Case 0: no market; the power flow runs on the true loads.
//! * Case 1: market without transformer monitoring; the OPF sees feeder-head measurements
//!   allocated by transformer rating.
//! * Case 2: market with monitoring; the OPF sees the true loads.
//!
//! Costs are always realized by a power flow on the true loads plus the cleared set-points.

mod config;
mod report;
mod run;
mod synthetic;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::NetworkError;
use crate::timeseries::SeriesError;

pub use config::{CaseConfig, FlexPolicy, ScenarioLoad, StudyConfig};
pub use report::{
    compare_cases, percent_decrease, CaseReport, Comparison, ComparisonRow, Deltas, DispatchSummary, OpfStepStats,
    ReportHeader,
    StepRecord, Totals,
};
pub use run::{apply_scenario_to_heads, derive_feeder_heads, run_case, CaseInputs};
pub use synthetic::{generate_synthetic_network, start_of_day, Cable, SyntheticCase, CABLES, RATINGS_KVA};

/// Length of one measurement interval in hours.
pub const STEP_HOURS: f64 = 1.0 / 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum CaseId {
    NoMarket = 0,
    MarketAllocated = 1,
    MarketMonitored = 2,
}

impl CaseId {
    pub const ALL: [CaseId; 3] = [CaseId::NoMarket, CaseId::MarketAllocated, CaseId::MarketMonitored];
}

impl TryFrom<u8> for CaseId {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, String> {
        match v {
            0 => Ok(CaseId::NoMarket),
            1 => Ok(CaseId::MarketAllocated),
            2 => Ok(CaseId::MarketMonitored),
            _ => Err(format!("case id must be 0, 1 or 2, got {v}")),
        }
    }
}

impl From<CaseId> for u8 {
    fn from(c: CaseId) -> u8 {
        c as u8
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "case {}", *self as u8)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum ScenarioId {
    Base = 1,
    Electrified = 2,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 2] = [ScenarioId::Base, ScenarioId::Electrified];
}

impl TryFrom<u8> for ScenarioId {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, String> {
        match v {
            1 => Ok(ScenarioId::Base),
            2 => Ok(ScenarioId::Electrified),
            _ => Err(format!("scenario id must be 1 or 2, got {v}")),
        }
    }
}

impl From<ScenarioId> for u8 {
    fn from(s: ScenarioId) -> u8 {
        s as u8
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "scenario {}", *self as u8)
    }
}

/// Why a step could not be completed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StepFailure {
    Infeasible,
    MaxIterations,
    Numerical,
    PowerFlow,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error("no measurement series for node {0}")]
    MissingSeries(String),
    #[error("measurement series {0} does not belong to a transformer node")]
    UnknownSeries(String),
    #[error("no feeder-head series for feeder {0}")]
    MissingHead(String),
    #[error("feeder-head series {0} does not match a feeder")]
    UnknownHead(String),
    #[error("{case}, step {step} ({timestamp}): {failure:?}: {reason}")]
    Step {
        case: CaseId,
        step: usize,
        timestamp: String,
        failure: StepFailure,
        reason: String,
    },
    #[error("cannot compare reports: {0}")]
    Mismatch(String),
    #[error("invalid synthetic network size: {0}")]
    InvalidSize(String),
}
