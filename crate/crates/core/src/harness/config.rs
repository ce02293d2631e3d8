use serde::{Deserialize, Serialize};

use crate::network::RadialNetwork;
use crate::opf::{CostWeights, FlexBounds, FlexRange, OpfSettings, SchedulingCost};
use crate::powerflow::PriceSet;

use super::{CaseId, HarnessError, ScenarioId};

/// Flexibility available at each transformer node as fractions of its kVA rating.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlexPolicy {
    /// Reduction of consumption (or injection) the node can supply, `p_min = -f * rating`.
    pub p_supply_fraction: f64,
    /// Additional consumption the node can absorb, `p_max = f * rating`.
    pub p_absorb_fraction: f64,
    /// Symmetric reactive range, `|q| <= f * rating`.
    pub q_fraction: f64,
}

impl FlexPolicy {
    pub fn validate(&self) -> Result<(), HarnessError> {
        for (name, f) in [
            ("p_supply_fraction", self.p_supply_fraction),
            ("p_absorb_fraction", self.p_absorb_fraction),
            ("q_fraction", self.q_fraction),
        ] {
            if !(f >= 0.0 && f.is_finite()) {
                return Err(HarnessError::Config(format!("flex.{name} must be nonnegative")));
            }
        }
        Ok(())
    }

    pub fn bounds(&self, network: &RadialNetwork) -> FlexBounds {
        FlexBounds(
            network
                .nodes()
                .iter()
                .map(|node| match node.rating_kva {
                    Some(kva) => {
                        let s = network.kw_to_pu(kva);
                        FlexRange {
                            p_min: -self.p_supply_fraction * s,
                            p_max: self.p_absorb_fraction * s,
                            q_min: -self.q_fraction * s,
                            q_max: self.q_fraction * s,
                        }
                    }
                    None => FlexRange::ZERO,
                })
                .collect(),
        )
    }
}

/// Constant load added to every transformer node in the electrified scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioLoad {
    pub add_kw: f64,
    pub power_factor: f64,
}

impl Default for ScenarioLoad {
    fn default() -> Self {
        Self {
            add_kw: 300.0,
            power_factor: 1.0,
        }
    }
}

/// Settings shared by every case and scenario of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub weights: CostWeights,
    pub prices: PriceSet,
    pub flex: FlexPolicy,
    #[serde(default)]
    pub scheduling_cost: SchedulingCost,
    #[serde(default)]
    pub scenario_load: ScenarioLoad,
    #[serde(default)]
    pub opf: OpfSettings,
}

impl StudyConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.weights
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        if !(self.weights.w_l > 0.0) {
            return Err(HarnessError::Config(
                "weights.w_l must be positive to keep the current relaxation exact".into(),
            ));
        }
        if !self.prices.is_valid() {
            return Err(HarnessError::Config("prices must be nonnegative".into()));
        }
        self.flex.validate()?;
        let s = &self.scenario_load;
        if !(s.add_kw.is_finite() && s.add_kw >= 0.0) {
            return Err(HarnessError::Config("scenario_load.add_kw must be nonnegative".into()));
        }
        if !(s.power_factor > 0.0 && s.power_factor <= 1.0) {
            return Err(HarnessError::Config("scenario_load.power_factor must lie in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn case(&self, case_id: CaseId, scenario_id: ScenarioId) -> CaseConfig {
        CaseConfig {
            case_id,
            scenario_id,
            weights: self.weights,
            prices: self.prices,
            flex: self.flex,
            scheduling_cost: self.scheduling_cost,
            scenario_add_kw: match scenario_id {
                ScenarioId::Base => 0.0,
                ScenarioId::Electrified => self.scenario_load.add_kw,
            },
            scenario_power_factor: self.scenario_load.power_factor,
            opf: self.opf,
        }
    }
}

/// Everything that determines one case report, echoed into its header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseConfig {
    pub case_id: CaseId,
    pub scenario_id: ScenarioId,
    pub weights: CostWeights,
    pub prices: PriceSet,
    pub flex: FlexPolicy,
    pub scheduling_cost: SchedulingCost,
    pub scenario_add_kw: f64,
    pub scenario_power_factor: f64,
    pub opf: OpfSettings,
}

impl CaseConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        StudyConfig {
            weights: self.weights,
            prices: self.prices,
            flex: self.flex,
            scheduling_cost: self.scheduling_cost,
            scenario_load: ScenarioLoad {
                add_kw: self.scenario_add_kw,
                power_factor: self.scenario_power_factor,
            },
            opf: self.opf,
        }
        .validate()
    }
}
