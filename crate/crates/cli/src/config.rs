use std::path::{Path, PathBuf};

use serde::Deserialize;

use gridflex_core::harness::{CaseId, FlexPolicy, ScenarioId, ScenarioLoad, StudyConfig};
use gridflex_core::opf::{CostWeights, OpfSettings, SchedulingCost};
use gridflex_core::PriceSet;

use crate::Failure;

fn default_cases() -> Vec<CaseId> {
    CaseId::ALL.to_vec()
}

fn default_scenarios() -> Vec<ScenarioId> {
    ScenarioId::ALL.to_vec()
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub nodes: usize,
    pub feeders: usize,
}

/// Declarative description of a run. Relative paths resolve against the config file's
/// directory.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Network file; when absent a synthetic network is generated from `seed`.
    pub network: Option<PathBuf>,
    /// Per-transformer measurements; required with `network`.
    pub measurements: Option<PathBuf>,
    /// Feeder-head measurements; derived by power flow on the true loads when absent.
    pub feeder_heads: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_cases")]
    pub cases: Vec<CaseId>,
    #[serde(default = "default_scenarios")]
    pub scenarios: Vec<ScenarioId>,
    pub seed: Option<u64>,
    pub synthetic: Option<SyntheticSpec>,
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

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::input(format!("cannot read config {}: {e}", path.display())))?;
        let mut config: RunConfig =
            toml::from_str(&text).map_err(|e| Failure::input(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut config.network, &mut config.measurements, &mut config.feeder_heads, &mut config.output_dir]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        config.check()?;
        Ok(config)
    }

    fn check(&self) -> Result<(), Failure> {
        for p in [&self.network, &self.measurements, &self.feeder_heads].into_iter().flatten() {
            if !p.exists() {
                return Err(Failure::input(format!("referenced file {} does not exist", p.display())));
            }
        }
        match (&self.network, &self.measurements) {
            (Some(_), None) => return Err(Failure::input("`measurements` is required with `network`")),
            (None, Some(_)) => return Err(Failure::input("`measurements` given without `network`")),
            (None, None) if self.synthetic.is_none() || self.seed.is_none() => {
                return Err(Failure::input("without `network`, both `synthetic` and `seed` are required"));
            }
            _ => {}
        }
        if self.network.is_none() && self.feeder_heads.is_some() {
            return Err(Failure::input("`feeder_heads` given without `network`"));
        }
        if self.cases.is_empty() || self.scenarios.is_empty() {
            return Err(Failure::input("`cases` and `scenarios` must not be empty"));
        }
        self.study().validate().map_err(|e| Failure::input(e.to_string()))
    }

    pub fn study(&self) -> StudyConfig {
        StudyConfig {
            weights: self.weights,
            prices: self.prices,
            flex: self.flex,
            scheduling_cost: self.scheduling_cost,
            scenario_load: self.scenario_load,
            opf: self.opf,
        }
    }
}
