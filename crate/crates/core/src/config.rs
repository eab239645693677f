//! TOML configuration shared by the command-line tools.
//!
//! ```toml
//! [radar]
//! pulses = 256
//! [dhdc]
//! frames = 300
//! [lcb]
//! w_db_above_floor = 14.0
//! [plan]
//! modes = ["MM", "NTM", "MM_LCB"]
//! seeds = [1, 2, 3]
//! ```
//!
//! Every section and key is optional; unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cvnet::{LcbPlacement, NetConfig, TrainConfig};
use crate::detector::CfarConfig;
use crate::dhdc::DhdcParams;
use crate::error::{Error, Result};
use crate::harness::{EvalConfig, ExperimentPlan, Mode};
use crate::lcb::{LcbParams, DEFAULT_EPSILON};
use crate::signal::RadarConfig;

/// LCB junction. `w` (linear amplitude) wins over `w_db_above_floor`,
/// which is measured against the RDM noise power of the `dhdc` section.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LcbSection {
    pub w: Option<f64>,
    pub w_db_above_floor: f64,
    pub epsilon: f64,
}

impl Default for LcbSection {
    fn default() -> Self {
        Self {
            w: None,
            w_db_above_floor: 14.0,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetSection {
    pub depth: usize,
    pub base_channels: usize,
    pub kernel: usize,
    pub lcb_placement: LcbPlacement,
    pub patch: [usize; 2],
}

impl Default for NetSection {
    fn default() -> Self {
        let n = NetConfig::default();
        Self {
            depth: n.depth,
            base_channels: n.base_channels,
            kernel: n.kernel,
            lcb_placement: n.lcb_placement,
            patch: n.patch,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlanSection {
    pub modes: Vec<Mode>,
    pub seeds: Vec<u64>,
    pub alpha: f64,
    pub eval: EvalConfig,
}

impl Default for PlanSection {
    fn default() -> Self {
        let p = ExperimentPlan::default();
        Self {
            modes: p.modes,
            seeds: p.seeds,
            alpha: p.alpha,
            eval: p.eval,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CliConfig {
    pub radar: RadarConfig,
    pub dhdc: DhdcParams,
    pub lcb: LcbSection,
    pub cfar: CfarConfig,
    pub net: NetSection,
    pub train: TrainConfig,
    pub plan: PlanSection,
}

impl CliConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let c: CliConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_text(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn lcb_params(&self) -> Result<LcbParams> {
        let w = match self.lcb.w {
            Some(w) => w,
            None => LcbParams::from_db_above_floor(self.lcb.w_db_above_floor, self.dhdc.rdm_noise_power)?.w,
        };
        LcbParams::new(w, self.lcb.epsilon)
    }

    pub fn net_config(&self, use_lcb: bool) -> Result<NetConfig> {
        let n = NetConfig {
            depth: self.net.depth,
            base_channels: self.net.base_channels,
            kernel: self.net.kernel,
            use_lcb,
            lcb: self.lcb_params()?,
            lcb_placement: self.net.lcb_placement,
            patch: self.net.patch,
        };
        n.validate()?;
        Ok(n)
    }

    pub fn plan(&self) -> Result<ExperimentPlan> {
        let p = ExperimentPlan {
            modes: self.plan.modes.clone(),
            seeds: self.plan.seeds.clone(),
            alpha: self.plan.alpha,
            radar: self.radar.clone(),
            dhdc: self.dhdc.clone(),
            net: self.net_config(false)?,
            train: self.train.clone(),
            cfar: self.cfar.clone(),
            eval: self.plan.eval.clone(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.radar.validate()?;
        self.dhdc.validate()?;
        self.cfar.validate()?;
        self.train.validate()?;
        self.plan().map(|_| ())
    }
}
