//! TOML run configuration.
//!
//! ```toml
//! [spec]
//! sigma_lo_sq = 1.0
//! sigma_hi_sq = 2.0
//!
//! [grid]
//! T = 1.0
//! n_steps = 64
//!
//! [mc]
//! n_paths = 100000
//! seed = 42
//!
//! [pde]
//! nodes = 400
//!
//! [lab]
//! n = [2, 5, 10, 20]
//!
//! [output]
//! dir = "out"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gspec::GSpec;
use crate::pde::PdeParams;
use crate::scenario::TimeGrid;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpecSection {
    pub sigma_lo_sq: f64,
    pub sigma_hi_sq: f64,
}

impl Default for SpecSection {
    fn default() -> Self {
        Self {
            sigma_lo_sq: 1.0,
            sigma_hi_sq: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub n_steps: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            n_steps: 64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSection {
    pub n_paths: usize,
    pub seed: u64,
}

impl Default for McSection {
    fn default() -> Self {
        Self {
            n_paths: 100_000,
            seed: 42,
        }
    }
}

/// Overrides of the per-lab default profiles. Unset keys keep each lab's own
/// default.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LabSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_paths: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<usize>,
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    /// Block counts or dyadic levels, depending on the lab.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub windows: Option<usize>,
    /// `(a, b)` pairs of the G-normal convolution lab.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub payoffs: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub spec: SpecSection,
    pub grid: GridSection,
    pub mc: McSection,
    pub pde: PdeParams,
    pub lab: LabSection,
    pub output: OutputSection,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn gspec(&self) -> Result<GSpec> {
        GSpec::new(self.spec.sigma_lo_sq, self.spec.sigma_hi_sq)
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.grid.horizon, self.grid.n_steps)
    }

    /// Checks the band, the grid, the sample size and the PDE parameters.
    pub fn validate(&self) -> Result<()> {
        let bad = |e: Error| Error::Config(e.to_string());
        self.gspec().map_err(bad)?;
        self.time_grid().map_err(bad)?;
        self.pde.validate().map_err(bad)?;
        if self.pde.cfl_fraction > 1.0 {
            return Err(Error::Config(format!(
                "pde.cfl_fraction = {} breaks the CFL bound sigma_hi^2 dt <= dx^2",
                self.pde.cfl_fraction
            )));
        }
        if self.mc.n_paths == 0 {
            return Err(Error::Config("mc.n_paths must be positive".into()));
        }
        let lab = &self.lab;
        if lab.n_paths == Some(0) || lab.n_steps == Some(0) {
            return Err(Error::Config(
                "lab.n_paths and lab.n_steps must be positive".into(),
            ));
        }
        if lab.horizon.is_some_and(|t| !(t > 0.0 && t.is_finite())) {
            return Err(Error::Config("lab.T must be positive".into()));
        }
        if lab.n.as_ref().is_some_and(|n| n.is_empty()) {
            return Err(Error::Config("lab.n must not be empty".into()));
        }
        if lab.c.is_some_and(|c| !(c >= 0.0 && c.is_finite())) {
            return Err(Error::Config("lab.c must be non-negative".into()));
        }
        Ok(())
    }
}
