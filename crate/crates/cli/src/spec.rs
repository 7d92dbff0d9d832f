//! System specification files.

use std::path::Path;

use chainset::chainlab::{ControlFamily, GridSpec};
use chainset::{ControlRange, LinearSystem};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecOptions {
    pub tol_re: Option<f64>,
    pub quad_tol: Option<f64>,
    pub horizon: Option<f64>,
    pub grid: Option<GridSpec>,
    pub epsilon: Option<f64>,
    #[serde(rename = "T")]
    pub jump_t: Option<f64>,
    pub family: Option<ControlFamily>,
    pub samples: Option<usize>,
    pub r_plot: Option<f64>,
    pub seed: Option<u64>,
}

/// `{"A": [[..]], "B": [[..]], "U": {..}, "options": {..}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpecFile {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "U")]
    pub u: ControlRange,
    #[serde(default)]
    pub options: SpecOptions,
}

impl SystemSpecFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn system(&self) -> Result<LinearSystem, CliError> {
        LinearSystem::from_rows(&self.a, &self.b, self.u.clone()).map_err(CliError::from)
    }
}

/// Raw bytes and parsed contents of a spec file.
pub struct LoadedSpec {
    pub bytes: Vec<u8>,
    pub spec: SystemSpecFile,
    pub system: LinearSystem,
}

pub fn load(path: &Path) -> Result<LoadedSpec, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    let spec = SystemSpecFile::parse(text).map_err(|e| match e {
        CliError::Parse(m) => CliError::Parse(format!("{}: {m}", path.display())),
        other => other,
    })?;
    let system = spec.system()?;
    Ok(LoadedSpec { bytes, spec, system })
}
