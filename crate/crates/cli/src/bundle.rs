//! Canonical result bundles.
//!
//! Bundles are `serde_json::Value` trees; objects are ordered maps, so keys
//! come out sorted, and floats use the shortest round-trip representation.

use std::path::Path;

use chainset::spectral::{controllability_subspace, SpectralSplit};
use chainset::LinearSystem;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub dim_plus: usize,
    pub dim_zero: usize,
    pub dim_minus: usize,
    pub dim_controllable: usize,
    pub hyperbolic: bool,
    /// `[re, im]` pairs.
    pub eigenvalues: Vec<[f64; 2]>,
    pub tol_re: f64,
    pub near_threshold: bool,
}

impl SplitSummary {
    pub fn new(sys: &LinearSystem, split: &SpectralSplit) -> Result<Self, CliError> {
        Ok(Self {
            dim_plus: split.dim_plus(),
            dim_zero: split.dim_zero(),
            dim_minus: split.dim_minus(),
            dim_controllable: controllability_subspace(&sys.a, &sys.b)?.ncols(),
            hyperbolic: split.is_hyperbolic(),
            eigenvalues: split.eigenvalues.iter().map(|&(re, im)| [re, im]).collect(),
            tol_re: split.tol_re,
            near_threshold: split.near_threshold,
        })
    }

    pub fn line(&self) -> String {
        format!(
            "dim L+ = {}, dim L0 = {}, dim L\u{2212} = {}, dim C = {}, hyperbolic: {}",
            self.dim_plus,
            self.dim_zero,
            self.dim_minus,
            self.dim_controllable,
            if self.hyperbolic { "yes" } else { "no" }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultBundle {
    pub command: String,
    pub input_hash: String,
    pub version: String,
    pub spectral: SplitSummary,
    pub options: Value,
    pub result: Value,
}

pub fn input_hash(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl ResultBundle {
    pub fn to_canonical_json(&self) -> Result<String, CliError> {
        let value = serde_json::to_value(self).map_err(|e| CliError::Io(e.to_string()))?;
        let mut s = serde_json::to_string_pretty(&value).map_err(|e| CliError::Io(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Parse(m) => CliError::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.to_canonical_json()?).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }
}
