//! JSON run configuration. Every field is optional; command-line flags take
//! precedence over the file, and built-in defaults fill the rest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tvvar::portfolio::Strategy;

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub columns: Option<Vec<String>>,
    pub time_column: Option<String>,
    pub transform: Option<TransformChoice>,
    pub model: ModelSection,
    pub prior: PriorSection,
    pub horizons: Option<Vec<usize>>,
    pub grid: GridSection,
    pub portfolio: PortfolioSection,
    pub simulate: SimulateSection,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TransformChoice {
    None,
    Geometric,
    Log,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub d: Option<usize>,
    pub delta: Option<f64>,
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorSection {
    /// Multiple of the identity used as the initial state spread.
    pub spread_scale: Option<f64>,
    /// Multiple of the identity used as the initial volatility scale.
    pub vol_scale: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub d: Option<Vec<usize>>,
    pub delta: Option<Vec<f64>>,
    pub beta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PortfolioSection {
    pub target: Option<f64>,
    pub strategies: Option<Vec<Strategy>>,
    pub compound: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub p: Option<usize>,
    pub n: Option<usize>,
    pub volatility: Option<VolChoice>,
    pub sigma0: Option<f64>,
    pub ar: Option<f64>,
    pub pstar: Option<f64>,
    pub guard: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum VolChoice {
    Fixed,
    Beta,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_partial_config() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"model": {"d": 2, "beta": 0.9}, "grid": {"delta": [0.95, 0.98]},
                "portfolio": {"strategies": ["up", "ewp"], "compound": true}, "transform": "geometric"}"#,
        )
        .unwrap();
        assert_eq!(cfg.model.d, Some(2));
        assert_eq!(cfg.model.delta, None);
        assert_eq!(cfg.grid.delta, Some(vec![0.95, 0.98]));
        assert_eq!(cfg.portfolio.strategies, Some(vec![Strategy::Up, Strategy::Ewp]));
        assert_eq!(cfg.transform, Some(TransformChoice::Geometric));
    }

    #[test]
    fn rejects_unknown_keys_with_location() {
        let err = serde_json::from_str::<RunConfig>(r#"{"model": {"lags": 2}}"#).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("lags") && msg.contains("line 1"), "{msg}");
    }
}
