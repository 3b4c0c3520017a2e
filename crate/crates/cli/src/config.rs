use std::path::Path;

use manifold_spc::pipelines::{MfConfig, MlConfig, Procedure, SphereStudy, SplitPlan};
use manifold_spc::processes::SphereConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// A mean shift added to generated data from observation `tau` (1-based) on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftSpec {
    pub tau: usize,
    pub delta: Vec<f64>,
}

/// Config document shared by all subcommands. Each command reads the
/// sections it needs and reports the ones that are missing.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub sphere: Option<SphereConfig>,
    pub shift: Option<ShiftSpec>,
    pub method: Option<Procedure>,
    pub split: Option<SplitPlan>,
    pub horizon: Option<usize>,
    pub mf: MfConfig,
    pub ml: MlConfig,
    pub study: Option<SphereStudy>,
    pub replications: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
    }

    pub fn require<'a, T>(section: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
        section
            .as_ref()
            .ok_or_else(|| CliError::Validation(format!("config has no `{name}` section")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::parse(r#"{"sphere": {"d": 2}}"#).is_err());
        assert!(RunConfig::parse(r#"{"bogus": 1}"#).is_err());
        assert!(RunConfig::parse(r#"{"mf": {"fit": {"c0": 5, "cee1": 3}}}"#).is_err());
    }

    #[test]
    fn empty_document_is_all_defaults() {
        assert_eq!(RunConfig::parse("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn full_document_parses() {
        let cfg = RunConfig::parse(
            r#"{
                "seed": 7,
                "sphere": {"d": 2, "ambient_dim": 6, "sigma_x": 0.3, "sigma": 0.1, "n": 50, "seed": 1},
                "shift": {"tau": 10, "delta": [0, 0, 0, 1, 0, 0]},
                "method": "lpp",
                "split": {"m_fit": 30, "m_ar": 10, "m_chart": 10},
                "horizon": 20,
                "mf": {"fit": {"c0": 5, "c1": 3, "c2": 5, "d_hint": 2}, "ar": {"fixed": 2}},
                "ml": {"d": 3, "k_neighbors": 15},
                "study": {"horizon": 300},
                "replications": 4
            }"#,
        )
        .unwrap();
        assert_eq!(cfg.method, Some(Procedure::Lpp));
        assert_eq!(cfg.mf.fit.d_hint, Some(2));
        assert_eq!(cfg.study.unwrap().horizon, 300);
    }
}
