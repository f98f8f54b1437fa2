use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::commands::CliError;
use crate::{OpArg, ParamArgs};

/// Values that may come from a TOML file; command-line flags override them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(rename = "Lambda", skip_serializing_if = "Option::is_none")]
    pub big_lambda: Option<f64>,
    /// `plus` or `minus`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub op: Option<String>,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config fields are plain scalars")
    }

    /// Flag values replace file values field by field.
    pub fn apply_params(&mut self, flags: &ParamArgs) {
        fn over<T: Clone>(slot: &mut Option<T>, flag: &Option<T>) {
            if flag.is_some() {
                slot.clone_from(flag);
            }
        }
        over(&mut self.lambda, &flags.lambda);
        over(&mut self.big_lambda, &flags.big_lambda);
        over(&mut self.n, &flags.n);
        over(&mut self.a, &flags.a);
        if let Some(op) = flags.op {
            self.op = Some(match op {
                OpArg::Plus => "plus",
                OpArg::Minus => "minus",
            }
            .to_string());
        }
    }

    pub fn set<T>(slot: &mut Option<T>, flag: Option<T>) {
        if flag.is_some() {
            *slot = flag;
        }
    }
}
