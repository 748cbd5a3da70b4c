//! Experiment configuration: a sectioned `key = value` file or its JSON equivalent.

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::operators::{make_heat, make_linear, make_logdet, make_pucci_maximal, make_pucci_minimal, OperatorRef};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorConfig {
    /// pucci-minimal, pucci-maximal, heat (alias linear-heat), linear or logdet.
    pub name: String,
    pub lambda: f64,
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
    /// Diagonal of A for `linear`; missing entries default to 1.
    pub diag: Vec<f64>,
}

impl Default for OperatorConfig {
    fn default() -> Self {
        Self { name: "pucci-minimal".into(), lambda: 0.5, big_lambda: 2.0, diag: Vec::new() }
    }
}

impl OperatorConfig {
    pub fn build(&self, n: usize) -> Result<OperatorRef> {
        Ok(match self.name.as_str() {
            "pucci-minimal" => Arc::new(make_pucci_minimal(self.lambda, self.big_lambda, n)?),
            "pucci-maximal" => Arc::new(make_pucci_maximal(self.lambda, self.big_lambda, n)?),
            "heat" | "linear-heat" => Arc::new(make_heat(n)?),
            "linear" => {
                let mut a = linalg::identity(n);
                for (i, d) in self.diag.iter().take(n).enumerate() {
                    a[(i, i)] = *d;
                }
                Arc::new(make_linear(&a, &vec![0.0; n], 0.0)?)
            }
            "logdet" => Arc::new(make_logdet(n)?),
            other => return Err(Error::Config(format!("unknown operator {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Spatial step of the suites that use a single resolution.
    pub h: Option<f64>,
    /// Output time step; defaults per suite.
    pub tau: Option<f64>,
    /// Fraction of the explicit stability limit used for sub-steps.
    pub cfl: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { h: None, tau: None, cfl: 0.9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub suite: Option<String>,
    pub seed: u64,
    /// Seeds of the stability study of the empirical constants.
    pub seeds: Vec<u64>,
    pub quick: bool,
    /// Dimension of the constants ledger and of `linear` operators.
    pub n: usize,
    pub operator: OperatorConfig,
    pub grid: GridConfig,
    /// Amplitude of random boundary data in the decay suites.
    pub amplitude: f64,
    /// Spatial steps of the solver refinement study, coarsest first.
    pub resolutions: Vec<f64>,
    /// Practical constant c in δ-scaled thresholds.
    pub c_practical: f64,
    pub iqa: IqaConfig,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IqaConfig {
    pub sigma: f64,
    pub alpha: f64,
    pub alpha0: f64,
    pub c_tilde: f64,
    pub h: f64,
    pub max_levels: usize,
}

impl Default for IqaConfig {
    fn default() -> Self {
        Self { sigma: 0.125, alpha: 0.5, alpha0: 0.1, c_tilde: 0.5, h: 1.0 / 256.0, max_levels: 10 }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            suite: None,
            seed: 1,
            seeds: vec![1, 2, 3],
            quick: false,
            n: 2,
            operator: OperatorConfig::default(),
            grid: GridConfig::default(),
            amplitude: 1e-3,
            resolutions: vec![1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0],
            c_practical: 1e-2,
            iqa: IqaConfig::default(),
            out: None,
        }
    }
}

pub const SUITES: [&str; 8] = ["geometry", "contact", "barrier", "solver", "decay", "iqa", "constants", "all"];

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let c: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// Picks the format from the extension; anything but `.json` is read as key = value.
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if let Some(s) = &self.suite {
            if !SUITES.contains(&s.as_str()) {
                return bad(format!("unknown suite {s:?}"));
            }
        }
        if !(1..=3).contains(&self.n) {
            return bad(format!("n = {} outside 1..=3", self.n));
        }
        let o = &self.operator;
        if !(o.lambda > 0.0 && o.big_lambda >= o.lambda) {
            return bad(format!("need 0 < λ ≤ Λ, got λ = {}, Λ = {}", o.lambda, o.big_lambda));
        }
        self.operator.build(self.n)?;
        if !(self.grid.cfl > 0.0 && self.grid.cfl <= 1.0) {
            return bad(format!("cfl factor {} outside (0, 1]", self.grid.cfl));
        }
        for v in [self.grid.h, self.grid.tau].into_iter().flatten() {
            if !(v > 0.0 && v <= 0.5 && (1.0 / v).fract() == 0.0) {
                return bad(format!("grid step {v} must be 1/m for an integer m ≥ 2"));
            }
        }
        if !(self.amplitude > 0.0 && self.amplitude < 1.0) {
            return bad(format!("amplitude {} outside (0, 1)", self.amplitude));
        }
        if self.resolutions.len() < 2 || self.resolutions.windows(2).any(|w| !(w[1] < w[0])) || self.resolutions.iter().any(|h| !(*h > 0.0 && (1.0 / h).fract() == 0.0)) {
            return bad("resolutions must be at least two decreasing steps 1/m".into());
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if !(self.c_practical > 0.0) {
            return bad("c_practical must be positive".into());
        }
        let q = &self.iqa;
        if !(q.sigma > 0.0 && q.sigma < 1.0 && q.alpha > 0.0 && q.alpha < 1.0 && q.alpha0 > 0.0 && q.alpha0 < 1.0 && q.c_tilde > 0.0) {
            return bad("iqa: need σ, α, α₀ in (0, 1) and C̃ > 0".into());
        }
        if !(q.h > 0.0 && (1.0 / q.h).fract() == 0.0) {
            return bad(format!("iqa: h = {} must be 1/m", q.h));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn sectioned_text_and_json_agree() {
        let text = "suite = \"iqa\"\nseed = 7\n\n[operator]\nname = \"heat\"\n\n[iqa]\nh = 0.0078125\n";
        let a = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(a.suite.as_deref(), Some("iqa"));
        assert_eq!(a.operator.name, "heat");
        assert_eq!(a.iqa.h, 1.0 / 128.0);
        assert_eq!(a.iqa.sigma, 0.125);
        let b = ExperimentConfig::from_json_str(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ExperimentConfig::from_toml_str("suite = \"nope\"").is_err());
        assert!(ExperimentConfig::from_toml_str("bogus = 1").is_err());
        assert!(ExperimentConfig::from_toml_str("[operator]\nname = \"pucci-minimal\"\nlambda = 3.0\nLambda = 1.0").is_err());
        assert!(ExperimentConfig::from_toml_str("[grid]\nh = 0.3").is_err());
        assert!(ExperimentConfig::from_toml_str("resolutions = [0.25, 0.5]").is_err());
        assert!(ExperimentConfig::from_toml_str("[operator]\nname = \"cubic\"").is_err());
    }
}
