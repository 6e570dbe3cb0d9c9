//! Run configuration file.
//!
//! Every physical default lives in [`FlowConfig`] and the section structs
//! below; the README lists them in one table.

use std::path::{Path, PathBuf};

use convex_flow::body::BodyRecipe;
use convex_flow::corpus::CorpusParams;
use convex_flow::flow::FlowConfig;
use convex_flow::functionals::OrliczFunction;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Run,
    Check,
    Solve,
    Functionals,
    Inequalities,
    Sweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    /// Corpus seed.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub flow: FlowConfig,
    #[serde(default)]
    pub corpus: CorpusSection,
    #[serde(default)]
    pub check: CheckSection,
    #[serde(default)]
    pub solve: SolveSection,
    #[serde(default)]
    pub functionals: FunctionalsSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusSection {
    pub count: usize,
    pub radius_range: [f64; 2],
    pub max_mode: u32,
    pub cap_fraction: [f64; 2],
}

impl Default for CorpusSection {
    fn default() -> Self {
        let p = CorpusParams::default();
        Self {
            count: 20,
            radius_range: [p.radius_range.0, p.radius_range.1],
            max_mode: p.max_mode,
            cap_fraction: [p.cap_fraction.0, p.cap_fraction.1],
        }
    }
}

impl CorpusSection {
    pub fn params(&self) -> CorpusParams {
        CorpusParams {
            radius_range: (self.radius_range[0], self.radius_range[1]),
            max_mode: self.max_mode,
            cap_fraction: (self.cap_fraction[0], self.cap_fraction[1]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckSection {
    /// Directions in the condition (i) fan.
    pub directions: usize,
    pub uniqueness_samples: usize,
    pub concavity_samples: usize,
}

impl Default for CheckSection {
    fn default() -> Self {
        Self { directions: convex_flow::forcing::DEFAULT_FAN, uniqueness_samples: 4096, concavity_samples: 2000 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveSection {
    /// Initial bodies; empty means balls of half and twice the predicted
    /// stationary radius.
    pub seeds: Vec<BodyRecipe>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FunctionalsSection {
    /// Exponent of the Lp statements; defaults to `k + 2`.
    pub p: Option<f64>,
    /// Dual volume exponent.
    pub q: f64,
    pub phi1: OrliczFunction,
    pub phi2: OrliczFunction,
    pub eps: Vec<f64>,
    /// Margin tolerance for the inequality suite.
    pub tol: f64,
}

impl Default for FunctionalsSection {
    fn default() -> Self {
        Self {
            p: None,
            q: 1.0,
            phi1: OrliczFunction::Linear,
            phi2: OrliczFunction::Linear,
            eps: vec![1e-2, 5e-3, 2.5e-3],
            tol: convex_flow::functionals::DEFAULT_QUAD_TOL,
        }
    }
}

/// Cartesian parameter grid. Empty axes keep the base value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub beta: Vec<f64>,
    /// `alpha` of `psi_u_rho`, `p` of the other forcing kinds.
    pub alpha: Vec<f64>,
    pub delta: Vec<f64>,
}

/// Invalid input, reported with exit status 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl RunConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError(format!("{}: {e}", origin.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.flow.validate().map_err(|e| ConfigError(format!("flow: {e}")))?;
        let c = &self.corpus;
        if c.count == 0 {
            return Err(ConfigError("corpus.count must be at least 1".into()));
        }
        if !(c.radius_range[0] > 0.0 && c.radius_range[0] <= c.radius_range[1]) {
            return Err(ConfigError(format!("corpus.radius_range must satisfy 0 < lo <= hi, got {:?}", c.radius_range)));
        }
        if !(c.cap_fraction[0] >= 0.0 && c.cap_fraction[0] <= c.cap_fraction[1] && c.cap_fraction[1] < 1.0) {
            return Err(ConfigError(format!(
                "corpus.cap_fraction must satisfy 0 <= lo <= hi < 1, got {:?}",
                c.cap_fraction
            )));
        }
        if c.max_mode == 0 {
            return Err(ConfigError("corpus.max_mode must be at least 1".into()));
        }
        if self.check.directions < 2 {
            return Err(ConfigError("check.directions must be at least 2".into()));
        }
        if self.check.concavity_samples < 100 {
            return Err(ConfigError("check.concavity_samples must be at least 100".into()));
        }
        let f = &self.functionals;
        if f.eps.is_empty() || f.eps.iter().any(|e| !(*e > 0.0)) {
            return Err(ConfigError("functionals.eps must be a nonempty list of positive values".into()));
        }
        f.phi1.validate().map_err(|e| ConfigError(format!("functionals.phi1: {e}")))?;
        f.phi2.validate().map_err(|e| ConfigError(format!("functionals.phi2: {e}")))?;
        if self.sweep.beta.iter().any(|b| !(*b > 0.0)) {
            return Err(ConfigError("sweep.beta values must be positive".into()));
        }
        Ok(())
    }

    /// Canonical serialization of the effective configuration.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of [`Self::canonical`] with the output directory left out,
    /// so the same run written to two places carries the same header.
    pub fn hash(&self) -> String {
        let mut cfg = self.clone();
        cfg.out = None;
        hex::encode(Sha256::digest(cfg.canonical().as_bytes()))
    }
}
