//! Experiment configuration, read from a versioned TOML file.
//!
//! ```toml
//! schema = 1
//! n = 100
//! k = 2
//! gains = 1.0                 # or one value per user
//! detectors = ["rdd"]
//! m = [5, 10, 15]
//! snr_db = [5.0, 10.0]
//! trials = 10000
//! seed = 1
//! baseline = true             # add decorrelator rows (A = I, M = N)
//!
//! [gram]
//! kind = "identity"           # | "equicorrelated" (rho) | "signatures" (seed, l)
//!
//! [matrix]
//! kind = "partial-dft"        # | "identity" | "custom" (path)
//! fresh_per_trial = true
//!
//! [state]
//! kind = "random"             # | "fixed" (support, symbols)
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use crate::analysis::{DEFAULT_ALPHA, DEFAULT_C};
use crate::design::{self, MeasurementMatrix};
use crate::detectors::{DetectorKind, DetectorOptions, SupportRule, DEFAULT_ML_BUDGET};
use crate::model::TransmitState;
use crate::rng::StreamKey;
use crate::waveforms::{self, GramMatrix, SignatureSet};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GramSpec {
    Identity,
    Equicorrelated { rho: f64 },
    /// Random ±1 chip sequences of length `l`.
    Signatures { seed: u64, l: usize },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MatrixSpec {
    PartialDft {
        #[serde(default = "default_true")]
        fresh_per_trial: bool,
        /// Seed for the fixed-A draw; defaults to the master seed.
        seed: Option<u64>,
    },
    Identity,
    Custom { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum GainSpec {
    Uniform(f64),
    PerUser(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StateSpec {
    Random,
    Fixed { support: Vec<usize>, symbols: Vec<i8> },
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_c")]
    pub c: f64,
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        AnalysisSpec { alpha: DEFAULT_ALPHA, c: DEFAULT_C }
    }
}

fn default_true() -> bool {
    true
}
fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}
fn default_c() -> f64 {
    DEFAULT_C
}
fn default_gains() -> GainSpec {
    GainSpec::Uniform(1.0)
}
fn default_ml_budget() -> u64 {
    DEFAULT_ML_BUDGET
}
fn default_state() -> StateSpec {
    StateSpec::Random
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub n: usize,
    pub k: usize,
    pub gram: GramSpec,
    pub matrix: MatrixSpec,
    #[serde(default = "default_gains")]
    pub gains: GainSpec,
    pub detectors: Vec<DetectorKind>,
    /// Correlator counts to sweep; ignored for identity and custom matrices.
    #[serde(default)]
    pub m: Vec<usize>,
    pub snr_db: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
    #[serde(default)]
    pub baseline: bool,
    #[serde(default = "default_state")]
    pub state: StateSpec,
    /// Worker threads; 0 uses every available core.
    #[serde(default)]
    pub workers: usize,
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub mmse_support: SupportRule,
    #[serde(default = "default_ml_budget")]
    pub ml_budget: u64,
    #[serde(default)]
    pub analysis: AnalysisSpec,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file. Relative custom-matrix paths are
    /// resolved against the config file's directory.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_owned(), source })?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let MatrixSpec::Custom { path: p } = &mut cfg.matrix {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.schema != SCHEMA_VERSION {
            return bad(format!("unsupported schema {} (expected {SCHEMA_VERSION})", self.schema));
        }
        if self.n == 0 || self.k == 0 || self.k > self.n {
            return bad(format!("need 1 <= k <= n, got n={}, k={}", self.n, self.k));
        }
        if self.trials == 0 {
            return bad("trials must be >= 1".into());
        }
        if self.detectors.is_empty() && !self.baseline {
            return bad("detector list is empty".into());
        }
        if self.snr_db.is_empty() || self.snr_db.iter().any(|s| !s.is_finite()) {
            return bad("snr_db must be a nonempty list of finite values".into());
        }
        if let MatrixSpec::PartialDft { .. } = self.matrix {
            if self.m.is_empty() {
                return bad("m must list at least one correlator count".into());
            }
            if let Some(&m) = self.m.iter().find(|&&m| m == 0 || m > self.n) {
                return bad(format!("m={m} outside 1..={}", self.n));
            }
        }
        if let GainSpec::PerUser(g) = &self.gains {
            if g.len() != self.n {
                return bad(format!("{} gains given for n={}", g.len(), self.n));
            }
        }
        if let Some(r) = self.gains_vec().iter().find(|r| **r == 0.0 || !r.is_finite()) {
            return bad(format!("gain {r} must be finite and nonzero"));
        }
        if let GramSpec::Signatures { l, .. } = self.gram {
            if l < self.n {
                return bad(format!("l={l} must be >= n={}", self.n));
            }
        }
        if let StateSpec::Fixed { support, .. } = &self.state {
            if support.len() != self.k {
                return bad(format!("fixed support has {} entries, k={}", support.len(), self.k));
            }
            self.fixed_state()?;
        }
        if !(self.analysis.alpha > 0.0) || !(self.analysis.c > 0.0) {
            return bad("alpha and c must be positive".into());
        }
        Ok(())
    }

    pub fn gains_vec(&self) -> Vec<f64> {
        match &self.gains {
            GainSpec::Uniform(r) => vec![*r; self.n],
            GainSpec::PerUser(g) => g.clone(),
        }
    }

    /// Chips per symbol, when the Gram matrix comes from sampled signatures.
    pub fn chips(&self) -> Option<usize> {
        match self.gram {
            GramSpec::Signatures { l, .. } => Some(l),
            _ => None,
        }
    }

    pub fn build_gram(&self) -> Result<Arc<GramMatrix>> {
        let g = match self.gram {
            GramSpec::Identity => GramMatrix::identity(self.n),
            GramSpec::Equicorrelated { rho } => GramMatrix::equicorrelated(self.n, rho)?,
            GramSpec::Signatures { seed, l } => {
                let mut rng = StreamKey::new(seed).with_str("signatures").rng(0);
                let sigs = SignatureSet::random_binary(self.n, l, &mut rng)?;
                waveforms::gram(&sigs)?
            }
        };
        Ok(Arc::new(g))
    }

    pub fn fixed_state(&self) -> Result<Option<TransmitState>> {
        match &self.state {
            StateSpec::Random => Ok(None),
            StateSpec::Fixed { support, symbols } => Ok(Some(TransmitState::new(self.n, support, symbols)?)),
        }
    }

    pub fn custom_matrix(&self) -> Result<Option<MeasurementMatrix>> {
        match &self.matrix {
            MatrixSpec::Custom { path } => {
                let a = design::read_custom_csv(path)?;
                if a.users() != self.n {
                    return Err(Error::InvalidConfig(format!(
                        "{} has {} columns, n={}",
                        path.display(),
                        a.users(),
                        self.n
                    )));
                }
                Ok(Some(a))
            }
            _ => Ok(None),
        }
    }

    pub fn fresh_per_trial(&self) -> bool {
        matches!(self.matrix, MatrixSpec::PartialDft { fresh_per_trial: true, .. })
    }

    pub fn detector_options(&self) -> DetectorOptions {
        DetectorOptions { mmse_support: self.mmse_support, ml_budget: self.ml_budget }
    }

    pub fn state_mode(&self) -> &'static str {
        match self.state {
            StateSpec::Random => "random",
            StateSpec::Fixed { .. } => "fixed",
        }
    }
}
