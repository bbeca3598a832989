//! JSON experiment configuration, schema `v1`.
//!
//! ```json
//! {
//!   "schema": "v1",
//!   "law": {
//!     "structure": "IndependentProduct",
//!     "a": { "log_abs": { "family": "RegVarLog", "alpha": 2.0, "x0": 1.0 }, "shift": -3.0 },
//!     "b": { "constant": 1.0 }
//!   },
//!   "x_grid": ["e^6", "e^8", 22026.47],
//!   "n_grid": [2, 5, 20],
//!   "N": 100000,
//!   "seed": 7
//! }
//! ```
//!
//! Levels are numbers or strings of the form `e^L`; the latter keep `log x`
//! exact and may exceed the float range.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::asymptotics::Regime;
use crate::dist::TailModel;
use crate::error::{Error, Result};
use crate::law::CoefficientLaw;

pub const SCHEMA: &str = "v1";
pub const MIN_PATHS: u64 = 1000;

/// A level `x > 0` with its logarithm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LevelSpec", into = "LevelSpec")]
pub struct Level {
    pub x: f64,
    pub log_x: f64,
    from_log: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LevelSpec {
    Value(f64),
    Text(String),
}

impl Level {
    pub fn from_value(x: f64) -> Result<Self> {
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::Config(format!("level must be positive and finite, got {x}")));
        }
        Ok(Level {
            x,
            log_x: x.ln(),
            from_log: false,
        })
    }

    pub fn from_log(log_x: f64) -> Result<Self> {
        if !log_x.is_finite() {
            return Err(Error::Config(format!("log level must be finite, got {log_x}")));
        }
        Ok(Level {
            x: log_x.exp(),
            log_x,
            from_log: true,
        })
    }

    /// Parses `"e^10"`, `"e10"` or a plain number.
    pub fn parse(s: &str) -> Result<Self> {
        let t = s.trim();
        if let Some(rest) = t.strip_prefix("e^").or_else(|| t.strip_prefix('e')) {
            let l: f64 = rest
                .parse()
                .map_err(|_| Error::Config(format!("cannot parse level {s:?}")))?;
            return Self::from_log(l);
        }
        let v: f64 = t
            .parse()
            .map_err(|_| Error::Config(format!("cannot parse level {s:?}")))?;
        Self::from_value(v)
    }
}

impl TryFrom<LevelSpec> for Level {
    type Error = Error;
    fn try_from(s: LevelSpec) -> Result<Self> {
        match s {
            LevelSpec::Value(v) => Level::from_value(v),
            LevelSpec::Text(t) => Level::parse(&t),
        }
    }
}

impl From<Level> for LevelSpec {
    fn from(l: Level) -> Self {
        if l.from_log {
            LevelSpec::Text(format!("e^{}", l.log_x))
        } else {
            LevelSpec::Value(l.x)
        }
    }
}

impl std::fmt::Display for Level {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.from_log {
            write!(f, "e^{}", self.log_x)
        } else {
            write!(f, "{}", self.x)
        }
    }
}

/// Explicit regime ingredients; anything left out is taken from the law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeOverride {
    pub regime: Regime,
    #[serde(default)]
    pub a: Option<f64>,
    #[serde(default)]
    pub p0: Option<f64>,
    #[serde(default)]
    pub h: Option<TailModel>,
    #[serde(default)]
    pub f: Option<TailModel>,
    #[serde(default)]
    pub g_plus: Option<TailModel>,
    #[serde(default)]
    pub g_minus: Option<TailModel>,
    #[serde(default)]
    pub p_dinf_positive: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct BigJumpSpec {
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default)]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Class-diagnostic tolerance.
    #[serde(default = "default_diag_tol")]
    pub diagnostic: f64,
    /// Constant of the `Ḡ⁻_I ≤ K(F̄_I + Ḡ⁺_I)` grid check.
    #[serde(default = "default_g_minus_constant")]
    pub g_minus_constant: f64,
}

fn default_diag_tol() -> f64 {
    0.05
}

fn default_g_minus_constant() -> f64 {
    10.0
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            diagnostic: default_diag_tol(),
            g_minus_constant: default_g_minus_constant(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: String,
    pub law: CoefficientLaw,
    #[serde(default)]
    pub regime: Option<RegimeOverride>,
    pub x_grid: Vec<Level>,
    pub n_grid: Vec<u64>,
    #[serde(rename = "N")]
    pub n_paths: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub d0: f64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub trace: Option<PathBuf>,
    #[serde(default)]
    pub bigjump: BigJumpSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Grid of `log`-scale points for `diagnose`; defaults to `log x` over `x_grid`.
    #[serde(default)]
    pub diag_x_grid: Option<Vec<f64>>,
    #[serde(default = "default_y_grid")]
    pub diag_y_grid: Vec<f64>,
}

fn default_seed() -> u64 {
    1
}

fn default_y_grid() -> Vec<f64> {
    vec![1.0, 2.0, 5.0]
}

fn strictly_increasing<T: PartialOrd + Copy>(v: &[T]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA {
            return Err(Error::Config(format!(
                "unsupported schema {:?}, expected {SCHEMA:?}",
                self.schema
            )));
        }
        if self.x_grid.is_empty() || !strictly_increasing(&self.x_grid.iter().map(|l| l.log_x).collect::<Vec<_>>()) {
            return Err(Error::Config("x_grid must be nonempty and strictly increasing".into()));
        }
        if self.n_grid.is_empty() || !strictly_increasing(&self.n_grid) || self.n_grid[0] == 0 {
            return Err(Error::Config(
                "n_grid must be nonempty, strictly increasing and positive".into(),
            ));
        }
        if self.n_paths < MIN_PATHS {
            return Err(Error::Config(format!("N must be at least {MIN_PATHS}, got {}", self.n_paths)));
        }
        if self.d0.is_nan() {
            return Err(Error::Config("d0 is NaN".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        Ok(())
    }

    pub fn law_arc(&self) -> Arc<CoefficientLaw> {
        Arc::new(self.law.clone())
    }
}
