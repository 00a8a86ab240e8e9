use crate::estimators::{Functional, SmcParams, SplittingParams, TiltedParams};
use crate::scenery::SceneryModel;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::path::{Path, PathBuf};

/// A schema violation, located by its dotted field path.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn at(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() || self.path == "." {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Classify a beta grid at fixed `(alpha, d)`.
    ExponentMap,
    /// Estimate one event with one method over an `(n, y)` grid.
    Tail,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::ExponentMap => "exponent-map",
            ExperimentKind::Tail => "tail",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSpec {
    pub alpha: f64,
    pub d: usize,
    pub beta: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum YUnit {
    #[default]
    Absolute,
    /// `y` values are multiples of `1 + 2 sum_x G_d(x)^2`.
    Y0Silt,
}

fn one() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub d: usize,
    pub n: Vec<u64>,
    pub y: Vec<f64>,
    #[serde(default)]
    pub y_unit: YUnit,
    #[serde(default = "one")]
    pub replicas: u64,
}

fn two_f() -> f64 {
    2.0
}

fn one_f() -> f64 {
    1.0
}

/// The event whose probability is estimated; `y` comes from the grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EventSpec {
    /// `sum_x l_n(x)^p >= n^gamma y`.
    Silt {
        #[serde(default = "two_f")]
        p: f64,
        #[serde(default = "one_f")]
        gamma: f64,
    },
    /// `X_n >= n^beta y`.
    Rwrs { beta: f64 },
    /// `|D_{b_low, b_high}| >= y`.
    LevelSet { b_low: f64, b_high: f64 },
    /// `sigma_r > n`.
    Confinement { r: u32 },
    /// `F >= y`.
    Functional { functional: Functional },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MethodSpec {
    Naive,
    Enumeration,
    TiltedScenery(TiltedParams),
    Splitting(SplittingParams),
    ReturnChain,
    Localization {
        epsilon: f64,
        #[serde(default)]
        smc: SmcParams,
    },
    Smc(SmcParams),
    ExactSpectral,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSpec {
    /// `log-log`, `log-vs-sqrt-n` or `log-vs-n-zeta`.
    pub transform: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta: Option<f64>,
    /// Expected value of the fitted exponent (log-log) or rate constant
    /// (other transforms), and the declared tolerance around it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Master seed; every grid point derives its own stream from it.
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<PhaseSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event: Option<EventSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenery: Option<SceneryModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<MethodSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitSpec>,
}

const TRANSFORMS: [&str; 3] = ["log-log", "log-vs-sqrt-n", "log-vs-n-zeta"];

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let de = toml::Deserializer::parse(text).map_err(|e| ConfigError::at("", e.to_string().trim().to_string()))?;
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::at(path, e.into_inner().message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::at("", format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// SHA-256 over the canonical JSON form, leaving out the output path.
    pub fn hash(&self) -> String {
        let semantic = Self {
            output: None,
            ..self.clone()
        };
        let json = serde_json::to_vec(&semantic).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        match self.kind {
            ExperimentKind::ExponentMap => {
                let p = self.phase.as_ref().ok_or_else(|| ConfigError::at("phase", "required for exponent-map"))?;
                if p.beta.is_empty() {
                    return Err(ConfigError::at("phase.beta", "grid must be nonempty"));
                }
                if !(p.alpha > 0.0) {
                    return Err(ConfigError::at("phase.alpha", "must be positive"));
                }
                if p.d == 0 {
                    return Err(ConfigError::at("phase.d", "must be at least 1"));
                }
                Ok(())
            }
            ExperimentKind::Tail => self.validate_tail(),
        }
    }

    fn validate_tail(&self) -> Result<(), ConfigError> {
        let grid = self.grid.as_ref().ok_or_else(|| ConfigError::at("grid", "required for tail"))?;
        let event = self.event.as_ref().ok_or_else(|| ConfigError::at("event", "required for tail"))?;
        let method = self.method.as_ref().ok_or_else(|| ConfigError::at("method", "required for tail"))?;
        if grid.d == 0 {
            return Err(ConfigError::at("grid.d", "must be at least 1"));
        }
        if grid.n.is_empty() {
            return Err(ConfigError::at("grid.n", "grid must be nonempty"));
        }
        if grid.y.is_empty() {
            return Err(ConfigError::at("grid.y", "grid must be nonempty"));
        }
        if grid.replicas == 0 {
            return Err(ConfigError::at("grid.replicas", "must be at least 1"));
        }
        if grid.y_unit == YUnit::Y0Silt && grid.d < 5 {
            return Err(ConfigError::at("grid.y_unit", "y0-silt needs d >= 5"));
        }
        if let Some(s) = &self.scenery {
            s.clone().validated().map_err(|e| ConfigError::at("scenery", e.to_string()))?;
        }
        let needs_scenery = matches!(event, EventSpec::Rwrs { .. });
        if needs_scenery && self.scenery.is_none() {
            return Err(ConfigError::at("scenery", "required for the rwrs event"));
        }
        let silt2 = matches!(event, EventSpec::Silt { p, gamma } if *p == 2.0 && *gamma == 1.0);
        let ok = match method {
            MethodSpec::Naive => true,
            MethodSpec::Enumeration => match event {
                EventSpec::Functional { .. } => true,
                EventSpec::Silt { p, .. } => p.fract() == 0.0 && *p >= 1.0,
                _ => false,
            },
            MethodSpec::TiltedScenery(_) | MethodSpec::Localization { .. } => needs_scenery,
            MethodSpec::Splitting(_) | MethodSpec::ReturnChain => silt2,
            MethodSpec::Smc(_) | MethodSpec::ExactSpectral => matches!(event, EventSpec::Confinement { .. }),
        };
        if !ok {
            return Err(ConfigError::at("method.kind", "method does not apply to this event"));
        }
        if let Some(fit) = &self.fit {
            if !TRANSFORMS.contains(&fit.transform.as_str()) {
                return Err(ConfigError::at(
                    "fit.transform",
                    format!("expected one of {}", TRANSFORMS.join(", ")),
                ));
            }
            if fit.transform == "log-vs-n-zeta" && fit.zeta.is_none() {
                return Err(ConfigError::at("fit.zeta", "required for log-vs-n-zeta"));
            }
            if fit.target.is_some() != fit.tolerance.is_some() {
                return Err(ConfigError::at("fit.tolerance", "target and tolerance go together"));
            }
            if grid.n.len() < 4 {
                return Err(ConfigError::at("grid.n", "a fit needs at least 4 grid points"));
            }
        }
        Ok(())
    }
}
