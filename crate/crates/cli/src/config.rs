//! Experiment configuration: TOML schema, validation, and the resolved
//! form echoed into every output file header.
//!
//! Unknown keys anywhere in the file are hard errors, so a typo like
//! `sigma = 0.5` fails loudly instead of silently running with defaults.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

use stie::sim::{ScenarioParams, StreamParams, SweepParameter, SweepSpec, TrialOptions, Variant};

/// Errors surfaced to the user, split by exit code: configuration
/// problems exit with 2, runtime failures (IO, thread pool) with 3.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Runtime(msg) => write!(f, "runtime error: {msg}"),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// One Gaussian observation channel: pre-change mean, post-change mean,
/// and a common variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamConfig {
    pub mu0: f64,
    pub mu1: f64,
    pub sigma2: f64,
}

impl StreamConfig {
    fn validate(&self, path: &str) -> Result<()> {
        for (name, v) in [("mu0", self.mu0), ("mu1", self.mu1), ("sigma2", self.sigma2)] {
            if !v.is_finite() {
                return Err(config_err(format!("{path}.{name}: must be finite, got {v}")));
            }
        }
        if self.sigma2 <= 0.0 {
            return Err(config_err(format!(
                "{path}.sigma2: must be > 0, got {}",
                self.sigma2
            )));
        }
        if self.mu0 == self.mu1 {
            return Err(config_err(format!(
                "{path}: mu0 and mu1 must differ (both are {})",
                self.mu0
            )));
        }
        Ok(())
    }

    fn to_params(self) -> StreamParams {
        StreamParams {
            mu0: self.mu0,
            mu1: self.mu1,
            sigma2: self.sigma2,
        }
    }
}

/// Two private channels, one shared channel, and the geometric
/// change-time parameters of the two subsystems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub rho1: f64,
    pub rho2: f64,
    pub x: StreamConfig,
    pub y: StreamConfig,
    pub z: StreamConfig,
}

impl ScenarioConfig {
    fn validate(&self) -> Result<()> {
        for (name, rho) in [("rho1", self.rho1), ("rho2", self.rho2)] {
            if !(rho > 0.0 && rho < 1.0) {
                return Err(config_err(format!(
                    "scenario.{name}: must lie strictly inside (0, 1), got {rho}"
                )));
            }
        }
        self.x.validate("scenario.x")?;
        self.y.validate("scenario.y")?;
        self.z.validate("scenario.z")
    }
}

/// Which detector family the run reports on. `All` produces one
/// metrics row per family from the same set of trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Stie,
    PrivateOnly,
    NoExchange,
    All,
}

impl Mode {
    pub fn variants(self) -> Vec<Variant> {
        match self {
            Mode::Stie => vec![Variant::Stie],
            Mode::PrivateOnly => vec![Variant::PrivateOnly],
            Mode::NoExchange => vec![Variant::NoExchange],
            Mode::All => vec![Variant::Stie, Variant::PrivateOnly, Variant::NoExchange],
        }
    }

    /// The silent-peer statistic is the expensive part of a trial, so it
    /// is only maintained when some requested family needs it.
    pub fn needs_no_exchange(self) -> bool {
        matches!(self, Mode::NoExchange | Mode::All)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParameterConfig {
    Alpha,
    SigmaRatio,
    Rho,
}

impl SweepParameterConfig {
    fn to_core(self) -> SweepParameter {
        match self {
            SweepParameterConfig::Alpha => SweepParameter::Alpha,
            SweepParameterConfig::SigmaRatio => SweepParameter::SigmaRatio,
            SweepParameterConfig::Rho => SweepParameter::Rho,
        }
    }
}

/// Sweep request: which knob to move, the grid of values, and the trial
/// budget per grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameterConfig,
    pub values: Vec<f64>,
    pub trials_per_point: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_grid: Option<Vec<f64>>,
}

impl SweepConfig {
    fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(config_err("sweep.values: must not be empty"));
        }
        for (i, v) in self.values.iter().enumerate() {
            let ok = match self.parameter {
                SweepParameterConfig::Alpha => *v > 0.0 && *v < 1.0,
                SweepParameterConfig::SigmaRatio => v.is_finite() && *v > 0.0,
                SweepParameterConfig::Rho => *v > 0.0 && *v < 1.0,
            };
            if !ok {
                let range = match self.parameter {
                    SweepParameterConfig::Alpha | SweepParameterConfig::Rho => "inside (0, 1)",
                    SweepParameterConfig::SigmaRatio => "> 0 and finite",
                };
                return Err(config_err(format!(
                    "sweep.values[{i}]: must be {range}, got {v}"
                )));
            }
        }
        if self.trials_per_point < 100 {
            return Err(config_err(format!(
                "sweep.trials_per_point: must be at least 100, got {}",
                self.trials_per_point
            )));
        }
        if let Some(grid) = &self.alpha_grid {
            if grid.len() < 3 {
                return Err(config_err(format!(
                    "sweep.alpha_grid: needs at least 3 points for an exponent fit, got {}",
                    grid.len()
                )));
            }
            for (i, a) in grid.iter().enumerate() {
                if !(*a > 0.0 && *a < 1.0) {
                    return Err(config_err(format!(
                        "sweep.alpha_grid[{i}]: must lie strictly inside (0, 1), got {a}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_spec(&self) -> SweepSpec {
        SweepSpec {
            parameter: self.parameter.to_core(),
            values: self.values.clone(),
            trials_per_point: self.trials_per_point,
            alpha_grid: self.alpha_grid.clone(),
        }
    }
}

/// The full experiment file. Scalar knobs first, tables after, matching
/// the order TOML serialization requires.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub alpha: f64,
    pub n_trials: u64,
    pub seed: u64,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u64>,
    pub scenario: ScenarioConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            config_err(format!("cannot read config file {}: {e}", path.display()))
        })?;
        let config: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(config_err(format!(
                "alpha: must lie strictly inside (0, 1), got {}",
                self.alpha
            )));
        }
        if self.n_trials == 0 {
            return Err(config_err("n_trials: must be at least 1"));
        }
        if let Some(h) = self.horizon {
            if h == 0 {
                return Err(config_err("horizon: must be at least 1 when given"));
            }
        }
        self.scenario.validate()?;
        if let Some(sweep) = &self.sweep {
            sweep.validate()?;
        }
        Ok(())
    }

    /// Applies a command-line seed override; with `pin_horizon` it also
    /// records the window the run will actually use. Sweeps leave an
    /// unset horizon alone so each grid point keeps its own default
    /// (the window must grow as alpha shrinks).
    pub fn resolve(mut self, seed_override: Option<u64>, pin_horizon: bool) -> Result<Self> {
        if let Some(seed) = seed_override {
            self.seed = seed;
        }
        if pin_horizon && self.horizon.is_none() {
            let scenario = self
                .scenario_params(None)
                .build(self.alpha)
                .map_err(|e| config_err(e.to_string()))?;
            self.horizon = Some(scenario.horizon as u64);
        }
        Ok(self)
    }

    pub fn scenario_params(&self, horizon_override: Option<usize>) -> ScenarioParams {
        ScenarioParams {
            x: self.scenario.x.to_params(),
            y: self.scenario.y.to_params(),
            z: self.scenario.z.to_params(),
            rho1: self.scenario.rho1,
            rho2: self.scenario.rho2,
            horizon: horizon_override.or(self.horizon.map(|h| h as usize)),
        }
    }

    pub fn trial_options(&self) -> TrialOptions {
        TrialOptions {
            compute_no_exchange: self.mode.needs_no_exchange(),
            ..TrialOptions::default()
        }
    }

    /// Serializes the resolved configuration for file headers. The text
    /// round-trips through `toml::from_str` back to an equal value.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| {
            CliError::Runtime(format!("cannot serialize resolved config: {e}"))
        })
    }
}
