//! Versioned TOML experiment configuration.
//!
//! ```toml
//! version = 1
//! seed = 7
//!
//! [potential]
//! family = "power_law"
//! alpha = 1.0
//!
//! [disorder]
//! distribution = "gaussian"
//!
//! [time]
//! start = 0.0
//! stop = 20.0
//! count = 2000
//! ```
//!
//! Each experiment reads the sections it needs; see `ExperimentKind`.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use spinfade_core::averaging::SiteEstimator;
use spinfade_core::{
    DisorderSpec, Distribution, InitialState, PotentialSpec, TimeGrid, TruncationPolicy,
};

use crate::error::{CliError, Result};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Curve,
    DisorderAverage,
    VarianceScan,
    Covariance,
    DecayClassify,
    Ratio,
    FreeEnergy,
    Verify,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        Self::Curve,
        Self::DisorderAverage,
        Self::VarianceScan,
        Self::Covariance,
        Self::DecayClassify,
        Self::Ratio,
        Self::FreeEnergy,
        Self::Verify,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Curve => "curve",
            Self::DisorderAverage => "disorder-average",
            Self::VarianceScan => "variance-scan",
            Self::Covariance => "covariance",
            Self::DecayClassify => "decay-classify",
            Self::Ratio => "ratio",
            Self::FreeEnergy => "free-energy",
            Self::Verify => "verify",
        }
    }

    /// File stem for outputs, e.g. `variance_scan`.
    pub fn stem(self) -> String {
        self.name().replace('-', "_")
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| CliError::config("kind", format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    /// Optional; must match the subcommand when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<ExperimentKind>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialSpec>,
    /// Absent means nonrandom couplings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disorder: Option<DisorderSection>,
    #[serde(default)]
    pub state: StateSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeSection>,
    #[serde(default)]
    pub truncation: TruncationPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve: Option<CurveSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub average: Option<AverageSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance: Option<VarianceSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<CovarianceSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<DecaySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<RatioSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thermo: Option<ThermoSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderSection {
    pub distribution: Distribution,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSection {
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub b_field: f64,
}

impl Default for StateSection {
    fn default() -> Self {
        Self {
            gamma: -1.0,
            b_field: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default)]
    pub spacing: Spacing,
    /// Explicit times; excludes `start`/`stop`/`count`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

impl TimeSection {
    pub fn grid(&self) -> Result<TimeGrid> {
        let grid = match (&self.values, self.start, self.stop, self.count) {
            (Some(v), None, None, None) => TimeGrid::new(v.clone()),
            (None, Some(start), Some(stop), Some(count)) => {
                if count == 0 {
                    return Err(CliError::config("time.count", "must be >= 1"));
                }
                match self.spacing {
                    Spacing::Linear => TimeGrid::linear(start, stop, count),
                    Spacing::Log => TimeGrid::log(start, stop, count),
                }
            }
            _ => {
                return Err(CliError::config(
                    "time",
                    "give either `values` or all of `start`, `stop`, `count`",
                ))
            }
        };
        grid.map_err(|e| CliError::config("time", e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSection {
    #[serde(default)]
    pub site: i64,
    #[serde(default)]
    pub sample_index: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AverageSection {
    pub samples: u64,
    /// Average `X_m` over sites `-m..=m`; absent averages site 0 alone.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_m: Option<u64>,
    #[serde(default)]
    pub estimator: SiteEstimator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarianceSection {
    pub m: Vec<u64>,
    pub t: f64,
    pub samples: u64,
    #[serde(default)]
    pub estimator: SiteEstimator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovarianceSection {
    pub k: Vec<u64>,
    pub t: f64,
    /// Monte Carlo pairs per distance; zero reports the closed form only.
    #[serde(default)]
    pub samples: u64,
    #[serde(default)]
    pub estimator: SiteEstimator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecaySource {
    /// `delta wp cos(2Bt)` with nonrandom couplings, or with the configured
    /// disorder at `[curve]` when a `[disorder]` section is present.
    #[default]
    Curve,
    /// Closed-form disorder average for the configured distribution.
    Average,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecaySection {
    #[serde(default)]
    pub source: DecaySource,
    pub window_width: f64,
    #[serde(default)]
    pub t_min: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_range: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_ratio: Option<f64>,
    #[serde(default)]
    pub floor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatioSection {
    pub window_width: f64,
    #[serde(default)]
    pub t_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermoSection {
    pub n: Vec<u64>,
    pub beta: f64,
    pub samples: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: default_out() }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        if config.version != CONFIG_VERSION {
            return Err(CliError::config(
                "version",
                format!(
                    "unsupported version {}, expected {CONFIG_VERSION}",
                    config.version
                ),
            ));
        }
        config
            .truncation
            .validate()
            .map_err(|e| CliError::config("truncation", e.to_string()))?;
        InitialState::from_gamma(config.state.gamma)
            .map_err(|e| CliError::config("state.gamma", e.to_string()))?;
        if !config.state.b_field.is_finite() {
            return Err(CliError::config("state.b_field", "must be finite"));
        }
        Ok(config)
    }

    pub fn potential(&self) -> Result<&PotentialSpec> {
        self.potential
            .as_ref()
            .ok_or_else(|| CliError::missing("potential"))
    }

    pub fn distribution(&self) -> Result<Distribution> {
        self.disorder
            .map(|d| d.distribution)
            .ok_or_else(|| CliError::missing("disorder"))
    }

    pub fn disorder_spec(&self) -> Result<DisorderSpec> {
        Ok(DisorderSpec::new(self.distribution()?, self.seed))
    }

    pub fn state(&self) -> InitialState {
        InitialState::from_gamma(self.state.gamma).expect("validated on load")
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        self.time
            .as_ref()
            .ok_or_else(|| CliError::missing("time"))?
            .grid()
    }

    /// Sections an experiment cannot run without.
    pub fn check_for(&self, kind: ExperimentKind) -> Result<()> {
        if let Some(k) = self.kind {
            if k != kind {
                return Err(CliError::config(
                    "kind",
                    format!("config is for `{k}` but `{kind}` was requested"),
                ));
            }
        }
        let need = |present: bool, name: &'static str| {
            if present {
                Ok(())
            } else {
                Err(CliError::missing(name))
            }
        };
        match kind {
            ExperimentKind::Curve => {
                self.potential()?;
                self.grid()?;
            }
            ExperimentKind::DisorderAverage => {
                self.potential()?;
                self.distribution()?;
                self.grid()?;
                need(self.average.is_some(), "average")?;
            }
            ExperimentKind::VarianceScan => {
                self.potential()?;
                self.distribution()?;
                need(self.variance.is_some(), "variance")?;
            }
            ExperimentKind::Covariance => {
                self.potential()?;
                self.distribution()?;
                need(self.covariance.is_some(), "covariance")?;
            }
            ExperimentKind::DecayClassify => {
                self.potential()?;
                self.grid()?;
                need(self.decay.is_some(), "decay")?;
                if self.decay.is_some_and(|d| d.source == DecaySource::Average) {
                    self.distribution()?;
                }
            }
            ExperimentKind::Ratio => {
                self.potential()?;
                self.grid()?;
                need(self.ratio.is_some(), "ratio")?;
            }
            ExperimentKind::FreeEnergy => {
                self.potential()?;
                self.distribution()?;
                need(self.thermo.is_some(), "thermo")?;
            }
            ExperimentKind::Verify => {}
        }
        Ok(())
    }
}
