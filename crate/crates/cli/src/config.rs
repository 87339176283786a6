//! TOML configuration files for the training and experiment commands.
//!
//! Every `[train]` key is optional and overlays the built-in defaults;
//! command-line flags override the file in turn.

use std::path::Path;

use serde::Deserialize;

use widthnet::train::{ExperimentSpec, TrainConfig};
use widthnet::{Error, Result};

/// Optional overrides for [`TrainConfig`].
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainOverrides {
    pub learning_rate: Option<f64>,
    pub adadelta_rho: Option<f64>,
    pub adadelta_eps: Option<f64>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub seed: Option<u64>,
    pub record_best: Option<bool>,
}

impl TrainOverrides {
    pub fn apply(&self, mut base: TrainConfig) -> TrainConfig {
        if let Some(v) = self.learning_rate {
            base.learning_rate = v;
        }
        if let Some(v) = self.adadelta_rho {
            base.adadelta_rho = v;
        }
        if let Some(v) = self.adadelta_eps {
            base.adadelta_eps = v;
        }
        if let Some(v) = self.batch_size {
            base.batch_size = v;
        }
        if let Some(v) = self.epochs {
            base.epochs = v;
        }
        if let Some(v) = self.seed {
            base.seed = v;
        }
        if let Some(v) = self.record_best {
            base.record_best = v;
        }
        base
    }

    pub fn has_epochs(&self) -> bool {
        self.epochs.is_some()
    }
}

/// Config for `reproduce-table1`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReproduceConfig {
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub train: TrainOverrides,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub n: usize,
    pub k: usize,
    pub trials: usize,
    #[serde(default)]
    pub grid_size: Option<usize>,
}

impl ExperimentSection {
    pub fn to_spec(&self) -> ExperimentSpec {
        ExperimentSpec {
            n: self.n,
            k: self.k,
            trials: self.trials,
            grid_size: self.grid_size,
        }
    }
}

/// Config for `phase-probe`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub probe: ProbeSection,
    #[serde(default)]
    pub train: TrainOverrides,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    pub n: usize,
    pub widths: Vec<usize>,
    pub depth: usize,
    pub epsilon: f64,
    pub half_width: f64,
    pub cells_per_axis: usize,
    #[serde(default = "default_quad")]
    pub quad_per_axis: usize,
    /// One of `zero`, `box`, `radial-bump`.
    pub target: String,
    #[serde(default)]
    pub center: Option<Vec<f64>>,
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub height: Option<f64>,
    #[serde(default)]
    pub lower: Option<Vec<f64>>,
    #[serde(default)]
    pub upper: Option<Vec<f64>>,
}

fn default_quad() -> usize {
    201
}

/// A boxed target function for the probe.
pub type TargetFn = Box<dyn Fn(&[f64]) -> f64 + Sync>;

impl ProbeSection {
    /// Builds the sampled target function.
    pub fn target_fn(&self) -> Result<TargetFn> {
        let height = self.height.unwrap_or(1.0);
        match self.target.as_str() {
            "zero" => Ok(Box::new(|_: &[f64]| 0.0)),
            "radial-bump" => {
                let center = self
                    .center
                    .clone()
                    .unwrap_or_else(|| vec![0.0; self.n]);
                if center.len() != self.n {
                    return Err(Error::Invalid(format!(
                        "center has {} coordinates but n = {}",
                        center.len(),
                        self.n
                    )));
                }
                let radius = self.radius.unwrap_or(0.8);
                if radius <= 0.0 {
                    return Err(Error::Invalid("radius must be > 0".into()));
                }
                Ok(Box::new(move |x: &[f64]| {
                    let r = x
                        .iter()
                        .zip(&center)
                        .map(|(v, c)| (v - c) * (v - c))
                        .sum::<f64>()
                        .sqrt();
                    height * (1.0 - r / radius).max(0.0)
                }))
            }
            "box" => {
                let lower = self
                    .lower
                    .clone()
                    .ok_or_else(|| Error::Invalid("box target needs `lower`".into()))?;
                let upper = self
                    .upper
                    .clone()
                    .ok_or_else(|| Error::Invalid("box target needs `upper`".into()))?;
                if lower.len() != self.n || upper.len() != self.n {
                    return Err(Error::Invalid(
                        "box bounds must have n coordinates".into(),
                    ));
                }
                Ok(Box::new(move |x: &[f64]| {
                    let inside = x
                        .iter()
                        .zip(lower.iter().zip(&upper))
                        .all(|(v, (a, b))| v >= a && v <= b);
                    if inside {
                        height
                    } else {
                        0.0
                    }
                }))
            }
            other => Err(Error::Invalid(format!(
                "unknown probe target '{}' (expected zero, box, or radial-bump)",
                other
            ))),
        }
    }
}

/// Config for `train`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainFileConfig {
    pub data: DataSection,
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainOverrides,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub path: String,
    pub input_dim: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub width: usize,
    pub depth: usize,
}

/// Parses a TOML config file into `T` with file/field context on failure.
pub fn load_toml<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
    toml::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
