use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::approx::{smooth_fit, CompositePolySpec, SmoothFit, SmoothTarget};
use crate::engine::NoiseMode;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Activation {
    /// x * (g^(k)(x / range) + 1) / 2 with k the minimal depth for (sigma, delta).
    ApproxRelu {
        d: u32,
        sigma: u32,
        delta: f64,
        #[serde(default = "default_range")]
        range: f64,
    },
    ApproxSigmoid {
        degree: usize,
        interval: [f64; 2],
    },
    Identity,
}

fn default_range() -> f64 {
    8.0
}

fn default_level() -> u32 {
    6
}

fn default_r() -> u32 {
    1
}

fn default_timeout_ms() -> u64 {
    60_000
}

/// Training parameters. Unknown keys are rejected when parsing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    pub layers: usize,
    /// Output width of each layer; the last one is the class count.
    pub neurons: Vec<usize>,
    pub learning_rate: f64,
    pub global_iters: u32,
    pub batch_size: usize,
    pub party_count: u16,
    pub activation: Activation,
    pub seed: u64,
    #[serde(default)]
    pub output_activation: Option<Activation>,
    #[serde(default)]
    pub ring_dim: Option<usize>,
    #[serde(default = "default_level")]
    pub initial_level: u32,
    #[serde(default = "default_r")]
    pub rescale_every_r: u32,
    /// Use L = (Y - M)^2 (elementwise) instead of the squared-loss gradient.
    #[serde(default)]
    pub squared_residual_loss: bool,
    #[serde(default = "default_timeout_ms")]
    pub round_timeout_ms: u64,
    #[serde(default)]
    pub noise: NoiseMode,
}

/// Activation resolved into evaluable parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum ActKind {
    Identity,
    Relu {
        spec: CompositePolySpec,
        inv_range: f64,
    },
    Sigmoid {
        fit: SmoothFit,
    },
}

impl Activation {
    pub fn resolve(&self) -> Result<ActKind> {
        match self {
            Activation::Identity => Ok(ActKind::Identity),
            Activation::ApproxRelu {
                d,
                sigma,
                delta,
                range,
            } => {
                if !(*range > 0.0) {
                    return Err(Error::Config(format!(
                        "activation range must be > 0, got {range}"
                    )));
                }
                Ok(ActKind::Relu {
                    spec: CompositePolySpec::for_target(*d, *sigma, *delta)?,
                    inv_range: 1.0 / range,
                })
            }
            Activation::ApproxSigmoid { degree, interval } => Ok(ActKind::Sigmoid {
                fit: smooth_fit(SmoothTarget::Sigmoid, *degree, interval[0], interval[1])?,
            }),
        }
    }
}

impl TrainingConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: TrainingConfig = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("line {} column {}: {e}", e.line(), e.column())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        TrainingConfig::from_json(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.layers < 1 {
            return bad("layers must be >= 1".into());
        }
        if self.neurons.len() != self.layers {
            return bad(format!(
                "neurons lists {} widths for {} layers",
                self.neurons.len(),
                self.layers
            ));
        }
        if self.neurons.contains(&0) {
            return bad("every layer needs at least one neuron".into());
        }
        if !(self.learning_rate > 0.0) {
            return bad(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            ));
        }
        if self.batch_size < 1 {
            return bad("batch_size must be >= 1".into());
        }
        if self.party_count < 1 {
            return bad("party_count must be >= 1".into());
        }
        if self.global_iters < 1 {
            return bad("global_iters must be >= 1".into());
        }
        if self.rescale_every_r != 1 {
            return bad(format!(
                "rescale_every_r = {} is not supported; only 1 (rescale after every product)",
                self.rescale_every_r
            ));
        }
        if self.initial_level < 4 {
            return bad(format!(
                "initial_level must be >= 4 for the training schedule, got {}",
                self.initial_level
            ));
        }
        self.activation.resolve()?;
        if let Some(a) = &self.output_activation {
            a.resolve()?;
        }
        Ok(())
    }

    pub fn round_timeout(&self) -> Duration {
        Duration::from_millis(self.round_timeout_ms)
    }

    pub fn hidden_act(&self) -> Result<ActKind> {
        self.activation.resolve()
    }

    pub fn output_act(&self) -> Result<ActKind> {
        self.output_activation
            .as_ref()
            .unwrap_or(&Activation::Identity)
            .resolve()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "layers": 2, "neurons": [16, 2], "learning_rate": 0.5, "global_iters": 10,
        "batch_size": 8, "party_count": 3, "seed": 7,
        "activation": {"kind": "approx_relu", "d": 4, "sigma": 8, "delta": 0.01}
    }"#;

    #[test]
    fn parses_with_defaults() {
        let c = TrainingConfig::from_json(BASE).unwrap();
        assert_eq!(c.initial_level, 6);
        assert_eq!(c.rescale_every_r, 1);
        assert!(!c.squared_residual_loss);
        assert!(matches!(c.hidden_act().unwrap(), ActKind::Relu { .. }));
        assert_eq!(c.output_act().unwrap(), ActKind::Identity);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let typo = BASE.replace("\"seed\"", "\"sede\"");
        let err = TrainingConfig::from_json(&typo).unwrap_err().to_string();
        assert!(err.contains("sede"), "{err}");
        assert!(err.contains("line"), "{err}");
        let r2 = BASE.replace("\"seed\": 7", "\"seed\": 7, \"rescale_every_r\": 2");
        assert!(TrainingConfig::from_json(&r2).is_err());
        let zero = BASE.replace("\"party_count\": 3", "\"party_count\": 0");
        assert!(TrainingConfig::from_json(&zero).is_err());
        let widths = BASE.replace("[16, 2]", "[16]");
        assert!(TrainingConfig::from_json(&widths).is_err());
    }

    #[test]
    fn sigmoid_and_identity() {
        let s = BASE.replace(
            r#"{"kind": "approx_relu", "d": 4, "sigma": 8, "delta": 0.01}"#,
            r#"{"kind": "approx_sigmoid", "degree": 7, "interval": [-8, 8]}"#,
        );
        let c = TrainingConfig::from_json(&s).unwrap();
        assert!(matches!(c.hidden_act().unwrap(), ActKind::Sigmoid { .. }));
        let i = BASE.replace(
            r#"{"kind": "approx_relu", "d": 4, "sigma": 8, "delta": 0.01}"#,
            r#"{"kind": "identity"}"#,
        );
        assert_eq!(
            TrainingConfig::from_json(&i).unwrap().hidden_act().unwrap(),
            ActKind::Identity
        );
    }
}
