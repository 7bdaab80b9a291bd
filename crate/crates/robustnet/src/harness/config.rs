//! Experiment configuration: defaults, key-value config files, overrides.
//!
//! Config files are flat `key = value` lines with dotted section prefixes
//! (`environment.*`, `train.*`, `eval.*`) and `#` comments. Every physical
//! constant of both environments has a named key whose default is the
//! reference protocol value; unknown keys are errors, never ignored.

use serde::{Deserialize, Serialize};

use crate::d2d::D2dConfig;
use crate::error::{Error, Result};
use crate::mimo::MimoConfig;
use crate::mlp::OptimizerConfig;
use crate::training::TrainConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvironmentKind {
    Mimo,
    D2d,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Percentile-trained network (uncertainty injection).
    Inject,
    /// Nominally trained network (no injection).
    Nominal,
    /// Nominal max-min oracle (bisection + fixed point).
    Maxmin,
    /// Equal power split.
    Uniform,
    /// Every link at full power.
    Full,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Inject => "inject",
            Method::Nominal => "nominal",
            Method::Maxmin => "maxmin",
            Method::Uniform => "uniform",
            Method::Full => "full",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "inject" => Ok(Method::Inject),
            "nominal" => Ok(Method::Nominal),
            "maxmin" => Ok(Method::Maxmin),
            "uniform" => Ok(Method::Uniform),
            "full" => Ok(Method::Full),
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }

    pub fn parse_list(s: &str) -> Result<Vec<Method>> {
        let methods: Vec<Method> = s
            .split(',')
            .filter(|t| !t.trim().is_empty())
            .map(Method::parse)
            .collect::<Result<_>>()?;
        if methods.is_empty() {
            return Err(Error::Config("method list is empty".into()));
        }
        Ok(methods)
    }

    pub fn is_learned(self) -> bool {
        matches!(self, Method::Inject | Method::Nominal)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Test pool size (scenarios).
    pub pool_size: usize,
    /// Evaluation realizations per test scenario.
    pub l_eval: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub environment: EnvironmentKind,
    pub mimo: MimoConfig,
    pub d2d: D2dConfig,
    /// Layouts used to fit the D2D input normalizer.
    pub normalizer_fit_layouts: usize,
    /// RZF regularization sweep (alpha-select verb).
    pub alpha_grid: Vec<f64>,
    pub alpha_scenarios: usize,
    pub alpha_realizations: usize,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub methods: Vec<Method>,
    pub master_seed: u64,
}

impl ExperimentConfig {
    /// Downlink defaults at desk scale: the reference physical constants with
    /// minutes-scale training counts. `paper_scale` restores the full counts.
    pub fn default_mimo() -> Self {
        Self {
            environment: EnvironmentKind::Mimo,
            mimo: MimoConfig::default(),
            d2d: D2dConfig::setting_a(),
            normalizer_fit_layouts: 1000,
            alpha_grid: vec![0.01, 0.05, 0.1, 0.2, 0.5, 1.0],
            alpha_scenarios: 200,
            alpha_realizations: 200,
            train: TrainConfig {
                gamma_percent: 5.0,
                l_inject: 200,
                minibatch_size: 200,
                minibatches_per_epoch: 20,
                max_epochs: 100,
                early_stop_patience: 50,
                optimizer: OptimizerConfig::adam(1e-3),
                validation_pool: 500,
                validation_realizations: 200,
                seed: 0,
            },
            eval: EvalConfig {
                pool_size: 200,
                l_eval: 500,
            },
            methods: vec![
                Method::Inject,
                Method::Nominal,
                Method::Maxmin,
                Method::Uniform,
            ],
            master_seed: 1,
        }
    }

    /// D2D defaults at desk scale for one of the deployment settings.
    pub fn default_d2d(setting: &str) -> Result<Self> {
        let mut cfg = Self::default_mimo();
        cfg.environment = EnvironmentKind::D2d;
        cfg.d2d = D2dConfig::for_setting(setting)?;
        cfg.train.gamma_percent = 10.0;
        cfg.methods = vec![
            Method::Inject,
            Method::Nominal,
            Method::Maxmin,
            Method::Full,
        ];
        Ok(cfg)
    }

    /// Restore the full-protocol counts.
    pub fn apply_paper_scale(&mut self) {
        self.train.minibatch_size = 1000;
        self.train.minibatches_per_epoch = 50;
        self.train.max_epochs = 500;
        self.train.l_inject = 1000;
        self.eval.pool_size = if self.environment == EnvironmentKind::Mimo {
            2000
        } else {
            1000
        };
        self.eval.l_eval = 1000;
    }

    pub fn gamma_percent(&self) -> f64 {
        self.train.gamma_percent
    }

    pub fn validate(&self) -> Result<()> {
        match self.environment {
            EnvironmentKind::Mimo => self.mimo.validate()?,
            EnvironmentKind::D2d => self.d2d.validate()?,
        }
        self.train.validate()?;
        if self.methods.is_empty() {
            return Err(Error::Config("method list is empty".into()));
        }
        if self.environment == EnvironmentKind::Mimo && self.methods.contains(&Method::Full) {
            return Err(Error::Config(
                "full power violates the downlink total-power constraint; use uniform".into(),
            ));
        }
        if self.eval.pool_size == 0 || self.eval.l_eval == 0 {
            return Err(Error::Config("evaluation counts must be >= 1".into()));
        }
        if self.alpha_grid.is_empty() || self.alpha_grid.iter().any(|&a| a < 0.0) {
            return Err(Error::Config("alpha grid must be non-empty and >= 0".into()));
        }
        Ok(())
    }

    /// Parse a config file: `key = value` lines, `#` comments.
    pub fn parse_file(text: &str) -> Result<Self> {
        let pairs = parse_key_values(text)?;
        // The environment kind (and D2D setting) select the defaults the
        // remaining keys override.
        let kind = pairs
            .iter()
            .find(|(k, _)| k == "environment.kind")
            .map(|(_, v)| v.as_str())
            .unwrap_or("mimo");
        let setting = pairs
            .iter()
            .find(|(k, _)| k == "environment.setting")
            .map(|(_, v)| v.as_str())
            .unwrap_or("A");
        let mut config = match kind {
            "mimo" => Self::default_mimo(),
            "d2d" => Self::default_d2d(setting)?,
            other => return Err(Error::Config(format!("unknown environment kind {other:?}"))),
        };
        for (key, value) in &pairs {
            if key == "environment.kind" || key == "environment.setting" {
                continue;
            }
            config.apply_override(key, value)?;
        }
        config.validate()?;
        Ok(config)
    }

    /// Apply one `key = value` override.
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
        }
        let mimo_env = self.environment == EnvironmentKind::Mimo;
        match key {
            "master_seed" => self.master_seed = num(key, value)?,
            "methods" => self.methods = Method::parse_list(value)?,

            "environment.antennas" => self.mimo.antennas = num(key, value)?,
            "environment.users" => self.mimo.users = num(key, value)?,
            "environment.total_power_watts" => self.mimo.total_power_watts = num(key, value)?,
            "environment.bandwidth_hz" => {
                if mimo_env {
                    self.mimo.bandwidth_hz = num(key, value)?;
                } else {
                    self.d2d.bandwidth_hz = num(key, value)?;
                }
            }
            "environment.noise_psd_dbm_hz" => {
                if mimo_env {
                    self.mimo.noise_psd_dbm_hz = num(key, value)?;
                } else {
                    self.d2d.noise_psd_dbm_hz = num(key, value)?;
                }
            }
            "environment.estimation_error_var" => {
                self.mimo.estimation_error_var = num(key, value)?
            }
            "environment.rzf_alpha" => self.mimo.rzf_alpha = num(key, value)?,
            "environment.alpha_grid" => {
                self.alpha_grid = value
                    .split(',')
                    .filter(|t| !t.trim().is_empty())
                    .map(|t| num("environment.alpha_grid", t.trim()))
                    .collect::<Result<_>>()?;
            }
            "environment.alpha_scenarios" => self.alpha_scenarios = num(key, value)?,
            "environment.alpha_realizations" => self.alpha_realizations = num(key, value)?,

            "environment.links" => self.d2d.links = num(key, value)?,
            "environment.region_size_m" => self.d2d.region_size_m = num(key, value)?,
            "environment.direct_dist_min_m" => self.d2d.direct_dist_min_m = num(key, value)?,
            "environment.direct_dist_max_m" => self.d2d.direct_dist_max_m = num(key, value)?,
            "environment.min_cross_separation_m" => {
                self.d2d.min_cross_separation_m = num(key, value)?
            }
            "environment.max_power_dbm" => self.d2d.max_power_dbm = num(key, value)?,
            "environment.shadowing_std_db" => self.d2d.shadowing_std_db = num(key, value)?,
            "environment.fast_fading" => {
                self.d2d.fast_fading = match value {
                    "true" => true,
                    "false" => false,
                    _ => return Err(Error::Config(format!("bad flag {value:?} for {key}"))),
                }
            }
            "environment.carrier_hz" => self.d2d.carrier_hz = num(key, value)?,
            "environment.antenna_height_m" => self.d2d.antenna_height_m = num(key, value)?,
            "environment.beam_direct_gain_db" => self.d2d.beam_direct_gain_db = num(key, value)?,
            "environment.beam_mainlobe_gain_db" => {
                self.d2d.beam_mainlobe_gain_db = num(key, value)?
            }
            "environment.beam_mainlobe_halfwidth_deg" => {
                self.d2d.beam_mainlobe_halfwidth_deg = num(key, value)?
            }
            "environment.beam_sidelobe_gain_db" => {
                self.d2d.beam_sidelobe_gain_db = num(key, value)?
            }
            "environment.rejection_budget" => self.d2d.rejection_budget = num(key, value)?,
            "environment.normalizer_fit_layouts" => {
                self.normalizer_fit_layouts = num(key, value)?
            }

            "train.gamma_percent" => self.train.gamma_percent = num(key, value)?,
            "train.l_inject" => self.train.l_inject = num(key, value)?,
            "train.minibatch_size" => self.train.minibatch_size = num(key, value)?,
            "train.minibatches_per_epoch" => self.train.minibatches_per_epoch = num(key, value)?,
            "train.max_epochs" => self.train.max_epochs = num(key, value)?,
            "train.early_stop_patience" => self.train.early_stop_patience = num(key, value)?,
            "train.validation_pool" => self.train.validation_pool = num(key, value)?,
            "train.validation_realizations" => {
                self.train.validation_realizations = num(key, value)?
            }
            "train.optimizer" => {
                let lr = self.train.optimizer.learning_rate();
                self.train.optimizer = match value {
                    "adam" => OptimizerConfig::adam(lr),
                    "sgd" => OptimizerConfig::Sgd { learning_rate: lr },
                    _ => {
                        return Err(Error::Config(format!(
                            "unknown optimizer {value:?} (adam or sgd)"
                        )))
                    }
                };
            }
            "train.learning_rate" => {
                let lr: f64 = num(key, value)?;
                self.train.optimizer = match self.train.optimizer {
                    OptimizerConfig::Sgd { .. } => OptimizerConfig::Sgd { learning_rate: lr },
                    OptimizerConfig::Adam {
                        beta1,
                        beta2,
                        epsilon,
                        ..
                    } => OptimizerConfig::Adam {
                        learning_rate: lr,
                        beta1,
                        beta2,
                        epsilon,
                    },
                };
            }
            "train.adam_beta1" | "train.adam_beta2" | "train.adam_epsilon" => {
                let v: f64 = num(key, value)?;
                if let OptimizerConfig::Adam {
                    learning_rate,
                    mut beta1,
                    mut beta2,
                    mut epsilon,
                } = self.train.optimizer
                {
                    match key {
                        "train.adam_beta1" => beta1 = v,
                        "train.adam_beta2" => beta2 = v,
                        _ => epsilon = v,
                    }
                    self.train.optimizer = OptimizerConfig::Adam {
                        learning_rate,
                        beta1,
                        beta2,
                        epsilon,
                    };
                } else {
                    return Err(Error::Config(format!("{key} requires the adam optimizer")));
                }
            }

            "eval.pool_size" => self.eval.pool_size = num(key, value)?,
            "eval.l_eval" => self.eval.l_eval = num(key, value)?,

            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }
}

fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected `key = value`", lineno + 1))
        })?;
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}
