//! Uncertainty-injection training and evaluation.
//!
//! One training step per scenario: forward the network on the measured
//! features to get an allocation `x`, inject `L` channel realizations drawn
//! conditionally on the measurement, compute the minimum rate under each,
//! select the empirical gamma-percentile, and backpropagate the rate
//! gradient of only the selected realization(s) through the network. The
//! nominal trainer is the identical loop with the injected distribution
//! collapsed to the measurement itself.
//!
//! Every random decision is derived from `TrainConfig::seed` through fixed
//! stream paths, so runs are reproducible regardless of thread count.

use ndarray::{Array1, Array2};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

use crate::baselines::PowerConstraint;
use crate::d2d::{self, D2dConfig, D2dRealization, D2dScenario, InputNormalizer};
use crate::error::{Error, Result};
use crate::mimo::{self, MimoConfig, MimoRealization, MimoScenario};
use crate::mlp::{Gradients, MlpModel, OptimizerConfig, OutputActivation};
use crate::percentile::{empirical_percentile, percentile_gradient};
use crate::rng::{derive_seed, stream_rng};
use crate::system::InterferenceSystem;

const TAG_SCENARIO: u64 = 0x5343_454e;
const TAG_REALIZE: u64 = 0x5245_414c;
const TAG_VALIDATION: u64 = 0x5641_4c44;
const TAG_POOL_SCENARIO: u64 = 0x504f_4f4c;
const TAG_POOL_REALIZE: u64 = 0x5052_4541;
const TAG_INIT: u64 = 0x494e_4954;

/// An optimization environment: scenario generation, conditional uncertainty
/// sampling, and the utility (minimum rate) with its allocation gradient.
pub trait Environment: Sync {
    type Scenario: Send + Sync;
    type Realization: Send + Sync;

    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn output_activation(&self) -> OutputActivation;
    fn constraint(&self) -> PowerConstraint;
    /// Hidden widths of the reference network architecture for this
    /// environment.
    fn default_hidden_dims(&self) -> Vec<usize>;

    fn sample_scenario(&self, rng: &mut ChaCha8Rng) -> Result<Self::Scenario>;
    fn input_features(&self, scenario: &Self::Scenario) -> Vec<f64>;
    fn sample_realizations(
        &self,
        scenario: &Self::Scenario,
        rng: &mut ChaCha8Rng,
        l: usize,
    ) -> Vec<Self::Realization>;
    /// The point-mass realization `p = q`.
    fn nominal_realization(&self, scenario: &Self::Scenario) -> Self::Realization;
    fn min_rate(
        &self,
        scenario: &Self::Scenario,
        realization: &Self::Realization,
        x: &[f64],
    ) -> Result<f64>;
    fn min_rate_gradient(
        &self,
        scenario: &Self::Scenario,
        realization: &Self::Realization,
        x: &[f64],
    ) -> Result<Vec<f64>>;
    /// Nominal coupling system for the deterministic baselines.
    fn nominal_system(&self, scenario: &Self::Scenario) -> InterferenceSystem;
}

/// MIMO downlink power loading over a fixed antenna/user geometry.
pub struct MimoEnv {
    pub config: MimoConfig,
}

impl MimoEnv {
    pub fn new(config: MimoConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }
}

impl Environment for MimoEnv {
    type Scenario = MimoScenario;
    type Realization = MimoRealization;

    fn input_dim(&self) -> usize {
        self.config.users * self.config.users
    }

    fn output_dim(&self) -> usize {
        self.config.users
    }

    fn output_activation(&self) -> OutputActivation {
        OutputActivation::Softmax
    }

    fn constraint(&self) -> PowerConstraint {
        PowerConstraint::Simplex
    }

    fn default_hidden_dims(&self) -> Vec<usize> {
        vec![200, 200, 200]
    }

    fn sample_scenario(&self, rng: &mut ChaCha8Rng) -> Result<MimoScenario> {
        mimo::sample_scenario(&self.config, rng)
    }

    fn input_features(&self, scenario: &MimoScenario) -> Vec<f64> {
        scenario.input_features()
    }

    fn sample_realizations(
        &self,
        scenario: &MimoScenario,
        rng: &mut ChaCha8Rng,
        l: usize,
    ) -> Vec<MimoRealization> {
        mimo::sample_realizations(scenario, rng, l)
    }

    fn nominal_realization(&self, scenario: &MimoScenario) -> MimoRealization {
        mimo::nominal_realization(scenario)
    }

    fn min_rate(
        &self,
        scenario: &MimoScenario,
        realization: &MimoRealization,
        x: &[f64],
    ) -> Result<f64> {
        mimo::mimo_min_rate(scenario, realization, x)
    }

    fn min_rate_gradient(
        &self,
        scenario: &MimoScenario,
        realization: &MimoRealization,
        x: &[f64],
    ) -> Result<Vec<f64>> {
        mimo::mimo_min_rate_gradient(scenario, realization, x)
    }

    fn nominal_system(&self, scenario: &MimoScenario) -> InterferenceSystem {
        mimo::nominal_system(scenario)
    }
}

/// D2D power control from normalized log-pathloss inputs.
pub struct D2dEnv {
    pub config: D2dConfig,
    pub normalizer: InputNormalizer,
}

impl D2dEnv {
    pub fn new(config: D2dConfig, normalizer: InputNormalizer) -> Result<Self> {
        config.validate()?;
        if normalizer.dim() != config.links * config.links {
            return Err(Error::Config(format!(
                "normalizer dimension {} does not match N^2 = {}",
                normalizer.dim(),
                config.links * config.links
            )));
        }
        Ok(Self { config, normalizer })
    }

    /// Fit the input normalizer on fresh layouts, then build the environment.
    pub fn bootstrap(config: D2dConfig, fit_layouts: usize, seed: u64) -> Result<Self> {
        let normalizer = InputNormalizer::fit_from_layouts(&config, fit_layouts, seed)?;
        Self::new(config, normalizer)
    }
}

impl Environment for D2dEnv {
    type Scenario = D2dScenario;
    type Realization = D2dRealization;

    fn input_dim(&self) -> usize {
        self.config.links * self.config.links
    }

    fn output_dim(&self) -> usize {
        self.config.links
    }

    fn output_activation(&self) -> OutputActivation {
        OutputActivation::Sigmoid
    }

    fn constraint(&self) -> PowerConstraint {
        PowerConstraint::Box
    }

    fn default_hidden_dims(&self) -> Vec<usize> {
        let width = 6 * self.config.links * self.config.links;
        vec![width; 4]
    }

    fn sample_scenario(&self, rng: &mut ChaCha8Rng) -> Result<D2dScenario> {
        d2d::sample_layout(&self.config, rng)
    }

    fn input_features(&self, scenario: &D2dScenario) -> Vec<f64> {
        self.normalizer
            .normalize(&scenario.log_gains_db())
            .expect("normalizer dimension checked at construction")
    }

    fn sample_realizations(
        &self,
        scenario: &D2dScenario,
        rng: &mut ChaCha8Rng,
        l: usize,
    ) -> Vec<D2dRealization> {
        d2d::sample_d2d_realizations(scenario, rng, l)
    }

    fn nominal_realization(&self, scenario: &D2dScenario) -> D2dRealization {
        d2d::nominal_realization(scenario)
    }

    fn min_rate(
        &self,
        scenario: &D2dScenario,
        realization: &D2dRealization,
        x: &[f64],
    ) -> Result<f64> {
        d2d::d2d_min_rate(scenario, realization, x)
    }

    fn min_rate_gradient(
        &self,
        scenario: &D2dScenario,
        realization: &D2dRealization,
        x: &[f64],
    ) -> Result<Vec<f64>> {
        d2d::d2d_min_rate_gradient(scenario, realization, x)
    }

    fn nominal_system(&self, scenario: &D2dScenario) -> InterferenceSystem {
        d2d::nominal_system(scenario)
    }
}

/// Build the reference model for an environment, seeded deterministically.
pub fn default_model_for<E: Environment>(env: &E, seed: u64) -> Result<MlpModel> {
    let mut dims = vec![env.input_dim()];
    dims.extend(env.default_hidden_dims());
    dims.push(env.output_dim());
    let mut rng = stream_rng(seed, &[TAG_INIT]);
    MlpModel::new(&dims, env.output_activation(), &mut rng)
}

/// Check that a model's input/output widths match an environment.
pub fn validate_model_dims<E: Environment>(env: &E, model: &MlpModel) -> Result<()> {
    if model.input_dim() != env.input_dim() || model.output_dim() != env.output_dim() {
        return Err(Error::Config(format!(
            "model widths {}->{} do not match environment {}->{}",
            model.input_dim(),
            model.output_dim(),
            env.input_dim(),
            env.output_dim()
        )));
    }
    if model.output_activation() != env.output_activation() {
        return Err(Error::Config(
            "model output activation does not match the environment constraint".into(),
        ));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrainMode {
    /// Percentile objective over injected uncertainty realizations.
    Inject,
    /// Nominal objective at the measurement (no injection).
    Nominal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Percentile of the robust objective, percent in (0, 100).
    pub gamma_percent: f64,
    /// Injected realizations per scenario visit.
    pub l_inject: usize,
    /// Scenarios per minibatch.
    pub minibatch_size: usize,
    pub minibatches_per_epoch: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub early_stop_patience: usize,
    pub optimizer: OptimizerConfig,
    /// Held-out scenarios for validation.
    pub validation_pool: usize,
    /// Realizations per validation scenario.
    pub validation_realizations: usize,
    /// Master seed for every stream this run touches.
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_percent > 0.0 && self.gamma_percent < 100.0) {
            return Err(Error::Config("gamma must lie in (0, 100) percent".into()));
        }
        if self.l_inject == 0
            || self.minibatch_size == 0
            || self.minibatches_per_epoch == 0
            || self.max_epochs == 0
            || self.early_stop_patience == 0
            || self.validation_pool == 0
            || self.validation_realizations == 0
        {
            return Err(Error::Config("all training counts must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean validation gamma-percentile min-rate, bits/s.
    pub val_robust_bps: f64,
    /// Mean validation nominal min-rate, bits/s.
    pub val_nominal_bps: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct TrainLog {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    pub skipped_scenarios: u64,
}

impl TrainLog {
    /// CSV with one appended row per epoch: epoch, validation metrics (Mbps),
    /// wall seconds.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,val_robust_mbps,val_nominal_mbps,seconds\n");
        for e in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{:.3}\n",
                e.epoch,
                crate::harness::report::format_sig(e.val_robust_bps / 1e6, 6),
                crate::harness::report::format_sig(e.val_nominal_bps / 1e6, 6),
                e.seconds
            ));
        }
        out
    }

    /// Equality of everything reproducible (wall time excluded).
    pub fn metrics_equal(&self, other: &TrainLog) -> bool {
        self.best_epoch == other.best_epoch
            && self.skipped_scenarios == other.skipped_scenarios
            && self.epochs.len() == other.epochs.len()
            && self
                .epochs
                .iter()
                .zip(&other.epochs)
                .all(|(a, b)| {
                    a.epoch == b.epoch
                        && a.val_robust_bps == b.val_robust_bps
                        && a.val_nominal_bps == b.val_nominal_bps
                })
    }
}

/// A fixed scenario pool with paired realization streams: every policy
/// evaluated against it sees identical scenarios and identical realizations.
pub struct EvalPool<S> {
    pub scenarios: Vec<S>,
    realization_seed: u64,
    pub l_eval: usize,
    pub gamma: f64,
}

/// Evaluation outcome of one policy on one pool.
#[derive(Clone, Debug)]
pub struct PolicyEval {
    pub per_scenario_nominal_bps: Vec<f64>,
    pub per_scenario_robust_bps: Vec<f64>,
}

impl PolicyEval {
    pub fn mean_nominal_bps(&self) -> f64 {
        mean(&self.per_scenario_nominal_bps)
    }

    pub fn mean_robust_bps(&self) -> f64 {
        mean(&self.per_scenario_robust_bps)
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Generate a fixed evaluation pool from a seed.
pub fn generate_pool<E: Environment>(
    env: &E,
    size: usize,
    l_eval: usize,
    gamma: f64,
    seed: u64,
) -> Result<EvalPool<E::Scenario>> {
    if size == 0 || l_eval == 0 {
        return Err(Error::Config("evaluation pool and L_eval must be >= 1".into()));
    }
    let scenarios: Vec<E::Scenario> = (0..size)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, &[TAG_POOL_SCENARIO, i as u64]);
            env.sample_scenario(&mut rng)
        })
        .collect::<Result<_>>()?;
    Ok(EvalPool {
        scenarios,
        realization_seed: seed,
        l_eval,
        gamma,
    })
}

impl<S: Send + Sync> EvalPool<S> {
    /// Score one allocation policy: per-scenario nominal min-rate and
    /// empirical gamma-percentile min-rate over `l_eval` paired realizations.
    pub fn evaluate<E, F>(&self, env: &E, allocate: F) -> Result<PolicyEval>
    where
        E: Environment<Scenario = S>,
        F: Fn(&S) -> Result<Vec<f64>> + Sync,
    {
        let results: Vec<(f64, f64)> = self
            .scenarios
            .par_iter()
            .enumerate()
            .map(|(i, scenario)| {
                let x = allocate(scenario)?;
                let nominal = env.min_rate(scenario, &env.nominal_realization(scenario), &x)?;
                let mut rng = stream_rng(self.realization_seed, &[TAG_POOL_REALIZE, i as u64]);
                let realizations = env.sample_realizations(scenario, &mut rng, self.l_eval);
                let utilities: Vec<f64> = realizations
                    .iter()
                    .map(|r| env.min_rate(scenario, r, &x))
                    .collect::<Result<_>>()?;
                let robust = empirical_percentile(&utilities, self.gamma)?.value;
                Ok((nominal, robust))
            })
            .collect::<Result<_>>()?;
        Ok(PolicyEval {
            per_scenario_nominal_bps: results.iter().map(|r| r.0).collect(),
            per_scenario_robust_bps: results.iter().map(|r| r.1).collect(),
        })
    }
}

/// Evaluate a frozen model on a pool (read-only).
pub fn evaluate_model<E: Environment>(
    env: &E,
    model: &MlpModel,
    pool: &EvalPool<E::Scenario>,
) -> Result<PolicyEval> {
    validate_model_dims(env, model)?;
    pool.evaluate(env, |s| model.infer(&env.input_features(s)))
}

/// du/dx of the empirical percentile objective for one scenario under a
/// frozen realization set: utility gradients of the selected realization(s),
/// combined with the interpolation weights. `None` when a utility diverged.
fn scenario_output_gradient<E: Environment>(
    env: &E,
    scenario: &E::Scenario,
    realizations: &[E::Realization],
    x: &[f64],
    gamma: f64,
) -> Result<Option<Vec<f64>>> {
    let utilities: Vec<f64> = realizations
        .iter()
        .map(|r| env.min_rate(scenario, r, x))
        .collect::<Result<_>>()?;
    if utilities.iter().any(|u| !u.is_finite()) {
        return Ok(None);
    }
    let selection = empirical_percentile(&utilities, gamma)?;
    let mut dudx = vec![0.0; x.len()];
    for (index, weight) in percentile_gradient(&selection) {
        let g = env.min_rate_gradient(scenario, &realizations[index], x)?;
        for (d, gv) in dudx.iter_mut().zip(g) {
            *d += weight * gv;
        }
    }
    if dudx.iter().any(|v| !v.is_finite()) {
        return Ok(None);
    }
    Ok(Some(dudx))
}

/// Mean empirical-percentile objective over scenarios with frozen
/// realization sets; the value side of the end-to-end gradient check.
pub fn percentile_objective<E: Environment>(
    env: &E,
    model: &MlpModel,
    scenarios: &[E::Scenario],
    realizations: &[Vec<E::Realization>],
    gamma: f64,
) -> Result<f64> {
    let mut acc = 0.0;
    for (scenario, reals) in scenarios.iter().zip(realizations) {
        let x = model.infer(&env.input_features(scenario))?;
        let utilities: Vec<f64> = reals
            .iter()
            .map(|r| env.min_rate(scenario, r, &x))
            .collect::<Result<_>>()?;
        acc += empirical_percentile(&utilities, gamma)?.value;
    }
    Ok(acc / scenarios.len() as f64)
}

/// Value and parameter gradient of [`percentile_objective`].
pub fn percentile_objective_gradient<E: Environment>(
    env: &E,
    model: &MlpModel,
    scenarios: &[E::Scenario],
    realizations: &[Vec<E::Realization>],
    gamma: f64,
) -> Result<(f64, Gradients)> {
    validate_model_dims(env, model)?;
    let b = scenarios.len();
    if b == 0 || realizations.len() != b {
        return Err(Error::Usage("scenario and realization counts differ".into()));
    }
    let inputs = stack_inputs(env, scenarios)?;
    let (outputs, tape) = model.forward_batch(&inputs)?;

    let mut value = 0.0;
    let mut out_grads = Array2::zeros((b, env.output_dim()));
    for (i, (scenario, reals)) in scenarios.iter().zip(realizations).enumerate() {
        let x: Vec<f64> = outputs.row(i).to_vec();
        let utilities: Vec<f64> = reals
            .iter()
            .map(|r| env.min_rate(scenario, r, &x))
            .collect::<Result<_>>()?;
        let selection = empirical_percentile(&utilities, gamma)?;
        value += selection.value;
        let dudx = scenario_output_gradient(env, scenario, reals, &x, gamma)?
            .ok_or_else(|| Error::Numerical("diverged utility in frozen minibatch".into()))?;
        for (j, v) in dudx.iter().enumerate() {
            out_grads[[i, j]] = v / b as f64;
        }
    }
    let grads = model.backward_batch(&tape, &out_grads)?;
    Ok((value / b as f64, grads))
}

fn stack_inputs<E: Environment>(env: &E, scenarios: &[E::Scenario]) -> Result<Array2<f64>> {
    let mut inputs = Array2::zeros((scenarios.len(), env.input_dim()));
    for (i, s) in scenarios.iter().enumerate() {
        let features = env.input_features(s);
        if features.len() != env.input_dim() {
            return Err(Error::Config("feature length mismatch".into()));
        }
        inputs.row_mut(i).assign(&Array1::from(features));
    }
    Ok(inputs)
}

/// Train with uncertainty injection (percentile objective).
pub fn train_injected<E: Environment>(
    model: MlpModel,
    env: &E,
    config: &TrainConfig,
) -> Result<(MlpModel, TrainLog)> {
    train(model, env, config, TrainMode::Inject)
}

/// Train on the nominal objective: the identical loop with the injected
/// distribution replaced by the point mass at the measurement.
pub fn train_nominal<E: Environment>(
    model: MlpModel,
    env: &E,
    config: &TrainConfig,
) -> Result<(MlpModel, TrainLog)> {
    train(model, env, config, TrainMode::Nominal)
}

fn train<E: Environment>(
    mut model: MlpModel,
    env: &E,
    config: &TrainConfig,
    mode: TrainMode,
) -> Result<(MlpModel, TrainLog)> {
    config.validate()?;
    validate_model_dims(env, &model)?;

    let val_pool = generate_pool(
        env,
        config.validation_pool,
        config.validation_realizations,
        config.gamma_percent,
        derive_seed(config.seed, &[TAG_VALIDATION]),
    )?;

    let mut log = TrainLog {
        epochs: Vec::with_capacity(config.max_epochs),
        best_epoch: 0,
        skipped_scenarios: 0,
    };
    let mut best_metric = f64::NEG_INFINITY;
    let mut best_model = model.clone();

    for epoch in 0..config.max_epochs {
        let started = Instant::now();
        for mb in 0..config.minibatches_per_epoch {
            let skipped = minibatch_step(&mut model, env, config, mode, epoch, mb)?;
            log.skipped_scenarios += skipped as u64;
        }

        let eval = evaluate_model(env, &model, &val_pool)?;
        let val_robust = eval.mean_robust_bps();
        let val_nominal = eval.mean_nominal_bps();
        log.epochs.push(EpochStats {
            epoch,
            val_robust_bps: val_robust,
            val_nominal_bps: val_nominal,
            seconds: started.elapsed().as_secs_f64(),
        });

        // Keep-best on the objective this mode optimizes.
        let metric = match mode {
            TrainMode::Inject => val_robust,
            TrainMode::Nominal => val_nominal,
        };
        if metric > best_metric {
            best_metric = metric;
            best_model = model.clone();
            log.best_epoch = epoch;
        } else if epoch - log.best_epoch >= config.early_stop_patience {
            break;
        }
    }
    Ok((best_model, log))
}

/// One ascent step on one freshly sampled minibatch; returns the number of
/// skipped (diverged) scenarios.
fn minibatch_step<E: Environment>(
    model: &mut MlpModel,
    env: &E,
    config: &TrainConfig,
    mode: TrainMode,
    epoch: usize,
    mb: usize,
) -> Result<usize> {
    let b = config.minibatch_size;
    let scenarios: Vec<E::Scenario> = (0..b)
        .into_par_iter()
        .map(|slot| {
            let mut rng = stream_rng(
                config.seed,
                &[TAG_SCENARIO, epoch as u64, mb as u64, slot as u64],
            );
            env.sample_scenario(&mut rng)
        })
        .collect::<Result<_>>()?;

    let inputs = stack_inputs(env, &scenarios)?;
    let (outputs, tape) = model.forward_batch(&inputs)?;

    let rows: Vec<Option<Vec<f64>>> = (0..b)
        .into_par_iter()
        .map(|slot| {
            let scenario = &scenarios[slot];
            let x: Vec<f64> = outputs.row(slot).to_vec();
            match mode {
                TrainMode::Inject => {
                    let mut rng = stream_rng(
                        config.seed,
                        &[TAG_REALIZE, epoch as u64, mb as u64, slot as u64],
                    );
                    let realizations = env.sample_realizations(scenario, &mut rng, config.l_inject);
                    scenario_output_gradient(env, scenario, &realizations, &x, config.gamma_percent)
                }
                TrainMode::Nominal => {
                    let nominal = env.nominal_realization(scenario);
                    let utility = env.min_rate(scenario, &nominal, &x)?;
                    if !utility.is_finite() {
                        return Ok(None);
                    }
                    let dudx = env.min_rate_gradient(scenario, &nominal, &x)?;
                    if dudx.iter().any(|v| !v.is_finite()) {
                        return Ok(None);
                    }
                    Ok(Some(dudx))
                }
            }
        })
        .collect::<Result<_>>()?;

    let skipped = rows.iter().filter(|r| r.is_none()).count();
    if skipped * 100 > b {
        return Err(Error::Numerical(format!(
            "{skipped} of {b} scenarios in a minibatch produced non-finite utilities"
        )));
    }
    let effective = (b - skipped).max(1);
    let scale = 1.0 / effective as f64;

    let mut out_grads = Array2::zeros((b, env.output_dim()));
    for (slot, row) in rows.iter().enumerate() {
        if let Some(dudx) = row {
            for (j, v) in dudx.iter().enumerate() {
                out_grads[[slot, j]] = v * scale;
            }
        }
    }
    let grads = model.backward_batch(&tape, &out_grads)?;
    model.step(&grads, &config.optimizer)?;
    Ok(skipped)
}
