//! Experiment orchestration: training runs, paired evaluation, artifacts.
//!
//! Every method in a run is scored on the same test pool with the same
//! per-scenario realization draws (common random numbers), so method
//! orderings reflect policy differences rather than sampling noise. All
//! streams derive from the master seed; a repeated run writes byte-identical
//! CSV and JSON artifacts.

use std::collections::HashMap;
use std::path::Path;

use crate::baselines::{full_power, maxmin_nominal, uniform_power};
use crate::d2d::InputNormalizer;
use crate::error::{Error, Result};
use crate::mimo::{select_alpha, AlphaSelection};
use crate::mlp::MlpModel;
use crate::rng::derive_seed;
use crate::training::{
    default_model_for, evaluate_model, generate_pool, train_injected, train_nominal, D2dEnv,
    Environment, MimoEnv, TrainConfig, TrainLog,
};

use super::config::{EnvironmentKind, ExperimentConfig, Method};
use super::report::{EvalReport, MethodReport, REPORT_FORMAT_VERSION};

const TAG_TRAIN: u64 = 0x5452_4149;
const TAG_TEST: u64 = 0x5445_5354;
const TAG_MODEL_INIT: u64 = 0x4d49_4e49;
const TAG_NORMALIZER: u64 = 0x4e4f_524d;

/// Bisection tolerance of the max-min oracle when used as a baseline.
const MAXMIN_TOLERANCE: f64 = 1e-4;

fn train_config_for(config: &ExperimentConfig) -> TrainConfig {
    let mut tc = config.train.clone();
    tc.seed = derive_seed(config.master_seed, &[TAG_TRAIN]);
    tc
}

fn checkpoint_path(out: &Path, method: Method) -> std::path::PathBuf {
    out.join(format!("checkpoint_{}.txt", method.name()))
}

fn trainlog_path(out: &Path, method: Method) -> std::path::PathBuf {
    out.join(format!("trainlog_{}.csv", method.name()))
}

fn normalizer_path(out: &Path) -> std::path::PathBuf {
    out.join("normalizer.txt")
}

fn build_mimo_env(config: &ExperimentConfig) -> Result<MimoEnv> {
    MimoEnv::new(config.mimo.clone())
}

/// Build the D2D environment, loading a persisted normalizer when present
/// (it is deterministic from the master seed either way).
fn build_d2d_env(config: &ExperimentConfig, out_dir: Option<&Path>) -> Result<D2dEnv> {
    if let Some(out) = out_dir {
        let path = normalizer_path(out);
        if path.exists() {
            let normalizer = InputNormalizer::from_text(&std::fs::read_to_string(&path)?)?;
            return D2dEnv::new(config.d2d.clone(), normalizer);
        }
    }
    D2dEnv::bootstrap(
        config.d2d.clone(),
        config.normalizer_fit_layouts,
        derive_seed(config.master_seed, &[TAG_NORMALIZER]),
    )
}

/// Train every learned method in the config on one shared initialization.
fn train_generic<E: Environment>(
    env: &E,
    config: &ExperimentConfig,
) -> Result<Vec<(Method, MlpModel, TrainLog)>> {
    let tc = train_config_for(config);
    let learned: Vec<Method> = config
        .methods
        .iter()
        .copied()
        .filter(|m| m.is_learned())
        .collect();
    if learned.is_empty() {
        return Ok(Vec::new());
    }
    let init = default_model_for(env, derive_seed(config.master_seed, &[TAG_MODEL_INIT]))?;
    let mut out = Vec::new();
    for method in learned {
        let (model, log) = match method {
            Method::Inject => train_injected(init.clone(), env, &tc)?,
            Method::Nominal => train_nominal(init.clone(), env, &tc)?,
            _ => unreachable!(),
        };
        out.push((method, model, log));
    }
    Ok(out)
}

/// Evaluate every configured method on the shared paired test pool.
fn evaluate_generic<E: Environment>(
    env: &E,
    config: &ExperimentConfig,
    models: &HashMap<Method, (MlpModel, Option<usize>)>,
) -> Result<Vec<MethodReport>> {
    let pool = generate_pool(
        env,
        config.eval.pool_size,
        config.eval.l_eval,
        config.gamma_percent(),
        derive_seed(config.master_seed, &[TAG_TEST]),
    )?;
    let mut reports = Vec::new();
    for &method in &config.methods {
        let (eval, best_epoch) = match method {
            Method::Inject | Method::Nominal => {
                let (model, best_epoch) = models.get(&method).ok_or_else(|| {
                    Error::Usage(format!(
                        "no trained model for method {:?}; run the train verb first",
                        method.name()
                    ))
                })?;
                (evaluate_model(env, model, &pool)?, *best_epoch)
            }
            Method::Maxmin => (
                pool.evaluate(env, |s| {
                    Ok(maxmin_nominal(&env.nominal_system(s), env.constraint(), MAXMIN_TOLERANCE).x)
                })?,
                None,
            ),
            Method::Uniform => {
                let x = uniform_power(env.output_dim());
                (pool.evaluate(env, |_| Ok(x.clone()))?, None)
            }
            Method::Full => {
                let x = full_power(env.output_dim());
                (pool.evaluate(env, |_| Ok(x.clone()))?, None)
            }
        };
        reports.push(MethodReport {
            method: method.name().to_string(),
            mean_nominal_bps: eval.mean_nominal_bps(),
            mean_robust_bps: eval.mean_robust_bps(),
            per_scenario_robust_bps: eval.per_scenario_robust_bps,
            per_scenario_nominal_bps: eval.per_scenario_nominal_bps,
            best_epoch,
        });
    }
    Ok(reports)
}

fn assemble_report(config: &ExperimentConfig, methods: Vec<MethodReport>) -> EvalReport {
    EvalReport {
        format_version: REPORT_FORMAT_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        master_seed: config.master_seed,
        config: config.clone(),
        methods,
    }
}

fn write_report_files(report: &EvalReport, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("report.json"), report.to_json()?)?;
    std::fs::write(out.join("summary.csv"), report.summary_csv())?;
    for m in &report.methods {
        std::fs::write(
            out.join(format!("cdf_{}.csv", m.method)),
            report.cdf_csv(&m.method)?,
        )?;
    }
    Ok(())
}

fn write_training_artifacts(
    out: &Path,
    trained: &[(Method, MlpModel, TrainLog)],
    normalizer: Option<&InputNormalizer>,
) -> Result<()> {
    std::fs::create_dir_all(out)?;
    for (method, model, log) in trained {
        model.save_checkpoint(&checkpoint_path(out, *method))?;
        std::fs::write(trainlog_path(out, *method), log.to_csv())?;
    }
    if let Some(norm) = normalizer {
        std::fs::write(normalizer_path(out), norm.to_text())?;
    }
    Ok(())
}

/// Train the learned methods and persist checkpoints, training logs, and
/// (for D2D) the input normalizer.
pub fn train_methods(config: &ExperimentConfig, out: &Path) -> Result<()> {
    config.validate()?;
    match config.environment {
        EnvironmentKind::Mimo => {
            let env = build_mimo_env(config)?;
            let trained = train_generic(&env, config)?;
            write_training_artifacts(out, &trained, None)
        }
        EnvironmentKind::D2d => {
            let env = build_d2d_env(config, None)?;
            let trained = train_generic(&env, config)?;
            write_training_artifacts(out, &trained, Some(&env.normalizer))
        }
    }
}

/// Evaluate all configured methods, loading trained checkpoints from `out`;
/// writes `report.json`, `summary.csv`, and per-method CDF files there.
pub fn evaluate_methods(config: &ExperimentConfig, out: &Path) -> Result<EvalReport> {
    config.validate()?;
    let mut models = HashMap::new();
    for &method in config.methods.iter().filter(|m| m.is_learned()) {
        let path = checkpoint_path(out, method);
        if !path.exists() {
            return Err(Error::Usage(format!(
                "missing checkpoint {}; run the train verb first",
                path.display()
            )));
        }
        let model = MlpModel::load_checkpoint(&path)?;
        models.insert(method, (model, None));
    }
    let report = match config.environment {
        EnvironmentKind::Mimo => {
            let env = build_mimo_env(config)?;
            for (model, _) in models.values() {
                crate::training::validate_model_dims(&env, model)?;
            }
            assemble_report(config, evaluate_generic(&env, config, &models)?)
        }
        EnvironmentKind::D2d => {
            let env = build_d2d_env(config, Some(out))?;
            for (model, _) in models.values() {
                crate::training::validate_model_dims(&env, model)?;
            }
            assemble_report(config, evaluate_generic(&env, config, &models)?)
        }
    };
    write_report_files(&report, out)?;
    Ok(report)
}

/// Full protocol: train the learned methods, evaluate everything on the
/// shared pool, and (optionally) write all artifacts.
pub fn run_experiment(config: &ExperimentConfig, out: Option<&Path>) -> Result<EvalReport> {
    config.validate()?;
    let report = match config.environment {
        EnvironmentKind::Mimo => {
            let env = build_mimo_env(config)?;
            let trained = train_generic(&env, config)?;
            if let Some(out) = out {
                write_training_artifacts(out, &trained, None)?;
            }
            let models: HashMap<Method, (MlpModel, Option<usize>)> = trained
                .into_iter()
                .map(|(m, model, log)| (m, (model, Some(log.best_epoch))))
                .collect();
            assemble_report(config, evaluate_generic(&env, config, &models)?)
        }
        EnvironmentKind::D2d => {
            let env = build_d2d_env(config, None)?;
            let trained = train_generic(&env, config)?;
            if let Some(out) = out {
                write_training_artifacts(out, &trained, Some(&env.normalizer))?;
            }
            let models: HashMap<Method, (MlpModel, Option<usize>)> = trained
                .into_iter()
                .map(|(m, model, log)| (m, (model, Some(log.best_epoch))))
                .collect();
            assemble_report(config, evaluate_generic(&env, config, &models)?)
        }
    };
    if let Some(out) = out {
        write_report_files(&report, out)?;
    }
    Ok(report)
}

/// Run the RZF regularization sweep for the downlink environment.
pub fn run_alpha_selection(config: &ExperimentConfig) -> Result<AlphaSelection> {
    if config.environment != EnvironmentKind::Mimo {
        return Err(Error::Usage(
            "alpha selection applies to the downlink environment only".into(),
        ));
    }
    select_alpha(
        &config.mimo,
        &config.alpha_grid,
        config.alpha_scenarios,
        config.alpha_realizations,
        config.master_seed,
    )
}

/// CSV of the sweep: one row per grid point plus the selected value.
pub fn alpha_selection_csv(selection: &AlphaSelection) -> String {
    use super::report::format_sig;
    let mut out = String::from("alpha,median_min_rate_mbps\n");
    for (alpha, median) in &selection.medians {
        out.push_str(&format!(
            "{},{}\n",
            format_sig(*alpha, 6),
            format_sig(median / 1e6, 6)
        ));
    }
    out.push_str(&format!("selected,{}\n", format_sig(selection.alpha, 6)));
    out
}
