//! Command-line front end for the experiment harness.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use robustnet::harness::{
    alpha_selection_csv, compare_methods, evaluate_methods, run_alpha_selection, train_methods,
    EvalReport, ExperimentConfig, Method,
};

#[derive(Parser)]
#[command(
    name = "robustnet",
    version,
    about = "Outage-robust power allocation: train, evaluate, and compare policies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Key-value config file (defaults to the MIMO downlink protocol).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for checkpoints, logs, and reports.
    #[arg(long)]
    out: PathBuf,
    /// Use the full-protocol training and evaluation counts.
    #[arg(long)]
    paper_scale: bool,
    /// Comma-separated methods (inject,nominal,maxmin,uniform,full).
    #[arg(long)]
    methods: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train the learned methods; writes checkpoints and training logs.
    Train(RunArgs),
    /// Evaluate all configured methods on the shared paired test pool.
    Evaluate(RunArgs),
    /// Summarize a saved report: pairwise ratios and ordering checks.
    Compare {
        /// Directory containing report.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-emit sorted robust-value CDF files from a saved report.
    Cdf {
        /// Directory containing report.json.
        #[arg(long)]
        out: PathBuf,
        /// Restrict to these methods (default: all in the report).
        #[arg(long)]
        methods: Option<String>,
    },
    /// Sweep the RZF regularization grid and report the selected alpha.
    AlphaSelect {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Optional directory for alpha_selection.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn resolve_config(
    config: &Option<PathBuf>,
    seed: Option<u64>,
    paper_scale: bool,
    methods: &Option<String>,
) -> robustnet::Result<ExperimentConfig> {
    let mut cfg = match config {
        Some(path) => ExperimentConfig::parse_file(&std::fs::read_to_string(path)?)?,
        None => ExperimentConfig::default_mimo(),
    };
    if let Some(seed) = seed {
        cfg.master_seed = seed;
    }
    if paper_scale {
        cfg.apply_paper_scale();
    }
    if let Some(list) = methods {
        cfg.methods = Method::parse_list(list)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_report(out: &PathBuf) -> robustnet::Result<EvalReport> {
    let path = out.join("report.json");
    EvalReport::from_json(&std::fs::read_to_string(&path).map_err(|e| {
        robustnet::Error::Usage(format!("cannot read {}: {e}", path.display()))
    })?)
}

fn run() -> robustnet::Result<()> {
    match Cli::parse().command {
        Command::Train(args) => {
            let cfg = resolve_config(&args.config, args.seed, args.paper_scale, &args.methods)?;
            train_methods(&cfg, &args.out)?;
            println!(
                "trained {} into {}",
                cfg.methods
                    .iter()
                    .filter(|m| m.is_learned())
                    .map(|m| m.name())
                    .collect::<Vec<_>>()
                    .join(", "),
                args.out.display()
            );
        }
        Command::Evaluate(args) => {
            let cfg = resolve_config(&args.config, args.seed, args.paper_scale, &args.methods)?;
            let report = evaluate_methods(&cfg, &args.out)?;
            print!("{}", report.summary_csv());
            println!("report written to {}", args.out.join("report.json").display());
        }
        Command::Compare { out } => {
            let report = load_report(&out)?;
            let summary = compare_methods(&report)?;
            print!("{}", summary.to_text());
        }
        Command::Cdf { out, methods } => {
            let report = load_report(&out)?;
            let selected: Vec<String> = match methods {
                Some(list) => Method::parse_list(&list)?
                    .into_iter()
                    .map(|m| m.name().to_string())
                    .collect(),
                None => report.methods.iter().map(|m| m.method.clone()).collect(),
            };
            for name in selected {
                let path = out.join(format!("cdf_{name}.csv"));
                std::fs::write(&path, report.cdf_csv(&name)?)?;
                println!("wrote {}", path.display());
            }
        }
        Command::AlphaSelect { config, seed, out } => {
            let cfg = resolve_config(&config, seed, false, &None)?;
            let selection = run_alpha_selection(&cfg)?;
            for (alpha, median) in &selection.medians {
                println!("alpha {alpha:<8} median min-rate {:.4} Mbps", median / 1e6);
            }
            println!("selected alpha = {}", selection.alpha);
            if let Some(out) = out {
                std::fs::create_dir_all(&out)?;
                let path = out.join("alpha_selection.csv");
                std::fs::write(&path, alpha_selection_csv(&selection))?;
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
