//! The `somnus` experiment runner.
//!
//! Subcommands:
//! - `run --config <path>`: run an experiment, write the report JSON (and
//!   optional trace CSV), print a one-line summary.
//! - `bound --theorem <id> ...`: evaluate a closed-form regret bound.
//! - `equivalence --T <n> --seed <s>`: drive Shannon-FTARL and SB-EXP3 in
//!   lockstep and print their maximum distribution gap.
//!
//! Exit codes: 0 success, 2 configuration error, 3 monitor violation.
//! `SOMNUS_THREADS` caps replicate parallelism.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use somnus::envs::stochastic_env;
use somnus::harness::{
    run_experiment, shannon_equivalence_gap, theoretical_bound, validate_config, BoundParams,
    ExperimentConfig, ExperimentOutput, Theorem,
};

const EXIT_CONFIG: u8 = 2;
const EXIT_MONITOR: u8 = 3;

const CONFIG_SCHEMA: u64 = 1;

#[derive(Parser)]
#[command(name = "somnus", version, about = "Sleeping-bandits experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config file.
    Run(RunArgs),
    /// Print the value of a closed-form regret bound.
    Bound(BoundArgs),
    /// Print the max elementwise gap between Shannon-FTARL and SB-EXP3
    /// distributions over a shared run.
    Equivalence(EquivalenceArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to the experiment config (JSON, schema 1).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's replicate count.
    #[arg(long)]
    replicates: Option<u32>,
    /// Override the config's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for the report and trace files (default: current dir).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundArgs {
    /// Theorem id: 3.1, 3.2, 3.4, 3.5, 3.7, 3.8, 4.1, 4.2 or 4.3.
    #[arg(long)]
    theorem: String,
    /// G_T: number of arms ever active.
    #[arg(long)]
    gt: Option<f64>,
    /// Σ_t A_t (binary) or Σ_t Σ_i I_{i,t} (confidence).
    #[arg(long = "sum-a")]
    sum_a: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Horizon T.
    #[arg(long)]
    t: Option<f64>,
    /// Max active arms A.
    #[arg(long)]
    a: Option<f64>,
    /// Arm count K.
    #[arg(long)]
    k: Option<f64>,
    /// Expert count M.
    #[arg(long)]
    m: Option<f64>,
    /// Switch count S.
    #[arg(long)]
    s: Option<f64>,
}

#[derive(Args)]
struct EquivalenceArgs {
    /// Horizon of the lockstep run.
    #[arg(long = "T")]
    horizon: u64,
    /// Seed for both the random script and the sampling stream.
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    eta: f64,
    #[arg(long, default_value_t = 0.05)]
    gamma: f64,
    /// Arms in the generated script.
    #[arg(long, default_value_t = 8)]
    k: usize,
    /// Active arms per round.
    #[arg(long, default_value_t = 3)]
    a: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct OutputConfig {
    #[serde(default = "default_report_name")]
    report: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    trace_csv: Option<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            report: default_report_name(),
            trace_csv: None,
        }
    }
}

fn default_report_name() -> String {
    "report.json".into()
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Bound(args) => cmd_bound(args),
        Command::Equivalence(args) => cmd_equivalence(args),
    };
    match result {
        Ok(code) => code,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    match std::env::var("SOMNUS_THREADS") {
        Ok(value) => {
            let n: usize = value.parse().map_err(|_| {
                Failure::config(format!("SOMNUS_THREADS=`{value}` is not a thread count"))
            })?;
            if n == 0 {
                return Err(Failure::config("SOMNUS_THREADS must be >= 1"));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Failure::runtime(format!("thread pool: {e}")))
        }
        Err(_) => Ok(()),
    }
}

fn parse_config(path: &Path) -> Result<(ExperimentConfig, OutputConfig), Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    let mut doc: serde_json::Map<String, serde_json::Value> = serde_json::from_str(&text)
        .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    match doc.remove("schema") {
        Some(serde_json::Value::Number(n)) if n.as_u64() == Some(CONFIG_SCHEMA) => {}
        Some(other) => {
            return Err(Failure::config(format!(
                "{}: unsupported schema {other}",
                path.display()
            )))
        }
        None => {
            return Err(Failure::config(format!(
                "{}: missing field `schema`",
                path.display()
            )))
        }
    }
    let output: OutputConfig = match doc.remove("output") {
        Some(v) => serde_json::from_value(v)
            .map_err(|e| Failure::config(format!("{}: field `output`: {e}", path.display())))?,
        None => OutputConfig::default(),
    };
    let experiment: ExperimentConfig = serde_json::from_value(serde_json::Value::Object(doc))
        .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    Ok((experiment, output))
}

fn cmd_run(args: RunArgs) -> Result<ExitCode, Failure> {
    configure_threads()?;
    let (mut config, output) = parse_config(&args.config)?;
    if let Some(replicates) = args.replicates {
        config.replicates = replicates;
    }
    if let Some(seed) = args.seed {
        config.base_seed = seed;
    }
    if output.trace_csv.is_some() {
        config.collect_traces = true;
    }

    validate_config(&config)
        .map_err(|e| Failure::config(format!("{}: {e}", args.config.display())))?;
    let out = run_experiment(&config).map_err(|e| Failure::runtime(e.to_string()))?;

    let out_dir = args.out.unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| Failure::runtime(format!("{}: {e}", out_dir.display())))?;
    let report_path = out_dir.join(&output.report);
    let report_json = serde_json::to_string_pretty(&out.report)
        .map_err(|e| Failure::runtime(e.to_string()))?;
    std::fs::write(&report_path, report_json.as_bytes())
        .map_err(|e| Failure::runtime(format!("{}: {e}", report_path.display())))?;

    if let Some(name) = &output.trace_csv {
        let csv_path = out_dir.join(name);
        write_trace_csv(&csv_path, &out)
            .map_err(|e| Failure::runtime(format!("{}: {e}", csv_path.display())))?;
    }

    match &out.report.bound {
        Some(b) => println!(
            "mean max-regret {:.4} | bound {:.4} (thm {}) | ratio {:.3}",
            out.report.mean_max_regret,
            b.value,
            b.theorem.id(),
            b.ratio
        ),
        None => println!(
            "mean max-regret {:.4} | bound n/a",
            out.report.mean_max_regret
        ),
    }

    if out.report.monitor_violations > 0 {
        eprintln!(
            "error: {} monitor violation(s) recorded; see {}",
            out.report.monitor_violations,
            report_path.display()
        );
        return Ok(ExitCode::from(EXIT_MONITOR));
    }
    Ok(ExitCode::SUCCESS)
}

fn write_trace_csv(path: &Path, out: &ExperimentOutput) -> std::io::Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(file, "replicate,t,chosen_arm,observed_loss")?;
    if let Some(traces) = &out.traces {
        for (replicate, rows) in traces.iter().enumerate() {
            for row in rows {
                writeln!(
                    file,
                    "{},{},{},{}",
                    replicate,
                    row.t,
                    row.chosen.one_based(),
                    row.observed_loss
                )?;
            }
        }
    }
    file.flush()
}

fn cmd_bound(args: BoundArgs) -> Result<ExitCode, Failure> {
    let theorem = Theorem::parse(&args.theorem).map_err(|e| Failure::config(e.to_string()))?;
    let params = BoundParams {
        arms_ever_active: args.gt,
        sum_activations: args.sum_a,
        eta: args.eta,
        gamma: args.gamma,
        beta: args.beta,
        delta: args.delta,
        horizon: args.t,
        max_active: args.a,
        num_arms: args.k,
        num_experts: args.m,
        switches: args.s,
    };
    let value = theoretical_bound(theorem, &params).map_err(|e| Failure::config(e.to_string()))?;
    println!("{value}");
    Ok(ExitCode::SUCCESS)
}

fn cmd_equivalence(args: EquivalenceArgs) -> Result<ExitCode, Failure> {
    if args.a < 1 || args.a > args.k {
        return Err(Failure::config(format!(
            "need 1 <= a <= k, got a={}, k={}",
            args.a, args.k
        )));
    }
    let means: Vec<f64> = (0..args.k)
        .map(|i| 0.2 + 0.6 * i as f64 / (args.k.max(2) - 1) as f64)
        .collect();
    let script = stochastic_env(args.k, args.a, args.horizon, &means, args.seed)
        .map_err(|e| Failure::config(e.to_string()))?;
    let gap = shannon_equivalence_gap(&script, args.eta, args.gamma, args.seed.wrapping_add(1))
        .map_err(|e| Failure::runtime(e.to_string()))?;
    println!("max distribution gap over {} rounds: {gap:e}", args.horizon);
    if gap >= 1e-9 {
        eprintln!("error: gap exceeds 1e-9");
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}
