//! `fibflow` command-line interface.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use fibflow::diagnostics::BoundConstants;
use fibflow::harness::{
    bounds_from_trace, generate_data, read_trace, replicate, run_experiment, write_atomic, write_dataset_csv,
    CellOutcome, DataSpec, ExperimentConfig,
};
use fibflow::odelimit::OdeStudyConfig;
use fibflow::spectral::{power_envelope, spectral_report, CompanionMatrix};

#[derive(Parser, Debug)]
#[command(name = "fibflow", version, about = "Recursive ensemble flows in kernel spaces")]
struct Cli {
    /// Override every seed in the input document.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for written artifacts.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run every method × replication cell of an experiment config.
    Run { config: PathBuf },
    /// Generate train/test CSV files from a data spec.
    GenData { spec: PathBuf },
    /// Companion-matrix spectrum of recursion coefficients θ₀ … θ_{m−1}.
    Spectral {
        #[arg(required = true, allow_negative_numbers = true)]
        coeffs: Vec<f64>,
        /// Also list ‖A^k‖ for k = 0 … K.
        #[arg(long, value_name = "K")]
        envelope: Option<usize>,
    },
    /// Recompute the generalization bounds for a stored trace.
    Bounds {
        trace: PathBuf,
        config: PathBuf,
        /// Method label inside the config (default: the first method).
        #[arg(long)]
        method: Option<String>,
        #[arg(long, default_value_t = 0)]
        replication: usize,
    },
    /// Discrete-to-continuous limit study; prints `dt,error` CSV.
    Ode { params: PathBuf },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_experiment(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    let cfg = ExperimentConfig::from_toml(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
    Ok(match seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    })
}

fn configure_threads(threads: Option<usize>) -> Result<()> {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        bail!("--threads must be at least 1");
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(cli: &Cli, config: &Path) -> Result<bool> {
    let cfg = load_experiment(config, cli.seed)?;
    let out = cli.out_dir.clone().or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| PathBuf::from("runs"));
    let summary = run_experiment(&cfg, &out)?;
    println!("{:<24} {:>4} {:>8} {:>12} {:>10} {:>8}", "method", "rep", "status", "test_rmse", "iters", "bound");
    for cell in &summary.cells {
        match &cell.outcome {
            CellOutcome::Ok { final_test_rmse, iterations_to_threshold, bound, .. } => println!(
                "{:<24} {:>4} {:>8} {:>12.6} {:>10} {:>8}",
                cell.method,
                cell.replication,
                "ok",
                final_test_rmse,
                iterations_to_threshold.map_or("-".to_string(), |t| t.to_string()),
                if bound.holds { "holds" } else { "VIOLATED" }
            ),
            CellOutcome::Failed { message } => {
                println!("{:<24} {:>4} {:>8} {message}", cell.method, cell.replication, "FAILED")
            }
        }
    }
    println!("summary: {}", out.join(fibflow::harness::SUMMARY_FILE).display());
    Ok(summary.all_ok())
}

fn gen_data(cli: &Cli, spec_path: &Path) -> Result<()> {
    let mut spec = DataSpec::from_toml(&read(spec_path)?).with_context(|| format!("parsing {}", spec_path.display()))?;
    if let Some(s) = cli.seed {
        spec.seed = s;
    }
    let out = cli.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    let (train, test) = generate_data(&spec)?;
    for (name, data) in [("train.csv", &train), ("test.csv", &test)] {
        let mut bytes = Vec::new();
        write_dataset_csv(data, &mut bytes)?;
        write_atomic(&out.join(name), &bytes)?;
    }
    println!("{} train / {} test rows written to {}", train.len(), test.len(), out.display());
    Ok(())
}

fn spectral(coeffs: &[f64], envelope: Option<usize>) -> Result<()> {
    let cm = CompanionMatrix::new(coeffs.to_vec())?;
    let mut doc = serde_json::to_value(spectral_report(&cm))?;
    if let Some(k) = envelope {
        doc["power_envelope"] = serde_json::to_value(power_envelope(&cm, k))?;
    }
    println!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(())
}

fn bounds(cli: &Cli, trace: &Path, config: &Path, method: Option<&str>, replication: usize) -> Result<bool> {
    let cfg = load_experiment(config, cli.seed)?;
    let chosen = match method {
        Some(label) => cfg
            .methods
            .iter()
            .find(|m| m.label() == label)
            .with_context(|| format!("no method {label:?} in {}", config.display()))?,
        None => &cfg.methods[0],
    };
    if replication >= cfg.replications {
        bail!("replication {replication} out of range (config has {})", cfg.replications);
    }
    let records = read_trace(fs::File::open(trace).with_context(|| format!("opening {}", trace.display()))?)?;
    let report = bounds_from_trace(
        &records,
        &replicate(chosen, replication),
        &cfg.data_for(replication),
        cfg.delta,
        BoundConstants::default(),
    )?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(report.holds)
}

fn ode(cli: &Cli, params: &Path) -> Result<()> {
    let cfg = OdeStudyConfig::from_toml(&read(params)?).with_context(|| format!("parsing {}", params.display()))?;
    let study = cfg.run()?;
    let csv = study.to_csv();
    print!("{csv}");
    eprintln!("fitted order: {:.4}", study.order);
    if let Some(out) = &cli.out_dir {
        write_atomic(&out.join("ode.csv"), csv.as_bytes())?;
        write_atomic(&out.join("ode.json"), serde_json::to_string_pretty(&study)?.as_bytes())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads(cli.threads).and_then(|()| match &cli.command {
        Command::Run { config } => run(&cli, config),
        Command::GenData { spec } => gen_data(&cli, spec).map(|()| true),
        Command::Spectral { coeffs, envelope } => spectral(coeffs, *envelope).map(|()| true),
        Command::Bounds { trace, config, method, replication } => {
            bounds(&cli, trace, config, method.as_deref(), *replication)
        }
        Command::Ode { params } => ode(&cli, params).map(|()| true),
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
