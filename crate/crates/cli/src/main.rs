use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use catsim::tomo::TomoSettings;
use catsim::tracegen::read_traces_binary;
use catsim::{Error, ExperimentConfig};
use clap::{Args, Parser, Subcommand};

use catsim_cli::pipeline::{analyze_traces, rho_to_json, run_pipeline, PipelineOptions};
use catsim_cli::report::loss_report;
use catsim_cli::theory::{theory_curves, write_theory_csv};
use catsim_cli::fit;

/// Simulate and analyze heralded cat-state generation from CW squeezed light.
#[derive(Parser)]
#[command(name = "catsim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// JSON config; defaults apply for missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (falls back to $CATSIM_OUT_DIR, then ./catsim-out).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline over the configured pump powers.
    Simulate {
        #[command(flatten)]
        common: CommonOpts,
        /// Run only this pump power (mW); repeatable.
        #[arg(long)]
        pump: Vec<f64>,
        /// Skip trace synthesis; sample quadratures directly in the known
        /// temporal mode.
        #[arg(long)]
        no_trace_stage: bool,
    },
    /// Analyze an external binary trace file (mode, quadratures, ρ̂, W_min).
    Analyze {
        #[command(flatten)]
        common: CommonOpts,
        /// Binary trace file produced by this tool or a compatible writer.
        #[arg(long)]
        traces: PathBuf,
    },
    /// Emit the deterministic theory table over a pump grid.
    Theory {
        #[command(flatten)]
        common: CommonOpts,
        /// Pump powers (mW); defaults to the configured list.
        #[arg(long)]
        pump: Vec<f64>,
    },
    /// Print the loss-budget report as JSON.
    LossReport {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Fit the variance law to a CSV of (pump_mw, theta_deg, variance) rows.
    FitEq8 {
        /// Input CSV with header pump_mw,theta_deg,variance.
        #[arg(long)]
        input: PathBuf,
    },
}

fn load_config(common: &CommonOpts) -> Result<ExperimentConfig, Error> {
    let mut cfg: ExperimentConfig = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            serde_json::from_str(&text)
                .map_err(|e| Error::config("/", format!("config parse error: {e}")))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(common: &CommonOpts) -> PathBuf {
    common
        .out_dir
        .clone()
        .or_else(|| std::env::var_os("CATSIM_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("catsim-out"))
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate {
            common,
            pump,
            no_trace_stage,
        } => {
            let cfg = load_config(&common)?;
            let dir = out_dir(&common);
            let opts = PipelineOptions {
                no_trace_stage,
                pumps: if pump.is_empty() { None } else { Some(pump) },
                seed: common.seed,
                tomo: TomoSettings::default(),
            };
            let manifest = run_pipeline(&cfg, &dir, &opts)?;
            println!("{}", serde_json::to_string_pretty(&manifest)?);
            eprintln!("manifest written to {}", dir.join("manifest.json").display());
        }
        Command::Analyze { common, traces } => {
            let traces = read_traces_binary(&traces)?;
            let dir = out_dir(&common);
            fs::create_dir_all(&dir)?;
            let analysis = analyze_traces(&traces, &TomoSettings::default())?;
            catsim::modeest::write_mode_csv(&dir.join("mode.csv"), &analysis.mode)?;
            analysis.dataset.write_csv(&dir.join("quadratures.csv"))?;
            fs::write(
                dir.join("rho.json"),
                serde_json::to_string_pretty(&rho_to_json(&analysis.reconstruction.rho))?,
            )?;
            println!(
                "{}",
                serde_json::json!({
                    "wigner_min": analysis.wigner_min,
                    "parity_value": analysis.parity_value,
                    "gamma_hat": analysis.mode.gamma,
                    "mle_iterations": analysis.reconstruction.iterations,
                    "mle_converged": analysis.reconstruction.converged(),
                })
            );
        }
        Command::Theory { common, pump } => {
            let cfg = load_config(&common)?;
            let pumps = if pump.is_empty() {
                cfg.pump_powers_mw.clone()
            } else {
                pump
            };
            let rows = theory_curves(&cfg, &pumps)?;
            write_theory_csv(std::io::stdout().lock(), &rows)?;
        }
        Command::LossReport { common } => {
            let cfg = load_config(&common)?;
            let report = loss_report(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::FitEq8 { input } => {
            let text = fs::read_to_string(&input)?;
            let mut grouped: Vec<fit::PumpVariances> = Vec::new();
            for (i, line) in text.lines().enumerate() {
                if i == 0 {
                    if line.trim() != "pump_mw,theta_deg,variance" {
                        return Err(Error::config(
                            "/",
                            "expected CSV header pump_mw,theta_deg,variance",
                        ));
                    }
                    continue;
                }
                if line.trim().is_empty() {
                    continue;
                }
                let cols: Vec<&str> = line.split(',').collect();
                if cols.len() != 3 {
                    return Err(Error::config("/", format!("bad row {i}: {line}")));
                }
                let parse = |s: &str| -> Result<f64, Error> {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::config("/", format!("row {i}: {e}")))
                };
                let (p, theta_deg, v) = (parse(cols[0])?, parse(cols[1])?, parse(cols[2])?);
                match grouped.iter_mut().find(|g| (g.pump_mw - p).abs() < 1e-12) {
                    Some(g) => g.points.push((theta_deg.to_radians(), v)),
                    None => grouped.push(fit::PumpVariances {
                        pump_mw: p,
                        points: vec![(theta_deg.to_radians(), v)],
                    }),
                }
            }
            let result = fit::fit_eq8(&grouped)?;
            println!(
                "{}",
                serde_json::json!({
                    "loss": result.loss,
                    "pumps": grouped.iter().zip(&result.rs).map(|(g, r)| {
                        serde_json::json!({ "pump_mw": g.pump_mw, "r": r })
                    }).collect::<Vec<_>>(),
                    "weighted_residual": result.weighted_residual,
                })
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config { .. }) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
