use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use nsw_core::backtest::{compare_strategies, BacktestError, run_nsw_backtest, run_parcel_backtest, ComparisonTable};
use nsw_core::baselines::{standard_grid, IndicatorKind};
use nsw_core::config::{synthesize, ConfigError, RunConfig, RunManifest};
use nsw_core::signal::write_signal_log;
use nsw_core::timeseries::{load_bars, PriceSeries, SeriesError};

#[derive(Parser, Debug)]
#[command(name = "nsw", version, about = "Nonlinear stochastic wavelet trading model")]
struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set theta=0.1` or `--set synth.bars=5000`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Run directory; defaults to `<output_dir>/<command>`.
    #[arg(short, long, global = true)]
    out: Option<PathBuf>,
    /// More logging (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate synthetic bar files from the configured generator.
    Synth,
    /// Single-instrument NSW backtest.
    Backtest { data: PathBuf },
    /// Multi-instrument parcel backtest with periodic weight re-optimization.
    Parcel {
        #[arg(required = true)]
        data: Vec<PathBuf>,
    },
    /// Table of final profitability: tuned baselines against NSW.
    Compare {
        #[arg(required = true)]
        data: Vec<PathBuf>,
        /// Baselines to include.
        #[arg(long, value_delimiter = ',', default_values = ["pc", "bb", "macd", "rsi"])]
        baselines: Vec<Baseline>,
        /// Leave the NSW column out.
        #[arg(long)]
        no_nsw: bool,
        /// Also print published reference values in the same layout.
        #[arg(long)]
        reference: bool,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Baseline {
    Pc,
    Bb,
    Macd,
    Rsi,
}

impl From<Baseline> for IndicatorKind {
    fn from(b: Baseline) -> Self {
        match b {
            Baseline::Pc => IndicatorKind::PriceChannel,
            Baseline::Bb => IndicatorKind::Bollinger,
            Baseline::Macd => IndicatorKind::Macd,
            Baseline::Rsi => IndicatorKind::Rsi,
        }
    }
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Backtest { .. } => "backtest",
            Command::Parcel { .. } => "parcel",
            Command::Compare { .. } => "compare",
        }
    }
}

/// Errors caused by the invocation rather than the computation.
fn is_usage_error(err: &anyhow::Error) -> bool {
    err.chain().any(|e| {
        e.downcast_ref::<ConfigError>().is_some()
            || e.downcast_ref::<SeriesError>().is_some()
            || matches!(e.downcast_ref::<BacktestError>(), Some(BacktestError::MisalignedSeries(_)))
    })
}

fn load_all(paths: &[PathBuf], cfg: &RunConfig) -> Result<Vec<PriceSeries>> {
    let spec = cfg.column_spec();
    paths
        .iter()
        .map(|p| load_bars(p, &spec).with_context(|| format!("loading {}", p.display())))
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    let cfg = RunConfig::load(cli.config.as_deref(), &cli.overrides)?;
    let dir = cli
        .out
        .clone()
        .unwrap_or_else(|| cfg.output_dir.join(cli.command.name()));
    let mut manifest = RunManifest::new(cli.command.name(), &cfg);

    match &cli.command {
        Command::Synth => {
            std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            for s in synthesize(&cfg)? {
                let path = dir.join(format!("{}.csv", s.symbol()));
                s.write_csv(&path)?;
                println!("wrote {} ({} bars)", path.display(), s.len());
                manifest.outputs.push(path);
            }
        }
        Command::Backtest { data } => {
            let series = load_all(std::slice::from_ref(data), &cfg)?.remove(0);
            manifest.inputs.push(data.clone());
            std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            let (report, signals) = run_nsw_backtest(&cfg.engine_config(), &series, &cfg.backtest_config())?;
            report.check_decision_fraction();
            report.write_to(&dir)?;
            let log_path = dir.join("signals.csv");
            write_signal_log(&log_path, series.timestamps(), &signals)?;
            for f in ["report.json", "equity.csv", "trades.csv"] {
                manifest.outputs.push(dir.join(f));
            }
            manifest.outputs.push(log_path);
            println!(
                "{}: final Z {:.6}, {} trades, decision fraction {:.4}",
                report.instrument,
                report.final_z,
                report.trades.len(),
                report.decision_fraction
            );
        }
        Command::Parcel { data } => {
            let series = load_all(data, &cfg)?;
            manifest.inputs.extend(data.iter().cloned());
            std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            let (parcel, reports) = run_parcel_backtest(
                &cfg.engine_config(),
                &series,
                &cfg.parcel_config(),
                &cfg.backtest_config(),
            )?;
            for r in &reports {
                let sub = dir.join(&r.instrument);
                r.write_to(&sub)?;
                manifest.outputs.push(sub);
            }
            let json = dir.join("parcel.json");
            let mut summary = serde_json::to_value(&parcel)?;
            if let Some(obj) = summary.as_object_mut() {
                obj.remove("equity");
                obj.remove("timestamps");
                obj.remove("weights");
            }
            std::fs::write(&json, serde_json::to_string_pretty(&summary)?)?;
            parcel.write_equity_csv(dir.join("parcel_equity.csv"))?;
            parcel.write_weights_csv(dir.join("weights.csv"))?;
            manifest.outputs.extend([json, dir.join("parcel_equity.csv"), dir.join("weights.csv")]);
            println!("parcel of {}: final Z {:.6}", parcel.instruments.join(", "), parcel.final_z);
            for r in &reports {
                println!("  {}: final Z {:.6}", r.instrument, r.final_z);
            }
        }
        Command::Compare {
            data,
            baselines,
            no_nsw,
            reference,
        } => {
            let series = load_all(data, &cfg)?;
            manifest.inputs.extend(data.iter().cloned());
            std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            let grids: Vec<_> = baselines
                .iter()
                .map(|b| {
                    let kind = IndicatorKind::from(*b);
                    (kind, standard_grid(kind))
                })
                .collect();
            let engine = cfg.engine_config();
            let table = compare_strategies(
                &series,
                (!no_nsw).then_some(&engine),
                &grids,
                &cfg.backtest_config(),
            )?;
            print!("{}", table.render());
            if *reference {
                println!("\npublished reference (2009-2010 minute bars, not reproducible here):");
                print!("{}", ComparisonTable::render_reference());
            }
            table.write_csv(dir.join("comparison.csv"))?;
            std::fs::write(dir.join("comparison.json"), serde_json::to_string_pretty(&table)?)?;
            manifest.outputs.extend([dir.join("comparison.csv"), dir.join("comparison.json")]);
        }
    }
    let path = manifest.write(&dir)?;
    log::info!("manifest written to {}", path.display());
    Ok(())
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    init_logging(cli.verbose);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_usage_error(&e) { 2 } else { 1 })
        }
    }
}
