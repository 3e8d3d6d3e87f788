use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use pnc::rational::parse_rational;
use pnc::report;
use pnc::scenario::{bounds_report, run_counterexample, verify, ScenarioConfig, ScenarioError};
use pnc::simulator::{simulate, simulate_tandem, Discipline, ServerConfig};
use pnc::traffic::csv::read_trace;
use pnc::Q;

#[derive(Parser, Debug)]
#[command(
    name = "pnc",
    version,
    about = "Packetization-aware network calculus toolkit"
)]
struct Cli {
    /// JSON scenario config; absent fields take built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for report files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// First seed of a campaign.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Omit the `generated_at` field so reports are byte-identical.
    #[arg(long, global = true)]
    no_timestamp: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Reproduce a failure of a fluid service curve or bound.
    Counterexample {
        /// cbr-service, cbr-strict, cbr-output, cbr-backlog, sp-service or concat-delay.
        name: String,
    },
    /// Randomized campaign checking the corrected curves and bounds.
    Verify {
        /// cbr, sp or tandem.
        #[arg(long)]
        setting: Option<String>,
        /// Number of seeds.
        #[arg(long)]
        seeds: Option<u64>,
    },
    /// Faulty, corrected and packetizer bounds for a token-bucket flow.
    Bounds {
        #[arg(long)]
        setting: Option<String>,
    },
    /// Run a trace CSV through a link (or a tandem with `--rates`).
    Simulate {
        trace: PathBuf,
        #[arg(long, value_parser = parse_q, default_value = "1")]
        rate: Q,
        #[arg(long, value_enum, default_value = "fifo")]
        discipline: DisciplineArg,
        /// Comma-separated hop rates; selects a FIFO tandem.
        #[arg(long, value_parser = parse_q, value_delimiter = ',')]
        rates: Vec<Q>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DisciplineArg {
    Fifo,
    Sp,
}

fn parse_q(s: &str) -> Result<Q, String> {
    parse_rational(s).map_err(|e| e.to_string())
}

/// Failure classes mapped to exit codes: 1 for a failed check, 2 for bad input.
enum Failure {
    Input(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        Failure::Input(e.into())
    }
}

fn load_config(cli: &Cli) -> Result<ScenarioConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(Failure::Input)?;
            ScenarioConfig::from_json(&text)?
        }
        None => ScenarioConfig::default(),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if cli.out.is_some() {
        cfg.out = cli.out.clone();
    }
    Ok(cfg)
}

fn stamp(mut v: Value, cli: &Cli) -> Value {
    if !cli.no_timestamp {
        if let Value::Object(m) = &mut v {
            m.insert(
                "generated_at".into(),
                json!(chrono::Utc::now().to_rfc3339()),
            );
        }
    }
    v
}

fn emit(v: &Value, out: Option<&Path>, file: &str) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(v).expect("json values serialize");
    if let Some(dir) = out {
        write_file(dir, file, text.as_bytes()).map_err(Failure::Runtime)?;
    }
    println!("{text}");
    Ok(())
}

fn write_file(dir: &Path, file: &str, bytes: &[u8]) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(file);
    fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    let mut cfg = load_config(cli)?;
    match &cli.command {
        Command::Counterexample { name } => {
            let outcome = run_counterexample(name, &cfg)?;
            emit(
                &stamp(outcome.report.clone(), cli),
                cfg.out.as_deref(),
                &format!("counterexample-{name}.json"),
            )?;
            if !outcome.reproduced {
                eprintln!("{name}: expected violation was not reproduced");
            }
            Ok(outcome.exit_code() as u8)
        }
        Command::Verify { setting, seeds } => {
            if setting.is_some() {
                cfg.setting = setting.clone();
            }
            if seeds.is_some() {
                cfg.seeds = *seeds;
            }
            let campaign = verify(&cfg)?;
            emit(
                &stamp(campaign.to_json(), cli),
                cfg.out.as_deref(),
                "verify.json",
            )?;
            for r in campaign.runs.iter().filter(|r| !r.passed()) {
                eprintln!("seed {}: failed {}", r.seed, r.failures().join(", "));
            }
            Ok(campaign.exit_code() as u8)
        }
        Command::Bounds { setting } => {
            if setting.is_some() {
                cfg.setting = setting.clone();
            }
            let r = bounds_report(&cfg)?;
            emit(
                &stamp(report::bounds(&r), cli),
                cfg.out.as_deref(),
                "bounds.json",
            )?;
            Ok(0)
        }
        Command::Simulate {
            trace,
            rate,
            discipline,
            rates,
        } => {
            let file = File::open(trace)
                .with_context(|| format!("opening {}", trace.display()))
                .map_err(Failure::Input)?;
            let packets = read_trace(file)
                .with_context(|| format!("reading {}", trace.display()))
                .map_err(Failure::Input)?;
            let (result, mode) = if rates.is_empty() {
                let config = ServerConfig {
                    rate: rate.clone(),
                    discipline: match discipline {
                        DisciplineArg::Fifo => Discipline::Fifo,
                        DisciplineArg::Sp => Discipline::StrictPriority,
                    },
                };
                let mode = match discipline {
                    DisciplineArg::Fifo => "fifo",
                    DisciplineArg::Sp => "sp",
                };
                (simulate(&packets, &config), mode)
            } else {
                (
                    simulate_tandem(&packets, rates).map(|t| t.end_to_end),
                    "tandem",
                )
            };
            let result = result.map_err(|e| Failure::Input(e.into()))?;
            let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
            fs::create_dir_all(&dir)
                .with_context(|| format!("creating {}", dir.display()))
                .map_err(Failure::Runtime)?;
            let csv_path = dir.join("departures.csv");
            let csv_file = File::create(&csv_path)
                .with_context(|| format!("writing {}", csv_path.display()))
                .map_err(Failure::Runtime)?;
            report::write_departures(BufWriter::new(csv_file), &result.departures)
                .with_context(|| format!("writing {}", csv_path.display()))
                .map_err(Failure::Runtime)?;
            let mut summary = report::sim_summary(&result);
            if let Value::Object(m) = &mut summary {
                m.insert("mode".into(), json!(mode));
                m.insert("trace".into(), json!(trace.display().to_string()));
            }
            emit(&stamp(summary, cli), Some(&dir), "summary.json")?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
