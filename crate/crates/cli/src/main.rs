use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use smash_core::planning::Strategy;
use smash_core::runtime::TraceSink;
use smash_core::scenario::{bench, run_scenario, validate, RunSettings, Scenario, SCHEMA};

#[derive(Parser)]
#[command(name = "smash", version, about = "Value-driven smart home agent simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write one JSON trace line per reasoning cycle.
    Run {
        #[command(flatten)]
        common: Common,
        /// Write the PDDL domain and problem of every planned goal here.
        #[arg(long, value_name = "DIR")]
        pddl_out: Option<PathBuf>,
        /// `inproc`, or `tcp:<port>` to also serve the bus over TCP.
        #[arg(long, default_value = "inproc", value_parser = parse_bus)]
        bus: BusChoice,
        /// Trace file; stdout if absent.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Run a scenario and compare its device transitions with the expected ones.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Time repeated runs of a scenario.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(short = 'n', long, default_value_t = 4)]
        repetitions: usize,
    },
    /// Print the JSON schema of scenario files.
    Schema,
}

#[derive(Args)]
struct Common {
    /// Scenario file, or `smash_poc` for the bundled one.
    scenario: PathBuf,
    #[arg(long)]
    strategy: Option<Strategy>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, Debug)]
enum BusChoice {
    InProc,
    Tcp(u16),
}

fn parse_bus(s: &str) -> Result<BusChoice, String> {
    match s.split_once(':') {
        None if s == "inproc" => Ok(BusChoice::InProc),
        Some(("tcp", port)) => port.parse().map(BusChoice::Tcp).map_err(|e| format!("bad port `{port}`: {e}")),
        _ => Err(format!("expected `inproc` or `tcp:<port>`, got `{s}`")),
    }
}

fn init_logging() {
    let level = match std::env::var("SMASH_LOG").as_deref() {
        Ok("quiet") => "error",
        Ok("debug") => "debug",
        _ => "info",
    };
    env_logger::Builder::new().parse_filters(level).format_timestamp(None).init();
}

/// Distinguishes unusable input (exit 2) from failures while running (exit 1).
enum Failure {
    Input(anyhow::Error),
    Runtime(anyhow::Error),
}

fn load(common: &Common) -> Result<(Scenario, RunSettings), Failure> {
    let scn = Scenario::load(&common.scenario)
        .with_context(|| format!("loading {}", common.scenario.display()))
        .map_err(Failure::Input)?;
    let settings = RunSettings { strategy: common.strategy, seed: common.seed, ..Default::default() };
    Ok((scn, settings))
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { common, pddl_out, bus, out } => {
            let (scn, mut settings) = load(&common)?;
            settings.pddl_out = pddl_out;
            if let BusChoice::Tcp(port) = bus {
                settings.tcp_port = Some(port);
            }
            let run = run_scenario(&scn, &settings).map_err(|e| Failure::Runtime(e.into()))?;
            let writer: Box<dyn Write> = match &out {
                Some(p) => Box::new(BufWriter::new(
                    File::create(p)
                        .with_context(|| format!("creating {}", p.display()))
                        .map_err(Failure::Runtime)?,
                )),
                None => Box::new(io::stdout().lock()),
            };
            let sink = TraceSink::new(writer);
            for t in &run.output.traces {
                sink.append(t).context("writing trace").map_err(Failure::Runtime)?;
            }
            for t in &run.output.transitions {
                log::info!("{}.{}: {} -> {}", t.device, t.property, t.from.as_deref().unwrap_or("?"), t.to);
            }
            for a in &run.output.anomalies {
                log::warn!("{a}");
            }
            log::info!("{} cycles in {:.3} s", run.output.traces.len(), run.wall.as_secs_f64());
            Ok(())
        }
        Command::Validate { common } => {
            let (scn, settings) = load(&common)?;
            let run = run_scenario(&scn, &settings).map_err(|e| Failure::Runtime(e.into()))?;
            let report = validate(&scn.expect, &run.output.transitions);
            if let Some(w) = &report.warning {
                log::warn!("{w}");
            }
            match &report.divergence {
                None => {
                    println!("ok: {} transitions match", report.compared);
                    Ok(())
                }
                Some(d) => {
                    println!("diff: {d}");
                    Err(Failure::Runtime(anyhow::anyhow!("observed transitions diverge from the expected ones")))
                }
            }
        }
        Command::Bench { common, repetitions } => {
            let (scn, settings) = load(&common)?;
            let report = bench(&scn, &settings, repetitions).map_err(|e| Failure::Runtime(e.into()))?;
            print!("{}", report.table());
            Ok(())
        }
        Command::Schema => {
            println!("{SCHEMA}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
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
