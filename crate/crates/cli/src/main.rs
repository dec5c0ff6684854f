//! Command-line front end for the routing workbench: run a scenario,
//! sweep a parameter grid, or re-verify an emitted trace offline.
//!
//! Every run double-checks its own output — the loop monitor during the
//! run and the trace checker afterwards — and the process exits
//! non-zero when either finds a violation, so scripted sweeps cannot
//! silently accumulate bad data.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use manet_sim::engine::EngineKind;
use manet_sim::metrics::{csv_row, CSV_HEADER};
use manet_sim::monitor::check_trace;
use manet_sim::scenario::Scenario;
use manet_sim::sim::{run_scenario, SimReport};

#[derive(Parser)]
#[command(name = "manet", version, about = "Deterministic MANET routing workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and emit its metrics as a CSV row.
    Run {
        /// Scenario file (`key = value` lines, `#` comments).
        #[arg(long)]
        config: PathBuf,
        /// Override the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the scenario's engine.
        #[arg(long, value_enum)]
        engine: Option<EngineArg>,
        /// Append the row to this CSV file (header written when the
        /// file is new) instead of printing to stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Write the full event trace to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run every combination of the given parameter values, each under
    /// seeds 1..=K, and emit one CSV row per run.
    Sweep {
        /// Scenario file providing the baseline configuration.
        #[arg(long)]
        config: PathBuf,
        /// Sweep axis `key=v1,v2,...`; repeat the flag to sweep the
        /// cross product of several axes.
        #[arg(long, required = true)]
        param: Vec<String>,
        /// Seeds 1..=K for every combination.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        /// Append rows to this CSV file instead of stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Re-verify a previously written trace against the offline
    /// invariant checker.
    Check {
        /// Trace file produced by `run --trace`.
        #[arg(long)]
        trace: PathBuf,
    },
}

#[derive(Copy, Clone, ValueEnum)]
enum EngineArg {
    Adara,
    Aodv,
}

impl From<EngineArg> for EngineKind {
    fn from(a: EngineArg) -> EngineKind {
        match a {
            EngineArg::Adara => EngineKind::Adara,
            EngineArg::Aodv => EngineKind::Aodv,
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(clean) => {
            if clean {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

/// Ok(true) = done and every invariant held; Ok(false) = done but an
/// invariant was violated; Err = could not do the work at all.
fn dispatch(command: Command) -> Result<bool, String> {
    match command {
        Command::Run {
            config,
            seed,
            engine,
            csv,
            trace,
        } => {
            let mut sc = load_scenario(&config)?;
            if let Some(seed) = seed {
                sc.seed = seed;
            }
            if let Some(engine) = engine {
                sc.engine = engine.into();
            }
            sc.validate()?;
            let mut out = CsvSink::new(csv.as_deref())?;
            let report = run_scenario(&sc);
            if let Some(path) = &trace {
                fs::write(path, &report.trace)
                    .map_err(|e| format!("writing {}: {e}", path.display()))?;
            }
            out.row(&csv_row(&sc, &report.metrics))?;
            Ok(verify(&sc, &report)?)
        }
        Command::Sweep {
            config,
            param,
            seeds,
            csv,
        } => {
            if seeds == 0 {
                return Err("--seeds must be at least 1".into());
            }
            let base = load_scenario(&config)?;
            let axes: Vec<(String, Vec<String>)> =
                param.iter().map(|p| parse_axis(p)).collect::<Result<_, _>>()?;
            let mut out = CsvSink::new(csv.as_deref())?;
            let mut clean = true;
            for combo in combinations(&axes) {
                for seed in 1..=seeds {
                    let mut sc = base.clone();
                    for (key, value) in &combo {
                        sc.set_key(key, value)
                            .map_err(|msg| format!("--param {key}: {msg}"))?;
                    }
                    sc.seed = seed;
                    sc.validate()?;
                    let report = run_scenario(&sc);
                    out.row(&csv_row(&sc, &report.metrics))?;
                    clean &= verify(&sc, &report)?;
                }
            }
            Ok(clean)
        }
        Command::Check { trace } => {
            let text = fs::read_to_string(&trace)
                .map_err(|e| format!("reading {}: {e}", trace.display()))?;
            let violations = check_trace(&text).map_err(|e| e.to_string())?;
            if violations.is_empty() {
                println!("ok: {} lines, all invariants hold", text.lines().count());
                Ok(true)
            } else {
                for v in &violations {
                    eprintln!("violation: {v}");
                }
                Ok(false)
            }
        }
    }
}

fn load_scenario(path: &Path) -> Result<Scenario, String> {
    let text =
        fs::read_to_string(path).map_err(|e| format!("reading {}: {e}", path.display()))?;
    Scenario::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
}

/// Post-run verification: the in-run loop monitor plus the offline
/// trace checker. Violations go to stderr; the caller turns them into
/// the exit code.
fn verify(sc: &Scenario, report: &SimReport) -> Result<bool, String> {
    let mut clean = true;
    if report.loop_violations > 0 {
        eprintln!(
            "violation: {:?} seed {}: routing loop observed {} time(s)",
            sc.engine, sc.seed, report.loop_violations
        );
        clean = false;
    }
    for v in check_trace(&report.trace).map_err(|e| e.to_string())? {
        eprintln!("violation: {:?} seed {}: {v}", sc.engine, sc.seed);
        clean = false;
    }
    Ok(clean)
}

/// `key=v1,v2,...` → (key, values).
fn parse_axis(raw: &str) -> Result<(String, Vec<String>), String> {
    let (key, values) = raw
        .split_once('=')
        .ok_or_else(|| format!("--param wants key=v1,v2,..., got `{raw}`"))?;
    let values: Vec<String> = values
        .split(',')
        .map(|v| v.trim().to_string())
        .filter(|v| !v.is_empty())
        .collect();
    if key.trim().is_empty() || values.is_empty() {
        return Err(format!("--param wants key=v1,v2,..., got `{raw}`"));
    }
    Ok((key.trim().to_string(), values))
}

/// Cross product of the sweep axes, first axis outermost.
fn combinations(axes: &[(String, Vec<String>)]) -> Vec<Vec<(String, String)>> {
    let mut combos: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for (key, values) in axes {
        combos = combos
            .into_iter()
            .flat_map(|combo| {
                values.iter().map(move |v| {
                    let mut next = combo.clone();
                    next.push((key.clone(), v.clone()));
                    next
                })
            })
            .collect();
    }
    combos
}

/// Rows go either to stdout (header printed once) or appended to a
/// file (header written only when the file starts empty).
struct CsvSink {
    target: Option<fs::File>,
    header_pending: bool,
}

impl CsvSink {
    fn new(path: Option<&Path>) -> Result<CsvSink, String> {
        match path {
            None => Ok(CsvSink {
                target: None,
                header_pending: true,
            }),
            Some(path) => {
                let file = fs::OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(path)
                    .map_err(|e| format!("opening {}: {e}", path.display()))?;
                let fresh = file
                    .metadata()
                    .map_err(|e| format!("inspecting {}: {e}", path.display()))?
                    .len()
                    == 0;
                Ok(CsvSink {
                    target: Some(file),
                    header_pending: fresh,
                })
            }
        }
    }

    fn row(&mut self, row: &str) -> Result<(), String> {
        let mut text = String::new();
        if self.header_pending {
            text.push_str(CSV_HEADER);
            text.push('\n');
            self.header_pending = false;
        }
        text.push_str(row);
        text.push('\n');
        match &mut self.target {
            None => {
                print!("{text}");
                Ok(())
            }
            Some(file) => file
                .write_all(text.as_bytes())
                .map_err(|e| format!("writing csv: {e}")),
        }
    }
}
