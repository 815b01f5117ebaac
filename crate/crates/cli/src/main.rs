use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use omnichain::codec::golden_vectors;
use omnichain::harness::{fuzz_channel, parse_scenario, run, FuzzConfig, Mutant};

/// Deterministic omnichain messaging simulator.
#[derive(Debug, Parser)]
#[command(name = "omnichain", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario file. Exit 0 if every assertion passes, 1 otherwise, 2 on a scenario error.
    Run {
        scenario: PathBuf,
        /// Write the event trace here (`-` for stdout).
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Override the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Differential fuzzing of the channel against the reference model.
    Fuzz {
        #[arg(long, default_value_t = 10_000)]
        iters: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(1..=64))]
        max_nonces: u64,
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u8).range(1..=8))]
        max_dvns: u8,
        /// Fuzz a deliberately broken endpoint.
        #[arg(long, value_enum, default_value_t = MutantArg::None)]
        mutant: MutantArg,
        /// Write a counterexample scenario here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the codec golden vectors as `name hex` lines.
    Vectors,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MutantArg {
    None,
    SkipWithoutNonceCheck,
}

impl From<MutantArg> for Mutant {
    fn from(m: MutantArg) -> Self {
        match m {
            MutantArg::None => Mutant::None,
            MutantArg::SkipWithoutNonceCheck => Mutant::SkipWithoutNonceCheck,
        }
    }
}

fn run_scenario(path: &PathBuf, trace: Option<&PathBuf>, seed: Option<u64>) -> anyhow::Result<bool> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut scenario = parse_scenario(&text).with_context(|| format!("parsing {}", path.display()))?;
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    let report = run(&scenario)?;
    match trace {
        Some(p) if p.as_os_str() == "-" => print!("{}", report.trace_text()),
        Some(p) => std::fs::write(p, report.trace_text()).with_context(|| format!("writing {}", p.display()))?,
        None => {}
    }
    for a in &report.assertions {
        let verdict = if a.passed { "PASS" } else { "FAIL" };
        let detail = if a.passed { String::new() } else { format!(": {}", a.detail) };
        eprintln!("{verdict} line {} tick {}: {}{detail}", a.line, a.tick, a.text);
    }
    let passed = report.assertions.iter().filter(|a| a.passed).count();
    eprintln!(
        "{passed}/{} assertions passed, {} invariant violations, trace sha256 {}",
        report.assertions.len(),
        report.invariant_violations.len(),
        report.digest()
    );
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { scenario, trace, seed } => match run_scenario(&scenario, trace.as_ref(), seed) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(1),
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(2)
            }
        },
        Command::Fuzz { iters, seed, max_nonces, max_dvns, mutant, out } => {
            let config = FuzzConfig { iterations: iters, seed, max_nonces, max_dvns, mutant: mutant.into() };
            let report = fuzz_channel(&config);
            eprintln!("{} schedules, {} operations", report.iterations, report.operations);
            let Some(ce) = report.counterexample else {
                eprintln!("no counterexample");
                return ExitCode::SUCCESS;
            };
            eprintln!("counterexample in schedule {}: {}", ce.schedule, ce.violation);
            match out {
                Some(p) => {
                    if let Err(e) = std::fs::write(&p, &ce.scenario) {
                        eprintln!("error: writing {}: {e}", p.display());
                        return ExitCode::from(2);
                    }
                }
                None => print!("{}", ce.scenario),
            }
            ExitCode::from(1)
        }
        Command::Vectors => {
            for (name, hex) in golden_vectors() {
                println!("{name} {hex}");
            }
            ExitCode::SUCCESS
        }
    }
}
