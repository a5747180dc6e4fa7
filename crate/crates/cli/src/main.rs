use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use freqmpc::harness::{self, HarnessError, RunLog, Scenario};
use freqmpc::partition::{validate_partition, RegionPartition};
use freqmpc::{Equilibrium, NetworkCase};

#[derive(Parser)]
#[command(name = "freqmpc", version, about = "Transient frequency MPC scenario runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a closed-loop scenario and write trace.csv and summary.txt.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Output directory (default: out/<scenario name>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Suppress progress output.
        #[arg(long)]
        quiet: bool,
    },
    /// Summarize and compare finished runs (run directories or trace.csv files).
    Report {
        #[arg(long, num_args = 1.., required = true)]
        logs: Vec<PathBuf>,
    },
    /// Check a case file and optionally a partition against it.
    Validate {
        #[arg(long)]
        case: PathBuf,
        #[arg(long)]
        partition: Option<PathBuf>,
    },
}

fn run(scenario: PathBuf, out: Option<PathBuf>, quiet: bool) -> Result<()> {
    let s = Scenario::load(&scenario).with_context(|| format!("loading {}", scenario.display()))?;
    let out = out.unwrap_or_else(|| PathBuf::from("out").join(&s.label));
    let start = Instant::now();
    let tick = |k: usize, total: usize| {
        if !quiet && (k.is_multiple_of(1000) || k == total) {
            eprint!("\r{}: step {k}/{total}", s.label);
        }
    };
    let log = match harness::run_with_progress(&s, tick) {
        Ok(log) => log,
        Err(HarnessError::Control { step, time, source }) => {
            if let Some(dump) = source.dump() {
                std::fs::create_dir_all(&out)?;
                let path = out.join("failed_qp.txt");
                std::fs::write(&path, dump)?;
                eprintln!("\nproblem written to {}", path.display());
            }
            bail!("control step {step} (t = {time} s): {source}");
        }
        Err(e) => return Err(e.into()),
    };
    if !quiet {
        eprintln!(" done in {:.1} s", start.elapsed().as_secs_f64());
    }
    log.write_dir(&out)?;
    print!("{}", log.summary().table(&log.meta));
    println!("output: {}", out.display());
    Ok(())
}

fn report(paths: Vec<PathBuf>) -> Result<()> {
    let logs = paths
        .iter()
        .map(|p| RunLog::read(p).with_context(|| format!("reading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    print!("{}", harness::report(&logs)?);
    Ok(())
}

fn validate(case_path: PathBuf, partition: Option<PathBuf>) -> Result<()> {
    let case = NetworkCase::load(&case_path).with_context(|| format!("loading {}", case_path.display()))?;
    println!(
        "case {}: {} buses ({} with inertia), {} lines, |I_u| = {}, |I_w| = {}",
        case_path.display(),
        case.n(),
        case.inertial_buses().len(),
        case.m(),
        case.config().controlled.len(),
        case.config().freq_constrained.len()
    );
    let eq = Equilibrium::compute(&case, &case.base_injections())?;
    println!("synchronous frequency {} Hz, sync condition {} < 1", harness::fmt_sig(eq.sync_freq), harness::fmt_sig(eq.condition_value));
    eq.check_threshold_ordering(&case)?;
    println!("threshold ordering ok");
    if let Some(p) = partition {
        let part = RegionPartition::load(&p, &case)?;
        validate_partition(&case, &part)?;
        for r in &part.regions {
            println!("region {}: {} buses, {} lines, {} boundary lines", r.label, r.buses.len(), r.edges.len(), r.boundary.len());
        }
        println!("partition ok");
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { scenario, out, quiet } => run(scenario, out, quiet),
        Command::Report { logs } => report(logs),
        Command::Validate { case, partition } => validate(case, partition),
    }
}
