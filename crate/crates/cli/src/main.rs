//! `nrs`: run simulations, experiments and the acceptance suite.
//!
//! Exit codes: 0 success, 1 verification or acceptance failure, 2 usage error.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use nrs_core::acceptance::{AcceptConfig, Suite};
use nrs_core::analysis::experiment::{run_experiment, ExperimentSpec};
use nrs_core::analysis::report::{with_pool, write_reports, CsvReport};
use nrs_core::protocols::ProtocolSpec;
use nrs_core::runner::{run_cells, validate, Cell, SeedRange, SimKind};
use nrs_core::transcript::write_histories_jsonl;
use nrs_core::{Error, GraphSpec, SimConstants};

#[derive(Parser)]
#[command(name = "nrs", version, about = "Simulate radio protocols over noisy radio networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulator on one instance per seed.
    Simulate(SimulateArgs),
    /// Run an experiment described by a key=value spec file.
    Experiment(ExperimentArgs),
    /// Run the acceptance suite.
    Accept(AcceptArgs),
}

#[derive(Args)]
struct OutputArgs {
    /// CSV output path (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write a gnuplot script next to each CSV.
    #[arg(long)]
    emit_gnuplot: bool,
    /// Omit the `# generated` line.
    #[arg(long)]
    no_timestamp: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// Graph: star:Δ, path:n, cycle:n, random:n:Δ, hard:n:Δ, dibip:Δ.
    #[arg(long)]
    graph: GraphSpec,
    /// Protocol: flood:T, silent:T, round-robin:T, decay:T.
    #[arg(long)]
    protocol: ProtocolSpec,
    #[arg(long)]
    sim: SimKind,
    #[arg(long, default_value_t = 0.0)]
    p: f64,
    /// Overrides the protocol length.
    #[arg(long = "T")]
    t_len: Option<usize>,
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Inclusive range a..b.
    #[arg(long)]
    seeds: Option<SeedRange>,
    /// Constant override k=v (c1, c3, cQ, c4, c5, k, B); repeatable.
    #[arg(long = "const", value_name = "K=V")]
    consts: Vec<String>,
    /// Lossless subroutines (static and general simulators only).
    #[arg(long)]
    oracle_mode: bool,
    /// JSON-lines dump of the reconstructed histories.
    #[arg(long)]
    transcript: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
    #[arg(short, long)]
    verbose: bool,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Spec file with an [experiment] section.
    spec: PathBuf,
    #[arg(long = "graph")]
    graphs: Option<String>,
    #[arg(long = "protocol")]
    protocols: Option<String>,
    #[arg(long)]
    sim: Option<String>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long = "T")]
    t_len: Option<String>,
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<String>,
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long = "const", value_name = "K=V")]
    consts: Vec<String>,
    #[arg(long)]
    oracle_mode: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct AcceptArgs {
    /// Comma-separated criterion ids (all if omitted).
    #[arg(long, value_delimiter = ',')]
    criteria: Vec<u8>,
    /// Forces the noise level of every noisy criterion.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long = "const", value_name = "K=V")]
    consts: Vec<String>,
}

/// Exit status plus a message for stderr.
struct Failure {
    code: u8,
    message: String,
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        let usage = e.chain().any(|c| {
            matches!(
                c.downcast_ref::<Error>(),
                Some(
                    Error::Config(_)
                        | Error::Parameter(_)
                        | Error::Directed(_)
                        | Error::Mismatch(_)
                        | Error::Parse { .. }
                        | Error::NotStatic { .. }
                )
            )
        });
        let io = e.chain().any(|c| c.downcast_ref::<io::Error>().is_some());
        Failure {
            code: if usage || io { 2 } else { 1 },
            message: format!("{e:#}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

fn parse_consts(items: &[String]) -> Result<SimConstants, Error> {
    let mut c = SimConstants::default();
    for item in items {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--const expects k=v, got {item:?}")))?;
        c.set(k, v)?;
    }
    Ok(c)
}

fn emit(reports: &[CsvReport], out: &OutputArgs) -> anyhow::Result<()> {
    match &out.out {
        Some(path) => {
            for p in write_reports(path, reports, !out.no_timestamp, out.emit_gnuplot)? {
                eprintln!("wrote {}", p.display());
            }
        }
        None => {
            let mut stdout = io::stdout().lock();
            for r in reports {
                r.write(&mut stdout, !out.no_timestamp)?;
            }
            stdout.flush()?;
        }
    }
    Ok(())
}

fn transcript_path(base: &Path, seed: u64, many: bool) -> PathBuf {
    if !many {
        return base.to_path_buf();
    }
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("transcript");
    let ext = base.extension().and_then(|s| s.to_str()).unwrap_or("jsonl");
    base.with_file_name(format!("{stem}-seed{seed}.{ext}"))
}

fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    let consts = parse_consts(&args.consts)?;
    let seeds = match (args.seed, args.seeds) {
        (Some(s), _) => SeedRange::single(s),
        (None, Some(r)) => r,
        (None, None) => SeedRange::single(1),
    };
    let protocol = args.t_len.map_or(args.protocol, |t| args.protocol.with_length(t));
    let cells: Vec<Cell> = seeds
        .iter()
        .map(|seed| Cell {
            graph: args.graph,
            protocol,
            sim: args.sim,
            p: args.p,
            seed,
            consts,
            oracle: args.oracle_mode,
        })
        .collect();
    // Every parameter is checked before the first run starts.
    for c in &cells {
        validate(c)?;
    }
    let outcomes = with_pool(|| run_cells(&cells))?;
    let mut report = CsvReport::new("runs", args.sim.csv_header());
    let mut verified = 0;
    for (cell, outcome) in cells.iter().zip(outcomes) {
        let o = outcome.with_context(|| format!("seed {}", cell.seed))?;
        if args.verbose {
            eprintln!("seed {}: {} rounds, verified {}", cell.seed, o.rounds, o.verified);
        }
        if let Some(base) = &args.transcript {
            let path = transcript_path(base, cell.seed, cells.len() > 1);
            let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            write_histories_jsonl(&o.histories, io::BufWriter::new(file))?;
        }
        verified += usize::from(o.verified);
        report.push(o.row);
    }
    emit(&[report], &args.output)?;
    eprintln!("verified {verified}/{} runs", cells.len());
    if verified == cells.len() {
        Ok(())
    } else {
        Err(Failure {
            code: 1,
            message: format!("{} of {} runs failed verification", cells.len() - verified, cells.len()),
        })
    }
}

fn experiment(args: ExperimentArgs) -> Result<(), Failure> {
    let text = fs::read_to_string(&args.spec).with_context(|| format!("reading {}", args.spec.display()))?;
    let mut spec = ExperimentSpec::parse(&text)?;
    // Flags win over the file.
    let flags = [
        ("graphs", &args.graphs),
        ("protocol", &args.protocols),
        ("sim", &args.sim),
        ("p", &args.p),
        ("T", &args.t_len),
        ("seeds", &args.seed),
        ("seeds", &args.seeds),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            spec.set(key, v)?;
        }
    }
    for c in &args.consts {
        let (k, v) = c
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--const expects k=v, got {c:?}")))?;
        spec.set(&format!("const.{k}"), v)?;
    }
    if args.oracle_mode {
        spec.oracle = true;
    }
    spec.validate()?;
    let mut output = args.output;
    if output.out.is_none() {
        output.out = spec.out.clone();
    }
    let result = with_pool(|| run_experiment(&spec))??;
    for line in &result.lines {
        eprintln!("{line}");
    }
    emit(&result.reports, &output)?;
    if result.passed {
        Ok(())
    } else {
        Err(Failure {
            code: 1,
            message: format!("experiment {} did not meet its checks", spec.kind),
        })
    }
}

fn accept(args: AcceptArgs) -> Result<(), Failure> {
    let cfg = AcceptConfig {
        consts: parse_consts(&args.consts)?,
        p_override: args.p,
        criteria: args.criteria,
    };
    let mut suite = Suite::new(cfg)?;
    let results = suite.run(|r| println!("{r}"))?;
    let failed: Vec<String> = results.iter().filter(|r| !r.passed).map(|r| r.id.to_string()).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", results.len());
        Ok(())
    } else {
        Err(Failure {
            code: 1,
            message: format!("acceptance failed: criteria {}", failed.join(", ")),
        })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Experiment(a) => experiment(a),
        Command::Accept(a) => accept(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("nrs: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
