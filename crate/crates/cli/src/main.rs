use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use ers_core::model::codec::SizeReport;
use ers_core::model::corpus::gen_corpus;
use ers_core::model::nquads::parse_nquads;
use ers_core::model::{documents_from_quads, ModelError};
use ers_core::registry::bench::{self, BenchConfig, BenchRow, Mix};
use ers_core::registry::{compatibility_grid, EXPECTED_GRID, GRID_LABELS};
use ers_core::simnet::{Scenario, ScenarioError, Simulation};

#[derive(Parser)]
#[command(
    name = "ers",
    version,
    about = "Entity registry tools: encoding sizes, network simulation, transaction benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Report encoded sizes of a corpus under each serialization.
    Encode(EncodeArgs),
    /// Run a scenario file and write its metrics CSV.
    Sim(SimArgs),
    /// Benchmark concurrent registry transactions in virtual time.
    BenchTx(BenchArgs),
    /// Print the lock compatibility grid and compare it with the expected one.
    CheckLocks,
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["gen", "input"])))]
struct EncodeArgs {
    /// Generate a corpus of N entities.
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u64).range(1..))]
    gen: Option<u64>,
    /// Read an N-Quads file instead.
    #[arg(long, value_name = "PATH")]
    input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Model::All)]
    model: Model,
    /// Seed for --gen.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Model {
    Ntriples,
    M1,
    M2,
    Perquad,
    All,
}

impl Model {
    fn name(self) -> &'static str {
        match self {
            Model::Ntriples => "ntriples",
            Model::M1 => "m1",
            Model::M2 => "m2",
            Model::Perquad => "perquad",
            Model::All => "all",
        }
    }
}

#[derive(Args)]
struct SimArgs {
    scenario: PathBuf,
    /// Metrics CSV; per-session rows go next to it as <stem>.sessions.csv.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 32, value_parser = clap::value_parser!(u64).range(1..))]
    clients: u64,
    /// Transactions per client.
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    count: u64,
    /// Entities transactions pick from.
    #[arg(long, default_value_t = 1024, value_parser = clap::value_parser!(u64).range(1..), conflicts_with = "pool_sweep")]
    pool: u64,
    /// Comma-separated pool sizes, one CSV row each.
    #[arg(long, value_delimiter = ',', value_parser = clap::value_parser!(u64).range(1..))]
    pool_sweep: Vec<u64>,
    /// `kind=weight,...` or `ip:up:dp:il:dl:sc:dc`; defaults to il=1,lu=1,dl=1.
    #[arg(long)]
    mix: Option<Mix>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Input { path: PathBuf, source: ModelError },
    #[error("{path}: {source}")]
    Scenario { path: PathBuf, source: ScenarioError },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => fs::write(p, text).map_err(io_err(p)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn encode(args: &EncodeArgs) -> Result<ExitCode, CliError> {
    let docs = match (&args.gen, &args.input) {
        (Some(n), _) => gen_corpus(*n as usize, args.seed),
        (None, Some(path)) => {
            let bytes = fs::read(path).map_err(io_err(path))?;
            let quads = parse_nquads(&bytes).map_err(|source| CliError::Input { path: path.clone(), source })?;
            documents_from_quads(quads)
        }
        (None, None) => unreachable!("clap requires a source"),
    };
    let report = SizeReport::measure(&docs);
    let mut text = String::from("model,bytes,kb_per_1k_triples,ratio_to_m1\n");
    for (name, bytes) in report.rows() {
        if args.model != Model::All && args.model.name() != name {
            continue;
        }
        let ratio = if report.model1 == 0 { 0.0 } else { bytes as f64 / report.model1 as f64 };
        writeln!(text, "{name},{bytes},{:.3},{ratio:.3}", report.kb_per_1k_triples(bytes)).expect("string write");
    }
    writeln!(text, "# documents={} triples={}", docs.len(), report.triples).expect("string write");
    emit(args.out.as_deref(), &text)?;
    Ok(ExitCode::SUCCESS)
}

fn sessions_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "metrics".into());
    out.with_file_name(format!("{stem}.sessions.csv"))
}

fn sim(args: &SimArgs) -> Result<ExitCode, CliError> {
    let text = fs::read_to_string(&args.scenario).map_err(io_err(&args.scenario))?;
    let scenario_err = |source| CliError::Scenario { path: args.scenario.clone(), source };
    let mut scenario = Scenario::parse(&text).map_err(scenario_err)?;
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    let mut simulation = Simulation::new(scenario).map_err(scenario_err)?;
    let metrics = simulation.run();
    fs::write(&args.out, metrics.metrics_csv()).map_err(io_err(&args.out))?;
    let sessions = sessions_path(&args.out);
    fs::write(&sessions, metrics.sessions_csv()).map_err(io_err(&sessions))?;
    println!(
        "documents={} nodes={} elapsed={} write_performance={:.4} mean_read_latency={:.4} sessions={}",
        metrics.total_documents,
        metrics.n_nodes,
        metrics.elapsed,
        metrics.write_performance(),
        metrics.mean_read_latency(),
        metrics.sessions.len()
    );
    Ok(ExitCode::SUCCESS)
}

fn bench_tx(args: &BenchArgs) -> Result<ExitCode, CliError> {
    let pools = if args.pool_sweep.is_empty() { vec![args.pool] } else { args.pool_sweep.clone() };
    let mut text = format!("{}\n", BenchRow::CSV_HEADER);
    for pool in pools {
        let mut cfg = BenchConfig::new(args.clients as usize, args.count as usize, pool as usize, args.seed);
        if let Some(mix) = &args.mix {
            cfg.mix = mix.clone();
        }
        writeln!(text, "{}", bench::run(&cfg).csv_row()).expect("string write");
    }
    emit(args.out.as_deref(), &text)?;
    Ok(ExitCode::SUCCESS)
}

fn check_locks() -> ExitCode {
    let grid = compatibility_grid();
    let mark = |ok: bool| if ok { "ok" } else { "x" };
    print!("{:<6}", "");
    for label in GRID_LABELS {
        print!(" {label:>6}");
    }
    println!();
    for (i, row) in grid.iter().enumerate() {
        print!("{:<6}", GRID_LABELS[i]);
        for cell in row {
            print!(" {:>6}", mark(*cell));
        }
        println!();
    }
    let incompatible = grid.iter().flatten().filter(|c| !**c).count();
    println!("incompatible cells: {incompatible}");
    let mut differing = Vec::new();
    for i in 0..6 {
        for j in 0..6 {
            if grid[i][j] != EXPECTED_GRID[i][j] {
                differing.push(format!(
                    "{} vs {}: got {}, expected {}",
                    GRID_LABELS[i],
                    GRID_LABELS[j],
                    mark(grid[i][j]),
                    mark(EXPECTED_GRID[i][j])
                ));
            }
        }
    }
    if differing.is_empty() {
        println!("grid matches");
        ExitCode::SUCCESS
    } else {
        for d in &differing {
            println!("mismatch {d}");
        }
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Encode(a) => encode(a),
        Command::Sim(a) => sim(a),
        Command::BenchTx(a) => bench_tx(a),
        Command::CheckLocks => Ok(check_locks()),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(2)
    })
}
