use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;

use lora_coexist::config::{load_config, ConfigError, Experiment};
use lora_coexist::engine::RunOptions;
use lora_coexist::sweep::{aggregate, emit_plot_data, read_results, run_sweep_with, write_csv, Figure};
use lora_coexist::SimError;

const EXIT_CONFIG: u8 = 2;
const EXIT_INVARIANT: u8 = 3;
const EXIT_IO: u8 = 1;

/// Simulate co-located LoRa networks and report the Data Extraction Rate.
#[derive(Debug, Parser)]
#[command(name = "lora-coexist", version)]
struct Args {
    /// Experiment configuration (TOML).
    #[arg(long, value_name = "PATH", required_unless_present = "results")]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,

    /// Seeds to run, e.g. `1,2,3` or `1-10`; overrides the configuration.
    #[arg(long, value_name = "LIST", value_parser = parse_seeds)]
    seeds: Option<SeedList>,

    /// Worker threads.
    #[arg(long, value_name = "N", default_value_t = default_parallelism())]
    parallel: usize,

    /// Also write plot data for this figure (fig2..fig6).
    #[arg(long, value_name = "NAME", value_parser = parse_figure)]
    figure: Option<Figure>,

    /// Write a per-packet trace for every run.
    #[arg(long)]
    trace: bool,

    /// Check the configuration and exit.
    #[arg(long, conflicts_with = "results")]
    validate_only: bool,

    /// Build plot data from existing results CSVs instead of simulating; repeatable.
    #[arg(long, value_name = "PATH", requires = "figure", conflicts_with = "config")]
    results: Vec<PathBuf>,
}

fn default_parallelism() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn parse_figure(s: &str) -> Result<Figure, String> {
    Figure::parse(s).map_err(|e| e.to_string())
}

#[derive(Debug, Clone)]
struct SeedList(Vec<u64>);

fn parse_seeds(s: &str) -> Result<SeedList, String> {
    let mut seeds = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let num = |t: &str| t.trim().parse::<u64>().map_err(|e| format!("bad seed {t:?}: {e}"));
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b) = (num(a)?, num(b)?);
                if a > b {
                    return Err(format!("empty seed range {part}"));
                }
                seeds.extend(a..=b);
            }
            None => seeds.push(num(part)?),
        }
    }
    if seeds.is_empty() {
        return Err("no seeds given".into());
    }
    Ok(SeedList(seeds))
}

enum Failure {
    Config(String),
    Invariant(String),
    Io(String),
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Invariant(_) => Failure::Invariant(e.to_string()),
            _ if e.is_config_error() => Failure::Config(e.to_string()),
            _ => Failure::Invariant(e.to_string()),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Invariant(msg)) => {
            eprintln!("simulation invariant violated: {msg}");
            ExitCode::from(EXIT_INVARIANT)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_IO)
        }
    }
}

fn run(args: &Args) -> Result<(), Failure> {
    if !args.results.is_empty() {
        let mut rows = Vec::new();
        for path in &args.results {
            let file = File::open(path).map_err(io_err(path))?;
            rows.extend(read_results(file).map_err(csv_err(path))?);
        }
        fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
        return write_plot(args, &rows);
    }

    let path = args.config.as_ref().expect("clap requires --config without --results");
    let mut exp: Experiment = load_config(path)?;
    if let Some(seeds) = &args.seeds {
        exp.seeds = seeds.0.clone();
    }
    exp.validate()?;
    if args.validate_only {
        println!("{}: ok", path.display());
        return Ok(());
    }

    fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    let placement_dir = args.out.join("placement");
    let trace_dir = args.out.join("trace");
    fs::create_dir_all(&placement_dir).map_err(io_err(&placement_dir))?;
    if args.trace {
        fs::create_dir_all(&trace_dir).map_err(io_err(&trace_dir))?;
    }

    let mut rows = Vec::new();
    let options = RunOptions { trace: args.trace };
    let mut io_failure = None;
    run_sweep_with(&exp, args.parallel, options, |job, output| {
        let tag = job.tag();
        let result = (|| {
            let p = placement_dir.join(format!("{tag}.csv"));
            output.deployment.write_placement_csv(create(&p)?).map_err(csv_err(&p))?;
            if args.trace {
                let p = trace_dir.join(format!("{tag}.csv"));
                output.log.write_trace_csv(create(&p)?).map_err(csv_err(&p))?;
            }
            Ok(())
        })();
        if let Err(e) = result {
            io_failure.get_or_insert(e);
        }
        rows.extend(output.rows);
        Ok(())
    })?;
    if let Some(e) = io_failure {
        return Err(e);
    }

    let p = args.out.join("results.csv");
    write_csv(&rows, create(&p)?).map_err(csv_err(&p))?;
    let p = args.out.join("aggregate.csv");
    write_csv(&aggregate(&rows), create(&p)?).map_err(csv_err(&p))?;
    write_plot(args, &rows)
}

fn write_plot(args: &Args, rows: &[lora_coexist::sweep::ResultRow]) -> Result<(), Failure> {
    if let Some(figure) = args.figure {
        let plot = emit_plot_data(rows, figure)?;
        let p = args.out.join(format!("{figure}.csv"));
        write_csv(&plot, create(&p)?).map_err(csv_err(&p))?;
    }
    Ok(())
}
