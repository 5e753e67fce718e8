use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Parser, Subcommand};

use coloc::bench::{bench_complexity, wall_time_ratios, write_bench, NEIGHBOR_COUNTS};
use coloc::output::{write_records, write_summary};
use coloc::protocols::{fig2_protocol, fig3_protocol, BatchMeta};
use coloc::validation::{
    render_report, run_ekf_suite, run_fix_suite, run_message_suite, DEFAULT_SEED,
};
use coloc::{load_scenario, run_batch, Algorithm, ConfigError};

#[derive(Parser)]
#[command(
    name = "coloc",
    version,
    about = "Cooperative positioning simulator and benchmark harness"
)]
struct Cli {
    /// Worker threads for Monte-Carlo runs (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one algorithm and write every agent-slot record.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        alg: Algorithm,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tracked agent under a link-mask schedule; RMSE by neighbour count.
    Fig2 {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = Algorithm::ALL)]
        algs: Vec<Algorithm>,
    },
    /// RMSE against the number of agents (30, 40, 50, 60).
    Fig3 {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = Algorithm::ALL)]
        algs: Vec<Algorithm>,
    },
    /// Message-operation counts and wall time per slot.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the closed forms and filters against the reference oracles.
    Validate {
        #[arg(long, default_value_t = 200)]
        cases: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Validation,
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<coloc_core::Error> for Failure {
    fn from(e: coloc_core::Error) -> Self {
        match e {
            coloc_core::Error::InvalidArgument(_) => Failure::Config(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", path.display())))
}

/// `out.csv` -> `out.<tag>.<ext>`.
fn sibling(path: &Path, tag: &str, ext: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    path.with_file_name(format!("{stem}.{tag}.{ext}"))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Command::Simulate { config, alg, out } => {
            let cfg = load_scenario(&config)?;
            let outcomes = run_batch(&cfg, &[alg], None, cli.threads)?;
            let meta = BatchMeta::from_outcomes(&outcomes);
            let records: Vec<_> = outcomes.into_iter().flat_map(|o| o.records).collect();
            write_records(create(&out)?, &records)?;
            eprintln!(
                "{} records, {} excluded during warm-up, {} numerical failures",
                meta.records, meta.excluded, meta.numerical_failures
            );
        }
        Command::Fig2 { config, out, algs } => {
            let cfg = load_scenario(&config)?;
            let res = fig2_protocol(&cfg, &algs, cli.threads)?;
            write_summary(create(&out)?, &res.by_neighbors)?;
            write_summary(create(&sibling(&out, "windows", "csv"))?, &res.by_window)?;
            write_records(create(&sibling(&out, "records", "csv"))?, &res.records)?;
            let schedule: Vec<String> = res
                .designation
                .windows
                .iter()
                .map(|w| format!("{}-{}:{}", w.first, w.last, w.keep))
                .collect();
            let extra = [
                ("designated_agent", res.designation.agent.to_string()),
                (
                    "designated_start",
                    format!("{},{}", res.designation.start.x, res.designation.start.y),
                ),
                (
                    "designated_heading_rad",
                    res.designation.heading.to_string(),
                ),
                ("link_mask_slots_keep", schedule.join(" ")),
            ];
            let mut meta = create(&sibling(&out, "meta", "txt"))?;
            meta.write_all(res.meta.render(&cfg, &algs, &extra).as_bytes())?;
            meta.flush()?;
            for p in &res.by_window {
                println!(
                    "{:<12} {:<9} rmse {:>9.3} m  ±{:.3}  n={}",
                    p.group_key, p.alg, p.rmse, p.ci95, p.n
                );
            }
        }
        Command::Fig3 { config, out, algs } => {
            let cfg = load_scenario(&config)?;
            let res = fig3_protocol(&cfg, &algs, cli.threads)?;
            write_summary(create(&out)?, &res.points)?;
            let mut meta = create(&sibling(&out, "meta", "txt"))?;
            meta.write_all(res.meta.render(&cfg, &algs, &[]).as_bytes())?;
            meta.flush()?;
            for p in &res.points {
                println!(
                    "agents={:<3} {:<9} rmse {:>9.3} m  ±{:.3}  n={}",
                    p.group_key, p.alg, p.rmse, p.ci95, p.n
                );
            }
        }
        Command::Bench { config, out } => {
            let cfg = load_scenario(&config)?;
            let rows = bench_complexity(&cfg, &NEIGHBOR_COUNTS, Duration::from_millis(200))?;
            match out {
                Some(path) => write_bench(create(&path)?, &rows)?,
                None => write_bench(io::stdout().lock(), &rows)?,
            }
            for (n, ratio) in wall_time_ratios(&rows) {
                eprintln!("n_rel={n:<3} spawn/ekf-stdf wall-time ratio {ratio:.1}");
            }
        }
        Command::Validate { cases, seed } => {
            let start = Instant::now();
            let msg = run_message_suite(seed, cases);
            let ekf = run_ekf_suite(seed, 1000);
            let fix = run_fix_suite(seed, 50, 30);
            print!("{}", render_report(&msg, &ekf, &fix));
            println!("elapsed: {:.1} s", start.elapsed().as_secs_f64());
            if !(msg.passed() && ekf.passed() && fix.passed()) {
                return Err(Failure::Validation);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    // Usage errors count as configuration errors; 2 is reserved for
    // validation failures.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if cli.threads > 0 {
        // Also bounds the validation suites, which use the global pool.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global();
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Validation) => ExitCode::from(2),
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
