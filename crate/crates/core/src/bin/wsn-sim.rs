use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wsn_sim::config::{parse_config, ConfigError, ExperimentSpec};
use wsn_sim::experiment::{run_experiment, summarize, ExperimentError, SummaryStats};
use wsn_sim::Variant;

#[derive(Parser)]
#[command(name = "wsn-sim", version, about = "Round-based WSN clustering simulator (LEACH, SEP, TEEN, DEEC, +ACH)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single seed of every configured protocol.
    Run(RunArgs),
    /// Run a multi-seed batch.
    Sweep(RunArgs),
    /// Recompute summary.csv and plots from existing run CSVs.
    Summarize {
        /// Experiment directory containing runs/.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (defaults to $WSN_SIM_OUT, then ./out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for `run`, base seed for `sweep`.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of seeds for `sweep`.
    #[arg(long)]
    seeds: Option<u64>,
    /// Comma-separated variants, e.g. `SEP,SEP-ACH`, or `all`.
    #[arg(long, value_delimiter = ',')]
    protocols: Option<Vec<String>>,
    /// Concurrent simulations.
    #[arg(long, default_value_t = default_jobs())]
    jobs: usize,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn out_dir(flag: Option<PathBuf>, spec: Option<&ExperimentSpec>) -> PathBuf {
    flag.or_else(|| spec.and_then(|s| s.out_dir.clone()))
        .or_else(|| std::env::var_os("WSN_SIM_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn build_spec(args: &RunArgs, sweep: bool) -> Result<ExperimentSpec, ConfigError> {
    let mut spec = match &args.config {
        Some(path) => parse_config(path)?,
        None => ExperimentSpec::default(),
    };
    if let Some(list) = &args.protocols {
        spec.protocols = if list.len() == 1 && list[0].eq_ignore_ascii_case("all") {
            Variant::all()
        } else {
            list.iter()
                .map(|s| s.parse::<Variant>())
                .collect::<Result<_, _>>()
                .map_err(|e| ConfigError::Invalid { key: "protocols".into(), reason: e.to_string() })?
        };
    }
    if sweep {
        let base = args.seed.unwrap_or_else(|| spec.seeds.first().copied().unwrap_or(spec.base.seed));
        let n = args.seeds.unwrap_or(spec.seeds.len() as u64);
        if args.seed.is_some() || args.seeds.is_some() {
            spec.set_seed_range(base, n);
        }
    } else {
        if args.seeds.is_some() {
            return Err(ConfigError::Invalid {
                key: "seeds".into(),
                reason: "`run` takes a single --seed; use `sweep`".into(),
            });
        }
        let seed = args.seed.unwrap_or_else(|| spec.seeds.first().copied().unwrap_or(spec.base.seed));
        spec.base.seed = seed;
        spec.seeds = vec![seed];
    }
    spec.validate()?;
    Ok(spec)
}

fn report(stats: &SummaryStats) {
    println!("{:<10} {:>16} {:>16} {:>16}", "protocol", "first death (med)", "all dead (med)", "pkts to BS (med)");
    for s in &stats.per_variant {
        println!(
            "{:<10} {:>16} {:>16} {:>16}",
            s.variant.to_string(),
            s.first_death.median,
            s.all_dead.median,
            s.packets_to_bs.median
        );
    }
}

fn execute(cli: Cli) -> Result<(), ExperimentError> {
    match cli.command {
        Command::Run(args) => {
            let spec = build_spec(&args, false)?;
            let dir = out_dir(args.out.clone(), Some(&spec));
            let stats = run_experiment(&spec, &dir, args.jobs)?;
            report(&stats);
            println!("wrote {}", dir.display());
        }
        Command::Sweep(args) => {
            let spec = build_spec(&args, true)?;
            let dir = out_dir(args.out.clone(), Some(&spec));
            let stats = run_experiment(&spec, &dir, args.jobs)?;
            report(&stats);
            println!("wrote {}", dir.display());
        }
        Command::Summarize { out } => {
            let dir = out_dir(out, None);
            let stats = summarize(&dir)?;
            report(&stats);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
