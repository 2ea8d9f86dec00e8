use std::path::PathBuf;

use clap::{Parser, Subcommand};

use elseg_cli::commands::{
    self, AugmentArgs, BaselineArgs, CorrelateArgs, EvalArgs, HeatmapArgs, InferArgs, SelectArgs,
    SynthArgs,
};
use elseg_cli::e2e::{self, E2eConfig};
use elseg_cli::{CliError, CliResult, VERSION_STRING};

#[derive(Debug, Parser)]
#[command(
    name = "elseg",
    version = VERSION_STRING,
    about = "EL-image defect segmentation evaluation toolkit",
    disable_help_subcommand = true
)]
struct Cli {
    /// Log level for diagnostics on stderr (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "info")]
    log_level: String,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate synthetic EL modules with exact ground-truth masks.
    Synth(SynthArgs),
    /// Produce augmented training patches from a labelled manifest.
    Augment(AugmentArgs),
    /// Segment one full module image by tiled inference.
    Infer(InferArgs),
    /// Score predicted masks against ground truth.
    Eval(EvalArgs),
    /// Estimate metric baselines from a double-annotated set.
    Baseline(BaselineArgs),
    /// Pick the best model from a metrics table.
    Select(SelectArgs),
    /// Accumulate masks into a defect-occurrence heat map.
    Heatmap(HeatmapArgs),
    /// Correlate defect counts with module performance data.
    Correlate(CorrelateArgs),
    /// Run the whole pipeline on a synthetic corpus and write a report.
    E2e(E2eArgs),
}

#[derive(Debug, clap::Args)]
struct E2eArgs {
    /// Output directory for every stage artifact and report.json.
    #[arg(long)]
    out: PathBuf,
    /// Pipeline config JSON; built-in demo defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the number of synthetic modules.
    #[arg(long)]
    modules: Option<usize>,
    /// Override the corpus seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn run_e2e_command(args: &E2eArgs) -> CliResult<()> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(CliError::from)?;
            serde_json::from_str(&text).map_err(|e| {
                CliError::Runtime(anyhow::anyhow!("cannot parse {}: {e}", path.display()))
            })?
        }
        None => E2eConfig::default(),
    };
    if let Some(modules) = args.modules {
        config.modules = modules;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let report = e2e::run_e2e(&config, &args.out)?;
    for kind in &report.kinds {
        match &kind.selection {
            Some(selection) => log::info!(
                "{}: frontier {:?}, best {}",
                kind.kind,
                selection.frontier,
                selection.best
            ),
            None => log::warn!("{}: no defined metrics; selection skipped", kind.kind),
        }
    }
    println!("{}", args.out.join("report.json").display());
    Ok(())
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Synth(args) => commands::run_synth(args),
        Command::Augment(args) => commands::run_augment(args),
        Command::Infer(args) => commands::run_infer(args),
        Command::Eval(args) => commands::run_eval(args),
        Command::Baseline(args) => commands::run_baseline(args),
        Command::Select(args) => commands::run_select(args),
        Command::Heatmap(args) => commands::run_heatmap(args),
        Command::Correlate(args) => commands::run_correlate(args),
        Command::E2e(args) => run_e2e_command(args),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{err}");
                    std::process::exit(0);
                }
                _ => {
                    // Flag/usage problems are validation failures: exit 1.
                    eprint!("{err}");
                    std::process::exit(1);
                }
            }
        }
    };

    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .format_timestamp(None)
        .init();

    if let Some(workers) = cli.workers {
        if workers == 0 {
            eprintln!("--workers must be >= 1");
            std::process::exit(1);
        }
        if let Err(err) = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
        {
            eprintln!("cannot configure {workers} workers: {err}");
            std::process::exit(2);
        }
    }

    match dispatch(&cli) {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(err.exit_code());
        }
    }
}
