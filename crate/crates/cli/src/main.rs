use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qoct_cli::{commands, CliError, Config};
use qoct_core::reconstruct::SpectrumMode;

#[derive(Parser)]
#[command(name = "qoct", version, about = "Fourier-domain quantum OCT simulator")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,

    /// Run configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Overrides `[run] seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Suppress progress and summary lines on stderr.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Verb {
    /// Analytic joint spectrum for the configured source and object.
    SimulateJoint,
    /// Monte Carlo time tags for the coherent source.
    SimulateTags,
    /// Pair up time tags and histogram them into a joint spectrum.
    ProcessTags {
        /// Tag file; defaults to `<out>/tags.qtag`.
        #[arg(long)]
        tags: Option<PathBuf>,
    },
    /// A-scan from one joint-spectrum CSV, B-scan from several, or a
    /// simulated B-scan from `[bscan]` when no input is given.
    Reconstruct {
        #[arg(long = "input")]
        inputs: Vec<PathBuf>,
        /// row, column or diagonal.
        #[arg(long, value_parser = parse_mode)]
        mode: Option<SpectrumMode>,
    },
    /// Sensitivity roll-off over the `[rolloff]` depth sweep.
    Rolloff,
    /// Classical vs biphoton resolution, dispersion and separability.
    Compare,
}

fn parse_mode(s: &str) -> Result<SpectrumMode, String> {
    SpectrumMode::parse(s).ok_or_else(|| format!("unknown mode '{s}' (row, column, diagonal)"))
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("QOCT_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("QOCT_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config is required".into()))?;
    let cfg = Config::load(path)?;
    let say = |msg: String| {
        if !cli.quiet {
            eprintln!("{msg}");
        }
    };
    let out = &cli.out;
    match cli.verb {
        Verb::SimulateJoint => {
            let p = commands::write_simulate_joint(&cfg, out)?;
            say(format!("wrote {}", p.display()));
        }
        Verb::SimulateTags => {
            let (p, n) = commands::write_simulate_tags(&cfg, cli.seed, out)?;
            say(format!("wrote {} ({n} tags)", p.display()));
        }
        Verb::ProcessTags { tags } => {
            let tags = tags.unwrap_or_else(|| out.join(commands::TAGS_FILE));
            let (p, stats) = commands::write_process_tags(&cfg, &tags, out)?;
            say(stats.summary_line());
            say(format!("wrote {}", p.display()));
        }
        Verb::Reconstruct { inputs, mode } => {
            for p in commands::write_reconstruct(&cfg, &inputs, mode, out)? {
                say(format!("wrote {}", p.display()));
            }
        }
        Verb::Rolloff => {
            let p = commands::write_rolloff(&cfg, out)?;
            say(format!("wrote {}", p.display()));
        }
        Verb::Compare => {
            let (p, report) = commands::write_compare(&cfg, out)?;
            if !cli.quiet {
                println!("{}", report.lines().join("\n"));
            }
            say(format!("wrote {}", p.display()));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qoct: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
