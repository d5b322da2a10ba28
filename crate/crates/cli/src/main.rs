mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use armas_core::{Error, Method};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "armas", version, about = "Self-embedded audio gap reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Halftone a clip and hide the result in its own LSBs.
    Embed {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(short, long)]
        manifest: PathBuf,
        /// Permutation seed; defaults to the sample count.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Zero-fill one or more gaps and record them in the manifest.
    Corrupt(CorruptArgs),
    /// Fill the gaps listed in the manifest.
    Reconstruct(ReconstructArgs),
    /// Score a reconstruction against the reference clip.
    Evaluate {
        #[arg(short, long)]
        reference: PathBuf,
        #[arg(short, long)]
        test: PathBuf,
        /// Manifest whose gap list restricts the gap metrics.
        #[arg(short, long)]
        manifest: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run a benchmark plan.
    Bench {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Write the halftone codec stages of a clip as images plus statistics.
    HcrDemo {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 1.5)]
        sigma: f64,
    },
}

#[derive(Args)]
struct CorruptArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    /// Manifest to update in place.
    #[arg(short, long)]
    manifest: PathBuf,
    #[arg(long, conflicts_with = "random")]
    gap_start_ms: Option<f64>,
    #[arg(long, default_value_t = 300.0)]
    gap_len_ms: f64,
    /// Place this many gaps at random instead of at a fixed position.
    #[arg(long)]
    random: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ReconstructArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[arg(short, long)]
    manifest: PathBuf,
    #[arg(long, default_value = "rf", value_parser = parse_method)]
    method: Method,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long)]
    trees: Option<usize>,
    /// Forest seed; defaults to the manifest seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    min_leaf: Option<usize>,
    #[arg(long)]
    max_train_rows: Option<usize>,
    #[arg(long)]
    ar_order: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    /// Write the receiver feature table as CSV.
    #[arg(long)]
    dump_features: Option<PathBuf>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::NotWav(_)
        | Error::UnsupportedEncoding(_)
        | Error::MultichannelWithoutFlag(_)
        | Error::TruncatedFile(_)
        | Error::ManifestMismatch(_)
        | Error::Json(_) => 2,
        Error::Io(_) | Error::Csv(_) => 3,
        Error::DoesNotFit(_) | Error::GapOutOfRange { .. } | Error::OverlappingGaps(_) => 4,
        Error::NoGaps => 5,
        Error::LengthMismatch { .. } => 6,
        _ => 1,
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("ARMAS_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            // Fails only if a pool already exists, which cannot happen this early.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let result = match cli.command {
        Command::Embed { input, output, manifest, seed } => commands::embed(&input, &output, &manifest, seed),
        Command::Corrupt(args) => commands::corrupt(&args),
        Command::Reconstruct(args) => commands::reconstruct(&args),
        Command::Evaluate { reference, test, manifest, output } => {
            commands::evaluate(&reference, &test, manifest.as_deref(), &output)
        }
        Command::Bench { plan, out_dir } => commands::bench(&plan, &out_dir),
        Command::HcrDemo { input, out_dir, sigma } => commands::hcr_demo(&input, &out_dir, sigma),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let report = serde_json::json!({ "error": err.name(), "message": err.to_string() });
            eprintln!("{report}");
            ExitCode::from(exit_code(&err))
        }
    }
}
