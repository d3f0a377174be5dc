//! Operator command line for the feature-vector search pipeline.
//!
//! Each verb drives exactly one library operation path: `train` fits a
//! network on a labeled image directory, `extract` turns images or raw
//! vectors into normalized feature vectors, `build` constructs a banded
//! index snapshot from a gallery file, `enroll`/`identify`/`authenticate`
//! operate against a snapshot, `verify` replays a snapshot through the
//! scanning reference classifier, `bench` measures comparison counts, and
//! `serve` starts the HTTP service.
//!
//! Exit codes: 0 success, 1 operation failure (one `{"code", "message"}`
//! line on stderr), 2 usage error. All verbs accept `--seed`; a fixed seed
//! makes stdout byte-identical across runs, so anything nondeterministic
//! (wall-clock timings) goes to stderr.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use emfv_core::{MeanPolicy, DEFAULT_MARGIN};

mod bench;
mod check;
mod jsonl;
mod ops;

#[derive(Parser)]
#[command(name = "emfv", version, about = "Feature-vector search pipeline")]
struct Cli {
    /// Seed for every randomized step; a fixed seed gives byte-identical
    /// stdout.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a classification network on a directory of labeled images.
    ///
    /// The directory holds one subdirectory per class, each containing
    /// binary 8-bit PGM images of one shared extent; subdirectory names in
    /// lexicographic order define the class labels.
    Train(TrainArgs),
    /// Turn images or raw vectors into normalized feature vectors.
    Extract(ExtractArgs),
    /// Build an index snapshot from a gallery vector file.
    Build(BuildArgs),
    /// Add one person to an existing snapshot.
    Enroll(EnrollArgs),
    /// Rank gallery persons for a probe.
    Identify(IdentifyArgs),
    /// Accept or reject a probe against a claimed identity.
    Authenticate(AuthenticateArgs),
    /// Replay a snapshot through the scanning reference classifier.
    Verify(VerifyArgs),
    /// Measure per-query comparison counts across gallery sizes.
    Bench(bench::BenchArgs),
    /// Start the HTTP service.
    Serve(ServeArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Directory of class subdirectories of PGM images.
    #[arg(long)]
    images: PathBuf,
    /// Where to write the trained weights.
    #[arg(long)]
    weights: PathBuf,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    learning_rate: f64,
    #[arg(long, default_value_t = 8)]
    batch_size: usize,
}

#[derive(Args)]
struct ExtractArgs {
    /// One binary PGM image; requires --weights.
    #[arg(long, conflicts_with = "vectors")]
    image: Option<PathBuf>,
    /// Raw vector file, one {"id", "vector"} object per line.
    #[arg(long, required_unless_present = "image")]
    vectors: Option<PathBuf>,
    /// Trained network weights for image input.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Identifier for the emitted vector of an --image input.
    #[arg(long, default_value = "probe")]
    id: String,
    /// Write the vectors here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BuildArgs {
    /// Gallery vector file; lines sharing an id are samples of one person.
    #[arg(long)]
    gallery: PathBuf,
    /// Where to write the snapshot.
    #[arg(long)]
    snapshot: PathBuf,
    /// Widen every band by this amount on both sides.
    #[arg(long, default_value_t = DEFAULT_MARGIN)]
    margin: f64,
    /// Gap difference below which a between-bands probe is a tie.
    #[arg(long, default_value_t = 0.0)]
    tie_tolerance: f64,
}

#[derive(Args)]
struct EnrollArgs {
    #[arg(long)]
    snapshot: PathBuf,
    /// Person to add; must not already be enrolled.
    #[arg(long)]
    person: String,
    /// Vector file of the person's samples (ids in the file are ignored).
    #[arg(long)]
    samples: PathBuf,
    /// What enrollment does to the existing mean and bands.
    #[arg(long, value_enum, default_value_t = PolicyArg::Frozen)]
    policy: PolicyArg,
}

#[derive(Args)]
struct IdentifyArgs {
    #[arg(long)]
    snapshot: PathBuf,
    /// Probe vector file; one result line per probe line.
    #[arg(long, conflicts_with = "distance")]
    probe: Option<PathBuf>,
    /// Precomputed distance to the gallery mean, instead of a probe file.
    #[arg(long, required_unless_present = "probe")]
    distance: Option<f64>,
    #[arg(long, default_value_t = 3)]
    max_neighbors: usize,
}

#[derive(Args)]
struct AuthenticateArgs {
    #[arg(long)]
    snapshot: PathBuf,
    /// Claimed identity.
    #[arg(long)]
    person: String,
    #[arg(long, conflicts_with = "distance")]
    probe: Option<PathBuf>,
    #[arg(long, required_unless_present = "probe")]
    distance: Option<f64>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    snapshot: PathBuf,
    /// Seeded random probe distances on top of the structural sweep.
    #[arg(long, default_value_t = 2000)]
    probes: usize,
}

#[derive(Args)]
struct ServeArgs {
    /// TOML config file; flags and environment override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    addr: Option<String>,
    #[arg(long)]
    snapshot: Option<PathBuf>,
    /// Operator bearer token; enrollment stays disabled without one.
    #[arg(long)]
    token: Option<String>,
    /// Network weights enabling image payloads.
    #[arg(long)]
    weights: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    /// Keep the existing mean and bands; only insert the new band.
    Frozen,
    /// Recompute the mean and rebuild every band over the grown gallery.
    Recompute,
}

impl PolicyArg {
    fn policy(self) -> MeanPolicy {
        match self {
            PolicyArg::Frozen => MeanPolicy::Frozen,
            PolicyArg::Recompute => MeanPolicy::Recompute,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => ops::train(&args, cli.seed),
        Command::Extract(args) => ops::extract(&args),
        Command::Build(args) => ops::build(&args),
        Command::Enroll(args) => ops::enroll(&args),
        Command::Identify(args) => ops::identify(&args),
        Command::Authenticate(args) => ops::authenticate(&args),
        Command::Verify(args) => check::verify(&args, cli.seed),
        Command::Bench(args) => bench::bench(&args, cli.seed),
        Command::Serve(args) => serve(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        // A closed stdout (`emfv ... | head`) is the reader's choice, not a
        // failure of ours.
        Err(emfv_core::Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!(
                "{}",
                serde_json::json!({ "code": e.code(), "message": e.to_string() })
            );
            ExitCode::FAILURE
        }
    }
}

fn serve(args: &ServeArgs) -> emfv_core::Result<()> {
    let mut config = emfv_service::ServiceConfig::load(args.config.as_deref())?;
    if let Some(addr) = &args.addr {
        config.addr = addr.clone();
    }
    if let Some(snapshot) = &args.snapshot {
        config.snapshot = snapshot.clone();
    }
    if let Some(token) = &args.token {
        config.token = Some(token.clone());
    }
    if let Some(weights) = &args.weights {
        config.weights = Some(weights.clone());
    }
    config.validate()?;
    emfv_service::serve_blocking(config)
}
