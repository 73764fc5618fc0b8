//! `nns`: batch front end for non-nutritive sucking detection.
//!
//! Exit status: 0 on success, 1 on invalid input or usage, 2 on I/O failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgMatches, Command as ClapCommand, CommandFactory, FromArgMatches, Parser, Subcommand};

use config::{flag_name, Config, SCHEMA};

#[derive(Debug)]
pub enum CliError {
    Invalid(String),
    Io(String),
}

impl From<nns_core::Error> for CliError {
    fn from(e: nns_core::Error) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            CliError::Invalid(e.to_string())
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Io(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Invalid(m) => write!(f, "invalid input: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

/// Detect and segment non-nutritive sucking in infant video.
///
/// Every pipeline parameter is a global `--<key>` flag and a key of the
/// `--config` file; flags override the file, which overrides the defaults.
/// Artifacts start with a `#` header recording the resolved configuration.
#[derive(Debug, Parser)]
#[command(name = "nns", version)]
struct Cli {
    /// Flat key=value configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads; defaults to one per core. Outputs do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a synthetic clip with known NNS bursts.
    ///
    /// Writes frames/, annotations.csv and detections.csv into --out.
    Synth {
        /// Flat key=value clip description; unset keys keep their defaults.
        #[arg(long, value_name = "FILE")]
        spec: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Track the face, stabilize it and write fixed-size crops.
    ///
    /// Writes frames/ (the crops) and track.csv into --out.
    Stabilize {
        /// Frame directory (frame_%06d.pgm or .png, optional meta.txt).
        #[arg(long, value_name = "DIR")]
        frames: PathBuf,
        /// Face boxes, `frame,x,y,w,h`, at one or more frames.
        #[arg(long, value_name = "FILE")]
        detections: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Dense optical flow and its HSV encoding.
    ///
    /// Writes flow_%06d.flo, hsv_%06d.png and meta.txt into --out.
    Flow {
        #[arg(long, value_name = "DIR")]
        frames: PathBuf,
        /// Stabilize around these face boxes first; without it the frames
        /// are used as they are.
        #[arg(long, value_name = "FILE")]
        detections: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Score windows with a backend, or train the baseline with --train.
    Classify {
        /// Flow directory whose window cover (--mode, --window-s,
        /// --stride-s) is scored.
        #[arg(long, value_name = "DIR", conflicts_with_all = ["manifest", "train"])]
        flow: Option<PathBuf>,
        /// Source name for --flow; defaults to the directory name.
        #[arg(long, requires = "flow")]
        source: Option<String>,
        /// Clip manifest to score; clip sources are resolved under --flow-root.
        #[arg(long, value_name = "FILE", requires = "flow_root", conflicts_with = "train")]
        manifest: Option<PathBuf>,
        /// Clip manifest to train the baseline on.
        #[arg(long, value_name = "FILE", requires_all = ["flow_root", "model_out"])]
        train: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        flow_root: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        model_out: Option<PathBuf>,
        /// Score CSV.
        #[arg(long, value_name = "FILE", required_unless_present = "train")]
        out: Option<PathBuf>,
    },
    /// Cover, score, aggregate and threshold videos into NNS events.
    ///
    /// Without --flow the backend must be a score file, which then also
    /// lists the sources.
    Segment {
        /// Flow directories, one per video; the directory name is the source.
        #[arg(long, value_name = "DIR", num_args = 1..)]
        flow: Vec<PathBuf>,
        /// Video duration for score-file replay; defaults to the end of the
        /// last scored window of each source.
        #[arg(long, value_name = "SECONDS")]
        duration: Option<f64>,
        /// Events CSV.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Also write the window scores.
        #[arg(long, value_name = "FILE")]
        scores_out: Option<PathBuf>,
        /// SVG timeline.
        #[arg(long, value_name = "FILE")]
        svg: Option<PathBuf>,
        /// Ground truth drawn above the predictions in the SVG (events or
        /// annotation CSV).
        #[arg(long, value_name = "FILE", num_args = 1.., requires = "svg")]
        gt: Vec<PathBuf>,
    },
    /// AP and AR at the --eval-thresholds IoU thresholds.
    ///
    /// Sources are grouped by subject, the part before the first `/`.
    Evaluate {
        /// Predicted events CSV.
        #[arg(long, value_name = "FILE")]
        pred: PathBuf,
        /// Ground truth, events CSV or annotation CSV (one or more).
        #[arg(long, value_name = "FILE", num_args = 1.., required = true)]
        gt: Vec<PathBuf>,
        /// Report CSV.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Draw classification or transition clips from annotations.
    SampleClips {
        /// Annotation CSVs; each file's subject becomes the clip source.
        #[arg(long, value_name = "FILE", num_args = 1.., required = true)]
        annotations: Vec<PathBuf>,
        /// Manifest CSV.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Cohen's kappa between two coders on incidence bins.
    Kappa {
        #[arg(long, value_name = "FILE")]
        a: PathBuf,
        #[arg(long, value_name = "FILE")]
        b: PathBuf,
        /// Also write the result as CSV.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
}

fn command() -> ClapCommand {
    let mut cmd = Cli::command();
    for key in SCHEMA {
        let help = if key.default.is_empty() {
            key.help.to_string()
        } else {
            format!("{} [default: {}]", key.help, key.default)
        };
        cmd = cmd.arg(
            Arg::new(key.name)
                .long(flag_name(key.name))
                .value_name("VALUE")
                .global(true)
                .help(help)
                .help_heading("Pipeline parameters"),
        );
    }
    cmd
}

fn overrides(matches: &ArgMatches) -> Vec<(&'static str, String)> {
    let leaf = matches.subcommand().map_or(matches, |(_, m)| m);
    SCHEMA
        .iter()
        .filter_map(|k| leaf.get_one::<String>(k.name).map(|v| (k.name, v.clone())))
        .collect()
}

fn run() -> Result<(), CliError> {
    let matches = match command().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let cli = Cli::from_arg_matches(&matches).map_err(|e| CliError::Invalid(e.to_string()))?;
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Invalid("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Invalid(e.to_string()))?;
    }
    let cfg = Config::resolve(cli.config.as_deref(), &overrides(&matches))?;
    commands::dispatch(cli.command, &cfg)
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nns: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
