//! `anglekit` command-line frontend.
//!
//! Results go to stdout as JSON or CSV; diagnostics go to stderr.
//! Exit codes: 0 success, 1 check failed, 2 usage or input error,
//! 3 empty input.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use anglekit::codec::{FitFunction, Method};
use anglekit::loss::LossKind;
use anglekit::ApMode;
use clap::{Parser, Subcommand, ValueEnum};

pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_EMPTY: u8 = 3;

/// An error carrying the process exit code.
#[derive(Debug)]
pub struct Exit {
    pub code: u8,
    pub message: String,
}

impl std::fmt::Display for Exit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Exit {}

#[derive(Parser)]
#[command(
    name = "anglekit",
    version,
    about = "Oriented-box angle codecs, losses and rotated-IoU evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TableFormat {
    Csv,
    Json,
}

#[derive(clap::Args)]
struct CodecArgs {
    #[arg(long, default_value = "mgar")]
    method: Method,
    /// Number of angle classes; defaults per method (MGAR 3, CSL 180, DCL 64).
    #[arg(long)]
    ctheta: Option<u32>,
    /// CSL window size in degrees.
    #[arg(long)]
    window: Option<f64>,
    /// Residual fit function: linear, sigmoid, square or exp.
    #[arg(long)]
    fit: Option<FitFunction>,
}

#[derive(Subcommand)]
enum Command {
    /// Encode an angle into its training target.
    Encode {
        #[command(flatten)]
        codec: CodecArgs,
        /// Angle in degrees, [0, 180).
        #[arg(long, allow_hyphen_values = true)]
        angle: f64,
    },
    /// Decode raw network outputs into an angle.
    Decode {
        #[command(flatten)]
        codec: CodecArgs,
        /// Comma-separated class logits (or code-bit logits for DCL).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        logits: Vec<f64>,
        /// Residual regression output.
        #[arg(long, allow_hyphen_values = true)]
        reg: Option<f64>,
    },
    /// Rotated IoU of two boxes given as cx,cy,w,h,theta.
    Iou {
        #[arg(long, allow_hyphen_values = true)]
        a: String,
        #[arg(long, allow_hyphen_values = true)]
        b: String,
    },
    /// Rotated NMS over a detection JSON file.
    Nms {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        threshold: f64,
        /// Suppress across categories too.
        #[arg(long)]
        class_agnostic: bool,
    },
    /// Prediction-layer thickness of the angle head.
    Thickness {
        #[arg(long)]
        method: Method,
        #[arg(long)]
        ctheta: Option<u32>,
        #[arg(long, default_value_t = 9)]
        anchors: u32,
    },
    /// Analytic and empirical encoding errors plus head thickness per codec.
    CodecReport {
        /// Comma-separated methods; default all.
        #[arg(long, value_delimiter = ',')]
        methods: Vec<Method>,
        #[arg(long, default_value_t = 0.001)]
        grid_step: f64,
        #[arg(long, default_value_t = 9)]
        anchors: u32,
        #[arg(long, value_enum, default_value = "csv")]
        out: TableFormat,
    },
    /// Evaluate detections against DOTA-style ground truth.
    Eval {
        /// Directory of per-image annotation files.
        #[arg(long)]
        gt: Option<PathBuf>,
        /// Detection JSON file or directory of Task1_<category>.txt files.
        #[arg(long)]
        det: Option<PathBuf>,
        #[arg(long)]
        mode: Option<ApMode>,
        #[arg(long, value_delimiter = ',')]
        thresholds: Option<Vec<f64>>,
        /// Apply class-aware rotated NMS per image before matching.
        #[arg(long)]
        nms: Option<f64>,
        /// Report path; `.csv` writes CSV, anything else JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        /// TOML run configuration; flags override its values.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Fail on the first malformed line instead of skipping it.
        #[arg(long)]
        strict: bool,
    },
    /// Check every analytic loss gradient against finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        points: usize,
        #[arg(long, hide = true)]
        corrupt: Option<LossKind>,
    },
}

fn init_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("ANGLEKIT_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| Exit {
        code: EXIT_INPUT,
        message: format!("ANGLEKIT_THREADS must be a non-negative integer, got {raw:?}"),
    })?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    init_threads()?;
    match cli.command {
        Command::Encode { codec, angle } => commands::encode(&codec.build()?, angle),
        Command::Decode { codec, logits, reg } => commands::decode(&codec.build()?, logits, reg),
        Command::Iou { a, b } => commands::iou(&a, &b),
        Command::Nms {
            input,
            threshold,
            class_agnostic,
        } => commands::nms(&input, threshold, class_agnostic),
        Command::Thickness {
            method,
            ctheta,
            anchors,
        } => commands::thickness(method, ctheta.unwrap_or(method.default_c_theta()), anchors),
        Command::CodecReport {
            methods,
            grid_step,
            anchors,
            out,
        } => commands::codec_report(
            &methods,
            grid_step,
            anchors,
            matches!(out, TableFormat::Json),
        ),
        Command::Eval {
            gt,
            det,
            mode,
            thresholds,
            nms,
            out,
            config,
            strict,
        } => commands::eval(commands::EvalArgs {
            gt,
            det,
            mode,
            thresholds,
            nms,
            out,
            config,
            strict,
        }),
        Command::Gradcheck {
            seed,
            points,
            corrupt,
        } => commands::gradcheck(seed, points, corrupt),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.downcast_ref::<Exit>() {
        e.code
    } else {
        EXIT_INPUT
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
