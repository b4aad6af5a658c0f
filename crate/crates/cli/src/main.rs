use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use exprclone_core::db_metric::LambdaGrid;
use exprclone_core::job::{run_batch_job, run_clone_job, BatchJob, CloneJob, FacePaths, FramePattern, JobSettings};
use exprclone_core::pipeline::{LambdaSource, FALLBACK_LAMBDA};
use exprclone_core::Error;

mod synth;

const EXIT_INPUT: u8 = 2;
const EXIT_STAGE: u8 = 3;
const EXIT_PARTIAL: u8 = 4;

#[derive(Parser)]
#[command(
    name = "exprclone",
    version,
    about = "Clone a facial expression from one face image onto another"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clone one source expression onto a target neutral face.
    Clone(CloneArgs),
    /// Clone a sequence of source expression frames onto one target.
    Batch(BatchArgs),
    /// Train an eigenbasis from a directory of images and write the sidecar.
    Train {
        #[arg(long)]
        train_dir: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Write a synthetic demo data set.
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        /// Canvas edge length in pixels.
        #[arg(long, default_value_t = 256)]
        size: u32,
        /// Number of numbered expression frames for the batch demo.
        #[arg(long, default_value_t = 4)]
        frames: usize,
    },
}

#[derive(Args)]
struct Common {
    /// Muscle-area config.
    #[arg(long)]
    muscles: PathBuf,
    /// Directory of PGM/PPM images used to train the eigenbasis.
    #[arg(long)]
    train_dir: Option<PathBuf>,
    /// Eigenbasis sidecar; read if present, written after training otherwise.
    #[arg(long)]
    basis_cache: Option<PathBuf>,
    /// Fixed elasticity ratio; skips the DB metric.
    #[arg(long = "lambda")]
    lambda: Option<f64>,
    /// Comma-separated candidate ratios.
    #[arg(long)]
    lambda_grid: Option<String>,
    /// Weight of the global-warp distance term.
    #[arg(long)]
    omega_db: Option<f64>,
    /// Write the lambda score table here.
    #[arg(long)]
    db_report: Option<PathBuf>,
    /// Write every intermediate stage into this directory.
    #[arg(long)]
    dump_stages: Option<PathBuf>,
}

impl Common {
    fn settings(self) -> Result<JobSettings, Error> {
        let lambda_grid = self.lambda_grid.as_deref().map(LambdaGrid::parse).transpose()?;
        if let Some(l) = self.lambda {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::InvalidArgument(format!("--lambda {l} must be finite and >= 0")));
            }
        }
        Ok(JobSettings {
            muscles: Some(self.muscles),
            train_dir: self.train_dir,
            basis_cache: self.basis_cache,
            lambda: self.lambda,
            lambda_grid,
            omega_db: self.omega_db,
            db_report: self.db_report,
            dump_stages: self.dump_stages,
        })
    }
}

#[derive(Args)]
struct CloneArgs {
    #[arg(long)]
    src_neutral: PathBuf,
    #[arg(long)]
    src_neutral_pts: PathBuf,
    #[arg(long)]
    src_exp: PathBuf,
    #[arg(long)]
    src_exp_pts: PathBuf,
    #[arg(long)]
    tgt_neutral: PathBuf,
    #[arg(long)]
    tgt_neutral_pts: PathBuf,
    #[command(flatten)]
    common: Common,
    /// Output image (PGM or PPM, matching the target's channels).
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct BatchArgs {
    #[arg(long)]
    src_neutral: PathBuf,
    #[arg(long)]
    src_neutral_pts: PathBuf,
    #[arg(long)]
    tgt_neutral: PathBuf,
    #[arg(long)]
    tgt_neutral_pts: PathBuf,
    /// printf pattern of the source expression frames, e.g. `src_%04d.ppm`.
    #[arg(long)]
    frames: String,
    /// printf pattern of the per-frame landmark files.
    #[arg(long)]
    frame_pts: String,
    #[command(flatten)]
    common: Common,
    /// printf pattern of the output frames.
    #[arg(short, long)]
    output: String,
}

fn exit_for(err: &Error) -> u8 {
    if err.is_input_error() {
        EXIT_INPUT
    } else {
        EXIT_STAGE
    }
}

fn run_clone(args: CloneArgs) -> Result<u8, Error> {
    let job = CloneJob {
        src_neutral: FacePaths::new(args.src_neutral, args.src_neutral_pts),
        src_exp: FacePaths::new(args.src_exp, args.src_exp_pts),
        tgt_neutral: FacePaths::new(args.tgt_neutral, args.tgt_neutral_pts),
        output: args.output,
        settings: args.common.settings()?,
    };
    let outcome = run_clone_job(&job)?;
    if outcome.outputs.lambda_source == LambdaSource::Fallback {
        eprintln!("notice: no training set given; using elasticity ratio {FALLBACK_LAMBDA}");
    }
    println!(
        "lambda {} ({:?})",
        outcome.outputs.lambda, outcome.outputs.lambda_source
    );
    for (name, mapping) in &outcome.dump_mappings {
        println!("{name}: {mapping}");
    }
    println!("wrote {}", job.output.display());
    Ok(0)
}

fn run_batch(args: BatchArgs) -> Result<u8, Error> {
    let job = BatchJob {
        src_neutral: FacePaths::new(args.src_neutral, args.src_neutral_pts),
        tgt_neutral: FacePaths::new(args.tgt_neutral, args.tgt_neutral_pts),
        frames: FramePattern::parse(&args.frames)?,
        frame_pts: FramePattern::parse(&args.frame_pts)?,
        output: FramePattern::parse(&args.output)?,
        settings: args.common.settings()?,
    };
    let s = &job.settings;
    let fallback = s.lambda.is_none() && s.train_dir.is_none() && !s.basis_cache.as_ref().is_some_and(|c| c.exists());
    let outcome = run_batch_job(&job)?;
    if fallback {
        eprintln!("notice: no training set given; using elasticity ratio {FALLBACK_LAMBDA}");
    }
    if let Some(l) = outcome.lambda {
        println!("lambda {l}");
    }
    for index in &outcome.skipped {
        eprintln!("warning: frame {index} skipped (missing image or points)");
    }
    for f in &outcome.frames {
        match &f.result {
            Ok(_) => println!("frame {} -> {}", f.index, job.output.format(f.index).display()),
            Err(e) => eprintln!("error: frame {}: {e}", f.index),
        }
    }
    Ok(if outcome.is_complete() { 0 } else { EXIT_PARTIAL })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Clone(args) => run_clone(args),
        Command::Batch(args) => run_batch(args),
        Command::Train { train_dir, output } => (|| {
            let images = exprclone_core::job::load_training_dir(&train_dir)?;
            let basis = exprclone_core::train_basis(&images, None)?;
            basis.save(&output)?;
            println!(
                "{} components from {} images -> {}",
                basis.len(),
                images.len(),
                output.display()
            );
            Ok(0)
        })(),
        Command::Synth { out_dir, size, frames } => {
            return match synth::write_demo(&out_dir, size, frames).context("writing demo data") {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(EXIT_INPUT)
                }
            };
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let mut msg = e.to_string();
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                let text = s.to_string();
                if !msg.contains(&text) {
                    msg.push_str(": ");
                    msg.push_str(&text);
                }
                source = s.source();
            }
            eprintln!("error: {msg}");
            ExitCode::from(exit_for(&e))
        }
    }
}
