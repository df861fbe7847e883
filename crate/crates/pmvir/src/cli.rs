//! Command-line interface.
//!
//! Exit codes: 0 success, 1 processing failure, 2 configuration error
//! (including usage errors), 3 I/O error.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::{self, EvalOptions};
use crate::config::{to_json, DecodeConfig, RefineConfig, RefineOverrides};
use crate::error::{exit, Result};

#[derive(Debug, Parser)]
#[command(name = "pmvir", version, about = "Polarimetric multi-view inverse rendering")]
pub struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// More log output; repeat for debug.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic polarimetric dataset.
    Synth {
        /// Scene description; the default sphere scene when omitted.
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        out_dir: PathBuf,
    },
    /// Demosaic raw polarization-sensor images into image sets.
    Decode {
        raw_dir: PathBuf,
        pattern: PathBuf,
        out_dir: PathBuf,
    },
    /// Refine an initial mesh.
    Refine(RefineArgs),
    /// Compare an estimate with ground truth.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct RefineArgs {
    pub config: PathBuf,
    /// Polarimetric weight for every stage (0 gives the photometric-only baseline).
    #[arg(long)]
    pub tau1: Option<f64>,
    /// Do not weight polarimetric samples by their DoP.
    #[arg(long)]
    pub no_dop_weight: bool,
    /// Compare against total intensity instead of the unpolarized component.
    #[arg(long = "use-int")]
    pub use_intensity: bool,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub images: Option<PathBuf>,
    #[arg(long)]
    pub cameras: Option<PathBuf>,
    #[arg(long)]
    pub initial_mesh: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

impl RefineArgs {
    pub fn overrides(&self) -> RefineOverrides {
        RefineOverrides {
            tau1: self.tau1,
            no_dop_weight: self.no_dop_weight,
            use_intensity: self.use_intensity,
            max_iterations: self.max_iterations,
            images: self.images.clone(),
            cameras: self.cameras.clone(),
            initial_mesh: self.initial_mesh.clone(),
            output_dir: self.output_dir.clone(),
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub estimate: PathBuf,
    pub ground_truth: PathBuf,
    /// Synthetic dataset directory for albedo (and illumination) RMSE.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Estimated illumination JSON.
    #[arg(long)]
    pub illumination: Option<PathBuf>,
    #[arg(long)]
    pub gt_illumination: Option<PathBuf>,
    /// Compare albedo without matching median luminance first.
    #[arg(long)]
    pub no_gauge: bool,
    /// Write the estimate with per-vertex accuracy as PLY quality.
    #[arg(long)]
    pub error_map: Option<PathBuf>,
    /// Report file; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth { scene, seed, out_dir } => {
            let mut s = commands::load_scene(scene.as_deref())?;
            if let Some(seed) = seed {
                s.seed = *seed;
            }
            commands::synth(&s, scene.as_deref(), out_dir)?;
        }
        Command::Decode {
            raw_dir,
            pattern,
            out_dir,
        } => {
            let cfg = DecodeConfig::load(pattern)?;
            commands::decode(raw_dir, &cfg, Some(pattern), out_dir)?;
        }
        Command::Refine(args) => {
            let mut cfg = RefineConfig::load(&args.config)?;
            cfg.apply(&args.overrides());
            commands::refine(&cfg, Some(&args.config))?;
        }
        Command::Eval(a) => {
            let report = commands::eval(&EvalOptions {
                estimate: a.estimate.clone(),
                ground_truth: a.ground_truth.clone(),
                dataset: a.dataset.clone(),
                illumination: a.illumination.clone(),
                gt_illumination: a.gt_illumination.clone(),
                fix_gauge: !a.no_gauge,
                error_map: a.error_map.clone(),
            })?;
            let text = to_json(&report);
            match &a.out {
                Some(p) => crate::dataset::write_text(p, &text)?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return exit::CONFIG;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already configured: {e}");
        }
    }
    match dispatch(cli) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
