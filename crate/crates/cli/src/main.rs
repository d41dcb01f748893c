//! voxelforge: batch CLI for volumetric morphology, CT auto-labeling, 3D
//! augmentation and segmentation-loss evaluation.
//!
//! Exit codes: 0 success, 1 verification-suite failure, 2 bad usage,
//! 3 I/O or file-format error, 4 algorithm error (e.g. NoCandidate).
//! Every randomized subcommand takes `--seed` and is bit-reproducible.

mod bench;
mod commands;

use clap::{Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use voxelforge_core::Error;

#[derive(Parser)]
#[command(
    name = "voxelforge",
    version,
    about = "Volumetric image processing: FFT morphology, CT organ labeling, 3D augmentation, IOU-family losses"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Organ {
    Lungs,
    Bones,
}

#[derive(Clone, Copy, ValueEnum)]
enum MorphOp {
    Dilate,
    Erode,
    Open,
    Close,
}

#[derive(Clone, Copy, ValueEnum)]
enum LossKindArg {
    Iou,
    Dice,
    IouPow,
    Wce,
}

#[derive(Clone, Copy, ValueEnum)]
enum WceModeArg {
    ClassFrequency,
    InverseFrequency,
}

#[derive(Clone, Copy, ValueEnum)]
enum InterpArg {
    Trilinear,
    Nearest,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Vgrid,
    Nifti,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Metric,
    Penalty,
    Gradcheck,
    Restriction,
}

#[derive(Subcommand)]
enum Command {
    /// Unsupervised organ labeling on a CT volume in HU.
    Label {
        #[arg(long, value_enum)]
        organ: Organ,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Lungs: keep voxels at or below this HU value.
        #[arg(long = "air-max", default_value_t = -150.0)]
        air_max: f32,
        /// Lungs: erosion ball diameter in mm.
        #[arg(long = "erode-mm", default_value_t = 10.0)]
        erode_mm: f64,
        /// Lungs: number of pockets to keep.
        #[arg(long = "n-lungs", default_value_t = 2)]
        n_lungs: usize,
        /// Bones: retention threshold in HU.
        #[arg(long, default_value_t = 0.0)]
        tau1: f32,
        /// Bones: hard-exterior threshold in HU.
        #[arg(long, default_value_t = 200.0)]
        tau2: f32,
        /// Bones: closing ball diameter in mm.
        #[arg(long = "close-mm", default_value_t = 25.0)]
        close_mm: f64,
        /// Bones: skeleton-selection connectivity (6 or 26).
        #[arg(long, default_value_t = 26)]
        connectivity: u8,
    },

    /// Augment image/label pairs through the FIFO batch pipeline.
    Augment {
        /// Text file listing input image .vgrid.json paths, one per line.
        #[arg(long = "in")]
        inputs: PathBuf,
        /// Text file listing label .vgrid.json paths, one per line.
        #[arg(long)]
        labels: PathBuf,
        /// AugmentSpec JSON.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long = "out-dir")]
        out_dir: PathBuf,
        /// Master seed; overrides the seed in the spec file when given.
        #[arg(long)]
        seed: Option<u64>,
        /// Items per pipeline batch.
        #[arg(long, default_value_t = 32)]
        batch: usize,
        /// FIFO depth (1 = no overlap).
        #[arg(long, default_value_t = 4)]
        depth: usize,
        /// Zero labels inside the occlusion prism.
        #[arg(long = "occlude-labels", default_value_t = false)]
        occlude_labels: bool,
    },

    /// Resample a volume to an isotropic resolution.
    Resample {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Target resolution in mm.
        #[arg(long = "res-mm", default_value_t = 3.0)]
        res_mm: f64,
        #[arg(long, value_enum, default_value_t = InterpArg::Trilinear)]
        interp: InterpArg,
        #[arg(long, value_enum, default_value_t = FormatArg::Vgrid)]
        format: FormatArg,
    },

    /// Binary morphology on a mask volume with a spherical element.
    Morph {
        #[arg(long, value_enum)]
        op: MorphOp,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Ball diameter in mm.
        #[arg(long = "ball-mm")]
        ball_mm: f64,
    },

    /// Evaluate a segmentation loss between prediction and truth volumes.
    Loss {
        #[arg(long, value_enum)]
        kind: LossKindArg,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Exponent for --kind iou-pow.
        #[arg(long, default_value_t = 2.0)]
        power: f64,
        /// Weight mode for --kind wce.
        #[arg(long = "wce-mode", value_enum, default_value_t = WceModeArg::ClassFrequency)]
        wce_mode: WceModeArg,
        /// Write the analytic gradient as a float32 volume.
        #[arg(long)]
        grad: Option<PathBuf>,
    },

    /// Run a property-verification suite and emit a JSON report.
    Verify {
        #[arg(long, value_enum)]
        suite: SuiteArg,
        #[arg(long, default_value_t = 404)]
        seed: u64,
    },

    /// Generate a synthetic CT phantom with ground-truth masks.
    Phantom {
        /// Output prefix; writes PREFIX_ct, PREFIX_lungs and PREFIX_bones.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Override the phantom noise sigma (HU).
        #[arg(long)]
        sigma: Option<f64>,
    },

    /// Benchmark the augmentation pipeline on synthetic volumes.
    Bench {
        /// Comma-separated batch sizes.
        #[arg(
            long = "batch-sizes",
            default_value = "1,4,16,32",
            value_delimiter = ','
        )]
        batch_sizes: Vec<usize>,
        /// Timing repetitions per configuration (at least 5).
        #[arg(long, default_value_t = 5)]
        repetitions: usize,
        /// Pipelined FIFO depth compared against depth 1.
        #[arg(long, default_value_t = 2)]
        depth: usize,
        /// Synthetic volume dimensions.
        #[arg(long, default_value = "120,120,160", value_delimiter = ',')]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Io { .. }
        | Error::MalformedHeader { .. }
        | Error::UnsupportedDtype(_)
        | Error::SizeMismatch { .. } => 3,
        Error::PipelineItem { source, .. } => exit_code_for(source),
        _ => 4,
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Label {
            organ,
            input,
            out,
            air_max,
            erode_mm,
            n_lungs,
            tau1,
            tau2,
            close_mm,
            connectivity,
        } => commands::label(
            organ,
            &input,
            &out,
            air_max,
            erode_mm,
            n_lungs,
            tau1,
            tau2,
            close_mm,
            connectivity,
        ),
        Command::Augment {
            inputs,
            labels,
            spec,
            out_dir,
            seed,
            batch,
            depth,
            occlude_labels,
        } => commands::augment(
            &inputs,
            &labels,
            &spec,
            &out_dir,
            seed,
            batch,
            depth,
            occlude_labels,
        ),
        Command::Resample {
            input,
            out,
            res_mm,
            interp,
            format,
        } => commands::resample(&input, &out, res_mm, interp, format),
        Command::Morph {
            op,
            input,
            out,
            ball_mm,
        } => commands::morph(op, &input, &out, ball_mm),
        Command::Loss {
            kind,
            pred,
            truth,
            power,
            wce_mode,
            grad,
        } => commands::loss(kind, &pred, &truth, power, wce_mode, grad.as_deref()),
        Command::Verify { suite, seed } => commands::verify(suite, seed),
        Command::Phantom { out, seed, sigma } => commands::phantom(&out, seed, sigma),
        Command::Bench {
            batch_sizes,
            repetitions,
            depth,
            dims,
            seed,
        } => bench::run(&batch_sizes, repetitions, depth, &dims, seed),
    };

    match outcome {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(exit_code_for(&err));
        }
    }
}
