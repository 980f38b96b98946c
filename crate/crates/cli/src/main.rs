//! `carrierseg`: grayscale image segmentation by simulated charge relaxation.
//!
//! Subcommands: `gen` draws a synthetic test image; `segment` runs the full
//! pipeline (simulate, classify signs, group regions, optionally merge) into
//! an output directory; `trace` runs the simulation and keeps only the
//! convergence trace. Runs with identical arguments write bit-identical
//! files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use carrierseg_core::{
    group_regions, make_test_image, merge_to_target, read_pgm, render_label_map, render_sign_map,
    sign_map, simulate, write_labels16, write_pgm8, GrayImage, Partition, SimParams, TestImageKind,
};

/// Rejected arguments, malformed images, unstable parameters.
const EXIT_BAD_INPUT: u8 = 2;
/// The simulation hit the iteration cap; outputs are still written.
const EXIT_NO_CONVERGENCE: u8 = 3;
/// Filesystem trouble reading input or writing artifacts.
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(
    name = "carrierseg",
    version,
    about = "Segment grayscale images by simulating charge relaxation on the pixel grid"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic test image as an 8-bit PGM.
    Gen {
        /// Test pattern to draw.
        kind: KindArg,
        width: usize,
        height: usize,
        /// Output PGM path.
        out: PathBuf,
    },
    /// Run the full pipeline and write every artifact into a directory.
    Segment(RunArgs),
    /// Run the simulation and write only the convergence trace.
    Trace(RunArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KindArg {
    #[value(name = "TwoHalves")]
    TwoHalves,
    #[value(name = "Rectangle")]
    Rectangle,
    #[value(name = "ThreeShapes")]
    ThreeShapes,
}

impl From<KindArg> for TestImageKind {
    fn from(kind: KindArg) -> Self {
        match kind {
            KindArg::TwoHalves => TestImageKind::TwoHalves,
            KindArg::Rectangle => TestImageKind::Rectangle,
            KindArg::ThreeShapes => TestImageKind::ThreeShapes,
        }
    }
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("source").required(true)))]
struct RunArgs {
    /// 8-bit PGM image to process.
    #[arg(long, value_name = "PATH", group = "source")]
    input: Option<PathBuf>,

    /// Generate the input instead of reading one: a test-image kind and a
    /// size, e.g. `--gen TwoHalves 64x64`.
    #[arg(long, num_args = 2, value_names = ["KIND", "WxH"], group = "source")]
    gen: Option<Vec<String>>,

    /// Directory for output artifacts; created if missing.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,

    /// Drift gain on intensity differences.
    #[arg(long, value_name = "R", default_value_t = SimParams::default().k1)]
    k1: f64,

    /// Diffusion gain on net-carrier differences; must stay below 0.25.
    #[arg(long, value_name = "R", default_value_t = SimParams::default().k2)]
    k2: f64,

    /// Convergence threshold on the mean absolute per-pixel change.
    #[arg(long, value_name = "R", default_value_t = SimParams::default().epsilon)]
    epsilon: f64,

    /// Iteration cap when the threshold is not reached.
    #[arg(long, value_name = "N", default_value_t = SimParams::default().max_iters)]
    max_iters: u64,

    /// Half-width of the net-carrier band classified as zero sign.
    #[arg(long, value_name = "R", default_value_t = SimParams::default().zero_tol)]
    zero_tol: f64,

    /// Iterations at which to snapshot the sign map, strictly ascending.
    #[arg(long, value_name = "N1,N2,...", value_delimiter = ',')]
    snapshots: Vec<u64>,

    /// Merge regions until at most this many remain; skipped when absent.
    #[arg(long, value_name = "N")]
    target_regions: Option<usize>,
}

enum CliError {
    /// Exit 2: the request itself is unusable.
    Config(String),
    /// Exit 4: the request failed against the filesystem.
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_BAD_INPUT,
            CliError::Io(_) => EXIT_IO,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Io(m) => m,
        }
    }
}

impl From<carrierseg_core::Error> for CliError {
    fn from(err: carrierseg_core::Error) -> Self {
        CliError::Config(err.to_string())
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Gen {
            kind,
            width,
            height,
            out,
        } => cmd_gen(kind.into(), width, height, &out),
        Command::Segment(args) => cmd_run(args, true),
        Command::Trace(args) => cmd_run(args, false),
    }
}

fn cmd_gen(
    kind: TestImageKind,
    width: usize,
    height: usize,
    out: &Path,
) -> Result<ExitCode, CliError> {
    let img = make_test_image(kind, width, height)?;
    write_file(out, &write_pgm8(&img))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_run(args: RunArgs, full_pipeline: bool) -> Result<ExitCode, CliError> {
    let (img, source) = load_input(&args)?;
    let params = SimParams {
        k1: args.k1,
        k2: args.k2,
        epsilon: args.epsilon,
        max_iters: args.max_iters,
        snapshot_iters: args.snapshots.clone(),
        zero_tol: args.zero_tol,
    };
    params.validate()?;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Io(format!("creating {}: {e}", args.out.display())))?;

    let result = simulate(&img, &params)?;

    let mut manifest = Manifest::default();
    manifest.push("command", if full_pipeline { "segment" } else { "trace" });
    manifest.push("input", &source);
    manifest.push("width", img.width());
    manifest.push("height", img.height());
    manifest.push("k1", params.k1);
    manifest.push("k2", params.k2);
    manifest.push("epsilon", params.epsilon);
    manifest.push("max_iters", params.max_iters);
    manifest.push("zero_tol", params.zero_tol);
    manifest.push("snapshots", join_iters(&params.snapshot_iters));
    match args.target_regions {
        Some(target) => manifest.push("target_regions", target),
        None => manifest.push("target_regions", "none"),
    }
    manifest.push("iterations", result.iterations);
    manifest.push("converged", result.converged);

    let out = &args.out;
    write_file(&out.join("trace.csv"), result.trace.to_csv().as_bytes())?;

    if full_pipeline {
        let signs = sign_map(&result.grid, params.zero_tol);
        write_file(&out.join("sign_final.pgm"), &write_pgm8(&render_sign_map(&signs)))?;
        for (iteration, snapshot) in &result.snapshots {
            write_file(
                &out.join(format!("sign_iter_{iteration}.pgm")),
                &write_pgm8(&render_sign_map(snapshot)),
            )?;
        }

        let partition = group_regions(&signs, &img)?;
        write_partition(out, &partition, "labels.pgm", "labels_view.pgm", "regions.csv")?;
        println!("regions: {}", partition.region_count());
        manifest.push("regions", partition.region_count());

        if let Some(target) = args.target_regions {
            let merged = merge_to_target(&partition, target);
            write_partition(
                out,
                &merged,
                "merged_labels.pgm",
                "merged_view.pgm",
                "merged_regions.csv",
            )?;
            println!("merged regions: {}", merged.region_count());
            manifest.push("merged_regions", merged.region_count());
        }
    }

    write_file(&out.join("manifest"), manifest.0.as_bytes())?;

    if result.converged {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!(
            "warning: stopped after {} iterations without reaching epsilon = {}",
            result.iterations, params.epsilon
        );
        Ok(ExitCode::from(EXIT_NO_CONVERGENCE))
    }
}

fn load_input(args: &RunArgs) -> Result<(GrayImage, String), CliError> {
    if let Some(path) = &args.input {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
        let img = read_pgm(&bytes)?;
        Ok((img, format!("file:{}", path.display())))
    } else {
        let spec = args.gen.as_ref().expect("clap enforces the source group");
        let (kind, width, height) = parse_gen_spec(spec)?;
        let img = make_test_image(kind, width, height)?;
        Ok((img, format!("gen:{}:{width}x{height}", kind.name())))
    }
}

fn parse_gen_spec(spec: &[String]) -> Result<(TestImageKind, usize, usize), CliError> {
    let kind = KindArg::from_str(&spec[0], false).map_err(|_| {
        CliError::Config(format!(
            "unknown test-image kind `{}` (expected TwoHalves, Rectangle, or ThreeShapes)",
            spec[0]
        ))
    })?;
    let size_err = || {
        CliError::Config(format!(
            "size `{}` must look like 64x64 (width, `x`, height)",
            spec[1]
        ))
    };
    let (w, h) = spec[1].split_once('x').ok_or_else(size_err)?;
    let width: usize = w.parse().map_err(|_| size_err())?;
    let height: usize = h.parse().map_err(|_| size_err())?;
    Ok((kind.into(), width, height))
}

fn write_partition(
    dir: &Path,
    partition: &Partition,
    labels_name: &str,
    view_name: &str,
    csv_name: &str,
) -> Result<(), CliError> {
    write_file(&dir.join(labels_name), &write_labels16(partition.label_map())?)?;
    write_file(
        &dir.join(view_name),
        &write_pgm8(&render_label_map(partition.label_map())),
    )?;
    write_file(&dir.join(csv_name), partition.regions_csv().as_bytes())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes)
        .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))
}

fn join_iters(values: &[u64]) -> String {
    let mut out = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{v}");
    }
    out
}

#[derive(Default)]
struct Manifest(String);

impl Manifest {
    fn push(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.0, "{key}={value}");
    }
}
