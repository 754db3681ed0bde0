use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use log::info;

use pedem_core::harness::{
    self, evaluate_scenes, match_scene, read_estimates, read_frames, run_pipeline, write_bins_csv, write_bins_svg,
    write_jsonl, CameraConfig, EvalConfig, HarnessError,
};
use pedem_core::position::Schedule;
use pedem_core::scenegen::{self, SceneConfig};
use pedem_core::RefineConfig64;

#[derive(Parser)]
#[command(name = "pedem", version, about = "Pedestrian tracking and monocular 3D position estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene as frame JSONL.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Track pedestrians and estimate their positions.
    Run {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        camera: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        estimator: EstimatorArgs,
    },
    /// Compare estimates with ground truth.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        /// Frame JSONL carrying ground truth.
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Distance bin width in metres.
        #[arg(long, default_value_t = 5.0)]
        bin_width: f64,
        /// Measure errors in the ground plane.
        #[arg(long)]
        planar: bool,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Time association and position estimation.
    Bench {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        camera: PathBuf,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[command(flatten)]
        estimator: EstimatorArgs,
    },
}

#[derive(Args)]
struct EstimatorArgs {
    /// Estimator settings as JSON; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    no_refine: bool,
    /// Initialize from the hip midpoint only.
    #[arg(long)]
    single_point: bool,
    #[arg(long)]
    schedule: Option<Schedule>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    scale_const: Option<f64>,
    #[arg(long)]
    drop_fraction: Option<f64>,
    /// Assumed person height in metres.
    #[arg(long)]
    height: Option<f64>,
}

/// An error together with the process exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

const INGEST: u8 = 1;
const CONFIG: u8 = 2;

trait ExitContext<T> {
    fn exit(self, code: u8) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> ExitContext<T> for Result<T, E> {
    fn exit(self, code: u8) -> Result<T, Failure> {
        self.map_err(|e| Failure { code, error: e.into() })
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        let code = match e {
            HarnessError::Config(_) => CONFIG,
            HarnessError::Ingest { .. } | HarnessError::Io(_) => INGEST,
        };
        Failure { code, error: e.into() }
    }
}

impl EstimatorArgs {
    fn build(&self) -> Result<RefineConfig64, Failure> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))
                    .exit(CONFIG)?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing {}", path.display()))
                    .exit(CONFIG)?
            }
            None => RefineConfig64::default(),
        };
        if self.no_refine {
            cfg.refinement_enabled = false;
        }
        if self.single_point {
            cfg.single_point_init = true;
        }
        if let Some(s) = self.schedule {
            cfg.schedule = s;
        }
        if let Some(s) = self.steps {
            cfg.steps = s;
        }
        if let Some(c) = self.scale_const {
            cfg.scale_const = c;
        }
        if let Some(d) = self.drop_fraction {
            cfg.drop_fraction = d;
        }
        if let Some(h) = self.height {
            cfg.person_height = h;
        }
        cfg.validate().map_err(|e| anyhow!("estimator config: {e}")).exit(CONFIG)?;
        Ok(cfg)
    }
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .with_context(|| format!("opening {}", path.display()))
        .exit(INGEST)
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .with_context(|| format!("creating {}", path.display()))
        .exit(INGEST)
}

fn load_camera(path: &Path) -> Result<pedem_core::CameraModel64, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .exit(CONFIG)?;
    Ok(CameraConfig::from_json(&text)?.to_camera()?)
}

fn load_frames(path: &Path) -> Result<Vec<harness::FrameRecord>, Failure> {
    read_frames(open(path)?).map_err(|e| Failure {
        code: INGEST,
        error: anyhow::Error::from(e).context(path.display().to_string()),
    })
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate { config, seed, out } => {
            let text = fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))
                .exit(CONFIG)?;
            let mut cfg: SceneConfig = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", config.display()))
                .exit(CONFIG)?;
            cfg.seed = seed;
            let frames = scenegen::generate(&cfg).exit(CONFIG)?;
            write_jsonl(create(&out)?, &frames)?;
            info!("wrote {} frames to {}", frames.len(), out.display());
        }
        Command::Run {
            input,
            camera,
            out,
            estimator,
        } => {
            let cfg = estimator.build()?;
            let camera = load_camera(&camera)?;
            let frames = load_frames(&input)?;
            let estimates = run_pipeline(&frames, &camera, &cfg)?;
            write_jsonl(create(&out)?, &estimates)?;
            info!("wrote {} estimates for {} frames to {}", estimates.len(), frames.len(), out.display());
        }
        Command::Eval {
            pred,
            gt,
            out,
            bin_width,
            planar,
            csv,
            svg,
        } => {
            if !(bin_width > 0.0 && bin_width.is_finite()) {
                return Err(anyhow!("--bin-width must be positive")).exit(CONFIG);
            }
            let estimates = read_estimates(open(&pred)?)?;
            let frames = load_frames(&gt)?;
            let scene = gt.file_stem().map_or("scene".into(), |s| s.to_string_lossy().into_owned());
            let matches = match_scene(&scene, &estimates, &frames);
            let report = evaluate_scenes(&[matches], &EvalConfig { bin_width, planar });
            let mut w = create(&out)?;
            serde_json::to_writer_pretty(&mut w, &report).exit(INGEST)?;
            writeln!(w).and_then(|_| w.flush()).exit(INGEST)?;
            if let Some(path) = csv {
                let mut w = create(&path)?;
                write_bins_csv(&mut w, &report.bins)?;
                w.flush().exit(INGEST)?;
            }
            if let Some(path) = svg {
                let mut w = create(&path)?;
                write_bins_svg(&mut w, &report.bins)?;
                w.flush().exit(INGEST)?;
            }
            info!(
                "{} matches: mean e_abs {:.3} m, mean e_rel {:.2} %",
                report.overall.count, report.overall.e_abs_mean, report.overall.e_rel_mean
            );
        }
        Command::Bench {
            input,
            camera,
            reps,
            estimator,
        } => {
            if reps < 5 {
                return Err(anyhow!("--reps must be at least 5")).exit(CONFIG);
            }
            let cfg = estimator.build()?;
            let camera = load_camera(&camera)?;
            let frames = load_frames(&input)?;
            let report = harness::bench(&frames, &camera, &cfg, reps)?;
            println!("{}", serde_json::to_string_pretty(&report).exit(INGEST)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PEDEM_LOG", "error")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code)
        }
    }
}
