//! File formats, pipeline orchestration, evaluation and benchmarking.

pub mod bench;
pub mod io;
pub mod metrics;
pub mod pipeline;

use thiserror::Error;

pub use bench::{bench, BenchReport, WARMUP_FRAMES};
pub use io::{
    read_estimates, read_frames, write_jsonl, CameraConfig, DetectionRecord, EgoRecord, EstimateRecord,
    FrameRecord, GtRecord,
};
pub use metrics::{
    evaluate, evaluate_scenes, match_gt, match_scene, write_bins_csv, write_bins_svg, DistanceBin, ErrorSummary,
    EvalConfig, MatchedPair, MetricsReport, SceneMatches,
};
pub use pipeline::{run_pipeline, FrameTiming, Pipeline};

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Malformed input; `line` is 1-based.
    #[error("line {line}: {message}")]
    Ingest { line: usize, message: String },
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
