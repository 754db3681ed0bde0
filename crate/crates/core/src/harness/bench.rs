use serde::{Deserialize, Serialize};

use super::io::FrameRecord;
use super::pipeline::Pipeline;
use super::HarnessError;
use crate::geometry::CameraModel;
use crate::position::RefineConfig;

/// Frames at the start of every repetition left out of the timings.
pub const WARMUP_FRAMES: usize = 10;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub reps: usize,
    /// Measured frames over all repetitions.
    pub frames: usize,
    /// Measured estimates over all repetitions.
    pub pedestrians: usize,
    pub association_ms_per_frame: f64,
    pub estimation_ms_per_pedestrian: f64,
    /// Mean estimation time of a whole frame.
    pub estimation_ms_per_frame: f64,
}

/// Times association and estimation over `reps` full passes of `frames`.
pub fn bench(
    frames: &[FrameRecord],
    camera: &CameraModel<f64>,
    cfg: &RefineConfig<f64>,
    reps: usize,
) -> Result<BenchReport, HarnessError> {
    let mut report = BenchReport {
        reps,
        ..BenchReport::default()
    };
    let (mut assoc_ms, mut est_ms) = (0.0, 0.0);
    for _ in 0..reps {
        let mut pipeline = Pipeline::new(camera.clone(), cfg.clone())?;
        for (i, frame) in frames.iter().enumerate() {
            let (_, timing) = pipeline.process(frame, i + 1)?;
            if i < WARMUP_FRAMES {
                continue;
            }
            report.frames += 1;
            report.pedestrians += timing.pedestrians;
            assoc_ms += timing.association.as_secs_f64() * 1e3;
            est_ms += timing.estimation.as_secs_f64() * 1e3;
        }
    }
    let per = |total: f64, n: usize| if n == 0 { 0.0 } else { total / n as f64 };
    report.association_ms_per_frame = per(assoc_ms, report.frames);
    report.estimation_ms_per_pedestrian = per(est_ms, report.pedestrians);
    report.estimation_ms_per_frame = per(est_ms, report.frames);
    Ok(report)
}
