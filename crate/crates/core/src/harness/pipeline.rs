use std::time::{Duration, Instant};

use log::debug;

use super::io::{vec3, EstimateRecord, FrameRecord};
use super::HarnessError;
use crate::geometry::CameraModel;
use crate::position::{estimate, PedestrianEstimate, RefineConfig};
use crate::skeleton::Skeleton2D;
use crate::tracker::{EgoPose, Tracker, TrackerConfig};

/// Wall-clock time spent in one frame.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FrameTiming {
    pub association: Duration,
    pub estimation: Duration,
    /// Estimates attempted (tracks updated this frame).
    pub pedestrians: usize,
}

/// Frame-by-frame driver: association followed by position estimation of
/// every track that received a detection.
#[derive(Debug, Clone)]
pub struct Pipeline {
    camera: CameraModel<f64>,
    cfg: RefineConfig<f64>,
    tracker: Tracker<f64>,
    prev_ego: Option<EgoPose<f64>>,
}

impl Pipeline {
    pub fn new(camera: CameraModel<f64>, cfg: RefineConfig<f64>) -> Result<Self, HarnessError> {
        cfg.validate().map_err(HarnessError::Config)?;
        Ok(Self {
            camera,
            cfg,
            tracker: Tracker::new(TrackerConfig::default()),
            prev_ego: None,
        })
    }

    pub fn tracker(&self) -> &Tracker<f64> {
        &self.tracker
    }

    /// Processes one frame. `line` is used for error reporting.
    pub fn process(
        &mut self,
        frame: &FrameRecord,
        line: usize,
    ) -> Result<(Vec<EstimateRecord>, FrameTiming), HarnessError> {
        let detections = frame
            .det
            .iter()
            .map(|d| d.to_skeleton())
            .collect::<Result<Vec<Skeleton2D<f64>>, _>>()
            .map_err(|message| HarnessError::Ingest { line, message })?;
        let ego = frame.ego.to_pose(frame.t);
        let prev = self.prev_ego.take().unwrap_or_else(|| ego.clone());

        let start = Instant::now();
        let report = self.tracker.associate(&detections, &prev, &ego, &self.camera);
        let association = start.elapsed();
        self.prev_ego = Some(ego);

        let mut out = Vec::new();
        let updated = report.updated();
        let start = Instant::now();
        for &id in &updated {
            let track = self.tracker.track_mut(id).expect("updated track exists");
            if track.history().len() < 2 {
                continue;
            }
            match estimate(track, &self.camera, &self.cfg) {
                Ok(est) => out.push(to_record(&est)),
                Err(e) => debug!("t={} track {id}: no estimate: {e}", frame.t),
            }
        }
        let estimation = start.elapsed();
        Ok((
            out,
            FrameTiming {
                association,
                estimation,
                pedestrians: updated.len(),
            },
        ))
    }
}

pub fn to_record(est: &PedestrianEstimate<f64>) -> EstimateRecord {
    EstimateRecord {
        t: est.timestamp,
        track_id: est.track_id,
        pos: vec3(&est.position_filtered),
        pos_initial: est.position_initial.as_ref().map(vec3),
        pos_refined: vec3(&est.position_refined),
        skeleton3d: est
            .skeleton3d
            .keypoints
            .iter()
            .zip(&est.skeleton3d.valid)
            .map(|(p, &ok)| ok.then(|| vec3(p)))
            .collect(),
        bbox: est.bbox.to_array(),
    }
}

/// Runs tracking and estimation over a whole sequence.
pub fn run_pipeline(
    frames: &[FrameRecord],
    camera: &CameraModel<f64>,
    cfg: &RefineConfig<f64>,
) -> Result<Vec<EstimateRecord>, HarnessError> {
    let mut pipeline = Pipeline::new(camera.clone(), cfg.clone())?;
    let mut out = Vec::new();
    for (i, frame) in frames.iter().enumerate() {
        out.extend(pipeline.process(frame, i + 1)?.0);
    }
    Ok(out)
}
