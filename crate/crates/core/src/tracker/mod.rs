//! Image-plane pedestrian tracking.
//!
//! Each frame the stored track boxes are shifted by the linear yaw
//! compensation, detections that overlap no track open new tracks, tracks
//! that overlap no detection record a miss, and the remaining pairs are
//! matched by minimum total negative GIoU.

mod ego;
mod giou;
mod hungarian;

use std::collections::VecDeque;

use nalgebra::DMatrix;

pub use ego::{compensate_yaw, delta_yaw, EgoPose};
pub use giou::giou;
pub use hungarian::{hungarian, Assignment, AssignmentError};

use crate::geometry::CameraModel;
use crate::position::{KalmanCV, PedestrianEstimate};
use crate::scalar::Real;
use crate::skeleton::{BBox, Skeleton2D};

/// One detection as it was observed, in the image of its own frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation<T: Real> {
    pub skeleton: Skeleton2D<T>,
    pub bbox: BBox<T>,
    pub ego: EgoPose<T>,
}

impl<T: Real> Observation<T> {
    pub fn new(skeleton: Skeleton2D<T>, ego: EgoPose<T>) -> Self {
        let bbox = skeleton.bbox();
        Self {
            skeleton,
            bbox,
            ego,
        }
    }

    pub fn timestamp(&self) -> T {
        self.ego.timestamp
    }
}

#[derive(Debug, Clone)]
pub struct Track<T: Real> {
    id: u64,
    history: VecDeque<Observation<T>>,
    // last skeleton/box carried into the current image by yaw compensation
    compensated: Skeleton2D<T>,
    compensated_bbox: BBox<T>,
    miss_count: u32,
    pub(crate) kalman: Option<KalmanCV<T>>,
    estimates: VecDeque<PedestrianEstimate<T>>,
    history_len: usize,
}

impl<T: Real> Track<T> {
    fn new(id: u64, obs: Observation<T>, history_len: usize) -> Self {
        let mut history = VecDeque::with_capacity(history_len.min(64));
        let compensated = obs.skeleton.clone();
        let compensated_bbox = obs.bbox;
        history.push_back(obs);
        Self {
            id,
            history,
            compensated,
            compensated_bbox,
            miss_count: 0,
            kalman: None,
            estimates: VecDeque::new(),
            history_len: history_len.max(2),
        }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn miss_count(&self) -> u32 {
        self.miss_count
    }

    /// Raw observations, oldest first. Bounded to the tracker's history length.
    pub fn history(&self) -> &VecDeque<Observation<T>> {
        &self.history
    }

    pub fn last_observation(&self) -> &Observation<T> {
        self.history.back().expect("tracks are created with one observation")
    }

    /// Last skeleton after yaw compensation into the most recent frame.
    pub fn compensated_skeleton(&self) -> &Skeleton2D<T> {
        &self.compensated
    }

    pub fn compensated_bbox(&self) -> &BBox<T> {
        &self.compensated_bbox
    }

    pub fn kalman(&self) -> Option<&KalmanCV<T>> {
        self.kalman.as_ref()
    }

    pub fn estimates(&self) -> &VecDeque<PedestrianEstimate<T>> {
        &self.estimates
    }

    pub(crate) fn push_estimate(&mut self, estimate: PedestrianEstimate<T>) {
        if self.estimates.len() == self.history_len {
            self.estimates.pop_front();
        }
        self.estimates.push_back(estimate);
    }

    fn compensate(&mut self, du: T) {
        self.compensated = self.compensated.shift_u(-du);
        self.compensated_bbox = self.compensated_bbox.shift_u(-du);
    }

    fn assign(&mut self, obs: Observation<T>) {
        self.compensated = obs.skeleton.clone();
        self.compensated_bbox = obs.bbox;
        if self.history.len() == self.history_len {
            self.history.pop_front();
        }
        self.history.push_back(obs);
        self.miss_count = 0;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerConfig {
    /// A track is dropped when this many consecutive associations fail.
    pub max_misses: u32,
    /// Observations and estimates retained per track.
    pub history_len: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            max_misses: 3,
            history_len: 32,
        }
    }
}

/// What one association step did, in terms of detection indices and track ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AssociationReport {
    pub assigned: Vec<(usize, u64)>,
    pub created: Vec<(usize, u64)>,
    pub missed: Vec<u64>,
    pub removed: Vec<u64>,
}

impl AssociationReport {
    /// Track id per detection index.
    pub fn track_of(&self, detection: usize) -> Option<u64> {
        self.assigned
            .iter()
            .chain(self.created.iter())
            .find(|(d, _)| *d == detection)
            .map(|(_, id)| *id)
    }

    /// Ids of all tracks that received a detection this step.
    pub fn updated(&self) -> Vec<u64> {
        let mut ids: Vec<u64> = self
            .assigned
            .iter()
            .chain(self.created.iter())
            .map(|(_, id)| *id)
            .collect();
        ids.sort_unstable();
        ids
    }
}

/// Track store for one scene. Single writer; ids are never reused.
#[derive(Debug, Clone)]
pub struct Tracker<T: Real> {
    tracks: Vec<Track<T>>,
    next_id: u64,
    config: TrackerConfig,
}

impl<T: Real> Default for Tracker<T> {
    fn default() -> Self {
        Self::new(TrackerConfig::default())
    }
}

impl<T: Real> Tracker<T> {
    pub fn new(config: TrackerConfig) -> Self {
        Self {
            tracks: Vec::new(),
            next_id: 0,
            config,
        }
    }

    pub fn tracks(&self) -> &[Track<T>] {
        &self.tracks
    }

    pub fn track(&self, id: u64) -> Option<&Track<T>> {
        self.tracks.iter().find(|t| t.id == id)
    }

    pub fn track_mut(&mut self, id: u64) -> Option<&mut Track<T>> {
        self.tracks.iter_mut().find(|t| t.id == id)
    }

    /// Associates the detections of the frame at `ego_curr` with the tracks
    /// from the frame at `ego_prev`.
    pub fn associate(
        &mut self,
        detections: &[Skeleton2D<T>],
        ego_prev: &EgoPose<T>,
        ego_curr: &EgoPose<T>,
        camera: &CameraModel<T>,
    ) -> AssociationReport {
        let du = ego::yaw_shift(delta_yaw(ego_prev, ego_curr), camera.aperture(), camera.width());
        for track in &mut self.tracks {
            track.compensate(du);
        }

        let boxes: Vec<BBox<T>> = detections.iter().map(Skeleton2D::bbox).collect();
        let overlaps = |d: &BBox<T>, t: &Track<T>| d.intersection_area(&t.compensated_bbox) > T::zero();

        let gated_dets: Vec<usize> = (0..detections.len())
            .filter(|&j| self.tracks.iter().any(|t| overlaps(&boxes[j], t)))
            .collect();
        let gated_tracks: Vec<usize> = (0..self.tracks.len())
            .filter(|&k| boxes.iter().any(|b| overlaps(b, &self.tracks[k])))
            .collect();

        let mut det_to_track: Vec<Option<usize>> = vec![None; detections.len()];
        if !gated_dets.is_empty() && !gated_tracks.is_empty() {
            // Padding rows or columns with a constant does not change which
            // real pairs are optimal.
            let n = gated_dets.len().max(gated_tracks.len());
            let mut cost = DMatrix::<T>::zeros(n, n);
            for (r, &j) in gated_dets.iter().enumerate() {
                for (c, &k) in gated_tracks.iter().enumerate() {
                    cost[(r, c)] = -giou(&boxes[j], &self.tracks[k].compensated_bbox);
                }
            }
            let assignment = hungarian(&cost).expect("square finite cost matrix");
            for (r, &c) in assignment.row_to_col.iter().enumerate() {
                if r < gated_dets.len() && c < gated_tracks.len() {
                    det_to_track[gated_dets[r]] = Some(gated_tracks[c]);
                }
            }
        }

        let mut report = AssociationReport::default();
        let mut hit = vec![false; self.tracks.len()];
        for (j, slot) in det_to_track.iter().enumerate() {
            if let Some(k) = *slot {
                hit[k] = true;
                let track = &mut self.tracks[k];
                track.assign(Observation {
                    skeleton: detections[j].clone(),
                    bbox: boxes[j],
                    ego: ego_curr.clone(),
                });
                report.assigned.push((j, track.id));
            }
        }
        for (k, track) in self.tracks.iter_mut().enumerate() {
            if !hit[k] {
                track.miss_count += 1;
                report.missed.push(track.id);
            }
        }
        let max_misses = self.config.max_misses;
        self.tracks.retain(|t| {
            if t.miss_count >= max_misses {
                report.removed.push(t.id);
                false
            } else {
                true
            }
        });
        for (j, slot) in det_to_track.iter().enumerate() {
            if slot.is_none() {
                let id = self.next_id;
                self.next_id += 1;
                let obs = Observation {
                    skeleton: detections[j].clone(),
                    bbox: boxes[j],
                    ego: ego_curr.clone(),
                };
                self.tracks.push(Track::new(id, obs, self.config.history_len));
                report.created.push((j, id));
            }
        }
        report
    }
}
