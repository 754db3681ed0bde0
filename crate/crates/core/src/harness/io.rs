//! JSON Lines schemas for frames and estimates, and the camera config file.

use std::io::{BufRead, Write};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::geometry::CameraModel;
use crate::skeleton::{Skeleton2D, NUM_KEYPOINTS};
use crate::tracker::EgoPose;

/// One input frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    /// Timestamp in seconds.
    pub t: f64,
    pub ego: EgoRecord,
    #[serde(default)]
    pub det: Vec<DetectionRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt: Option<Vec<GtRecord>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgoRecord {
    /// Camera origin in world coordinates, metres.
    pub o: [f64; 3],
    /// Heading in radians, clockwise seen from above, zero along world +y.
    pub yaw: f64,
    /// Optional camera-to-world rotation, row-major.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rot: Option<[f64; 9]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    /// 17 `[u, v]` pixels in COCO order.
    pub kp: Vec<[f64; 2]>,
    /// 17 detection probabilities.
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtRecord {
    pub id: u64,
    /// World position, metres.
    pub pos: [f64; 3],
    /// `[u_min, v_min, u_max, v_max]` in pixels.
    pub bbox: [f64; 4],
    pub occ: bool,
}

/// One output estimate per (frame, track).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub t: f64,
    pub track_id: u64,
    /// Filtered position.
    pub pos: [f64; 3],
    pub pos_initial: Option<[f64; 3]>,
    pub pos_refined: [f64; 3],
    /// 17 entries, `null` where triangulation failed.
    pub skeleton3d: Vec<Option<[f64; 3]>>,
    pub bbox: [f64; 4],
}

impl EgoRecord {
    pub fn to_pose(&self, t: f64) -> EgoPose<f64> {
        let mut pose = EgoPose::new(t, Vector3::from(self.o), self.yaw);
        pose.rotation = self.rot.map(|r| Matrix3::from_row_slice(&r));
        pose
    }

    pub fn from_pose(pose: &EgoPose<f64>) -> Self {
        Self {
            o: pose.origin.into(),
            yaw: pose.yaw,
            rot: pose.rotation.map(|r| {
                let t = r.transpose();
                let mut out = [0.0; 9];
                out.copy_from_slice(t.as_slice());
                out
            }),
        }
    }
}

impl DetectionRecord {
    pub fn to_skeleton(&self) -> Result<Skeleton2D<f64>, String> {
        Skeleton2D::from_slices(&self.kp, &self.p).map_err(|e| e.to_string())
    }

    pub fn from_skeleton(s: &Skeleton2D<f64>) -> Self {
        Self {
            kp: s.keypoints().iter().map(|k| [k.x, k.y]).collect(),
            p: s.probs().to_vec(),
        }
    }
}

impl FrameRecord {
    fn validate(&self) -> Result<(), String> {
        if !self.t.is_finite() {
            return Err("timestamp is not finite".into());
        }
        if !self.ego.o.iter().all(|x| x.is_finite()) || !self.ego.yaw.is_finite() {
            return Err("ego pose is not finite".into());
        }
        if let Some(r) = &self.ego.rot {
            let m = Matrix3::from_row_slice(r);
            let ortho = (m.transpose() * m - Matrix3::identity()).norm();
            if !(ortho < 1e-6 && m.determinant() > 0.0) {
                return Err("ego rotation is not a proper rotation".into());
            }
        }
        for (i, d) in self.det.iter().enumerate() {
            if d.kp.len() != NUM_KEYPOINTS || d.p.len() != NUM_KEYPOINTS {
                return Err(format!(
                    "detection {i}: expected {NUM_KEYPOINTS} keypoints and probabilities"
                ));
            }
            d.to_skeleton().map_err(|e| format!("detection {i}: {e}"))?;
        }
        if let Some(gt) = &self.gt {
            for g in gt {
                let [u0, v0, u1, v1] = g.bbox;
                if !(u0 <= u1 && v0 <= v1) {
                    return Err(format!("gt {}: bbox corners out of order", g.id));
                }
            }
        }
        Ok(())
    }
}

/// Reads JSON Lines, skipping blank lines. Errors carry 1-based line numbers.
pub fn read_jsonl<T, R>(reader: R) -> Result<Vec<(usize, T)>, HarnessError>
where
    T: for<'de> Deserialize<'de>,
    R: BufRead,
{
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| HarnessError::Ingest {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| HarnessError::Ingest {
            line: line_no,
            message: e.to_string(),
        })?;
        out.push((line_no, value));
    }
    Ok(out)
}

/// Reads and validates a frame file; timestamps must strictly increase.
pub fn read_frames<R: BufRead>(reader: R) -> Result<Vec<FrameRecord>, HarnessError> {
    let mut last_t = f64::NEG_INFINITY;
    let mut frames = Vec::new();
    for (line, frame) in read_jsonl::<FrameRecord, _>(reader)? {
        frame
            .validate()
            .map_err(|message| HarnessError::Ingest { line, message })?;
        if !(frame.t > last_t) {
            return Err(HarnessError::Ingest {
                line,
                message: format!("timestamp {} does not increase", frame.t),
            });
        }
        last_t = frame.t;
        frames.push(frame);
    }
    Ok(frames)
}

pub fn read_estimates<R: BufRead>(reader: R) -> Result<Vec<EstimateRecord>, HarnessError> {
    let mut out = Vec::new();
    for (line, est) in read_jsonl::<EstimateRecord, _>(reader)? {
        if est.skeleton3d.len() != NUM_KEYPOINTS {
            return Err(HarnessError::Ingest {
                line,
                message: format!("skeleton3d needs {NUM_KEYPOINTS} entries"),
            });
        }
        out.push(est);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize, W: Write>(mut writer: W, records: &[T]) -> Result<(), HarnessError> {
    for r in records {
        serde_json::to_writer(&mut writer, r).map_err(std::io::Error::from)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

/// Camera config file: either an aperture description or a calibration
/// matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraConfig {
    pub width: f64,
    pub height: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aperture_deg: Option<f64>,
    /// Calibration matrix (camera direction to homogeneous pixel), row-major.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intrinsic: Option<[f64; 9]>,
}

impl CameraConfig {
    /// 1600 x 900 pixels, 64.5 degree horizontal aperture.
    pub fn default_sensor() -> Self {
        Self {
            width: 1600.0,
            height: 900.0,
            aperture_deg: Some(64.5),
            intrinsic: None,
        }
    }

    pub fn to_camera(&self) -> Result<CameraModel<f64>, HarnessError> {
        let cam = match (self.aperture_deg, &self.intrinsic) {
            (Some(_), Some(_)) => {
                return Err(HarnessError::Config(
                    "camera: give either aperture_deg or intrinsic, not both".into(),
                ))
            }
            (Some(deg), None) => CameraModel::from_aperture(self.width, self.height, deg.to_radians()),
            (None, Some(k)) => CameraModel::from_calibration(Matrix3::from_row_slice(k), self.width, self.height),
            (None, None) => {
                return Err(HarnessError::Config(
                    "camera: aperture_deg or intrinsic is required".into(),
                ))
            }
        };
        cam.map_err(|e| HarnessError::Config(format!("camera: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(format!("camera: {e}")))
    }
}

pub(crate) fn vec3(v: &Vector3<f64>) -> [f64; 3] {
    [v.x, v.y, v.z]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    const FRAME: &str = r#"{"t":0.1,"ego":{"o":[0,0,1.5],"yaw":0.2},"det":[{"kp":[[1,2],[1,2],[1,2],[1,2],[1,2],[1,2],[1,2],[1,2],[1,2],[1,2],[1,2],[1,2],[1,2],[1,2],[1,2],[1,2],[3,9]],"p":[0.9,0.9,0.9,0.9,0.9,0.9,0.9,0.9,0.9,0.9,0.9,0.9,0.9,0.9,0.9,0.9,0.9]}],"gt":[{"id":4,"pos":[1,20,0.9],"bbox":[1,2,3,9],"occ":false}]}"#;

    #[test]
    fn reads_frame_schema() {
        let frames = read_frames(Cursor::new(format!("{FRAME}\n\n"))).unwrap();
        assert_eq!(frames.len(), 1);
        let f = &frames[0];
        assert_eq!(f.ego.yaw, 0.2);
        let s = f.det[0].to_skeleton().unwrap();
        assert_eq!(s.bbox().to_array(), [1.0, 2.0, 3.0, 9.0]);
        assert_eq!(f.gt.as_ref().unwrap()[0].id, 4);
    }

    #[test]
    fn round_trip_is_field_for_field() {
        let frames = read_frames(Cursor::new(FRAME)).unwrap();
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &frames).unwrap();
        let again = read_frames(Cursor::new(buf)).unwrap();
        assert_eq!(frames, again);
    }

    #[test]
    fn schema_errors_report_line() {
        let bad_len = FRAME.replace("[3,9]],", "],").replace(",[1,2]]", "]]");
        let text = format!("{FRAME}\n{bad_len}\n");
        match read_frames(Cursor::new(text)) {
            Err(HarnessError::Ingest { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let text = format!("{FRAME}\n{FRAME}\n");
        match read_frames(Cursor::new(text)) {
            Err(HarnessError::Ingest { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("increase"));
            }
            other => panic!("unexpected {other:?}"),
        }
        match read_frames(Cursor::new("{not json")) {
            Err(HarnessError::Ingest { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ego_rotation_round_trip() {
        let r = crate::geometry::yaw_rotation(0.4);
        let mut pose = EgoPose::new(1.0, Vector3::new(1.0, 2.0, 1.5), 0.4);
        pose.rotation = Some(r);
        let rec = EgoRecord::from_pose(&pose);
        assert_eq!(rec.to_pose(1.0), pose);
    }

    #[test]
    fn camera_config_variants() {
        let cam = CameraConfig::from_json(r#"{"width":1600,"height":900,"aperture_deg":64.5}"#)
            .unwrap()
            .to_camera()
            .unwrap();
        assert!((cam.focal_length() - 800.0 / 32.25f64.to_radians().tan()).abs() < 1e-9);
        let k = CameraConfig::from_json(
            r#"{"width":1600,"height":900,"intrinsic":[1000,0,800,0,1000,450,0,0,1]}"#,
        )
        .unwrap()
        .to_camera()
        .unwrap();
        assert_eq!(k.focal_length(), 1000.0);
        assert!(CameraConfig::from_json(r#"{"width":1600,"height":900}"#)
            .unwrap()
            .to_camera()
            .is_err());
        assert!(CameraConfig::from_json(r#"{"width":1600}"#).is_err());
    }
}
