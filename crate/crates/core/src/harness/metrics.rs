//! Ground-truth matching, error metrics and distance-binned reports.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::bench::BenchReport;
use super::io::{EstimateRecord, FrameRecord, GtRecord};
use super::HarnessError;
use crate::skeleton::BBox;

fn bbox(a: &[f64; 4]) -> Option<BBox<f64>> {
    BBox::new(a[0], a[1], a[2], a[3]).ok()
}

/// Pairs estimates of one frame with ground truth.
///
/// Candidates are non-occluded GT entries whose box overlaps the estimate's
/// box. Pairs are taken greedily in order of increasing world distance, each
/// estimate and each GT at most once. Returns `(estimate index, gt index)`.
pub fn match_gt(estimates: &[EstimateRecord], gt: &[GtRecord]) -> Vec<(usize, usize)> {
    let mut candidates = Vec::new();
    for (i, est) in estimates.iter().enumerate() {
        let Some(eb) = bbox(&est.bbox) else { continue };
        let p = Vector3::from(est.pos);
        for (j, g) in gt.iter().enumerate() {
            if g.occ {
                continue;
            }
            let Some(gb) = bbox(&g.bbox) else { continue };
            if eb.iou(&gb) > 0.0 {
                candidates.push(((p - Vector3::from(g.pos)).norm(), i, j));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut est_used = vec![false; estimates.len()];
    let mut gt_used = vec![false; gt.len()];
    let mut out = Vec::new();
    for (_, i, j) in candidates {
        if !est_used[i] && !gt_used[j] {
            est_used[i] = true;
            gt_used[j] = true;
            out.push((i, j));
        }
    }
    out.sort_unstable();
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub scene: String,
    pub t: f64,
    pub track_id: u64,
    pub gt_id: u64,
    pub pred: [f64; 3],
    pub gt: [f64; 3],
    /// Camera origin at the frame.
    pub ego: [f64; 3],
}

/// Matching result of one scene.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SceneMatches {
    pub pairs: Vec<MatchedPair>,
    pub unmatched: usize,
    /// Times a GT identity was matched to a different track than at its
    /// previous match.
    pub id_switches: usize,
}

/// Matches every estimate of a scene against the GT of its frame.
pub fn match_scene(scene: &str, estimates: &[EstimateRecord], frames: &[FrameRecord]) -> SceneMatches {
    let mut by_t: BTreeMap<u64, Vec<&EstimateRecord>> = BTreeMap::new();
    for e in estimates {
        by_t.entry(e.t.to_bits()).or_default().push(e);
    }
    let mut result = SceneMatches::default();
    let mut last_track: HashMap<u64, u64> = HashMap::new();
    let mut seen = 0usize;
    for frame in frames {
        let Some(ests) = by_t.get(&frame.t.to_bits()) else { continue };
        seen += ests.len();
        let ests: Vec<EstimateRecord> = ests.iter().map(|e| (*e).clone()).collect();
        let gt = frame.gt.as_deref().unwrap_or(&[]);
        let matches = match_gt(&ests, gt);
        result.unmatched += ests.len() - matches.len();
        for (i, j) in matches {
            let (e, g) = (&ests[i], &gt[j]);
            if let Some(prev) = last_track.insert(g.id, e.track_id) {
                if prev != e.track_id {
                    result.id_switches += 1;
                }
            }
            result.pairs.push(MatchedPair {
                scene: scene.to_string(),
                t: frame.t,
                track_id: e.track_id,
                gt_id: g.id,
                pred: e.pos,
                gt: g.pos,
                ego: frame.ego.o,
            });
        }
    }
    // estimates at timestamps without a frame
    result.unmatched += estimates.len() - seen;
    result
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Metres.
    pub bin_width: f64,
    /// Measure errors and distances in the ground plane only.
    pub planar: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            bin_width: 5.0,
            planar: false,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub count: usize,
    /// Metres.
    pub e_abs_mean: f64,
    /// Percent, over pairs with non-zero GT distance.
    pub e_rel_mean: f64,
    pub rel_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceBin {
    pub low: f64,
    pub high: f64,
    pub mean_e_abs: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub overall: ErrorSummary,
    pub scenes: BTreeMap<String, ErrorSummary>,
    pub bins: Vec<DistanceBin>,
    pub id_switches: usize,
    pub unmatched: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime: Option<BenchReport>,
}

/// Absolute error and GT distance of one pair.
pub fn pair_errors(pair: &MatchedPair, planar: bool) -> (f64, f64) {
    let d = |a: &[f64; 3], b: &[f64; 3]| {
        let dz = if planar { 0.0 } else { a[2] - b[2] };
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + dz * dz).sqrt()
    };
    (d(&pair.pred, &pair.gt), d(&pair.gt, &pair.ego))
}

/// Sums in sorted order so the result does not depend on input order.
fn ordered_mean(mut values: Vec<f64>) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

fn summarize<'a>(pairs: impl Iterator<Item = &'a (f64, f64)>) -> ErrorSummary {
    let mut abs = Vec::new();
    let mut rel = Vec::new();
    for &(e, dist) in pairs {
        abs.push(e);
        if dist > 0.0 {
            rel.push(100.0 * e / dist);
        }
    }
    ErrorSummary {
        count: abs.len(),
        rel_count: rel.len(),
        e_abs_mean: ordered_mean(abs),
        e_rel_mean: ordered_mean(rel),
    }
}

/// Error means overall, per scene and per GT-distance bin.
pub fn evaluate(pairs: &[MatchedPair], cfg: &EvalConfig) -> MetricsReport {
    let errors: Vec<(f64, f64)> = pairs.iter().map(|p| pair_errors(p, cfg.planar)).collect();
    let mut scenes: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    let mut bins: BTreeMap<i64, Vec<(f64, f64)>> = BTreeMap::new();
    for (p, &e) in pairs.iter().zip(&errors) {
        scenes.entry(p.scene.clone()).or_default().push(e);
        if cfg.bin_width > 0.0 {
            bins.entry((e.1 / cfg.bin_width).floor() as i64).or_default().push(e);
        }
    }
    MetricsReport {
        overall: summarize(errors.iter()),
        scenes: scenes.iter().map(|(k, v)| (k.clone(), summarize(v.iter()))).collect(),
        bins: bins
            .iter()
            .map(|(&k, v)| DistanceBin {
                low: k as f64 * cfg.bin_width,
                high: (k + 1) as f64 * cfg.bin_width,
                mean_e_abs: ordered_mean(v.iter().map(|e| e.0).collect()),
                count: v.len(),
            })
            .collect(),
        id_switches: 0,
        unmatched: 0,
        runtime: None,
    }
}

/// Evaluates several matched scenes together.
pub fn evaluate_scenes(scenes: &[SceneMatches], cfg: &EvalConfig) -> MetricsReport {
    let pairs: Vec<MatchedPair> = scenes.iter().flat_map(|s| s.pairs.iter().cloned()).collect();
    let mut report = evaluate(&pairs, cfg);
    report.id_switches = scenes.iter().map(|s| s.id_switches).sum();
    report.unmatched = scenes.iter().map(|s| s.unmatched).sum();
    report
}

pub fn write_bins_csv<W: Write>(mut w: W, bins: &[DistanceBin]) -> Result<(), HarnessError> {
    writeln!(w, "bin_low,bin_high,mean_e_abs,count")?;
    for b in bins {
        writeln!(w, "{},{},{},{}", b.low, b.high, b.mean_e_abs, b.count)?;
    }
    Ok(())
}

/// Line plot of mean absolute error over distance.
pub fn write_bins_svg<W: Write>(mut w: W, bins: &[DistanceBin]) -> Result<(), HarnessError> {
    let (width, height, margin) = (640.0, 400.0, 50.0);
    let x_max = bins.iter().map(|b| b.high).fold(1.0, f64::max);
    let y_max = bins.iter().map(|b| b.mean_e_abs).fold(0.0, f64::max).max(1e-9) * 1.1;
    let sx = |x: f64| margin + x / x_max * (width - 2.0 * margin);
    let sy = |y: f64| height - margin - y / y_max * (height - 2.0 * margin);
    writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">"#
    )?;
    writeln!(w, r#"<rect width="100%" height="100%" fill="white"/>"#)?;
    writeln!(
        w,
        r#"<path d="M{x0},{y0} L{x1},{y0} M{x0},{y0} L{x0},{y1}" stroke="black"/>"#,
        x0 = sx(0.0),
        y0 = sy(0.0),
        x1 = sx(x_max),
        y1 = sy(y_max)
    )?;
    writeln!(
        w,
        r#"<text x="{}" y="{}" text-anchor="middle">GT distance [m]</text>"#,
        width / 2.0,
        height - 12.0
    )?;
    writeln!(
        w,
        r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">mean e_abs [m]</text>"#,
        height / 2.0,
        height / 2.0
    )?;
    for (x, label) in [(0.0, "0".to_string()), (x_max, format!("{x_max}"))] {
        writeln!(w, r#"<text x="{}" y="{}" text-anchor="middle">{label}</text>"#, sx(x), sy(0.0) + 16.0)?;
    }
    writeln!(
        w,
        r#"<text x="{}" y="{}" text-anchor="end">{:.2}</text>"#,
        sx(0.0) - 4.0,
        sy(y_max) + 4.0,
        y_max
    )?;
    let points: Vec<String> = bins
        .iter()
        .map(|b| format!("{:.2},{:.2}", sx((b.low + b.high) / 2.0), sy(b.mean_e_abs)))
        .collect();
    writeln!(
        w,
        r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#,
        points.join(" ")
    )?;
    for p in &points {
        let (x, y) = p.split_once(',').unwrap();
        writeln!(w, r#"<circle cx="{x}" cy="{y}" r="3" fill="steelblue"/>"#)?;
    }
    writeln!(w, "</svg>")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn est(pos: [f64; 3], bbox: [f64; 4]) -> EstimateRecord {
        EstimateRecord {
            t: 0.0,
            track_id: 0,
            pos,
            pos_initial: None,
            pos_refined: pos,
            skeleton3d: vec![None; 17],
            bbox,
        }
    }

    fn gt(id: u64, pos: [f64; 3], bbox: [f64; 4]) -> GtRecord {
        GtRecord {
            id,
            pos,
            bbox,
            occ: false,
        }
    }

    fn pair(scene: &str, e_abs: f64, dist: f64) -> MatchedPair {
        MatchedPair {
            scene: scene.into(),
            t: 0.0,
            track_id: 0,
            gt_id: 0,
            pred: [e_abs, dist, 0.0],
            gt: [0.0, dist, 0.0],
            ego: [0.0; 3],
        }
    }

    #[test]
    fn overlapping_gt_matches() {
        let m = match_gt(&[est([0.0, 10.0, 0.9], [0.0, 0.0, 10.0, 10.0])], &[gt(1, [0.0, 11.0, 0.9], [5.0, 5.0, 15.0, 15.0])]);
        assert_eq!(m, vec![(0, 0)]);
    }

    #[test]
    fn closest_world_position_wins() {
        let e = est([0.0, 20.0, 0.9], [0.0, 0.0, 10.0, 10.0]);
        let a = gt(1, [0.0, 30.0, 0.9], [1.0, 1.0, 9.0, 9.0]);
        let b = gt(2, [0.0, 22.0, 0.9], [5.0, 5.0, 30.0, 30.0]);
        assert_eq!(match_gt(&[e], &[a, b]), vec![(0, 1)]);
    }

    #[test]
    fn no_overlap_or_occluded_is_unmatched() {
        let e = est([0.0, 20.0, 0.9], [0.0, 0.0, 10.0, 10.0]);
        assert!(match_gt(std::slice::from_ref(&e), &[gt(1, [0.0, 20.0, 0.9], [20.0, 0.0, 30.0, 10.0])]).is_empty());
        let mut occluded = gt(1, [0.0, 20.0, 0.9], [0.0, 0.0, 10.0, 10.0]);
        occluded.occ = true;
        assert!(match_gt(&[e], &[occluded]).is_empty());
        assert!(match_gt(&[], &[]).is_empty());
    }

    #[test]
    fn gt_used_once() {
        let g = gt(1, [0.0, 20.0, 0.9], [0.0, 0.0, 10.0, 10.0]);
        let near = est([0.0, 20.5, 0.9], [0.0, 0.0, 10.0, 10.0]);
        let far = est([0.0, 25.0, 0.9], [0.0, 0.0, 10.0, 10.0]);
        assert_eq!(match_gt(&[far, near], &[g]), vec![(1, 0)]);
    }

    #[test]
    fn error_definitions() {
        let r = evaluate(&[pair("a", 2.0, 10.0)], &EvalConfig::default());
        assert_relative_eq!(r.overall.e_abs_mean, 2.0);
        assert_relative_eq!(r.overall.e_rel_mean, 20.0);
        let r = evaluate(&[pair("a", 0.0, 10.0), pair("a", 0.0, 30.0)], &EvalConfig::default());
        assert_eq!((r.overall.e_abs_mean, r.overall.e_rel_mean), (0.0, 0.0));
    }

    #[test]
    fn hand_aggregation() {
        let r = evaluate(&[pair("a", 1.0, 10.0), pair("a", 3.0, 20.0)], &EvalConfig::default());
        assert_relative_eq!(r.overall.e_abs_mean, 2.0);
        assert_relative_eq!(r.overall.e_rel_mean, 12.5);
        assert_eq!(r.overall.count, 2);
        assert_eq!(r.bins.len(), 2);
        assert_eq!((r.bins[0].low, r.bins[0].high, r.bins[0].count), (10.0, 15.0, 1));
        assert_eq!((r.bins[1].low, r.bins[1].mean_e_abs), (20.0, 3.0));
    }

    #[test]
    fn zero_distance_excluded_from_relative() {
        let r = evaluate(&[pair("a", 1.0, 0.0), pair("a", 3.0, 20.0)], &EvalConfig::default());
        assert_eq!((r.overall.count, r.overall.rel_count), (2, 1));
        assert_relative_eq!(r.overall.e_rel_mean, 15.0);
    }

    #[test]
    fn planar_ignores_height() {
        let mut p = pair("a", 0.0, 10.0);
        p.pred[2] = 0.5;
        let cfg = EvalConfig {
            planar: true,
            ..EvalConfig::default()
        };
        assert_eq!(evaluate(&[p.clone()], &cfg).overall.e_abs_mean, 0.0);
        assert_relative_eq!(evaluate(&[p], &EvalConfig::default()).overall.e_abs_mean, 0.5);
    }

    #[test]
    fn empty_report() {
        let r = evaluate(&[], &EvalConfig::default());
        assert_eq!(r.overall, ErrorSummary::default());
        assert!(r.bins.is_empty());
    }

    #[test]
    fn id_switch_counted() {
        let frame = |t: f64| FrameRecord {
            t,
            ego: super::super::io::EgoRecord {
                o: [0.0, 0.0, 1.5],
                yaw: 0.0,
                rot: None,
            },
            det: vec![],
            gt: Some(vec![gt(9, [0.0, 20.0, 0.9], [0.0, 0.0, 10.0, 10.0])]),
        };
        let frames: Vec<_> = (0..3).map(|k| frame(k as f64)).collect();
        let mut ests = Vec::new();
        for (k, id) in [1u64, 1, 4].iter().enumerate() {
            let mut e = est([0.0, 20.0, 0.9], [0.0, 0.0, 10.0, 10.0]);
            e.t = k as f64;
            e.track_id = *id;
            ests.push(e);
        }
        let mut stray = est([0.0, 20.0, 0.9], [0.0, 0.0, 10.0, 10.0]);
        stray.t = 7.5;
        ests.push(stray);
        let m = match_scene("s", &ests, &frames);
        assert_eq!(m.pairs.len(), 3);
        assert_eq!(m.id_switches, 1);
        assert_eq!(m.unmatched, 1);
    }

    #[test]
    fn csv_and_svg_output() {
        let r = evaluate(&[pair("a", 1.0, 10.0), pair("a", 3.0, 20.0)], &EvalConfig::default());
        let mut csv = Vec::new();
        write_bins_csv(&mut csv, &r.bins).unwrap();
        let csv = String::from_utf8(csv).unwrap();
        assert_eq!(csv.lines().next(), Some("bin_low,bin_high,mean_e_abs,count"));
        assert_eq!(csv.lines().nth(1), Some("10,15,1,1"));
        let mut svg = Vec::new();
        write_bins_svg(&mut svg, &r.bins).unwrap();
        let svg = String::from_utf8(svg).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("<polyline"));
    }

    fn arb_pair() -> impl Strategy<Value = MatchedPair> {
        (0usize..3, -50.0..50.0f64, -50.0..50.0f64, 0.0..2.0f64, -3.0..3.0f64).prop_map(|(s, x, y, z, e)| MatchedPair {
            scene: format!("s{s}"),
            t: 0.0,
            track_id: 0,
            gt_id: 0,
            pred: [x + e, y, z],
            gt: [x, y, z],
            ego: [0.0, 0.0, 1.5],
        })
    }

    proptest! {
        #[test]
        fn evaluate_is_permutation_invariant(
            pairs in prop::collection::vec(arb_pair(), 0..40),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut shuffled = pairs.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let cfg = EvalConfig::default();
            prop_assert_eq!(evaluate(&pairs, &cfg), evaluate(&shuffled, &cfg));
        }

        #[test]
        fn overall_is_weighted_scene_aggregate(pairs in prop::collection::vec(arb_pair(), 1..40)) {
            let r = evaluate(&pairs, &EvalConfig::default());
            let n: usize = r.scenes.values().map(|s| s.count).sum();
            prop_assert_eq!(n, r.overall.count);
            let weighted: f64 = r.scenes.values().map(|s| s.e_abs_mean * s.count as f64).sum::<f64>() / n as f64;
            prop_assert!((weighted - r.overall.e_abs_mean).abs() < 1e-9);
            let binned: usize = r.bins.iter().map(|b| b.count).sum();
            prop_assert_eq!(binned, n);
            // recomputing over concatenated per-scene pairs gives the same report
            let mut concat = Vec::new();
            for name in r.scenes.keys() {
                concat.extend(pairs.iter().filter(|p| &p.scene == name).cloned());
            }
            prop_assert_eq!(evaluate(&concat, &EvalConfig::default()), r);
        }
    }
}
