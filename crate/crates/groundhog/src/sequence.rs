//! Frame sequences: JSONL ingestion, per-pair robust estimation, and
//! trajectory chaining.
//!
//! A sequence file holds one JSON object per line:
//!
//! ```json
//! {"id":0,"attitude":[...9 row-major...],"keypoints":[[7,120.5,-33.125], ...],
//!  "gt_pose":{"rotation":[...9...],"translation":[x,y,z]},"gt_focal":600.0}
//! ```
//!
//! `gt_pose` and `gt_focal` are optional. Attitudes whose orthonormality
//! defect is at most 1e-6 pass through unchanged (files round-trip
//! bit-exactly); defects up to 1e-3 are repaired by projection; anything
//! worse is rejected.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{
    compose_world_pose, ground_homography_to_pose, Correspondence, ImuAttitude, Intrinsics,
    PixelPoint, RelativePose,
};
use crate::robust::{ransac, RansacConfig, RansacResult};
use crate::solvers::{MinimalProblem, SolverKind};
use crate::util::mix_seed;

/// Attitude defects at or below this pass through unchanged.
const ATTITUDE_PASS_TOL: f64 = 1e-6;
/// Defects in `(pass, repair]` are re-orthonormalized; larger ones are
/// data errors.
const ATTITUDE_REPAIR_TOL: f64 = 1e-3;

/// A world-to-camera rigid pose: `x_cam = R x_world + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    /// World-to-camera rotation.
    pub rotation: Matrix3<f64>,
    /// Translation component.
    pub translation: Vector3<f64>,
}

impl CameraPose {
    /// The identity pose (camera at the world origin, axes aligned).
    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    /// Camera center in world coordinates, `−Rᵀ t`.
    pub fn position(&self) -> Vector3<f64> {
        -self.rotation.transpose() * self.translation
    }

    /// Relative pose taking this camera's frame into `next`'s:
    /// `(R_next R⁻¹, t_next − R_next R⁻¹ t)`.
    pub fn relative_to(&self, next: &CameraPose) -> CameraPose {
        let r = next.rotation * self.rotation.transpose();
        CameraPose { rotation: r, translation: next.translation - r * self.translation }
    }
}

/// One frame of a capture sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceFrame {
    /// Frame id; unique within a sequence. File order is preserved.
    pub id: u64,
    /// IMU attitude of the frame.
    pub attitude: ImuAttitude,
    /// Tracked keypoints as `(track id, pixel)`. Track ids are unique
    /// within a frame and identify the same feature across frames.
    pub keypoints: Vec<(u64, PixelPoint)>,
    /// Ground-truth camera pose, when available.
    pub gt_pose: Option<CameraPose>,
    /// Ground-truth focal length in pixels, when available.
    pub gt_focal: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct PoseJson {
    rotation: [f64; 9],
    translation: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct FrameJson {
    id: u64,
    attitude: [f64; 9],
    keypoints: Vec<(u64, f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gt_pose: Option<PoseJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gt_focal: Option<f64>,
}

fn attitude_from_raw(raw: &[f64; 9], frame: u64) -> Result<ImuAttitude> {
    let m = Matrix3::from_row_slice(raw);
    if let Ok(att) = ImuAttitude::new_with_tol(m, ATTITUDE_PASS_TOL) {
        return Ok(att);
    }
    let defect = (m.transpose() * m - Matrix3::identity()).abs().max();
    if defect.is_finite() && defect <= ATTITUDE_REPAIR_TOL {
        return ImuAttitude::orthonormalized(m).map_err(|e| {
            Error::Data(format!("frame {frame}: attitude cannot be repaired: {e}"))
        });
    }
    Err(Error::Data(format!(
        "frame {frame}: attitude orthonormality defect {defect:.3e} exceeds {ATTITUDE_REPAIR_TOL:.0e}"
    )))
}

fn frame_from_json(raw: FrameJson) -> Result<SequenceFrame> {
    let attitude = attitude_from_raw(&raw.attitude, raw.id)?;
    let mut seen = HashSet::with_capacity(raw.keypoints.len());
    let mut keypoints = Vec::with_capacity(raw.keypoints.len());
    for &(id, u, v) in &raw.keypoints {
        if !u.is_finite() || !v.is_finite() {
            return Err(Error::Data(format!(
                "frame {}: keypoint {id} has non-finite pixel ({u}, {v})",
                raw.id
            )));
        }
        if !seen.insert(id) {
            return Err(Error::Data(format!("frame {}: duplicate keypoint id {id}", raw.id)));
        }
        keypoints.push((id, PixelPoint::new(u, v)));
    }
    let gt_pose = match raw.gt_pose {
        None => None,
        Some(p) => {
            if !p.rotation.iter().chain(p.translation.iter()).all(|x| x.is_finite()) {
                return Err(Error::Data(format!("frame {}: non-finite ground-truth pose", raw.id)));
            }
            Some(CameraPose {
                rotation: Matrix3::from_row_slice(&p.rotation),
                translation: Vector3::from_row_slice(&p.translation),
            })
        }
    };
    if let Some(f) = raw.gt_focal {
        if !f.is_finite() || f <= 0.0 {
            return Err(Error::Data(format!("frame {}: ground-truth focal {f} is not positive", raw.id)));
        }
    }
    Ok(SequenceFrame { id: raw.id, attitude, keypoints, gt_pose, gt_focal: raw.gt_focal })
}

fn frame_to_json(frame: &SequenceFrame) -> FrameJson {
    let att = frame.attitude.matrix();
    let mut attitude = [0.0; 9];
    for r in 0..3 {
        for c in 0..3 {
            attitude[3 * r + c] = att[(r, c)];
        }
    }
    FrameJson {
        id: frame.id,
        attitude,
        keypoints: frame.keypoints.iter().map(|&(id, p)| (id, p.u, p.v)).collect(),
        gt_pose: frame.gt_pose.as_ref().map(|p| {
            let mut rotation = [0.0; 9];
            for r in 0..3 {
                for c in 0..3 {
                    rotation[3 * r + c] = p.rotation[(r, c)];
                }
            }
            PoseJson { rotation, translation: [p.translation.x, p.translation.y, p.translation.z] }
        }),
        gt_focal: frame.gt_focal,
    }
}

/// Parses a JSONL sequence from a string. Empty and whitespace-only lines
/// are skipped; malformed lines report their 1-based line number.
pub fn ingest_str(text: &str) -> Result<Vec<SequenceFrame>> {
    let mut frames = Vec::new();
    let mut ids = HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let raw: FrameJson = serde_json::from_str(line)
            .map_err(|e| Error::Parse { line: idx + 1, msg: e.to_string() })?;
        let frame = frame_from_json(raw)?;
        if !ids.insert(frame.id) {
            return Err(Error::Data(format!("duplicate frame id {}", frame.id)));
        }
        frames.push(frame);
    }
    Ok(frames)
}

/// Reads and validates a JSONL sequence file.
pub fn ingest(path: impl AsRef<Path>) -> Result<Vec<SequenceFrame>> {
    ingest_str(&std::fs::read_to_string(path)?)
}

/// Serializes frames to JSONL (inverse of [`ingest_str`] for valid data).
pub fn to_jsonl(frames: &[SequenceFrame]) -> Result<String> {
    let mut out = String::new();
    for frame in frames {
        let line = serde_json::to_string(&frame_to_json(frame))
            .map_err(|e| Error::Data(format!("serialization failed: {e}")))?;
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}

/// Writes frames as a JSONL file.
pub fn emit_jsonl(frames: &[SequenceFrame], path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_jsonl(frames)?)?;
    Ok(())
}

/// Pairs up keypoints shared by two frames (in `a`'s keypoint order).
/// Returns the shared track ids and the pixel correspondences.
pub fn match_keypoints(a: &SequenceFrame, b: &SequenceFrame) -> (Vec<u64>, Vec<Correspondence>) {
    let in_b: HashMap<u64, PixelPoint> = b.keypoints.iter().copied().collect();
    let mut ids = Vec::new();
    let mut cs = Vec::new();
    for &(id, x1) in &a.keypoints {
        if let Some(&x2) = in_b.get(&id) {
            ids.push(id);
            cs.push(Correspondence::new(x1, x2, a.attitude, b.attitude));
        }
    }
    (ids, cs)
}

/// A successful pair estimate.
#[derive(Debug, Clone)]
pub struct PairEstimate {
    /// Frame id of the earlier view.
    pub from: u64,
    /// Frame id of the later view.
    pub to: u64,
    /// Relative pose in the world frame (attitudes composed in).
    pub rel_world: RelativePose,
    /// The full RANSAC outcome, including the selected model and focals.
    pub ransac: RansacResult,
    /// Track ids scored as inliers.
    pub inlier_ids: Vec<u64>,
    /// Track ids scored as outliers.
    pub outlier_ids: Vec<u64>,
}

/// Outcome for one consecutive frame pair: an estimate, or a gap marker
/// explaining why no estimate was produced.
#[derive(Debug, Clone)]
pub enum PairOutcome {
    /// The pair was estimated.
    Estimate(PairEstimate),
    /// No estimate; the pair is skipped but the sequence continues.
    Gap {
        /// Frame id of the earlier view.
        from: u64,
        /// Frame id of the later view.
        to: u64,
        /// Human-readable cause.
        reason: String,
    },
}

impl PairOutcome {
    /// The contained estimate, if any.
    pub fn estimate(&self) -> Option<&PairEstimate> {
        match self {
            PairOutcome::Estimate(e) => Some(e),
            PairOutcome::Gap { .. } => None,
        }
    }
}

fn build_problem(kind: SolverKind, a: &SequenceFrame, b: &SequenceFrame) -> std::result::Result<MinimalProblem, String> {
    let focal_of = |frame: &SequenceFrame| -> std::result::Result<Intrinsics, String> {
        let f = frame
            .gt_focal
            .ok_or_else(|| format!("frame {} has no focal length for solver {kind}", frame.id))?;
        Intrinsics::new(f).map_err(|e| e.to_string())
    };
    Ok(match kind {
        SolverKind::Calibrated2pt => {
            MinimalProblem::Calibrated2pt { intr1: focal_of(a)?, intr2: focal_of(b)? }
        }
        SolverKind::FHf => MinimalProblem::FHf,
        SolverKind::Hf => MinimalProblem::Hf { intr1: focal_of(a)? },
        SolverKind::F1Hf2 => MinimalProblem::F1Hf2,
    })
}

/// Estimates the relative pose of every consecutive frame pair.
///
/// Pairs with too few shared tracks, missing focal metadata (for solvers
/// that need it), or no surviving RANSAC model become [`PairOutcome::Gap`]
/// markers rather than errors. Each pair draws its RANSAC seed from
/// `config.seed` and the pair index, so runs are deterministic.
pub fn estimate_sequence(
    frames: &[SequenceFrame],
    kind: SolverKind,
    config: &RansacConfig,
) -> Result<Vec<PairOutcome>> {
    let mut outcomes = Vec::new();
    for (p, pair) in frames.windows(2).enumerate() {
        let (a, b) = (&pair[0], &pair[1]);
        let gap = |reason: String| PairOutcome::Gap { from: a.id, to: b.id, reason };

        let problem = match build_problem(kind, a, b) {
            Ok(pr) => pr,
            Err(reason) => {
                outcomes.push(gap(reason));
                continue;
            }
        };
        let (ids, cs) = match_keypoints(a, b);
        if cs.len() < problem.sample_size() {
            outcomes.push(gap(format!(
                "{} shared keypoints, need {}",
                cs.len(),
                problem.sample_size()
            )));
            continue;
        }

        let sub = RansacConfig { seed: mix_seed(config.seed, p as u64), ..*config };
        let res = match ransac(&cs, &problem, &sub) {
            Ok(res) => res,
            Err(Error::NoModel(msg)) => {
                outcomes.push(gap(format!("no model: {msg}")));
                continue;
            }
            Err(e) => return Err(e),
        };

        let rel_rect = match ground_homography_to_pose(&res.best.h) {
            Ok(rel) => rel,
            Err(e) => {
                outcomes.push(gap(format!("selected model rejected: {e}")));
                continue;
            }
        };
        let rel_world = compose_world_pose(&rel_rect, &a.attitude, &b.attitude);
        let mut inlier_ids = Vec::new();
        let mut outlier_ids = Vec::new();
        for (&id, &inl) in ids.iter().zip(res.inlier_mask.iter()) {
            if inl {
                inlier_ids.push(id);
            } else {
                outlier_ids.push(id);
            }
        }
        outcomes.push(PairOutcome::Estimate(PairEstimate {
            from: a.id,
            to: b.id,
            rel_world,
            ransac: res,
            inlier_ids,
            outlier_ids,
        }));
    }
    Ok(outcomes)
}

/// A chained trajectory with per-frame classification bookkeeping.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// World-to-camera poses, one per frame; the first is the anchor.
    pub poses: Vec<CameraPose>,
    /// Track ids scored as inliers for the pair arriving at each frame
    /// (empty for the first frame and for gap pairs).
    pub inlier_ids: Vec<Vec<u64>>,
    /// Track ids scored as outliers for the pair arriving at each frame.
    pub outlier_ids: Vec<Vec<u64>>,
}

/// Chains per-pair estimates into camera poses.
///
/// Homographies fix translation only up to scale, so each step's length
/// must come from somewhere: with `scale_align` the ground-truth relative
/// translation norm of the same pair is used (requires `gt`), otherwise
/// every nonzero step has unit length. The first pose is anchored to the
/// ground truth when given, else to the identity. Gap pairs repeat the
/// previous pose.
pub fn chain_trajectory(
    outcomes: &[PairOutcome],
    gt: Option<&[CameraPose]>,
    scale_align: bool,
) -> Result<Trajectory> {
    if scale_align && gt.is_none() {
        return Err(Error::Config(
            "translation scale alignment requires ground-truth poses".into(),
        ));
    }
    if let Some(g) = gt {
        if g.len() != outcomes.len() + 1 {
            return Err(Error::Config(format!(
                "{} ground-truth poses for {} pair outcomes (need pairs + 1)",
                g.len(),
                outcomes.len()
            )));
        }
    }

    let anchor = gt.map_or_else(CameraPose::identity, |g| g[0]);
    let mut poses = vec![anchor];
    let mut inlier_ids = vec![Vec::new()];
    let mut outlier_ids = vec![Vec::new()];

    for (k, outcome) in outcomes.iter().enumerate() {
        let prev = poses[k];
        match outcome {
            PairOutcome::Gap { .. } => {
                poses.push(prev);
                inlier_ids.push(Vec::new());
                outlier_ids.push(Vec::new());
            }
            PairOutcome::Estimate(e) => {
                let scale = if scale_align {
                    let g = gt.expect("checked above");
                    g[k].relative_to(&g[k + 1]).translation.norm()
                } else {
                    1.0
                };
                let r = e.rel_world.r * prev.rotation;
                let t = e.rel_world.r * prev.translation + scale * e.rel_world.t;
                poses.push(CameraPose { rotation: r, translation: t });
                inlier_ids.push(e.inlier_ids.clone());
                outlier_ids.push(e.outlier_ids.clone());
            }
        }
    }
    Ok(Trajectory { poses, inlier_ids, outlier_ids })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3;

    fn tiny_frame(id: u64) -> SequenceFrame {
        SequenceFrame {
            id,
            attitude: ImuAttitude::identity(),
            keypoints: vec![(0, PixelPoint::new(1.5, -2.25)), (9, PixelPoint::new(0.0625, 4.0))],
            gt_pose: Some(CameraPose {
                rotation: Matrix3::identity(),
                translation: Vector3::new(0.5, -1.0, 0.125),
            }),
            gt_focal: Some(600.0),
        }
    }

    #[test]
    fn jsonl_round_trip_is_bit_exact() {
        let frames = vec![tiny_frame(0), {
            let mut f = tiny_frame(3);
            f.gt_pose = None;
            f.gt_focal = None;
            f
        }];
        let text = to_jsonl(&frames).unwrap();
        let back = ingest_str(&text).unwrap();
        assert_eq!(frames, back);
        // And the emitted text itself is stable under a second round trip.
        assert_eq!(text, to_jsonl(&back).unwrap());
    }

    #[test]
    fn parse_error_carries_line_number() {
        let text = format!("{}\nnot json\n", to_jsonl(&[tiny_frame(0)]).unwrap().trim_end());
        match ingest_str(&text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn attitude_tiers() {
        let mut frame = frame_to_json(&tiny_frame(0));
        // Defect within the pass tolerance: entries survive unchanged.
        frame.attitude[0] = 1.0 + 4e-7;
        let line = serde_json::to_string(&frame).unwrap();
        let got = ingest_str(&line).unwrap();
        assert_eq!(got[0].attitude.matrix()[(0, 0)], 1.0 + 4e-7);
        // Repairable defect: orthonormalized, so the entry moves.
        frame.attitude[0] = 1.0 + 4e-4;
        let line = serde_json::to_string(&frame).unwrap();
        let got = ingest_str(&line).unwrap();
        let m = got[0].attitude.matrix();
        assert!((m.transpose() * m - Matrix3::identity()).abs().max() < 1e-12);
        assert!((m[(0, 0)] - (1.0 + 4e-4)).abs() > 1e-5);
        // Hopeless defect: rejected as data.
        frame.attitude[0] = 2.0;
        let line = serde_json::to_string(&frame).unwrap();
        assert!(matches!(ingest_str(&line), Err(Error::Data(_))));
    }

    #[test]
    fn duplicate_keypoint_id_rejected() {
        let mut frame = frame_to_json(&tiny_frame(0));
        frame.keypoints.push((0, 5.0, 5.0));
        let line = serde_json::to_string(&frame).unwrap();
        assert!(matches!(ingest_str(&line), Err(Error::Data(_))));
    }

    #[test]
    fn matching_follows_track_ids() {
        let a = tiny_frame(0);
        let mut b = tiny_frame(1);
        b.keypoints = vec![(9, PixelPoint::new(7.0, 7.0)), (4, PixelPoint::new(1.0, 1.0))];
        let (ids, cs) = match_keypoints(&a, &b);
        assert_eq!(ids, vec![9]);
        assert_eq!(cs[0].x1, PixelPoint::new(0.0625, 4.0));
        assert_eq!(cs[0].x2, PixelPoint::new(7.0, 7.0));
    }

    #[test]
    fn chaining_identity_and_gap_carry() {
        let est = PairOutcome::Estimate(PairEstimate {
            from: 0,
            to: 1,
            rel_world: RelativePose::identity(),
            ransac: crate::robust::RansacResult {
                best: crate::solvers::SolverSolution {
                    h: crate::geom::GroundHomography::from_params([1.0, 0.0, 0.0, 1.0, 0.0]),
                    f1: crate::solvers::Focal::Known(600.0),
                    f2: crate::solvers::Focal::Known(600.0),
                },
                inlier_mask: vec![true],
                inlier_count: 1,
                iterations: 1,
                skipped: 0,
                candidates_scored: 1,
                wall_time: std::time::Duration::ZERO,
            },
            inlier_ids: vec![42],
            outlier_ids: vec![],
        });
        let gap = PairOutcome::Gap { from: 1, to: 2, reason: "test".into() };
        let traj = chain_trajectory(&[est, gap], None, false).unwrap();
        assert_eq!(traj.poses.len(), 3);
        assert_eq!(traj.poses[1], CameraPose::identity());
        assert_eq!(traj.poses[2], traj.poses[1]);
        assert_eq!(traj.inlier_ids[1], vec![42]);
        assert!(traj.inlier_ids[2].is_empty());
    }

    #[test]
    fn scale_alignment_requires_ground_truth() {
        assert!(matches!(chain_trajectory(&[], None, true), Err(Error::Config(_))));
    }
}
