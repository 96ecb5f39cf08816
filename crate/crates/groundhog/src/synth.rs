//! Synthetic ground-truth problem generation.
//!
//! Scenes are planar point clouds on `y = 0` (plus optional non-planar
//! distractors), viewed by two cameras whose rotations compose a yaw-free
//! IMU attitude with a yaw about the gravity axis. Pixel observations are
//! exact projections, optionally distorted by Gaussian noise and turned
//! into outliers by scrambling (re-pairing view-2 pixels among the
//! outlier-marked correspondences).
//!
//! Everything is deterministic for a fixed seed: noise and scrambling draw
//! from decorrelated sub-streams of the instance seed, so an instance can
//! be regenerated bit-exactly from `(seed, config)`.

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{
    rot_y, rot_z, rot_x, ground_homography_to_pose, pixel_homography_from_hy, Correspondence,
    GroundHomography, ImuAttitude, Intrinsics, PixelPoint, RelativePose, ScenarioConfig,
};
use crate::sequence::{CameraPose, SequenceFrame};
use crate::solvers::{MinimalProblem, SolverKind};
use crate::util::mix_seed;

/// Maximum redraw attempts before generation gives up.
const MAX_REDRAWS: usize = 100;
/// Minimum camera height above the plane.
const MIN_CAMERA_HEIGHT: f64 = 0.2;
/// Minimum point depth in front of either camera.
const MIN_DEPTH: f64 = 0.1;
/// Pitch/roll range of the IMU attitudes (radians).
const TILT_RANGE: f64 = 0.25;
/// Yaw range of each view (radians).
const YAW_RANGE: f64 = 0.7;
/// Focal-length sampling range (pixels, log-uniform).
const FOCAL_RANGE: (f64, f64) = (300.0, 1500.0);
/// Non-planar distractor height range above the plane (magnitudes; the
/// points are placed at negative y, between the floor and the cameras).
const OFFPLANE_RANGE: (f64, f64) = (0.1, 0.5);
/// Clean-pixel residual margin (pixels) a non-planar point must exceed
/// beyond `10·σ` so it stays a distractor rather than an accidental inlier.
const DISTRACTOR_MARGIN: f64 = 2.0;
/// Minimum horizontal camera-center step between consecutive sequence
/// frames. A near-zero (or purely vertical) baseline collapses the ground
/// homography toward a pure rotation that off-plane points satisfy too,
/// which would make the plane/off-plane separation unobservable for that
/// pair.
const MIN_SEQUENCE_BASELINE: f64 = 0.12;

/// Sub-stream tags for decorrelated RNG streams derived from one seed.
const STREAM_PERTURB: u64 = 0x70_65_72_74;
const STREAM_SCRAMBLE: u64 = 0x73_63_72_61;
const STREAM_FRAME: u64 = 0x66_72_61_6d;

/// Which focal lengths the downstream solver treats as unknown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FocalMode {
    /// Both focals known; views share one drawn focal.
    Calibrated,
    /// One shared unknown focal.
    FHf,
    /// View-1 focal known, view-2 focal unknown; drawn independently.
    Hf,
    /// Both focals unknown; drawn independently.
    F1Hf2,
}

impl FocalMode {
    /// The focal-knowledge pattern a solver expects.
    pub fn for_solver(kind: SolverKind) -> Self {
        match kind {
            SolverKind::Calibrated2pt => FocalMode::Calibrated,
            SolverKind::FHf => FocalMode::FHf,
            SolverKind::Hf => FocalMode::Hf,
            SolverKind::F1Hf2 => FocalMode::F1Hf2,
        }
    }

    /// The solver this mode is generated for.
    pub fn solver(self) -> SolverKind {
        match self {
            FocalMode::Calibrated => SolverKind::Calibrated2pt,
            FocalMode::FHf => SolverKind::FHf,
            FocalMode::Hf => SolverKind::Hf,
            FocalMode::F1Hf2 => SolverKind::F1Hf2,
        }
    }
}

/// Generation parameters for a two-view instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    /// Number of on-plane points (≥ 3).
    pub n_planar: usize,
    /// Number of non-planar distractor points.
    pub n_nonplanar: usize,
    /// Pixel noise standard deviation (≥ 0).
    pub sigma: f64,
    /// Fraction of correspondences scrambled into outliers (`[0, 1)`).
    pub outlier_fraction: f64,
    /// Focal-length knowledge pattern.
    pub focal_mode: FocalMode,
}

impl SynthConfig {
    /// Minimal clean configuration: 3 planar points, no noise, no outliers.
    pub fn minimal(focal_mode: FocalMode) -> Self {
        Self { n_planar: 3, n_nonplanar: 0, sigma: 0.0, outlier_fraction: 0.0, focal_mode }
    }

    /// The robust-estimation benchmark workload: 100 planar + 30 non-planar
    /// points with 20% of correspondences scrambled.
    pub fn ransac_benchmark(focal_mode: FocalMode, sigma: f64) -> Self {
        Self { n_planar: 100, n_nonplanar: 30, sigma, outlier_fraction: 0.2, focal_mode }
    }
}

/// A fully-specified synthetic two-view scenario with ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    /// World points; on `y = 0` where `planar_mask` is true.
    pub points: Vec<Vector3<f64>>,
    /// True for on-plane points, false for distractors.
    pub planar_mask: Vec<bool>,
    /// Full camera rotations `R_i = A_i·R_y(ψ_i)` per view.
    pub rotations: (Matrix3<f64>, Matrix3<f64>),
    /// Camera translations per view.
    pub translations: (Vector3<f64>, Vector3<f64>),
    /// Yaw-free IMU attitudes per view.
    pub attitudes: (ImuAttitude, ImuAttitude),
    /// Ground-truth restricted homography of the `y = 0` plane.
    pub gt_homography: GroundHomography,
    /// Ground-truth rectified-frame relative pose.
    pub gt_pose: RelativePose,
    /// Observed correspondences (noisy/scrambled when configured).
    pub correspondences: Vec<Correspondence>,
    /// Total pixel noise standard deviation baked into the observations.
    pub sigma: f64,
    /// True where the correspondence was scrambled into an outlier.
    pub outlier_mask: Vec<bool>,
    /// Scene constants, including ground-truth focals.
    pub scenario: ScenarioConfig,
    /// Seed this instance was generated from.
    pub seed: u64,
    /// Focal-knowledge pattern the instance was generated for.
    pub focal_mode: FocalMode,
}

impl ProblemInstance {
    /// Ground-truth focal lengths `(view 1, view 2)` in pixels.
    pub fn focals(&self) -> (f64, f64) {
        self.scenario.gt_focals
    }

    /// The minimal problem this instance is meant to exercise, with known
    /// intrinsics filled in from the ground truth.
    pub fn minimal_problem(&self) -> MinimalProblem {
        let (f1, f2) = self.focals();
        match self.focal_mode {
            FocalMode::Calibrated => MinimalProblem::Calibrated2pt {
                intr1: Intrinsics::new(f1).expect("generated focals are positive"),
                intr2: Intrinsics::new(f2).expect("generated focals are positive"),
            },
            FocalMode::FHf => MinimalProblem::FHf,
            FocalMode::Hf => MinimalProblem::Hf {
                intr1: Intrinsics::new(f1).expect("generated focals are positive"),
            },
            FocalMode::F1Hf2 => MinimalProblem::F1Hf2,
        }
    }

    /// True inliers: planar and not scrambled.
    pub fn true_inlier_mask(&self) -> Vec<bool> {
        self.planar_mask
            .iter()
            .zip(self.outlier_mask.iter())
            .map(|(p, o)| *p && !*o)
            .collect()
    }
}

fn draw_attitude(rng: &mut ChaCha12Rng) -> Matrix3<f64> {
    // Base rotation turning the camera toward the plane. The gravity axis
    // +y points from the cameras toward the ground (the plane sits at a
    // positive rectified offset), so the optical axis faces +y and camera
    // centers live at negative y.
    let base = Matrix3::new(1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0);
    let pitch = rng.random_range(-TILT_RANGE..TILT_RANGE);
    let roll = rng.random_range(-TILT_RANGE..TILT_RANGE);
    base * rot_x(pitch) * rot_z(roll)
}

fn draw_focal(rng: &mut ChaCha12Rng) -> f64 {
    let (lo, hi) = FOCAL_RANGE;
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

fn project(r: &Matrix3<f64>, t: &Vector3<f64>, f: f64, p: &Vector3<f64>) -> PixelPoint {
    let ray = r * p + t;
    PixelPoint::new(f * ray.x / ray.z, f * ray.y / ray.z)
}

fn depth_ok(r: &Matrix3<f64>, t: &Vector3<f64>, points: &[Vector3<f64>]) -> bool {
    points.iter().all(|p| (r * p + t).z >= MIN_DEPTH)
}

/// Symmetric transfer residual (pixels) of a clean correspondence under the
/// ground-truth pixel homography.
fn transfer_residual(h: &Matrix3<f64>, h_inv: &Matrix3<f64>, x1: &PixelPoint, x2: &PixelPoint) -> f64 {
    let fwd = h * x1.homogeneous();
    let bwd = h_inv * x2.homogeneous();
    let d_fwd = (Vector3::new(fwd.x / fwd.z, fwd.y / fwd.z, 1.0)
        - Vector3::new(x2.u, x2.v, 1.0))
    .norm();
    let d_bwd = (Vector3::new(bwd.x / bwd.z, bwd.y / bwd.z, 1.0)
        - Vector3::new(x1.u, x1.v, 1.0))
    .norm();
    d_fwd + d_bwd
}

/// Generates a synthetic two-view instance. Deterministic for a fixed
/// `(seed, config)` pair.
pub fn generate_instance(seed: u64, config: &SynthConfig) -> Result<ProblemInstance> {
    if config.n_planar < 3 {
        return Err(Error::InvalidInput(format!(
            "need at least 3 planar points, got {}",
            config.n_planar
        )));
    }
    if !(0.0..1.0).contains(&config.outlier_fraction) {
        return Err(Error::InvalidInput(format!(
            "outlier fraction must be in [0, 1), got {}",
            config.outlier_fraction
        )));
    }
    if !(config.sigma >= 0.0 && config.sigma.is_finite()) {
        return Err(Error::InvalidInput(format!("noise sigma must be finite and ≥ 0, got {}", config.sigma)));
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    let att1 = draw_attitude(&mut rng);
    let att2 = draw_attitude(&mut rng);
    let psi1: f64 = rng.random_range(-YAW_RANGE..YAW_RANGE);
    let psi2: f64 = rng.random_range(-YAW_RANGE..YAW_RANGE);
    let r1 = att1 * rot_y(psi1);
    let r2 = att2 * rot_y(psi2);

    let f1 = draw_focal(&mut rng);
    let f2 = match config.focal_mode {
        FocalMode::Calibrated | FocalMode::FHf => f1,
        FocalMode::Hf | FocalMode::F1Hf2 => draw_focal(&mut rng),
    };

    let n = config.n_planar + config.n_nonplanar;
    let mut points: Vec<Vector3<f64>> = Vec::with_capacity(n);
    let mut planar_mask = Vec::with_capacity(n);
    for _ in 0..config.n_planar {
        let x: f64 = rng.sample(StandardNormal);
        let z: f64 = rng.sample(StandardNormal);
        points.push(Vector3::new(x, 0.0, z));
        planar_mask.push(true);
    }
    for _ in 0..config.n_nonplanar {
        let x: f64 = rng.sample(StandardNormal);
        let z: f64 = rng.sample(StandardNormal);
        // Raised toward the cameras, i.e. at negative y.
        let y = -rng.random_range(OFFPLANE_RANGE.0..OFFPLANE_RANGE.1);
        points.push(Vector3::new(x, y, z));
        planar_mask.push(false);
    }

    // Translations: redraw until both cameras sit above the plane and every
    // point is in front of both.
    let mut t1 = Vector3::zeros();
    let mut t2 = Vector3::zeros();
    let mut placed = false;
    for _ in 0..MAX_REDRAWS {
        t1 = Vector3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
        t2 = Vector3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
        let c1 = -r1.transpose() * t1;
        let c2 = -r2.transpose() * t2;
        if c1.y <= -MIN_CAMERA_HEIGHT
            && c2.y <= -MIN_CAMERA_HEIGHT
            && depth_ok(&r1, &t1, &points)
            && depth_ok(&r2, &t2, &points)
        {
            placed = true;
            break;
        }
    }
    if !placed {
        return Err(Error::GenerationFailure(format!(
            "no valid camera placement after {MAX_REDRAWS} translation redraws"
        )));
    }

    // Ground truth of the y = 0 plane.
    let plane_normal = Vector3::new(0.0, 1.0, 0.0);
    let d1 = (r1 * plane_normal).dot(&t1);
    let theta = psi2 - psi1;
    let r_rel = r2 * r1.transpose();
    let t_rel = t2 - r_rel * t1;
    let t_prime = att2.transpose() * t_rel / d1;
    let gt_homography = GroundHomography::from_motion(theta, &t_prime);
    let gt_pose = ground_homography_to_pose(&gt_homography)?;
    debug_assert!(gt_homography.h4 > 0.0, "camera-height constraints guarantee h4 = d2/d1 > 0");

    let att1_imu = ImuAttitude::new(att1)?;
    let att2_imu = ImuAttitude::new(att2)?;
    let h_pix = pixel_homography_from_hy(&gt_homography.matrix(), &att1_imu, &att2_imu, f1, f2);
    let h_pix_inv = h_pix
        .try_inverse()
        .ok_or_else(|| Error::GenerationFailure("ground-truth pixel homography is singular".into()))?;

    // Non-planar points must stay structured *distractors*: their clean
    // residual against the ground-truth homography has to clear the outlier
    // threshold with margin even at the configured noise level.
    let residual_floor = 10.0 * config.sigma + DISTRACTOR_MARGIN;
    for i in config.n_planar..n {
        let mut ok = false;
        for _ in 0..MAX_REDRAWS {
            let p = points[i];
            if (r1 * p + t1).z >= MIN_DEPTH && (r2 * p + t2).z >= MIN_DEPTH {
                let x1 = project(&r1, &t1, f1, &p);
                let x2 = project(&r2, &t2, f2, &p);
                if transfer_residual(&h_pix, &h_pix_inv, &x1, &x2) > residual_floor {
                    ok = true;
                    break;
                }
            }
            let x: f64 = rng.sample(StandardNormal);
            let z: f64 = rng.sample(StandardNormal);
            let y = -rng.random_range(OFFPLANE_RANGE.0..OFFPLANE_RANGE.1);
            points[i] = Vector3::new(x, y, z);
        }
        if !ok {
            return Err(Error::GenerationFailure(format!(
                "non-planar point {i} kept landing too close to the plane homography after {MAX_REDRAWS} redraws"
            )));
        }
    }

    let correspondences: Vec<Correspondence> = points
        .iter()
        .map(|p| {
            Correspondence::new(
                project(&r1, &t1, f1, p),
                project(&r2, &t2, f2, p),
                att1_imu,
                att2_imu,
            )
        })
        .collect();

    let mut instance = ProblemInstance {
        points,
        planar_mask,
        rotations: (r1, r2),
        translations: (t1, t2),
        attitudes: (att1_imu, att2_imu),
        gt_homography,
        gt_pose,
        correspondences,
        sigma: 0.0,
        outlier_mask: vec![false; n],
        scenario: ScenarioConfig::new(f1, f2),
        seed,
        focal_mode: config.focal_mode,
    };

    if config.sigma > 0.0 {
        instance = perturb(&instance, config.sigma)?;
    }
    if config.outlier_fraction > 0.0 {
        instance = scramble(&instance, config.outlier_fraction)?;
    }
    Ok(instance)
}

/// Adds independent zero-mean Gaussian noise with standard deviation
/// `sigma` to every pixel coordinate of both views. Ground truth is
/// untouched; the stored noise level combines in quadrature. Repeated
/// applications draw from distinct sub-streams.
pub fn perturb(instance: &ProblemInstance, sigma: f64) -> Result<ProblemInstance> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidInput(format!("noise sigma must be finite and ≥ 0, got {sigma}")));
    }
    let mut out = instance.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    let stream = STREAM_PERTURB ^ sigma.to_bits() ^ instance.sigma.to_bits().rotate_left(17);
    let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(instance.seed, stream));
    for c in &mut out.correspondences {
        let n: [f64; 4] = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        c.x1.u += sigma * n[0];
        c.x1.v += sigma * n[1];
        c.x2.u += sigma * n[2];
        c.x2.v += sigma * n[3];
    }
    out.sigma = instance.sigma.hypot(sigma);
    Ok(out)
}

/// Scrambles a fraction of correspondences into outliers by cyclically
/// re-pairing their view-2 pixels (no scrambled correspondence keeps its
/// own match). A single selected correspondence cannot be re-paired and
/// receives a uniform draw from the view-2 bounding box instead.
pub fn scramble(instance: &ProblemInstance, fraction: f64) -> Result<ProblemInstance> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::InvalidInput(format!("outlier fraction must be in [0, 1), got {fraction}")));
    }
    let mut out = instance.clone();
    let n = out.correspondences.len();
    let k = (fraction * n as f64).round() as usize;
    if k == 0 {
        return Ok(out);
    }
    let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(instance.seed, STREAM_SCRAMBLE));

    // Sample k indices without replacement.
    let mut indices: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        indices.swap(i, j);
    }
    let mut chosen: Vec<usize> = indices[..k].to_vec();
    chosen.sort_unstable();

    if k == 1 {
        let (mut lo, mut hi) = ((f64::INFINITY, f64::INFINITY), (f64::NEG_INFINITY, f64::NEG_INFINITY));
        for c in &out.correspondences {
            lo = (lo.0.min(c.x2.u), lo.1.min(c.x2.v));
            hi = (hi.0.max(c.x2.u), hi.1.max(c.x2.v));
        }
        let c = &mut out.correspondences[chosen[0]];
        c.x2 = PixelPoint::new(rng.random_range(lo.0..=hi.0), rng.random_range(lo.1..=hi.1));
    } else {
        // Sattolo shuffle: a uniformly random cyclic permutation, which is
        // always a derangement of the chosen set.
        let mut perm: Vec<usize> = chosen.clone();
        for i in (1..k).rev() {
            let j = rng.random_range(0..i);
            perm.swap(i, j);
        }
        let originals: Vec<PixelPoint> =
            chosen.iter().map(|&i| out.correspondences[i].x2).collect();
        for (slot, &src) in chosen.iter().zip(perm.iter()) {
            let pos = chosen.iter().position(|&c| c == src).expect("perm is over chosen");
            out.correspondences[*slot].x2 = originals[pos];
        }
    }
    for &i in &chosen {
        out.outlier_mask[i] = true;
    }
    Ok(out)
}

/// Cross-implementation fixture form of an instance.
///
/// `pixels` is view-major: `pixels[0][i]` and `pixels[1][i]` are the two
/// observations of correspondence `i`. `attitudes` are row-major 3×3.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceData {
    /// World points `[x, y, z]`.
    pub points: Vec<[f64; 3]>,
    /// Row-major yaw-free IMU attitudes `(view 1, view 2)`.
    pub attitudes: [[f64; 9]; 2],
    /// Pixel observations per view, parallel to `points`.
    pub pixels: [Vec<[f64; 2]>; 2],
    /// Ground-truth focal lengths `(view 1, view 2)`.
    pub focals: [f64; 2],
    /// Total pixel noise standard deviation.
    pub sigma: f64,
    /// True where the correspondence was scrambled.
    pub outlier_mask: Vec<bool>,
    /// Generation seed.
    pub seed: u64,
}

impl InstanceData {
    /// Extracts the serializable fixture form of an instance.
    pub fn from_instance(instance: &ProblemInstance) -> Self {
        let mat_row_major = |m: &Matrix3<f64>| {
            [m[(0, 0)], m[(0, 1)], m[(0, 2)], m[(1, 0)], m[(1, 1)], m[(1, 2)], m[(2, 0)], m[(2, 1)], m[(2, 2)]]
        };
        InstanceData {
            points: instance.points.iter().map(|p| [p.x, p.y, p.z]).collect(),
            attitudes: [
                mat_row_major(instance.attitudes.0.matrix()),
                mat_row_major(instance.attitudes.1.matrix()),
            ],
            pixels: [
                instance.correspondences.iter().map(|c| [c.x1.u, c.x1.v]).collect(),
                instance.correspondences.iter().map(|c| [c.x2.u, c.x2.v]).collect(),
            ],
            focals: [instance.scenario.gt_focals.0, instance.scenario.gt_focals.1],
            sigma: instance.sigma,
            outlier_mask: instance.outlier_mask.clone(),
            seed: instance.seed,
        }
    }

    /// Reconstructs the correspondence list (pixels + attitudes) from the
    /// fixture. Fails when the shapes disagree or an attitude is not a
    /// rotation.
    pub fn correspondences(&self) -> Result<Vec<Correspondence>> {
        let n = self.points.len();
        if self.pixels[0].len() != n || self.pixels[1].len() != n || self.outlier_mask.len() != n {
            return Err(Error::Data(format!(
                "inconsistent fixture shapes: {} points, {}/{} pixels, {} mask entries",
                n,
                self.pixels[0].len(),
                self.pixels[1].len(),
                self.outlier_mask.len()
            )));
        }
        let att = |a: &[f64; 9]| ImuAttitude::new_with_tol(Matrix3::from_row_slice(a), 1e-6);
        let att1 = att(&self.attitudes[0]).map_err(|e| Error::Data(format!("view-1 attitude: {e}")))?;
        let att2 = att(&self.attitudes[1]).map_err(|e| Error::Data(format!("view-2 attitude: {e}")))?;
        Ok((0..n)
            .map(|i| {
                Correspondence::new(
                    PixelPoint::new(self.pixels[0][i][0], self.pixels[0][i][1]),
                    PixelPoint::new(self.pixels[1][i][0], self.pixels[1][i][1]),
                    att1,
                    att2,
                )
            })
            .collect())
    }

    /// Serializes to the documented JSON form.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("fixture serialization cannot fail")
    }

    /// Parses the documented JSON form.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Data(format!("instance JSON: {e}")))
    }
}

/// Generation parameters for a multi-frame synthetic sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceConfig {
    /// Number of frames (≥ 2).
    pub n_frames: usize,
    /// Number of floor keypoints shared across frames.
    pub n_floor: usize,
    /// Number of off-plane cluster keypoints (a door-like vertical feature).
    pub n_cluster: usize,
    /// Pixel noise standard deviation.
    pub sigma: f64,
    /// Fraction of floor keypoints scrambled per frame.
    pub outlier_fraction: f64,
    /// Shared camera focal length in pixels.
    pub focal: f64,
}

impl Default for SequenceConfig {
    fn default() -> Self {
        Self {
            n_frames: 50,
            n_floor: 60,
            n_cluster: 8,
            sigma: 0.5,
            outlier_fraction: 0.2,
            focal: 600.0,
        }
    }
}

/// A generated sequence plus the bookkeeping tests need.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSequence {
    /// The frames, in order, with ground-truth poses and focal attached.
    pub frames: Vec<SequenceFrame>,
    /// Keypoint ids of the off-plane cluster.
    pub cluster_ids: Vec<u64>,
    /// Per-frame ids whose pixels were scrambled.
    pub scrambled: Vec<Vec<u64>>,
}

/// Generates a smooth multi-frame trajectory over a fixed floor point
/// cloud, with one off-plane cluster and per-frame scrambled outliers.
/// Deterministic for a fixed `(seed, config)` pair.
pub fn generate_sequence(seed: u64, config: &SequenceConfig) -> Result<SyntheticSequence> {
    if config.n_frames < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 frames, got {}", config.n_frames)));
    }
    if config.n_floor < 4 {
        return Err(Error::InvalidInput(format!(
            "need at least 4 floor keypoints, got {}",
            config.n_floor
        )));
    }
    if !(0.0..1.0).contains(&config.outlier_fraction) {
        return Err(Error::InvalidInput(format!(
            "outlier fraction must be in [0, 1), got {}",
            config.outlier_fraction
        )));
    }
    let focal = Intrinsics::new(config.focal)?.focal();

    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    // Fixed world: scattered floor points plus a compact vertical cluster.
    let mut points: Vec<Vector3<f64>> = Vec::new();
    for _ in 0..config.n_floor {
        let x: f64 = rng.sample(StandardNormal);
        let z: f64 = rng.sample(StandardNormal);
        points.push(Vector3::new(x, 0.0, z));
    }
    let cx: f64 = rng.random_range(-0.5..0.5);
    let cz: f64 = rng.random_range(-0.5..0.5);
    for i in 0..config.n_cluster {
        let frac = (i as f64 + 0.5) / config.n_cluster as f64;
        let jx: f64 = rng.random_range(-0.05..0.05);
        let jz: f64 = rng.random_range(-0.05..0.05);
        // Risen off the floor toward the cameras (negative y).
        points.push(Vector3::new(cx + jx, -(0.3 + 0.5 * frac), cz + jz));
    }
    let cluster_ids: Vec<u64> = (config.n_floor as u64..(config.n_floor + config.n_cluster) as u64).collect();

    let mut frames = Vec::with_capacity(config.n_frames);
    let mut scrambled = Vec::with_capacity(config.n_frames);
    let mut psi: f64 = rng.random_range(-YAW_RANGE..YAW_RANGE);
    let mut center: Vector3<f64> = Vector3::new(0.0, -1.6, 0.0);
    for k in 0..config.n_frames {
        // A wandering, always-downward-looking camera; redraw a step that
        // would put any point behind the camera.
        let mut accepted = None;
        for _ in 0..MAX_REDRAWS {
            let att = draw_attitude(&mut rng);
            let (psi_k, center_k) = if k == 0 {
                (psi, center)
            } else {
                let dpsi = rng.random_range(-0.15..0.15);
                let step = Vector3::new(
                    rng.random_range(-0.25..0.25),
                    rng.random_range(-0.08..0.08),
                    rng.random_range(-0.25..0.25),
                );
                let mut c = center + step;
                c.y = c.y.clamp(-2.0, -1.2);
                (psi + dpsi, c)
            };
            let horizontal_step =
                ((center_k.x - center.x).powi(2) + (center_k.z - center.z).powi(2)).sqrt();
            if k > 0 && horizontal_step < MIN_SEQUENCE_BASELINE {
                continue;
            }
            let r = att * rot_y(psi_k);
            let t = -r * center_k;
            if depth_ok(&r, &t, &points) {
                accepted = Some((att, psi_k, center_k, r, t));
                break;
            }
        }
        let Some((att, psi_k, center_k, r, t)) = accepted else {
            return Err(Error::GenerationFailure(format!(
                "no valid camera placement for frame {k} after {MAX_REDRAWS} redraws"
            )));
        };
        psi = psi_k;
        center = center_k;

        let noise_rng = &mut ChaCha12Rng::seed_from_u64(mix_seed(seed, STREAM_FRAME ^ (k as u64)));
        let mut keypoints: Vec<(u64, PixelPoint)> = points
            .iter()
            .enumerate()
            .map(|(id, p)| {
                let clean = project(&r, &t, focal, p);
                let nu: f64 = noise_rng.sample(StandardNormal);
                let nv: f64 = noise_rng.sample(StandardNormal);
                (
                    id as u64,
                    PixelPoint::new(clean.u + config.sigma * nu, clean.v + config.sigma * nv),
                )
            })
            .collect();

        // Scramble a fraction of the *floor* keypoints (the cluster is a
        // structured distractor already).
        let n_scramble = (config.outlier_fraction * config.n_floor as f64).round() as usize;
        let mut frame_scrambled = Vec::new();
        if n_scramble >= 2 {
            let mut ids: Vec<usize> = (0..config.n_floor).collect();
            for i in 0..n_scramble {
                let j = noise_rng.random_range(i..config.n_floor);
                ids.swap(i, j);
            }
            let chosen = &mut ids[..n_scramble];
            chosen.sort_unstable();
            let mut perm: Vec<usize> = chosen.to_vec();
            for i in (1..n_scramble).rev() {
                let j = noise_rng.random_range(0..i);
                perm.swap(i, j);
            }
            let originals: Vec<PixelPoint> = chosen.iter().map(|&i| keypoints[i].1).collect();
            for (slot, &src) in chosen.iter().zip(perm.iter()) {
                let pos = chosen.iter().position(|&c| c == src).expect("perm is over chosen");
                keypoints[*slot].1 = originals[pos];
            }
            frame_scrambled = chosen.iter().map(|&i| i as u64).collect();
        }

        frames.push(SequenceFrame {
            id: k as u64,
            attitude: ImuAttitude::new(att)?,
            keypoints,
            gt_pose: Some(CameraPose { rotation: r, translation: t }),
            gt_focal: Some(focal),
        });
        scrambled.push(frame_scrambled);
    }

    Ok(SyntheticSequence { frames, cluster_ids, scrambled })
}
