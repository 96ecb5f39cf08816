//! Core domain types and the deterministic geometric transforms shared by all
//! solvers: IMU rectification, the restricted ground-plane homography, pose
//! extraction, and composition back to the world frame.
//!
//! Conventions. The world ground plane is `y = 0` with unit normal
//! `n' = (0, 1, 0)` and plane depth `d' = 1` in the rectified frame. A camera
//! rotation factors as `R = A · R_y(ψ)` where `A` is the IMU attitude (pitch
//! and roll only) and `ψ` is the yaw about the gravity axis. Rectifying a
//! pixel `x = (u, v, 1)` with attitude `A` and focal `f` gives the ray
//! `y = Aᵀ · (u/f, v/f, 1)`, a homogeneous direction. Between two rectified
//! views of the ground plane the restricted homography
//!
//! ```text
//!        | h1  h3  h2 |
//! H_y =  |  0  h4   0 |        h1 = cos θ,  h2 = sin θ,
//!        | -h2  h5  h1 |        (h3, h4 - 1, h5) = t'
//! ```
//!
//! maps `y1` to `y2` up to scale, where `θ` is the relative yaw and `t'` the
//! plane-scaled translation.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Rotation by `a` radians about the x-axis.
pub fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

/// Rotation by `a` radians about the y-axis (the gravity axis here).
pub fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

/// Rotation by `a` radians about the z-axis.
pub fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// An image point in pixel coordinates, `(u, v, 1)` homogeneously.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelPoint {
    /// Image x-coordinate in pixels.
    pub u: f64,
    /// Image y-coordinate in pixels.
    pub v: f64,
}

impl PixelPoint {
    /// Creates a pixel point; coordinates should be finite.
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    /// True when both coordinates are finite.
    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }

    /// Homogeneous form `(u, v, 1)`.
    pub fn homogeneous(&self) -> Vector3<f64> {
        Vector3::new(self.u, self.v, 1.0)
    }
}

/// Pitch-and-roll rotation reported by the IMU for one view (no yaw).
///
/// Because yaw fixes the gravity axis, rotating `(0, 1, 0)` by the full
/// camera rotation equals rotating it by this attitude alone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuAttitude {
    m: Matrix3<f64>,
}

impl ImuAttitude {
    /// Wraps a rotation matrix, validating orthonormality and determinant.
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        Self::new_with_tol(m, 1e-9)
    }

    /// Like [`ImuAttitude::new`] with a caller-chosen orthonormality tolerance.
    pub fn new_with_tol(m: Matrix3<f64>, tol: f64) -> Result<Self> {
        if !m.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidInput("attitude has non-finite entries".into()));
        }
        let defect = (m.transpose() * m - Matrix3::identity()).abs().max();
        if defect > tol {
            return Err(Error::InvalidInput(format!(
                "attitude is not orthonormal (defect {defect:.3e} > {tol:.3e})"
            )));
        }
        if m.determinant() < 0.0 {
            return Err(Error::InvalidInput("attitude has negative determinant".into()));
        }
        Ok(Self { m })
    }

    /// The identity attitude (level camera).
    pub fn identity() -> Self {
        Self { m: Matrix3::identity() }
    }

    /// Projects an approximate rotation onto SO(3) via SVD, then wraps it.
    ///
    /// Used by ingest paths that re-orthonormalize slightly noisy attitudes.
    pub fn orthonormalized(m: Matrix3<f64>) -> Result<Self> {
        if !m.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidInput("attitude has non-finite entries".into()));
        }
        let svd = m.svd(true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        let mut r = u * vt;
        if r.determinant() < 0.0 {
            // Flip the weakest direction to land on a proper rotation.
            let mut u2 = u;
            u2.column_mut(2).neg_mut();
            r = u2 * vt;
        }
        Self::new_with_tol(r, 1e-9)
    }

    /// The underlying rotation matrix.
    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }
}

/// Pinhole intrinsics reduced to a single focal length in pixels.
///
/// `K = diag(f, f, 1)` with the principal point at the origin; solvers
/// parameterize the unknown inverse calibration through the scalar `w`
/// (`inv_focal` = 1/f) that `K⁻¹ = diag(1, 1, w)`-style forms carry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    f: f64,
}

impl Intrinsics {
    /// Creates intrinsics; `f` must be finite and strictly positive.
    pub fn new(f: f64) -> Result<Self> {
        if !f.is_finite() || f <= 0.0 {
            return Err(Error::InvalidInput(format!("focal length must be finite and > 0, got {f}")));
        }
        Ok(Self { f })
    }

    /// Focal length in pixels.
    pub fn focal(&self) -> f64 {
        self.f
    }

    /// Derived inverse scale `w = 1/f`.
    pub fn inv_focal(&self) -> f64 {
        1.0 / self.f
    }
}

/// A pixel correspondence between two views with the per-view IMU attitudes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    /// Observation in view 1.
    pub x1: PixelPoint,
    /// Observation in view 2.
    pub x2: PixelPoint,
    /// IMU attitudes `(view 1, view 2)`. All correspondences of one image
    /// pair must share the same attitude pair.
    pub attitudes: (ImuAttitude, ImuAttitude),
}

impl Correspondence {
    /// Bundles a point pair with the shared attitude pair.
    pub fn new(x1: PixelPoint, x2: PixelPoint, att1: ImuAttitude, att2: ImuAttitude) -> Self {
        Self { x1, x2, attitudes: (att1, att2) }
    }
}

/// A rectified homogeneous viewing direction `y = Aᵀ K⁻¹ x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectifiedPoint {
    /// The direction; nonzero, defined up to positive scale.
    pub y: Vector3<f64>,
}

/// Rectifies a homogeneous pixel direction; linear in `x`.
///
/// Most callers want [`rectify`]; this variant exposes the underlying linear
/// map so projective inputs `(λu, λv, λ)` rectify proportionally.
pub fn rectify_dir(x: &Vector3<f64>, attitude: &ImuAttitude, intr: &Intrinsics) -> Result<RectifiedPoint> {
    if !x.iter().all(|c| c.is_finite()) {
        return Err(Error::InvalidInput("pixel direction has non-finite entries".into()));
    }
    let f = intr.focal();
    let ray = Vector3::new(x.x / f, x.y / f, x.z);
    Ok(RectifiedPoint { y: attitude.matrix().transpose() * ray })
}

/// Rectifies a pixel using the view's attitude and focal length.
pub fn rectify(x: &PixelPoint, attitude: &ImuAttitude, intr: &Intrinsics) -> Result<RectifiedPoint> {
    if !x.is_finite() {
        return Err(Error::InvalidInput(format!("pixel ({}, {}) is not finite", x.u, x.v)));
    }
    rectify_dir(&x.homogeneous(), attitude, intr)
}

/// The 5-parameter restricted homography of a gravity-rectified view pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundHomography {
    /// cos θ of the relative yaw.
    pub h1: f64,
    /// sin θ of the relative yaw.
    pub h2: f64,
    /// First translation entry, `t'_x`.
    pub h3: f64,
    /// `1 + t'_y`; positive for cheirality-consistent motion.
    pub h4: f64,
    /// Third translation entry, `t'_z`.
    pub h5: f64,
}

impl GroundHomography {
    /// Builds the homography from raw parameters without normalization.
    pub fn from_params(h: [f64; 5]) -> Self {
        Self { h1: h[0], h2: h[1], h3: h[2], h4: h[3], h5: h[4] }
    }

    /// Forward construction from relative yaw `θ` and plane-scaled
    /// translation `t'`: `H_y = R_y(θ) + t'·n'ᵀ` with `n' = (0,1,0)`.
    pub fn from_motion(theta: f64, t: &Vector3<f64>) -> Self {
        Self {
            h1: theta.cos(),
            h2: theta.sin(),
            h3: t.x,
            h4: 1.0 + t.y,
            h5: t.z,
        }
    }

    /// Parameters as an array `[h1, h2, h3, h4, h5]`.
    pub fn params(&self) -> [f64; 5] {
        [self.h1, self.h2, self.h3, self.h4, self.h5]
    }

    /// The 3×3 matrix form.
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.h1, self.h3, self.h2,
            0.0, self.h4, 0.0,
            -self.h2, self.h5, self.h1,
        )
    }

    /// Residual of the trigonometric constraint, `h1² + h2² − 1`.
    pub fn trig_residual(&self) -> f64 {
        self.h1 * self.h1 + self.h2 * self.h2 - 1.0
    }

    /// True when the cheirality convention `h4 > 0` holds.
    pub fn cheirality_ok(&self) -> bool {
        self.h4 > 0.0
    }
}

/// Relative pose in the rectified (gravity-aligned) or world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativePose {
    /// Rotation angle about the gravity axis, in `(-π, π]`.
    pub yaw: f64,
    /// Relative rotation.
    pub r: Matrix3<f64>,
    /// Translation direction: unit norm, or exactly zero.
    pub t: Vector3<f64>,
    /// Norm of the translation before normalization (scale is not
    /// recoverable from a homography; this preserves what the caller knew).
    pub t_norm: f64,
}

impl RelativePose {
    /// The identity pose.
    pub fn identity() -> Self {
        Self { yaw: 0.0, r: Matrix3::identity(), t: Vector3::zeros(), t_norm: 0.0 }
    }
}

/// General 3×3 homography (pixel-space `H`, or an unconstrained `H_y`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FullHomography {
    /// The matrix; nonzero.
    pub m: Matrix3<f64>,
}

/// Fixed scene assumptions of the ground-plane setup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioConfig {
    /// Plane normal in the rectified frame; `(0, 1, 0)`.
    pub plane_normal: Vector3<f64>,
    /// Plane depth `d'`; fixed to 1.
    pub plane_depth: f64,
    /// Ground-truth focal lengths `(view 1, view 2)` in pixels.
    pub gt_focals: (f64, f64),
}

impl ScenarioConfig {
    /// Standard configuration with the given ground-truth focal lengths.
    pub fn new(f1: f64, f2: f64) -> Self {
        Self { plane_normal: Vector3::new(0.0, 1.0, 0.0), plane_depth: 1.0, gt_focals: (f1, f2) }
    }
}

/// Threshold below which a recovered translation counts as exactly zero.
pub const ZERO_TRANSLATION_TOL: f64 = 1e-9;

/// Extracts the rectified-frame relative pose from a normalized homography.
///
/// Requires `h1² + h2² = 1` (within `trig_tol`); the rotation is the pure yaw
/// `R_y(θ)` with `θ = atan2(h2, h1)` and the translation `(h3, h4−1, h5)` is
/// returned normalized with its norm in `t_norm`.
pub fn ground_homography_to_pose(h: &GroundHomography) -> Result<RelativePose> {
    ground_homography_to_pose_with_tol(h, 1e-6)
}

/// [`ground_homography_to_pose`] with a caller-chosen trig tolerance.
pub fn ground_homography_to_pose_with_tol(h: &GroundHomography, trig_tol: f64) -> Result<RelativePose> {
    let defect = h.trig_residual().abs();
    if defect > trig_tol {
        return Err(Error::InvalidHomography(format!(
            "trig constraint violated: |h1² + h2² − 1| = {defect:.3e} > {trig_tol:.3e}"
        )));
    }
    let r = Matrix3::new(h.h1, 0.0, h.h2, 0.0, 1.0, 0.0, -h.h2, 0.0, h.h1);
    let t_raw = Vector3::new(h.h3, h.h4 - 1.0, h.h5);
    let n = t_raw.norm();
    let (t, t_norm) = if n < ZERO_TRANSLATION_TOL {
        (Vector3::zeros(), 0.0)
    } else {
        (t_raw / n, n)
    };
    Ok(RelativePose { yaw: h.h2.atan2(h.h1), r, t, t_norm })
}

/// Composes a rectified-frame pose with the two attitudes into world frame:
/// `R = A2 · R_y · A1ᵀ` and `t ∝ A2 · t'` (renormalized).
pub fn compose_world_pose(rel: &RelativePose, att1: &ImuAttitude, att2: &ImuAttitude) -> RelativePose {
    let r = att2.matrix() * rel.r * att1.matrix().transpose();
    let t_raw = att2.matrix() * rel.t;
    let n = t_raw.norm();
    let t = if n < ZERO_TRANSLATION_TOL { Vector3::zeros() } else { t_raw / n };
    RelativePose { yaw: rel.yaw, r, t, t_norm: rel.t_norm }
}

/// Rescales a raw 5-vector by the trig constraint; both signs returned.
///
/// The scale of `H_y` is fixed only up to sign by `h1² + h2² = 1`; the first
/// element carries `λ = +1/√(h1²+h2²)`, the second `−λ`. Callers usually keep
/// the solution with `h4 > 0` (the plane stays on one side of both cameras).
pub fn normalize_ground_homography(h_raw: &[f64; 5]) -> Result<(GroundHomography, GroundHomography)> {
    let s2 = h_raw[0] * h_raw[0] + h_raw[1] * h_raw[1];
    if !s2.is_finite() {
        return Err(Error::InvalidInput("raw homography has non-finite entries".into()));
    }
    if s2 <= f64::MIN_POSITIVE {
        return Err(Error::DegenerateScale);
    }
    let lambda = 1.0 / s2.sqrt();
    let mut pos = [0.0; 5];
    let mut neg = [0.0; 5];
    for i in 0..5 {
        pos[i] = h_raw[i] * lambda;
        neg[i] = -pos[i];
    }
    Ok((GroundHomography::from_params(pos), GroundHomography::from_params(neg)))
}

/// Maps a pixel-space homography into the rectified frame (unnormalized):
/// `H_y ∼ A2ᵀ K2⁻¹ H K1 A1`.
pub fn hy_from_pixel_homography(
    h: &FullHomography,
    att1: &ImuAttitude,
    att2: &ImuAttitude,
    intr1: &Intrinsics,
    intr2: &Intrinsics,
) -> FullHomography {
    let k1 = Matrix3::new(intr1.focal(), 0.0, 0.0, 0.0, intr1.focal(), 0.0, 0.0, 0.0, 1.0);
    let k2_inv = Matrix3::new(
        1.0 / intr2.focal(), 0.0, 0.0,
        0.0, 1.0 / intr2.focal(), 0.0,
        0.0, 0.0, 1.0,
    );
    FullHomography { m: att2.matrix().transpose() * k2_inv * h.m * k1 * att1.matrix() }
}

/// Inverse of [`hy_from_pixel_homography`]: the pixel-space homography
/// `H ∼ K2 A2 H_y A1ᵀ K1⁻¹` induced by a rectified-frame homography.
pub fn pixel_homography_from_hy(
    hy: &Matrix3<f64>,
    att1: &ImuAttitude,
    att2: &ImuAttitude,
    f1: f64,
    f2: f64,
) -> Matrix3<f64> {
    let k2 = Matrix3::new(f2, 0.0, 0.0, 0.0, f2, 0.0, 0.0, 0.0, 1.0);
    let k1_inv = Matrix3::new(1.0 / f1, 0.0, 0.0, 0.0, 1.0 / f1, 0.0, 0.0, 0.0, 1.0);
    k2 * att2.matrix() * hy * att1.matrix().transpose() * k1_inv
}
