//! Shared helpers for the integration suites: a scene builder with *chosen*
//! ground truth (yaw, focals), independent of the library's own generator.
//!
//! Each test target compiles this module separately and uses a different
//! subset of it, so unused-item lints are suppressed wholesale.
#![allow(dead_code)]

use groundhog::geom::{
    ground_homography_to_pose, rot_x, rot_y, rot_z, Correspondence, GroundHomography, ImuAttitude,
    PixelPoint, RelativePose,
};
use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

/// A synthetic two-view scene with every ground-truth quantity exposed.
pub struct FixedScene {
    pub correspondences: Vec<Correspondence>,
    pub gt: GroundHomography,
    pub gt_pose: RelativePose,
    pub focals: (f64, f64),
    pub attitudes: (ImuAttitude, ImuAttitude),
    pub rotations: (Matrix3<f64>, Matrix3<f64>),
    pub translations: (Vector3<f64>, Vector3<f64>),
    pub points: Vec<Vector3<f64>>,
}

/// Builds a scene with the given relative yaw and focal lengths: floor
/// points with unit-variance spread, tilted down-looking cameras above the
/// plane, exact pinhole projections. `pure_rotation` forces `t_rel = 0`
/// (both cameras share one center).
pub fn fixed_scene(
    theta: f64,
    f1: f64,
    f2: f64,
    n: usize,
    seed: u64,
    pure_rotation: bool,
) -> FixedScene {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    // Gravity (+y) points from the cameras toward the floor: camera
    // centers sit at negative y, so the plane offsets d1, d2 are positive.
    let base = Matrix3::new(1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0);
    let tilt = |rng: &mut ChaCha12Rng| {
        base * rot_x(rng.random_range(-0.25..0.25)) * rot_z(rng.random_range(-0.25..0.25))
    };
    let a1 = tilt(&mut rng);
    let a2 = tilt(&mut rng);
    let psi1: f64 = rng.random_range(-0.6..0.6);
    let psi2 = psi1 + theta;
    let r1 = a1 * rot_y(psi1);
    let r2 = a2 * rot_y(psi2);

    let points: Vec<Vector3<f64>> = (0..n)
        .map(|_| Vector3::new(rng.sample(StandardNormal), 0.0, rng.sample(StandardNormal)))
        .collect();

    let normal = Vector3::new(0.0, 1.0, 0.0);
    let (t1, t2) = loop {
        let t1 = Vector3::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        let t2 = if pure_rotation {
            r2 * r1.transpose() * t1
        } else {
            Vector3::new(
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            )
        };
        let above = |r: &Matrix3<f64>, t: &Vector3<f64>| (-r.transpose() * t).y <= -0.2;
        let in_front =
            |r: &Matrix3<f64>, t: &Vector3<f64>| points.iter().all(|p| (r * p + t).z >= 0.1);
        if above(&r1, &t1) && above(&r2, &t2) && in_front(&r1, &t1) && in_front(&r2, &t2) {
            break (t1, t2);
        }
    };

    let d1 = (r1 * normal).dot(&t1);
    let t_rel = t2 - r2 * r1.transpose() * t1;
    let t_prime = a2.transpose() * t_rel / d1;
    let gt = GroundHomography::from_motion(theta, &t_prime);
    let gt_pose = ground_homography_to_pose(&gt).expect("constructed homography is normalized");

    let att1 = ImuAttitude::new(a1).unwrap();
    let att2 = ImuAttitude::new(a2).unwrap();
    let project = |r: &Matrix3<f64>, t: &Vector3<f64>, f: f64, p: &Vector3<f64>| {
        let ray = r * p + t;
        PixelPoint::new(f * ray.x / ray.z, f * ray.y / ray.z)
    };
    let correspondences = points
        .iter()
        .map(|p| {
            Correspondence::new(project(&r1, &t1, f1, p), project(&r2, &t2, f2, p), att1, att2)
        })
        .collect();

    FixedScene {
        correspondences,
        gt,
        gt_pose,
        focals: (f1, f2),
        attitudes: (att1, att2),
        rotations: (r1, r2),
        translations: (t1, t2),
        points,
    }
}

/// Relative residual of the full rectified constraint `y2 ∼ H_y y1` for
/// one correspondence under a candidate solution (cross-product norm,
/// scale free). Includes the component the solvers never enforce, so use
/// it for ground-truth quality checks, not for the defining-system
/// contract.
pub fn dlt_residual(sol: &groundhog::solvers::SolverSolution, c: &Correspondence) -> f64 {
    let f1 = sol.f1.value();
    let f2 = sol.f2.value();
    let y1 = c.attitudes.0.matrix().transpose()
        * Vector3::new(c.x1.u / f1, c.x1.v / f1, 1.0);
    let y2 = c.attitudes.1.matrix().transpose()
        * Vector3::new(c.x2.u / f2, c.x2.v / f2, 1.0);
    let hy1 = sol.h.matrix() * y1;
    y2.cross(&hy1).norm() / (y2.norm() * hy1.norm())
}

/// Relative residual of the *kept* DLT equations for one correspondence:
/// the u-equation is the y-component of `y2 × (H_y y1)` and the v-equation
/// is the x-component. The 2.5-point solvers withhold the v-equation of
/// their third correspondence (`with_v = false`), leaving it for the
/// robust-estimation consistency check.
pub fn kept_residual(
    sol: &groundhog::solvers::SolverSolution,
    c: &Correspondence,
    with_v: bool,
) -> f64 {
    let f1 = sol.f1.value();
    let f2 = sol.f2.value();
    let y1 = c.attitudes.0.matrix().transpose()
        * Vector3::new(c.x1.u / f1, c.x1.v / f1, 1.0);
    let y2 = c.attitudes.1.matrix().transpose()
        * Vector3::new(c.x2.u / f2, c.x2.v / f2, 1.0);
    let hy1 = sol.h.matrix() * y1;
    let cr = y2.cross(&hy1);
    let viol = if with_v { cr.xy().norm() } else { cr.y.abs() };
    viol / (y2.norm() * hy1.norm())
}
