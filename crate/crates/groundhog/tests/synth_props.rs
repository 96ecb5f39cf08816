//! Property checks for the synthetic-instance generator: ground-truth
//! consistency, noise statistics, outlier construction, and the benchmark
//! workload shape.

mod common;

use groundhog::geom::pixel_homography_from_hy;
use groundhog::synth::{
    generate_instance, perturb, scramble, FocalMode, ProblemInstance, SynthConfig,
};
use nalgebra::{Matrix3, Vector3};

/// Clean reprojection of instance point `i` into both views, bypassing
/// the stored (possibly noisy) correspondences.
fn clean_pixels(inst: &ProblemInstance, i: usize) -> ([f64; 2], [f64; 2]) {
    let (f1, f2) = inst.focals();
    let proj = |r: &Matrix3<f64>, t: &Vector3<f64>, f: f64| {
        let ray = r * inst.points[i] + t;
        [f * ray.x / ray.z, f * ray.y / ray.z]
    };
    (
        proj(&inst.rotations.0, &inst.translations.0, f1),
        proj(&inst.rotations.1, &inst.translations.1, f2),
    )
}

/// Symmetric pixel transfer residual of `(x1, x2)` under the instance's
/// ground-truth pixel homography, computed from scratch.
fn gt_transfer_residual(inst: &ProblemInstance, x1: [f64; 2], x2: [f64; 2]) -> f64 {
    let (f1, f2) = inst.focals();
    let h = pixel_homography_from_hy(
        &inst.gt_homography.matrix(),
        &inst.attitudes.0,
        &inst.attitudes.1,
        f1,
        f2,
    );
    let h_inv = h.try_inverse().expect("ground-truth homography is invertible");
    let fwd = h * Vector3::new(x1[0], x1[1], 1.0);
    let bwd = h_inv * Vector3::new(x2[0], x2[1], 1.0);
    let d = |p: Vector3<f64>, q: [f64; 2]| {
        ((p.x / p.z - q[0]).powi(2) + (p.y / p.z - q[1]).powi(2)).sqrt()
    };
    d(fwd, x2) + d(bwd, x1)
}

#[test]
fn noise_free_planar_points_satisfy_ground_truth_exactly() {
    for seed in 0..20 {
        let cfg = SynthConfig { n_planar: 40, n_nonplanar: 10, sigma: 0.0, outlier_fraction: 0.0, focal_mode: FocalMode::FHf };
        let inst = match generate_instance(seed, &cfg) {
            Ok(i) => i,
            Err(_) => continue,
        };
        for (i, c) in inst.correspondences.iter().enumerate() {
            let r = gt_transfer_residual(&inst, [c.x1.u, c.x1.v], [c.x2.u, c.x2.v]);
            if inst.planar_mask[i] {
                assert!(r < 1e-9, "seed {seed} planar point {i}: residual {r:.3e} px");
            } else {
                assert!(r > 1e-3, "seed {seed} distractor {i}: residual {r:.3e} px too small");
            }
        }
    }
}

#[test]
fn distractors_clear_the_outlier_threshold_with_margin() {
    // Fig.-4-style workload: non-planar points must stay structured
    // distractors — their *clean* residual against the ground-truth
    // homography exceeds 10σ + 2 px, so no noise draw can turn them into
    // accidental inliers.
    let sigma = 0.5;
    for seed in 0..10 {
        let inst = match generate_instance(seed, &SynthConfig::ransac_benchmark(FocalMode::FHf, sigma)) {
            Ok(i) => i,
            Err(_) => continue,
        };
        let floor = 10.0 * sigma + 2.0;
        for i in 0..inst.points.len() {
            if inst.planar_mask[i] {
                continue;
            }
            let (x1, x2) = clean_pixels(&inst, i);
            let r = gt_transfer_residual(&inst, x1, x2);
            assert!(r > floor, "seed {seed} distractor {i}: clean residual {r:.3} ≤ {floor}");
        }
    }
}

#[test]
fn perturb_matches_requested_noise_statistics() {
    let cfg = SynthConfig { n_planar: 2000, n_nonplanar: 0, sigma: 0.0, outlier_fraction: 0.0, focal_mode: FocalMode::FHf };
    let clean = generate_instance(3, &cfg).unwrap();
    let sigma = 1.5;
    let noisy = perturb(&clean, sigma).unwrap();

    let mut deltas = Vec::new();
    for (a, b) in clean.correspondences.iter().zip(noisy.correspondences.iter()) {
        deltas.extend_from_slice(&[b.x1.u - a.x1.u, b.x1.v - a.x1.v, b.x2.u - a.x2.u, b.x2.v - a.x2.v]);
    }
    let n = deltas.len() as f64;
    let mean = deltas.iter().sum::<f64>() / n;
    let var = deltas.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0);
    assert!(mean.abs() < 0.1, "noise mean {mean:.3} not ≈ 0");
    assert!(
        (var.sqrt() - sigma).abs() / sigma < 0.05,
        "noise std {:.3} not ≈ {sigma}",
        var.sqrt()
    );
    assert_eq!(noisy.sigma, sigma);

    // Ground truth is untouched by noise.
    assert_eq!(noisy.gt_homography, clean.gt_homography);
    assert_eq!(noisy.points, clean.points);
}

#[test]
fn repeated_perturbation_is_deterministic_and_accumulates_in_quadrature() {
    let cfg = SynthConfig { n_planar: 20, n_nonplanar: 0, sigma: 0.0, outlier_fraction: 0.0, focal_mode: FocalMode::Hf };
    let clean = generate_instance(11, &cfg).unwrap();

    let a = perturb(&clean, 1.5).unwrap();
    let b = perturb(&clean, 1.5).unwrap();
    assert_eq!(a, b, "same input and sigma must reproduce identical noise");

    let twice = perturb(&a, 2.0).unwrap();
    assert!((twice.sigma - 1.5f64.hypot(2.0)).abs() < 1e-15, "total σ combines in quadrature");
    // The second application draws fresh noise, not the same stream again.
    assert_ne!(twice.correspondences[0].x1.u, a.correspondences[0].x1.u);

    // σ = 0 is the identity.
    let same = perturb(&clean, 0.0).unwrap();
    assert_eq!(same, clean);
}

#[test]
fn scramble_builds_a_derangement_of_the_chosen_set() {
    let cfg = SynthConfig { n_planar: 100, n_nonplanar: 30, sigma: 0.0, outlier_fraction: 0.0, focal_mode: FocalMode::FHf };
    let clean = generate_instance(7, &cfg).unwrap();
    let out = scramble(&clean, 0.2).unwrap();

    let n = clean.correspondences.len();
    let k = out.outlier_mask.iter().filter(|m| **m).count();
    assert_eq!(n, 130);
    assert_eq!(k, 26, "20% of 130 correspondences scrambled");

    let chosen: Vec<usize> = (0..n).filter(|&i| out.outlier_mask[i]).collect();
    let originals: Vec<[f64; 2]> =
        chosen.iter().map(|&i| [clean.correspondences[i].x2.u, clean.correspondences[i].x2.v]).collect();
    let mut used = vec![false; chosen.len()];
    for &i in &chosen {
        let c = &out.correspondences[i];
        // View 1 pixels never move.
        assert_eq!(c.x1, clean.correspondences[i].x1);
        // View 2 pixel is some *other* chosen correspondence's original.
        let src = originals
            .iter()
            .position(|o| o[0] == c.x2.u && o[1] == c.x2.v)
            .expect("scrambled pixel must come from the chosen set");
        assert_ne!(chosen[src], i, "correspondence {i} kept its own match");
        assert!(!used[src], "pixel reused twice");
        used[src] = true;
    }
    // Unchosen correspondences are untouched.
    for i in 0..n {
        if !out.outlier_mask[i] {
            assert_eq!(out.correspondences[i], clean.correspondences[i]);
        }
    }
    // Mask bookkeeping: inliers = planar ∧ ¬outlier.
    let inliers = out.true_inlier_mask();
    for i in 0..n {
        assert_eq!(inliers[i], out.planar_mask[i] && !out.outlier_mask[i]);
    }

    // Zero fraction is the identity.
    let same = scramble(&clean, 0.0).unwrap();
    assert_eq!(same, clean);
}

#[test]
fn single_scrambled_correspondence_gets_a_bounded_uniform_draw() {
    let cfg = SynthConfig { n_planar: 50, n_nonplanar: 0, sigma: 0.0, outlier_fraction: 0.0, focal_mode: FocalMode::Calibrated };
    let clean = generate_instance(13, &cfg).unwrap();
    // 1/50 → k = 1: no derangement possible, fall back to a uniform draw
    // inside the view-2 bounding box.
    let out = scramble(&clean, 0.02).unwrap();
    let chosen: Vec<usize> = (0..50).filter(|&i| out.outlier_mask[i]).collect();
    assert_eq!(chosen.len(), 1);
    let i = chosen[0];
    let c = &out.correspondences[i];
    assert_ne!(c.x2, clean.correspondences[i].x2);
    let us: Vec<f64> = clean.correspondences.iter().map(|c| c.x2.u).collect();
    let vs: Vec<f64> = clean.correspondences.iter().map(|c| c.x2.v).collect();
    let (ulo, uhi) = (us.iter().copied().fold(f64::INFINITY, f64::min), us.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    let (vlo, vhi) = (vs.iter().copied().fold(f64::INFINITY, f64::min), vs.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    assert!(c.x2.u >= ulo && c.x2.u <= uhi && c.x2.v >= vlo && c.x2.v <= vhi);
}

#[test]
fn generated_attitudes_are_yaw_free() {
    // The IMU attitude must equal the camera rotation with its yaw removed:
    // AᵀR is a rotation about +y (it fixes e_y exactly).
    let ey = Vector3::new(0.0, 1.0, 0.0);
    for seed in 0..100 {
        let inst = match generate_instance(seed, &SynthConfig::minimal(FocalMode::F1Hf2)) {
            Ok(i) => i,
            Err(_) => continue,
        };
        for (att, r) in [
            (&inst.attitudes.0, &inst.rotations.0),
            (&inst.attitudes.1, &inst.rotations.1),
        ] {
            let m = att.matrix().transpose() * r;
            assert!((m * ey - ey).norm() < 1e-12, "seed {seed}: residual yaw-frame tilt");
            assert!((m.transpose() * m - Matrix3::identity()).norm() < 1e-12);
            // Zero rotation of the y-axis means the only freedom left is
            // yaw; the (x, z) block must be a plane rotation.
            assert!((m[(0, 0)] - m[(2, 2)]).abs() < 1e-12);
            assert!((m[(0, 2)] + m[(2, 0)]).abs() < 1e-12);
        }
    }
}

#[test]
fn benchmark_workload_has_the_documented_shape() {
    let inst = generate_instance(0, &SynthConfig::ransac_benchmark(FocalMode::FHf, 0.5)).unwrap();
    assert_eq!(inst.correspondences.len(), 130);
    assert_eq!(inst.planar_mask.iter().filter(|p| **p).count(), 100);
    assert_eq!(inst.planar_mask.iter().filter(|p| !**p).count(), 30);
    assert_eq!(inst.outlier_mask.iter().filter(|m| **m).count(), 26);
    assert_eq!(inst.sigma, 0.5);
    // Cameras sit above the floor on the negative-y side; the plane offset
    // along gravity is positive for both views, making h4 = d2/d1 > 0.
    let c1 = -inst.rotations.0.transpose() * inst.translations.0;
    let c2 = -inst.rotations.1.transpose() * inst.translations.1;
    assert!(c1.y <= -0.2 && c2.y <= -0.2);
    assert!(inst.gt_homography.h4 > 0.0);
}

#[test]
fn generation_is_deterministic() {
    let cfg = SynthConfig::ransac_benchmark(FocalMode::Hf, 1.0);
    let a = generate_instance(99, &cfg).unwrap();
    let b = generate_instance(99, &cfg).unwrap();
    assert_eq!(a, b);
    let c = generate_instance(100, &cfg).unwrap();
    assert_ne!(a.correspondences[0].x1, c.correspondences[0].x1);
}
