//! Accuracy metrics and the three benchmark harnesses
//! (numerical stability, noise response, speed).

use std::time::Instant;

use nalgebra::{Matrix3, Vector3};

use crate::csvio::{fmt_f64, fmt_opt, CsvTable};
use crate::error::{Error, Result};
use crate::geom::{ground_homography_to_pose, GroundHomography, RelativePose, ZERO_TRANSLATION_TOL};
use crate::solvers::{SolverKind, SolverOptions, SolverSolution};
use crate::synth::{generate_instance, FocalMode, ProblemInstance, SynthConfig};
use crate::util::mix_seed;

/// log₁₀ values in reports are clamped to ±this (an exactly-zero error
/// would otherwise be −∞).
pub const LOG10_CLAMP: f64 = 18.0;

/// Attempts at regenerating an instance when a draw fails its invariants.
const GENERATION_ATTEMPTS: u64 = 100;

/// Error of one candidate against ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseErrors {
    /// Rotation error, radians: `arccos((tr(R_gtᵀ R_est) − 1) / 2)`.
    pub e_r: f64,
    /// Angle between translation directions, radians; `None` when either
    /// translation is zero (the direction does not exist).
    pub e_t: Option<f64>,
    /// Worst relative focal error `|f_gt − f_est| / f_gt` over the focals
    /// the solver estimated; 0 when it estimated none.
    pub e_f: f64,
    /// Max-abs difference of the homography parameters after both are
    /// scaled to a unit last matrix entry; `None` when that entry is
    /// (numerically) zero on either side.
    pub homography: Option<f64>,
}

/// Angle between two rotations, radians in `[0, π]`.
pub fn rotation_angle(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    (((a.transpose() * b).trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
}

/// Angle between two directions, radians; `None` if either is (near) zero.
pub fn direction_angle(a: &Vector3<f64>, b: &Vector3<f64>) -> Option<f64> {
    let (na, nb) = (a.norm(), b.norm());
    if na < ZERO_TRANSLATION_TOL || nb < ZERO_TRANSLATION_TOL {
        return None;
    }
    Some((a.dot(b) / (na * nb)).clamp(-1.0, 1.0).acos())
}

/// Relative focal error `|f_gt − f_est| / f_gt`.
pub fn relative_focal_error(f_gt: f64, f_est: f64) -> f64 {
    (f_gt - f_est).abs() / f_gt
}

/// Scale-free homography discrepancy: both parameter vectors are divided
/// by their last matrix entry (`h1`), then compared by max-abs difference.
pub fn homography_error(gt: &GroundHomography, est: &GroundHomography) -> Option<f64> {
    if gt.h1.abs() < 1e-12 || est.h1.abs() < 1e-12 {
        return None;
    }
    let d = (gt.matrix() / gt.h1 - est.matrix() / est.h1).abs().max();
    d.is_finite().then_some(d)
}

/// Compares a candidate against a ground-truth pose and focals. The
/// homography field is left `None`; use [`instance_errors`] when the
/// ground-truth homography is at hand.
pub fn pose_errors(
    gt_pose: &RelativePose,
    gt_focals: (f64, f64),
    sol: &SolverSolution,
) -> Result<PoseErrors> {
    let est = ground_homography_to_pose(&sol.h)?;
    let mut e_f: f64 = 0.0;
    if sol.f1.is_estimated() {
        e_f = e_f.max(relative_focal_error(gt_focals.0, sol.f1.value()));
    }
    if sol.f2.is_estimated() {
        e_f = e_f.max(relative_focal_error(gt_focals.1, sol.f2.value()));
    }
    Ok(PoseErrors {
        e_r: rotation_angle(&gt_pose.r, &est.r),
        e_t: direction_angle(&gt_pose.t, &est.t),
        e_f,
        homography: None,
    })
}

/// [`pose_errors`] against a synthetic instance, with the homography
/// discrepancy filled in.
pub fn instance_errors(instance: &ProblemInstance, sol: &SolverSolution) -> Result<PoseErrors> {
    let mut e = pose_errors(&instance.gt_pose, instance.focals(), sol)?;
    e.homography = homography_error(&instance.gt_homography, &sol.h);
    Ok(e)
}

/// `p`-th percentile (0–100) by linear interpolation on a sorted slice.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty slice");
    let rank = (p / 100.0) * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    percentile(values, 50.0)
}

fn log10_clamped(v: f64) -> f64 {
    if v <= 0.0 {
        -LOG10_CLAMP
    } else {
        v.log10().clamp(-LOG10_CLAMP, LOG10_CLAMP)
    }
}

/// Generates a minimal-sample instance, retrying (with fresh sub-seeds) the
/// rare draws that violate the generation invariants.
fn generate_retrying(base_seed: u64, index: u64, config: &SynthConfig) -> Result<ProblemInstance> {
    let item_seed = mix_seed(base_seed, index);
    for attempt in 0..GENERATION_ATTEMPTS {
        match generate_instance(mix_seed(item_seed, attempt), config) {
            Ok(inst) => return Ok(inst),
            Err(Error::GenerationFailure(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::GenerationFailure(format!(
        "instance {index} failed {GENERATION_ATTEMPTS} generation attempts"
    )))
}

/// Candidate closest to the ground truth by homography discrepancy (ties
/// and incomparable candidates fall back to rotation error).
pub fn closest_candidate<'a>(
    instance: &ProblemInstance,
    candidates: &'a [SolverSolution],
) -> Option<(&'a SolverSolution, PoseErrors)> {
    let mut best: Option<(&SolverSolution, PoseErrors, f64)> = None;
    for cand in candidates {
        let Ok(errs) = instance_errors(instance, cand) else { continue };
        let key = errs.homography.unwrap_or(f64::INFINITY).min(1e30) + errs.e_r;
        if best.as_ref().is_none_or(|(_, _, k)| key < *k) {
            best = Some((cand, errs, key));
        }
    }
    best.map(|(c, e, _)| (c, e))
}

/// One noise-free solve in a stability run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityRecord {
    /// Instance seed (echoed into the CSV for reproduction).
    pub seed: u64,
    /// log₁₀ of the homography discrepancy of the best candidate; clamped,
    /// `+LOG10_CLAMP` when no candidate was usable.
    pub log10_h: f64,
    /// log₁₀ of the focal error of the same candidate (clamped; solvers
    /// with no estimated focal report `−LOG10_CLAMP`).
    pub log10_f: f64,
}

/// Aggregate of a stability run.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    /// Solver under test.
    pub solver: SolverKind,
    /// Base seed of the run.
    pub base_seed: u64,
    /// Per-instance records.
    pub records: Vec<StabilityRecord>,
    /// Fraction of instances with `log10_h < −3` (solution "found").
    pub found_fraction: f64,
    /// Median of `log10_h`.
    pub median_log10_h: f64,
    /// 99th percentile of `log10_h`.
    pub p99_log10_h: f64,
}

/// Solves `n` noise-free minimal instances and reports the log₁₀ error
/// distribution (the numerical-stability histogram).
pub fn stability_histogram(kind: SolverKind, n: usize, seed: u64) -> Result<StabilityReport> {
    if n == 0 {
        return Err(Error::InvalidInput("stability run needs n ≥ 1".into()));
    }
    let config = SynthConfig::minimal(FocalMode::for_solver(kind));
    let opts = SolverOptions::default();
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let inst = generate_retrying(seed, i as u64, &config)?;
        let problem = inst.minimal_problem();
        let sample = &inst.correspondences[..problem.sample_size()];
        let candidates = problem.solve(sample, &opts)?;
        let (log10_h, log10_f) = match closest_candidate(&inst, &candidates) {
            Some((_, errs)) => (
                log10_clamped(errs.homography.unwrap_or(f64::INFINITY)),
                log10_clamped(errs.e_f),
            ),
            None => (LOG10_CLAMP, LOG10_CLAMP),
        };
        records.push(StabilityRecord { seed: inst.seed, log10_h, log10_f });
    }
    let mut hs: Vec<f64> = records.iter().map(|r| r.log10_h).collect();
    hs.sort_by(|a, b| a.total_cmp(b));
    let found = records.iter().filter(|r| r.log10_h < -3.0).count();
    Ok(StabilityReport {
        solver: kind,
        base_seed: seed,
        found_fraction: found as f64 / n as f64,
        median_log10_h: percentile(&hs, 50.0),
        p99_log10_h: percentile(&hs, 99.0),
        records,
    })
}

impl StabilityReport {
    /// CSV artifact with one row per instance.
    pub fn table(&self) -> CsvTable {
        let mut t = CsvTable::new("stability", &["solver", "seed", "log10_h_err", "log10_f_err"])
            .expect("static schema is valid");
        for r in &self.records {
            t.push_row(vec![
                self.solver.id().into(),
                r.seed.to_string(),
                fmt_f64(r.log10_h),
                fmt_f64(r.log10_f),
            ])
            .expect("numeric fields never need quoting");
        }
        t
    }
}

/// One instance solved at one noise level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseRecord {
    /// Noise standard deviation (pixels).
    pub sigma: f64,
    /// Instance seed.
    pub seed: u64,
    /// Errors of the candidate closest to ground truth; solver failures
    /// are recorded as the worst-case `(π, π, 1)`.
    pub errors: PoseErrors,
}

/// Median errors at one noise level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseLevelSummary {
    /// Noise standard deviation (pixels).
    pub sigma: f64,
    /// Instances at this level.
    pub n: usize,
    /// Median rotation error (radians).
    pub median_e_r: f64,
    /// Median translation direction error (radians).
    pub median_e_t: f64,
    /// Median relative focal error.
    pub median_e_f: f64,
}

/// Aggregate of a noise sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSweepReport {
    /// Solver under test.
    pub solver: SolverKind,
    /// Base seed of the run.
    pub base_seed: u64,
    /// Per-instance records, grouped by level in grid order.
    pub records: Vec<NoiseRecord>,
    /// Per-level medians, in grid order.
    pub levels: Vec<NoiseLevelSummary>,
}

/// Solves `n_per_level` minimal instances at every noise level of `grid`
/// and reports per-level median pose errors.
pub fn noise_sweep(
    kind: SolverKind,
    grid: &[f64],
    n_per_level: usize,
    seed: u64,
) -> Result<NoiseSweepReport> {
    if grid.is_empty() || n_per_level == 0 {
        return Err(Error::InvalidInput("noise sweep needs a non-empty grid and n ≥ 1".into()));
    }
    for &sigma in grid {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidInput(format!("noise level {sigma} must be finite and ≥ 0")));
        }
    }
    let opts = SolverOptions::default();
    let mut records = Vec::with_capacity(grid.len() * n_per_level);
    let mut levels = Vec::with_capacity(grid.len());
    for (li, &sigma) in grid.iter().enumerate() {
        let config = SynthConfig { sigma, ..SynthConfig::minimal(FocalMode::for_solver(kind)) };
        let mut ers = Vec::with_capacity(n_per_level);
        let mut ets = Vec::with_capacity(n_per_level);
        let mut efs = Vec::with_capacity(n_per_level);
        for i in 0..n_per_level {
            let index = (li * n_per_level + i) as u64;
            let inst = generate_retrying(seed, index, &config)?;
            let problem = inst.minimal_problem();
            let sample = &inst.correspondences[..problem.sample_size()];
            let candidates = problem.solve(sample, &opts)?;
            let errors = match closest_candidate(&inst, &candidates) {
                Some((_, errs)) => errs,
                // A failed minimal solve counts as maximally wrong, so
                // failures push the medians up instead of vanishing.
                None => PoseErrors {
                    e_r: std::f64::consts::PI,
                    e_t: Some(std::f64::consts::PI),
                    e_f: 1.0,
                    homography: None,
                },
            };
            ers.push(errors.e_r);
            if let Some(et) = errors.e_t {
                ets.push(et);
            }
            efs.push(errors.e_f);
            records.push(NoiseRecord { sigma, seed: inst.seed, errors });
        }
        levels.push(NoiseLevelSummary {
            sigma,
            n: n_per_level,
            median_e_r: median(&mut ers),
            median_e_t: if ets.is_empty() { f64::NAN } else { median(&mut ets) },
            median_e_f: median(&mut efs),
        });
    }
    Ok(NoiseSweepReport { solver: kind, base_seed: seed, records, levels })
}

impl NoiseSweepReport {
    /// CSV artifact with one row per instance.
    pub fn table(&self) -> CsvTable {
        let mut t =
            CsvTable::new("noise", &["solver", "sigma", "seed", "e_r", "e_t", "e_f"])
                .expect("static schema is valid");
        for r in &self.records {
            t.push_row(vec![
                self.solver.id().into(),
                fmt_f64(r.sigma),
                r.seed.to_string(),
                fmt_f64(r.errors.e_r),
                fmt_opt(r.errors.e_t),
                fmt_f64(r.errors.e_f),
            ])
            .expect("numeric fields never need quoting");
        }
        t
    }

    /// CSV artifact with one row per noise level.
    pub fn summary_table(&self) -> CsvTable {
        let mut t = CsvTable::new(
            "noise-summary",
            &["solver", "sigma", "n", "median_e_r", "median_e_t", "median_e_f"],
        )
        .expect("static schema is valid");
        for l in &self.levels {
            t.push_row(vec![
                self.solver.id().into(),
                fmt_f64(l.sigma),
                l.n.to_string(),
                fmt_f64(l.median_e_r),
                fmt_f64(l.median_e_t),
                fmt_f64(l.median_e_f),
            ])
            .expect("numeric fields never need quoting");
        }
        t
    }
}

/// Timing summary of repeated minimal solves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedReport {
    /// Solver under test.
    pub solver: SolverKind,
    /// Timed calls.
    pub n: usize,
    /// Mean call time (µs).
    pub mean_us: f64,
    /// Median call time (µs).
    pub median_us: f64,
    /// 95th-percentile call time (µs).
    pub p95_us: f64,
}

/// Times `n` minimal solves on pre-generated noise-free instances.
///
/// Only the solver call is inside the timed region; generation and
/// bookkeeping are outside, and a short warm-up precedes the measurements.
pub fn speed_bench(kind: SolverKind, n: usize, seed: u64) -> Result<SpeedReport> {
    if n == 0 {
        return Err(Error::InvalidInput("speed bench needs n ≥ 1".into()));
    }
    let config = SynthConfig::minimal(FocalMode::for_solver(kind));
    let opts = SolverOptions::default();
    let mut work = Vec::with_capacity(n);
    for i in 0..n {
        let inst = generate_retrying(seed, i as u64, &config)?;
        let problem = inst.minimal_problem();
        let k = problem.sample_size();
        work.push((inst, problem, k));
    }
    for (inst, problem, k) in work.iter().take(20) {
        let _ = problem.solve(&inst.correspondences[..*k], &opts)?;
    }
    let mut times = Vec::with_capacity(n);
    for (inst, problem, k) in &work {
        let sample = &inst.correspondences[..*k];
        let start = Instant::now();
        let result = problem.solve(sample, &opts);
        let elapsed = start.elapsed();
        result?;
        times.push(elapsed.as_secs_f64() * 1e6);
    }
    times.sort_by(|a, b| a.total_cmp(b));
    Ok(SpeedReport {
        solver: kind,
        n,
        mean_us: times.iter().sum::<f64>() / n as f64,
        median_us: percentile(&times, 50.0),
        p95_us: percentile(&times, 95.0),
    })
}

impl SpeedReport {
    /// Single-row CSV artifact.
    pub fn table(&self, seed: u64) -> CsvTable {
        let mut t = CsvTable::new(
            "speed",
            &["solver", "seed", "n", "mean_us", "median_us", "p95_us"],
        )
        .expect("static schema is valid");
        t.push_row(vec![
            self.solver.id().into(),
            seed.to_string(),
            self.n.to_string(),
            fmt_f64(self.mean_us),
            fmt_f64(self.median_us),
            fmt_f64(self.p95_us),
        ])
        .expect("numeric fields never need quoting");
        t
    }
}
