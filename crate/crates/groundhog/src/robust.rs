//! Robust estimation: RANSAC over the minimal solvers.
//!
//! The 2.5-point solvers withhold one DLT equation of their third
//! correspondence; evaluating that spare equation on each candidate is far
//! cheaper than full scoring and rejects most wrong candidates up front
//! (the consistency check). Scoring uses the symmetric transfer error of
//! the induced pixel-space homography.
//!
//! Iterations draw from per-iteration sub-seeds derived from the config
//! seed, so the loop is deterministic and could be evaluated in any order
//! (or in parallel) without changing the selected model.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::geom::{pixel_homography_from_hy, rectify, Correspondence, Intrinsics};
use crate::solvers::{MinimalProblem, SolverOptions, SolverSolution};
use crate::util::mix_seed;

/// RANSAC parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacConfig {
    /// Iteration budget (≥ 1).
    pub max_iterations: usize,
    /// Inlier threshold τ on the symmetric transfer error, in pixels (> 0).
    pub threshold: f64,
    /// Consistency-check threshold κ on the withheld-equation residual, in
    /// pixels.
    pub consistency_threshold: f64,
    /// Early-stop confidence target (e.g. 0.999); `None` runs the full
    /// budget.
    pub confidence: Option<f64>,
    /// Seed for the deterministic sampling streams.
    pub seed: u64,
    /// Evaluate the spare-equation consistency check (2.5-point solvers
    /// only; no-op for the others).
    pub use_consistency_check: bool,
    /// Refit the homography on the final inlier set (focals fixed) and
    /// keep the refit when it scores at least as well.
    pub local_optimization: bool,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            threshold: 2.0,
            consistency_threshold: 20.0,
            confidence: None,
            seed: 0,
            use_consistency_check: true,
            local_optimization: false,
        }
    }
}

/// Outcome of a RANSAC run.
#[derive(Debug, Clone, PartialEq)]
pub struct RansacResult {
    /// The selected model.
    pub best: SolverSolution,
    /// Per-correspondence inlier flags under `best`.
    pub inlier_mask: Vec<bool>,
    /// Number of set flags in `inlier_mask`.
    pub inlier_count: usize,
    /// Iterations actually executed (≤ budget under early stop).
    pub iterations: usize,
    /// Iterations whose candidates never reached full scoring (consistency
    /// check rejected them all, or the sample was degenerate).
    pub skipped: usize,
    /// Total candidates that went through full scoring.
    pub candidates_scored: usize,
    /// Wall time of the whole run.
    pub wall_time: Duration,
}

impl RansacResult {
    /// Iterations that scored at least one candidate
    /// (`skipped + solved() = iterations`).
    pub fn solved(&self) -> usize {
        self.iterations - self.skipped
    }
}

/// Scores a candidate against all correspondences: a correspondence is an
/// inlier iff its symmetric transfer error under the induced pixel-space
/// homography is below `threshold` (pixels). Returns the mask and the
/// summed residual over inliers.
pub fn score_model(
    solution: &SolverSolution,
    correspondences: &[Correspondence],
    threshold: f64,
) -> (Vec<bool>, f64) {
    let mut mask = Vec::with_capacity(correspondences.len());
    let mut total = 0.0;
    for c in correspondences {
        match transfer_error(solution, c) {
            Some(e) if e < threshold => {
                mask.push(true);
                total += e;
            }
            _ => mask.push(false),
        }
    }
    (mask, total)
}

/// Symmetric transfer error (pixels) of one correspondence under a
/// candidate; `None` when the induced homography degenerates on it.
pub fn transfer_error(solution: &SolverSolution, c: &Correspondence) -> Option<f64> {
    let h = pixel_homography_from_hy(
        &solution.h.matrix(),
        &c.attitudes.0,
        &c.attitudes.1,
        solution.f1.value(),
        solution.f2.value(),
    );
    let h_inv = h.try_inverse()?;
    let fwd = h * c.x1.homogeneous();
    let bwd = h_inv * c.x2.homogeneous();
    if fwd.z.abs() < f64::MIN_POSITIVE || bwd.z.abs() < f64::MIN_POSITIVE {
        return None;
    }
    let d_fwd = ((fwd.x / fwd.z - c.x2.u).powi(2) + (fwd.y / fwd.z - c.x2.v).powi(2)).sqrt();
    let d_bwd = ((bwd.x / bwd.z - c.x1.u).powi(2) + (bwd.y / bwd.z - c.x1.v).powi(2)).sqrt();
    let e = d_fwd + d_bwd;
    e.is_finite().then_some(e)
}

/// Residual (pixels) of the DLT equation the 2.5-point solvers withheld:
/// the view-2 v-coordinate misfit of the third sample correspondence.
pub fn consistency_residual(solution: &SolverSolution, third: &Correspondence) -> Option<f64> {
    let h = pixel_homography_from_hy(
        &solution.h.matrix(),
        &third.attitudes.0,
        &third.attitudes.1,
        solution.f1.value(),
        solution.f2.value(),
    );
    let fwd = h * third.x1.homogeneous();
    if fwd.z.abs() < f64::MIN_POSITIVE {
        return None;
    }
    let r = (fwd.y / fwd.z - third.x2.v).abs();
    r.is_finite().then_some(r)
}

struct Best {
    solution: SolverSolution,
    mask: Vec<bool>,
    count: usize,
    residual: f64,
}

fn better(count: usize, residual: f64, best: &Option<Best>) -> bool {
    match best {
        None => count > 0,
        Some(b) => count > b.count || (count == b.count && residual < b.residual),
    }
}

/// Runs seeded RANSAC for `problem` over `correspondences`.
///
/// Deterministic for fixed `(data, config)`. Degenerate samples produce no
/// candidates and count as skipped iterations; if no candidate is ever
/// scored the run fails with a no-model error.
pub fn ransac(
    correspondences: &[Correspondence],
    problem: &MinimalProblem,
    config: &RansacConfig,
) -> Result<RansacResult> {
    let start = Instant::now();
    let n = correspondences.len();
    let k = problem.sample_size();
    if n < k {
        return Err(Error::InvalidInput(format!(
            "RANSAC needs at least {k} correspondences for solver {}, got {n}",
            problem.kind()
        )));
    }
    if !(config.threshold > 0.0) || config.max_iterations == 0 {
        return Err(Error::InvalidInput(
            "RANSAC config needs threshold > 0 and max_iterations ≥ 1".into(),
        ));
    }

    let opts = SolverOptions::default();
    let check = config.use_consistency_check && problem.has_consistency_check();
    let mut best: Option<Best> = None;
    let mut skipped = 0usize;
    let mut candidates_scored = 0usize;
    let mut executed = 0usize;
    let mut scratch: Vec<usize> = (0..n).collect();

    for iter in 0..config.max_iterations {
        executed = iter + 1;
        let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(config.seed, iter as u64));

        // Minimal sample without replacement (partial Fisher–Yates).
        for i in 0..k {
            let j = rng.random_range(i..n);
            scratch.swap(i, j);
        }
        let sample: Vec<Correspondence> = scratch[..k].iter().map(|&i| correspondences[i]).collect();

        let candidates = match problem.solve(&sample, &opts) {
            Ok(c) => c,
            Err(Error::DegenerateConfiguration(_)) | Err(Error::DegenerateScale) => Vec::new(),
            Err(e) => return Err(e),
        };

        let mut scored_any = false;
        for cand in &candidates {
            if check {
                match consistency_residual(cand, &sample[k - 1]) {
                    Some(r) if r <= config.consistency_threshold => {}
                    _ => continue,
                }
            }
            let (mask, residual) = score_model(cand, correspondences, config.threshold);
            candidates_scored += 1;
            scored_any = true;
            let count = mask.iter().filter(|m| **m).count();
            if better(count, residual, &best) {
                best = Some(Best { solution: *cand, mask, count, residual });
            }
        }
        if !scored_any {
            skipped += 1;
        }

        if let (Some(conf), Some(b)) = (config.confidence, best.as_ref()) {
            let w = b.count as f64 / n as f64;
            let p_fail = 1.0 - w.powi(k as i32);
            if p_fail <= 0.0 {
                break;
            }
            let needed = ((1.0 - conf).ln() / p_fail.ln()).ceil();
            if needed.is_finite() && (executed as f64) >= needed {
                break;
            }
        }
    }

    let Some(mut b) = best else {
        return Err(Error::NoModel(format!(
            "no candidate survived to scoring in {executed} iterations"
        )));
    };

    if config.local_optimization {
        // Iterate refit-and-rescore until the inlier set stabilizes: the
        // first refit usually grows the set, and the next pass gets to fit
        // on the grown set. The cap keeps the tail bounded.
        for _ in 0..8 {
            let Some(refit) = refit_on_inliers(&b.solution, correspondences, &b.mask) else {
                break;
            };
            let (mask, residual) = score_model(&refit, correspondences, config.threshold);
            let count = mask.iter().filter(|m| **m).count();
            if count > b.count || (count == b.count && residual < b.residual) {
                b = Best { solution: refit, mask, count, residual };
            } else {
                break;
            }
        }
    }

    Ok(RansacResult {
        best: b.solution,
        inlier_mask: b.mask,
        inlier_count: b.count,
        iterations: executed,
        skipped,
        candidates_scored,
        wall_time: start.elapsed(),
    })
}

/// Least-squares refit of the restricted homography on the inlier set with
/// the candidate's focal lengths held fixed; `None` when the stack is
/// degenerate.
fn refit_on_inliers(
    solution: &SolverSolution,
    correspondences: &[Correspondence],
    mask: &[bool],
) -> Option<SolverSolution> {
    let intr1 = Intrinsics::new(solution.f1.value()).ok()?;
    let intr2 = Intrinsics::new(solution.f2.value()).ok()?;
    let inliers: Vec<&Correspondence> = correspondences
        .iter()
        .zip(mask.iter())
        .filter_map(|(c, m)| m.then_some(c))
        .collect();
    if inliers.len() < 3 {
        return None;
    }
    let mut a = DMatrix::zeros(2 * inliers.len(), 5);
    for (i, c) in inliers.iter().enumerate() {
        let y1 = rectify(&c.x1, &c.attitudes.0, &intr1).ok()?.y;
        let y2 = rectify(&c.x2, &c.attitudes.1, &intr2).ok()?.y;
        let (ru, rv) = crate::solvers::dlt_rows(&y1, &y2);
        a.row_mut(2 * i).copy_from(&ru.transpose());
        a.row_mut(2 * i + 1).copy_from(&rv.transpose());
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.as_ref()?;
    let row = v_t.row(v_t.nrows() - 1);
    let (pos, neg) =
        crate::geom::normalize_ground_homography(&[row[0], row[1], row[2], row[3], row[4]]).ok()?;
    let h = if pos.h4 >= 0.0 { pos } else { neg };
    Some(SolverSolution { h, f1: solution.f1, f2: solution.f2 })
}

/// Predicted view-2 pixel of `x1` under a candidate (used by diagnostics
/// and tests).
pub fn predict_second_view(solution: &SolverSolution, c: &Correspondence) -> Option<Vector3<f64>> {
    let h = pixel_homography_from_hy(
        &solution.h.matrix(),
        &c.attitudes.0,
        &c.attitudes.1,
        solution.f1.value(),
        solution.f2.value(),
    );
    let fwd = h * c.x1.homogeneous();
    (fwd.z.abs() >= f64::MIN_POSITIVE).then(|| Vector3::new(fwd.x / fwd.z, fwd.y / fwd.z, 1.0))
}
