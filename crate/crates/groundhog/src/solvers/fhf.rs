//! Shared-focal 2.5-point solver (fHf).
//!
//! Both views share one unknown focal length `f`. Writing the rectified
//! ray of a pixel `(u, v)` as `y(w) = Rᵀ(u, v, 0) + w·Rᵀe3` with `w` the
//! normalized focal, each retained DLT equation is a 5-vector row over
//! `(h1..h5)` with entries quadratic in `w`. Stacking the five retained
//! rows gives `M(w)·h = 0` with `M(w) = M0 + w·M1 + w²·M2`; feasible
//! focals are the real roots of `det M(w)`, which has structural degree 7
//! (the leading three coefficients of the formal degree-10 expansion
//! vanish identically). Each root contributes one candidate after the
//! trigonometric normalization collapses the ± pair by cheirality.

use nalgebra::{Matrix5, Matrix6, Vector3, Vector5, Vector6};

use crate::error::Result;
use crate::geom::{Correspondence, ImuAttitude};
use crate::poly;

use super::{
    dedup_solutions, denormalize_solution, fit_poly, focal_in_range, normalize_inputs, z_rows,
    Focal, HRow, SolverOptions, SolverSolution,
};

/// Degree-7 determinant polynomial needs 8 interpolation nodes.
const DET_DEGREE: usize = 7;
/// Chebyshev node radius in normalized-focal units.
const NODE_RADIUS: f64 = 2.0;
/// Residual tolerance handed to the root finder.
const ROOT_TOL: f64 = 1e-6;
/// Candidates must satisfy the kept equations of their defining system to
/// this relative tolerance; worse ones are root-finding artifacts (e.g. a
/// near-zero determinant whose null vector maps a sampled ray almost to
/// zero instead of onto its correspondence).
pub(crate) const SYSTEM_RESIDUAL_TOL: f64 = 1e-6;

/// The focal-independent (`a`) and focal-proportional (`b`) parts of a
/// rectified ray `y(w) = a + w·b`.
pub(crate) fn ray_parts(u: f64, v: f64, att: &ImuAttitude) -> (Vector3<f64>, Vector3<f64>) {
    let r = att.matrix();
    (r.transpose() * Vector3::new(u, v, 0.0), r.row(2).transpose())
}

/// Coefficients over `w^0, w^1, w^2` of the u- and v-rows of one
/// correspondence when both rays depend on the same `w`.
fn w_rows(c: &Correspondence) -> ([HRow; 3], [HRow; 3]) {
    let (a1, b1) = ray_parts(c.x1.u, c.x1.v, &c.attitudes.0);
    let (a2, b2) = ray_parts(c.x2.u, c.x2.v, &c.attitudes.1);
    let za = z_rows(&a1);
    let zb = z_rows(&b1);
    let u = [
        za[0] * a2.z - za[2] * a2.x,
        zb[0] * a2.z + za[0] * b2.z - zb[2] * a2.x - za[2] * b2.x,
        zb[0] * b2.z - zb[2] * b2.x,
    ];
    let v = [
        za[2] * a2.y - za[1] * a2.z,
        zb[2] * a2.y + za[2] * b2.y - zb[1] * a2.z - za[1] * b2.z,
        zb[2] * b2.y - zb[1] * b2.z,
    ];
    (u, v)
}

/// Evaluates `Σ w^k·M_k`.
#[inline]
pub(crate) fn eval_m(mats: &[Matrix5<f64>], w: f64) -> Matrix5<f64> {
    let mut m = mats[mats.len() - 1];
    for k in (0..mats.len() - 1).rev() {
        m = m * w + mats[k];
    }
    m
}

/// Joint Newton refinement of `(h, w)` on the square system
/// `[M(w)·h ; h1² + h2² − 1] = 0`. Steps that do not reduce the residual
/// are rejected; `h` stays approximately trig-normalized throughout.
pub(crate) fn polish_hw(mats: &[Matrix5<f64>], h: &mut Vector5<f64>, w: &mut f64, iters: usize) {
    let residual = |h: &Vector5<f64>, w: f64| -> Vector6<f64> {
        let top = eval_m(mats, w) * h;
        let mut r = Vector6::zeros();
        r.fixed_rows_mut::<5>(0).copy_from(&top);
        r[5] = h[0] * h[0] + h[1] * h[1] - 1.0;
        r
    };
    for _ in 0..iters {
        let r = residual(h, *w);
        let m = eval_m(mats, *w);
        let mut dm = Matrix5::zeros();
        for (k, mk) in mats.iter().enumerate().skip(1) {
            dm += mk * (k as f64 * w.powi(k as i32 - 1));
        }
        let dw_col = dm * *h;
        let mut j = Matrix6::zeros();
        j.fixed_view_mut::<5, 5>(0, 0).copy_from(&m);
        j.fixed_view_mut::<5, 1>(0, 5).copy_from(&dw_col);
        j[(5, 0)] = 2.0 * h[0];
        j[(5, 1)] = 2.0 * h[1];
        let Some(step) = j.lu().solve(&r) else { return };
        let h_new = *h - step.fixed_rows::<5>(0);
        let w_new = *w - step[5];
        if residual(&h_new, w_new).norm() < r.norm() {
            *h = h_new;
            *w = w_new;
        } else {
            return;
        }
    }
}

/// Extracts the trig-normalized, cheirality-positive homography from the
/// nullspace of `M(w)` at a determinant root; `None` when the scale
/// degenerates.
pub(crate) fn h_from_root(m: &Matrix5<f64>) -> Option<Vector5<f64>> {
    let svd = m.svd(false, true);
    let v_t = svd.v_t.as_ref()?;
    let raw = v_t.row(4);
    let params = [raw[0], raw[1], raw[2], raw[3], raw[4]];
    let (pos, neg) = crate::geom::normalize_ground_homography(&params).ok()?;
    let pick = if pos.h4 >= 0.0 { pos } else { neg };
    Some(Vector5::from_column_slice(&pick.params()))
}

/// Worst relative violation of the *kept* equations over a sample. The
/// retained u- and v-rows are the y- and x-components of `y2 × (Hy·y1)`,
/// so the natural relative scale is `‖y2‖·‖Hy·y1‖`; normalizing by the
/// row-coefficient norms instead would let candidates whose `Hy` nearly
/// annihilates a sampled ray slip through. The third correspondence only
/// contributes its u-equation (the v-equation is the withheld consistency
/// check), so only the y-component is enforced there.
pub(crate) fn kept_equation_residual(
    hy: &nalgebra::Matrix3<f64>,
    rays: &[(Vector3<f64>, Vector3<f64>)],
) -> f64 {
    let mut worst = 0.0_f64;
    for (i, (y1, y2)) in rays.iter().enumerate() {
        let b = hy * y1;
        let c = y2.cross(&b);
        let denom = (y2.norm() * b.norm()).max(f64::MIN_POSITIVE);
        let viol = if i < 2 { c.xy().norm() } else { c.y.abs() };
        worst = worst.max(viol / denom);
    }
    worst
}

/// Solves the shared-focal 2.5-point problem with default options.
pub fn solve_fhf_2_5pt(
    c1: &Correspondence,
    c2: &Correspondence,
    c3: &Correspondence,
) -> Result<Vec<SolverSolution>> {
    solve_fhf_2_5pt_with(c1, c2, c3, &SolverOptions::default())
}

/// Solves the shared-focal 2.5-point problem (at most 7 candidates).
pub fn solve_fhf_2_5pt_with(
    c1: &Correspondence,
    c2: &Correspondence,
    c3: &Correspondence,
    opts: &SolverOptions,
) -> Result<Vec<SolverSolution>> {
    for c in [c1, c2, c3] {
        if !c.x1.is_finite() || !c.x2.is_finite() {
            return Err(crate::error::Error::InvalidInput(
                "correspondence contains non-finite pixel coordinates".into(),
            ));
        }
    }
    let (sample, state) = if opts.normalize {
        normalize_inputs(&[*c1, *c2, *c3])
    } else {
        (vec![*c1, *c2, *c3], super::NormalizationState { scale: 1.0 })
    };

    // Row layout is [u1, v1, u2, v2, u3]: the v-row of the third
    // correspondence is withheld as the consistency check.
    let mut mats = [Matrix5::<f64>::zeros(); 3];
    for (i, c) in sample.iter().enumerate() {
        let (u, v) = w_rows(c);
        for k in 0..3 {
            mats[k].row_mut(2 * i).copy_from(&u[k].transpose());
            if i < 2 {
                mats[k].row_mut(2 * i + 1).copy_from(&v[k].transpose());
            }
        }
    }

    let coeffs = fit_poly(DET_DEGREE, NODE_RADIUS, |w| eval_m(&mats, w).determinant())?;
    // Degenerate data (e.g. pure rotation, where the focal is unobservable)
    // collapses the determinant polynomial; emit no candidates rather than
    // aborting a robust-estimation loop.
    if !coeffs.iter().all(|c| c.is_finite()) {
        return Ok(Vec::new());
    }
    let roots = poly::real_roots_via_companion(&coeffs, ROOT_TOL).unwrap_or_default();

    let parts: Vec<_> = sample
        .iter()
        .map(|c| {
            (
                ray_parts(c.x1.u, c.x1.v, &c.attitudes.0),
                ray_parts(c.x2.u, c.x2.v, &c.attitudes.1),
            )
        })
        .collect();

    let mut sols = Vec::new();
    for w in roots {
        if !focal_in_range(w) {
            continue;
        }
        let m = eval_m(&mats, w);
        let Some(mut h) = h_from_root(&m) else { continue };
        let mut w_ref = w;
        polish_hw(&mats, &mut h, &mut w_ref, 4);
        let params = [h[0], h[1], h[2], h[3], h[4]];
        let Ok((pos, neg)) = crate::geom::normalize_ground_homography(&params) else { continue };
        let picked = if pos.h4 >= 0.0 { pos } else { neg };
        if !focal_in_range(w_ref) {
            continue;
        }
        // Drop root-finding artifacts: a true solution satisfies its kept
        // equations exactly (even on noisy data the sampled system is
        // exact), so anything still violating them after polishing is
        // spurious.
        let rays: Vec<_> = parts
            .iter()
            .map(|((a1, b1), (a2, b2))| (a1 + b1 * w_ref, a2 + b2 * w_ref))
            .collect();
        if kept_equation_residual(&picked.matrix(), &rays) > SYSTEM_RESIDUAL_TOL {
            continue;
        }
        let sol = SolverSolution {
            h: picked,
            f1: Focal::Estimated(w_ref),
            f2: Focal::Estimated(w_ref),
        };
        sols.push(denormalize_solution(&sol, &state));
    }
    dedup_solutions(&mut sols);
    Ok(sols)
}
