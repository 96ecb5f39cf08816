//! Partially-calibrated 2.5-point solver (Hf).
//!
//! View 1 is calibrated; only the view-2 focal `f2` is unknown. The view-1
//! rays are fully rectified up front, so each retained DLT row is *linear*
//! in the normalized view-2 focal `w`: `M(w) = M0 + w·M1` and `det M(w)`
//! has structural degree 4 (the formal degree-5 coefficient vanishes
//! identically). The quartic is solved either in closed form or through a
//! 4×4 companion eigenvalue problem — the two back-ends agree to high
//! accuracy and serve as mutual checks.

use nalgebra::Matrix5;

use crate::error::Result;
use crate::geom::{rectify, Correspondence, Intrinsics};
use crate::poly::{self, Quartic};

use super::fhf::{
    eval_m, h_from_root, kept_equation_residual, polish_hw, ray_parts, SYSTEM_RESIDUAL_TOL,
};
use super::{
    dedup_solutions, denormalize_solution, dlt_rows, fit_poly, focal_in_range, normalize_inputs,
    z_rows, Focal, HfRootMethod, HRow, SolverOptions, SolverSolution,
};

/// Degree-4 determinant polynomial needs 5 interpolation nodes.
const DET_DEGREE: usize = 4;
/// Chebyshev node radius in normalized-focal units.
const NODE_RADIUS: f64 = 2.0;
/// Residual tolerance handed to the root finders.
const ROOT_TOL: f64 = 1e-6;

/// Coefficients over `w^0, w^1` of the u- and v-rows of one correspondence
/// whose view-1 ray `y1` is already fully rectified.
fn w_rows(c: &Correspondence, intr1: &Intrinsics) -> Result<([HRow; 2], [HRow; 2])> {
    let y1 = rectify(&c.x1, &c.attitudes.0, intr1)?.y;
    let (a2, b2) = ray_parts(c.x2.u, c.x2.v, &c.attitudes.1);
    let z = z_rows(&y1);
    let (u0, _) = dlt_rows(&y1, &a2);
    let u1 = z[0] * b2.z - z[2] * b2.x;
    let v0 = z[2] * a2.y - z[1] * a2.z;
    let v1 = z[2] * b2.y - z[1] * b2.z;
    Ok(([u0, u1], [v0, v1]))
}

/// Solves the partially-calibrated 2.5-point problem with default options.
pub fn solve_hf_2_5pt(
    c1: &Correspondence,
    c2: &Correspondence,
    c3: &Correspondence,
    intr1: &Intrinsics,
) -> Result<Vec<SolverSolution>> {
    solve_hf_2_5pt_with(c1, c2, c3, intr1, &SolverOptions::default())
}

/// Solves the partially-calibrated 2.5-point problem (at most 4 candidates).
pub fn solve_hf_2_5pt_with(
    c1: &Correspondence,
    c2: &Correspondence,
    c3: &Correspondence,
    intr1: &Intrinsics,
    opts: &SolverOptions,
) -> Result<Vec<SolverSolution>> {
    for c in [c1, c2, c3] {
        if !c.x1.is_finite() || !c.x2.is_finite() {
            return Err(crate::error::Error::InvalidInput(
                "correspondence contains non-finite pixel coordinates".into(),
            ));
        }
    }
    let (sample, state, intr1n) = if opts.normalize {
        let (sample, state) = normalize_inputs(&[*c1, *c2, *c3]);
        let intr1n = Intrinsics::new(intr1.focal() / state.scale)?;
        (sample, state, intr1n)
    } else {
        (vec![*c1, *c2, *c3], super::NormalizationState { scale: 1.0 }, *intr1)
    };

    // Row layout is [u1, v1, u2, v2, u3]: the v-row of the third
    // correspondence is withheld as the consistency check.
    let mut mats = [Matrix5::<f64>::zeros(); 2];
    for (i, c) in sample.iter().enumerate() {
        let (u, v) = w_rows(c, &intr1n)?;
        for k in 0..2 {
            mats[k].row_mut(2 * i).copy_from(&u[k].transpose());
            if i < 2 {
                mats[k].row_mut(2 * i + 1).copy_from(&v[k].transpose());
            }
        }
    }

    let coeffs = fit_poly(DET_DEGREE, NODE_RADIUS, |w| eval_m(&mats, w).determinant())?;
    // Degenerate data collapses the determinant polynomial; emit no
    // candidates rather than aborting a robust-estimation loop.
    if !coeffs.iter().all(|c| c.is_finite()) {
        return Ok(Vec::new());
    }
    let roots = match opts.hf_root_method {
        HfRootMethod::QuarticFormula => {
            let quartic = Quartic::new([coeffs[0], coeffs[1], coeffs[2], coeffs[3], coeffs[4]]);
            poly::real_roots_quartic(&quartic, ROOT_TOL).unwrap_or_default()
        }
        HfRootMethod::Eigen4 => poly::real_roots_via_companion(&coeffs, ROOT_TOL).unwrap_or_default(),
    };

    let mut parts = Vec::with_capacity(sample.len());
    for c in &sample {
        let y1 = rectify(&c.x1, &c.attitudes.0, &intr1n)?.y;
        parts.push((y1, ray_parts(c.x2.u, c.x2.v, &c.attitudes.1)));
    }

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
        // Same artifact filter as the shared-focal solver: survivors must
        // satisfy the kept equations they were built from.
        let rays: Vec<_> =
            parts.iter().map(|(y1, (a2, b2))| (*y1, a2 + b2 * w_ref)).collect();
        if kept_equation_residual(&picked.matrix(), &rays) > SYSTEM_RESIDUAL_TOL {
            continue;
        }
        let sol = SolverSolution {
            h: picked,
            f1: Focal::Known(intr1n.focal()),
            f2: Focal::Estimated(w_ref),
        };
        sols.push(denormalize_solution(&sol, &state));
    }
    // The known focal is echoed in original pixel units.
    for s in &mut sols {
        s.f1 = Focal::Known(intr1.focal());
    }
    dedup_solutions(&mut sols);
    Ok(sols)
}
