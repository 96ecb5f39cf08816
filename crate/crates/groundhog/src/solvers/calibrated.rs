//! Calibrated 2-point solver.
//!
//! With both focal lengths known, two correspondences rectify to four DLT
//! rows over the five homography parameters; the one-dimensional nullspace
//! fixes the homography up to scale and the trigonometric constraint fixes
//! the scale up to sign. Both signed candidates are returned — they describe
//! the same projective map, and the caller picks the cheirality-consistent
//! representative (`h4 > 0`).

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geom::{rectify, Correspondence, Intrinsics};

use super::{dlt_rows, null_basis, Focal, SolverSolution};

/// Relative rank gap below which the 4×5 system is considered degenerate
/// (coincident points: the nullspace dimension exceeds 1 and the
/// homography is not determined).
const RANK_GAP_TOL: f64 = 1e-12;

/// Solves the calibrated two-point problem; returns both signed scalings
/// of the nullspace homography (at most 2 candidates).
pub fn solve_calibrated_2pt(
    c1: &Correspondence,
    c2: &Correspondence,
    intr1: &Intrinsics,
    intr2: &Intrinsics,
) -> Result<Vec<SolverSolution>> {
    let mut a = DMatrix::zeros(4, 5);
    for (i, c) in [c1, c2].into_iter().enumerate() {
        let y1 = rectify(&c.x1, &c.attitudes.0, intr1)?.y;
        let y2 = rectify(&c.x2, &c.attitudes.1, intr2)?.y;
        let (ru, rv) = dlt_rows(&y1, &y2);
        a.row_mut(2 * i).copy_from(&ru.transpose());
        a.row_mut(2 * i + 1).copy_from(&rv.transpose());
    }

    let ns = null_basis(&a, 1)?;
    if ns.sigma_kept <= RANK_GAP_TOL * ns.sigma_max.max(f64::MIN_POSITIVE) {
        return Err(Error::DegenerateConfiguration(
            "2-point DLT system is rank deficient (coincident correspondences)".into(),
        ));
    }
    let h = &ns.vectors[0];
    let params = [h[0], h[1], h[2], h[3], h[4]];
    let Ok((pos, neg)) = crate::geom::normalize_ground_homography(&params) else {
        return Ok(Vec::new());
    };

    let f1 = Focal::Known(intr1.focal());
    let f2 = Focal::Known(intr2.focal());
    Ok(vec![SolverSolution { h: pos, f1, f2 }, SolverSolution { h: neg, f1, f2 }])
}
