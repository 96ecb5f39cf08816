//! The four minimal solvers.
//!
//! Each consumes the minimal number of pixel correspondences plus the
//! per-view IMU attitudes and emits every feasible candidate pair of
//! restricted homography and focal length(s):
//!
//! | solver                        | sample | unknown focals | candidates |
//! |-------------------------------|--------|----------------|------------|
//! | [`calibrated::solve_calibrated_2pt`] | 2      | none           | ≤ 2        |
//! | [`fhf::solve_fhf_2_5pt`]      | 3      | shared `f`     | ≤ 7        |
//! | [`hf::solve_hf_2_5pt`]        | 3      | view-2 `f2`    | ≤ 4        |
//! | [`f1hf2::solve_f1hf2_3pt`]    | 3      | both           | ≤ 5        |
//!
//! The 2.5-point solvers use three correspondences but discard the v-row
//! DLT equation of the third one; that withheld equation doubles as the
//! cheap consistency check used by the robust estimator.
//!
//! Inputs are rescaled by [`normalize_inputs`] before solving (mean absolute
//! pixel coordinate); recovered focal lengths are scaled back by
//! [`denormalize_solution`]. The restricted homography lives in the
//! rectified frame and is invariant under that similarity, so only focals
//! change on the way out.

use nalgebra::{DMatrix, DVector, Matrix3, SVector, Vector3};

use crate::error::{Error, Result};
use crate::geom::{Correspondence, GroundHomography, Intrinsics};

pub mod calibrated;
pub mod f1hf2;
pub mod fhf;
pub mod hf;

/// A 5-vector of coefficients over the homography parameters `(h1..h5)`.
pub(crate) type HRow = SVector<f64, 5>;

/// Focal lengths below this (in normalized units) are saturated away; the
/// `w = 0` family corresponds to infinite focal length and carries no
/// geometric meaning.
pub const SATURATION_MIN: f64 = 1e-8;

/// Focal lengths above this (in normalized units) are rejected as the
/// numerically-infinite tail of the saturated family.
pub const SATURATION_MAX: f64 = 1e8;

/// One focal-length slot of a solution: the value is always usable, the
/// variant records whether the solver estimated it or was given it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Focal {
    /// The caller supplied this focal; echoed for downstream convenience.
    Known(f64),
    /// The solver estimated this focal (pixels).
    Estimated(f64),
}

impl Focal {
    /// The focal length in pixels regardless of provenance.
    pub fn value(&self) -> f64 {
        match *self {
            Focal::Known(f) | Focal::Estimated(f) => f,
        }
    }

    /// True when the solver estimated this value.
    pub fn is_estimated(&self) -> bool {
        matches!(self, Focal::Estimated(_))
    }
}

/// One candidate emitted by a minimal solver.
///
/// The homography satisfies the trigonometric constraint; estimated focals
/// are strictly positive and finite (saturation filtered).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSolution {
    /// Restricted homography in the rectified frame.
    pub h: GroundHomography,
    /// View-1 focal length.
    pub f1: Focal,
    /// View-2 focal length.
    pub f2: Focal,
}

/// Basis of the 3-dimensional DLT nullspace of three correspondences:
/// `H(α) = H0 + α1·H1 + α2·H2` with the scale fixed by `α0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NullspaceBasis {
    /// Basis matrix carrying the fixed unit coefficient.
    pub h0: Matrix3<f64>,
    /// First free basis matrix.
    pub h1: Matrix3<f64>,
    /// Second free basis matrix.
    pub h2: Matrix3<f64>,
}

/// Pixel rescaling applied before solving and undone afterwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationState {
    /// Scale `s > 0` that pixel coordinates were divided by.
    pub scale: f64,
}

/// Root-finding back-end for the Hf solver; the two agree to high accuracy
/// and serve as mutual oracles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HfRootMethod {
    /// Closed-form quartic formula (default).
    #[default]
    QuarticFormula,
    /// 4×4 companion-matrix eigenvalues.
    Eigen4,
}

/// Per-call solver options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Rescale pixels by the mean absolute coordinate before solving.
    pub normalize: bool,
    /// Root-finding back-end used by the Hf solver.
    pub hf_root_method: HfRootMethod,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { normalize: true, hf_root_method: HfRootMethod::default() }
    }
}

/// Names of the four minimal solvers, for dispatch and reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverKind {
    /// Calibrated 2-point solver.
    Calibrated2pt,
    /// Shared-unknown-focal 2.5-point solver.
    FHf,
    /// Known `f1`, unknown `f2` 2.5-point solver.
    Hf,
    /// Both-focals-unknown 3-point solver.
    F1Hf2,
}

impl SolverKind {
    /// Stable identifier used in CLI flags and CSV output.
    pub fn id(&self) -> &'static str {
        match self {
            SolverKind::Calibrated2pt => "2pt",
            SolverKind::FHf => "fhf",
            SolverKind::Hf => "hf",
            SolverKind::F1Hf2 => "f1hf2",
        }
    }
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "2pt" => Ok(SolverKind::Calibrated2pt),
            "fhf" => Ok(SolverKind::FHf),
            "hf" => Ok(SolverKind::Hf),
            "f1hf2" => Ok(SolverKind::F1Hf2),
            other => Err(Error::InvalidInput(format!(
                "unknown solver '{other}' (expected 2pt, fhf, hf, or f1hf2)"
            ))),
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

/// A fully-specified minimal problem: the solver kind plus whatever
/// intrinsics it treats as known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MinimalProblem {
    /// Both views calibrated.
    Calibrated2pt {
        /// View-1 intrinsics.
        intr1: Intrinsics,
        /// View-2 intrinsics.
        intr2: Intrinsics,
    },
    /// One shared unknown focal length.
    FHf,
    /// View-1 calibrated, view-2 focal unknown.
    Hf {
        /// View-1 intrinsics.
        intr1: Intrinsics,
    },
    /// Both focal lengths unknown.
    F1Hf2,
}

impl MinimalProblem {
    /// Number of correspondences a minimal sample needs.
    pub fn sample_size(&self) -> usize {
        match self {
            MinimalProblem::Calibrated2pt { .. } => 2,
            _ => 3,
        }
    }

    /// Whether the solver withholds a DLT equation usable as a cheap
    /// consistency check (the 2.5-point solvers).
    pub fn has_consistency_check(&self) -> bool {
        matches!(self, MinimalProblem::FHf | MinimalProblem::Hf { .. })
    }

    /// The solver kind this problem dispatches to.
    pub fn kind(&self) -> SolverKind {
        match self {
            MinimalProblem::Calibrated2pt { .. } => SolverKind::Calibrated2pt,
            MinimalProblem::FHf => SolverKind::FHf,
            MinimalProblem::Hf { .. } => SolverKind::Hf,
            MinimalProblem::F1Hf2 => SolverKind::F1Hf2,
        }
    }

    /// Runs the minimal solver on `sample` (length = [`Self::sample_size`]).
    pub fn solve(&self, sample: &[Correspondence], opts: &SolverOptions) -> Result<Vec<SolverSolution>> {
        let need = self.sample_size();
        if sample.len() != need {
            return Err(Error::InvalidInput(format!(
                "solver {} needs exactly {need} correspondences, got {}",
                self.kind(),
                sample.len()
            )));
        }
        match self {
            MinimalProblem::Calibrated2pt { intr1, intr2 } => {
                calibrated::solve_calibrated_2pt(&sample[0], &sample[1], intr1, intr2)
            }
            MinimalProblem::FHf => fhf::solve_fhf_2_5pt_with(&sample[0], &sample[1], &sample[2], opts),
            MinimalProblem::Hf { intr1 } => {
                hf::solve_hf_2_5pt_with(&sample[0], &sample[1], &sample[2], intr1, opts)
            }
            MinimalProblem::F1Hf2 => {
                f1hf2::solve_f1hf2_3pt_with(&sample[0], &sample[1], &sample[2], opts)
            }
        }
    }
}

/// Rescales pixel coordinates by the mean absolute coordinate.
///
/// Attitudes pass through untouched; the scale is returned for
/// [`denormalize_solution`]. Degenerate all-zero coordinates fall back to
/// scale 1.
pub fn normalize_inputs(correspondences: &[Correspondence]) -> (Vec<Correspondence>, NormalizationState) {
    let mut sum = 0.0;
    let mut count = 0usize;
    for c in correspondences {
        sum += c.x1.u.abs() + c.x1.v.abs() + c.x2.u.abs() + c.x2.v.abs();
        count += 4;
    }
    let mean = if count > 0 { sum / count as f64 } else { 0.0 };
    let scale = if mean.is_finite() && mean > f64::MIN_POSITIVE { mean } else { 1.0 };
    let rescaled = correspondences
        .iter()
        .map(|c| {
            let mut c2 = *c;
            c2.x1.u /= scale;
            c2.x1.v /= scale;
            c2.x2.u /= scale;
            c2.x2.v /= scale;
            c2
        })
        .collect();
    (rescaled, NormalizationState { scale })
}

/// Undoes [`normalize_inputs`] on a solution: estimated focals are scaled
/// back to pixels; the restricted homography is similarity-invariant and
/// passes through unchanged (its conjugation by the rescaling is the
/// identity in the rectified frame).
pub fn denormalize_solution(sol: &SolverSolution, state: &NormalizationState) -> SolverSolution {
    let scale = |f: &Focal| match *f {
        Focal::Known(v) => Focal::Known(v),
        Focal::Estimated(v) => Focal::Estimated(v * state.scale),
    };
    SolverSolution { h: sol.h, f1: scale(&sol.f1), f2: scale(&sol.f2) }
}

// ---------------------------------------------------------------------------
// Shared internal machinery.

/// Coefficient rows of the restricted-homography action: `(H_y·y) = Z(y)·h`
/// with `Z` linear in `y` and `h = (h1, h2, h3, h4, h5)`.
#[inline]
pub(crate) fn z_rows(y: &Vector3<f64>) -> [HRow; 3] {
    [
        HRow::from_column_slice(&[y.x, y.z, y.y, 0.0, 0.0]),
        HRow::from_column_slice(&[0.0, 0.0, 0.0, y.y, 0.0]),
        HRow::from_column_slice(&[y.z, -y.x, 0.0, 0.0, y.y]),
    ]
}

/// The two DLT rows of a fully-rectified correspondence `(y1, y2)`:
/// the u-equation and the v-equation of `y2 × (H_y y1) = 0`.
#[inline]
pub(crate) fn dlt_rows(y1: &Vector3<f64>, y2: &Vector3<f64>) -> (HRow, HRow) {
    let z = z_rows(y1);
    let u = z[0] * y2.z - z[2] * y2.x;
    let v = z[2] * y2.y - z[1] * y2.z;
    (u, v)
}

/// Result of extracting the trailing nullspace of a (possibly rectangular)
/// coefficient matrix via a full SVD of the zero-padded square matrix.
pub(crate) struct NullspaceInfo {
    /// Trailing right singular vectors, smallest singular value last.
    pub vectors: Vec<DVector<f64>>,
    /// Smallest singular value NOT assigned to the nullspace (rank guard).
    pub sigma_kept: f64,
    /// Largest singular value.
    pub sigma_max: f64,
}

/// Extracts a `null_dim`-dimensional trailing nullspace basis of `a`.
///
/// The matrix is padded with zero rows to square so the full right singular
/// basis is available; vectors are returned in order of decreasing singular
/// value (the best null vector last).
pub(crate) fn null_basis(a: &DMatrix<f64>, null_dim: usize) -> Result<NullspaceInfo> {
    let (m, n) = (a.nrows(), a.ncols());
    if n < null_dim + 1 || m + null_dim < n {
        return Err(Error::InvalidInput(format!(
            "cannot take a {null_dim}-dim nullspace of a {m}×{n} system"
        )));
    }
    let mut sq = DMatrix::zeros(n, n);
    sq.view_mut((0, 0), (m, n)).copy_from(a);
    let svd = sq.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested right singular vectors");
    let vectors = (0..null_dim)
        .map(|k| v_t.row(n - null_dim + k).transpose())
        .collect();
    Ok(NullspaceInfo {
        vectors,
        sigma_kept: svd.singular_values[n - null_dim - 1],
        sigma_max: svd.singular_values[0],
    })
}

/// Fits the coefficients (increasing order) of a degree-`degree` polynomial
/// from evaluations at scaled Chebyshev nodes, by a Vandermonde solve.
pub(crate) fn fit_poly(degree: usize, radius: f64, mut eval: impl FnMut(f64) -> f64) -> Result<Vec<f64>> {
    let n = degree + 1;
    let mut v = DMatrix::zeros(n, n);
    let mut b = DVector::zeros(n);
    for j in 0..n {
        let x = radius * (std::f64::consts::PI * (2 * j + 1) as f64 / (2 * n) as f64).cos();
        let mut p = 1.0;
        for k in 0..n {
            v[(j, k)] = p;
            p *= x;
        }
        b[j] = eval(x);
    }
    v.lu()
        .solve(&b)
        .map(|c| c.iter().copied().collect())
        .ok_or_else(|| Error::DegenerateConfiguration("determinant interpolation failed".into()))
}

/// True when two candidates coincide: homographies (normalized to last
/// entry 1) and focals within `1e-7` relative, component-wise.
///
/// The comparison must be relative: saturated-family candidates carry
/// translation parameters of magnitude `1e5` and beyond, where converged
/// duplicates still differ by far more than any absolute tolerance.
pub(crate) fn solutions_close(a: &SolverSolution, b: &SolverSolution) -> bool {
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-7 * x.abs().max(y.abs()).max(1.0);
    // Last matrix entry is h1; treat near-zero h1 as non-comparable.
    if a.h.h1.abs() < 1e-12 || b.h.h1.abs() < 1e-12 {
        return false;
    }
    let pa = a.h.params().map(|x| x / a.h.h1);
    let pb = b.h.params().map(|x| x / b.h.h1);
    pa.iter().zip(pb.iter()).all(|(x, y)| close(*x, *y))
        && close(a.f1.value(), b.f1.value())
        && close(a.f2.value(), b.f2.value())
}

/// Collapses duplicate candidates, keeping the first of each cluster.
pub(crate) fn dedup_solutions(sols: &mut Vec<SolverSolution>) {
    let mut keep: Vec<SolverSolution> = Vec::with_capacity(sols.len());
    for s in sols.iter() {
        if !keep.iter().any(|k| solutions_close(k, s)) {
            keep.push(*s);
        }
    }
    *sols = keep;
}

/// True when a normalized-unit focal passes the saturation window.
pub(crate) fn focal_in_range(w: f64) -> bool {
    w.is_finite() && w > SATURATION_MIN && w < SATURATION_MAX
}
