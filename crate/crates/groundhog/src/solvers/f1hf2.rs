//! Two-unknown-focal 3-point solver (f1Hf2).
//!
//! Both focal lengths are unknown, so all six DLT equations of three
//! correspondences are used. The pixel-space DLT has a 3-dimensional
//! nullspace `H(α) = H0 + α1·H1 + α2·H2` (scale fixed by the unit
//! coefficient on the best null vector). Constraining `H(α)` to factor as
//! `K2⁻¹·R2·H_y·R1ᵀ·K1⁻¹` — with `H_y` of the restricted ground form —
//! yields four scalar equations once both attitudes are yaw-normalized so
//! their bottom-left entry vanishes. Two unknowns (`x = w1·r33` and `w2`)
//! eliminate linearly, leaving one quadratic and one cubic in `(α1, α2)`;
//! their Sylvester resultant in `α2` is a sextic in `α1` that always
//! carries one extraneous root at the intersection of the two elimination
//! denominators. Deflating it leaves a quintic: at most 5 candidates.
//!
//! Every companion eigenvalue of that quintic contributes its real part as
//! a seed (not only the numerically-real ones: coefficient noise in the
//! interpolated resultant can push a nearly-double real root slightly off
//! the axis, and its real part is still a fine seed). A guarded refinement
//! of `(α1, α2, x, w2)` on the four structural equations — Newton steps
//! with a halving line search, falling back to Levenberg-damped steps when
//! the Newton direction fails at a singular Jacobian, every step accepted
//! only when it reduces the residual — then separates true solutions from
//! impostors, and the relative-residual filter discards the rest.
//!
//! Degenerate attitudes are rejected up front: an exact-nadir view 1 makes
//! `f1` unobservable, and a level view-2 optical axis collapses the
//! elimination.

use nalgebra::{DMatrix, Matrix2, Matrix3, Matrix4, Matrix5, Vector2, Vector3, Vector4};

use crate::error::{Error, Result};
use crate::geom::{rot_y, Correspondence};
use crate::poly::{self, eval_poly};

use super::{
    denormalize_solution, focal_in_range, normalize_inputs, null_basis, Focal, NormalizationState,
    NullspaceBasis, SolverOptions, SolverSolution,
};

/// Sextic resultant needs 7 interpolation nodes.
const RESULTANT_NODES: usize = 7;
/// Chebyshev node radius for the resultant interpolation.
const NODE_RADIUS: f64 = 2.0;
/// Attitude degeneracy guard (exact nadir / level optical axis).
const ATTITUDE_TOL: f64 = 1e-9;
/// Iteration cap for the damped structural refinement.
const REFINE_ITERS: usize = 16;
/// Damping escalations tried per refinement iteration.
const REFINE_TRIALS: usize = 6;
/// Relative structural residual above which a polished candidate is junk.
const RESIDUAL_TOL: f64 = 1e-6;
/// Hard cap on emitted candidates.
const MAX_SOLUTIONS: usize = 5;

/// Bivariate polynomial in `(α1, α2)` up to total degree 3, stored as
/// coefficients `c[i][j]` of `α1^i·α2^j`.
#[derive(Clone, Copy)]
struct Bivar {
    c: [[f64; 4]; 4],
}

impl Bivar {
    fn zero() -> Self {
        Bivar { c: [[0.0; 4]; 4] }
    }

    /// Affine-linear polynomial `v[0] + v[1]·α1 + v[2]·α2`.
    fn affine(v: Vector3<f64>) -> Self {
        let mut b = Self::zero();
        b.c[0][0] = v[0];
        b.c[1][0] = v[1];
        b.c[0][1] = v[2];
        b
    }

    fn mul(&self, other: &Bivar) -> Bivar {
        let mut out = Self::zero();
        for i1 in 0..4 {
            for j1 in 0..4 {
                if self.c[i1][j1] == 0.0 {
                    continue;
                }
                for i2 in 0..4 - i1 {
                    for j2 in 0..4 - j1 {
                        out.c[i1 + i2][j1 + j2] += self.c[i1][j1] * other.c[i2][j2];
                    }
                }
            }
        }
        out
    }

    fn add(&self, other: &Bivar) -> Bivar {
        let mut out = *self;
        for i in 0..4 {
            for j in 0..4 {
                out.c[i][j] += other.c[i][j];
            }
        }
        out
    }

    /// Coefficients over `α2^j` (each a degree-≤3 polynomial in `α1`,
    /// increasing order).
    fn by_alpha2(&self, max_j: usize) -> Vec<[f64; 4]> {
        (0..=max_j)
            .map(|j| [self.c[0][j], self.c[1][j], self.c[2][j], self.c[3][j]])
            .collect()
    }
}

/// Extracts the 3-dimensional pixel-DLT nullspace of three correspondences.
///
/// `h0` carries the unit coefficient (the smallest-singular-value vector).
pub fn pixel_nullspace(sample: &[Correspondence; 3]) -> Result<NullspaceBasis> {
    let mut a = DMatrix::zeros(6, 9);
    for (i, c) in sample.iter().enumerate() {
        let p1 = [c.x1.u, c.x1.v, 1.0];
        for k in 0..3 {
            // v-equation: v2·(H p1)·e3 − (H p1)·e2 = 0
            a[(2 * i, 3 + k)] = -p1[k];
            a[(2 * i, 6 + k)] = c.x2.v * p1[k];
            // u-equation: (H p1)·e1 − u2·(H p1)·e3 = 0
            a[(2 * i + 1, k)] = p1[k];
            a[(2 * i + 1, 6 + k)] = -c.x2.u * p1[k];
        }
    }
    let ns = null_basis(&a, 3)?;
    if ns.sigma_kept <= 1e-12 * ns.sigma_max.max(f64::MIN_POSITIVE) {
        return Err(Error::DegenerateConfiguration(
            "pixel DLT system is rank-deficient (degenerate point configuration)".into(),
        ));
    }
    let as_mat = |v: &nalgebra::DVector<f64>| {
        Matrix3::from_row_slice(&[v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]])
    };
    Ok(NullspaceBasis {
        h0: as_mat(&ns.vectors[2]),
        h1: as_mat(&ns.vectors[1]),
        h2: as_mat(&ns.vectors[0]),
    })
}

/// Yaw-normalizes an attitude so its bottom-left entry vanishes; returns
/// the rotated matrix and the applied yaw angle.
fn yaw_fix(att: &Matrix3<f64>) -> (Matrix3<f64>, f64) {
    let phi = att[(2, 0)].atan2(att[(2, 2)]);
    (att * rot_y(phi), phi)
}

/// Coefficients `(const, α1, α2)` of the contraction `lᵀ·H(α)·r`.
fn contract(basis: &NullspaceBasis, l: &Vector3<f64>, r: &Vector3<f64>) -> Vector3<f64> {
    Vector3::new(
        (l.transpose() * basis.h0 * r)[0],
        (l.transpose() * basis.h1 * r)[0],
        (l.transpose() * basis.h2 * r)[0],
    )
}

/// All twelve affine-linear structural scalars plus the attitude constants.
struct Scalars {
    a: Vector3<f64>,
    b: Vector3<f64>,
    c: Vector3<f64>,
    d: Vector3<f64>,
    e: Vector3<f64>,
    f: Vector3<f64>,
    p: Vector3<f64>,
    q: Vector3<f64>,
    s: Vector3<f64>,
    t: Vector3<f64>,
    u: Vector3<f64>,
    w: Vector3<f64>,
    b32: f64,
    b33: f64,
}

impl Scalars {
    fn new(basis: &NullspaceBasis, att1p: &Matrix3<f64>, att2p: &Matrix3<f64>) -> Self {
        let e3 = Vector3::z();
        let g1 = Vector3::new(att2p[(0, 0)], att2p[(1, 0)], 0.0);
        let m2 = Vector3::new(att2p[(0, 1)], att2p[(1, 1)], 0.0);
        let m3 = Vector3::new(att2p[(0, 2)], att2p[(1, 2)], 0.0);
        let s1 = Vector3::new(att1p[(0, 0)], att1p[(1, 0)], 0.0);
        let n3 = Vector3::new(att1p[(0, 2)], att1p[(1, 2)], 0.0);
        Scalars {
            a: contract(basis, &m2, &s1),
            b: contract(basis, &e3, &s1),
            c: contract(basis, &m2, &n3),
            d: contract(basis, &m2, &e3),
            e: contract(basis, &e3, &n3),
            f: contract(basis, &e3, &e3),
            p: contract(basis, &g1, &s1),
            q: contract(basis, &g1, &n3),
            s: contract(basis, &g1, &e3),
            t: contract(basis, &m3, &n3),
            u: contract(basis, &m3, &e3),
            w: contract(basis, &m3, &s1),
            b32: att2p[(2, 1)],
            b33: att2p[(2, 2)],
        }
    }

    /// Elimination numerator of `x`: `−(b33·C + b32·(P − T))`.
    fn nx(&self) -> Vector3<f64> {
        -(self.b33 * self.c + self.b32 * (self.p - self.t))
    }

    /// Elimination denominator of `x`: `b33·D − b32·U`.
    fn dx(&self) -> Vector3<f64> {
        self.b33 * self.d - self.b32 * self.u
    }

    /// The four structural equations at `(α1, α2, x, w2)` and their 4×4
    /// Jacobian.
    fn equations(&self, v: &Vector4<f64>) -> (Vector4<f64>, Matrix4<f64>) {
        let alpha = Vector3::new(1.0, v[0], v[1]);
        let (x, w2) = (v[2], v[3]);
        let ev = |c: &Vector3<f64>| c.dot(&alpha);
        let (av, bv, cv, dv, evl, fv) =
            (ev(&self.a), ev(&self.b), ev(&self.c), ev(&self.d), ev(&self.e), ev(&self.f));
        let (pv, qv, sv, tv, uv, wv) =
            (ev(&self.p), ev(&self.q), ev(&self.s), ev(&self.t), ev(&self.u), ev(&self.w));
        let (b32, b33) = (self.b32, self.b33);
        let g = Vector4::new(
            av + w2 * b32 * bv,
            cv + x * dv + w2 * b32 * evl + x * w2 * b32 * fv,
            (pv - tv) - x * uv - w2 * b33 * evl - x * w2 * b33 * fv,
            (qv + wv) + x * sv + w2 * b33 * bv,
        );
        let mut j = Matrix4::zeros();
        for k in 1..3 {
            let col = k - 1;
            j[(0, col)] = self.a[k] + w2 * b32 * self.b[k];
            j[(1, col)] =
                self.c[k] + x * self.d[k] + w2 * b32 * self.e[k] + x * w2 * b32 * self.f[k];
            j[(2, col)] =
                (self.p[k] - self.t[k]) - x * self.u[k] - w2 * b33 * self.e[k] - x * w2 * b33 * self.f[k];
            j[(3, col)] = (self.q[k] + self.w[k]) + x * self.s[k];
        }
        j[(0, 2)] = 0.0;
        j[(0, 3)] = b32 * bv;
        j[(1, 2)] = dv + w2 * b32 * fv;
        j[(1, 3)] = b32 * (evl + x * fv);
        j[(2, 2)] = -uv - w2 * b33 * fv;
        j[(2, 3)] = -b33 * (evl + x * fv);
        j[(3, 2)] = sv;
        j[(3, 3)] = b33 * bv;
        (g, j)
    }

    /// Magnitude scale of the structural scalars at `(α1, α2)`, for
    /// relative residual checks.
    fn magnitude(&self, alpha1: f64, alpha2: f64) -> f64 {
        let alpha = Vector3::new(1.0, alpha1, alpha2);
        [
            &self.a, &self.b, &self.c, &self.d, &self.e, &self.f, &self.p, &self.q, &self.s,
            &self.t, &self.u, &self.w,
        ]
        .iter()
        .map(|c| c.dot(&alpha).abs())
        .fold(0.0, f64::max)
    }
}

/// Solves the two-unknown-focal 3-point problem with default options.
pub fn solve_f1hf2_3pt(
    c1: &Correspondence,
    c2: &Correspondence,
    c3: &Correspondence,
) -> Result<Vec<SolverSolution>> {
    solve_f1hf2_3pt_with(c1, c2, c3, &SolverOptions::default())
}

/// Solves the two-unknown-focal 3-point problem (at most 5 candidates).
///
/// All three correspondences must share one attitude pair (a minimal
/// sample is drawn from a single image pair).
pub fn solve_f1hf2_3pt_with(
    c1: &Correspondence,
    c2: &Correspondence,
    c3: &Correspondence,
    opts: &SolverOptions,
) -> Result<Vec<SolverSolution>> {
    for c in [c1, c2, c3] {
        if !c.x1.is_finite() || !c.x2.is_finite() {
            return Err(Error::InvalidInput(
                "correspondence contains non-finite pixel coordinates".into(),
            ));
        }
    }
    let att1 = c1.attitudes.0.matrix();
    let att2 = c1.attitudes.1.matrix();
    for c in [c2, c3] {
        let d1 = (c.attitudes.0.matrix() - att1).abs().max();
        let d2 = (c.attitudes.1.matrix() - att2).abs().max();
        if d1 > 1e-9 || d2 > 1e-9 {
            return Err(Error::InvalidInput(
                "the 3-point solver requires all correspondences to share one attitude pair".into(),
            ));
        }
    }

    let (att1p, phi1) = yaw_fix(&att1);
    let (att2p, phi2) = yaw_fix(&att2);
    let r33 = att1p[(2, 2)];
    if r33 < ATTITUDE_TOL {
        return Err(Error::DegenerateConfiguration(
            "view-1 attitude is at exact nadir; f1 is unobservable".into(),
        ));
    }
    if att2p[(2, 1)].abs() < ATTITUDE_TOL {
        return Err(Error::DegenerateConfiguration(
            "view-2 optical axis is level with the ground plane; the focal elimination degenerates"
                .into(),
        ));
    }

    let (sample, state) = if opts.normalize {
        normalize_inputs(&[*c1, *c2, *c3])
    } else {
        (vec![*c1, *c2, *c3], NormalizationState { scale: 1.0 })
    };
    let basis = pixel_nullspace(&[sample[0], sample[1], sample[2]])?;
    let sc = Scalars::new(&basis, &att1p, &att2p);
    let (b32, b33) = (sc.b32, sc.b33);

    // e4 (quadratic) and e2 (cubic) in (α1, α2); e4 is the Sylvester-ready
    // form of equation (4) multiplied through by b32.
    let nx = Bivar::affine(sc.nx());
    let dx = Bivar::affine(sc.dx());
    let t1 = Bivar::affine(b32 * (sc.q + sc.w) - b33 * sc.a);
    let e4 = t1.mul(&dx).add(&Bivar::affine(b32 * sc.s).mul(&nx));
    let cb = Bivar::affine(sc.b);
    let cc = Bivar::affine(sc.c);
    let cd = Bivar::affine(sc.d);
    let ce = Bivar::affine(sc.e);
    let cf = Bivar::affine(sc.f);
    let e2 = cc
        .mul(&cb)
        .mul(&dx)
        .add(&nx.mul(&cd).mul(&cb))
        .add(&Bivar::affine(-sc.a).mul(&ce).mul(&dx))
        .add(&nx.mul(&Bivar::affine(-sc.a)).mul(&cf));

    let p4 = e4.by_alpha2(2);
    let p2 = e2.by_alpha2(3);

    // Sylvester resultant in α2 of (deg-2, deg-3): 5×5 determinant,
    // interpolated as a sextic in α1.
    let sextic = super::fit_poly(RESULTANT_NODES - 1, NODE_RADIUS, |a1| {
        let q4: Vec<f64> = p4.iter().map(|c| eval_poly(c, a1)).collect();
        let q2: Vec<f64> = p2.iter().map(|c| eval_poly(c, a1)).collect();
        let mut m = Matrix5::zeros();
        for r in 0..3 {
            for (k, v) in [q4[2], q4[1], q4[0]].iter().enumerate() {
                m[(r, r + k)] = *v;
            }
        }
        for r in 0..2 {
            for (k, v) in [q2[3], q2[2], q2[1], q2[0]].iter().enumerate() {
                m[(3 + r, r + k)] = *v;
            }
        }
        m.determinant()
    })?;

    // The resultant always vanishes on the intersection of the two
    // elimination lines N_x = 0, D_x = 0; deflate that extraneous root.
    let (nxv, dxv) = (sc.nx(), sc.dx());
    let lines = Matrix2::new(dxv[1], dxv[2], nxv[1], nxv[2]);
    let rhs = Vector2::new(-dxv[0], -nxv[0]);
    let max_coef = sextic.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let reduced = lines.lu().solve(&rhs).and_then(|star| {
        let (quintic, rem) = synthetic_division(&sextic, star[0]);
        (rem.abs() <= 1e-6 * max_coef.max(f64::MIN_POSITIVE)).then_some(quintic)
    });
    let alpha1_poly = reduced.unwrap_or_else(|| sextic.clone());
    // Degenerate data collapses the resultant; emit no candidates rather
    // than aborting a robust-estimation loop.
    if !alpha1_poly.iter().all(|c| c.is_finite()) {
        return Ok(Vec::new());
    }
    let seeds = poly::real_parts_via_companion(&alpha1_poly).unwrap_or_default();

    // Back-substitute one (α1, α2) start, polish it on the structural
    // equations, and convert the survivor into a candidate.
    let refine = |a1: f64, a2: f64| -> Option<(SolverSolution, f64)> {
        let alpha = Vector3::new(1.0, a1, a2);
        let ev = |c: &Vector3<f64>| c.dot(&alpha);
        let (dxe, nxe) = (ev(&dxv), ev(&nxv));
        let bv = ev(&sc.b);
        if dxe.abs() < 1e-12 || (b32 * bv).abs() < 1e-14 {
            return None;
        }
        let mut v = Vector4::new(a1, a2, nxe / dxe, -ev(&sc.a) / (b32 * bv));
        if !v.iter().all(|x| x.is_finite()) {
            return None;
        }
        // Guarded refinement: every step is accepted only when it reduces
        // the residual, so the final iterate is the best point seen and an
        // already-converged seed can never be thrown away. The Newton
        // direction with a halving line search handles the common overshoot;
        // when that direction is garbage (singular Jacobian at a near-double
        // solution), Levenberg-regularized steps `(JᵀJ + µ·lift·I)s = Jᵀg`
        // with escalating `µ` still descend the residual valley.
        let (mut g, mut j) = sc.equations(&v);
        'outer: for _ in 0..REFINE_ITERS {
            let mut advanced = false;
            let full = j.lu().solve(&g).filter(|s| s.iter().all(|x| x.is_finite()));
            if let Some(full) = full {
                let mut scale = 1.0;
                for _ in 0..REFINE_TRIALS {
                    let trial = v - full * scale;
                    let (gt, jt) = sc.equations(&trial);
                    if trial.iter().all(|x| x.is_finite()) && gt.amax() < g.amax() {
                        let converged = full.amax() * scale < 1e-14 * (1.0 + trial.amax());
                        v = trial;
                        g = gt;
                        j = jt;
                        advanced = true;
                        if converged {
                            break 'outer;
                        }
                        break;
                    }
                    scale *= 0.5;
                }
            }
            if advanced {
                continue;
            }
            let jt = j.transpose();
            let jtj = jt * j;
            let jtg = jt * g;
            let lift = jtj.diagonal().amax().max(f64::MIN_POSITIVE);
            let mut mu = 1e-10;
            for _ in 0..REFINE_TRIALS {
                let damped = jtj + Matrix4::identity() * (mu * lift);
                let step = damped.lu().solve(&jtg).filter(|s| s.iter().all(|x| x.is_finite()));
                if let Some(step) = step {
                    let trial = v - step;
                    let (gt, jt2) = sc.equations(&trial);
                    if trial.iter().all(|x| x.is_finite()) && gt.amax() < g.amax() {
                        v = trial;
                        g = gt;
                        j = jt2;
                        advanced = true;
                        break;
                    }
                }
                mu *= 100.0;
            }
            if !advanced {
                break;
            }
        }
        let rel = g.amax() / (1.0 + sc.magnitude(v[0], v[1]));
        if rel > RESIDUAL_TOL {
            return None;
        }

        let (x, w2) = (v[2], v[3]);
        let w1 = x / r33;
        if w1.abs() < f64::MIN_POSITIVE {
            return None;
        }
        let (f1n, f2n) = (1.0 / w1, w2);
        if !focal_in_range(f1n) || !focal_in_range(f2n) {
            return None;
        }

        let h = basis.h0 + v[0] * basis.h1 + v[1] * basis.h2;
        let hy_rot = att2p.transpose()
            * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, w2))
            * h
            * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, w1))
            * att1p;
        let hy = rot_y(phi2) * hy_rot * rot_y(-phi1);
        let params = [
            (hy[(0, 0)] + hy[(2, 2)]) / 2.0,
            (hy[(0, 2)] - hy[(2, 0)]) / 2.0,
            hy[(0, 1)],
            hy[(1, 1)],
            hy[(2, 1)],
        ];
        let (pos, neg) = crate::geom::normalize_ground_homography(&params).ok()?;
        let picked = if pos.h4 >= 0.0 { pos } else { neg };
        let sol = SolverSolution {
            h: picked,
            f1: Focal::Estimated(f1n),
            f2: Focal::Estimated(f2n),
        };
        Some((denormalize_solution(&sol, &state), rel))
    };

    let mut candidates: Vec<(SolverSolution, f64)> = Vec::new();
    for a1 in seeds {
        let q4: Vec<f64> = p4.iter().map(|c| eval_poly(c, a1)).collect();
        let q2: Vec<f64> = p2.iter().map(|c| eval_poly(c, a1)).collect();
        // Near-double solutions share α1 but split in α2, so every branch
        // start gets refined; duplicates collapse in the dedup below.
        for a2 in alpha2_starts(&q4, &q2) {
            if let Some(c) = refine(a1, a2) {
                candidates.push(c);
            }
        }
    }

    // Best-residual-first dedup with the structural candidate cap.
    candidates.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut sols: Vec<SolverSolution> = Vec::new();
    for (sol, _) in candidates {
        if sols.iter().any(|k| super::solutions_close(k, &sol)) {
            continue;
        }
        sols.push(sol);
        if sols.len() >= MAX_SOLUTIONS {
            break;
        }
    }
    Ok(sols)
}

/// Divides `poly` (increasing coefficients) by `(x − root)`; returns the
/// quotient and remainder.
fn synthetic_division(poly: &[f64], root: f64) -> (Vec<f64>, f64) {
    let n = poly.len() - 1;
    let mut out = vec![0.0; n];
    let mut acc = poly[n];
    for k in (0..n).rev() {
        out[k] = acc;
        acc = poly[k] + acc * root;
    }
    (out, acc)
}

/// `α2` starts at a fixed `α1` from the quadratic `q4` and cubic `q2`
/// (coefficients over `α2`, increasing order).
///
/// The linear remainder of `q2 mod q4` vanishes at the single common root,
/// but when a nearly-double solution makes the two polynomials nearly
/// share *both* quadratic roots, the remainder degenerates and selects one
/// branch arbitrarily. Both real roots of `q4` (or its vertex when the
/// noisy discriminant dips negative) are therefore emitted as well; the
/// structural refinement keeps whichever starts converge.
fn alpha2_starts(q4: &[f64], q2: &[f64]) -> Vec<f64> {
    let mut starts: Vec<f64> = Vec::with_capacity(4);
    let scale4 = q4.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if q4[2].abs() > 1e-12 * scale4.max(f64::MIN_POSITIVE) {
        let mut r = [q2[0], q2[1], q2[2], q2[3]];
        let quot1 = r[3] / q4[2];
        r[3] -= quot1 * q4[2];
        r[2] -= quot1 * q4[1];
        r[1] -= quot1 * q4[0];
        let quot0 = r[2] / q4[2];
        r[2] -= quot0 * q4[2];
        r[1] -= quot0 * q4[1];
        r[0] -= quot0 * q4[0];
        if r[1].abs() > 1e-14 * (r[0].abs().max(scale4)) {
            starts.push(-r[0] / r[1]);
        }
    }
    let quad = poly::real_roots_quadratic(q4[2], q4[1], q4[0]);
    if quad.is_empty() && q4[2].abs() > f64::MIN_POSITIVE {
        starts.push(-q4[1] / (2.0 * q4[2]));
    }
    starts.extend(quad);
    let mut out: Vec<f64> = Vec::with_capacity(starts.len());
    for s in starts {
        if s.is_finite()
            && !out.iter().any(|o| (o - s).abs() <= 1e-9 * (1.0 + o.abs().max(s.abs())))
        {
            out.push(s);
        }
    }
    out
}
