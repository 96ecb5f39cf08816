//! Small numeric polynomial back-end: real roots of quartics in closed form,
//! companion-matrix root finding, and real eigenpair extraction from small
//! dense matrices (≤ 7×7). These are the final stages of the minimal solvers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default threshold deciding when an eigenvalue counts as real:
/// `|Im λ| < IM_TOL · (1 + |Re λ|)`. Noise perturbs conjugate pairs slightly
/// off the real axis; downstream consistency checks reject false positives.
pub const IM_TOL: f64 = 1e-6;

/// A real quartic `c4·x⁴ + c3·x³ + c2·x² + c1·x + c0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quartic {
    /// Coefficients in increasing degree order `[c0, c1, c2, c3, c4]`.
    pub c: [f64; 5],
}

impl Quartic {
    /// Wraps the coefficient array (increasing degree).
    pub fn new(c: [f64; 5]) -> Self {
        Self { c }
    }

    /// Evaluates the quartic at `x`.
    pub fn eval(&self, x: f64) -> f64 {
        eval_poly(&self.c, x)
    }
}

/// A dense real square matrix queued for real-eigenpair extraction.
///
/// Intended dimensions are small (7 for the fHf stage, 4 for Hf, 5 for
/// f1Hf2); any square size ≥ 1 is accepted.
#[derive(Debug, Clone, PartialEq)]
pub struct SmallEig {
    m: DMatrix<f64>,
}

impl SmallEig {
    /// Validates squareness, non-emptiness, and finiteness.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 || m.nrows() != m.ncols() {
            return Err(Error::InvalidInput(format!(
                "eigen input must be square and non-empty, got {}×{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if !m.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidInput("eigen input has non-finite entries".into()));
        }
        Ok(Self { m })
    }

    /// The wrapped matrix.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }
}

/// Horner evaluation of a polynomial given coefficients in increasing order.
pub fn eval_poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
}

/// Horner evaluation of the derivative of `c` at `x`.
pub fn eval_poly_deriv(c: &[f64], x: f64) -> f64 {
    let mut acc = 0.0;
    for i in (1..c.len()).rev() {
        acc = acc * x + c[i] * i as f64;
    }
    acc
}

fn newton_step(c: &[f64], x: f64) -> f64 {
    let d = eval_poly_deriv(c, x);
    if d.abs() <= f64::MIN_POSITIVE {
        return x;
    }
    let step = eval_poly(c, x) / d;
    if step.is_finite() {
        x - step
    } else {
        x
    }
}

/// Stable real roots of `a·x² + b·x + c`; empty when the discriminant is
/// negative or the equation is degenerate to a non-zero constant.
pub(crate) fn real_roots_quadratic(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a == 0.0 {
        if b == 0.0 {
            return vec![];
        }
        return vec![-c / b];
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return vec![];
    }
    let sq = disc.sqrt();
    // Avoid cancellation: compute the larger-magnitude root first.
    let q = -0.5 * (b + b.signum() * sq);
    if q == 0.0 {
        return vec![0.0, 0.0];
    }
    vec![q / a, c / q]
}

/// Real roots of the cubic `x³ + a·x² + b·x + c` (monic), via Cardano with
/// the trigonometric branch for the three-real case.
fn real_roots_cubic_monic(a: f64, b: f64, c: f64) -> Vec<f64> {
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let shift = -a / 3.0;
    let half_q = q / 2.0;
    let third_p = p / 3.0;
    let disc = half_q * half_q + third_p * third_p * third_p;
    if disc > 0.0 {
        // One real root.
        let s = disc.sqrt();
        let u = (-half_q + s).cbrt();
        let v = (-half_q - s).cbrt();
        vec![u + v + shift]
    } else if p.abs() <= f64::MIN_POSITIVE {
        vec![(-q).cbrt() + shift]
    } else {
        // Three real roots (disc ≤ 0 implies p < 0 here).
        let rho = (-third_p).sqrt();
        let arg = (-half_q / (rho * rho * rho)).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        let two_rho = 2.0 * rho;
        (0..3)
            .map(|k| two_rho * (phi - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() + shift)
            .collect()
    }
}

/// Real roots of a quartic in closed form (Ferrari/resolvent-cubic), with
/// degree-reduced paths when the leading coefficients vanish.
///
/// Each returned root gets one Newton polish step and must then satisfy
/// `|q(r)| / max(1, ‖c‖∞) < tol`; clusters of roots closer than
/// `tol·(1 + |r|)` are collapsed to a single representative.
pub fn real_roots_quartic(q: &Quartic, tol: f64) -> Result<Vec<f64>> {
    let c = q.c;
    if !c.iter().all(|x| x.is_finite()) {
        return Err(Error::InvalidInput("quartic has non-finite coefficients".into()));
    }
    let max_c = c.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    if max_c == 0.0 {
        return Err(Error::InvalidInput("all-zero polynomial has no defined roots".into()));
    }
    // Degree reduction relative to the largest coefficient.
    let lead_tol = 1e-14 * max_c;
    let raw: Vec<f64> = if c[4].abs() > lead_tol {
        let (a, b2, c1, d) = (c[3] / c[4], c[2] / c[4], c[1] / c[4], c[0] / c[4]);
        depressed_quartic_roots(a, b2, c1, d)
    } else if c[3].abs() > lead_tol {
        real_roots_cubic_monic(c[2] / c[3], c[1] / c[3], c[0] / c[3])
    } else {
        real_roots_quadratic(c[2], c[1], c[0])
    };

    let mut out: Vec<f64> = raw
        .into_iter()
        .map(|r| newton_step(&c, r))
        .filter(|&r| r.is_finite() && eval_poly(&c, r).abs() / max_c.max(1.0) < tol)
        .collect();
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out.dedup_by(|a, b| (*a - *b).abs() <= tol * (1.0 + a.abs().max(b.abs())));
    Ok(out)
}

/// Roots of the monic quartic `x⁴ + a·x³ + b·x² + c·x + d`.
fn depressed_quartic_roots(a: f64, b: f64, c: f64, d: f64) -> Vec<f64> {
    // Depress with x = y − a/4.
    let a2 = a * a;
    let p = b - 3.0 * a2 / 8.0;
    let qq = c - a * b / 2.0 + a2 * a / 8.0;
    let r = d - a * c / 4.0 + a2 * b / 16.0 - 3.0 * a2 * a2 / 256.0;
    let shift = -a / 4.0;
    let scale = 1.0 + p.abs().max(qq.abs()).max(r.abs());

    let mut ys: Vec<f64> = Vec::with_capacity(4);
    if qq.abs() < 1e-14 * scale {
        // Biquadratic: z² + p z + r with y = ±√z.
        for z in real_roots_quadratic(1.0, p, r) {
            if z >= -1e-14 * scale {
                let y = z.max(0.0).sqrt();
                ys.push(y);
                ys.push(-y);
            }
        }
    } else {
        // Factor y⁴ + p y² + q y + r = (y² + αy + β)(y² − αy + γ) where
        // u = α² solves the resolvent u³ + 2p u² + (p² − 4r) u − q² = 0.
        let us = real_roots_cubic_monic(2.0 * p, p * p - 4.0 * r, -qq * qq);
        let u = us.into_iter().fold(f64::NEG_INFINITY, f64::max).max(0.0);
        if u <= 0.0 {
            return vec![];
        }
        let alpha = u.sqrt();
        let diff = qq / alpha;
        let beta = (p + u - diff) / 2.0;
        let gamma = (p + u + diff) / 2.0;
        ys.extend(real_roots_quadratic(1.0, alpha, beta));
        ys.extend(real_roots_quadratic(1.0, -alpha, gamma));
    }
    ys.into_iter().map(|y| y + shift).collect()
}

/// Companion matrix of the polynomial with coefficients `c` (increasing
/// order, `c.last()` must be nonzero); its eigenvalues are the roots.
pub fn companion(c: &[f64]) -> Result<DMatrix<f64>> {
    let n = c.len().saturating_sub(1);
    if n == 0 {
        return Err(Error::InvalidInput("companion matrix needs degree ≥ 1".into()));
    }
    let lead = c[n];
    if lead == 0.0 || !c.iter().all(|x| x.is_finite()) {
        return Err(Error::InvalidInput("companion matrix needs a finite nonzero leading coefficient".into()));
    }
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, n - 1)] = -c[i] / lead;
        if i + 1 < n {
            m[(i + 1, i)] = 1.0;
        }
    }
    Ok(m)
}

/// Real roots of an arbitrary-degree polynomial through a balanced companion
/// eigenvalue problem, with one Newton polish per root.
///
/// Leading coefficients smaller than `1e-12·‖c‖∞` are trimmed (roots that
/// escaped to infinity are dropped). Returns roots in ascending order.
pub fn real_roots_via_companion(c: &[f64], tol: f64) -> Result<Vec<f64>> {
    let max_c = c.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    if max_c == 0.0 || !max_c.is_finite() {
        return Err(Error::InvalidInput("polynomial must be finite and nonzero".into()));
    }
    let mut hi = c.len();
    while hi > 1 && c[hi - 1].abs() <= 1e-12 * max_c {
        hi -= 1;
    }
    let mut lo = 0;
    while lo + 1 < hi && c[lo].abs() <= f64::MIN_POSITIVE {
        lo += 1; // factor out exact x^k
    }
    let coeffs = &c[lo..hi];
    let n = coeffs.len() - 1;
    let mut roots: Vec<f64> = if lo > 0 { vec![0.0] } else { vec![] };
    if n >= 1 {
        // Variable scaling x = k·x' balances the coefficient range.
        let ratio = (coeffs[0].abs() / coeffs[n].abs()).max(f64::MIN_POSITIVE);
        let k = ratio.powf(1.0 / n as f64).clamp(1e-6, 1e6);
        let scaled: Vec<f64> = coeffs.iter().enumerate().map(|(i, &ci)| ci * k.powi(i as i32)).collect();
        let comp = companion(&scaled)?;
        let eig = comp.complex_eigenvalues();
        for lam in eig.iter() {
            if lam.im.abs() < IM_TOL * (1.0 + lam.re.abs()) {
                let mut r = lam.re * k;
                r = newton_step(coeffs, r);
                r = newton_step(coeffs, r);
                if r.is_finite() {
                    roots.push(r);
                }
            }
        }
    }
    let scale = coeffs.iter().fold(0.0f64, |m, &x| m.max(x.abs())).max(1.0);
    roots.retain(|&r| {
        let guard = (1.0 + r.abs()).powi((coeffs.len() - 1) as i32);
        eval_poly(coeffs, r).abs() / (scale * guard) < tol
    });
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(roots)
}

/// Newton-seed extraction: the real part of every companion eigenvalue of
/// the polynomial, without any realness or residual filtering.
///
/// [`real_roots_via_companion`] drops conjugate pairs whose imaginary part
/// exceeds [`IM_TOL`]; when coefficient noise pushes a nearly-double real
/// root slightly off the axis, that filter loses it even though the real
/// part still sits next to the true root. This variant keeps those values
/// so a downstream multivariate refinement can decide. No polishing is
/// applied (a 1-D Newton step at the midpoint of a tight pair can jump
/// away). Exact duplicates from conjugate pairs are collapsed; ascending
/// order.
pub fn real_parts_via_companion(c: &[f64]) -> Result<Vec<f64>> {
    let max_c = c.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    if max_c == 0.0 || !max_c.is_finite() {
        return Err(Error::InvalidInput("polynomial must be finite and nonzero".into()));
    }
    let mut hi = c.len();
    while hi > 1 && c[hi - 1].abs() <= 1e-12 * max_c {
        hi -= 1;
    }
    let mut lo = 0;
    while lo + 1 < hi && c[lo].abs() <= f64::MIN_POSITIVE {
        lo += 1; // factor out exact x^k
    }
    let coeffs = &c[lo..hi];
    let n = coeffs.len() - 1;
    let mut out: Vec<f64> = if lo > 0 { vec![0.0] } else { vec![] };
    if n >= 1 {
        let ratio = (coeffs[0].abs() / coeffs[n].abs()).max(f64::MIN_POSITIVE);
        let k = ratio.powf(1.0 / n as f64).clamp(1e-6, 1e6);
        let scaled: Vec<f64> = coeffs.iter().enumerate().map(|(i, &ci)| ci * k.powi(i as i32)).collect();
        let comp = companion(&scaled)?;
        for lam in comp.complex_eigenvalues().iter() {
            let r = lam.re * k;
            if r.is_finite() {
                out.push(r);
            }
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs())));
    Ok(out)
}

/// Extracts the real eigenvalues of `m` with an associated eigenvector each.
///
/// Eigenvalues pass the [`IM_TOL`] realness filter; each eigenvector is the
/// smallest right singular vector of `M − λI` and is kept only when
/// `‖Mv − λv‖/‖v‖ < tol·‖M‖_F`. Deterministic for a fixed input.
pub fn real_eigenpairs(m: &SmallEig, tol: f64) -> Result<Vec<(f64, DVector<f64>)>> {
    let a = m.matrix();
    let n = a.nrows();
    let norm = a.norm().max(f64::MIN_POSITIVE);
    let eig = a.clone().complex_eigenvalues();
    let mut out = Vec::new();
    for lam in eig.iter() {
        if lam.im.abs() >= IM_TOL * (1.0 + lam.re.abs()) {
            continue;
        }
        let shifted = a - DMatrix::identity(n, n) * lam.re;
        let svd = shifted.svd(false, true);
        let vt = svd.v_t.as_ref().expect("requested right singular vectors");
        let v: DVector<f64> = vt.row(n - 1).transpose();
        let resid = (a * &v - &v * lam.re).norm() / v.norm();
        if resid < tol * norm {
            out.push((lam.re, v));
        }
    }
    out.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    Ok(out)
}
