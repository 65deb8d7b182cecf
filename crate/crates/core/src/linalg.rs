//! Small dense linear-algebra helpers shared by the solvers.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::{CMatrix, Error, Result};

const RADIUS_MAX_ITER: usize = 20_000;

/// Spectral radius of a square entrywise-nonnegative matrix.
///
/// Power iteration on the shifted matrix `M + I` from the all-ones vector.
/// The shift keeps the iteration aperiodic (so cyclic matrices such as
/// `[[0, a], [a, 0]]` converge) and does not move the Perron root other than
/// by exactly one. Stops once the Collatz-Wielandt bounds close or, for
/// reducible matrices whose Perron vector has zero entries, once the
/// extrapolated error of the norm estimate falls below `1e-13` relative.
/// Defective dominant eigenvalues (Jordan blocks) make power iteration
/// converge only sublinearly; when no stopping test fires, the radius is taken
/// from repeated squaring instead.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    assert!(m.is_square(), "spectral radius needs a square matrix");
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    debug_assert!(m.iter().all(|&v| v >= 0.0), "matrix must be nonnegative");

    let shifted = m + DMatrix::<f64>::identity(n, n);
    let mut x = nalgebra::DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut prev_delta = f64::INFINITY;
    let mut prev_estimate = f64::NAN;

    for it in 0..RADIUS_MAX_ITER {
        let y = &shifted * &x;
        let norm = y.norm();
        if !norm.is_finite() || norm == 0.0 {
            // Restart from a perturbed positive vector.
            x = nalgebra::DVector::from_fn(n, |i, _| 1.0 + ((i + it) % n) as f64 / n as f64);
            x /= x.norm();
            continue;
        }
        let estimate = norm;

        let floor = 1e-12 * x.amax();
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        let mut all_positive = true;
        for i in 0..n {
            if x[i] > floor {
                let r = y[i] / x[i];
                lo = lo.min(r);
                hi = hi.max(r);
            } else {
                all_positive = false;
            }
        }
        if all_positive && hi - lo <= 1e-13 * hi {
            return (0.5 * (lo + hi) - 1.0).max(0.0);
        }

        x = y / norm;
        if prev_estimate.is_finite() {
            let delta = (estimate - prev_estimate).abs();
            if delta <= 1e-16 * estimate {
                return (estimate - 1.0).max(0.0);
            }
            let ratio = delta / prev_delta;
            if prev_delta.is_finite() && ratio < 1.0 && delta * ratio / (1.0 - ratio) <= 1e-13 * estimate {
                return (estimate - 1.0).max(0.0);
            }
            prev_delta = delta;
        }
        prev_estimate = estimate;
    }
    squaring_radius(m)
}

/// Gelfand's formula `rho = lim ||M^k||^(1/k)` evaluated at `k = 2^64` by
/// repeated squaring with rescaling.
fn squaring_radius(m: &DMatrix<f64>) -> f64 {
    let mut a = m.clone();
    let mut log_scale = 0.0;
    let mut exponent = 1.0;
    for _ in 0..64 {
        let s = a.amax();
        if s == 0.0 {
            return 0.0;
        }
        a /= s;
        log_scale += s.ln();
        a = &a * &a;
        log_scale *= 2.0;
        exponent *= 2.0;
    }
    let s = a.amax();
    if s == 0.0 {
        return 0.0;
    }
    ((log_scale + s.ln()) / exponent).exp()
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted
/// ascending. Each eigenvector is phase-normalized so that its first entry of
/// non-negligible magnitude is real and positive.
pub fn hermitian_eigh(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    let herm = hermitian_part(m);
    let eig = herm.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        normalize_phase(&mut col);
        vectors.set_column(dst, &col);
    }
    (values, vectors)
}

/// Rotate a vector so that its first entry with magnitude above `1e-10`
/// times the largest magnitude is real and positive.
pub fn normalize_phase(col: &mut nalgebra::DVector<Complex64>) {
    let scale = col.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return;
    }
    if let Some(pivot) = col.iter().find(|z| z.norm() > 1e-10 * scale) {
        let phase = pivot.conj() / pivot.norm();
        col.iter_mut().for_each(|z| *z *= phase);
    }
}

/// Columns of the eigenvectors belonging to the `d` smallest eigenvalues.
pub fn smallest_eigenvectors(m: &CMatrix, d: usize) -> CMatrix {
    let (_, vecs) = hermitian_eigh(m);
    vecs.columns(0, d).into_owned()
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// `log2 det(M)` for a Hermitian positive-definite matrix via Cholesky.
pub fn log2_det_hpd(m: &CMatrix) -> Result<f64> {
    let chol = hermitian_part(m)
        .cholesky()
        .ok_or_else(|| Error::Domain("matrix is not positive definite".into()))?;
    let l = chol.l_dirty();
    Ok((0..m.nrows()).map(|i| l[(i, i)].re.log2()).sum::<f64>() * 2.0)
}

/// Solve `A X = B` for Hermitian positive-definite `A`.
pub fn solve_hpd(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let chol = hermitian_part(a)
        .cholesky()
        .ok_or_else(|| Error::Domain("matrix is not positive definite".into()))?;
    Ok(chol.solve(b))
}

/// Checks Hermitian symmetry (within `1e-10` scaled) and minimum eigenvalue
/// `>= -1e-10`.
pub fn check_psd(m: &CMatrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Domain("covariance must be square".into()));
    }
    let scale = m.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let asym = (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if asym > 1e-10 * scale {
        return Err(Error::Domain(format!("covariance is not Hermitian (deviation {asym:.3e})")));
    }
    if m.nrows() > 0 {
        let (vals, _) = hermitian_eigh(m);
        if vals[0] < -1e-10 * scale {
            return Err(Error::Domain(format!(
                "covariance is not positive semidefinite (eigenvalue {:.3e})",
                vals[0]
            )));
        }
    }
    Ok(())
}

/// Orthonormal basis of the column space of `m` (thin QR). Assumes full
/// column rank.
pub fn orthonormal_columns(m: &CMatrix) -> CMatrix {
    let cols = m.ncols();
    let qr = m.clone().qr();
    let q = qr.q();
    let mut out = q.columns(0, cols).into_owned();
    for j in 0..cols {
        let mut c = out.column(j).into_owned();
        normalize_phase(&mut c);
        out.set_column(j, &c);
    }
    out
}

/// Singular values sorted descending.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Trace of `M Mᴴ` (squared Frobenius norm).
pub fn power_of(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Sum in a fixed, order-independent way: sort, then reduce pairwise.
pub fn stable_sum(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    pairwise(&v)
}

fn pairwise(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n => pairwise(&v[..n / 2]) + pairwise(&v[n / 2..]),
    }
}
