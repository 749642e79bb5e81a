//! Dense helpers for the 1×1 and 2×2 symmetric matrices that appear as
//! outcome covariances. Matrices are row-major slices of length `d * d`.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub fn trace<F: Scalar>(m: &[F], d: usize) -> F {
    (0..d).map(|i| m[i * d + i]).sum()
}

/// Eigenvalues of a symmetric matrix, largest first. Only `d <= 2`.
pub fn sym_eigenvalues<F: Scalar>(m: &[F], d: usize) -> [F; 2] {
    match d {
        1 => [m[0], m[0]],
        2 => {
            let (a, b, c) = (m[0], (m[1] + m[2]) / F::of(2.0), m[3]);
            let half = F::of(0.5);
            let mid = (a + c) * half;
            let rad = ((a - c) * half).hypot(b);
            [mid + rad, mid - rad]
        }
        _ => unreachable!("outcome dimension is 1 or 2"),
    }
}

/// Eigen-decomposition of a symmetric 2×2 matrix: eigenvalues (largest first)
/// and the unit eigenvector of the largest one.
fn sym_eigen2<F: Scalar>(m: &[F]) -> ([F; 2], [F; 2]) {
    let vals = sym_eigenvalues(m, 2);
    let (a, b) = (m[0], (m[1] + m[2]) / F::of(2.0));
    let c = m[3];
    let v = if b != F::zero() {
        let (x, y) = (b, vals[0] - a);
        let n = x.hypot(y);
        [x / n, y / n]
    } else if a >= c {
        [F::one(), F::zero()]
    } else {
        [F::zero(), F::one()]
    };
    (vals, v)
}

/// Checks symmetry (relative to the trace) and positive semi-definiteness
/// within `-tol * trace`, then symmetrizes and clips negative eigenvalues to
/// zero in place.
pub fn validate_and_clip_psd<F: Scalar>(m: &mut [F], d: usize, tol: F) -> Result<()> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("covariance has non-finite entries"));
    }
    let tr = trace(m, d);
    let scale = tr.abs().max(F::one());
    if d == 2 {
        if (m[1] - m[2]).abs() > tol * scale {
            return Err(Error::invalid(format!(
                "covariance is not symmetric: {} vs {}",
                m[1], m[2]
            )));
        }
        let off = (m[1] + m[2]) / F::of(2.0);
        m[1] = off;
        m[2] = off;
    }
    let eig = sym_eigenvalues(m, d);
    if eig[1] < -tol * tr.abs() {
        return Err(Error::invalid(format!(
            "covariance is not positive semi-definite (smallest eigenvalue {})",
            eig[1]
        )));
    }
    if eig[1] < F::zero() {
        clip_negative_eigenvalues(m, d);
    }
    Ok(())
}

fn clip_negative_eigenvalues<F: Scalar>(m: &mut [F], d: usize) {
    if d == 1 {
        m[0] = m[0].max(F::zero());
        return;
    }
    let (vals, v) = sym_eigen2(m);
    let l0 = vals[0].max(F::zero());
    let l1 = vals[1].max(F::zero());
    // Second eigenvector is v rotated by 90 degrees.
    let w = [-v[1], v[0]];
    m[0] = l0 * v[0] * v[0] + l1 * w[0] * w[0];
    m[1] = l0 * v[0] * v[1] + l1 * w[0] * w[1];
    m[2] = m[1];
    m[3] = l0 * v[1] * v[1] + l1 * w[1] * w[1];
}

pub fn inverse<F: Scalar>(m: &[F], d: usize) -> Option<Vec<F>> {
    match d {
        1 => (m[0] != F::zero()).then(|| vec![F::one() / m[0]]),
        2 => {
            let det = m[0] * m[3] - m[1] * m[2];
            if det == F::zero() || !det.is_finite() {
                return None;
            }
            Some(vec![m[3] / det, -m[1] / det, -m[2] / det, m[0] / det])
        }
        _ => unreachable!("outcome dimension is 1 or 2"),
    }
}

/// Lower-triangular factor `L` with `L Lᵀ = m` for a PSD matrix, tolerating
/// singular matrices (zero pivots). Fails when `m` is indefinite beyond
/// `tol * trace`.
pub fn psd_factor<F: Scalar>(m: &[F], d: usize, tol: F) -> Result<[F; 4]> {
    let slack = tol * trace(m, d).abs();
    let fail = || Error::numeric("covariance is not positive semi-definite");
    match d {
        1 => {
            if m[0] < -slack {
                return Err(fail());
            }
            Ok([m[0].max(F::zero()).sqrt(), F::zero(), F::zero(), F::zero()])
        }
        2 => {
            if m[0] < -slack || m[3] < -slack {
                return Err(fail());
            }
            let a = m[0].max(F::zero()).sqrt();
            let off = (m[1] + m[2]) / F::of(2.0);
            let b = if a > F::zero() { off / a } else { F::zero() };
            if a == F::zero() && off.abs() > slack {
                return Err(fail());
            }
            let schur = m[3] - b * b;
            if schur < -slack {
                return Err(fail());
            }
            Ok([a, F::zero(), b, schur.max(F::zero()).sqrt()])
        }
        _ => unreachable!("outcome dimension is 1 or 2"),
    }
}

/// `A B` for two `d × d` matrices.
pub fn matmul<F: Scalar>(a: &[F], b: &[F], d: usize) -> Vec<F> {
    let mut out = vec![F::zero(); d * d];
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] = (0..d).map(|l| a[i * d + l] * b[l * d + j]).sum();
        }
    }
    out
}

pub fn matvec<F: Scalar>(a: &[F], x: &[F], d: usize) -> Vec<F> {
    (0..d)
        .map(|i| (0..d).map(|j| a[i * d + j] * x[j]).sum())
        .collect()
}

/// Frobenius inner product `<A, B> = Σ_ij A_ij B_ij`.
pub fn frobenius<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}
