//! Small dense linear algebra for the regression layer: a pivoted-QR rank
//! check on the design matrix, Cholesky inversion of the observed
//! information, and Jacobi eigenvalues for diagnosing indefinite Hessians.
//! Matrices are flat row-major slices; everything here is O(p³) on p ≈ 10.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::NumericError;
use crate::math::{abs, sqrt};

/// Relative tolerance on |R_ii| / |R_00| below which a pivoted column is
/// declared linearly dependent.
const RANK_TOL: f64 = 1e-10;

/// Householder QR with column pivoting on an n×p matrix. Returns an error
/// naming the dependent columns (by `names`) if the matrix is rank-deficient.
pub fn check_full_rank(
    a: &[f64],
    nrows: usize,
    ncols: usize,
    names: &[String],
) -> Result<(), NumericError> {
    assert_eq!(a.len(), nrows * ncols);
    assert_eq!(names.len(), ncols);
    if nrows < ncols {
        return Err(NumericError::RankDeficient { columns: names.to_vec() });
    }
    // Work on a column-major copy so column swaps and reflections are cheap.
    let mut cols: Vec<Vec<f64>> = (0..ncols)
        .map(|j| (0..nrows).map(|i| a[i * ncols + j]).collect())
        .collect();
    let mut perm: Vec<usize> = (0..ncols).collect();
    let mut r00 = 0.0f64;
    let mut deficient: Vec<usize> = Vec::new();
    for k in 0..ncols {
        // Pivot: bring the column with the largest remaining norm to front.
        let mut best = k;
        let mut best_norm = 0.0f64;
        for (j, col) in cols.iter().enumerate().skip(k) {
            let norm: f64 = col[k..].iter().map(|v| v * v).sum();
            if norm > best_norm {
                best_norm = norm;
                best = j;
            }
        }
        cols.swap(k, best);
        perm.swap(k, best);
        let norm = sqrt(best_norm);
        if k == 0 {
            r00 = norm;
        }
        if norm <= RANK_TOL * r00 || norm == 0.0 {
            // Every remaining pivoted column is in the span of the first k.
            deficient.extend_from_slice(&perm[k..]);
            break;
        }
        // Householder vector for column k below row k.
        let mut v: Vec<f64> = cols[k][k..].to_vec();
        let alpha = if v[0] >= 0.0 { -norm } else { norm };
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            for col in cols.iter_mut().skip(k) {
                let dot: f64 = v.iter().zip(&col[k..]).map(|(a, b)| a * b).sum();
                let scale = 2.0 * dot / vnorm2;
                for (vi, cj) in v.iter().zip(col[k..].iter_mut()) {
                    *cj -= scale * vi;
                }
            }
        }
    }
    if deficient.is_empty() {
        Ok(())
    } else {
        deficient.sort_unstable();
        Err(NumericError::RankDeficient {
            columns: deficient.iter().map(|&j| names[j].clone()).collect(),
        })
    }
}

/// Inverse of a symmetric positive-definite matrix via Cholesky. Fails with
/// the offending leading-minor pivot when the matrix is not PD.
pub fn invert_spd(a: &[f64], n: usize) -> Result<Vec<f64>, NumericError> {
    assert_eq!(a.len(), n * n);
    // L such that A = L Lᵀ.
    let mut l = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(NumericError::Instability {
                        what: "matrix is not positive definite",
                        value: s,
                    });
                }
                l[i * n + j] = sqrt(s);
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    // Columns of the inverse by forward/back substitution against e_j.
    let mut inv = vec![0.0f64; n * n];
    for j in 0..n {
        let mut y = vec![0.0f64; n];
        for i in 0..n {
            let mut s = if i == j { 1.0 } else { 0.0 };
            for k in 0..i {
                s -= l[i * n + k] * y[k];
            }
            y[i] = s / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= l[k * n + i] * inv[k * n + j];
            }
            inv[i * n + j] = s / l[i * n + i];
        }
    }
    Ok(inv)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues(a: &[f64], n: usize) -> Vec<f64> {
    assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                off += m[i * n + j] * m[i * n + j];
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if abs(apq) < 1e-300 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + sqrt(1.0 + theta * theta))
                } else {
                    -1.0 / (-theta + sqrt(1.0 + theta * theta))
                };
                let c = 1.0 / sqrt(1.0 + t * t);
                let s = t * c;
                for k in 0..n {
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[p * n + k];
                    let aqk = m[q * n + k];
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eigs: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
    eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    eigs
}
