use nalgebra::{DMatrix, SymmetricEigen};

/// Lower Cholesky factor; on failure retries with growing diagonal shifts.
/// Returns the factor and the shift that was needed.
pub(crate) fn cholesky_perturbed(m: &DMatrix<f64>) -> Option<(DMatrix<f64>, f64)> {
    if let Some(l) = cholesky(m.clone()) {
        return Some((l, 0.0));
    }
    let scale = m.diagonal().iter().fold(0.0f64, |a, &v| a.max(v.abs())).max(1e-300);
    let mut shift = 1e-14 * scale;
    while shift < 1e-4 * scale {
        let mut p = m.clone();
        for i in 0..p.nrows() {
            p[(i, i)] += shift;
        }
        if let Some(l) = cholesky(p) {
            return Some((l, shift));
        }
        shift *= 100.0;
    }
    None
}

/// Right-looking blocked Cholesky; the trailing update is a matrix product so
/// large factorizations run at matrix-multiply speed.
pub(crate) fn cholesky(mut a: DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    const NB: usize = 64;
    let mut k = 0;
    while k < n {
        let b = NB.min(n - k);
        // Unblocked factorization of the diagonal block.
        for j in k..k + b {
            let mut d = a[(j, j)];
            for p in k..j {
                d -= a[(j, p)] * a[(j, p)];
            }
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            let d = d.sqrt();
            a[(j, j)] = d;
            for i in j + 1..k + b {
                let mut s = a[(i, j)];
                for p in k..j {
                    s -= a[(i, p)] * a[(j, p)];
                }
                a[(i, j)] = s / d;
            }
        }
        let rest = n - k - b;
        if rest > 0 {
            // Panel: A21 <- A21 * L11^{-T}.
            let l11 = a.view((k, k), (b, b)).clone_owned();
            let mut panel = a.view((k + b, k), (rest, b)).clone_owned();
            for j in 0..b {
                for i in 0..rest {
                    let mut s = panel[(i, j)];
                    for p in 0..j {
                        s -= panel[(i, p)] * l11[(j, p)];
                    }
                    panel[(i, j)] = s / l11[(j, j)];
                }
            }
            a.view_mut((k + b, k), (rest, b)).copy_from(&panel);
            // Trailing update: A22 <- A22 - A21 A21^T.
            let mut trailing = a.view_mut((k + b, k + b), (rest, rest));
            trailing.gemm(-1.0, &panel, &panel.transpose(), 1.0);
        }
        k += b;
    }
    for j in 1..n {
        for i in 0..j {
            a[(i, j)] = 0.0;
        }
    }
    Some(a)
}

/// `L^{-1}` for lower-triangular `L`.
pub(crate) fn lower_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let mut inv = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        inv[(j, j)] = 1.0 / l[(j, j)];
        for i in j + 1..n {
            let mut s = 0.0;
            for p in j..i {
                s -= l[(i, p)] * inv[(p, j)];
            }
            inv[(i, j)] = s / l[(i, i)];
        }
    }
    inv
}

/// Solves `L x = b` in place.
pub(crate) fn forward_solve(l: &DMatrix<f64>, b: &mut [f64]) {
    let n = l.nrows();
    for i in 0..n {
        let mut s = b[i];
        for p in 0..i {
            s -= l[(i, p)] * b[p];
        }
        b[i] = s / l[(i, i)];
    }
}

/// Solves `L^T x = b` in place.
pub(crate) fn backward_solve(l: &DMatrix<f64>, b: &mut [f64]) {
    let n = l.nrows();
    for i in (0..n).rev() {
        let mut s = b[i];
        for p in i + 1..n {
            s -= l[(p, i)] * b[p];
        }
        b[i] = s / l[(i, i)];
    }
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub(crate) fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 1 {
        return m[(0, 0)];
    }
    SymmetricEigen::new(m.clone()).eigenvalues.iter().fold(f64::INFINITY, |a, &v| a.min(v))
}

/// Largest `alpha` with `X + alpha dX` PSD, given `L = chol(X)`; infinite if unbounded.
pub(crate) fn max_step(l_inv: &DMatrix<f64>, dx: &DMatrix<f64>) -> f64 {
    let mut m = l_inv * dx * l_inv.transpose();
    symmetrize(&mut m);
    let lmin = min_eigenvalue(&m);
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

pub(crate) fn frob_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Pivoted Cholesky of a PSD Gram matrix. Returns the indices of the columns
/// kept as an independent set, in pivot order.
pub(crate) fn independent_columns(gram: &DMatrix<f64>, rel_tol: f64) -> Vec<usize> {
    let n = gram.nrows();
    let mut a = gram.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let scale = gram.diagonal().iter().fold(0.0f64, |acc, &v| acc.max(v));
    if scale <= 0.0 {
        return Vec::new();
    }
    let mut kept = Vec::new();
    for k in 0..n {
        let (mut best, mut best_val) = (k, a[(perm[k], perm[k])]);
        for q in k + 1..n {
            let v = a[(perm[q], perm[q])];
            if v > best_val {
                best = q;
                best_val = v;
            }
        }
        if best_val <= rel_tol * scale {
            break;
        }
        perm.swap(k, best);
        let pk = perm[k];
        let d = best_val.sqrt();
        kept.push(pk);
        let col: Vec<f64> = (k + 1..n).map(|q| a[(perm[q], pk)] / d).collect();
        for (qi, q) in (k + 1..n).enumerate() {
            let pq = perm[q];
            for (ri, r) in (k + 1..=q).enumerate() {
                let pr = perm[r];
                let v = a[(pq, pr)] - col[qi] * col[ri];
                a[(pq, pr)] = v;
                a[(pr, pq)] = v;
            }
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize) -> DMatrix<f64> {
        let b = DMatrix::from_fn(n, n, |i, j| ((i * 7 + j * 3) % 11) as f64 / 11.0 - 0.4);
        &b * b.transpose() + DMatrix::identity(n, n)
    }

    #[test]
    fn blocked_cholesky_matches_product() {
        for n in [1, 5, 64, 130] {
            let a = spd(n);
            let l = cholesky(a.clone()).unwrap();
            assert!((&l * l.transpose() - &a).amax() < 1e-10 * a.amax());
        }
        assert!(cholesky(-DMatrix::<f64>::identity(3, 3)).is_none());
    }

    #[test]
    fn triangular_solves() {
        let a = spd(9);
        let l = cholesky(a.clone()).unwrap();
        let x: Vec<f64> = (0..9).map(|i| i as f64 - 3.0).collect();
        let mut b: Vec<f64> = (&a * nalgebra::DVector::from_vec(x.clone())).iter().copied().collect();
        forward_solve(&l, &mut b);
        backward_solve(&l, &mut b);
        for (u, v) in b.iter().zip(&x) {
            assert!((u - v).abs() < 1e-10);
        }
        let li = lower_inverse(&l);
        assert!((&li * &l - DMatrix::<f64>::identity(9, 9)).amax() < 1e-12);
    }

    #[test]
    fn step_to_boundary() {
        let x = DMatrix::<f64>::identity(2, 2);
        let dx = DMatrix::from_row_slice(2, 2, &[-2.0, 0.0, 0.0, 1.0]);
        let l = cholesky(x).unwrap();
        assert!((max_step(&lower_inverse(&l), &dx) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn dependent_columns_detected() {
        let f = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 0.0, 0.0, 1.0, 1.0, 2.0, 1.0]);
        let kept = independent_columns(&(f.transpose() * &f), 1e-12);
        assert_eq!(kept.len(), 2);
    }
}
