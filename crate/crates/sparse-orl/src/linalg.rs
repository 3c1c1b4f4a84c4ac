//! Small dense linear-algebra helpers shared across modules.
//!
//! Everything here operates on desk-scale matrices (d ≤ ~30), so plain
//! symmetric eigendecompositions and Cholesky factorizations are used
//! throughout. Support enumeration is lexicographic to keep tie-breaking
//! deterministic.

use nalgebra::{DMatrix, DVector};

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(sigma: &DMatrix<f64>) -> f64 {
    let sym = nalgebra::SymmetricEigen::new(sigma.clone());
    sym.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_eigenvalue(sigma: &DMatrix<f64>) -> f64 {
    let sym = nalgebra::SymmetricEigen::new(sigma.clone());
    sym.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

/// Principal submatrix indexed by `support` (sorted or not; order is kept).
pub fn principal_submatrix(m: &DMatrix<f64>, support: &[usize]) -> DMatrix<f64> {
    let k = support.len();
    DMatrix::from_fn(k, k, |i, j| m[(support[i], support[j])])
}

/// Restrict a vector to `support` coordinates (dense k-vector).
pub fn subvector(v: &DVector<f64>, support: &[usize]) -> DVector<f64> {
    DVector::from_fn(support.len(), |i, _| v[support[i]])
}

/// Scatter a k-vector back into dimension `d` on `support`, zero elsewhere.
pub fn scatter(v: &DVector<f64>, support: &[usize], d: usize) -> DVector<f64> {
    let mut out = DVector::zeros(d);
    for (i, &j) in support.iter().enumerate() {
        out[j] = v[i];
    }
    out
}

/// Quadratic form `v' M v` on a support: `v_S' M_S v_S`.
pub fn quad_form(m: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    (v.transpose() * m * v)[(0, 0)]
}

/// Solve `M x = b` for symmetric positive definite `M` via Cholesky.
/// Returns `None` when the factorization fails (not PD).
pub fn solve_spd(m: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    nalgebra::Cholesky::new(m.clone()).map(|ch| ch.solve(b))
}

/// Minimum-norm least-squares solution of `A x ≈ b` via SVD.
///
/// Handles rank-deficient systems deterministically, which matters for
/// ridge fits with `λ = 0` on degenerate candidate supports.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let svd = nalgebra::SVD::new(a.clone(), true, true);
    svd.solve(b, 1e-12).expect("SVD solve with computed U/V")
}

/// Largest generalized eigenvalue of the pencil `(A, B)` for symmetric `A`
/// and symmetric positive definite `B`: `max_z (z'Az)/(z'Bz)`.
///
/// Returns `None` when `B` has no Cholesky factorization.
pub fn max_generalized_eigenvalue(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<f64> {
    let ch = nalgebra::Cholesky::new(b.clone())?;
    let l_inv = ch.l().try_inverse()?;
    let w = &l_inv * a * l_inv.transpose();
    // Symmetrize against round-off before the eigensolve.
    let w = (&w + w.transpose()) * 0.5;
    Some(max_eigenvalue(&w))
}

/// All generalized eigenvalues of the pencil `(A, B)`, ascending.
pub fn generalized_eigenvalues(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<Vec<f64>> {
    let ch = nalgebra::Cholesky::new(b.clone())?;
    let l_inv = ch.l().try_inverse()?;
    let w = &l_inv * a * l_inv.transpose();
    let w = (&w + w.transpose()) * 0.5;
    let mut ev: Vec<f64> = nalgebra::SymmetricEigen::new(w).eigenvalues.iter().cloned().collect();
    ev.sort_by(f64::total_cmp);
    Some(ev)
}

/// Number of size-`k` subsets of `[n]`, saturating at `u64::MAX`.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u64) {
            Some(v) => v / (i as u64 + 1),
            None => return u64::MAX,
        };
    }
    acc
}

/// Lexicographic enumeration of all size-`k` subsets of `0..n`.
///
/// The enumeration order is the deterministic tie-break order used by every
/// support search in the crate: when two supports attain the same objective,
/// the earlier (lexicographically smaller) one wins.
pub fn for_each_subset<F: FnMut(&[usize])>(n: usize, k: usize, mut f: F) {
    if k > n {
        return;
    }
    if k == 0 {
        f(&[]);
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        // Advance to the next combination in lexicographic order.
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Collect all size-`k` subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for_each_subset(n, k, |s| out.push(s.to_vec()));
    out
}

/// Euclidean projection onto the ℓ1 ball of radius `b` (Duchi et al. style,
/// sort-based). Deterministic; returns the input when already feasible.
pub fn project_l1_ball(v: &DVector<f64>, b: f64) -> DVector<f64> {
    assert!(b >= 0.0, "l1 radius must be nonnegative");
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if l1 <= b {
        return v.clone();
    }
    if b == 0.0 {
        return DVector::zeros(v.len());
    }
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, c| c.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &m) in mags.iter().enumerate() {
        cum += m;
        let t = (cum - b) / (i as f64 + 1.0);
        if m > t {
            theta = t;
        } else {
            break;
        }
    }
    DVector::from_fn(v.len(), |i, _| {
        let x = v[i];
        x.signum() * (x.abs() - theta).max(0.0)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_small_values() {
        assert_eq!(binomial(6, 1), 6);
        assert_eq!(binomial(12, 2), 66);
        assert_eq!(binomial(30, 4), 27405);
        assert_eq!(binomial(3, 5), 0);
        assert_eq!(binomial(5, 0), 1);
    }

    #[test]
    fn subset_enumeration_is_lexicographic() {
        let s = subsets(4, 2);
        assert_eq!(
            s,
            vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]
        );
        assert_eq!(subsets(5, 0), vec![Vec::<usize>::new()]);
    }

    #[test]
    fn l1_projection_reduces_norm_and_fixes_interior_points() {
        let v = DVector::from_vec(vec![3.0, -1.0, 0.5]);
        let p = project_l1_ball(&v, 2.0);
        let n: f64 = p.iter().map(|x| x.abs()).sum();
        assert!((n - 2.0).abs() < 1e-12);
        let q = project_l1_ball(&v, 10.0);
        assert_eq!(q, v);
    }

    #[test]
    fn generalized_eigenvalue_of_identity_pencil_is_one() {
        let a = DMatrix::<f64>::identity(3, 3);
        let b = DMatrix::<f64>::identity(3, 3);
        let lam = max_generalized_eigenvalue(&a, &b).unwrap();
        assert!((lam - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lstsq_matches_exact_solution() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let x = DVector::from_vec(vec![2.0, -1.0]);
        let b = &a * &x;
        let sol = lstsq(&a, &b);
        assert!((sol - x).norm() < 1e-10);
    }
}
