//! Dense linear algebra for the tiny systems that appear here: d×d
//! volatility matrices and regression normal equations.

use crate::scalar::Scalar;

/// Inverse of a row-major `n×n` matrix by Gauss–Jordan elimination with
/// partial pivoting. `None` when a pivot falls below `tol` times the largest
/// absolute entry.
pub fn invert<S: Scalar>(a: &[S], n: usize, tol: S) -> Option<Vec<S>> {
    assert_eq!(a.len(), n * n);
    let scale = a.iter().fold(S::zero(), |m, v| m.max(v.abs()));
    if scale == S::zero() {
        return None;
    }
    let mut m = a.to_vec();
    let mut inv = vec![S::zero(); n * n];
    for i in 0..n {
        inv[i * n + i] = S::one();
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| {
                m[x * n + col]
                    .abs()
                    .partial_cmp(&m[y * n + col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap();
        if m[pivot * n + col].abs() <= tol * scale {
            return None;
        }
        if pivot != col {
            for j in 0..n {
                m.swap(pivot * n + j, col * n + j);
                inv.swap(pivot * n + j, col * n + j);
            }
        }
        let p = m[col * n + col];
        for j in 0..n {
            m[col * n + j] /= p;
            inv[col * n + j] /= p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = m[r * n + col];
            if factor == S::zero() {
                continue;
            }
            for j in 0..n {
                let mv = m[col * n + j];
                let iv = inv[col * n + j];
                m[r * n + j] -= factor * mv;
                inv[r * n + j] -= factor * iv;
            }
        }
    }
    Some(inv)
}

/// `y = A x` for row-major `n×n` `A`.
pub fn mat_vec<S: Scalar>(a: &[S], x: &[S], y: &mut [S]) {
    let n = x.len();
    for i in 0..n {
        let mut acc = S::zero();
        for j in 0..n {
            acc += a[i * n + j] * x[j];
        }
        y[i] = acc;
    }
}

/// Cholesky factorization of a symmetric positive semi-definite matrix that
/// skips columns which are numerically dependent on earlier ones.
#[derive(Debug, Clone)]
pub struct DroppingCholesky<S> {
    n: usize,
    /// Lower-triangular factor over the kept columns, `kept.len()` square.
    l: Vec<S>,
    kept: Vec<usize>,
}

impl<S: Scalar> DroppingCholesky<S> {
    /// Factors row-major `gram`. A column is dropped when its Schur
    /// complement diagonal falls to `rel_tol` times its original diagonal.
    pub fn factor(gram: &[S], n: usize, rel_tol: S) -> Self {
        assert_eq!(gram.len(), n * n);
        let mut kept: Vec<usize> = Vec::with_capacity(n);
        // rows of L for kept columns, stored densely against kept order
        let mut l: Vec<S> = Vec::with_capacity(n * n);
        for j in 0..n {
            let gjj = gram[j * n + j];
            let r = kept.len();
            // candidate row of L: entries against previously kept columns
            let mut row = vec![S::zero(); r];
            for a in 0..r {
                let ka = kept[a];
                let mut s = gram[j * n + ka];
                for b in 0..a {
                    s -= row[b] * l[a * n + b];
                }
                row[a] = s / l[a * n + a];
            }
            let d = gjj - row.iter().map(|v| *v * *v).sum::<S>();
            if gjj > S::zero() && d > rel_tol * gjj {
                let mut full = vec![S::zero(); n];
                full[..r].copy_from_slice(&row);
                full[r] = d.sqrt();
                l.extend_from_slice(&full);
                kept.push(j);
            }
        }
        Self { n, l, kept }
    }

    pub fn kept(&self) -> &[usize] {
        &self.kept
    }

    pub fn rank(&self) -> usize {
        self.kept.len()
    }

    /// Solves the normal equations for right-hand side `rhs` (length `n`);
    /// coefficients of dropped columns are zero.
    pub fn solve(&self, rhs: &[S]) -> Vec<S> {
        let r = self.kept.len();
        let n = self.n;
        let mut z = vec![S::zero(); r];
        for a in 0..r {
            let mut s = rhs[self.kept[a]];
            for b in 0..a {
                s -= self.l[a * n + b] * z[b];
            }
            z[a] = s / self.l[a * n + a];
        }
        let mut x = vec![S::zero(); r];
        for a in (0..r).rev() {
            let mut s = z[a];
            for b in a + 1..r {
                s -= self.l[b * n + a] * x[b];
            }
            x[a] = s / self.l[a * n + a];
        }
        let mut out = vec![S::zero(); n];
        for (a, &k) in self.kept.iter().enumerate() {
            out[k] = x[a];
        }
        out
    }
}
