//! Dense per-time, per-path storage.
//!
//! Values are laid out time-major: all paths of time index `k` are
//! contiguous, with `dim` components per path. Backward regressions and
//! forward accumulations both sweep one time slice at a time, so this is
//! the access pattern every solver in the crate uses.

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct PathField<S> {
    n_times: usize,
    n_paths: usize,
    dim: usize,
    data: Vec<S>,
}

impl<S: Scalar> PathField<S> {
    pub fn zeros(n_times: usize, n_paths: usize, dim: usize) -> Self {
        Self::filled(n_times, n_paths, dim, S::zero())
    }

    pub fn filled(n_times: usize, n_paths: usize, dim: usize, value: S) -> Self {
        Self {
            n_times,
            n_paths,
            dim,
            data: vec![value; n_times * n_paths * dim],
        }
    }

    /// Wraps an existing buffer. Panics if the length does not match the shape.
    pub fn from_vec(n_times: usize, n_paths: usize, dim: usize, data: Vec<S>) -> Self {
        assert_eq!(data.len(), n_times * n_paths * dim, "PathField shape mismatch");
        Self {
            n_times,
            n_paths,
            dim,
            data,
        }
    }

    #[inline]
    pub fn n_times(&self) -> usize {
        self.n_times
    }

    #[inline]
    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn offset(&self, k: usize, p: usize) -> usize {
        (k * self.n_paths + p) * self.dim
    }

    #[inline]
    pub fn get(&self, k: usize, p: usize, j: usize) -> S {
        self.data[self.offset(k, p) + j]
    }

    #[inline]
    pub fn set(&mut self, k: usize, p: usize, j: usize, v: S) {
        let o = self.offset(k, p);
        self.data[o + j] = v;
    }

    /// Components of path `p` at time index `k`.
    #[inline]
    pub fn at(&self, k: usize, p: usize) -> &[S] {
        let o = self.offset(k, p);
        &self.data[o..o + self.dim]
    }

    #[inline]
    pub fn at_mut(&mut self, k: usize, p: usize) -> &mut [S] {
        let o = self.offset(k, p);
        &mut self.data[o..o + self.dim]
    }

    /// Whole time slice `k`: `n_paths * dim` values.
    #[inline]
    pub fn slice(&self, k: usize) -> &[S] {
        let w = self.n_paths * self.dim;
        &self.data[k * w..(k + 1) * w]
    }

    #[inline]
    pub fn slice_mut(&mut self, k: usize) -> &mut [S] {
        let w = self.n_paths * self.dim;
        &mut self.data[k * w..(k + 1) * w]
    }

    /// Component `j` of every path at time `k`, copied out.
    pub fn component(&self, k: usize, j: usize) -> Vec<S> {
        (0..self.n_paths).map(|p| self.get(k, p, j)).collect()
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<S> {
        self.data
    }

    pub fn iter(&self) -> impl Iterator<Item = &S> {
        self.data.iter()
    }

    pub fn max_abs(&self) -> S {
        self.data.iter().fold(S::zero(), |m, v| m.max(v.abs()))
    }

    /// True when every entry of slice `k` equals the first one bitwise.
    pub fn slice_is_constant(&self, k: usize) -> bool {
        let s = self.slice(k);
        s.iter().all(|v| *v == s[0])
    }

    pub fn same_shape<T: Scalar>(&self, other: &PathField<T>) -> bool {
        self.n_times == other.n_times && self.n_paths == other.n_paths && self.dim == other.dim
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_time_major() {
        let mut f = PathField::<f64>::zeros(3, 2, 2);
        f.set(1, 1, 0, 5.0);
        assert_eq!(f.slice(1), &[0.0, 0.0, 5.0, 0.0]);
        assert_eq!(f.at(1, 1), &[5.0, 0.0]);
        assert_eq!(f.component(1, 0), vec![0.0, 5.0]);
    }

    #[test]
    #[should_panic]
    fn from_vec_checks_shape() {
        let _ = PathField::<f64>::from_vec(2, 2, 1, vec![0.0; 3]);
    }
}
