//! Derivative-free compass search on a box.

use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub(crate) struct SearchResult<S> {
    pub x: Vec<S>,
    pub value: S,
    pub evaluations: usize,
    pub converged: bool,
}

/// Minimizes `f` over `[lo, hi]^n` starting from `x0`, halving the step
/// whenever no coordinate move improves.
pub(crate) fn compass_minimize<S: Scalar>(
    mut f: impl FnMut(&[S]) -> S,
    x0: &[S],
    lo: S,
    hi: S,
    step0: S,
    tol: S,
    max_evals: usize,
) -> SearchResult<S> {
    let mut x: Vec<S> = x0.iter().map(|v| v.max(lo).min(hi)).collect();
    let mut fx = f(&x);
    let mut evals = 1;
    let mut step = step0;
    while step > tol && evals < max_evals {
        let mut improved = false;
        for i in 0..x.len() {
            for sign in [S::one(), -S::one()] {
                let old = x[i];
                let cand = (old + sign * step).max(lo).min(hi);
                if cand == old {
                    continue;
                }
                x[i] = cand;
                let fc = f(&x);
                evals += 1;
                if fc < fx {
                    fx = fc;
                    improved = true;
                    break;
                }
                x[i] = old;
            }
        }
        if !improved {
            step *= S::lit(0.5);
        }
    }
    SearchResult {
        x,
        value: fx,
        evaluations: evals,
        converged: step <= tol,
    }
}
