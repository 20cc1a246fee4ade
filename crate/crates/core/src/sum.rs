//! Pairwise (cascade) summation.
//!
//! Rounding error grows as O(log n) instead of O(n) for naive accumulation,
//! which matters for kernel sums over tens of thousands of dyads.

const BLOCK: usize = 32;

/// Pairwise sum of `term(0) + ... + term(len - 1)`.
///
/// The summation tree depends only on `len`, so results are bit-reproducible.
pub fn pairwise_sum_by<F>(len: usize, term: F) -> f64
where
    F: Fn(usize) -> f64,
{
    fn go<F: Fn(usize) -> f64>(start: usize, len: usize, term: &F) -> f64 {
        if len <= BLOCK {
            let mut acc = 0.0;
            for k in start..start + len {
                acc += term(k);
            }
            acc
        } else {
            let half = len / 2;
            go(start, half, term) + go(start + half, len - half, term)
        }
    }
    go(0, len, &term)
}

pub fn pairwise_sum(values: &[f64]) -> f64 {
    pairwise_sum_by(values.len(), |k| values[k])
}
