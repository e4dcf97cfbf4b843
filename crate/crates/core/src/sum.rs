//! Fixed-shape pairwise summation.
//!
//! Every sum that feeds a norm or an integral goes through these functions so
//! that results do not depend on how a caller schedules work across threads.
//! The tree splits at `len / 2` and sums leaves of at most [`LEAF`] terms
//! left to right.

const LEAF: usize = 8;

/// Pairwise sum of a slice.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= LEAF {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Pairwise sum of `term(i)` for `i` in `0..len`, using the same tree shape
/// as [`pairwise_sum`] without materializing the terms.
pub fn pairwise_sum_by<F: Fn(usize) -> f64>(len: usize, term: F) -> f64 {
    fn go<F: Fn(usize) -> f64>(start: usize, len: usize, term: &F) -> f64 {
        if len <= LEAF {
            let mut acc = 0.0;
            for i in start..start + len {
                acc += term(i);
            }
            return acc;
        }
        let mid = len / 2;
        go(start, mid, term) + go(start + mid, len - mid, term)
    }
    go(0, len, &term)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_sums_are_sequential() {
        assert_eq!(pairwise_sum(&[]), 0.0);
        assert_eq!(pairwise_sum(&[1.0, 2.0, 3.0]), 6.0);
    }

    #[test]
    fn beats_naive_summation_on_ill_conditioned_input() {
        let xs: Vec<f64> = (0..1 << 16)
            .map(|i| if i == 0 { 1.0 } else { 1e-16 })
            .collect();
        let exact = 1.0 + 1e-16 * ((1 << 16) - 1) as f64;
        let naive: f64 = xs.iter().sum();
        assert!((pairwise_sum(&xs) - exact).abs() < (naive - exact).abs());
    }

    proptest! {
        #[test]
        fn closure_form_matches_slice_form(xs in prop::collection::vec(-1e6f64..1e6, 0..300)) {
            let by = pairwise_sum_by(xs.len(), |i| xs[i]);
            prop_assert_eq!(by.to_bits(), pairwise_sum(&xs).to_bits());
        }
    }
}
