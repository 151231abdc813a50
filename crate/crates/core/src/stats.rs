//! Order statistics over repetitions.

use alloc::vec::Vec;

/// Summary of a sample: quartiles by linear interpolation between order
/// statistics, and the sample standard deviation (n − 1 denominator, zero
/// for a single value).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub std: f64,
}

/// Quantile `q ∈ [0, 1]` of an ascending slice, interpolating linearly at
/// position `q (n − 1)`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

pub fn summarize(values: &[f64]) -> Summary {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        libm::sqrt(values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64)
    } else {
        0.0
    };
    Summary {
        median: quantile_sorted(&sorted, 0.5),
        q1: quantile_sorted(&sorted, 0.25),
        q3: quantile_sorted(&sorted, 0.75),
        std,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quartiles_of_small_samples() {
        let s = summarize(&[4.0, 1.0, 3.0, 2.0]);
        assert_eq!(s.median, 2.5);
        assert_eq!(s.q1, 1.75);
        assert_eq!(s.q3, 3.25);
        assert!((s.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);

        let one = summarize(&[0.7]);
        assert_eq!((one.median, one.q1, one.q3, one.std), (0.7, 0.7, 0.7, 0.0));
    }

    proptest! {
        #[test]
        fn quartiles_are_ordered(v in proptest::collection::vec(0.0f64..1e3, 1..60)) {
            let s = summarize(&v);
            prop_assert!(s.q1 <= s.median && s.median <= s.q3);
            prop_assert!(s.std >= 0.0);
        }
    }
}
