use alloc::vec::Vec;

/// Least-squares nondecreasing fit (pool adjacent violators, equal weights).
pub fn isotonic_nondecreasing(y: &[f64]) -> Vec<f64> {
    // blocks of (sum, count)
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(y.len());
    for &v in y {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (s2, c2) = blocks[blocks.len() - 1];
            let (s1, c1) = blocks[blocks.len() - 2];
            if s1 / c1 as f64 > s2 / c2 as f64 {
                blocks.pop();
                let last = blocks.len() - 1;
                blocks[last] = (s1 + s2, c1 + c2);
            } else {
                break;
            }
        }
    }
    let mut out = Vec::with_capacity(y.len());
    for (s, c) in blocks {
        let m = s / c as f64;
        out.extend(core::iter::repeat_n(m, c));
    }
    out
}

/// Least-squares nonincreasing fit.
pub fn isotonic_nonincreasing(y: &[f64]) -> Vec<f64> {
    let neg: Vec<f64> = y.iter().map(|v| -v).collect();
    isotonic_nondecreasing(&neg).into_iter().map(|v| -v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(isotonic_nondecreasing(&[1.0, 3.0, 2.0, 4.0]), [1.0, 2.5, 2.5, 4.0]);
        assert_eq!(isotonic_nondecreasing(&[3.0, 2.0, 1.0]), [2.0, 2.0, 2.0]);
        assert_eq!(isotonic_nondecreasing(&[]), Vec::<f64>::new());
        assert_eq!(isotonic_nonincreasing(&[1.0, 3.0, 2.0]), [2.0, 2.0, 2.0]);
    }

    proptest! {
        #[test]
        fn output_is_monotone_and_mean_preserving(y in prop::collection::vec(-10.0f64..10.0, 1..100)) {
            let f = isotonic_nondecreasing(&y);
            prop_assert_eq!(f.len(), y.len());
            for w in f.windows(2) {
                prop_assert!(w[0] <= w[1]);
            }
            let (a, b): (f64, f64) = (y.iter().sum(), f.iter().sum());
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
