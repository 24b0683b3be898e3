//! Summary statistics of one channel inside a segment.

pub const STAT_NAMES: [&str; 12] = [
    "mean",
    "median",
    "min",
    "max",
    "sd",
    "p25",
    "p75",
    "iqr",
    "rms",
    "kurtosis",
    "skew",
    "zero_cross",
];

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population (ddof 0) variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}

/// Sample (ddof 1) variance; 0 for fewer than two values.
pub fn sample_variance(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

/// Linear-interpolation percentile of sorted data, `q` in [0, 1].
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn sorted(x: &[f64]) -> Vec<f64> {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

pub fn median(x: &[f64]) -> f64 {
    percentile_sorted(&sorted(x), 0.5)
}

/// Half the interquartile range.
pub fn quartile_deviation(x: &[f64]) -> f64 {
    let s = sorted(x);
    (percentile_sorted(&s, 0.75) - percentile_sorted(&s, 0.25)) / 2.0
}

/// Drops values outside `[q1 - 1.5 iqr, q3 + 1.5 iqr]`.
pub fn iqr_filter(x: &[f64]) -> Vec<f64> {
    if x.len() < 4 {
        return x.to_vec();
    }
    let s = sorted(x);
    let q1 = percentile_sorted(&s, 0.25);
    let q3 = percentile_sorted(&s, 0.75);
    let (lo, hi) = (q1 - 1.5 * (q3 - q1), q3 + 1.5 * (q3 - q1));
    x.iter().copied().filter(|v| *v >= lo && *v <= hi).collect()
}

/// Sign changes of the series around its own mean.
pub fn zero_crossings(x: &[f64]) -> usize {
    let m = mean(x);
    let mut last = 0.0f64;
    let mut count = 0;
    for v in x {
        let d = v - m;
        if d == 0.0 {
            continue;
        }
        if last != 0.0 && (d > 0.0) != (last > 0.0) {
            count += 1;
        }
        last = d;
    }
    count
}

/// Values in [`STAT_NAMES`] order. Everything is masked for an empty input;
/// skew and kurtosis are masked when the spread is zero.
pub fn stat_features(x: &[f64]) -> [Option<f64>; 12] {
    if x.is_empty() {
        return [None; 12];
    }
    let n = x.len() as f64;
    let s = sorted(x);
    let m = mean(x);
    let var = variance(x);
    let sd = var.sqrt();
    let p25 = percentile_sorted(&s, 0.25);
    let p75 = percentile_sorted(&s, 0.75);
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    let (skew, kurt) = if sd > 0.0 && sd > 1e-12 * m.abs() {
        let m3 = x.iter().map(|v| (v - m).powi(3)).sum::<f64>() / n;
        let m4 = x.iter().map(|v| (v - m).powi(4)).sum::<f64>() / n;
        (Some(m3 / var.powf(1.5)), Some(m4 / (var * var) - 3.0))
    } else {
        (None, None)
    };
    [
        Some(m),
        Some(percentile_sorted(&s, 0.5)),
        Some(s[0]),
        Some(s[s.len() - 1]),
        Some(sd),
        Some(p25),
        Some(p75),
        Some(p75 - p25),
        Some(rms),
        kurt,
        skew,
        Some(zero_crossings(x) as f64),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn get(f: &[Option<f64>; 12], name: &str) -> Option<f64> {
        f[STAT_NAMES.iter().position(|n| *n == name).unwrap()]
    }

    #[test]
    fn one_to_five() {
        let f = stat_features(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(get(&f, "mean"), Some(3.0));
        assert_eq!(get(&f, "median"), Some(3.0));
        assert_eq!(get(&f, "iqr"), Some(2.0));
        assert_eq!(get(&f, "sd"), Some(2f64.sqrt()));
        assert_eq!(get(&f, "skew"), Some(0.0));
        // Excess kurtosis of a discrete uniform on 5 points: 1.7 - 3.
        assert!((get(&f, "kurtosis").unwrap() + 1.3).abs() < 1e-12);
        assert_eq!(get(&f, "zero_cross"), Some(1.0));
    }

    #[test]
    fn constant_series_masks_shape() {
        let f = stat_features(&[4.2; 7]);
        assert_eq!(get(&f, "mean"), Some(4.2));
        assert_eq!(get(&f, "sd"), Some(0.0));
        assert_eq!(get(&f, "skew"), None);
        assert_eq!(get(&f, "kurtosis"), None);
    }

    #[test]
    fn empty_is_masked() {
        assert!(stat_features(&[]).iter().all(Option::is_none));
    }

    #[test]
    fn iqr_filter_drops_spike() {
        let mut x: Vec<f64> = (0..20).map(|i| 33.0 + 0.01 * i as f64).collect();
        x.push(80.0);
        let kept = iqr_filter(&x);
        assert_eq!(kept.len(), 20);
    }

    proptest! {
        #[test]
        fn permutation_invariant_except_zero_cross(
            x in prop::collection::vec(-100f64..100.0, 1..40),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut y = x.clone();
            y.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = stat_features(&x);
            let b = stat_features(&y);
            for (i, name) in STAT_NAMES.iter().enumerate() {
                if *name == "zero_cross" {
                    continue;
                }
                match (a[i], b[i]) {
                    (Some(u), Some(v)) => prop_assert!((u - v).abs() <= 1e-9 * (1.0 + u.abs())),
                    (None, None) => {}
                    _ => prop_assert!(false, "{name} masking differs"),
                }
            }
        }
    }
}
