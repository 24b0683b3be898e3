use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// `|x − mean_g| / sd_g` with population sd per group; masked where the
/// group has zero spread.
pub fn abs_z_transform<G: Ord>(values: &[f64], groups: &[G]) -> Vec<Option<f64>> {
    let mut acc: BTreeMap<&G, (f64, f64, f64)> = BTreeMap::new();
    for (v, g) in values.iter().zip(groups) {
        let e = acc.entry(g).or_insert((0.0, 0.0, 0.0));
        e.0 += 1.0;
        e.1 += v;
    }
    for (v, g) in values.iter().zip(groups) {
        let e = acc.get_mut(g).unwrap();
        let m = e.1 / e.0;
        e.2 += (v - m).powi(2);
    }
    values
        .iter()
        .zip(groups)
        .map(|(v, g)| {
            let (n, s, ss) = acc[g];
            let sd = (ss / n).sqrt();
            (sd > 0.0).then(|| (v - s / n).abs() / sd)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    /// Mean J of the bin; `None` for an empty bin.
    pub mean_j: Option<f64>,
}

/// Mean J per bin of `x` (PA or z-score) over `bins` bins of `width`
/// starting at `lo`; values outside the range go to the end bins.
pub fn j_vs_pa_curve(j: &[f64], x: &[f64], lo: f64, width: f64, bins: usize) -> Vec<CurveBin> {
    let mut sum = vec![0.0; bins];
    let mut count = vec![0usize; bins];
    for (jv, xv) in j.iter().zip(x) {
        let b = ((xv - lo) / width).floor().clamp(0.0, (bins - 1) as f64) as usize;
        sum[b] += jv;
        count[b] += 1;
    }
    (0..bins)
        .map(|b| CurveBin {
            lo: lo + b as f64 * width,
            hi: lo + (b + 1) as f64 * width,
            count: count[b],
            mean_j: (count[b] > 0).then(|| sum[b] / count[b] as f64),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn abs_z_cases() {
        let v = [1.0, 3.0, 2.0, 5.0, 5.0];
        let g = ["a", "a", "a", "b", "b"];
        let z = abs_z_transform(&v, &g);
        let sd = (2.0f64 / 3.0).sqrt();
        assert_eq!(z[2], Some(0.0));
        assert!((z[0].unwrap() - 1.0 / sd).abs() < 1e-12);
        assert_eq!(z[3], None);
        // One sd above the mean.
        let z = abs_z_transform(&[0.0, 2.0], &[1, 1]);
        assert_eq!(z, vec![Some(1.0), Some(1.0)]);
    }

    #[test]
    fn curve_shapes() {
        let x: Vec<f64> = (0..21).map(|i| 5.0 + i as f64).collect();
        let flat = j_vs_pa_curve(&vec![0.7; 21], &x, 5.0, 1.0, 21);
        assert!(flat.iter().all(|b| b.mean_j == Some(0.7)));
        let m = 15.0;
        let j: Vec<f64> = x.iter().map(|v| (v - m).abs()).collect();
        let u = j_vs_pa_curve(&j, &x, 5.0, 4.0, 5);
        let c = u[2].mean_j.unwrap();
        assert!(u[0].mean_j.unwrap() > c && u[4].mean_j.unwrap() > c);
        let sparse = j_vs_pa_curve(&[1.0], &[5.0], 5.0, 1.0, 3);
        assert_eq!(sparse[1].mean_j, None);
    }
}
