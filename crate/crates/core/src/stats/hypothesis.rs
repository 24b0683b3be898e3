use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    /// Two-sided.
    pub p: f64,
    pub df: f64,
    pub mean_diff: f64,
    pub n: usize,
}

/// Paired t test on `a - b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(Error::Empty("need at least two pairs".into()));
    }
    let n = a.len() as f64;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if !(var > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let t = mean / (var / n).sqrt();
    let df = n - 1.0;
    Ok(TTest {
        t,
        p: student_t_two_sided(t, df),
        df,
        mean_diff: mean,
        n: a.len(),
    })
}

pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive df");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsTest {
    pub d: f64,
    pub p: f64,
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Theta-function form converges fast for small arguments.
        let c = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let s: f64 = (1..=20)
            .map(|k| (-((2 * k - 1) as f64).powi(2) * c).exp())
            .sum();
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s
    } else {
        let s: f64 = (1..=20)
            .map(|k| {
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * (k * k) as f64 * lambda * lambda).exp()
            })
            .sum();
        (2.0 * s).clamp(0.0, 1.0)
    }
}

/// Two-sample Kolmogorov–Smirnov statistic with the asymptotic p-value at
/// `sqrt(nm / (n + m)) · D`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsTest> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("KS samples".into()));
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = x[i].min(y[j]);
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let en = (n * m) as f64 / (n + m) as f64;
    Ok(KsTest {
        d,
        p: kolmogorov_sf(en.sqrt() * d),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RmAnova {
    pub f: f64,
    pub p: f64,
    pub df_effect: f64,
    pub df_error: f64,
    pub n: usize,
    /// Participants missing one of the two conditions.
    pub excluded: Vec<String>,
}

/// Two-condition repeated-measures ANOVA on per-participant condition
/// means. Equivalent to the paired t test: `F = t²`.
pub fn repeated_measures_f(rows: &[(String, Option<f64>, Option<f64>)]) -> Result<RmAnova> {
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut excluded = Vec::new();
    for (id, x, y) in rows {
        match (x, y) {
            (Some(x), Some(y)) => {
                a.push(*x);
                b.push(*y);
            }
            _ => {
                log::info!("participant {id} lacks a condition; excluded");
                excluded.push(id.clone());
            }
        }
    }
    if a.len() < 2 {
        return Err(Error::TooFewParticipants {
            needed: 2,
            got: a.len(),
        });
    }
    let t = paired_t_test(&a, &b)?;
    Ok(RmAnova {
        f: t.t * t.t,
        p: t.p,
        df_effect: 1.0,
        df_error: t.df,
        n: a.len(),
        excluded,
    })
}
