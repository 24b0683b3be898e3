//! RR-interval validation and heart-rate-variability features.

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use super::stats::{mean, median, quartile_deviation, sample_variance};
use crate::data::RrSample;
use crate::error::{Error, Result};

pub const HRV_NAMES: [&str; 13] = [
    "hrv_mean_nni",
    "hrv_sdnn",
    "hrv_rmssd",
    "hrv_nni20",
    "hrv_nni50",
    "hrv_pnni20",
    "hrv_pnni50",
    "hrv_cvsd",
    "hrv_cvnni",
    "hrv_vlf",
    "hrv_lf",
    "hrv_hf",
    "hrv_hf_lf_ratio",
];

/// Minimum beats for the spectral features.
pub const MIN_SPECTRAL_BEATS: usize = 64;
pub const INTERP_HZ: f64 = 4.0;

/// Criterion-beat-difference parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RrConfig {
    /// Open plausibility range in ms.
    pub min_ms: f64,
    pub max_ms: f64,
    /// Multiplier on the quartile deviation of successive differences
    /// (maximum expected difference).
    pub med_factor: f64,
    /// Multiplier on the quartile deviation of RR (minimal artifact
    /// difference).
    pub mad_factor: f64,
}

impl Default for RrConfig {
    fn default() -> Self {
        RrConfig {
            min_ms: 250.0,
            max_ms: 3000.0,
            med_factor: 3.32,
            mad_factor: 2.9,
        }
    }
}

impl RrConfig {
    pub fn criterion_beat_difference(&self, rr: &[f64]) -> f64 {
        let diffs: Vec<f64> = rr.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        let med = if diffs.is_empty() {
            0.0
        } else {
            self.med_factor * quartile_deviation(&diffs)
        };
        let mad = (median(rr) - self.mad_factor * quartile_deviation(rr)) / 3.0;
        (med + mad) / 2.0
    }
}

/// One sweep: keep a beat when it stays within `cbd` of the last accepted
/// beat. The reference starts at the series median.
fn sweep(rr: &[RrSample], cbd: f64) -> Vec<RrSample> {
    let values: Vec<f64> = rr.iter().map(|r| r.rr_ms).collect();
    let mut reference = median(&values);
    let mut kept = Vec::with_capacity(rr.len());
    for r in rr {
        if (r.rr_ms - reference).abs() <= cbd {
            kept.push(*r);
            reference = r.rr_ms;
        }
    }
    kept
}

/// Removes out-of-range beats, then repeats the criterion-beat-difference
/// sweep until nothing more is removed.
pub fn validate_rr(series: &[RrSample], cfg: &RrConfig) -> Result<Vec<RrSample>> {
    let mut kept: Vec<RrSample> = series
        .iter()
        .copied()
        .filter(|r| r.rr_ms.is_finite() && r.rr_ms > cfg.min_ms && r.rr_ms < cfg.max_ms)
        .collect();
    loop {
        if kept.is_empty() {
            return Err(Error::NoValidRr);
        }
        let values: Vec<f64> = kept.iter().map(|r| r.rr_ms).collect();
        let cbd = cfg.criterion_beat_difference(&values);
        let next = sweep(&kept, cbd);
        if next.len() == kept.len() {
            return Ok(next);
        }
        kept = next;
    }
}

/// Values in [`HRV_NAMES`] order from validated RR intervals (ms).
pub fn hrv_features(rr: &[f64]) -> [Option<f64>; 13] {
    let mut out = [None; 13];
    if rr.len() < 2 {
        return out;
    }
    let diffs: Vec<f64> = rr.windows(2).map(|w| w[1] - w[0]).collect();
    let mean_nni = mean(rr);
    let sdnn = sample_variance(rr).sqrt();
    let rmssd = (diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64).sqrt();
    let nni20 = diffs.iter().filter(|d| d.abs() > 20.0).count() as f64;
    let nni50 = diffs.iter().filter(|d| d.abs() > 50.0).count() as f64;
    let n_diff = diffs.len() as f64;
    out[0] = Some(mean_nni);
    out[1] = Some(sdnn);
    out[2] = Some(rmssd);
    out[3] = Some(nni20);
    out[4] = Some(nni50);
    out[5] = Some(100.0 * nni20 / n_diff);
    out[6] = Some(100.0 * nni50 / n_diff);
    out[7] = Some(rmssd / mean_nni);
    out[8] = Some(sdnn / mean_nni);
    if rr.len() >= MIN_SPECTRAL_BEATS {
        let (vlf, lf, hf) = band_powers(rr);
        out[9] = Some(vlf);
        out[10] = Some(lf);
        out[11] = Some(hf);
        out[12] = (lf > 0.0).then(|| hf / lf);
    }
    out
}

/// Natural cubic spline through `(x, y)` evaluated at `at` (all sorted).
pub fn natural_cubic_spline(x: &[f64], y: &[f64], at: &[f64]) -> Vec<f64> {
    let n = x.len();
    assert!(n >= 2 && y.len() == n);
    // Second derivatives via the tridiagonal system, natural ends.
    let mut m = vec![0.0; n];
    if n > 2 {
        let k = n - 2;
        let mut diag = vec![0.0; k];
        let mut upper = vec![0.0; k];
        let mut rhs = vec![0.0; k];
        for i in 1..n - 1 {
            let h0 = x[i] - x[i - 1];
            let h1 = x[i + 1] - x[i];
            diag[i - 1] = 2.0 * (h0 + h1);
            upper[i - 1] = h1;
            rhs[i - 1] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
        }
        // Thomas algorithm; the sub-diagonal equals the previous upper entry.
        for i in 1..k {
            let w = upper[i - 1] / diag[i - 1];
            diag[i] -= w * upper[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        m[k] = rhs[k - 1] / diag[k - 1];
        for i in (0..k - 1).rev() {
            m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
        }
    }
    let mut seg = 0;
    at.iter()
        .map(|&t| {
            while seg + 2 < n && t > x[seg + 1] {
                seg += 1;
            }
            let h = x[seg + 1] - x[seg];
            let a = (x[seg + 1] - t) / h;
            let b = (t - x[seg]) / h;
            a * y[seg]
                + b * y[seg + 1]
                + ((a * a * a - a) * m[seg] + (b * b * b - b) * m[seg + 1]) * h * h / 6.0
        })
        .collect()
}

/// One-sided periodogram of a linearly detrended series sampled at `fs`.
/// Returns (frequencies, power spectral density).
pub fn periodogram(signal: &[f64], fs: f64) -> (Vec<f64>, Vec<f64>) {
    let n = signal.len();
    let t_mean = (n as f64 - 1.0) / 2.0;
    let y_mean = mean(signal);
    let sxx: f64 = (0..n).map(|i| (i as f64 - t_mean).powi(2)).sum();
    let sxy: f64 = signal
        .iter()
        .enumerate()
        .map(|(i, v)| (i as f64 - t_mean) * (v - y_mean))
        .sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let mut buf: Vec<Complex<f64>> = signal
        .iter()
        .enumerate()
        .map(|(i, v)| Complex::new(v - y_mean - slope * (i as f64 - t_mean), 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2 + 1;
    let freqs = (0..half).map(|k| k as f64 * fs / n as f64).collect();
    let psd = (0..half)
        .map(|k| {
            let p = buf[k].norm_sqr() / (fs * n as f64);
            let edge = k == 0 || (n % 2 == 0 && k == n / 2);
            if edge {
                p
            } else {
                2.0 * p
            }
        })
        .collect();
    (freqs, psd)
}

/// VLF, LF and HF power (ms²) of the 4 Hz interpolated tachogram.
pub fn band_powers(rr: &[f64]) -> (f64, f64, f64) {
    let mut t = Vec::with_capacity(rr.len());
    let mut acc = 0.0;
    for v in rr {
        acc += v / 1000.0;
        t.push(acc);
    }
    let t0 = t[0];
    let samples = ((t[t.len() - 1] - t0) * INTERP_HZ).floor() as usize + 1;
    let grid: Vec<f64> = (0..samples).map(|i| t0 + i as f64 / INTERP_HZ).collect();
    let tachogram = natural_cubic_spline(&t, rr, &grid);
    let (freqs, psd) = periodogram(&tachogram, INTERP_HZ);
    let df = INTERP_HZ / tachogram.len() as f64;
    let band = |lo: f64, hi: f64| -> f64 {
        freqs
            .iter()
            .zip(&psd)
            .filter(|(f, _)| **f >= lo && **f < hi)
            .map(|(_, p)| p * df)
            .sum()
    };
    (band(0.003, 0.04), band(0.04, 0.15), band(0.15, 0.4))
}
