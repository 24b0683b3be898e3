//! Random-intercept linear mixed model `y = β₀ + β₁x + u_g + ε` fitted by
//! profile maximum likelihood over `λ = σ_u² / σ_ε²`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmmFit {
    pub beta0: f64,
    pub beta1: f64,
    pub sigma_u2: f64,
    pub sigma_e2: f64,
    pub lambda: f64,
    pub se_beta1: f64,
    pub z: f64,
    pub p: f64,
    pub ci95: (f64, f64),
    pub log_likelihood: f64,
    pub n_obs: usize,
    pub n_groups: usize,
}

#[derive(Clone, Copy, Debug, Default)]
struct GroupStats {
    n: f64,
    sx: f64,
    sy: f64,
    sxx: f64,
    sxy: f64,
    syy: f64,
}

/// GLS solution at a fixed variance ratio.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gls {
    pub beta: [f64; 2],
    /// `(XᵀWX)⁻¹`.
    pub inv: [[f64; 2]; 2],
    /// Weighted residual sum of squares.
    pub q: f64,
    pub log_det: f64,
}

struct Problem {
    groups: Vec<GroupStats>,
    n: f64,
}

impl Problem {
    fn gls(&self, lambda: f64) -> Result<Gls> {
        let (mut a00, mut a01, mut a11, mut b0, mut b1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        let mut log_det = 0.0;
        for g in &self.groups {
            let c = lambda / (1.0 + g.n * lambda);
            a00 += g.n - c * g.n * g.n;
            a01 += g.sx - c * g.n * g.sx;
            a11 += g.sxx - c * g.sx * g.sx;
            b0 += g.sy - c * g.n * g.sy;
            b1 += g.sxy - c * g.sx * g.sy;
            log_det += (1.0 + g.n * lambda).ln();
        }
        let det = a00 * a11 - a01 * a01;
        if !(det > 1e-12 * (a00 * a11).abs().max(1e-300)) {
            return Err(Error::RankDeficient);
        }
        let inv = [[a11 / det, -a01 / det], [-a01 / det, a00 / det]];
        let beta = [inv[0][0] * b0 + inv[0][1] * b1, inv[1][0] * b0 + inv[1][1] * b1];
        let mut q = 0.0;
        for g in &self.groups {
            let c = lambda / (1.0 + g.n * lambda);
            let (p0, p1) = (beta[0], beta[1]);
            let sr = g.sy - p0 * g.n - p1 * g.sx;
            let srr = g.syy - 2.0 * p0 * g.sy - 2.0 * p1 * g.sxy
                + p0 * p0 * g.n
                + 2.0 * p0 * p1 * g.sx
                + p1 * p1 * g.sxx;
            q += srr - c * sr * sr;
        }
        Ok(Gls {
            beta,
            inv,
            q: q.max(0.0),
            log_det,
        })
    }

    fn profile_ll(&self, lambda: f64) -> Result<f64> {
        let g = self.gls(lambda)?;
        let s2 = g.q / self.n;
        if !(s2 > 0.0) {
            return Ok(f64::INFINITY);
        }
        Ok(-0.5 * (self.n * (2.0 * std::f64::consts::PI * s2).ln() + g.log_det + self.n))
    }
}

fn build(y: &[f64], x: &[f64], group: &[impl AsRef<str>]) -> Result<Problem> {
    if y.len() != x.len() {
        return Err(Error::LengthMismatch(y.len(), x.len()));
    }
    if y.len() != group.len() {
        return Err(Error::LengthMismatch(y.len(), group.len()));
    }
    if y.is_empty() {
        return Err(Error::Empty("observations".into()));
    }
    if y.iter().chain(x).any(|v| !v.is_finite()) {
        return Err(Error::Validation("non-finite observation".into()));
    }
    let mut map: BTreeMap<&str, GroupStats> = BTreeMap::new();
    for ((y, x), g) in y.iter().zip(x).zip(group) {
        let s = map.entry(g.as_ref()).or_default();
        s.n += 1.0;
        s.sx += x;
        s.sy += y;
        s.sxx += x * x;
        s.sxy += x * y;
        s.syy += y * y;
    }
    let min_x = x.iter().copied().fold(f64::INFINITY, f64::min);
    let max_x = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if min_x == max_x {
        return Err(Error::RankDeficient);
    }
    Ok(Problem {
        groups: map.into_values().collect(),
        n: y.len() as f64,
    })
}

/// Generalized least squares at a given λ, exposed for diagnostics.
pub fn gls_at(y: &[f64], x: &[f64], group: &[impl AsRef<str>], lambda: f64) -> Result<Gls> {
    build(y, x, group)?.gls(lambda)
}

const LOG_LAMBDA_RANGE: (f64, f64) = (-18.0, 12.0);
const GRID: usize = 61;
const MAX_ITER: usize = 200;
const TOL: f64 = 1e-10;

/// Profile ML: a log-λ grid scan brackets the maximum, golden-section search
/// refines it, and λ = 0 is compared as the boundary case. A single group
/// makes the random intercept unidentifiable, so λ is fixed at 0 (OLS).
pub fn fit_random_intercept_lmm(y: &[f64], x: &[f64], group: &[impl AsRef<str>]) -> Result<LmmFit> {
    let prob = build(y, x, group)?;
    let n_groups = prob.groups.len();
    let lambda = if n_groups < 2 {
        0.0
    } else {
        let (lo, hi) = LOG_LAMBDA_RANGE;
        let step = (hi - lo) / (GRID - 1) as f64;
        let grid: Vec<(f64, f64)> = (0..GRID)
            .map(|i| {
                let l = lo + i as f64 * step;
                prob.profile_ll(l.exp()).map(|v| (l, v))
            })
            .collect::<Result<_>>()?;
        let best = grid
            .iter()
            .enumerate()
            .filter(|(_, (_, v))| v.is_finite())
            .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
            .map(|(i, _)| i)
            .ok_or_else(|| Error::NonConvergence("likelihood not finite on the λ grid".into()))?;
        let (mut a, mut b) = (
            grid[best.saturating_sub(1)].0,
            grid[(best + 1).min(GRID - 1)].0,
        );
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        let f = |l: f64| prob.profile_ll(l.exp()).unwrap_or(f64::NEG_INFINITY);
        let mut c = b - phi * (b - a);
        let mut d = a + phi * (b - a);
        let (mut fc, mut fd) = (f(c), f(d));
        let mut iter = 0;
        while b - a > TOL {
            iter += 1;
            if iter > MAX_ITER {
                return Err(Error::NonConvergence(format!(
                    "golden section bracket [{a}, {b}] after {MAX_ITER} iterations"
                )));
            }
            if fc >= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - phi * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + phi * (b - a);
                fd = f(d);
            }
        }
        let l_star = ((a + b) / 2.0).exp();
        let at_zero = prob.profile_ll(0.0)?;
        if at_zero >= prob.profile_ll(l_star)? {
            0.0
        } else {
            l_star
        }
    };

    let g = prob.gls(lambda)?;
    let sigma_e2 = g.q / prob.n;
    let se = (sigma_e2 * g.inv[1][1]).sqrt();
    let z = g.beta[1] / se;
    let normal = Normal::standard();
    let p = (2.0 * normal.sf(z.abs())).min(1.0);
    let q975 = normal.inverse_cdf(0.975);
    Ok(LmmFit {
        beta0: g.beta[0],
        beta1: g.beta[1],
        sigma_u2: lambda * sigma_e2,
        sigma_e2,
        lambda,
        se_beta1: se,
        z,
        p,
        ci95: (g.beta[1] - q975 * se, g.beta[1] + q975 * se),
        log_likelihood: prob.profile_ll(lambda)?,
        n_obs: y.len(),
        n_groups,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal as RNormal};

    fn ols(y: &[f64], x: &[f64]) -> (f64, f64) {
        let d = DMatrix::from_fn(y.len(), 2, |i, j| if j == 0 { 1.0 } else { x[i] });
        let b = (d.transpose() * &d).try_inverse().unwrap() * d.transpose() * DVector::from_column_slice(y);
        (b[0], b[1])
    }

    fn generate(seed: u64, groups: usize, per: usize) -> (Vec<f64>, Vec<f64>, Vec<String>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = RNormal::new(0.0, 1.0).unwrap();
        let e = RNormal::new(0.0, 0.5).unwrap();
        let xs = RNormal::new(0.0, 1.0).unwrap();
        let (mut y, mut x, mut g) = (vec![], vec![], vec![]);
        for i in 0..groups {
            let ui = u.sample(&mut rng);
            for _ in 0..per {
                let xi = xs.sample(&mut rng);
                x.push(xi);
                y.push(1.0 + 0.5 * xi + ui + e.sample(&mut rng));
                g.push(format!("g{i}"));
            }
        }
        (y, x, g)
    }

    #[test]
    fn single_group_is_ols() {
        let x = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [1.1, 2.9, 5.2, 7.1, 8.8, 11.2];
        let fit = fit_random_intercept_lmm(&y, &x, &["a"; 6]).unwrap();
        let (b0, b1) = ols(&y, &x);
        assert!((fit.beta0 - b0).abs() < 1e-6 && (fit.beta1 - b1).abs() < 1e-6);
        assert_eq!(fit.sigma_u2, 0.0);
    }

    #[test]
    fn small_lambda_converges_to_ols() {
        let (y, x, g) = generate(1, 10, 8);
        let (b0, b1) = ols(&y, &x);
        let gls = gls_at(&y, &x, &g, 1e-9).unwrap();
        assert!((gls.beta[0] - b0).abs() < 1e-4 && (gls.beta[1] - b1).abs() < 1e-4);
    }

    #[test]
    fn constant_x_is_rank_deficient() {
        assert!(matches!(
            fit_random_intercept_lmm(&[1.0, 2.0, 3.0], &[1.0; 3], &["a", "b", "b"]),
            Err(Error::RankDeficient)
        ));
    }

    #[test]
    fn recovers_planted_parameters() {
        let mut ratios = Vec::new();
        for seed in 0..20 {
            let (y, x, g) = generate(100 + seed, 50, 20);
            let fit = fit_random_intercept_lmm(&y, &x, &g).unwrap();
            assert!((fit.beta1 - 0.5).abs() < 3.0 * fit.se_beta1, "seed {seed}: {fit:?}");
            assert!(fit.p < 1e-6);
            ratios.push(fit.sigma_u2 / fit.sigma_e2);
        }
        let mean_ratio = ratios.iter().sum::<f64>() / ratios.len() as f64;
        assert!((mean_ratio / 4.0 - 1.0).abs() < 0.3, "{mean_ratio}");
    }

    #[test]
    fn profile_maximum_beats_neighbours() {
        let (y, x, g) = generate(7, 12, 6);
        let fit = fit_random_intercept_lmm(&y, &x, &g).unwrap();
        let prob = build(&y, &x, &g).unwrap();
        for f in [0.5, 0.9, 1.1, 2.0] {
            assert!(prob.profile_ll(fit.lambda * f).unwrap() <= fit.log_likelihood + 1e-9);
        }
    }
}
