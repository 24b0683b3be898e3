//! Reference models: constant-rate and Gaussian random baselines, ordinary
//! least squares and Gaussian naive Bayes.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, ArrayView1, ArrayView2};
use rand::Rng;
use rand_distr::{Bernoulli, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Predicts a response with the training response rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BernoulliBaseline {
    pub p: f64,
}

impl BernoulliBaseline {
    pub fn fit(labels: ArrayView1<f64>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Empty("labels".into()));
        }
        Ok(BernoulliBaseline {
            p: labels.iter().filter(|v| **v == 1.0).count() as f64 / labels.len() as f64,
        })
    }

    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Vec<f64> {
        let d = Bernoulli::new(self.p).expect("p in [0, 1]");
        (0..n).map(|_| f64::from(d.sample(rng))).collect()
    }
}

/// Draws PA from N(mean, sd) of the training scores.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianBaseline {
    pub mean: f64,
    pub sd: f64,
}

impl GaussianBaseline {
    pub fn fit(pa: ArrayView1<f64>) -> Result<Self> {
        if pa.is_empty() {
            return Err(Error::Empty("PA labels".into()));
        }
        Ok(GaussianBaseline {
            mean: pa.mean().unwrap(),
            sd: pa.std(if pa.len() > 1 { 1.0 } else { 0.0 }),
        })
    }

    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Vec<f64> {
        let d = Normal::new(self.mean, self.sd).expect("finite sd");
        (0..n).map(|_| d.sample(rng)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OlsModel {
    pub intercept: f64,
    pub coef: Vec<f64>,
    /// Ridge penalty used when the design was rank deficient.
    pub ridge: Option<f64>,
}

impl OlsModel {
    pub const RIDGE: f64 = 1e-3;

    /// Least squares with an intercept via QR. Falls back to ridge
    /// regression (intercept unpenalized) when the design is rank deficient.
    pub fn fit(x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<Self> {
        let (n, p) = x.dim();
        if n == 0 {
            return Err(Error::Empty("design".into()));
        }
        if n != y.len() {
            return Err(Error::LengthMismatch(n, y.len()));
        }
        let design = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x[[i, j - 1]] });
        let target = DVector::from_iterator(n, y.iter().copied());
        let qr = design.clone().qr();
        let r = qr.r();
        let diag_max = (0..r.nrows().min(p + 1)).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
        let full_rank = n > p
            && (0..p + 1).all(|i| r[(i, i)].abs() > 1e-10 * diag_max.max(1e-300));
        let (beta, ridge) = if full_rank {
            let qty = qr.q().transpose() * &target;
            let beta = r
                .solve_upper_triangular(&qty)
                .ok_or(Error::RankDeficient)?;
            (beta, None)
        } else {
            let mut gram = design.transpose() * &design;
            for i in 1..=p {
                gram[(i, i)] += Self::RIDGE;
            }
            let rhs = design.transpose() * &target;
            let beta = gram.cholesky().ok_or(Error::RankDeficient)?.solve(&rhs);
            (beta, Some(Self::RIDGE))
        };
        Ok(OlsModel {
            intercept: beta[0],
            coef: beta.iter().skip(1).copied().collect(),
            ridge,
        })
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Array1<f64> {
        x.rows()
            .into_iter()
            .map(|r| self.intercept + r.iter().zip(&self.coef).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    pub prior: [f64; 2],
    pub mean: [Vec<f64>; 2],
    pub var: [Vec<f64>; 2],
}

impl GaussianNb {
    /// Per-class feature means and variances; variances are padded by
    /// `1e-9` times the largest feature variance.
    pub fn fit(x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<Self> {
        let (n, p) = x.dim();
        if n == 0 {
            return Err(Error::Empty("training set".into()));
        }
        let max_var = (0..p).map(|j| x.column(j).var(0.0)).fold(0.0, f64::max);
        let eps = 1e-9 * max_var.max(1e-300);
        let mut nb = GaussianNb {
            prior: [0.0; 2],
            mean: [vec![0.0; p], vec![0.0; p]],
            var: [vec![0.0; p], vec![0.0; p]],
        };
        for c in 0..2 {
            let rows: Vec<usize> = (0..n).filter(|&i| (y[i] == 1.0) == (c == 1)).collect();
            if rows.is_empty() {
                return Err(Error::DegenerateLabels(format!("no examples of class {c}")));
            }
            nb.prior[c] = rows.len() as f64 / n as f64;
            for j in 0..p {
                let vals: Vec<f64> = rows.iter().map(|&i| x[[i, j]]).collect();
                let m = vals.iter().sum::<f64>() / vals.len() as f64;
                let v = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / vals.len() as f64;
                nb.mean[c][j] = m;
                nb.var[c][j] = v + eps;
            }
        }
        Ok(nb)
    }

    /// Posterior probability of class 1.
    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Array1<f64> {
        x.rows()
            .into_iter()
            .map(|r| {
                let ll = |c: usize| {
                    self.prior[c].ln()
                        + r.iter()
                            .enumerate()
                            .map(|(j, v)| {
                                let var = self.var[c][j];
                                -0.5 * (2.0 * std::f64::consts::PI * var).ln()
                                    - (v - self.mean[c][j]).powi(2) / (2.0 * var)
                            })
                            .sum::<f64>()
                };
                let (l0, l1) = (ll(0), ll(1));
                let m = l0.max(l1);
                let (e0, e1) = ((l0 - m).exp(), (l1 - m).exp());
                e1 / (e0 + e1)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bernoulli_rate() {
        let y = array![1., 1., 0., 1., 1., 0., 1., 1., 0., 1.];
        assert_eq!(BernoulliBaseline::fit(y.view()).unwrap().p, 0.7);
        assert!(BernoulliBaseline::fit(Array1::<f64>::zeros(0).view()).is_err());
    }

    #[test]
    fn gaussian_draws_reproducible() {
        let g = GaussianBaseline::fit(array![10., 12., 14.].view()).unwrap();
        assert_eq!((g.mean, g.sd), (12.0, 2.0));
        let a = g.sample(5, &mut ChaCha8Rng::seed_from_u64(1));
        let b = g.sample(5, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(a, b);
    }

    #[test]
    fn ols_recovers_exact_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Array2::from_shape_simple_fn((30, 3), || rng.random_range(-1.0..1.0));
        let y = x.rows().into_iter().map(|r| 0.5 + 2.0 * r[0] - r[1] + 0.25 * r[2]).collect::<Array1<f64>>();
        let m = OlsModel::fit(x.view(), y.view()).unwrap();
        // Oracle: normal equations solved independently.
        let d = DMatrix::from_fn(30, 4, |i, j| if j == 0 { 1.0 } else { x[[i, j - 1]] });
        let t = DVector::from_iterator(30, y.iter().copied());
        let beta = (d.transpose() * &d).try_inverse().unwrap() * d.transpose() * t;
        assert!((m.intercept - beta[0]).abs() < 1e-9);
        for j in 0..3 {
            assert!((m.coef[j] - beta[j + 1]).abs() < 1e-9);
        }
        assert!((m.coef[0] - 2.0).abs() < 1e-9);
        assert!(m.ridge.is_none());
    }

    #[test]
    fn ols_rank_deficient_uses_ridge() {
        let x = array![[1.0, 2.0], [2.0, 4.0], [3.0, 6.0], [4.0, 8.0]];
        let y = array![1.0, 2.0, 3.0, 4.0];
        let m = OlsModel::fit(x.view(), y.view()).unwrap();
        assert_eq!(m.ridge, Some(OlsModel::RIDGE));
        let p = m.predict(x.view());
        assert!((&p - &y).iter().all(|d| d.abs() < 1e-2));
    }

    #[test]
    fn naive_bayes_separates_classes() {
        let x = array![[0.0, 0.1], [0.1, 0.0], [0.2, 0.1], [1.0, 0.9], [0.9, 1.0], [0.8, 0.9]];
        let y = array![0., 0., 0., 1., 1., 1.];
        let nb = GaussianNb::fit(x.view(), y.view()).unwrap();
        let p = nb.predict_proba(array![[0.05, 0.05], [0.95, 0.95]].view());
        assert!(p[0] < 0.01 && p[1] > 0.99);
    }
}
