//! Semi-personalized min-max scaling.
//!
//! Day 1 of a test participant is scaled with bounds from every other
//! participant; from day 2 on, bounds come from the participant's own
//! earlier days, except for features never observed there, which keep the
//! other participants' bounds. Zero-range features map to 0.5 and
//! out-of-range test values are clipped to [0, 1].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinMaxBounds {
    pub names: Vec<String>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    /// Scaled reference mean, substituted for masked cells.
    pub fill: Vec<f64>,
}

impl MinMaxBounds {
    pub fn fit<'a, I>(names: &[String], rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [Option<f64>]>,
    {
        let acc = accumulate(names.len(), rows);
        Self::from_columns(names, acc.into_iter().map(Some).collect())
    }

    /// Like [`fit`](Self::fit), but a feature never observed in `primary`
    /// takes its bounds from `fallback`.
    pub fn fit_with_fallback<'a, I, J>(names: &[String], primary: I, fallback: J) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [Option<f64>]>,
        J: IntoIterator<Item = &'a [Option<f64>]>,
    {
        let own = accumulate(names.len(), primary);
        if own.iter().all(|c| c.n > 0) {
            return Self::from_columns(names, own.into_iter().map(Some).collect());
        }
        let other = accumulate(names.len(), fallback);
        let cols = own
            .into_iter()
            .zip(other)
            .enumerate()
            .map(|(j, (a, b))| {
                if a.n == 0 {
                    log::debug!("feature `{}` unseen in own history, using other participants", names[j]);
                    Some(b)
                } else {
                    Some(a)
                }
            })
            .collect();
        Self::from_columns(names, cols)
    }

    fn from_columns(names: &[String], cols: Vec<Option<Column>>) -> Result<Self> {
        let p = names.len();
        let mut bounds = MinMaxBounds {
            names: names.to_vec(),
            min: vec![0.0; p],
            max: vec![0.0; p],
            fill: vec![0.0; p],
        };
        for (j, c) in cols.iter().enumerate() {
            match c {
                Some(c) if c.n > 0 => {
                    bounds.min[j] = c.min;
                    bounds.max[j] = c.max;
                }
                _ => return Err(Error::MissingReferenceFeature(names[j].clone())),
            }
        }
        for (j, c) in cols.iter().enumerate() {
            let c = c.as_ref().unwrap();
            bounds.fill[j] = bounds.scale(j, c.sum / c.n as f64);
        }
        Ok(bounds)
    }

    pub fn scale(&self, j: usize, v: f64) -> f64 {
        let (lo, hi) = (self.min[j], self.max[j]);
        if hi <= lo {
            0.5
        } else {
            ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
        }
    }

    pub fn apply(&self, row: &[Option<f64>]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, v)| match v {
                Some(v) => self.scale(j, *v),
                None => self.fill[j],
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug)]
struct Column {
    min: f64,
    max: f64,
    sum: f64,
    n: usize,
}

fn accumulate<'a, I>(p: usize, rows: I) -> Vec<Column>
where
    I: IntoIterator<Item = &'a [Option<f64>]>,
{
    let mut cols = vec![
        Column {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            sum: 0.0,
            n: 0,
        };
        p
    ];
    for row in rows {
        debug_assert_eq!(row.len(), p);
        for (c, v) in cols.iter_mut().zip(row) {
            if let Some(v) = *v {
                c.min = c.min.min(v);
                c.max = c.max.max(v);
                c.sum += v;
                c.n += 1;
            }
        }
    }
    cols
}

/// Rows whose values define the scaling for `test_participant` on
/// `study_day`. Falls back to other participants when the participant has no
/// earlier rows.
pub fn reference_rows(matrix: &FeatureMatrix, test_participant: &str, study_day: u32) -> Vec<usize> {
    let others = || {
        matrix
            .keys
            .iter()
            .enumerate()
            .filter(|(_, k)| k.participant_id != test_participant)
            .map(|(i, _)| i)
            .collect::<Vec<_>>()
    };
    if study_day <= 1 {
        return others();
    }
    let own: Vec<usize> = matrix
        .keys
        .iter()
        .enumerate()
        .filter(|(_, k)| k.participant_id == test_participant && k.study_day < study_day)
        .map(|(i, _)| i)
        .collect();
    if own.is_empty() {
        log::debug!("{test_participant} day {study_day}: no earlier rows, using other participants");
        others()
    } else {
        own
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedRows {
    /// Indices into the source matrix of the test participant-day rows.
    pub row_indices: Vec<usize>,
    pub values: Vec<Vec<f64>>,
    pub bounds: MinMaxBounds,
}

pub fn normalize_semi_personalized(
    matrix: &FeatureMatrix,
    test_participant: &str,
    study_day: u32,
) -> Result<NormalizedRows> {
    if study_day == 0 {
        return Err(Error::Validation("study days start at 1".into()));
    }
    let reference = reference_rows(matrix, test_participant, study_day);
    let others = || {
        matrix
            .keys
            .iter()
            .zip(&matrix.rows)
            .filter(|(k, _)| k.participant_id != test_participant)
            .map(|(_, r)| r.as_slice())
    };
    let bounds = MinMaxBounds::fit_with_fallback(
        &matrix.names,
        reference.iter().map(|&i| matrix.rows[i].as_slice()),
        others(),
    )?;
    let row_indices: Vec<usize> = matrix
        .keys
        .iter()
        .enumerate()
        .filter(|(_, k)| k.participant_id == test_participant && k.study_day == study_day)
        .map(|(i, _)| i)
        .collect();
    let values = row_indices
        .iter()
        .map(|&i| bounds.apply(&matrix.rows[i]))
        .collect();
    Ok(NormalizedRows {
        row_indices,
        values,
        bounds,
    })
}
