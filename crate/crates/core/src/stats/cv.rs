use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::RowKey;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CvMode {
    /// One fold per participant-day: other participants plus the test
    /// participant's earlier days.
    SemiPersonalized,
    /// One fold per participant.
    Loso,
    /// Participants dealt round-robin (sorted by id) into `k` folds.
    GroupKFold { k: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fold {
    pub test_participants: Vec<String>,
    /// Set for semi-personalized folds.
    pub test_day: Option<u32>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvPlan {
    pub mode: CvMode,
    pub folds: Vec<Fold>,
}

/// Builds folds over row indices of `keys`.
pub fn make_cv_plan(keys: &[RowKey], mode: CvMode) -> Result<CvPlan> {
    let mut by_participant: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, k) in keys.iter().enumerate() {
        by_participant.entry(k.participant_id.as_str()).or_default().push(i);
    }
    if by_participant.len() < 2 {
        return Err(Error::TooFewParticipants {
            needed: 2,
            got: by_participant.len(),
        });
    }
    let others = |p: &str| -> Vec<usize> {
        (0..keys.len()).filter(|&i| keys[i].participant_id != p).collect()
    };
    let mut folds = Vec::new();
    match mode {
        CvMode::SemiPersonalized => {
            for (p, rows) in &by_participant {
                let days: BTreeSet<u32> = rows.iter().map(|&i| keys[i].study_day).collect();
                for d in days {
                    let mut train = others(p);
                    train.extend(rows.iter().copied().filter(|&i| keys[i].study_day < d));
                    train.sort_unstable();
                    folds.push(Fold {
                        test_participants: vec![p.to_string()],
                        test_day: Some(d),
                        train,
                        test: rows.iter().copied().filter(|&i| keys[i].study_day == d).collect(),
                    });
                }
            }
        }
        CvMode::Loso => {
            for (p, rows) in &by_participant {
                folds.push(Fold {
                    test_participants: vec![p.to_string()],
                    test_day: None,
                    train: others(p),
                    test: rows.clone(),
                });
            }
        }
        CvMode::GroupKFold { k } => {
            if k < 2 {
                return Err(Error::config("cv.k", "need at least 2 folds"));
            }
            let ids: Vec<&str> = by_participant.keys().copied().collect();
            let k = k.min(ids.len());
            for f in 0..k {
                let members: BTreeSet<&str> =
                    ids.iter().enumerate().filter(|(i, _)| i % k == f).map(|(_, p)| *p).collect();
                let (test, train): (Vec<usize>, Vec<usize>) =
                    (0..keys.len()).partition(|&i| members.contains(keys[i].participant_id.as_str()));
                folds.push(Fold {
                    test_participants: members.iter().map(|s| s.to_string()).collect(),
                    test_day: None,
                    train,
                    test,
                });
            }
        }
    }
    Ok(CvPlan { mode, folds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Timestamp;
    use proptest::prelude::*;

    fn keys(spec: &[(&str, u32, usize)]) -> Vec<RowKey> {
        let mut out = Vec::new();
        for (p, day, n) in spec {
            for i in 0..*n {
                out.push(RowKey {
                    participant_id: p.to_string(),
                    start: Timestamp((*day as i64) * 86_400 + i as i64 * 1800),
                    study_day: *day,
                });
            }
        }
        out
    }

    #[test]
    fn semi_personalized_three_by_two() {
        let k = keys(&[("a", 1, 2), ("a", 2, 2), ("b", 1, 2), ("b", 2, 2), ("c", 1, 2), ("c", 2, 2)]);
        let plan = make_cv_plan(&k, CvMode::SemiPersonalized).unwrap();
        assert_eq!(plan.folds.len(), 6);
        for f in &plan.folds {
            let p = &f.test_participants[0];
            let own: Vec<u32> = f
                .train
                .iter()
                .filter(|&&i| &k[i].participant_id == p)
                .map(|&i| k[i].study_day)
                .collect();
            match f.test_day {
                Some(1) => assert!(own.is_empty()),
                Some(2) => assert_eq!(own, vec![1, 1]),
                _ => unreachable!(),
            }
        }
    }

    #[test]
    fn loso_and_errors() {
        let k = keys(&[("a", 1, 3), ("b", 1, 3), ("c", 2, 1)]);
        assert_eq!(make_cv_plan(&k, CvMode::Loso).unwrap().folds.len(), 3);
        assert!(matches!(
            make_cv_plan(&keys(&[("a", 1, 3)]), CvMode::Loso),
            Err(Error::TooFewParticipants { .. })
        ));
    }

    proptest! {
        #[test]
        fn folds_never_leak(
            spec in prop::collection::vec((0usize..6, 1u32..5, 1usize..4), 2..20),
            mode in 0usize..3,
        ) {
            let ids = ["a", "b", "c", "d", "e", "f"];
            let rows: Vec<(&str, u32, usize)> = spec.iter().map(|(p, d, n)| (ids[*p], *d, *n)).collect();
            let k = keys(&rows);
            let mode = [CvMode::SemiPersonalized, CvMode::Loso, CvMode::GroupKFold { k: 3 }][mode];
            match make_cv_plan(&k, mode) {
                Ok(plan) => {
                    let mut tested = BTreeSet::new();
                    for f in &plan.folds {
                        let train: BTreeSet<usize> = f.train.iter().copied().collect();
                        prop_assert!(f.test.iter().all(|i| !train.contains(i)));
                        tested.extend(f.test.iter().copied());
                    }
                    prop_assert_eq!(tested.len(), k.len());
                }
                Err(Error::TooFewParticipants { .. }) => {}
                Err(e) => prop_assert!(false, "{e}"),
            }
        }
    }
}
