use super::*;
use crate::synth::{generate, CohortSpec};
use crate::trigger::OutcomeSource;

fn quick_opts() -> RunOptions {
    let mut o = RunOptions::default();
    o.eval.receptivity.epochs = 20;
    o.eval.emotion.epochs = 20;
    o.eval.mc_passes = 30;
    o.eval.cv = CvMode::GroupKFold { k: 3 };
    o
}

#[test]
fn small_run_produces_every_artifact() {
    let s = generate(&CohortSpec { participants: 6, days: 3, seed: 5, ..CohortSpec::default() }).unwrap();
    let run = run_in_memory(&s.cohort, Some(&s.truth), &quick_opts()).unwrap();
    assert_eq!(run.trained.folds.len(), 3);
    // 6 participants x 3 days x 5 windows, one decision per policy.
    assert_eq!(run.simulation.decisions.len() + 2 * run.simulation.skipped_windows, 180);
    assert!(!run.prompts.is_empty());
    assert!(run.evaluation.rq1.lmm.value.is_some(), "{:?}", run.evaluation.rq1.lmm.error);
    assert!(run.evaluation.metrics.summary.contains_key("nn.weighted_f1"));
    for d in &run.simulation.decisions {
        let w = run.windows.iter().find(|w| w.participant == d.participant && w.day == d.day && w.window == d.window).unwrap();
        assert!(w.window_start <= d.chosen_time && d.chosen_time < w.window_end);
    }
    // Held-out rows only: no prediction comes from a fold that trained on it.
    for f in &run.trained.plan.folds {
        let train: std::collections::BTreeSet<_> = f.train.iter().collect();
        assert!(f.test.iter().all(|i| !train.contains(i)));
    }
}

#[test]
fn rerun_is_identical() {
    let s = generate(&CohortSpec { participants: 4, days: 2, seed: 1, ..CohortSpec::default() }).unwrap();
    let mut o = quick_opts();
    o.eval.cv = CvMode::Loso;
    o.outcome = OutcomeSource::ModelBernoulli;
    let a = run_in_memory(&s.cohort, None, &o).unwrap();
    let b = run_in_memory(&s.cohort, None, &o).unwrap();
    assert_eq!(a.simulation, b.simulation);
    assert_eq!(a.evaluation, b.evaluation);
}

#[test]
fn prompt_slots_follow_the_window_grid() {
    let cfg = TriggerConfig::default();
    assert_eq!(window_of(&cfg, 479), None);
    assert_eq!(window_of(&cfg, 480), Some(0));
    assert_eq!(window_of(&cfg, 1379), Some(4));
    assert_eq!(window_of(&cfg, 1380), None);
}
