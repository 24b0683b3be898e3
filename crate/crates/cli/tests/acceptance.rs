//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria 1 to 5 share twenty 40-participant, 14-day synthetic cohorts.
//! Expect about ten minutes on one core.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use smartema::data::{Coverage, RESPONSE_WINDOW_MIN, ALLOWED_WIDTHS};
use smartema::eval::{rq3, run_in_memory, Evaluation, Rq3, RunOptions};
use smartema::labeling::{label_receptivity, non_response_span, response_span};
use smartema::models::mlp::{fit, mc_dropout};
use smartema::models::{Activation, LossKind, MlpSpec};
use smartema::stats::{
    abs_z_transform, classification_metrics, fit_random_intercept_lmm, gls_at, ks_two_sample, paired_t_test,
    regression_metrics,
};
use smartema::synth::{generate, CohortSpec};
use smartema::trigger::{simulate_triggers, UncertaintyNorm};
use smartema::{EmaEvent, ReceptivityLabel, Segment, Timestamp};
use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, StudentsT};

const SEEDS: u64 = 20;
const RUNTIME_LIMIT_S: f64 = 600.0;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

struct SeedRun {
    seconds: f64,
    eval: Evaluation,
    raw_u: Rq3,
    no_u: Rq3,
}

fn study() -> Vec<SeedRun> {
    (0..SEEDS)
        .map(|seed| {
            let t = Instant::now();
            let spec = CohortSpec {
                participants: 40,
                days: 14,
                seed,
                ..Default::default()
            };
            let synth = generate(&spec).expect("cohort");
            let mut opts = RunOptions::default();
            opts.eval.seed = seed;
            let run = run_in_memory(&synth.cohort, Some(&synth.truth), &opts).expect("run");
            let seconds = t.elapsed().as_secs_f64();
            let ablate = |f: &dyn Fn(&mut smartema::TriggerConfig)| {
                let mut trig = opts.trigger.clone();
                f(&mut trig);
                rq3(&simulate_triggers(&run.windows, &trig, opts.outcome, seed).expect("simulation"))
            };
            let raw_u = ablate(&|t| t.u_norm = UncertaintyNorm::Raw);
            let no_u = ablate(&|t| t.w_u = 0.0);
            eprintln!("seed {seed}: {seconds:.1}s");
            SeedRun {
                seconds,
                eval: run.evaluation,
                raw_u,
                no_u,
            }
        })
        .collect()
}

fn rates(r: &Rq3) -> (f64, f64) {
    (
        r.smart_rate.as_ref().map_or(f64::NAN, |m| m.mean),
        r.random_rate.as_ref().map_or(f64::NAN, |m| m.mean),
    )
}

fn rate_gap(runs: &[SeedRun], pick: impl Fn(&SeedRun) -> &Rq3) -> (f64, f64, usize) {
    let (s, r): (Vec<f64>, Vec<f64>) = runs.iter().map(|x| rates(pick(x))).unzip();
    let gap = s.iter().zip(&r).map(|(a, b)| a - b).sum::<f64>() / s.len() as f64;
    let p = paired_t_test(&s, &r).map_or(f64::NAN, |t| t.p);
    let sig = runs
        .iter()
        .filter(|x| {
            let t = &pick(x).rate_test.value;
            t.as_ref().is_some_and(|t| t.t > 0.0 && t.p < 0.05)
        })
        .count();
    (gap, p, sig)
}

fn criterion_1(runs: &[SeedRun]) -> Verdict {
    let (gap, p, sig) = rate_gap(runs, |r| r.eval.rq3.as_ref().unwrap());
    let slowest = runs.iter().map(|r| r.seconds).fold(0.0, f64::max);
    let (raw_gap, raw_p, _) = rate_gap(runs, |r| &r.raw_u);
    let (no_u_gap, no_u_p, _) = rate_gap(runs, |r| &r.no_u);
    verdict(
        gap >= 0.05 && p < 0.05 && slowest <= RUNTIME_LIMIT_S,
        format!(
            "smart - random = {:+.2} pts, paired t over seeds p = {p:.3}, {sig}/{SEEDS} seeds significant, \
             slowest run {slowest:.1}s (info: raw U {:+.2} pts p = {raw_p:.3}; w_u = 0 {:+.2} pts p = {no_u_p:.3})",
            100.0 * gap,
            100.0 * raw_gap,
            100.0 * no_u_gap,
        ),
    )
}

fn lmm_count(runs: &[SeedRun], pick: impl Fn(&Evaluation) -> Option<(f64, f64)>) -> (usize, f64) {
    let fits: Vec<(f64, f64)> = runs.iter().filter_map(|r| pick(&r.eval)).collect();
    let hits = fits.iter().filter(|(b, p)| *b > 0.0 && *p < 0.05).count();
    let mean_b = fits.iter().map(|f| f.0).sum::<f64>() / fits.len().max(1) as f64;
    (hits, mean_b)
}

fn criterion_2(runs: &[SeedRun]) -> Verdict {
    let (hits, b) = lmm_count(runs, |e| e.rq1.lmm.value.as_ref().map(|f| (f.beta1, f.p)));
    verdict(
        hits >= 16,
        format!("beta1 > 0 with p < 0.05 in {hits}/{SEEDS} seeds, mean beta1 {b:.3}"),
    )
}

fn criterion_3(runs: &[SeedRun]) -> Verdict {
    let (hits, b) = lmm_count(runs, |e| e.rq2.lmm.value.as_ref().map(|f| (f.beta1, f.p)));
    let pairs: Vec<(f64, f64)> = runs
        .iter()
        .filter_map(|r| Some((r.eval.rq2.j_extreme?, r.eval.rq2.j_central?)))
        .collect();
    let ext = pairs.iter().map(|p| p.0).sum::<f64>() / pairs.len().max(1) as f64;
    let cen = pairs.iter().map(|p| p.1).sum::<f64>() / pairs.len().max(1) as f64;
    let higher = pairs.iter().filter(|p| p.0 > p.1).count();
    verdict(
        hits >= 16 && !pairs.is_empty() && ext > cen,
        format!(
            "beta1 > 0 with p < 0.05 in {hits}/{SEEDS} seeds, mean beta1 {b:.3}; \
             mean J at |z| > 1.5 {ext:.3} vs |z| < 0.5 {cen:.3} (higher in {higher}/{} seeds)",
            pairs.len()
        ),
    )
}

fn criterion_4(runs: &[SeedRun]) -> Verdict {
    let hits = runs
        .iter()
        .filter(|r| {
            let t = &r.eval.rq3.as_ref().unwrap().variance_test.value;
            t.as_ref().is_some_and(|t| t.t > 0.0 && t.p < 0.05)
        })
        .count();
    verdict(
        hits >= 14,
        format!("smart variance above random (paired t, p < 0.05) in {hits}/{SEEDS} seeds"),
    )
}

fn criterion_5(runs: &[SeedRun]) -> Verdict {
    let mean = |key: &str| {
        let v: Vec<f64> = runs
            .iter()
            .filter_map(|r| r.eval.metrics.summary.get(key).map(|m| m.mean))
            .collect();
        v.iter().sum::<f64>() / v.len().max(1) as f64
    };
    let (nn_f1, bern_f1) = (mean("nn.weighted_f1"), mean("bernoulli.weighted_f1"));
    let (nn_r2, gauss_r2) = (mean("nn.r2"), mean("gaussian.r2"));
    verdict(
        nn_f1 - bern_f1 >= 0.05 && nn_r2 > 0.0 && gauss_r2 < 0.0,
        format!(
            "F1 nn {nn_f1:.3} - bernoulli {bern_f1:.3} = {:.3}; R2 nn {nn_r2:.3}, gaussian {gauss_r2:.3}",
            nn_f1 - bern_f1
        ),
    )
}

fn toy_spec(dropout: f64, seed: u64) -> MlpSpec {
    MlpSpec {
        hidden: vec![32, 16],
        activation: Activation::LeakyRelu,
        output_activation: Activation::Identity,
        leaky_slope: 0.01,
        dropout,
        dropout_after: vec![0, 1],
        loss: LossKind::MeanSquaredError,
        learning_rate: 0.01,
        epochs: 150,
        batch_size: 32,
        seed,
    }
}

fn column(xs: &[f64]) -> Array2<f64> {
    Array2::from_shape_vec((xs.len(), 1), xs.to_vec()).unwrap()
}

fn criterion_6() -> Verdict {
    let grid = |a: f64, b: f64| (0..41).map(|i| a + (b - a) * i as f64 / 40.0).collect::<Vec<_>>();
    let (inside, outside) = (column(&grid(-1.0, 1.0)), column(&grid(3.0, 5.0)));
    let mut zero_ok = true;
    let mut wins = 0u64;
    for seed in 0..SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(1_000 + seed);
        let x: Vec<f64> = (0..200).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Array1<f64> = x
            .iter()
            .map(|v| {
                let e: f64 = StandardNormal.sample(&mut rng);
                (2.0 * v).sin() + 0.1 * e
            })
            .collect();
        let x = column(&x);

        let spec0 = toy_spec(0.0, seed);
        let (net0, _) = fit(&spec0, x.view(), y.view());
        let (_, v0) = mc_dropout(&net0, &spec0, outside.view(), 50, seed);
        zero_ok &= v0.iter().all(|v| *v == 0.0);

        let spec = toy_spec(0.3, seed);
        let (net, _) = fit(&spec, x.view(), y.view());
        let (_, v_in) = mc_dropout(&net, &spec, inside.view(), 50, seed);
        let (_, v_out) = mc_dropout(&net, &spec, outside.view(), 50, seed);
        if v_out.mean().unwrap() > v_in.mean().unwrap() {
            wins += 1;
        }
    }
    // One-sided sign test: P(X >= wins) under Binomial(20, 1/2).
    let p = if wins == 0 {
        1.0
    } else {
        Binomial::new(0.5, SEEDS).unwrap().sf(wins - 1)
    };
    verdict(
        zero_ok && p < 0.05,
        format!(
            "dropout 0 variance exactly 0: {zero_ok}; OOD variance higher in {wins}/{SEEDS} seeds, sign test p = {p:.2e}"
        ),
    )
}

#[derive(Default)]
struct Worst(BTreeMap<&'static str, f64>);

impl Worst {
    fn see(&mut self, what: &'static str, a: f64, b: f64) {
        let e = self.0.entry(what).or_insert(0.0);
        *e = e.max((a - b).abs());
    }
}

fn ks_p_oracle(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.3 {
        let c = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let theta: f64 = (1..100).map(|k| (-((2 * k - 1) as f64).powi(2) * c).exp()).sum();
        return 1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * theta;
    }
    let s: f64 = (1..100)
        .map(|k| (if k % 2 == 1 { 1.0 } else { -1.0 }) * (-2.0 * (k * k) as f64 * lambda * lambda).exp())
        .sum();
    (2.0 * s).clamp(0.0, 1.0)
}

fn kernel_oracles() -> Worst {
    let mut w = Worst::default();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..200 {
        let n = rng.random_range(3..40);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let b: Vec<f64> = a.iter().map(|v| v * 0.8 + rng.random_range(-1.0..1.5)).collect();

        let t = paired_t_test(&a, &b).unwrap();
        let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let m = d.iter().sum::<f64>() / n as f64;
        let sd = (d.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        let t_o = m / (sd / (n as f64).sqrt());
        let p_o = 2.0 * StudentsT::new(0.0, 1.0, (n - 1) as f64).unwrap().sf(t_o.abs());
        w.see("paired t", t.t, t_o);
        w.see("paired t p", t.p, p_o);

        let k = rng.random_range(2..35);
        let c: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0..4.0)).collect();
        let ks = ks_two_sample(&a, &c).unwrap();
        let ecdf = |s: &[f64], x: f64| s.iter().filter(|v| **v <= x).count() as f64 / s.len() as f64;
        let d_o = a.iter().chain(&c).map(|&x| (ecdf(&a, x) - ecdf(&c, x)).abs()).fold(0.0, f64::max);
        let en = ((n * k) as f64 / (n + k) as f64).sqrt();
        w.see("ks D", ks.d, d_o);
        w.see("ks p", ks.p, ks_p_oracle(en * d_o));

        let truth: Vec<f64> = (0..n).map(|_| f64::from(rng.random_bool(0.4))).collect();
        let pred: Vec<f64> = (0..n).map(|_| f64::from(rng.random_bool(0.5))).collect();
        let cm = classification_metrics(&truth, &pred).unwrap();
        let (mut f1, mut prec) = (0.0, 0.0);
        for cls in [0.0, 1.0] {
            let count = |f: &dyn Fn(f64, f64) -> bool| truth.iter().zip(&pred).filter(|(t, p)| f(**t, **p)).count() as f64;
            let tp = count(&|t, p| t == cls && p == cls);
            let fp = count(&|t, p| t != cls && p == cls);
            let fn_ = count(&|t, p| t == cls && p != cls);
            let support = tp + fn_;
            let pr = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
            let f = if tp > 0.0 { 2.0 * tp / (2.0 * tp + fp + fn_) } else { 0.0 };
            f1 += support / n as f64 * f;
            prec += support / n as f64 * pr;
        }
        w.see("weighted F1", cm.weighted_f1, f1);
        w.see("weighted precision", cm.weighted_precision, prec);

        let rm = regression_metrics(&a, &b).unwrap();
        let ss_res: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum();
        let mean_a = a.iter().sum::<f64>() / n as f64;
        let ss_tot: f64 = a.iter().map(|x| (x - mean_a).powi(2)).sum();
        w.see("rmse", rm.rmse, (ss_res / n as f64).sqrt());
        w.see("r2", rm.r2.unwrap(), 1.0 - ss_res / ss_tot);

        let groups: Vec<u8> = (0..n).map(|i| (i % 3) as u8).collect();
        let z = abs_z_transform(&a, &groups);
        for g in 0..3u8 {
            let vals: Vec<f64> = a.iter().zip(&groups).filter(|(_, h)| **h == g).map(|(v, _)| *v).collect();
            let mu = vals.iter().sum::<f64>() / vals.len() as f64;
            let sd = (vals.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / vals.len() as f64).sqrt();
            for (i, v) in a.iter().enumerate().filter(|(i, _)| groups[*i] == g) {
                if let Some(zi) = z[i] {
                    w.see("abs z", zi, (v - mu).abs() / sd);
                }
            }
        }
    }
    w
}

fn lmm_checks() -> (f64, usize) {
    let mut worst_ols = 0.0f64;
    let mut inside = 0;
    for seed in 0..SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let (mut y, mut x, mut g) = (Vec::new(), Vec::new(), Vec::new());
        for grp in 0..30 {
            let u: f64 = StandardNormal.sample(&mut rng);
            for _ in 0..20 {
                let xi = rng.random_range(0.0..2.0);
                let e: f64 = StandardNormal.sample(&mut rng);
                x.push(xi);
                y.push(1.0 + 0.5 * xi + u + e);
                g.push(format!("g{grp}"));
            }
        }
        let n = x.len() as f64;
        let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let b1 = sxy / sxx;
        let gls = gls_at(&y, &x, &g, 1e-12).unwrap();
        worst_ols = worst_ols.max((gls.beta[1] - b1).abs()).max((gls.beta[0] - (my - b1 * mx)).abs());
        let fit = fit_random_intercept_lmm(&y, &x, &g).unwrap();
        if (fit.beta1 - 0.5).abs() <= 3.0 * fit.se_beta1 {
            inside += 1;
        }
    }
    (worst_ols, inside)
}

fn criterion_7() -> Verdict {
    let w = kernel_oracles();
    let kernels_ok = w.0.iter().all(|(k, e)| *e <= if *k == "paired t p" { 1e-6 } else { 1e-9 });
    let (ols_err, inside) = lmm_checks();
    let worst = w.0.iter().map(|(k, e)| format!("{k} {e:.1e}")).collect::<Vec<_>>().join(", ");
    verdict(
        kernels_ok && ols_err <= 1e-4 && inside == SEEDS as usize,
        format!(
            "max abs error: {worst}; LMM at lambda -> 0 vs OLS {ols_err:.1e}; beta1 within 3 SE in {inside}/{SEEDS} fits"
        ),
    )
}

fn segments(width: u32, hours: i64) -> Vec<Segment> {
    let step = i64::from(width) * 60;
    (0..hours * 3600 / step)
        .map(|i| Segment {
            participant_id: "p".into(),
            start: Timestamp(i * step),
            width_min: width,
            study_day: 1,
            sample_count: 1,
            coverage: Coverage::Full,
        })
        .collect()
}

fn event(notif: i64, resp: Option<i64>, pa: f64) -> EmaEvent {
    EmaEvent {
        notification_time: Timestamp(notif),
        response_time: resp.map(Timestamp),
        pa_score: resp.map(|_| pa),
        scale_min: 5.0,
        scale_max: 25.0,
    }
}

/// Segment midpoint inside a span; the response rule overrides.
fn label_oracle(segs: &[Segment], events: &[EmaEvent], window: u32) -> Vec<ReceptivityLabel> {
    segs.iter()
        .map(|s| {
            let mid = (s.start.0 + s.end().0) as f64 / 2.0;
            let inside = |a: i64, b: i64| mid >= a as f64 && mid <= b as f64;
            if events
                .iter()
                .filter_map(|e| e.response_time)
                .any(|r| inside(r.0 - i64::from(window) * 60, r.0))
            {
                ReceptivityLabel::Receptive
            } else if events
                .iter()
                .filter(|e| !e.answered())
                .any(|e| inside(e.notification_time.0, e.notification_time.0 + 3600))
            {
                ReceptivityLabel::NonReceptive
            } else {
                ReceptivityLabel::Unlabeled
            }
        })
        .collect()
}

fn criterion_8() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut failures = Vec::new();
    let streams = 2_000;
    for case in 0..streams {
        let width = ALLOWED_WIDTHS[rng.random_range(0..ALLOWED_WIDTHS.len())];
        let mut events: Vec<EmaEvent> = (0..rng.random_range(0..10))
            .map(|_| {
                let n = rng.random_range(0..20 * 60) * 60;
                let r = rng.random_bool(0.6).then(|| n + rng.random_range(0..=60) * 60);
                event(n, r, rng.random_range(5.0..=25.0))
            })
            .collect();
        events.sort_by_key(|e| e.notification_time);
        let segs = segments(width, 24);
        let out = label_receptivity(&segs, &events, width);
        let labels: Vec<ReceptivityLabel> = out.iter().map(|l| l.receptivity).collect();
        if out.len() != segs.len() || labels != label_oracle(&segs, &events, width) {
            failures.push(format!("case {case}: labels differ from oracle"));
            continue;
        }
        for l in &out {
            let ok = match l.receptivity {
                ReceptivityLabel::Receptive => {
                    let e = &events[l.source_event.unwrap()];
                    let r = e.response_time.unwrap();
                    response_span(r, width) == (Timestamp(r.0 - i64::from(width) * 60), r)
                        && l.pa_score == e.pa_score
                }
                ReceptivityLabel::NonReceptive => {
                    let e = &events[l.source_event.unwrap()];
                    !e.answered()
                        && non_response_span(e.notification_time)
                            == (e.notification_time, Timestamp(e.notification_time.0 + RESPONSE_WINDOW_MIN * 60))
                        && l.pa_score.is_none()
                }
                ReceptivityLabel::Unlabeled => l.source_event.is_none() && l.pa_score.is_none(),
            };
            if !ok {
                failures.push(format!("case {case}: bad span or source at {:?}", l.segment.start));
            }
        }
    }
    let mut width_cases = 0;
    for case in 0..300 {
        let mut hours: Vec<i64> = (0..22).filter(|_| rng.random_bool(0.25)).collect();
        hours.dedup();
        let events: Vec<EmaEvent> = hours.iter().map(|h| event(h * 3600, None, 0.0)).collect();
        let covered: Vec<i64> = ALLOWED_WIDTHS
            .iter()
            .map(|&w| {
                label_receptivity(&segments(w, 24), &events, w)
                    .iter()
                    .filter(|l| l.receptivity == ReceptivityLabel::NonReceptive)
                    .map(|_| i64::from(w) * 60)
                    .sum()
            })
            .collect();
        if covered.iter().any(|c| *c != hours.len() as i64 * 3600) {
            failures.push(format!("width case {case}: covered {covered:?}"));
        }
        width_cases += 1;
    }
    verdict(
        failures.is_empty(),
        format!(
            "{streams} random streams and {width_cases} width sweeps, {} failures{}",
            failures.len(),
            failures.first().map(|f| format!(" (first: {f})")).unwrap_or_default()
        ),
    )
}

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    walkdir::WalkDir::new(dir)
        .sort_by_file_name()
        .into_iter()
        .map(|e| e.unwrap())
        .filter(|e| e.file_type().is_file())
        .map(|e| {
            let rel = e.path().strip_prefix(dir).unwrap().to_string_lossy().into_owned();
            (rel, std::fs::read(e.path()).unwrap())
        })
        .collect()
}

fn criterion_9() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let runs: Vec<BTreeMap<String, Vec<u8>>> = ["a", "b"]
        .iter()
        .map(|name| {
            let out = tmp.path().join(name);
            let status = Command::new(env!("CARGO_BIN_EXE_smartema"))
                .env_remove("SMARTEMA_CONFIG")
                .args(["--seed", "42", "--out", out.to_str().unwrap(), "pipeline"])
                .output()
                .unwrap();
            assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
            tree(&out)
        })
        .collect();
    let differing: Vec<&String> = runs[0]
        .iter()
        .filter(|(k, v)| runs[1].get(*k) != Some(v))
        .map(|(k, _)| k)
        .collect();
    let same_names = runs[0].keys().eq(runs[1].keys());
    verdict(
        same_names && differing.is_empty(),
        format!(
            "{} files compared, {} differ{}",
            runs[0].len(),
            differing.len(),
            differing.first().map(|f| format!(" (first: {f})")).unwrap_or_default()
        ),
    )
}

fn main() -> ExitCode {
    let t = Instant::now();
    let runs = study();
    eprintln!("study: {:.1}s", t.elapsed().as_secs_f64());
    let results = [
        criterion_1(&runs),
        criterion_2(&runs),
        criterion_3(&runs),
        criterion_4(&runs),
        criterion_5(&runs),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
    ];
    for (i, v) in results.iter().enumerate() {
        println!("criterion {}: {} | {}", i + 1, if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    let failed = results.iter().filter(|v| !v.pass).count();
    println!("acceptance: {}/{} criteria pass", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
