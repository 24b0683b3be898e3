//! Markdown summary and machine tables built from evaluate/simulate output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Result};
use smartema::eval::{BoxStats, MetricReport, Tested};
use smartema::stats::{CurveBin, LmmFit, MeanSd, TTest};
use smartema::trigger::SimulationResult;

use crate::artifacts::*;
use crate::store::{read_json, Manifest};

pub const SECTIONS: [&str; 6] = [
    "Receptivity models",
    "Emotion models",
    "Objective and receptivity",
    "Objective and emotion",
    "J-vs-PA curve",
    "Smart versus random trigger",
];

/// Report files relative to the report directory.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReportBundle {
    pub files: BTreeMap<String, Vec<u8>>,
    /// Sections rendered as stubs.
    pub missing: Vec<String>,
}

struct Inputs {
    metrics: Option<MetricReport>,
    stats: Option<Stats>,
    simulation: Option<SimulationResult>,
    hash: Option<String>,
    seed: Option<u64>,
}

fn load(out: &Path, manifest: &Manifest) -> Result<Inputs> {
    let mut hashes: BTreeMap<String, String> = BTreeMap::new();
    let mut seed = None;
    let mut metrics = None;
    let mut stats = None;
    let mut simulation = None;
    if out.join(METRICS).exists() {
        let e = read_json::<MetricReport>(&out.join(METRICS), METRICS_SCHEMA)?;
        hashes.insert(METRICS.into(), e.config_hash);
        seed = Some(e.seed);
        metrics = Some(e.data);
    }
    if out.join(STATS).exists() {
        let e = read_json::<Stats>(&out.join(STATS), STATS_SCHEMA)?;
        hashes.insert(STATS.into(), e.config_hash);
        seed = Some(e.seed);
        stats = Some(e.data);
    }
    if out.join(SIMULATION).exists() {
        let e = read_json::<SimulationResult>(&out.join(SIMULATION), SIMULATION_SCHEMA)?;
        hashes.insert(SIMULATION.into(), e.config_hash);
        seed = Some(e.seed);
        simulation = Some(e.data);
    }
    for csv in [CURVE, SIMULATION_SUMMARY] {
        if out.join(csv).exists() {
            if let Some(h) = manifest.hash_of_output(csv) {
                hashes.insert(csv.into(), h.to_string());
            }
        }
    }
    let mut distinct: Vec<&String> = hashes.values().collect();
    distinct.sort();
    distinct.dedup();
    if distinct.len() > 1 {
        let listing: Vec<String> = hashes.iter().map(|(k, v)| format!("{k} {}", &v[..12.min(v.len())])).collect();
        bail!(
            "artifacts come from different configurations ({}); rerun the stale stages",
            listing.join(", ")
        );
    }
    Ok(Inputs {
        metrics,
        stats,
        simulation,
        hash: distinct.first().map(|s| s.to_string()),
        seed,
    })
}

fn f(v: f64) -> String {
    format!("{v:.4}")
}

fn mean_sd(m: Option<&MeanSd>) -> String {
    m.map(|m| format!("{} ({})", f(m.mean), f(m.sd))).unwrap_or_else(|| "n/a".into())
}

fn stub(md: &mut String, artifact: &str, stage: &str) {
    let _ = writeln!(md, "_Missing: `{artifact}` not found. Run `smartema {stage}`._\n");
}

fn lmm_line(md: &mut String, what: &str, fit: &Tested<LmmFit>) {
    match (&fit.value, &fit.error) {
        (Some(l), _) => {
            let _ = writeln!(
                md,
                "Mixed model of {what} on J (participant random intercept): β₁ = {} (SE {}), z = {}, p {}, 95% CI [{}, {}]; σ²(participant) = {}, σ²(residual) = {}, {} observations in {} groups.\n",
                f(l.beta1),
                f(l.se_beta1),
                f(l.z),
                fmt_p_eq(l.p),
                f(l.ci95.0),
                f(l.ci95.1),
                f(l.sigma_u2),
                f(l.sigma_e2),
                l.n_obs,
                l.n_groups
            );
        }
        (None, e) => {
            let _ = writeln!(md, "Mixed model of {what} on J: not estimable ({}).\n", e.as_deref().unwrap_or("no data"));
        }
    }
}

fn fmt_p_eq(v: f64) -> String {
    if v < 1e-4 {
        "< 0.0001".into()
    } else {
        format!("= {v:.4}")
    }
}

fn t_line(md: &mut String, what: &str, t: &Tested<TTest>) {
    match (&t.value, &t.error) {
        (Some(t), _) => {
            let _ = writeln!(
                md,
                "{what}: mean difference {}, t({}) = {}, p {}.\n",
                f(t.mean_diff),
                t.df,
                f(t.t),
                fmt_p_eq(t.p)
            );
        }
        (None, e) => {
            let _ = writeln!(md, "{what}: not testable ({}).\n", e.as_deref().unwrap_or("no data"));
        }
    }
}

fn curve_table(md: &mut String, label: &str, bins: &[CurveBin]) {
    let _ = writeln!(md, "| {label} | prompts | mean J |\n|---|---|---|");
    for b in bins {
        let _ = writeln!(
            md,
            "| [{}, {}) | {} | {} |",
            b.lo,
            b.hi,
            b.count,
            b.mean_j.map(f).unwrap_or_else(|| "n/a".into())
        );
    }
    md.push('\n');
}

fn box_row(out: &mut csv::Writer<Vec<u8>>, group: &str, b: &Option<BoxStats>) -> Result<()> {
    if let Some(b) = b {
        out.write_record([
            group.to_string(),
            b.n.to_string(),
            b.min.to_string(),
            b.q1.to_string(),
            b.median.to_string(),
            b.q3.to_string(),
            b.max.to_string(),
        ])?;
    }
    Ok(())
}

/// Builds the report from whatever artifacts exist in `out`. Fails only on
/// unreadable artifacts or artifacts from different configurations.
pub fn build_report(out: &Path, manifest: &Manifest, title: &str) -> Result<ReportBundle> {
    let inp = load(out, manifest)?;
    let mut bundle = ReportBundle::default();
    let mut md = String::new();
    let _ = writeln!(md, "# {title}\n");
    match (&inp.hash, inp.seed) {
        (Some(h), Some(s)) => {
            let _ = writeln!(md, "Config hash `{h}`, seed {s}.\n");
        }
        _ => {
            let _ = writeln!(md, "No evaluation artifacts found.\n");
        }
    }

    // Model metrics.
    let classifiers = [("nn", "Neural network"), ("naive_bayes", "Naive Bayes"), ("bernoulli", "Random (Bernoulli)")];
    let regressors = [("nn", "Neural network (MC dropout)"), ("ols", "Linear regression"), ("gaussian", "Random (Gaussian)")];
    let _ = writeln!(md, "## {}\n", SECTIONS[0]);
    match &inp.metrics {
        Some(m) => {
            let _ = writeln!(
                md,
                "Participant-level mean (SD) over held-out segments, {} participants.\n",
                m.participants.len()
            );
            let _ = writeln!(md, "| model | weighted F1 | accuracy | weighted precision |\n|---|---|---|---|");
            for (k, name) in classifiers {
                let g = |metric: &str| mean_sd(m.summary.get(&format!("{k}.{metric}")));
                let _ = writeln!(md, "| {name} | {} | {} | {} |", g("weighted_f1"), g("accuracy"), g("weighted_precision"));
            }
            md.push('\n');
        }
        None => {
            bundle.missing.push(SECTIONS[0].into());
            stub(&mut md, METRICS, "evaluate");
        }
    }
    let _ = writeln!(md, "## {}\n", SECTIONS[1]);
    match &inp.metrics {
        Some(m) => {
            let _ = writeln!(md, "| model | RMSE | R² |\n|---|---|---|");
            for (k, name) in regressors {
                let g = |metric: &str| mean_sd(m.summary.get(&format!("{k}.{metric}")));
                let _ = writeln!(md, "| {name} | {} | {} |", g("rmse"), g("r2"));
            }
            md.push('\n');
            let mut out = csv::Writer::from_writer(Vec::new());
            out.write_record(["key", "mean", "sd", "n"])?;
            for (k, v) in &m.summary {
                out.write_record([k.clone(), v.mean.to_string(), v.sd.to_string(), v.n.to_string()])?;
            }
            bundle.files.insert("metrics_table.csv".into(), out.into_inner()?);
        }
        None => {
            bundle.missing.push(SECTIONS[1].into());
            stub(&mut md, METRICS, "evaluate");
        }
    }

    // Objective analyses.
    let _ = writeln!(md, "## {}\n", SECTIONS[2]);
    match &inp.stats {
        Some(s) => {
            let r = &s.rq1;
            let _ = writeln!(md, "{} prompts scored.\n", r.n_prompts);
            lmm_line(&mut md, "the response indicator", &r.lmm);
            match (&r.anova.value, &r.anova.error) {
                (Some(a), _) => {
                    let _ = writeln!(
                        md,
                        "Repeated-measures comparison of per-participant mean J, answered vs unanswered: F({}, {}) = {}, p {} ({} participants, {} excluded).\n",
                        a.df_effect,
                        a.df_error,
                        f(a.f),
                        fmt_p_eq(a.p),
                        a.n,
                        a.excluded.len()
                    );
                }
                (None, e) => {
                    let _ = writeln!(md, "Repeated-measures comparison: not testable ({}).\n", e.as_deref().unwrap_or("no data"));
                }
            }
            let _ = writeln!(md, "| prompts | n | min | Q1 | median | Q3 | max |\n|---|---|---|---|---|---|---|");
            for (name, b) in [("answered", &r.j_responded), ("unanswered", &r.j_unresponded)] {
                match b {
                    Some(b) => {
                        let _ = writeln!(
                            md,
                            "| {name} | {} | {} | {} | {} | {} | {} |",
                            b.n,
                            f(b.min),
                            f(b.q1),
                            f(b.median),
                            f(b.q3),
                            f(b.max)
                        );
                    }
                    None => {
                        let _ = writeln!(md, "| {name} | 0 | | | | | |");
                    }
                }
            }
            md.push('\n');
            let mut out = csv::Writer::from_writer(Vec::new());
            out.write_record(["group", "n", "min", "q1", "median", "q3", "max"])?;
            box_row(&mut out, "answered", &r.j_responded)?;
            box_row(&mut out, "unanswered", &r.j_unresponded)?;
            bundle.files.insert("j_box.csv".into(), out.into_inner()?);
        }
        None => {
            bundle.missing.push(SECTIONS[2].into());
            stub(&mut md, STATS, "evaluate");
        }
    }
    let _ = writeln!(md, "## {}\n", SECTIONS[3]);
    match &inp.stats {
        Some(s) => {
            let r = &s.rq2;
            let _ = writeln!(md, "{} answered prompts.\n", r.n_answered);
            lmm_line(&mut md, "|z(PA)|", &r.lmm);
            let opt = |v: Option<f64>| v.map(f).unwrap_or_else(|| "n/a".into());
            let _ = writeln!(
                md,
                "Mean J at |z| > 1.5: {}; at |z| < 0.5: {}.\n",
                opt(r.j_extreme),
                opt(r.j_central)
            );
        }
        None => {
            bundle.missing.push(SECTIONS[3].into());
            stub(&mut md, STATS, "evaluate");
        }
    }
    let _ = writeln!(md, "## {}\n", SECTIONS[4]);
    match &inp.stats {
        Some(s) => {
            curve_table(&mut md, "PA", &s.rq2.pa_curve);
            curve_table(&mut md, "within-participant z", &s.rq2.z_curve);
            bundle.files.insert("j_curve.csv".into(), write_curve(&s.rq2)?);
        }
        None => {
            bundle.missing.push(SECTIONS[4].into());
            stub(&mut md, STATS, "evaluate");
        }
    }

    // Trigger simulation.
    let _ = writeln!(md, "## {}\n", SECTIONS[5]);
    let sim_ok = inp.simulation.as_ref().is_some_and(|s| !s.decisions.is_empty());
    match (inp.stats.as_ref().and_then(|s| s.rq3.as_ref()), sim_ok) {
        (Some(r), true) => {
            let _ = writeln!(
                md,
                "{} participants, {} windows skipped for lack of candidates.\n",
                r.n_participants, r.skipped_windows
            );
            let _ = writeln!(md, "| policy | response rate | predicted PA | within-participant PA variance |\n|---|---|---|---|");
            let _ = writeln!(
                md,
                "| Smart | {} | {} | {} |",
                mean_sd(r.smart_rate.as_ref()),
                mean_sd(r.smart_pa.as_ref()),
                mean_sd(r.smart_var.as_ref())
            );
            let _ = writeln!(
                md,
                "| Random | {} | {} | {} |\n",
                mean_sd(r.random_rate.as_ref()),
                mean_sd(r.random_pa.as_ref()),
                mean_sd(r.random_var.as_ref())
            );
            t_line(&mut md, "Paired t test of response rate, Smart minus Random", &r.rate_test);
            t_line(&mut md, "Paired t test of predicted-PA variance, Smart minus Random", &r.variance_test);
            match (&r.predicted_pa_ks.value, &r.predicted_pa_ks.error) {
                (Some(k), _) => {
                    let _ = writeln!(md, "Two-sample KS test on predicted PA: D = {}, p {}.\n", f(k.d), fmt_p_eq(k.p));
                }
                (None, e) => {
                    let _ = writeln!(md, "KS test on predicted PA: not testable ({}).\n", e.as_deref().unwrap_or("no data"));
                }
            }
        }
        _ => {
            bundle.missing.push(SECTIONS[5].into());
            if inp.simulation.is_none() {
                stub(&mut md, SIMULATION, "simulate");
            } else if !sim_ok {
                let _ = writeln!(md, "_Missing: the simulation made no decisions._\n");
            } else {
                stub(&mut md, STATS, "evaluate");
            }
        }
    }

    if let Some(s) = &inp.stats {
        let mut out = csv::Writer::from_writer(Vec::new());
        out.write_record(["analysis", "statistic", "value"])?;
        let mut row = |a: &str, s: &str, v: f64| out.write_record([a, s, &v.to_string()]);
        if let Some(l) = &s.rq1.lmm.value {
            row("response_on_j", "beta1", l.beta1)?;
            row("response_on_j", "se", l.se_beta1)?;
            row("response_on_j", "p", l.p)?;
        }
        if let Some(a) = &s.rq1.anova.value {
            row("j_answered_vs_unanswered", "f", a.f)?;
            row("j_answered_vs_unanswered", "p", a.p)?;
        }
        if let Some(l) = &s.rq2.lmm.value {
            row("abs_z_on_j", "beta1", l.beta1)?;
            row("abs_z_on_j", "se", l.se_beta1)?;
            row("abs_z_on_j", "p", l.p)?;
        }
        if let Some(r) = &s.rq3 {
            if let Some(t) = &r.rate_test.value {
                row("response_rate_smart_minus_random", "mean_diff", t.mean_diff)?;
                row("response_rate_smart_minus_random", "t", t.t)?;
                row("response_rate_smart_minus_random", "p", t.p)?;
            }
            if let Some(t) = &r.variance_test.value {
                row("pa_variance_smart_minus_random", "mean_diff", t.mean_diff)?;
                row("pa_variance_smart_minus_random", "t", t.t)?;
                row("pa_variance_smart_minus_random", "p", t.p)?;
            }
            if let Some(k) = &r.predicted_pa_ks.value {
                row("predicted_pa_ks", "d", k.d)?;
                row("predicted_pa_ks", "p", k.p)?;
            }
        }
        bundle.files.insert("stats_table.csv".into(), out.into_inner()?);
    }
    bundle.files.insert("report.md".into(), md.into_bytes());
    Ok(bundle)
}
