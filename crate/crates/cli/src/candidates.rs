//! `candidates.csv`: every scored candidate of every scheduling window.
//!
//! A window without candidates is kept as one row with empty candidate
//! cells. `u` and `j` are informational; reading recomputes nothing from them.

use std::path::Path;

use anyhow::{bail, Context, Result};
use smartema::trigger::{normalized_uncertainty, window_j, Candidate, TriggerConfig, Truth, WindowCandidates};
use smartema::{ModelOutput, Timestamp};

pub const CANDIDATES_HEADER: [&str; 13] = [
    "participant_id",
    "day",
    "window",
    "window_start",
    "window_end",
    "time",
    "r_prob",
    "emo_mean",
    "emo_var",
    "u",
    "j",
    "true_response_prob",
    "true_pa",
];

pub fn write_candidates(windows: &[WindowCandidates], cfg: &TriggerConfig) -> Result<Vec<u8>> {
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(CANDIDATES_HEADER)?;
    for w in windows {
        let head = [
            w.participant.clone(),
            w.day.to_string(),
            w.window.to_string(),
            w.window_start.0.to_string(),
            w.window_end.0.to_string(),
        ];
        if w.candidates.is_empty() {
            let mut rec = head.to_vec();
            rec.resize(CANDIDATES_HEADER.len(), String::new());
            out.write_record(&rec)?;
            continue;
        }
        let u = normalized_uncertainty(&w.candidates, cfg.u_norm);
        let j = window_j(&w.candidates, cfg)?;
        for (i, c) in w.candidates.iter().enumerate() {
            let truth = w.truth.as_ref().map(|t| t[i]);
            let mut rec = head.to_vec();
            rec.extend([
                c.time.0.to_string(),
                c.output.r_prob.to_string(),
                c.output.emo_mean.to_string(),
                c.output.emo_var.to_string(),
                u[i].to_string(),
                j[i].to_string(),
                truth.map(|t| t.response_prob.to_string()).unwrap_or_default(),
                truth.map(|t| t.pa.to_string()).unwrap_or_default(),
            ]);
            out.write_record(&rec)?;
        }
    }
    Ok(out.into_inner()?)
}

pub fn read_candidates(path: &Path) -> Result<Vec<WindowCandidates>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    if r.headers()?.iter().ne(CANDIDATES_HEADER.iter().copied()) {
        bail!("{}: expected header {}", path.display(), CANDIDATES_HEADER.join(","));
    }
    let mut windows: Vec<WindowCandidates> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let num = |k: usize| -> Result<f64> {
            rec[k]
                .parse()
                .with_context(|| format!("{}:{line}: bad `{}`", path.display(), CANDIDATES_HEADER[k]))
        };
        let int = |k: usize| -> Result<i64> {
            rec[k]
                .parse()
                .with_context(|| format!("{}:{line}: bad `{}`", path.display(), CANDIDATES_HEADER[k]))
        };
        let (participant, day, window) = (&rec[0], int(1)? as u32, int(2)? as u32);
        let same = windows
            .last()
            .is_some_and(|w| w.participant == participant && w.day == day && w.window == window);
        if !same {
            windows.push(WindowCandidates {
                participant: participant.to_string(),
                day,
                window,
                window_start: Timestamp(int(3)?),
                window_end: Timestamp(int(4)?),
                candidates: Vec::new(),
                truth: None,
            });
        }
        if rec[5].is_empty() {
            continue;
        }
        let w = windows.last_mut().unwrap();
        w.candidates.push(Candidate {
            time: Timestamp(int(5)?),
            output: ModelOutput {
                r_prob: num(6)?,
                emo_mean: num(7)?,
                emo_var: num(8)?,
            },
        });
        if !rec[11].is_empty() {
            let t = Truth {
                response_prob: num(11)?,
                pa: num(12)?,
            };
            w.truth.get_or_insert_with(Vec::new).push(t);
        }
    }
    for w in &windows {
        if w.truth.as_ref().is_some_and(|t| t.len() != w.candidates.len()) {
            bail!(
                "{}: window {}/{}/{} has truth for only some candidates",
                path.display(),
                w.participant,
                w.day,
                w.window
            );
        }
    }
    Ok(windows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window(n: usize, truth: bool) -> WindowCandidates {
        let candidates: Vec<Candidate> = (0..n)
            .map(|i| Candidate {
                time: Timestamp(1_000 + 1_800 * i as i64),
                output: ModelOutput {
                    r_prob: 0.1 + 0.7 / (i as f64 + 1.3),
                    emo_mean: 14.0 + i as f64 / 3.0,
                    emo_var: 0.2 * i as f64 + 1e-17,
                },
            })
            .collect();
        WindowCandidates {
            participant: "p1".into(),
            day: 2,
            window: n as u32,
            window_start: Timestamp(1_000),
            window_end: Timestamp(1_000 + 10_800),
            truth: truth.then(|| {
                (0..n)
                    .map(|i| Truth {
                        response_prob: 0.3 + 0.1 * i as f64,
                        pa: 12.0 - i as f64,
                    })
                    .collect()
            }),
            candidates,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let ws = vec![window(6, true), window(3, false), window(0, false)];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        std::fs::write(&p, write_candidates(&ws, &TriggerConfig::default()).unwrap()).unwrap();
        assert_eq!(read_candidates(&p).unwrap(), ws);
    }
}
