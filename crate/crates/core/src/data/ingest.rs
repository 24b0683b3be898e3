//! Cohort directory reader and writer.
//!
//! Layout: one sub-directory per participant holding `sensors.csv`,
//! `ema.csv` and optionally `rr.csv`. Any other sub-directory is an error.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDateTime, SecondsFormat};
use serde::Serialize;

use super::{
    Cohort, EmaEvent, ParticipantDataset, RrSample, SchemaConfig, Timestamp, TimestampFormat,
};
use crate::error::{Error, Result};

pub const SENSORS_HEADER: [&str; 3] = ["timestamp", "channel", "value"];
pub const EMA_HEADER: [&str; 3] = ["notification_ts", "response_ts", "pa_score"];
pub const RR_HEADER: [&str; 2] = ["timestamp", "rr_ms"];

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ParticipantCounts {
    pub sensor_rows: usize,
    pub ema_rows: usize,
    pub rr_rows: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub participants: BTreeMap<String, ParticipantCounts>,
}

impl IngestReport {
    pub fn total_sensor_rows(&self) -> usize {
        self.participants.values().map(|c| c.sensor_rows).sum()
    }
}

fn parse_error(file: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        file: file.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_timestamp(raw: &str, format: TimestampFormat) -> std::result::Result<Timestamp, String> {
    let raw = raw.trim();
    match format {
        TimestampFormat::Epoch => raw
            .parse::<i64>()
            .map(Timestamp)
            .map_err(|_| format!("bad epoch timestamp `{raw}`")),
        TimestampFormat::Iso8601 => DateTime::parse_from_rfc3339(raw)
            .map(|dt| Timestamp(dt.timestamp()))
            .or_else(|_| {
                NaiveDateTime::parse_from_str(raw, "%Y-%m-%dT%H:%M:%S")
                    .map(|dt| Timestamp(dt.and_utc().timestamp()))
            })
            .map_err(|_| format!("bad ISO-8601 timestamp `{raw}`")),
    }
}

fn format_timestamp(ts: Timestamp, format: TimestampFormat) -> String {
    match format {
        TimestampFormat::Epoch => ts.0.to_string(),
        TimestampFormat::Iso8601 => DateTime::from_timestamp(ts.0, 0)
            .expect("timestamp in chrono range")
            .to_rfc3339_opts(SecondsFormat::Secs, true),
    }
}

fn parse_f64(raw: &str) -> std::result::Result<f64, String> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| format!("bad number `{raw}`"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("non-finite value `{raw}`"))
    }
}

fn open_csv(path: &Path, header: &[&str]) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let found = reader
        .headers()
        .map_err(|e| parse_error(path, 1, e.to_string()))?
        .clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(parse_error(
            path,
            1,
            format!(
                "expected header `{}`, found `{}`",
                header.join(","),
                found.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    Ok(reader)
}

fn records(
    path: &Path,
    reader: &mut csv::Reader<fs::File>,
) -> Result<Vec<(usize, csv::StringRecord)>> {
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            parse_error(path, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        out.push((line, rec));
    }
    Ok(out)
}

fn read_sensors(
    path: &Path,
    schema: &SchemaConfig,
    participant: &mut ParticipantDataset,
) -> Result<usize> {
    let mut reader = open_csv(path, &SENSORS_HEADER)?;
    let rows = records(path, &mut reader)?;
    for (line, rec) in &rows {
        let ts = parse_timestamp(&rec[0], schema.timestamp_format)
            .map_err(|m| parse_error(path, *line, m))?;
        let channel = &rec[1];
        if schema.channel_kind(channel).is_none() {
            return Err(Error::UnknownChannel {
                channel: channel.to_string(),
                registry: schema.registry_listing(),
            });
        }
        let value = parse_f64(&rec[2]).map_err(|m| parse_error(path, *line, m))?;
        participant
            .streams
            .entry(channel.to_string())
            .or_default()
            .push((ts, value));
    }
    for stream in participant.streams.values_mut() {
        stream.sort_by_key(|s| s.0);
    }
    Ok(rows.len())
}

fn read_ema(
    path: &Path,
    schema: &SchemaConfig,
    participant: &mut ParticipantDataset,
) -> Result<usize> {
    let mut reader = open_csv(path, &EMA_HEADER)?;
    let rows = records(path, &mut reader)?;
    for (line, rec) in &rows {
        let notification_time = parse_timestamp(&rec[0], schema.timestamp_format)
            .map_err(|m| parse_error(path, *line, m))?;
        let response_time = if rec[1].is_empty() {
            None
        } else {
            Some(
                parse_timestamp(&rec[1], schema.timestamp_format)
                    .map_err(|m| parse_error(path, *line, m))?,
            )
        };
        let pa_score = if rec[2].is_empty() {
            None
        } else {
            Some(parse_f64(&rec[2]).map_err(|m| parse_error(path, *line, m))?)
        };
        let event = EmaEvent {
            notification_time,
            response_time,
            pa_score,
            scale_min: schema.pa_scale.min,
            scale_max: schema.pa_scale.max,
        };
        event.validate().map_err(|e| match e {
            Error::Validation(m) => {
                Error::Validation(format!("{}:{}: {}", path.display(), line, m))
            }
            other => other,
        })?;
        participant.events.push(event);
    }
    participant.events.sort_by_key(|e| e.notification_time);
    Ok(rows.len())
}

fn read_rr(
    path: &Path,
    schema: &SchemaConfig,
    participant: &mut ParticipantDataset,
) -> Result<usize> {
    let mut reader = open_csv(path, &RR_HEADER)?;
    let rows = records(path, &mut reader)?;
    for (line, rec) in &rows {
        let timestamp = parse_timestamp(&rec[0], schema.timestamp_format)
            .map_err(|m| parse_error(path, *line, m))?;
        let rr_ms = parse_f64(&rec[1]).map_err(|m| parse_error(path, *line, m))?;
        participant.rr.push(RrSample { timestamp, rr_ms });
    }
    participant.rr.sort_by_key(|r| r.timestamp);
    Ok(rows.len())
}

fn check_daily_prompts(participant: &ParticipantDataset, limit: u32) -> Result<()> {
    let mut per_day: BTreeMap<i64, u32> = BTreeMap::new();
    for e in &participant.events {
        *per_day
            .entry(participant.local_date(e.notification_time))
            .or_default() += 1;
    }
    if let Some((date, n)) = per_day.iter().find(|(_, &n)| n > limit) {
        return Err(Error::Validation(format!(
            "participant {} has {n} prompts on local date {date}, limit {limit}",
            participant.id
        )));
    }
    Ok(())
}

/// Reads every participant directory under `dir`.
pub fn ingest(dir: &Path, schema: &SchemaConfig) -> Result<(Cohort, IngestReport)> {
    schema.validate()?;
    let mut dirs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();

    let mut participants = Vec::with_capacity(dirs.len());
    let mut report = IngestReport::default();
    for pdir in dirs {
        let id = pdir
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| Error::Validation(format!("bad directory name {}", pdir.display())))?
            .to_string();
        let mut participant = ParticipantDataset::new(id.clone(), schema.offset_for(&id));
        let sensor_rows = read_sensors(&pdir.join("sensors.csv"), schema, &mut participant)?;
        let ema_rows = read_ema(&pdir.join("ema.csv"), schema, &mut participant)?;
        let rr_path = pdir.join("rr.csv");
        let rr_rows = if rr_path.exists() {
            read_rr(&rr_path, schema, &mut participant)?
        } else {
            0
        };
        check_daily_prompts(&participant, schema.daily_prompts)?;
        log::debug!("ingested {id}: {sensor_rows} sensor rows, {ema_rows} prompts, {rr_rows} beats");
        report.participants.insert(
            id,
            ParticipantCounts {
                sensor_rows,
                ema_rows,
                rr_rows,
            },
        );
        participants.push(participant);
    }
    Ok((
        Cohort {
            schema: schema.clone(),
            participants,
        },
        report,
    ))
}

fn create(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Writes a cohort in the layout read by [`ingest`], plus `schema.toml`.
/// Rows are emitted in time order, ties broken by channel registry order.
pub fn write_cohort(dir: &Path, cohort: &Cohort) -> Result<()> {
    let schema = &cohort.schema;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let schema_path = dir.join("schema.toml");
    fs::write(&schema_path, schema.to_toml()).map_err(|e| Error::io(&schema_path, e))?;
    let fmt = schema.timestamp_format;
    let channel_rank: BTreeMap<&str, usize> = schema
        .channels
        .iter()
        .enumerate()
        .map(|(i, c)| (c.name.as_str(), i))
        .collect();

    for p in &cohort.participants {
        let pdir = dir.join(&p.id);
        fs::create_dir_all(&pdir).map_err(|e| Error::io(&pdir, e))?;

        let mut rows: Vec<(Timestamp, usize, usize, &str, f64)> = Vec::with_capacity(p.sample_count());
        for (name, stream) in &p.streams {
            let rank = channel_rank.get(name.as_str()).copied().unwrap_or(usize::MAX);
            for (i, &(ts, v)) in stream.iter().enumerate() {
                rows.push((ts, rank, i, name.as_str(), v));
            }
        }
        rows.sort_by(|a, b| (a.0, a.1, a.3, a.2).cmp(&(b.0, b.1, b.3, b.2)));
        let path = pdir.join("sensors.csv");
        let mut w = create(&path)?;
        let io = |e| Error::io(&path, e);
        writeln!(w, "{}", SENSORS_HEADER.join(",")).map_err(io)?;
        for (ts, _, _, name, v) in rows {
            writeln!(w, "{},{},{}", format_timestamp(ts, fmt), name, v).map_err(io)?;
        }
        w.flush().map_err(io)?;

        let path = pdir.join("ema.csv");
        let mut w = create(&path)?;
        let io = |e| Error::io(&path, e);
        writeln!(w, "{}", EMA_HEADER.join(",")).map_err(io)?;
        for e in &p.events {
            let resp = e
                .response_time
                .map(|t| format_timestamp(t, fmt))
                .unwrap_or_default();
            let pa = e.pa_score.map(|v| v.to_string()).unwrap_or_default();
            writeln!(w, "{},{},{}", format_timestamp(e.notification_time, fmt), resp, pa)
                .map_err(io)?;
        }
        w.flush().map_err(io)?;

        if !p.rr.is_empty() {
            let path = pdir.join("rr.csv");
            let mut w = create(&path)?;
            let io = |e| Error::io(&path, e);
            writeln!(w, "{}", RR_HEADER.join(",")).map_err(io)?;
            for r in &p.rr {
                writeln!(w, "{},{}", format_timestamp(r.timestamp, fmt), r.rr_ms).map_err(io)?;
            }
            w.flush().map_err(io)?;
        }
    }
    Ok(())
}
