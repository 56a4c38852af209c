//! CSV ingestion and export.
//!
//! Format: header `timestamp,load_mw,temp_c,humidity_pct,wind_ms,
//! irradiance_wm2,renew_share`, ISO-8601 timestamps, empty field = missing.
//! Export writes the same format, so a generate → export → ingest cycle is
//! lossless.

use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};

use super::features::HolidayCalendar;
use super::series::{hour_aligned, LoadSeries};
use crate::{Error, Result};

pub const CSV_COLUMNS: [&str; 7] = [
    "timestamp", "load_mw", "temp_c", "humidity_pct", "wind_ms", "irradiance_wm2", "renew_share",
];

fn parse_timestamp(raw: &str, row: usize) -> Result<DateTime<Utc>> {
    let parsed = DateTime::parse_from_rfc3339(raw)
        .map(|t| t.with_timezone(&Utc))
        .or_else(|_| {
            chrono::NaiveDateTime::parse_from_str(raw, "%Y-%m-%dT%H:%M:%S")
                .or_else(|_| chrono::NaiveDateTime::parse_from_str(raw, "%Y-%m-%d %H:%M:%S"))
                .map(|t| t.and_utc())
        })
        .map_err(|_| Error::Csv { row, msg: format!("unparseable timestamp {raw:?}") })?;
    hour_aligned(parsed).map_err(|_| Error::Csv {
        row,
        msg: format!("timestamp {raw:?} is not on an hour boundary"),
    })
}

fn parse_field(raw: &str, name: &str, row: usize) -> Result<Option<f64>> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Ok(None);
    }
    trimmed
        .parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Csv { row, msg: format!("unparseable {name} value {raw:?}") })
}

/// Ingest an hourly CSV into a dense grid; absent hours become marked gaps.
pub fn ingest_csv(path: &Path) -> Result<LoadSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let mut col = [0usize; 7];
    for (k, name) in CSV_COLUMNS.iter().enumerate() {
        col[k] = headers
            .iter()
            .position(|h| h == *name)
            .ok_or_else(|| Error::Csv { row: 1, msg: format!("missing required column {name:?}") })?;
    }

    struct Row {
        ts: DateTime<Utc>,
        fields: [Option<f64>; 6],
    }
    let mut rows: Vec<Row> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2; // header occupies line 1
        let record = record.map_err(|e| Error::Csv { row, msg: e.to_string() })?;
        let ts = parse_timestamp(&record[col[0]], row)?;
        if let Some(prev) = rows.last() {
            if ts == prev.ts {
                return Err(Error::Csv { row, msg: format!("duplicate timestamp {ts}") });
            }
            if ts < prev.ts {
                return Err(Error::Csv {
                    row,
                    msg: format!("timestamp {ts} is earlier than the preceding row"),
                });
            }
        }
        let mut fields = [None; 6];
        for k in 1..7 {
            fields[k - 1] = parse_field(&record[col[k]], CSV_COLUMNS[k], row)?;
        }
        if let Some(load) = fields[0] {
            if load < 0.0 {
                return Err(Error::Csv { row, msg: format!("negative load {load}") });
            }
        }
        rows.push(Row { ts, fields });
    }
    if rows.is_empty() {
        return Err(Error::Csv { row: 1, msg: "no data rows".into() });
    }

    let start = rows[0].ts;
    let len = ((rows.last().unwrap().ts - start).num_hours() + 1) as usize;
    let mut series = LoadSeries::empty(start, len);
    let calendar = HolidayCalendar::default_us();
    for r in &rows {
        let i = (r.ts - start).num_hours() as usize;
        let channels = [
            &mut series.load,
            &mut series.temperature,
            &mut series.humidity,
            &mut series.wind_speed,
            &mut series.irradiance,
            &mut series.renew_share,
        ];
        for (channel, value) in channels.into_iter().zip(r.fields) {
            if let Some(v) = value {
                channel.set(i, v);
            }
        }
    }
    for i in 0..series.len() {
        series.holiday[i] = calendar.contains(series.date(i));
    }
    series.check_invariants()?;
    Ok(series)
}

fn format_value(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => String::new(),
    }
}

/// Export to the ingestion format. Hours with no valid channel at all are
/// skipped; partially valid hours keep their empty fields.
pub fn export_csv(series: &LoadSeries, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(CSV_COLUMNS)?;
    for i in 0..series.len() {
        let channels = [
            &series.load,
            &series.temperature,
            &series.humidity,
            &series.wind_speed,
            &series.irradiance,
            &series.renew_share,
        ];
        if channels.iter().all(|c| !c.valid[i]) {
            continue;
        }
        let mut record = vec![series
            .timestamp(i)
            .to_rfc3339_opts(SecondsFormat::Secs, true)];
        for c in channels {
            record.push(format_value(c.get(i)));
        }
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic::{generate_synthetic, SynthConfig};

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    const HEADER: &str = "timestamp,load_mw,temp_c,humidity_pct,wind_ms,irradiance_wm2,renew_share\n";

    #[test]
    fn well_formed_three_rows() {
        let f = write_temp(&format!(
            "{HEADER}2021-01-01T00:00:00Z,100,5,50,3,0,0.2\n2021-01-01T01:00:00Z,101,5,50,3,0,0.2\n2021-01-01T02:00:00Z,102,5,50,3,0,0.2\n"
        ));
        let s = ingest_csv(f.path()).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.load.values, vec![100.0, 101.0, 102.0]);
        assert!(s.row_valid(2));
    }

    #[test]
    fn non_monotone_timestamp_names_row() {
        let f = write_temp(&format!(
            "{HEADER}2021-01-01T05:00:00Z,100,5,50,3,0,\n2021-01-01T04:00:00Z,101,5,50,3,0,\n"
        ));
        match ingest_csv(f.path()) {
            Err(Error::Csv { row, .. }) => assert_eq!(row, 3),
            other => panic!("expected Csv error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_timestamp_rejected() {
        let f = write_temp(&format!(
            "{HEADER}2021-01-01T05:00:00Z,100,5,50,3,0,\n2021-01-01T05:00:00Z,101,5,50,3,0,\n"
        ));
        assert!(matches!(ingest_csv(f.path()), Err(Error::Csv { row: 3, .. })));
    }

    #[test]
    fn missing_hour_becomes_gap() {
        let f = write_temp(&format!(
            "{HEADER}2021-01-01T04:00:00Z,100,5,50,3,0,\n2021-01-01T06:00:00Z,101,5,50,3,0,\n"
        ));
        let s = ingest_csv(f.path()).unwrap();
        assert_eq!(s.len(), 3);
        assert!(s.row_valid(0));
        assert!(!s.row_valid(1));
        assert!(s.row_valid(2));
    }

    #[test]
    fn missing_column_rejected() {
        let f = write_temp("timestamp,load_mw,temp_c,humidity_pct,wind_ms,irradiance_wm2\n");
        match ingest_csv(f.path()) {
            Err(Error::Csv { msg, .. }) => assert!(msg.contains("renew_share")),
            other => panic!("expected Csv error, got {other:?}"),
        }
    }

    #[test]
    fn empty_load_field_is_missing_not_zero() {
        let f = write_temp(&format!(
            "{HEADER}2021-01-01T00:00:00Z,,5,50,3,0,0.1\n2021-01-01T01:00:00Z,100,5,50,3,0,0.1\n"
        ));
        let s = ingest_csv(f.path()).unwrap();
        assert!(!s.load.valid[0]);
        assert!(s.temperature.valid[0]);
        assert!(s.load.valid[1]);
    }

    #[test]
    fn export_ingest_roundtrip_is_lossless() {
        let cfg = SynthConfig { hours: 400, seed: 9, ..SynthConfig::default() };
        let s = generate_synthetic(&cfg).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        export_csv(&s, f.path()).unwrap();
        let back = ingest_csv(f.path()).unwrap();
        assert_eq!(s.len(), back.len());
        assert_eq!(s.load.values, back.load.values);
        assert_eq!(s.temperature.values, back.temperature.values);
        assert_eq!(s.renew_share.values, back.renew_share.values);
    }

    #[test]
    fn export_is_byte_deterministic() {
        let cfg = SynthConfig { hours: 360, seed: 5, ..SynthConfig::default() };
        let s = generate_synthetic(&cfg).unwrap();
        let f1 = tempfile::NamedTempFile::new().unwrap();
        let f2 = tempfile::NamedTempFile::new().unwrap();
        export_csv(&s, f1.path()).unwrap();
        export_csv(&s, f2.path()).unwrap();
        assert_eq!(
            std::fs::read(f1.path()).unwrap(),
            std::fs::read(f2.path()).unwrap()
        );
    }
}
