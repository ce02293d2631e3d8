//! 10-minute measurement series, rating-based allocation and scenario loads.
//!
//! Consumption is positive; generation enters as negative `p_kw`.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{DateTime, Duration, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const STEP_MINUTES: i64 = 10;
pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("cannot read measurements: {0}")]
    Io(String),
    #[error("row {row}: {message}")]
    Csv { row: u64, message: String },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: invalid timestamp `{value}`")]
    BadTimestamp { row: u64, value: String },
    #[error("row {row}, series {series}: non-numeric {column} `{value}`")]
    NonNumeric {
        row: u64,
        series: String,
        column: String,
        value: String,
    },
    #[error("series {series}: duplicate or out-of-order timestamp {timestamp}")]
    OutOfOrder { series: String, timestamp: String },
    #[error("series {series}: gap in the 10-minute grid, missing {missing}")]
    Gap { series: String, missing: String },
    #[error("series {series}: spacing {minutes} min after {after} is not on the 10-minute grid")]
    Spacing {
        series: String,
        after: String,
        minutes: i64,
    },
    #[error("series {series} is misaligned: starts {found} with {found_len} steps, expected {expected} with {expected_len} steps")]
    Misaligned {
        series: String,
        expected: String,
        expected_len: usize,
        found: String,
        found_len: usize,
    },
    #[error("measurement document contains no samples")]
    Empty,
    #[error("allocation needs at least one member")]
    NoMembers,
    #[error("node {0}: rating must be positive")]
    NonPositiveRating(String),
    #[error("power factor must lie in (0, 1], got {0}")]
    InvalidPowerFactor(f64),
}

/// Active/reactive power samples on a fixed 10-minute grid for one node or feeder head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSeries {
    pub id: String,
    pub timestamps: Vec<NaiveDateTime>,
    pub p_kw: Vec<f64>,
    pub q_kvar: Vec<f64>,
}

/// Per-node measurements at the secondary of the MV/LV transformer.
pub type MeasurementSeries = PowerSeries;
/// Measurements at the departure of an MV feeder.
pub type FeederHeadSeries = PowerSeries;

impl PowerSeries {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    fn check_grid(&self) -> Result<(), SeriesError> {
        let step = Duration::minutes(STEP_MINUTES);
        for w in self.timestamps.windows(2) {
            let delta = w[1] - w[0];
            if delta <= Duration::zero() {
                return Err(SeriesError::OutOfOrder {
                    series: self.id.clone(),
                    timestamp: format_timestamp(&w[1]),
                });
            }
            if delta == step {
                continue;
            }
            let minutes = delta.num_minutes();
            if delta.num_seconds() % (STEP_MINUTES * 60) == 0 {
                return Err(SeriesError::Gap {
                    series: self.id.clone(),
                    missing: format_timestamp(&(w[0] + step)),
                });
            }
            return Err(SeriesError::Spacing {
                series: self.id.clone(),
                after: format_timestamp(&w[0]),
                minutes,
            });
        }
        Ok(())
    }
}

pub fn format_timestamp(t: &NaiveDateTime) -> String {
    t.format(TIMESTAMP_FORMAT).to_string()
}

pub fn parse_timestamp(value: &str) -> Option<NaiveDateTime> {
    let v = value.trim();
    NaiveDateTime::parse_from_str(v, "%Y-%m-%dT%H:%M:%S%.f")
        .or_else(|_| NaiveDateTime::parse_from_str(v, "%Y-%m-%d %H:%M:%S%.f"))
        .or_else(|_| NaiveDateTime::parse_from_str(v, "%Y-%m-%dT%H:%M"))
        .ok()
        .or_else(|| DateTime::parse_from_rfc3339(v).ok().map(|t| t.naive_utc()))
}

/// Checks that all series are on one gap-free 10-minute grid.
pub fn check_alignment(series: &[PowerSeries]) -> Result<(), SeriesError> {
    for s in series {
        s.check_grid()?;
    }
    let Some(first) = series.first() else {
        return Ok(());
    };
    for s in &series[1..] {
        if s.timestamps.first() != first.timestamps.first() || s.len() != first.len() {
            let fmt = |t: Option<&NaiveDateTime>| t.map(format_timestamp).unwrap_or_default();
            return Err(SeriesError::Misaligned {
                series: s.id.clone(),
                expected: fmt(first.timestamps.first()),
                expected_len: first.len(),
                found: fmt(s.timestamps.first()),
                found_len: s.len(),
            });
        }
    }
    Ok(())
}

/// Reads a delimited document with columns `timestamp, <id_column>, p_kw, q_kvar` into one
/// series per id (sorted by id). Use `id_column = "node_id"` for transformer measurements and
/// `"feeder_id"` for feeder heads.
pub fn load_series<R: Read>(reader: R, id_column: &str) -> Result<Vec<PowerSeries>, SeriesError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| SeriesError::Io(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| SeriesError::MissingColumn(name.to_string()))
    };
    let (ct, cid, cp, cq) = (col("timestamp")?, col(id_column)?, col("p_kw")?, col("q_kvar")?);

    let mut by_id: BTreeMap<String, PowerSeries> = BTreeMap::new();
    for (k, record) in rdr.records().enumerate() {
        // Header is row 1.
        let row = k as u64 + 2;
        let record = record.map_err(|e| SeriesError::Csv {
            row,
            message: e.to_string(),
        })?;
        let field = |i: usize| record.get(i).unwrap_or("");
        let id = field(cid).to_string();
        let ts = parse_timestamp(field(ct)).ok_or_else(|| SeriesError::BadTimestamp {
            row,
            value: field(ct).to_string(),
        })?;
        let number = |i: usize, column: &str| {
            field(i)
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| SeriesError::NonNumeric {
                    row,
                    series: id.clone(),
                    column: column.to_string(),
                    value: field(i).to_string(),
                })
        };
        let p = number(cp, "p_kw")?;
        let q = number(cq, "q_kvar")?;
        let entry = by_id.entry(id.clone()).or_insert_with(|| PowerSeries {
            id,
            timestamps: Vec::new(),
            p_kw: Vec::new(),
            q_kvar: Vec::new(),
        });
        if entry.timestamps.last().is_some_and(|last| *last >= ts) {
            return Err(SeriesError::OutOfOrder {
                series: entry.id.clone(),
                timestamp: format_timestamp(&ts),
            });
        }
        entry.timestamps.push(ts);
        entry.p_kw.push(p);
        entry.q_kvar.push(q);
    }
    if by_id.is_empty() {
        return Err(SeriesError::Empty);
    }
    let series: Vec<PowerSeries> = by_id.into_values().collect();
    check_alignment(&series)?;
    Ok(series)
}

/// Loads per-node transformer measurements.
pub fn load_measurements<R: Read>(reader: R) -> Result<Vec<MeasurementSeries>, SeriesError> {
    load_series(reader, "node_id")
}

/// Loads feeder-head measurements.
pub fn load_feeder_heads<R: Read>(reader: R) -> Result<Vec<FeederHeadSeries>, SeriesError> {
    load_series(reader, "feeder_id")
}

/// Writes series in timestamp-major order, ids sorted within each timestamp.
pub fn write_series<W: Write>(writer: W, series: &[PowerSeries], id_column: &str) -> Result<(), SeriesError> {
    let io = |e: csv::Error| SeriesError::Io(e.to_string());
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["timestamp", id_column, "p_kw", "q_kvar"]).map_err(io)?;
    let mut sorted: Vec<&PowerSeries> = series.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let steps = sorted.first().map_or(0, |s| s.len());
    for t in 0..steps {
        for s in &sorted {
            wtr.write_record([
                format_timestamp(&s.timestamps[t]),
                s.id.clone(),
                s.p_kw[t].to_string(),
                s.q_kvar[t].to_string(),
            ])
            .map_err(io)?;
        }
    }
    wtr.flush().map_err(|e| SeriesError::Io(e.to_string()))?;
    Ok(())
}

/// Splits a feeder-head series over its member transformers in proportion to their kVA
/// rating. The last member absorbs rounding so the allocation sums back to the head value.
pub fn allocate_by_rating(
    head: &FeederHeadSeries,
    members: &[(String, f64)],
) -> Result<Vec<MeasurementSeries>, SeriesError> {
    let Some(((last_id, _), rest)) = members.split_last() else {
        return Err(SeriesError::NoMembers);
    };
    for (id, rating) in members {
        if !(*rating > 0.0 && rating.is_finite()) {
            return Err(SeriesError::NonPositiveRating(id.clone()));
        }
    }
    let total: f64 = members.iter().map(|(_, r)| r).sum();
    let mut out: Vec<MeasurementSeries> = rest
        .iter()
        .map(|(id, rating)| {
            let share = rating / total;
            PowerSeries {
                id: id.clone(),
                timestamps: head.timestamps.clone(),
                p_kw: head.p_kw.iter().map(|p| p * share).collect(),
                q_kvar: head.q_kvar.iter().map(|q| q * share).collect(),
            }
        })
        .collect();
    let remainder = |head_vals: &[f64], pick: fn(&PowerSeries) -> &Vec<f64>| -> Vec<f64> {
        (0..head_vals.len())
            .map(|t| {
                let assigned = out.iter().fold(0.0, |acc, s| acc + pick(s)[t]);
                head_vals[t] - assigned
            })
            .collect()
    };
    let p_last = remainder(&head.p_kw, |s| &s.p_kw);
    let q_last = remainder(&head.q_kvar, |s| &s.q_kvar);
    out.push(PowerSeries {
        id: last_id.clone(),
        timestamps: head.timestamps.clone(),
        p_kw: p_last,
        q_kvar: q_last,
    });
    Ok(out)
}

/// Adds a constant load of `add_kw` at `power_factor` (lagging) to every series and step.
pub fn apply_scenario_load(
    series: &[PowerSeries],
    add_kw: f64,
    power_factor: f64,
) -> Result<Vec<PowerSeries>, SeriesError> {
    if !(power_factor > 0.0 && power_factor <= 1.0) {
        return Err(SeriesError::InvalidPowerFactor(power_factor));
    }
    let add_kvar = add_kw * power_factor.acos().tan();
    Ok(series
        .iter()
        .map(|s| PowerSeries {
            id: s.id.clone(),
            timestamps: s.timestamps.clone(),
            p_kw: s.p_kw.iter().map(|p| p + add_kw).collect(),
            q_kvar: s.q_kvar.iter().map(|q| q + add_kvar).collect(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t0() -> NaiveDateTime {
        parse_timestamp("2021-06-01T00:00:00").unwrap()
    }

    fn flat(id: &str, p: f64, q: f64, steps: usize) -> PowerSeries {
        PowerSeries {
            id: id.into(),
            timestamps: (0..steps as i64).map(|k| t0() + Duration::minutes(10 * k)).collect(),
            p_kw: vec![p; steps],
            q_kvar: vec![q; steps],
        }
    }

    fn document(series: &[PowerSeries]) -> String {
        let mut buf = Vec::new();
        write_series(&mut buf, series, "node_id").unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn loads_full_day() {
        let doc = document(&[flat("a", 1.0, 0.5, 144), flat("b", 2.0, 0.0, 144)]);
        let series = load_measurements(doc.as_bytes()).unwrap();
        assert_eq!(series.len(), 2);
        assert!(series.iter().all(|s| s.len() == 144));
        assert_eq!(series[1].p_kw[17], 2.0);
    }

    #[test]
    fn gap_names_missing_timestamp() {
        let doc = document(&[flat("a", 1.0, 0.5, 144), flat("b", 2.0, 0.0, 144)]);
        let doc: String = doc
            .lines()
            .filter(|l| !l.starts_with("2021-06-01T07:10:00,b"))
            .map(|l| format!("{l}\n"))
            .collect();
        assert_eq!(
            load_measurements(doc.as_bytes()),
            Err(SeriesError::Gap {
                series: "b".into(),
                missing: "2021-06-01T07:10:00".into()
            })
        );
    }

    #[test]
    fn shifted_grid_is_misaligned() {
        let mut b = flat("b", 2.0, 0.0, 144);
        b.timestamps.iter_mut().for_each(|t| *t += Duration::minutes(5));
        let doc = document(&[flat("a", 1.0, 0.5, 144)]);
        let mut doc_b = Vec::new();
        write_series(&mut doc_b, &[b], "node_id").unwrap();
        let body: String = String::from_utf8(doc_b).unwrap().lines().skip(1).map(|l| format!("{l}\n")).collect();
        let err = load_measurements(format!("{doc}{body}").as_bytes()).unwrap_err();
        assert!(matches!(err, SeriesError::Misaligned { ref series, .. } if series == "b"), "{err}");
    }

    #[test]
    fn non_numeric_sample_reports_row() {
        let doc = "timestamp,node_id,p_kw,q_kvar\n2021-06-01T00:00:00,a,1.0,0.0\n2021-06-01T00:10:00,a,abc,0.0\n";
        assert_eq!(
            load_measurements(doc.as_bytes()),
            Err(SeriesError::NonNumeric {
                row: 3,
                series: "a".into(),
                column: "p_kw".into(),
                value: "abc".into()
            })
        );
    }

    #[test]
    fn missing_column() {
        let doc = "timestamp,feeder_id,p_kw,q_kvar\n";
        assert_eq!(
            load_measurements(doc.as_bytes()),
            Err(SeriesError::MissingColumn("node_id".into()))
        );
    }

    #[test]
    fn allocation_examples() {
        let head = flat("F1", 100.0, 10.0, 3);
        let out = allocate_by_rating(&head, &[("a".into(), 250.0), ("b".into(), 250.0)]).unwrap();
        assert_eq!(out[0].p_kw, vec![50.0; 3]);
        assert_eq!(out[1].p_kw, vec![50.0; 3]);

        let head = flat("F1", 90.0, 0.0, 2);
        let out = allocate_by_rating(&head, &[("a".into(), 100.0), ("b".into(), 200.0)]).unwrap();
        assert!((out[0].p_kw[0] - 30.0).abs() < 1e-12);
        assert!((out[1].p_kw[0] - 60.0).abs() < 1e-12);
        assert_eq!(out[0].p_kw[0] + out[1].p_kw[0], 90.0);

        let head = flat("F1", 37.5, -2.0, 4);
        let out = allocate_by_rating(&head, &[("only".into(), 630.0)]).unwrap();
        assert_eq!(out[0].p_kw, head.p_kw);
        assert_eq!(out[0].q_kvar, head.q_kvar);
        assert_eq!(out[0].id, "only");
    }

    #[test]
    fn allocation_errors() {
        let head = flat("F1", 1.0, 0.0, 1);
        assert_eq!(allocate_by_rating(&head, &[]), Err(SeriesError::NoMembers));
        assert_eq!(
            allocate_by_rating(&head, &[("a".into(), 1.0), ("b".into(), 0.0)]),
            Err(SeriesError::NonPositiveRating("b".into()))
        );
    }

    #[test]
    fn scenario_load_examples() {
        let base = vec![flat("a", 10.0, 2.0, 3), flat("b", -5.0, 0.0, 3)];
        assert_eq!(apply_scenario_load(&base, 0.0, 1.0).unwrap(), base);
        let out = apply_scenario_load(&base, 300.0, 1.0).unwrap();
        assert_eq!(out[0].p_kw, vec![310.0; 3]);
        assert_eq!(out[0].q_kvar, base[0].q_kvar);
        assert_eq!(out[1].p_kw, vec![295.0; 3]);
        let out = apply_scenario_load(&base, 300.0, 0.9486833).unwrap();
        assert!((out[0].q_kvar[0] - 2.0 - 100.0).abs() < 1e-3);
        assert_eq!(apply_scenario_load(&base, 1.0, 0.0), Err(SeriesError::InvalidPowerFactor(0.0)));
        assert_eq!(apply_scenario_load(&base, 1.0, 1.2), Err(SeriesError::InvalidPowerFactor(1.2)));
    }
}
