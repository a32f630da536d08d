//! Flat CSV event tables: one row per event, grouped into traces by case id.

use std::collections::HashMap;
use std::io::{Read, Write};

use chrono::DateTime;

use super::{Event, EventLog, Trace};
use crate::error::{Error, Result};

pub const DEFAULT_CASE_COLUMN: &str = "case:concept:name";
pub const DEFAULT_ACTIVITY_COLUMN: &str = "concept:name";
const TIMESTAMP_COLUMN: &str = "time:timestamp";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvColumns {
    pub case: String,
    pub activity: String,
}

impl Default for CsvColumns {
    fn default() -> Self {
        CsvColumns {
            case: DEFAULT_CASE_COLUMN.to_string(),
            activity: DEFAULT_ACTIVITY_COLUMN.to_string(),
        }
    }
}

/// Parses an event table. Traces appear in order of first occurrence of their
/// case id; events keep file order within a case. Timestamps, when a
/// `time:timestamp` column exists, are stored but never used for ordering.
pub fn parse_csv<R: Read>(source: R, name: &str, columns: &CsvColumns) -> Result<EventLog> {
    let mut reader = csv::ReaderBuilder::new().flexible(false).from_reader(source);
    let headers = match reader.headers() {
        Ok(h) => h.clone(),
        // an empty file has no header row at all
        Err(_) => return Err(Error::EmptyLog),
    };
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::EmptyLog);
    }
    let find = |col: &str| {
        headers
            .iter()
            .position(|h| h == col)
            .ok_or_else(|| Error::config(format!("CSV column '{col}' not found in header")))
    };
    let case_idx = find(&columns.case)?;
    let activity_idx = find(&columns.activity)?;
    let ts_idx = headers.iter().position(|h| h == TIMESTAMP_COLUMN);

    let mut order: Vec<String> = Vec::new();
    let mut grouped: HashMap<String, Vec<Event>> = HashMap::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let case = record.get(case_idx).unwrap_or_default();
        let activity = record.get(activity_idx).unwrap_or_default();
        if activity.is_empty() {
            return Err(Error::Parse {
                line: row + 2,
                column: activity_idx + 1,
                message: "empty activity".into(),
            });
        }
        let timestamp = ts_idx
            .and_then(|i| record.get(i))
            .filter(|s| !s.is_empty())
            .and_then(|s| DateTime::parse_from_rfc3339(s).ok());
        let events = grouped.entry(case.to_string()).or_insert_with(|| {
            order.push(case.to_string());
            Vec::new()
        });
        events.push(Event::new(activity)?.with_timestamp(timestamp));
    }

    let traces = order
        .into_iter()
        .map(|case| {
            let events = grouped.remove(&case).unwrap_or_default();
            Trace::new(case, events)
        })
        .collect::<Result<Vec<_>>>()?;
    EventLog::new(name, traces)
}

/// Writes the log with the default column names, trace by trace.
pub fn write_csv<W: Write>(log: &EventLog, out: W) -> Result<()> {
    let with_time = log
        .traces()
        .iter()
        .flat_map(|t| t.events())
        .any(|e| e.timestamp.is_some());
    let mut writer = csv::Writer::from_writer(out);
    if with_time {
        writer.write_record([DEFAULT_CASE_COLUMN, DEFAULT_ACTIVITY_COLUMN, TIMESTAMP_COLUMN])?;
    } else {
        writer.write_record([DEFAULT_CASE_COLUMN, DEFAULT_ACTIVITY_COLUMN])?;
    }
    for trace in log.traces() {
        for event in trace.events() {
            if with_time {
                let ts = event.timestamp.map(|t| t.to_rfc3339()).unwrap_or_default();
                writer.write_record([trace.case_id.as_str(), event.activity.as_str(), ts.as_str()])?;
            } else {
                writer.write_record([trace.case_id.as_str(), event.activity.as_str()])?;
            }
        }
    }
    writer.flush()?;
    Ok(())
}
