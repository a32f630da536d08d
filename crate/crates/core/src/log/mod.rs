//! Event logs: traces of activity executions, their variants, and ingestion.
//!
//! Only the control-flow perspective is kept. An [`Event`] is an activity label
//! with an optional timestamp; a [`Trace`] is the ordered events of one case.
//! Event order is always the order in which events were read.

mod corpus;
mod csv_io;
mod generator;
mod xes;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use chrono::{DateTime, FixedOffset};

use crate::error::{Error, Result};

pub use corpus::{CorpusSpec, Regime};
pub use csv_io::{parse_csv, write_csv, CsvColumns, DEFAULT_ACTIVITY_COLUMN, DEFAULT_CASE_COLUMN};
pub use generator::{generate_log, GeneratorSpec};
pub use xes::{parse_xes, write_xes};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub activity: String,
    pub timestamp: Option<DateTime<FixedOffset>>,
}

impl Event {
    pub fn new(activity: impl Into<String>) -> Result<Self> {
        let activity = activity.into();
        if activity.is_empty() {
            return Err(Error::Invalid("event activity must be non-empty".into()));
        }
        Ok(Event {
            activity,
            timestamp: None,
        })
    }

    pub fn with_timestamp(mut self, timestamp: Option<DateTime<FixedOffset>>) -> Self {
        self.timestamp = timestamp;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub case_id: String,
    events: Vec<Event>,
}

impl Trace {
    pub fn new(case_id: impl Into<String>, events: Vec<Event>) -> Result<Self> {
        let case_id = case_id.into();
        if events.is_empty() {
            return Err(Error::Invalid(format!("trace {case_id} has no events")));
        }
        Ok(Trace { case_id, events })
    }

    /// Builds a trace from bare activity labels.
    pub fn from_activities<S: AsRef<str>>(case_id: impl Into<String>, activities: &[S]) -> Result<Self> {
        let events = activities
            .iter()
            .map(|a| Event::new(a.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Trace::new(case_id, events)
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn activities(&self) -> impl Iterator<Item = &str> + '_ {
        self.events.iter().map(|e| e.activity.as_str())
    }

    pub fn activity_sequence(&self) -> Vec<String> {
        self.activities().map(str::to_owned).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventLog {
    pub name: String,
    traces: Vec<Trace>,
}

impl EventLog {
    pub fn new(name: impl Into<String>, traces: Vec<Trace>) -> Result<Self> {
        if traces.is_empty() {
            return Err(Error::EmptyLog);
        }
        Ok(EventLog {
            name: name.into(),
            traces,
        })
    }

    /// Convenience constructor used heavily in tests: one trace per activity slice.
    pub fn from_sequences<S: AsRef<str>>(name: impl Into<String>, sequences: &[Vec<S>]) -> Result<Self> {
        let traces = sequences
            .iter()
            .enumerate()
            .map(|(i, seq)| Trace::from_activities(format!("case{i}"), seq))
            .collect::<Result<Vec<_>>>()?;
        EventLog::new(name, traces)
    }

    pub fn traces(&self) -> &[Trace] {
        &self.traces
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    pub fn n_events(&self) -> usize {
        self.traces.iter().map(Trace::len).sum()
    }

    /// Activity alphabet in lexicographic order.
    pub fn alphabet(&self) -> Vec<String> {
        self.traces
            .iter()
            .flat_map(|t| t.activities())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(str::to_owned)
            .collect()
    }

    /// Every trace as a sequence of alphabet indices, plus the alphabet.
    pub fn symbolized(&self) -> (Vec<String>, Vec<Vec<usize>>) {
        let alphabet = self.alphabet();
        let index: HashMap<&str, usize> = alphabet
            .iter()
            .enumerate()
            .map(|(i, a)| (a.as_str(), i))
            .collect();
        let traces = self
            .traces
            .iter()
            .map(|t| t.activities().map(|a| index[a]).collect())
            .collect();
        (alphabet, traces)
    }

    pub fn variants(&self) -> Vec<Variant> {
        variants_of(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variant {
    pub activity_sequence: Vec<String>,
    pub count: usize,
}

/// Distinct activity sequences with their frequencies, most frequent first;
/// ties are ordered lexicographically by sequence.
pub fn variants_of(log: &EventLog) -> Vec<Variant> {
    let mut counts: BTreeMap<Vec<&str>, usize> = BTreeMap::new();
    for trace in log.traces() {
        *counts.entry(trace.activities().collect()).or_default() += 1;
    }
    let mut variants: Vec<Variant> = counts
        .into_iter()
        .map(|(seq, count)| Variant {
            activity_sequence: seq.into_iter().map(str::to_owned).collect(),
            count,
        })
        .collect();
    // BTreeMap iteration is already lexicographic, so a stable sort keeps the tie order.
    variants.sort_by_key(|v| std::cmp::Reverse(v.count));
    variants
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log(seqs: &[&[&str]]) -> EventLog {
        let seqs: Vec<Vec<&str>> = seqs.iter().map(|s| s.to_vec()).collect();
        EventLog::from_sequences("t", &seqs).unwrap()
    }

    #[test]
    fn variants_sorted_by_count_then_sequence() {
        let l = log(&[&["a", "c"], &["a", "b"], &["a", "b"]]);
        let v = variants_of(&l);
        assert_eq!(v.len(), 2);
        assert_eq!(v[0].activity_sequence, vec!["a", "b"]);
        assert_eq!(v[0].count, 2);
        assert_eq!(v[1].activity_sequence, vec!["a", "c"]);
        assert_eq!(v[1].count, 1);
    }

    #[test]
    fn single_trace_single_variant() {
        let v = variants_of(&log(&[&["x", "y"]]));
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].count, 1);
    }

    #[test]
    fn distinct_traces_are_distinct_variants() {
        let l = log(&[&["d"], &["c"], &["b", "a"], &["a", "b"]]);
        let v = variants_of(&l);
        assert_eq!(v.len(), 4);
        assert!(v.iter().all(|x| x.count == 1));
        // ties fall back to lexicographic order
        assert_eq!(v[0].activity_sequence, vec!["a", "b"]);
        assert_eq!(v[3].activity_sequence, vec!["d"]);
    }

    #[test]
    fn alphabet_is_lexicographic() {
        let l = log(&[&["zeta", "alpha"], &["beta"]]);
        assert_eq!(l.alphabet(), vec!["alpha", "beta", "zeta"]);
    }

    #[test]
    fn empty_structures_rejected() {
        assert!(matches!(EventLog::new("x", vec![]), Err(Error::EmptyLog)));
        assert!(Trace::new("c", vec![]).is_err());
        assert!(Event::new("").is_err());
    }
}
