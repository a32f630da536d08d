//! XES reading and writing, restricted to the control-flow subset:
//! `log > trace > event` with `concept:name` string attributes.

use std::io::{Read, Write};

use chrono::DateTime;
use quick_xml::events::{BytesStart, Event as XmlEvent};
use quick_xml::Reader;

use super::{Event, EventLog, Trace};
use crate::error::{Error, Result};

const NAME_KEY: &str = "concept:name";
const TIME_KEY: &str = "time:timestamp";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scope {
    Log,
    Trace,
    Event,
    Other,
}

#[derive(Default)]
struct PendingTrace {
    case_id: Option<String>,
    events: Vec<Event>,
}

#[derive(Default)]
struct PendingEvent {
    activity: Option<String>,
    timestamp: Option<String>,
    position: usize,
}

/// Parses an XES document. Attributes other than `concept:name` (and the
/// event `time:timestamp`) are ignored.
pub fn parse_xes<R: Read>(mut source: R) -> Result<EventLog> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let mut reader = Reader::from_reader(bytes.as_slice());
    reader.config_mut().trim_text(true);

    let mut stack: Vec<Scope> = Vec::new();
    let mut log_name: Option<String> = None;
    let mut traces = Vec::new();
    let mut trace: Option<PendingTrace> = None;
    let mut event: Option<PendingEvent> = None;
    let mut saw_log = false;
    let mut buf = Vec::new();

    loop {
        let mut position = reader.buffer_position() as usize;
        let xml_event = reader.read_event_into(&mut buf).map_err(|e| {
            let at = reader.error_position() as usize;
            parse_error(&bytes, at, e.to_string())
        })?;
        match xml_event {
            XmlEvent::Start(ref start) | XmlEvent::Empty(ref start) => {
                // skipped whitespace precedes the tag
                while bytes.get(position).is_some_and(u8::is_ascii_whitespace) {
                    position += 1;
                }
                let is_empty = matches!(xml_event, XmlEvent::Empty(_));
                let name = local_name(start);
                let parent = stack.last().copied();
                let scope = match (parent, name.as_str()) {
                    (None, "log") => {
                        saw_log = true;
                        Scope::Log
                    }
                    (None, other) => {
                        return Err(parse_error(
                            &bytes,
                            position,
                            format!("expected <log> root element, found <{other}>"),
                        ))
                    }
                    (Some(Scope::Log), "trace") => {
                        trace = Some(PendingTrace::default());
                        Scope::Trace
                    }
                    (Some(Scope::Trace), "event") => {
                        event = Some(PendingEvent {
                            position,
                            ..Default::default()
                        });
                        Scope::Event
                    }
                    _ => {
                        read_attribute(start, parent, &bytes, position, &mut log_name, &mut trace, &mut event)?;
                        Scope::Other
                    }
                };
                if is_empty {
                    close_scope(scope, &bytes, &mut traces, &mut trace, &mut event)?;
                } else {
                    stack.push(scope);
                }
            }
            XmlEvent::End(_) => {
                if let Some(scope) = stack.pop() {
                    close_scope(scope, &bytes, &mut traces, &mut trace, &mut event)?;
                }
            }
            XmlEvent::Eof => break,
            _ => {}
        }
        buf.clear();
    }

    if !saw_log {
        return Err(parse_error(&bytes, bytes.len(), "missing <log> element".into()));
    }
    if !stack.is_empty() {
        return Err(parse_error(&bytes, bytes.len(), "unexpected end of document".into()));
    }
    EventLog::new(log_name.unwrap_or_else(|| "log".to_string()), traces)
}

fn read_attribute(
    start: &BytesStart<'_>,
    parent: Option<Scope>,
    bytes: &[u8],
    position: usize,
    log_name: &mut Option<String>,
    trace: &mut Option<PendingTrace>,
    event: &mut Option<PendingEvent>,
) -> Result<()> {
    let tag = local_name(start);
    if tag != "string" && tag != "date" {
        return Ok(());
    }
    let mut key = None;
    let mut value = None;
    for attr in start.attributes() {
        let attr = attr.map_err(|e| parse_error(bytes, position, e.to_string()))?;
        let text = attr
            .unescape_value()
            .map_err(|e| parse_error(bytes, position, e.to_string()))?
            .into_owned();
        match attr.key.as_ref() {
            b"key" => key = Some(text),
            b"value" => value = Some(text),
            _ => {}
        }
    }
    let (Some(key), Some(value)) = (key, value) else {
        return Ok(());
    };
    match (parent, tag.as_str(), key.as_str()) {
        (Some(Scope::Log), "string", NAME_KEY) => *log_name = Some(value),
        (Some(Scope::Trace), "string", NAME_KEY) => {
            if let Some(t) = trace.as_mut() {
                t.case_id = Some(value);
            }
        }
        (Some(Scope::Event), "string", NAME_KEY) => {
            if let Some(e) = event.as_mut() {
                e.activity = Some(value);
            }
        }
        (Some(Scope::Event), "date", TIME_KEY) => {
            if let Some(e) = event.as_mut() {
                e.timestamp = Some(value);
            }
        }
        _ => {}
    }
    Ok(())
}

fn close_scope(
    scope: Scope,
    bytes: &[u8],
    traces: &mut Vec<Trace>,
    trace: &mut Option<PendingTrace>,
    event: &mut Option<PendingEvent>,
) -> Result<()> {
    match scope {
        Scope::Event => {
            let pending = event.take().unwrap_or_default();
            let activity = match pending.activity {
                Some(a) if !a.is_empty() => a,
                _ => {
                    return Err(parse_error(
                        bytes,
                        pending.position,
                        "event without a concept:name string attribute".into(),
                    ))
                }
            };
            let timestamp = pending
                .timestamp
                .and_then(|ts| DateTime::parse_from_rfc3339(&ts).ok());
            if let Some(t) = trace.as_mut() {
                t.events.push(Event::new(activity)?.with_timestamp(timestamp));
            }
        }
        Scope::Trace => {
            let pending = trace.take().unwrap_or_default();
            if pending.events.is_empty() {
                log::warn!("skipping trace without events");
                return Ok(());
            }
            let case_id = pending
                .case_id
                .unwrap_or_else(|| format!("case{}", traces.len()));
            traces.push(Trace::new(case_id, pending.events)?);
        }
        Scope::Log | Scope::Other => {}
    }
    Ok(())
}

fn local_name(start: &BytesStart<'_>) -> String {
    String::from_utf8_lossy(start.local_name().as_ref()).into_owned()
}

fn parse_error(bytes: &[u8], offset: usize, message: String) -> Error {
    let offset = offset.min(bytes.len());
    let prefix = &bytes[..offset];
    let line = prefix.iter().filter(|&&b| b == b'\n').count() + 1;
    let line_start = prefix
        .iter()
        .rposition(|&b| b == b'\n')
        .map_or(0, |p| p + 1);
    Error::Parse {
        line,
        column: offset - line_start + 1,
        message,
    }
}

/// Writes the control-flow subset of XES understood by [`parse_xes`].
pub fn write_xes<W: Write>(log: &EventLog, mut out: W) -> Result<()> {
    writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#)?;
    writeln!(out, r#"<log xes.version="1.0" xes.features="">"#)?;
    writeln!(out, r#"  <string key="concept:name" value="{}"/>"#, escape(&log.name))?;
    for trace in log.traces() {
        writeln!(out, "  <trace>")?;
        writeln!(out, r#"    <string key="concept:name" value="{}"/>"#, escape(&trace.case_id))?;
        for event in trace.events() {
            writeln!(out, "    <event>")?;
            writeln!(out, r#"      <string key="concept:name" value="{}"/>"#, escape(&event.activity))?;
            if let Some(ts) = event.timestamp {
                writeln!(out, r#"      <date key="time:timestamp" value="{}"/>"#, ts.to_rfc3339())?;
            }
            writeln!(out, "    </event>")?;
        }
        writeln!(out, "  </trace>")?;
    }
    writeln!(out, "</log>")?;
    Ok(())
}

fn escape(s: &str) -> String {
    quick_xml::escape::escape(s).into_owned()
}
