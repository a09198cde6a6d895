use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use log::warn;

use super::{LabelInterval, RetweetEvent, ShareEvent};
use crate::{Error, Result};

/// A record type that can be read from a CSV or JSON-lines event file.
///
/// Both encodings share one schema: the CSV header and the JSON object keys
/// are the same field names, in `HEADER` order.
pub trait EventRecord: Sized {
    const HEADER: &'static [&'static str];

    fn from_fields(fields: &[&str]) -> Result<Self, String>;
}

fn non_empty<'a>(name: &str, value: &'a str) -> Result<&'a str, String> {
    if value.is_empty() {
        Err(format!("empty {name}"))
    } else {
        Ok(value)
    }
}

fn parse_int(name: &str, value: &str) -> Result<i64, String> {
    value
        .parse::<i64>()
        .map_err(|_| format!("{name} must be an integer, got {value:?}"))
}

fn parse_flag(value: &str) -> Result<bool, String> {
    match value {
        "1" | "true" | "TRUE" | "True" => Ok(true),
        "0" | "false" | "FALSE" | "False" => Ok(false),
        other => Err(format!("has_news_link must be 0, 1, true or false, got {other:?}")),
    }
}

impl EventRecord for ShareEvent {
    const HEADER: &'static [&'static str] = &["user_id", "outlet_id", "timestamp"];

    fn from_fields(fields: &[&str]) -> Result<Self, String> {
        let timestamp = parse_int("timestamp", fields[2])?;
        if timestamp < 0 {
            return Err(format!("negative timestamp {timestamp}"));
        }
        Ok(ShareEvent {
            user_id: non_empty("user_id", fields[0])?.to_owned(),
            outlet_id: non_empty("outlet_id", fields[1])?.to_owned(),
            timestamp,
        })
    }
}

impl EventRecord for RetweetEvent {
    const HEADER: &'static [&'static str] = &[
        "retweeted_user",
        "retweeting_user",
        "timestamp",
        "has_news_link",
    ];

    fn from_fields(fields: &[&str]) -> Result<Self, String> {
        Ok(RetweetEvent {
            retweeted_user: non_empty("retweeted_user", fields[0])?.to_owned(),
            retweeting_user: non_empty("retweeting_user", fields[1])?.to_owned(),
            timestamp: parse_int("timestamp", fields[2])?,
            has_news_link: parse_flag(fields[3])?,
        })
    }
}

impl EventRecord for LabelInterval {
    const HEADER: &'static [&'static str] = &["user_id", "start", "end", "label"];

    fn from_fields(fields: &[&str]) -> Result<Self, String> {
        let start = parse_int("start", fields[1])?;
        let end = parse_int("end", fields[2])?;
        if start >= end {
            return Err(format!("interval start {start} is not before end {end}"));
        }
        Ok(LabelInterval {
            user_id: non_empty("user_id", fields[0])?.to_owned(),
            start,
            end,
            label: fields[3].parse()?,
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Fail on the first malformed line instead of skipping it.
    pub strict: bool,
}

impl ParseOptions {
    pub fn strict() -> Self {
        ParseOptions { strict: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub skipped: usize,
}

fn is_jsonl(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("jsonl") | Some("ndjson")
    )
}

struct LineSink<'p, T, F> {
    path: &'p Path,
    strict: bool,
    skipped: usize,
    sink: F,
    _marker: std::marker::PhantomData<T>,
}

impl<T: EventRecord, F: FnMut(T)> LineSink<'_, T, F> {
    fn accept(&mut self, line: u64, fields: Result<Vec<String>, String>) -> Result<()> {
        let outcome = fields.and_then(|fields| {
            if fields.len() != T::HEADER.len() {
                return Err(format!(
                    "expected {} fields, found {}",
                    T::HEADER.len(),
                    fields.len()
                ));
            }
            let refs: Vec<&str> = fields.iter().map(String::as_str).collect();
            T::from_fields(&refs)
        });
        match outcome {
            Ok(record) => {
                (self.sink)(record);
                Ok(())
            }
            Err(reason) if self.strict => Err(Error::Malformed {
                path: self.path.to_path_buf(),
                line,
                reason,
            }),
            Err(reason) => {
                warn!(
                    "{}:{line}: skipping malformed record: {reason}",
                    self.path.display()
                );
                self.skipped += 1;
                Ok(())
            }
        }
    }
}

/// Streams every well-formed record of `path` into `sink`, in file order.
///
/// Returns the number of malformed lines that were skipped. Files ending in
/// `.jsonl` or `.ndjson` are read as JSON lines, anything else as CSV with a
/// mandatory header row. A header that does not match the schema is fatal
/// even outside strict mode; an empty file yields no records.
pub fn for_each_event<T, F>(path: &Path, options: ParseOptions, sink: F) -> Result<usize>
where
    T: EventRecord,
    F: FnMut(T),
{
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = LineSink {
        path,
        strict: options.strict,
        skipped: 0,
        sink,
        _marker: std::marker::PhantomData,
    };
    if is_jsonl(path) {
        read_jsonl(path, BufReader::new(file), &mut lines)?;
    } else {
        read_csv(path, BufReader::new(file), &mut lines)?;
    }
    Ok(lines.skipped)
}

fn read_csv<T: EventRecord, F: FnMut(T)>(
    path: &Path,
    reader: impl std::io::Read,
    lines: &mut LineSink<'_, T, F>,
) -> Result<()> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = csv.records();

    match records.next() {
        None => return Ok(()),
        Some(Err(e)) => {
            return Err(Error::Malformed {
                path: path.to_path_buf(),
                line: 1,
                reason: e.to_string(),
            })
        }
        Some(Ok(header)) => {
            let found: Vec<String> = header.iter().map(str::to_owned).collect();
            if found != T::HEADER {
                return Err(Error::Header {
                    path: path.to_path_buf(),
                    found,
                    expected: T::HEADER.iter().map(|s| s.to_string()).collect(),
                });
            }
        }
    }

    for record in records {
        match record {
            Ok(record) => {
                let line = record.position().map_or(0, |p| p.line());
                lines.accept(line, Ok(record.iter().map(str::to_owned).collect()))?;
            }
            Err(e) => {
                if let csv::ErrorKind::Io(io) = e.kind() {
                    return Err(Error::io(path, std::io::Error::new(io.kind(), io.to_string())));
                }
                let line = e.position().map_or(0, |p| p.line());
                lines.accept(line, Err(e.to_string()))?;
            }
        }
    }
    Ok(())
}

fn json_fields(header: &[&str], line: &str) -> Result<Vec<String>, String> {
    let value: serde_json::Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let object = value
        .as_object()
        .ok_or_else(|| "expected a JSON object".to_string())?;
    header
        .iter()
        .map(|key| match object.get(*key) {
            Some(serde_json::Value::String(s)) => Ok(s.clone()),
            Some(serde_json::Value::Number(n)) => Ok(n.to_string()),
            Some(serde_json::Value::Bool(b)) => Ok(b.to_string()),
            Some(other) => Err(format!("unsupported value for {key}: {other}")),
            None => Err(format!("missing key {key}")),
        })
        .collect()
}

fn read_jsonl<T: EventRecord, F: FnMut(T)>(
    path: &Path,
    reader: impl BufRead,
    lines: &mut LineSink<'_, T, F>,
) -> Result<()> {
    for (index, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        lines.accept(index as u64 + 1, json_fields(T::HEADER, &line))?;
    }
    Ok(())
}

/// Reads all well-formed records of `path` into memory.
pub fn read_events<T: EventRecord>(path: &Path, options: ParseOptions) -> Result<Parsed<T>> {
    let mut records = Vec::new();
    let skipped = for_each_event(path, options, |r| records.push(r))?;
    Ok(Parsed { records, skipped })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Shares,
    Retweets,
    Labels,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventList {
    Shares(Vec<ShareEvent>),
    Retweets(Vec<RetweetEvent>),
    Labels(Vec<LabelInterval>),
}

impl EventList {
    pub fn len(&self) -> usize {
        match self {
            EventList::Shares(v) => v.len(),
            EventList::Retweets(v) => v.len(),
            EventList::Labels(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedEvents {
    pub events: EventList,
    pub skipped: usize,
}

/// Parses an event file of the given kind.
pub fn parse_events(path: &Path, kind: EventKind, options: ParseOptions) -> Result<ParsedEvents> {
    Ok(match kind {
        EventKind::Shares => {
            let p = read_events::<ShareEvent>(path, options)?;
            ParsedEvents {
                events: EventList::Shares(p.records),
                skipped: p.skipped,
            }
        }
        EventKind::Retweets => {
            let p = read_events::<RetweetEvent>(path, options)?;
            ParsedEvents {
                events: EventList::Retweets(p.records),
                skipped: p.skipped,
            }
        }
        EventKind::Labels => {
            let p = read_events::<LabelInterval>(path, options)?;
            ParsedEvents {
                events: EventList::Labels(p.records),
                skipped: p.skipped,
            }
        }
    })
}
