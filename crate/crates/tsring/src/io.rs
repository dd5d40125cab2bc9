//! Series files: the XML document layout and two-column CSV.
//!
//! ```xml
//! <ts:document xmlns:ts="urn:tsring:timeseries:v1">
//!   <ts:timeseries><ts:date>2000-01-03</ts:date><ts:value>100.5</ts:value></ts:timeseries>
//! </ts:document>
//! ```
//!
//! Any prefix bound to [`TS_NAMESPACE`] is accepted. Values `!` and `?` (and
//! an empty value) denote the two nulls. The calendar is inferred from the
//! greatest common step between consecutive dates; grid points without an
//! entry become `!`.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use chrono::{NaiveDate, NaiveDateTime, Timelike};
use quick_xml::events::Event;
use quick_xml::name::ResolveResult;
use quick_xml::NsReader;
use tsring_core::{Calendar, Granularity, TimeSeries, Timestamp, TsValue};

pub const TS_NAMESPACE: &str = "urn:tsring:timeseries:v1";

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: date {date} is earlier than the previous entry")]
    NonMonotoneDates { line: usize, date: String },
    #[error("line {line}: duplicate date {date}")]
    DuplicateDate { line: usize, date: String },
    #[error("line {line}: expected 2 columns, found {found}")]
    BadColumnCount { line: usize, found: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Series(#[from] tsring_core::Error),
}

type Result<T> = std::result::Result<T, IngestError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Xml,
    Csv,
}

impl Format {
    /// Format implied by a file extension, if any.
    pub fn from_path(path: &Path) -> Option<Format> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "xml" => Some(Format::Xml),
            "csv" => Some(Format::Csv),
            _ => None,
        }
    }

    fn sniff(text: &str) -> Format {
        if text.trim_start().starts_with('<') {
            Format::Xml
        } else {
            Format::Csv
        }
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "xml" => Ok(Format::Xml),
            "csv" => Ok(Format::Csv),
            _ => Err(format!("unknown format {s:?} (expected xml or csv)")),
        }
    }
}

/// Parses `2000-01-03`, `2000-01-03T09:30:00` or `2000-01-03 09:30:00`,
/// with an optional trailing `Z`.
pub fn parse_timestamp(text: &str) -> Option<Timestamp> {
    let t = text.trim();
    let t = t.strip_suffix('Z').unwrap_or(t);
    for fmt in [
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M",
    ] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(t, fmt) {
            return Some(dt);
        }
    }
    NaiveDate::parse_from_str(t, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
}

fn parse_value(text: &str, line: usize) -> Result<TsValue> {
    match text.trim() {
        "" | "!" => Ok(TsValue::Empty),
        "?" => Ok(TsValue::Unknown),
        t => t
            .parse::<f64>()
            .map(TsValue::real)
            .map_err(|_| IngestError::Parse {
                line,
                msg: format!("{t:?} is not a number"),
            }),
    }
}

/// One dated value and the line it came from.
#[derive(Debug, Clone, Copy)]
pub struct Entry {
    pub line: usize,
    pub date: Timestamp,
    pub value: TsValue,
}

/// Builds the dense series of `entries`, which must have strictly
/// increasing dates.
pub fn build_series(entries: &[Entry], granularity: Option<Granularity>) -> Result<TimeSeries> {
    let Some(first) = entries.first() else {
        return Err(IngestError::Parse {
            line: 1,
            msg: "no entries".into(),
        });
    };
    let mut step = 0i64;
    for pair in entries.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if b.date == a.date {
            return Err(IngestError::DuplicateDate {
                line: b.line,
                date: b.date.to_string(),
            });
        }
        if b.date < a.date {
            return Err(IngestError::NonMonotoneDates {
                line: b.line,
                date: b.date.to_string(),
            });
        }
        let diff = b.date.signed_duration_since(a.date);
        if diff.subsec_nanos() != 0 {
            return Err(IngestError::Parse {
                line: b.line,
                msg: "dates must fall on whole seconds".into(),
            });
        }
        step = gcd(step, diff.num_seconds());
    }
    let granularity = granularity.unwrap_or(if step == 0 {
        Granularity::Day
    } else {
        Granularity::coarsest_dividing(step)
    });
    let last = entries.last().expect("non-empty");
    let probe = Calendar::new(first.date, granularity, 0);
    let len = probe.offset_of(last.date)? as usize + 1;
    let mut values = vec![TsValue::Empty; len];
    for e in entries {
        values[probe.offset_of(e.date)? as usize] = e.value;
    }
    Ok(TimeSeries::new(probe.with_len(len), values)?)
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn line_at(text: &str, pos: u64) -> usize {
    let end = (pos as usize).min(text.len());
    text.as_bytes()[..end]
        .iter()
        .filter(|&&b| b == b'\n')
        .count()
        + 1
}

#[derive(Clone, Copy, PartialEq)]
enum Field {
    Date,
    Value,
}

/// Entries of an XML document, in file order.
pub fn xml_entries(text: &str) -> Result<Vec<Entry>> {
    let mut reader = NsReader::from_str(text);
    let mut entries = Vec::new();
    let mut depth = 0usize;
    let mut saw_document = false;
    let mut field: Option<Field> = None;
    let mut date: Option<(usize, String)> = None;
    let mut value: Option<String> = None;
    loop {
        let pos = reader.buffer_position();
        let err = |msg: String| IngestError::Parse {
            line: line_at(text, pos),
            msg,
        };
        let (ns, event) = reader
            .read_resolved_event()
            .map_err(|e| err(e.to_string()))?;
        let line = line_at(text, pos);
        match event {
            Event::Start(ref e) | Event::Empty(ref e) => {
                let is_empty = matches!(event, Event::Empty(_));
                let local = std::str::from_utf8(e.local_name().into_inner())
                    .unwrap_or("?")
                    .to_string();
                if !matches!(ns, ResolveResult::Bound(n) if n.as_ref() == TS_NAMESPACE.as_bytes()) {
                    return Err(err(format!(
                        "element <{local}> is not in namespace {TS_NAMESPACE}"
                    )));
                }
                match (depth, local.as_str()) {
                    (0, "document") => saw_document = true,
                    (1, "timeseries") => {
                        date = None;
                        value = None;
                    }
                    (2, "date") => field = Some(Field::Date),
                    (2, "value") => field = Some(Field::Value),
                    _ => return Err(err(format!("unexpected element <{local}>"))),
                }
                if is_empty {
                    if local == "value" {
                        value = Some(String::new());
                    }
                    field = None;
                    if local == "timeseries" {
                        return Err(err("empty timeseries entry".into()));
                    }
                } else {
                    depth += 1;
                }
            }
            Event::Text(t) => {
                let s = t.unescape().map_err(|e| err(e.to_string()))?;
                match field {
                    Some(Field::Date) => date.get_or_insert((line, String::new())).1.push_str(&s),
                    Some(Field::Value) => value.get_or_insert_with(String::new).push_str(&s),
                    None if s.trim().is_empty() => {}
                    None => return Err(err(format!("unexpected text {:?}", s.trim()))),
                }
            }
            Event::End(_) => {
                depth -= 1;
                if depth == 1 {
                    let (dline, d) = date
                        .take()
                        .ok_or_else(|| err("entry without a date".into()))?;
                    let parsed = parse_timestamp(&d).ok_or_else(|| IngestError::Parse {
                        line: dline,
                        msg: format!("{:?} is not a date", d.trim()),
                    })?;
                    entries.push(Entry {
                        line: dline,
                        date: parsed,
                        value: parse_value(value.as_deref().unwrap_or(""), dline)?,
                    });
                }
                field = None;
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if !saw_document {
        return Err(IngestError::Parse {
            line: 1,
            msg: "missing ts:document element".into(),
        });
    }
    Ok(entries)
}

/// Entries of a `date,value` CSV file. A first row whose date does not
/// parse is taken as a header.
pub fn csv_entries(text: &str) -> Result<Vec<Entry>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut entries = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| IngestError::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            msg: e.to_string(),
        })?;
        let line = record.position().map_or(row + 1, |p| p.line() as usize);
        if record.len() != 2 {
            return Err(IngestError::BadColumnCount {
                line,
                found: record.len(),
            });
        }
        let Some(date) = parse_timestamp(&record[0]) else {
            if row == 0 {
                continue;
            }
            return Err(IngestError::Parse {
                line,
                msg: format!("{:?} is not a date", &record[0]),
            });
        };
        entries.push(Entry {
            line,
            date,
            value: parse_value(&record[1], line)?,
        });
    }
    Ok(entries)
}

pub fn parse_xml(text: &str, granularity: Option<Granularity>) -> Result<TimeSeries> {
    build_series(&xml_entries(text)?, granularity)
}

pub fn parse_csv(text: &str, granularity: Option<Granularity>) -> Result<TimeSeries> {
    build_series(&csv_entries(text)?, granularity)
}

pub fn load_xml(path: &Path) -> Result<TimeSeries> {
    parse_xml(&std::fs::read_to_string(path)?, None)
}

pub fn load_csv(path: &Path) -> Result<TimeSeries> {
    parse_csv(&std::fs::read_to_string(path)?, None)
}

/// Reads a series file, choosing the format from the extension or, failing
/// that, from the content.
pub fn read_series(path: &Path, granularity: Option<Granularity>) -> Result<(TimeSeries, Format)> {
    let text = std::fs::read_to_string(path)?;
    let format = Format::from_path(path).unwrap_or_else(|| Format::sniff(&text));
    let series = match format {
        Format::Xml => parse_xml(&text, granularity)?,
        Format::Csv => parse_csv(&text, granularity)?,
    };
    Ok((series, format))
}

fn format_date(t: Timestamp, date_only: bool) -> String {
    if date_only {
        t.format("%Y-%m-%d").to_string()
    } else if t.nanosecond() != 0 {
        t.format("%Y-%m-%dT%H:%M:%S%.f").to_string()
    } else {
        t.format("%Y-%m-%dT%H:%M:%S").to_string()
    }
}

fn dates(s: &TimeSeries) -> impl Iterator<Item = (String, TsValue)> + '_ {
    let date_only = s.calendar().granularity >= Granularity::Day
        && s.calendar().start.time() == Default::default();
    s.items().map(move |(t, v)| (format_date(t, date_only), v))
}

pub fn write_xml(s: &TimeSeries) -> String {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(out, "<ts:document xmlns:ts=\"{TS_NAMESPACE}\">");
    for (date, v) in dates(s) {
        let _ = writeln!(
            out,
            "  <ts:timeseries><ts:date>{date}</ts:date><ts:value>{v}</ts:value></ts:timeseries>"
        );
    }
    out.push_str("</ts:document>\n");
    out
}

pub fn write_csv(s: &TimeSeries) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["date", "value"]).expect("in-memory write");
    for (date, v) in dates(s) {
        w.write_record([date, v.to_string()])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
}

pub fn write_series(s: &TimeSeries, format: Format) -> String {
    match format {
        Format::Xml => write_xml(s),
        Format::Csv => write_csv(s),
    }
}
