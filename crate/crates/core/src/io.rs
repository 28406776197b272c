//! CSV ingestion. Two layouts, both with a mandatory header row:
//! subject-level `dose,y` with `y` in {0, 1}, and aggregated `dose,n,events`.

use std::path::Path;

use crate::error::{EmaxError, Result};
use crate::model::{DoseGroup, Layout, ObservationSet};

const SUBJECT_COLUMNS: [&str; 2] = ["dose", "y"];
const AGGREGATED_COLUMNS: [&str; 3] = ["dose", "n", "events"];

fn columns(layout: Layout) -> &'static [&'static str] {
    match layout {
        Layout::Subject => &SUBJECT_COLUMNS,
        Layout::Aggregated => &AGGREGATED_COLUMNS,
    }
}

fn normalize(header: &csv::StringRecord) -> Vec<String> {
    header.iter().map(|h| h.trim().trim_start_matches('\u{feff}').to_ascii_lowercase()).collect()
}

/// Layout whose column signature matches `header`, if any.
pub fn layout_for_header(header: &[String]) -> Option<Layout> {
    [Layout::Subject, Layout::Aggregated].into_iter().find(|&l| header.iter().map(String::as_str).eq(columns(l).iter().copied()))
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, name: &str, line: u64) -> Result<T> {
    let raw = rec.get(i).unwrap_or("").trim();
    raw.parse().map_err(|_| EmaxError::InvalidData(format!("line {line}: column '{name}' is not a valid value: '{raw}'")))
}

/// Parses CSV text. With `layout = None` the layout is taken from the header;
/// otherwise the header must match the requested layout.
pub fn parse_observations(text: &str, layout: Option<Layout>) -> Result<ObservationSet> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(text.as_bytes());
    let header = normalize(rdr.headers().map_err(|e| EmaxError::InvalidData(format!("line 1: {e}")))?);
    if header.iter().all(|h| h.is_empty()) {
        return Err(EmaxError::InvalidData("line 1: missing header row".into()));
    }
    let found = layout_for_header(&header);
    let layout = match (layout, found) {
        (Some(want), Some(got)) if want == got => want,
        (None, Some(got)) => got,
        (want, _) => {
            let expected = match want {
                Some(l) => columns(l).join(","),
                None => format!("{} or {}", SUBJECT_COLUMNS.join(","), AGGREGATED_COLUMNS.join(",")),
            };
            return Err(EmaxError::InvalidData(format!("line 1: expected header {expected}, found {}", header.join(","))));
        }
    };
    let width = columns(layout).len();
    let mut groups = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            EmaxError::InvalidData(format!("line {line}: {e}"))
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        if rec.len() != width {
            return Err(EmaxError::InvalidData(format!("line {line}: expected {width} fields, found {}", rec.len())));
        }
        let dose: f64 = field(&rec, 0, "dose", line)?;
        if !dose.is_finite() || dose < 0.0 {
            return Err(EmaxError::InvalidData(format!("line {line}: dose must be finite and >= 0, got {dose}")));
        }
        let group = match layout {
            Layout::Subject => {
                let y: u8 = field(&rec, 1, "y", line)?;
                if y > 1 {
                    return Err(EmaxError::InvalidData(format!("line {line}: y must be 0 or 1, got {y}")));
                }
                DoseGroup { dose, n: 1, events: y as u32 }
            }
            Layout::Aggregated => {
                let n: u32 = field(&rec, 1, "n", line)?;
                let events: u32 = field(&rec, 2, "events", line)?;
                if n == 0 {
                    return Err(EmaxError::InvalidData(format!("line {line}: n must be positive")));
                }
                if events > n {
                    return Err(EmaxError::InvalidData(format!("line {line}: events ({events}) exceed n ({n})")));
                }
                DoseGroup { dose, n, events }
            }
        };
        groups.push(group);
    }
    if groups.is_empty() {
        return Err(EmaxError::InvalidData("no data rows after the header".into()));
    }
    match layout {
        Layout::Subject => {
            let records: Vec<(f64, bool)> = groups.iter().map(|g| (g.dose, g.events == 1)).collect();
            ObservationSet::from_subjects(&records)
        }
        Layout::Aggregated => ObservationSet::from_groups(groups),
    }
}

pub fn read_observations(path: &Path, layout: Option<Layout>) -> Result<ObservationSet> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| EmaxError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_observations(&text, layout)
}

/// Writes `data` in the given layout.
pub fn write_observations(data: &ObservationSet, layout: Layout) -> String {
    let mut out = columns(layout).join(",");
    out.push('\n');
    let rows = match layout {
        Layout::Subject => data.to_subjects(),
        Layout::Aggregated => data.to_aggregated(),
    };
    for u in rows.units() {
        match layout {
            Layout::Subject => out.push_str(&format!("{},{}\n", u.dose, u.events)),
            Layout::Aggregated => out.push_str(&format!("{},{},{}\n", u.dose, u.n, u.events)),
        }
    }
    out
}
