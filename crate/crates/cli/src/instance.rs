//! Line-based instance files and 3-Partition input files.
//!
//! Instance lines are `arrival <time> <length>`, `error <time> [pre|post]`
//! and a single `horizon <time>`. Packet ids follow line order.

use std::fmt::Write;

use linksched_core::{ErrorEvent, OfflineInstance, Packet, Slot};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("line {line}: {detail}")]
    Line { line: usize, detail: String },
    #[error("missing {0} line")]
    Missing(&'static str),
    #[error("{0}")]
    Invalid(String),
}

fn line_err(line: usize, detail: impl Into<String>) -> FormatError {
    FormatError::Line { line, detail: detail.into() }
}

fn number(line: usize, s: Option<&str>, what: &str) -> Result<u64, FormatError> {
    let s = s.ok_or_else(|| line_err(line, format!("missing {what}")))?;
    s.parse().map_err(|_| line_err(line, format!("bad {what} {s:?}")))
}

fn content(raw: &str) -> &str {
    raw.split('#').next().unwrap_or("").trim()
}

pub fn parse_instance(text: &str) -> Result<OfflineInstance, FormatError> {
    let mut packets = Vec::new();
    let mut errors = Vec::new();
    let mut horizon = None;
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let mut words = content(raw).split_whitespace();
        let Some(kind) = words.next() else { continue };
        match kind {
            "arrival" => {
                let at = number(n, words.next(), "arrival time")?;
                let len = number(n, words.next(), "length")?;
                packets.push(Packet::new(packets.len() as u64, len, at));
            }
            "error" => {
                let t = number(n, words.next(), "error time")?;
                let e = match words.next() {
                    None | Some("pre") => ErrorEvent::pre(t),
                    Some("post") => ErrorEvent::post(t),
                    Some(other) => return Err(line_err(n, format!("bad error slot {other:?}"))),
                };
                errors.push(e);
            }
            "horizon" => {
                if horizon.is_some() {
                    return Err(line_err(n, "duplicate horizon"));
                }
                horizon = Some(number(n, words.next(), "horizon")?);
            }
            other => return Err(line_err(n, format!("unknown directive {other:?}"))),
        }
        if let Some(extra) = words.next() {
            return Err(line_err(n, format!("unexpected {extra:?}")));
        }
    }
    let horizon = horizon.ok_or(FormatError::Missing("horizon"))?;
    OfflineInstance::new(packets, errors, horizon).map_err(|e| FormatError::Invalid(e.to_string()))
}

pub fn render_instance(instance: &OfflineInstance) -> String {
    let mut out = String::new();
    for p in &instance.packets {
        writeln!(out, "arrival {} {}", p.arrival_time, p.length).unwrap();
    }
    for e in &instance.errors {
        let slot = match e.slot {
            Slot::PreSchedule => "pre",
            Slot::PostSchedule => "post",
        };
        writeln!(out, "error {} {slot}", e.time).unwrap();
    }
    writeln!(out, "horizon {}", instance.horizon).unwrap();
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionInput {
    pub elements: Vec<u64>,
    pub bound: u64,
    pub count: usize,
}

/// Lines `bound <B>`, `count <m>` and `elements <a1> <a2> ...`.
pub fn parse_partition(text: &str) -> Result<PartitionInput, FormatError> {
    let (mut bound, mut count, mut elements) = (None, None, None);
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let mut words = content(raw).split_whitespace();
        let Some(kind) = words.next() else { continue };
        let slot_taken = match kind {
            "bound" => bound.replace(number(n, words.next(), "bound")?).is_some(),
            "count" => count.replace(number(n, words.next(), "count")? as usize).is_some(),
            "elements" => {
                let xs = words.by_ref().map(|w| number(n, Some(w), "element")).collect::<Result<Vec<_>, _>>()?;
                elements.replace(xs).is_some()
            }
            other => return Err(line_err(n, format!("unknown directive {other:?}"))),
        };
        if slot_taken {
            return Err(line_err(n, format!("duplicate {kind}")));
        }
        if let Some(extra) = words.next() {
            return Err(line_err(n, format!("unexpected {extra:?}")));
        }
    }
    Ok(PartitionInput {
        elements: elements.ok_or(FormatError::Missing("elements"))?,
        bound: bound.ok_or(FormatError::Missing("bound"))?,
        count: count.ok_or(FormatError::Missing("count"))?,
    })
}
