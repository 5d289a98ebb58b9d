//! Line-oriented hazard registry format.
//!
//! ```text
//! # comment
//! [record]
//! id = H-HARA-1
//! kind = HARA
//! action = Hands off activation
//! hazard = Unintended activation
//! situation = Erroneous activation in roads close to highway
//! event = Lateral collision with vehicles
//! S = S2
//! E = E2
//! C = C2
//! ```
//!
//! `E` may be omitted for SIRA records. Values run to the end of the line.

use std::fmt::Write as _;

use thiserror::Error;

use super::{Controllability, Exposure, HazardKind, HazardRecord, Severity};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        message: message.into(),
    }
}

#[derive(Default)]
struct Draft {
    header_line: usize,
    id: Option<String>,
    kind: Option<HazardKind>,
    action: Option<String>,
    hazard: Option<String>,
    situation: Option<String>,
    event: Option<String>,
    severity: Option<Severity>,
    exposure: Option<Exposure>,
    controllability: Option<Controllability>,
}

impl Draft {
    fn finish(self) -> Result<HazardRecord, ParseError> {
        let line = self.header_line;
        let missing = |key: &str| err(line, format!("record is missing required key '{key}'"));
        let kind = self.kind.ok_or_else(|| missing("kind"))?;
        if kind == HazardKind::Hara && self.exposure.is_none() {
            return Err(err(line, "HARA record requires an exposure rating 'E'"));
        }
        Ok(HazardRecord {
            id: self.id.ok_or_else(|| missing("id"))?,
            kind,
            action: self.action.unwrap_or_default(),
            hazard: self.hazard.unwrap_or_default(),
            situation: self.situation.unwrap_or_default(),
            hazardous_event: self.event.unwrap_or_default(),
            severity: self.severity.ok_or_else(|| missing("S"))?,
            exposure: self.exposure,
            controllability: self.controllability.ok_or_else(|| missing("C"))?,
        })
    }
}

fn set<T>(slot: &mut Option<T>, value: T, key: &str, line: usize) -> Result<(), ParseError> {
    if slot.is_some() {
        return Err(err(line, format!("duplicate key '{key}'")));
    }
    *slot = Some(value);
    Ok(())
}

pub fn parse_registry(text: &str) -> Result<Vec<HazardRecord>, ParseError> {
    let mut records = Vec::new();
    let mut current: Option<Draft> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if trimmed == "[record]" {
            if let Some(done) = current.take() {
                records.push(done.finish()?);
            }
            current = Some(Draft {
                header_line: line,
                ..Draft::default()
            });
            continue;
        }
        let draft = current
            .as_mut()
            .ok_or_else(|| err(line, "field outside of a [record] block"))?;
        let (key, value) = trimmed
            .split_once('=')
            .ok_or_else(|| err(line, format!("expected 'key = value', got '{trimmed}'")))?;
        let key = key.trim();
        let value = value.trim().to_string();
        let token_err = |e: super::UnknownToken| err(line, e.to_string());
        match key {
            "id" => {
                if value.is_empty() {
                    return Err(err(line, "empty id"));
                }
                set(&mut draft.id, value, key, line)?
            }
            "kind" => set(
                &mut draft.kind,
                value.parse().map_err(token_err)?,
                key,
                line,
            )?,
            "action" => set(&mut draft.action, value, key, line)?,
            "hazard" => set(&mut draft.hazard, value, key, line)?,
            "situation" => set(&mut draft.situation, value, key, line)?,
            "event" => set(&mut draft.event, value, key, line)?,
            "S" => set(
                &mut draft.severity,
                value.parse().map_err(token_err)?,
                key,
                line,
            )?,
            "E" => set(
                &mut draft.exposure,
                value.parse().map_err(token_err)?,
                key,
                line,
            )?,
            "C" => set(
                &mut draft.controllability,
                value.parse().map_err(token_err)?,
                key,
                line,
            )?,
            other => return Err(err(line, format!("unknown key '{other}'"))),
        }
    }
    if let Some(done) = current.take() {
        records.push(done.finish()?);
    }
    Ok(records)
}

pub fn write_registry(records: &[HazardRecord]) -> String {
    let mut out = String::new();
    for (i, r) in records.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "[record]");
        let _ = writeln!(out, "id = {}", r.id);
        let _ = writeln!(out, "kind = {}", r.kind);
        for (key, value) in [
            ("action", &r.action),
            ("hazard", &r.hazard),
            ("situation", &r.situation),
            ("event", &r.hazardous_event),
        ] {
            if !value.is_empty() {
                let _ = writeln!(out, "{key} = {value}");
            }
        }
        let _ = writeln!(out, "S = {}", r.severity);
        if let Some(e) = r.exposure {
            let _ = writeln!(out, "E = {e}");
        }
        let _ = writeln!(out, "C = {}", r.controllability);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# two records
[record]
id = H1
kind = HARA
action = Hands off activation
S = S2
E = E2
C = C2

[record]
id = H2
kind = SIRA
event = Lane departure
S = S2
C = C2
";

    #[test]
    fn parses_and_round_trips() {
        let recs = parse_registry(SAMPLE).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].exposure, Some(Exposure::E2));
        assert_eq!(recs[1].exposure, None);
        assert_eq!(recs[1].hazardous_event, "Lane departure");
        assert_eq!(parse_registry(&write_registry(&recs)).unwrap(), recs);
    }

    #[test]
    fn rejects_bad_tokens_with_line() {
        let bad = SAMPLE.replace("E = E2", "E = E5");
        let e = parse_registry(&bad).unwrap_err();
        assert_eq!(e.line, 7);
        assert!(e.message.contains("E5"), "{e}");

        let bad = SAMPLE.replace("S = S2\nC = C2\n", "S = S9\nC = C2\n");
        assert_eq!(parse_registry(&bad).unwrap_err().line, 14);

        let bad = SAMPLE.replace("C = C2\n\n", "C = Cx\n\n");
        assert_eq!(parse_registry(&bad).unwrap_err().line, 8);
    }

    #[test]
    fn structural_errors() {
        assert_eq!(parse_registry("id = x\n").unwrap_err().line, 1);
        let e = parse_registry("[record]\nid = x\nkind = HARA\nS = S1\nC = C1\n").unwrap_err();
        assert_eq!(e.line, 1);
        let e = parse_registry("[record]\nid = x\nid = y\n").unwrap_err();
        assert_eq!(e.line, 3);
        let e = parse_registry("[record]\nfoo = 1\n").unwrap_err();
        assert!(e.message.contains("unknown key"));
    }
}
