use std::collections::HashMap;

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::hydraulics::HeadlossFormula;

/// One whitespace-separated record with its 1-based source line.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub line: usize,
    pub fields: Vec<String>,
}

/// Records of an `.inp` file grouped by section, before unit conversion.
#[derive(Debug, Clone, PartialEq)]
pub struct RawNetworkDescription {
    /// Upper-case section name to records, in file order. Unknown sections are kept.
    pub sections: IndexMap<String, Vec<Record>>,
    /// Flow-unit token from `[OPTIONS] UNITS` (default `GPM`).
    pub source_units: String,
    pub headloss_formula: HeadlossFormula,
}

impl RawNetworkDescription {
    pub fn section(&self, name: &str) -> &[Record] {
        self.sections.get(name).map_or(&[], Vec::as_slice)
    }

    pub fn node_count(&self) -> usize {
        ["JUNCTIONS", "RESERVOIRS", "TANKS"]
            .iter()
            .map(|s| self.section(s).len())
            .sum()
    }

    pub fn link_count(&self) -> usize {
        ["PIPES", "PUMPS", "VALVES"]
            .iter()
            .map(|s| self.section(s).len())
            .sum()
    }
}

/// Minimum and maximum field counts of the supported sections.
fn field_range(section: &str) -> Option<(usize, usize)> {
    Some(match section {
        "JUNCTIONS" => (2, 4),
        "RESERVOIRS" => (2, 3),
        "TANKS" => (6, 8),
        "PIPES" => (6, 8),
        "PUMPS" => (3, 9),
        "VALVES" => (6, 7),
        "DEMANDS" => (2, 4),
        "STATUS" => (2, 2),
        "CURVES" => (3, 3),
        "PATTERNS" => (2, usize::MAX),
        "COORDINATES" => (3, 3),
        "OPTIONS" => (2, 4),
        _ => return None,
    })
}

fn malformed(line: usize, section: &str, reason: impl Into<String>) -> Error {
    Error::MalformedRecord {
        line,
        section: section.to_string(),
        reason: reason.into(),
    }
}

/// Splits `.inp` text into section records and checks ids and references.
pub fn parse_inp(text: &str) -> Result<RawNetworkDescription> {
    let mut sections: IndexMap<String, Vec<Record>> = IndexMap::new();
    let mut current: Option<String> = None;
    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw_line.split(';').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if body.starts_with('[') {
            let Some(end) = body.find(']') else {
                return Err(malformed(line, "?", "unterminated section header"));
            };
            let name = body[1..end].trim().to_ascii_uppercase();
            sections.entry(name.clone()).or_default();
            current = Some(name);
            continue;
        }
        let Some(section) = current.as_ref() else {
            return Err(malformed(line, "?", "record outside of any section"));
        };
        let fields: Vec<String> = if section == "TITLE" {
            vec![body.to_string()]
        } else {
            body.split_whitespace().map(str::to_string).collect()
        };
        if let Some((lo, hi)) = field_range(section) {
            if fields.len() < lo || fields.len() > hi {
                return Err(malformed(
                    line,
                    section,
                    format!("expected {lo}..={hi} fields, found {}", fields.len()),
                ));
            }
        }
        sections
            .get_mut(section)
            .expect("section registered")
            .push(Record { line, fields });
    }

    let mut units = None;
    let mut headloss = None;
    for rec in sections.get("OPTIONS").map_or(&[][..], Vec::as_slice) {
        let key = rec.fields[0].to_ascii_uppercase();
        let value = || rec.fields.last().cloned().unwrap_or_default();
        match key.as_str() {
            "UNITS" => units = Some(value()),
            "HEADLOSS" => {
                let f: HeadlossFormula = value().parse().map_err(|_| {
                    malformed(
                        rec.line,
                        "OPTIONS",
                        format!("unknown headloss formula '{}'", value()),
                    )
                })?;
                if headloss.is_some_and(|h| h != f) {
                    return Err(malformed(
                        rec.line,
                        "OPTIONS",
                        "conflicting headloss formulas",
                    ));
                }
                headloss = Some(f);
            }
            _ => {}
        }
    }

    let mut nodes: HashMap<&str, usize> = HashMap::new();
    for s in ["JUNCTIONS", "RESERVOIRS", "TANKS"] {
        for rec in sections.get(s).map_or(&[][..], Vec::as_slice) {
            if nodes.insert(&rec.fields[0], rec.line).is_some() {
                return Err(Error::DuplicateId {
                    line: rec.line,
                    id: rec.fields[0].clone(),
                });
            }
        }
    }
    let mut links: HashMap<&str, usize> = HashMap::new();
    for s in ["PIPES", "PUMPS", "VALVES"] {
        for rec in sections.get(s).map_or(&[][..], Vec::as_slice) {
            if links.insert(&rec.fields[0], rec.line).is_some() {
                return Err(Error::DuplicateId {
                    line: rec.line,
                    id: rec.fields[0].clone(),
                });
            }
            for node in &rec.fields[1..3] {
                if !nodes.contains_key(node.as_str()) {
                    return Err(Error::DanglingReference {
                        line: rec.line,
                        link: rec.fields[0].clone(),
                        node: node.clone(),
                    });
                }
            }
        }
    }

    Ok(RawNetworkDescription {
        sections,
        source_units: units.unwrap_or_else(|| "GPM".to_string()),
        headloss_formula: headloss.unwrap_or(HeadlossFormula::HazenWilliams),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[JUNCTIONS]\n J1 10 1 ; a comment\n[RESERVOIRS]\nR1 50\n[PIPES]\nP1 R1 J1 100 200 100\n[OPTIONS]\nUnits LPS\n[END]\n";

    #[test]
    fn minimal_counts() {
        let raw = parse_inp(MINIMAL).unwrap();
        assert_eq!(raw.node_count(), 2);
        assert_eq!(raw.link_count(), 1);
        assert_eq!(raw.source_units, "LPS");
        assert_eq!(raw.headloss_formula, HeadlossFormula::HazenWilliams);
        assert_eq!(raw.section("JUNCTIONS")[0].fields, vec!["J1", "10", "1"]);
        assert_eq!(raw.section("JUNCTIONS")[0].line, 2);
    }

    #[test]
    fn dangling_reference_names_node() {
        let text = MINIMAL.replace("P1 R1 J1", "P1 R1 J9");
        match parse_inp(&text) {
            Err(Error::DanglingReference { node, line, .. }) => {
                assert_eq!(node, "J9");
                assert_eq!(line, 6);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_and_malformed() {
        let dup = MINIMAL.replace("R1 50", "J1 50");
        assert!(matches!(parse_inp(&dup), Err(Error::DuplicateId { .. })));
        let short = MINIMAL.replace("P1 R1 J1 100 200 100", "P1 R1 J1 100");
        assert!(matches!(
            parse_inp(&short),
            Err(Error::MalformedRecord { line: 6, .. })
        ));
    }

    #[test]
    fn unknown_sections_are_kept() {
        let text = format!("{MINIMAL}[RULES]\nRULE 1\n");
        let raw = parse_inp(&text).unwrap();
        assert_eq!(raw.section("RULES").len(), 1);
    }

    #[test]
    fn headers_case_insensitive() {
        let raw = parse_inp(&MINIMAL.replace("[PIPES]", "[pipes]")).unwrap();
        assert_eq!(raw.section("PIPES").len(), 1);
    }
}
