//! JSON Lines query records with keys `text`, `pos`, `concept` and
//! `concept_transition`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ctinfer_core::corpus::{format_transition_field, parse_concept_field, parse_transition_field, split_tokens, RawQuery};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    text: String,
    pos: String,
    concept: String,
    concept_transition: String,
}

/// Parses one JSON object into a query.
pub fn parse_record(line: &str) -> Result<RawQuery> {
    let r: Record = serde_json::from_str(line)?;
    let transitions = parse_transition_field(&r.concept_transition)?;
    Ok(RawQuery::new(
        split_tokens(&r.text),
        split_tokens(&r.pos),
        parse_concept_field(&r.concept),
        transitions,
    )?)
}

pub fn serialize_record(q: &RawQuery) -> String {
    let r = Record {
        text: q.words.join(" "),
        pos: q.pos.join(" "),
        concept: q.concepts.join("|"),
        concept_transition: format_transition_field(&q.transitions),
    };
    serde_json::to_string(&r).expect("record serialization is infallible")
}

/// Reads a JSONL file, skipping blank lines.
pub fn read_records(path: &Path) -> Result<Vec<RawQuery>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let q = parse_record(&line).map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
        out.push(q);
    }
    Ok(out)
}

pub fn write_records(path: &Path, records: &[RawQuery]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for q in records {
        writeln!(w, "{}", serialize_record(q)).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_record() {
        let q = parse_record(
            r#"{"text":"w1 w2","pos":"n v","concept":"disease","concept_transition":"disease -> surgery"}"#,
        )
        .unwrap();
        assert_eq!(q.words, ["w1", "w2"]);
        assert_eq!(q.concepts, ["disease"]);
        assert_eq!(q.transitions, [("disease".to_string(), "surgery".to_string())]);
    }

    #[test]
    fn chain_expands_to_pairs() {
        let q = parse_record(
            r#"{"text":"a","pos":"n","concept":"disease|surgery|recover","concept_transition":"disease -> surgery -> recover"}"#,
        )
        .unwrap();
        assert_eq!(
            q.transitions,
            [("disease".into(), "surgery".into()), ("surgery".into(), "recover".into())]
        );
    }

    #[test]
    fn rejects_bad_records() {
        assert!(parse_record(r#"{"text":"a b c","pos":"n v","concept":"","concept_transition":""}"#).is_err());
        assert!(parse_record(r#"{"text":"a","pos":"n","concept":""}"#).is_err());
        assert!(parse_record(r#"{"text":"a","pos":"n","concept":"","concept_transition":"x ->"}"#).is_err());
        assert!(parse_record(r#"{"text":"a","pos":"n","concept":"","concept_transition":"","extra":1}"#).is_err());
    }

    fn name() -> impl Strategy<Value = String> {
        "[a-z][a-z0-9_]{0,6}"
    }

    proptest! {
        #[test]
        fn parse_inverts_serialize(
            tokens in prop::collection::vec((name(), name()), 1..8),
            concepts in prop::collection::vec(name(), 0..4),
            transitions in prop::collection::vec((name(), name()), 0..4),
        ) {
            let (words, pos) = tokens.into_iter().unzip();
            let q = RawQuery::new(words, pos, concepts, transitions).unwrap();
            prop_assert_eq!(parse_record(&serialize_record(&q)).unwrap(), q);
        }
    }
}
