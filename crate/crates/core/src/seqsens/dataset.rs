//! Dataset loading: JSON lines or whitespace-tokenized plain text.

use std::io::BufRead;

use serde::Deserialize;
use serde_json::Value;

use super::{Sequence, Vocabulary};
use crate::error::{Error, Result};

/// One dataset input.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub id: String,
    pub sequence: Sequence,
    pub label: Option<Value>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Line {
    id: String,
    tokens: Vec<String>,
    #[serde(default)]
    label: Option<Value>,
}

fn parse_error(source_name: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        source_name: source_name.to_string(),
        line,
        message: message.into(),
    }
}

/// Reads `{"id": ..., "tokens": [...], "label": ...}` objects, one per line.
/// Blank lines are skipped; ids must be unique.
pub fn read_jsonl<R: BufRead>(reader: R, source_name: &str, vocab: &Vocabulary) -> Result<Vec<Example>> {
    let mut out = Vec::new();
    let mut ids = std::collections::HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Line = serde_json::from_str(&line).map_err(|e| parse_error(source_name, i + 1, e.to_string()))?;
        if parsed.tokens.is_empty() {
            return Err(parse_error(source_name, i + 1, "tokens must be nonempty"));
        }
        if !ids.insert(parsed.id.clone()) {
            return Err(parse_error(source_name, i + 1, format!("duplicate id {:?}", parsed.id)));
        }
        out.push(Example {
            id: parsed.id,
            sequence: vocab.encode(&parsed.tokens)?,
            label: parsed.label,
        });
    }
    Ok(out)
}

/// One sentence per nonblank line, ids `"1"`, `"2"`, ... by line number.
pub fn read_text<R: BufRead>(reader: R, vocab: &Vocabulary) -> Result<Vec<Example>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        out.push(Example {
            id: (i + 1).to_string(),
            sequence: vocab.encode(&tokens)?,
            label: None,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round() {
        let v = Vocabulary::new();
        let src = "{\"id\":\"a\",\"tokens\":[\"x\",\"y\"],\"label\":1}\n\n{\"id\":\"b\",\"tokens\":[\"y\"]}\n";
        let ex = read_jsonl(src.as_bytes(), "d.jsonl", &v).unwrap();
        assert_eq!(ex.len(), 2);
        assert_eq!(ex[0].label, Some(Value::from(1)));
        assert_eq!(ex[1].sequence.ids(), &[v.id("y").unwrap()]);
    }

    #[test]
    fn jsonl_errors_carry_line_numbers() {
        let v = Vocabulary::new();
        let src = "{\"id\":\"a\",\"tokens\":[\"x\"]}\n{\"id\":\"b\",\"tokens\":[\"x\"\n";
        let err = read_jsonl(src.as_bytes(), "d.jsonl", &v).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        assert!(err.to_string().starts_with("d.jsonl:2:"));
        let dup = "{\"id\":\"a\",\"tokens\":[\"x\"]}\n{\"id\":\"a\",\"tokens\":[\"x\"]}\n";
        assert!(matches!(read_jsonl(dup.as_bytes(), "d", &v), Err(Error::Parse { line: 2, .. })));
        let empty = "{\"id\":\"a\",\"tokens\":[]}\n";
        assert!(matches!(read_jsonl(empty.as_bytes(), "d", &v), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn text_lines() {
        let v = Vocabulary::new();
        let ex = read_text("the cat\n\n  sat  down \n".as_bytes(), &v).unwrap();
        assert_eq!(ex.len(), 2);
        assert_eq!(ex[1].id, "3");
        assert_eq!(v.decode(&ex[1].sequence), vec!["sat", "down"]);
    }
}
