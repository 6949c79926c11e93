//! Graph definition files.
//!
//! ```text
//! # comments start with '#'
//! [concepts]
//! Symptom
//! Disease
//!
//! [transitions]
//! Symptom -> Disease
//! ```

use std::fmt::Write as _;
use std::path::Path;

use ctinfer_core::ConceptGraph;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedGraph {
    pub graph: ConceptGraph,
    pub warnings: Vec<String>,
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Concepts,
    Transitions,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

/// Parses a graph document. Ids follow declaration order. Self-loops are
/// accepted and reported in `warnings`.
pub fn parse_graph_file(text: &str) -> Result<ParsedGraph> {
    let mut section = Section::None;
    let mut names: Vec<String> = Vec::new();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut warnings = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match line.to_ascii_lowercase().as_str() {
            "[concepts]" => {
                section = Section::Concepts;
                continue;
            }
            "[transitions]" => {
                section = Section::Transitions;
                continue;
            }
            s if s.starts_with('[') => return Err(parse_err(line_no, format!("unknown section `{line}`"))),
            _ => {}
        }
        match section {
            Section::None => return Err(parse_err(line_no, "content before any section header")),
            Section::Concepts => {
                if names.iter().any(|n| n == line) {
                    return Err(parse_err(line_no, format!("duplicate concept `{line}`")));
                }
                names.push(line.to_string());
            }
            Section::Transitions => {
                let (s, t) = line
                    .split_once("->")
                    .ok_or_else(|| parse_err(line_no, format!("expected `Source -> Target`, got `{line}`")))?;
                let lookup = |n: &str| {
                    names
                        .iter()
                        .position(|c| c == n.trim())
                        .ok_or_else(|| parse_err(line_no, format!("unknown concept `{}`", n.trim())))
                };
                let edge = (lookup(s)?, lookup(t)?);
                if edges.contains(&edge) {
                    return Err(parse_err(line_no, format!("duplicate transition `{line}`")));
                }
                if edge.0 == edge.1 {
                    warnings.push(format!("line {line_no}: self-loop on `{}`", names[edge.0]));
                }
                edges.push(edge);
            }
        }
    }
    let graph = ConceptGraph::new(&names, &edges)?;
    Ok(ParsedGraph { graph, warnings })
}

pub fn read_graph_file(path: &Path) -> Result<ParsedGraph> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_graph_file(&text)
}

pub fn format_graph_file(graph: &ConceptGraph) -> String {
    let mut out = String::from("[concepts]\n");
    for c in graph.concepts() {
        let _ = writeln!(out, "{}", c.name);
    }
    out.push_str("\n[transitions]\n");
    for t in graph.transitions() {
        let _ = writeln!(out, "{}", graph.transition_name(t.id));
    }
    out
}
