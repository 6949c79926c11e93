//! Domain concept graphs, their transfer matrix, and active subgraphs.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::EncodedQuery;
use crate::{Error, Result, Tensor};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Concept {
    pub id: usize,
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transition {
    pub id: usize,
    pub source: usize,
    pub target: usize,
}

impl Transition {
    pub fn is_self_loop(&self) -> bool {
        self.source == self.target
    }
}

/// `M x N` incidence matrix: entry `(m, n)` is 1 iff concept `m` is the
/// source or target of transition `n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransferMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<u8>,
}

impl TransferMatrix {
    pub fn build(num_concepts: usize, transitions: &[Transition]) -> Self {
        let cols = transitions.len();
        let mut entries = vec![0u8; num_concepts * cols];
        for t in transitions {
            entries[t.source * cols + t.id] = 1;
            entries[t.target * cols + t.id] = 1;
        }
        TransferMatrix { rows: num_concepts, cols, entries }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, concept: usize, transition: usize) -> u8 {
        self.entries[concept * self.cols + transition]
    }

    pub fn entries(&self) -> &[u8] {
        &self.entries
    }

    pub fn to_tensor(&self) -> Tensor {
        let data = self.entries.iter().map(|&e| f64::from(e)).collect();
        Tensor::matrix(self.rows, self.cols, data).expect("consistent dims")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConceptGraph {
    concepts: Vec<Concept>,
    transitions: Vec<Transition>,
    transfer: TransferMatrix,
}

impl ConceptGraph {
    /// Builds a graph from concept names and `(source, target)` id pairs.
    /// Ids are assigned in the given order.
    pub fn new<S: AsRef<str>>(names: &[S], edges: &[(usize, usize)]) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::Graph("no concepts declared".to_string()));
        }
        let mut concepts: Vec<Concept> = Vec::with_capacity(names.len());
        for (id, name) in names.iter().enumerate() {
            let name = name.as_ref().trim();
            if name.is_empty() {
                return Err(Error::Graph(format!("concept {id} has an empty name")));
            }
            if concepts.iter().any(|c| c.name == name) {
                return Err(Error::Graph(format!("duplicate concept `{name}`")));
            }
            concepts.push(Concept { id, name: name.to_string() });
        }
        let m = concepts.len();
        let mut transitions: Vec<Transition> = Vec::with_capacity(edges.len());
        for (id, &(source, target)) in edges.iter().enumerate() {
            for end in [source, target] {
                if end >= m {
                    return Err(Error::OutOfRange { what: "concept", index: end, len: m });
                }
            }
            if transitions.iter().any(|t| t.source == source && t.target == target) {
                return Err(Error::Graph(format!(
                    "duplicate transition {} -> {}",
                    concepts[source].name, concepts[target].name
                )));
            }
            transitions.push(Transition { id, source, target });
        }
        let transfer = TransferMatrix::build(m, &transitions);
        Ok(ConceptGraph { concepts, transitions, transfer })
    }

    /// Like [`ConceptGraph::new`] with edges given by concept name.
    pub fn from_named_edges<S: AsRef<str>>(names: &[S], edges: &[(S, S)]) -> Result<Self> {
        let lookup = |n: &str| {
            names
                .iter()
                .position(|c| c.as_ref().trim() == n.trim())
                .ok_or_else(|| Error::Graph(format!("unknown concept `{}` in edge", n.trim())))
        };
        let ids = edges
            .iter()
            .map(|(s, t)| Ok((lookup(s.as_ref())?, lookup(t.as_ref())?)))
            .collect::<Result<Vec<_>>>()?;
        ConceptGraph::new(names, &ids)
    }

    pub fn num_concepts(&self) -> usize {
        self.concepts.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.transitions.len()
    }

    pub fn concepts(&self) -> &[Concept] {
        &self.concepts
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn transfer(&self) -> &TransferMatrix {
        &self.transfer
    }

    pub fn concept_id(&self, name: &str) -> Option<usize> {
        self.concepts.iter().position(|c| c.name == name)
    }

    /// Case-insensitive lookup, used when resolving annotated records.
    pub fn concept_id_ignore_case(&self, name: &str) -> Option<usize> {
        self.concept_id(name)
            .or_else(|| self.concepts.iter().position(|c| c.name.eq_ignore_ascii_case(name)))
    }

    pub fn transition_id(&self, source: usize, target: usize) -> Option<usize> {
        self.transitions
            .iter()
            .position(|t| t.source == source && t.target == target)
    }

    /// `"Source -> Target"` label for transition `id`.
    pub fn transition_name(&self, id: usize) -> String {
        let t = &self.transitions[id];
        format!("{} -> {}", self.concepts[t.source].name, self.concepts[t.target].name)
    }

    pub fn self_loops(&self) -> impl Iterator<Item = &Transition> {
        self.transitions.iter().filter(|t| t.is_self_loop())
    }

    pub fn active_subgraph(&self, concept_ids: &[usize], transition_ids: &[usize]) -> Result<ActiveConceptGraph> {
        let (m, n) = (self.num_concepts(), self.num_transitions());
        if let Some(&c) = concept_ids.iter().find(|&&c| c >= m) {
            return Err(Error::OutOfRange { what: "concept", index: c, len: m });
        }
        if let Some(&t) = transition_ids.iter().find(|&&t| t >= n) {
            return Err(Error::OutOfRange { what: "transition", index: t, len: n });
        }
        Ok(ActiveConceptGraph::from_ids(concept_ids, transition_ids))
    }

    /// Active graph of a query's ground-truth labels.
    pub fn active_from_labels(&self, concept_labels: &[f64], transition_labels: &[f64]) -> Result<ActiveConceptGraph> {
        let on = |v: &[f64]| v.iter().enumerate().filter(|(_, x)| **x > 0.5).map(|(i, _)| i).collect::<Vec<_>>();
        self.active_subgraph(&on(concept_labels), &on(transition_labels))
    }

    /// Whether the undirected view of the active graph, with transition
    /// endpoints included as nodes, has a single component. The empty
    /// graph counts as connected.
    pub fn is_connected(&self, active: &ActiveConceptGraph) -> bool {
        let mut nodes: Vec<usize> = active.concepts.clone();
        for &t in &active.transitions {
            let tr = self.transitions[t];
            nodes.push(tr.source);
            nodes.push(tr.target);
        }
        nodes.sort_unstable();
        nodes.dedup();
        if nodes.len() <= 1 {
            return true;
        }
        let mut adjacency: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &t in &active.transitions {
            let tr = self.transitions[t];
            adjacency.entry(tr.source).or_default().push(tr.target);
            adjacency.entry(tr.target).or_default().push(tr.source);
        }
        let mut seen = BTreeMap::new();
        let mut stack = vec![nodes[0]];
        seen.insert(nodes[0], ());
        while let Some(u) = stack.pop() {
            for &w in adjacency.get(&u).map(Vec::as_slice).unwrap_or(&[]) {
                if seen.insert(w, ()).is_none() {
                    stack.push(w);
                }
            }
        }
        seen.len() == nodes.len()
    }
}

/// The concepts a query mentions and the transitions it activates.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActiveConceptGraph {
    concepts: Vec<usize>,
    transitions: Vec<usize>,
}

impl ActiveConceptGraph {
    fn from_ids(concept_ids: &[usize], transition_ids: &[usize]) -> Self {
        let mut concepts = concept_ids.to_vec();
        concepts.sort_unstable();
        concepts.dedup();
        let mut transitions = transition_ids.to_vec();
        transitions.sort_unstable();
        transitions.dedup();
        ActiveConceptGraph { concepts, transitions }
    }

    pub fn empty() -> Self {
        ActiveConceptGraph { concepts: Vec::new(), transitions: Vec::new() }
    }

    /// Sorted, deduplicated concept ids.
    pub fn concept_set(&self) -> &[usize] {
        &self.concepts
    }

    /// Sorted, deduplicated transition ids.
    pub fn transition_set(&self) -> &[usize] {
        &self.transitions
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty() && self.transitions.is_empty()
    }

    /// Human-readable form, e.g. `Disease -> Surgery; Surgery -> Recover`.
    pub fn describe(&self, graph: &ConceptGraph) -> String {
        let mut parts: Vec<String> = self.transitions.iter().map(|&t| graph.transition_name(t)).collect();
        let covered: Vec<usize> = self
            .transitions
            .iter()
            .flat_map(|&t| {
                let tr = graph.transitions()[t];
                [tr.source, tr.target]
            })
            .collect();
        for &c in &self.concepts {
            if !covered.contains(&c) {
                parts.push(graph.concepts()[c].name.clone());
            }
        }
        parts.join("; ")
    }
}

/// Mention frequencies over a labelled dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphStats {
    pub queries: usize,
    pub concept_counts: Vec<usize>,
    pub transition_counts: Vec<usize>,
    /// Active-graph shapes by frequency, most frequent first; ties broken by
    /// the shape's id lists.
    pub shapes: Vec<(ActiveConceptGraph, usize)>,
    pub connected: usize,
}

impl GraphStats {
    pub fn connected_fraction(&self) -> f64 {
        if self.queries == 0 {
            1.0
        } else {
            self.connected as f64 / self.queries as f64
        }
    }

    pub fn top_shapes(&self, k: usize) -> &[(ActiveConceptGraph, usize)] {
        &self.shapes[..k.min(self.shapes.len())]
    }
}

pub fn graph_stats(dataset: &[EncodedQuery], graph: &ConceptGraph) -> Result<GraphStats> {
    let mut concept_counts = vec![0usize; graph.num_concepts()];
    let mut transition_counts = vec![0usize; graph.num_transitions()];
    let mut shapes: BTreeMap<ActiveConceptGraph, usize> = BTreeMap::new();
    let mut connected = 0;
    for q in dataset {
        if q.concept_labels.len() != concept_counts.len() || q.transition_labels.len() != transition_counts.len() {
            return Err(Error::Data(format!(
                "query labels ({}, {}) do not match graph ({}, {})",
                q.concept_labels.len(),
                q.transition_labels.len(),
                concept_counts.len(),
                transition_counts.len()
            )));
        }
        let active = graph.active_from_labels(&q.concept_labels, &q.transition_labels)?;
        for &c in active.concept_set() {
            concept_counts[c] += 1;
        }
        for &t in active.transition_set() {
            transition_counts[t] += 1;
        }
        if graph.is_connected(&active) {
            connected += 1;
        }
        *shapes.entry(active).or_insert(0) += 1;
    }
    let mut shapes: Vec<(ActiveConceptGraph, usize)> = shapes.into_iter().collect();
    shapes.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(GraphStats { queries: dataset.len(), concept_counts, transition_counts, shapes, connected })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> ConceptGraph {
        ConceptGraph::from_named_edges(
            &["Symptom", "Disease", "Surgery", "Recover", "Medicine", "Side-Effect"],
            &[
                ("Disease", "Surgery"),
                ("Surgery", "Recover"),
                ("Symptom", "Disease"),
                ("Medicine", "Side-Effect"),
            ],
        )
        .unwrap()
    }

    #[test]
    fn smallest_graph() {
        let g = ConceptGraph::from_named_edges(&["Symptom", "Cause"], &[("Symptom", "Cause")]).unwrap();
        assert_eq!((g.num_concepts(), g.num_transitions()), (2, 1));
        assert_eq!(g.transitions()[0], Transition { id: 0, source: 0, target: 1 });
        assert_eq!(g.transfer().to_tensor().data(), &[1.0, 1.0]);
    }

    #[test]
    fn transfer_two_edges() {
        let g = ConceptGraph::new(&["a", "b", "c"], &[(0, 1), (0, 2)]).unwrap();
        assert_eq!(g.transfer().entries(), &[1, 1, 1, 0, 0, 1]);
    }

    #[test]
    fn self_loop_column_has_one_entry() {
        let g = ConceptGraph::new(&["a", "b"], &[(0, 0), (0, 1)]).unwrap();
        assert_eq!(g.self_loops().count(), 1);
        assert_eq!(g.transfer().entries(), &[1, 1, 0, 1]);
    }

    #[test]
    fn validation_errors() {
        assert!(ConceptGraph::from_named_edges(&["a"], &[("a", "zzz")]).is_err());
        assert!(ConceptGraph::new(&["a", "b"], &[(0, 1), (0, 1)]).is_err());
        assert!(ConceptGraph::new::<&str>(&[], &[]).is_err());
        assert!(ConceptGraph::new(&["a", "a"], &[]).is_err());
        assert!(ConceptGraph::new(&["a", ""], &[]).is_err());
        assert!(ConceptGraph::new(&["a", "b"], &[(0, 2)]).is_err());
    }

    #[test]
    fn active_subgraph_chain_and_bounds() {
        let g = chain();
        let active = g.active_subgraph(&[1, 2, 3], &[0, 1]).unwrap();
        assert_eq!(active.describe(&g), "Disease -> Surgery; Surgery -> Recover");
        assert!(g.is_connected(&active));
        let empty = g.active_subgraph(&[], &[]).unwrap();
        assert!(empty.is_empty() && g.is_connected(&empty));
        assert!(matches!(
            g.active_subgraph(&[], &[4]),
            Err(Error::OutOfRange { what: "transition", index: 4, len: 4 })
        ));
    }

    #[test]
    fn disjoint_edges_disconnected() {
        let g = chain();
        let active = g.active_subgraph(&[], &[2, 3]).unwrap();
        assert!(!g.is_connected(&active));
        // an isolated concept mention also splits the graph
        let active = g.active_subgraph(&[4], &[0]).unwrap();
        assert!(!g.is_connected(&active));
        // endpoints count even when absent from the concept set
        let active = g.active_subgraph(&[2], &[0, 1]).unwrap();
        assert!(g.is_connected(&active));
    }
}
