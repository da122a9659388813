//! Sentence and document level AMR graphs.
//!
//! Sentence graphs come from [`parse_penman`], get their multi-token names collapsed by
//! [`merge_entity_nodes`], and are joined into a [`DocumentGraph`] by
//! [`link_by_coreference`]. Token spans at this layer are sentence-local.

mod paths;
mod penman;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{CorefChain, DocumentRecord, Mention, TokenSpan};

pub use paths::{connecting_subgraph, dfs_linearize, dfs_linearize_tagged, shortest_path, GraphPath, LinearToken};
pub use penman::{parse_penman, PenmanError};

pub const COREF: &str = ":coref";

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("node {0} is not in the graph")]
    NodeNotFound(String),
    #[error("nodes {0} and {1} are not connected")]
    Disconnected(String, String),
    #[error("sentence {sentence}: {source}")]
    Penman {
        sentence: usize,
        #[source]
        source: PenmanError,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmrNode {
    pub id: String,
    pub concept: String,
    pub sentence_index: usize,
    /// Sentence-local token span this node is aligned to.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<TokenSpan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surface: Option<String>,
    #[serde(default)]
    pub constant: bool,
}

impl AmrNode {
    pub fn concept(id: &str, concept: &str, sentence_index: usize) -> Self {
        AmrNode {
            id: id.to_string(),
            concept: concept.to_string(),
            sentence_index,
            span: None,
            surface: None,
            constant: false,
        }
    }

    pub fn constant(id: &str, value: &str, sentence_index: usize) -> Self {
        AmrNode { constant: true, ..AmrNode::concept(id, value, sentence_index) }
    }

    /// Surface text when aligned, concept label otherwise.
    pub fn rendering(&self) -> &str {
        self.surface.as_deref().unwrap_or(&self.concept)
    }

    /// Concept without its PropBank sense suffix (`shoot-02` -> `shoot`).
    pub fn lemma(&self) -> &str {
        match self.concept.rsplit_once('-') {
            Some((head, sense))
                if !head.is_empty() && !sense.is_empty() && sense.bytes().all(|b| b.is_ascii_digit()) =>
            {
                head
            }
            _ => &self.concept,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AmrEdge {
    pub src: String,
    pub label: String,
    pub dst: String,
}

impl AmrEdge {
    pub fn new(src: &str, label: &str, dst: &str) -> Self {
        AmrEdge { src: src.to_string(), label: label.to_string(), dst: dst.to_string() }
    }
}

/// Label of an edge read against its direction.
pub fn inverse_label(label: &str) -> String {
    if label == COREF {
        label.to_string()
    } else if let Some(base) = label.strip_suffix("-of") {
        base.to_string()
    } else {
        format!("{}-of", label)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SentenceGraph {
    pub sentence_index: usize,
    pub nodes: Vec<AmrNode>,
    pub edges: Vec<AmrEdge>,
    pub root: Option<String>,
    pub tokens: Vec<String>,
}

impl SentenceGraph {
    pub fn node(&self, id: &str) -> Option<&AmrNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn has_alignments(&self) -> bool {
        self.nodes.iter().any(|n| n.span.is_some())
    }

    /// Recomputes surface strings from spans and tokens; drops spans outside the tokens.
    pub fn refresh_surfaces(&mut self) {
        let tokens = &self.tokens;
        for node in self.nodes.iter_mut() {
            match node.span {
                Some(span) if !tokens.is_empty() && span.end <= tokens.len() && !span.is_empty() => {
                    node.surface = Some(tokens[span.start..span.end].join(" "));
                }
                Some(_) if !tokens.is_empty() => {
                    node.span = None;
                    node.surface = None;
                }
                _ => node.surface = None,
            }
        }
    }

    /// Binds the graph to the sentence's tokens. Without parser alignments, nodes are
    /// aligned by case-insensitive matching of concept lemmas against tokens: exact match
    /// first, then prefix match for lemmas of at least four characters.
    pub fn align_to_tokens(&mut self, tokens: &[String]) {
        self.tokens = tokens.to_vec();
        if !self.has_alignments() {
            let lowered: Vec<String> = tokens.iter().map(|t| t.to_lowercase()).collect();
            for node in self.nodes.iter_mut() {
                if node.concept == "name" || node.concept.is_empty() {
                    continue;
                }
                let lemma = node.lemma().to_lowercase();
                let hit = lowered.iter().position(|t| *t == lemma).or_else(|| {
                    (lemma.chars().count() >= 4).then(|| lowered.iter().position(|t| t.starts_with(&lemma))).flatten()
                });
                node.span = hit.map(|i| TokenSpan::new(i, i + 1));
            }
        }
        self.refresh_surfaces();
    }
}

fn is_operand(label: &str) -> bool {
    label.strip_prefix(":op").map(|n| !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit())).unwrap_or(false)
}

/// Collapses every `name` node and its `:opN` constants into one node.
///
/// The merged node keeps the name node's id, takes the operand strings (in operand
/// order, space-joined) as its concept, and spans the union of the constituent spans.
pub fn merge_entity_nodes(graph: &SentenceGraph) -> SentenceGraph {
    let mut out = graph.clone();
    let by_id: HashMap<&str, &AmrNode> = graph.nodes.iter().map(|n| (n.id.as_str(), n)).collect();
    let mut removed: HashSet<String> = HashSet::new();
    let mut merged: HashMap<String, (String, Option<TokenSpan>)> = HashMap::new();

    for node in graph.nodes.iter().filter(|n| n.concept == "name" && !n.constant) {
        let mut operands: Vec<(usize, &AmrNode)> = graph
            .edges
            .iter()
            .filter(|e| e.src == node.id && is_operand(&e.label))
            .filter_map(|e| {
                let target = by_id.get(e.dst.as_str())?;
                let n: usize = e.label[3..].parse().ok()?;
                target.constant.then_some((n, *target))
            })
            .collect();
        if operands.is_empty() {
            continue;
        }
        operands.sort_by_key(|(n, _)| *n);
        let text = operands.iter().map(|(_, c)| c.concept.as_str()).collect::<Vec<_>>().join(" ");
        let mut span = node.span;
        for (_, c) in &operands {
            if let Some(s) = c.span {
                span = Some(match span {
                    Some(acc) => TokenSpan::new(acc.start.min(s.start), acc.end.max(s.end)),
                    None => s,
                });
            }
            removed.insert(c.id.clone());
        }
        merged.insert(node.id.clone(), (text, span));
    }

    out.nodes.retain(|n| !removed.contains(&n.id));
    for node in out.nodes.iter_mut() {
        if let Some((text, span)) = merged.remove(&node.id) {
            node.concept = text;
            node.span = span;
        }
    }
    out.edges.retain(|e| !removed.contains(&e.src) && !removed.contains(&e.dst) && e.src != e.dst);
    out.refresh_surfaces();
    out
}

/// Merged, coreference-linked graph of a whole document.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DocumentGraph {
    nodes: BTreeMap<String, AmrNode>,
    edges: Vec<AmrEdge>,
    edge_set: HashSet<AmrEdge>,
    incident: HashMap<String, Vec<usize>>,
    pub trigger_node: Option<String>,
    alignment: BTreeMap<(usize, usize), Vec<String>>,
}

/// One undirected hop out of a node: the label as read from that node, the neighbour,
/// and every underlying edge that realizes the hop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub label: String,
    pub neighbor: String,
    pub edges: Vec<usize>,
}

impl DocumentGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, node: AmrNode) {
        if let Some(span) = node.span {
            for t in span.start..span.end {
                let ids = self.alignment.entry((node.sentence_index, t)).or_default();
                if !ids.contains(&node.id) {
                    ids.push(node.id.clone());
                }
            }
        }
        self.nodes.insert(node.id.clone(), node);
    }

    /// Adds an edge unless an identical one exists. Both endpoints must be present.
    pub fn add_edge(&mut self, edge: AmrEdge) -> Result<bool, GraphError> {
        for end in [&edge.src, &edge.dst] {
            if !self.nodes.contains_key(end) {
                return Err(GraphError::NodeNotFound(end.clone()));
            }
        }
        if self.edge_set.contains(&edge) {
            return Ok(false);
        }
        let idx = self.edges.len();
        self.incident.entry(edge.src.clone()).or_default().push(idx);
        if edge.dst != edge.src {
            self.incident.entry(edge.dst.clone()).or_default().push(idx);
        }
        self.edge_set.insert(edge.clone());
        self.edges.push(edge);
        Ok(true)
    }

    pub fn node(&self, id: &str) -> Option<&AmrNode> {
        self.nodes.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.nodes.contains_key(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &AmrNode> {
        self.nodes.values()
    }

    pub fn edges(&self) -> &[AmrEdge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Number of distinct node pairs joined by at least one edge.
    pub fn undirected_edge_count(&self) -> usize {
        self.edges
            .iter()
            .filter(|e| e.src != e.dst)
            .map(|e| if e.src < e.dst { (&e.src, &e.dst) } else { (&e.dst, &e.src) })
            .collect::<BTreeSet<_>>()
            .len()
    }

    pub fn coref_edge_count(&self) -> usize {
        self.edges.iter().filter(|e| e.label == COREF).count()
    }

    /// Undirected hops out of `id`, grouped by (label, neighbour), sorted by label, then
    /// neighbour concept, then neighbour id.
    pub fn steps(&self, id: &str) -> Vec<Step> {
        let mut grouped: BTreeMap<(String, String, String), Vec<usize>> = BTreeMap::new();
        for &idx in self.incident.get(id).map(Vec::as_slice).unwrap_or(&[]) {
            let e = &self.edges[idx];
            let (label, neighbor) =
                if e.src == id { (e.label.clone(), e.dst.clone()) } else { (inverse_label(&e.label), e.src.clone()) };
            if neighbor == id {
                continue;
            }
            let concept = self.nodes[&neighbor].concept.clone();
            grouped.entry((label, concept, neighbor)).or_default().push(idx);
        }
        grouped.into_iter().map(|((label, _, neighbor), edges)| Step { label, neighbor, edges }).collect()
    }

    /// Node ids aligned to a sentence-local token.
    pub fn aligned_at(&self, sentence: usize, token: usize) -> &[String] {
        self.alignment.get(&(sentence, token)).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Subgraph over `ids` keeping the listed edges.
    pub fn restricted(&self, ids: &BTreeSet<String>, edges: &[AmrEdge]) -> DocumentGraph {
        let mut sub = DocumentGraph::new();
        for id in ids {
            if let Some(n) = self.nodes.get(id) {
                sub.add_node(n.clone());
            }
        }
        for e in edges {
            let _ = sub.add_edge(e.clone());
        }
        sub.trigger_node = self.trigger_node.clone().filter(|t| ids.contains(t));
        sub
    }

    pub fn is_connected(&self) -> bool {
        let Some(start) = self.nodes.keys().next() else { return true };
        let mut seen: HashSet<&str> = HashSet::new();
        let mut stack = vec![start.as_str()];
        seen.insert(start);
        while let Some(u) = stack.pop() {
            for &idx in self.incident.get(u).map(Vec::as_slice).unwrap_or(&[]) {
                let e = &self.edges[idx];
                let v = if e.src == u { e.dst.as_str() } else { e.src.as_str() };
                if seen.insert(v) {
                    stack.push(v);
                }
            }
        }
        seen.len() == self.nodes.len()
    }

    /// Structured dump used by the `graph` subcommand.
    pub fn to_dump(&self, doc_id: &str) -> GraphDump {
        GraphDump {
            doc_id: doc_id.to_string(),
            trigger_node: self.trigger_node.clone(),
            nodes: self.nodes.values().cloned().collect(),
            edges: self.edges.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphDump {
    pub doc_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trigger_node: Option<String>,
    pub nodes: Vec<AmrNode>,
    pub edges: Vec<AmrEdge>,
}

/// A coreference mention that could not be tied to any graph node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorefSkip {
    pub chain: usize,
    pub mention: Mention,
}

/// Node whose span overlaps `span` the most; ties prefer the shorter span, then the
/// smaller id. `span` is sentence-local.
pub fn locate_node(graph: &DocumentGraph, sentence_index: usize, span: TokenSpan) -> Option<String> {
    let mut candidates: BTreeSet<&String> = BTreeSet::new();
    for t in span.start..span.end {
        candidates.extend(graph.aligned_at(sentence_index, t));
    }
    candidates
        .into_iter()
        .filter_map(|id| {
            let node = graph.node(id)?;
            let node_span = node.span?;
            let overlap = node_span.overlap(&span);
            (overlap > 0).then_some((std::cmp::Reverse(overlap), node_span.len(), id.clone()))
        })
        .min()
        .map(|(_, _, id)| id)
}

/// Joins sentence graphs and adds a symmetric `:coref` edge pair between every two
/// aligned mentions of a chain that sit in different sentences. Chain mentions use
/// sentence-local spans.
pub fn link_by_coreference(graphs: &[SentenceGraph], chains: &[CorefChain]) -> (DocumentGraph, Vec<CorefSkip>) {
    let mut doc = DocumentGraph::new();
    for g in graphs {
        for n in &g.nodes {
            doc.add_node(n.clone());
        }
    }
    for g in graphs {
        for e in &g.edges {
            doc.add_edge(e.clone()).expect("sentence graph edges reference their own nodes");
        }
    }
    let mut skips = Vec::new();
    for (c, chain) in chains.iter().enumerate() {
        let mut located: Vec<(usize, String)> = Vec::new();
        for m in &chain.mentions {
            match locate_node(&doc, m.sentence, m.span) {
                Some(id) => located.push((m.sentence, id)),
                None => skips.push(CorefSkip { chain: c, mention: m.clone() }),
            }
        }
        for i in 0..located.len() {
            for j in i + 1..located.len() {
                let (si, a) = &located[i];
                let (sj, b) = &located[j];
                if si == sj || a == b {
                    continue;
                }
                doc.add_edge(AmrEdge::new(a, COREF, b)).expect("located nodes exist");
                doc.add_edge(AmrEdge::new(b, COREF, a)).expect("located nodes exist");
            }
        }
    }
    (doc, skips)
}

/// Diagnostics gathered while building a document graph.
#[derive(Debug, Clone, Default, Serialize)]
pub struct GraphDiagnostics {
    pub coref_skips: Vec<CorefSkip>,
    pub empty_sentences: Vec<usize>,
}

/// Parses, aligns and merges every sentence graph of `doc`, then links them by the
/// document's coreference chains.
pub fn build_document_graph(doc: &DocumentRecord) -> Result<(DocumentGraph, GraphDiagnostics), GraphError> {
    let mut graphs = Vec::with_capacity(doc.sentences.len());
    let mut diagnostics = GraphDiagnostics::default();
    for (i, text) in doc.penman_by_sentence.iter().enumerate() {
        let mut g = parse_penman(text, i).map_err(|source| GraphError::Penman { sentence: i, source })?;
        if g.is_empty() {
            diagnostics.empty_sentences.push(i);
        }
        g.align_to_tokens(&doc.sentences[i].tokens);
        graphs.push(merge_entity_nodes(&g));
    }
    let chains: Vec<CorefChain> = doc
        .coref_chains
        .iter()
        .map(|c| CorefChain {
            mentions: c
                .mentions
                .iter()
                .map(|m| Mention { sentence: m.sentence, span: m.span.shift_left(doc.sentences[m.sentence].offset) })
                .collect(),
        })
        .collect();
    let (graph, skips) = link_by_coreference(&graphs, &chains);
    diagnostics.coref_skips = skips;
    Ok((graph, diagnostics))
}
