use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use super::{AmrEdge, DocumentGraph, GraphError};

/// Alternating node / label sequence between two nodes. Labels are read in the
/// direction of travel (`:ARG0-of` when an `:ARG0` edge is walked backwards).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphPath {
    pub nodes: Vec<String>,
    pub labels: Vec<String>,
}

impl GraphPath {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn source(&self) -> &str {
        &self.nodes[0]
    }

    pub fn target(&self) -> &str {
        self.nodes.last().expect("paths hold at least one node")
    }
}

fn distances_from(graph: &DocumentGraph, start: &str) -> HashMap<String, usize> {
    let mut dist = HashMap::new();
    dist.insert(start.to_string(), 0);
    let mut queue = VecDeque::from([start.to_string()]);
    while let Some(u) = queue.pop_front() {
        let d = dist[&u];
        for step in graph.steps(&u) {
            if !dist.contains_key(&step.neighbor) {
                dist.insert(step.neighbor.clone(), d + 1);
                queue.push_back(step.neighbor);
            }
        }
    }
    dist
}

/// Fewest-edge undirected path from `from` to `to`.
///
/// Among equally short paths the one whose (label, node concept) sequence is
/// lexicographically smallest wins; remaining ties go to the smaller node ids.
pub fn shortest_path(graph: &DocumentGraph, from: &str, to: &str) -> Option<GraphPath> {
    if !graph.contains(from) || !graph.contains(to) {
        return None;
    }
    let dist = distances_from(graph, to);
    let total = *dist.get(from)?;

    let mut frontier: BTreeSet<String> = BTreeSet::from([from.to_string()]);
    // layers[k] maps each node at hop k+1 to its (parent, label)
    let mut layers: Vec<HashMap<String, (String, String)>> = Vec::with_capacity(total);
    for remaining in (0..total).rev() {
        let mut best: Option<(String, String)> = None;
        let mut layer: HashMap<String, (String, String)> = HashMap::new();
        for u in &frontier {
            for step in graph.steps(u) {
                if dist.get(&step.neighbor) != Some(&remaining) {
                    continue;
                }
                let key = (step.label.clone(), graph.node(&step.neighbor).unwrap().concept.clone());
                match &best {
                    Some(b) if key > *b => continue,
                    Some(b) if key < *b => layer.clear(),
                    _ => {}
                }
                best = Some(key);
                // frontier is visited in id order, so the first parent recorded is the smallest
                layer.entry(step.neighbor).or_insert_with(|| (u.clone(), step.label.clone()));
            }
        }
        frontier = layer.keys().cloned().collect();
        layers.push(layer);
    }

    let mut nodes = vec![to.to_string()];
    let mut labels = Vec::new();
    let mut current = to.to_string();
    for layer in layers.iter().rev() {
        let (p, label) = &layer[&current];
        labels.push(label.clone());
        nodes.push(p.clone());
        current = p.clone();
    }
    nodes.reverse();
    labels.reverse();
    Some(GraphPath { nodes, labels })
}

/// Union of the pairwise shortest paths between the trigger, the centre argument and
/// the target argument. Coincident terminals are allowed.
pub fn connecting_subgraph(
    graph: &DocumentGraph,
    trigger: &str,
    center: &str,
    target: &str,
) -> Result<DocumentGraph, GraphError> {
    let terminals = [trigger, center, target];
    for t in terminals {
        if !graph.contains(t) {
            return Err(GraphError::NodeNotFound(t.to_string()));
        }
    }
    let mut ids: BTreeSet<String> = terminals.iter().map(|t| t.to_string()).collect();
    let mut edges: Vec<AmrEdge> = Vec::new();
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let (a, b) = (terminals[i], terminals[j]);
        if a == b {
            continue;
        }
        let path = shortest_path(graph, a, b).ok_or_else(|| GraphError::Disconnected(a.to_string(), b.to_string()))?;
        ids.extend(path.nodes.iter().cloned());
        for k in 0..path.len() {
            let (u, v, label) = (&path.nodes[k], &path.nodes[k + 1], &path.labels[k]);
            let step = graph
                .steps(u)
                .into_iter()
                .find(|s| &s.neighbor == v && &s.label == label)
                .expect("path hops follow graph steps");
            edges.extend(step.edges.iter().map(|&e| graph.edges()[e].clone()));
        }
    }
    Ok(graph.restricted(&ids, &edges))
}

/// One element of a linearized graph; `node` is set for node renderings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearToken {
    pub text: String,
    pub node: Option<String>,
}

impl LinearToken {
    fn punct(text: &str) -> Self {
        LinearToken { text: text.to_string(), node: None }
    }
}

/// Depth-first linearization from `root`.
///
/// Each node is rendered by its surface text (or concept when unaligned); every hop to
/// a child contributes `(`, the hop label, the child's subtree and `)`. Hops are taken
/// in (label, child concept, child id) order over the undirected view, with labels
/// inverted when walked against the edge. A node reached a second time is emitted by
/// its rendering alone.
pub fn dfs_linearize_tagged(graph: &DocumentGraph, root: &str) -> Result<Vec<LinearToken>, GraphError> {
    if !graph.contains(root) {
        return Err(GraphError::NodeNotFound(root.to_string()));
    }
    let mut out = Vec::new();
    let mut visited = HashSet::new();
    let mut used = HashSet::new();
    visit(graph, root, &mut visited, &mut used, &mut out);
    Ok(out)
}

fn render(graph: &DocumentGraph, id: &str) -> LinearToken {
    LinearToken { text: graph.node(id).unwrap().rendering().to_string(), node: Some(id.to_string()) }
}

fn visit(
    graph: &DocumentGraph,
    u: &str,
    visited: &mut HashSet<String>,
    used: &mut HashSet<usize>,
    out: &mut Vec<LinearToken>,
) {
    out.push(render(graph, u));
    visited.insert(u.to_string());
    for step in graph.steps(u) {
        if step.edges.iter().any(|e| used.contains(e)) {
            continue;
        }
        used.extend(step.edges.iter().copied());
        out.push(LinearToken::punct("("));
        out.push(LinearToken::punct(&step.label));
        if visited.contains(&step.neighbor) {
            out.push(render(graph, &step.neighbor));
        } else {
            visit(graph, &step.neighbor, visited, used, out);
        }
        out.push(LinearToken::punct(")"));
    }
}

pub fn dfs_linearize(graph: &DocumentGraph, root: &str) -> Result<Vec<String>, GraphError> {
    Ok(dfs_linearize_tagged(graph, root)?.into_iter().map(|t| t.text).collect())
}
