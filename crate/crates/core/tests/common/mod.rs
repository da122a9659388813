//! Shared fixtures and independent reference implementations for the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::{Path, PathBuf};

use cup::amr::{AmrEdge, AmrNode, DocumentGraph};
use cup::dataset::{attach_coref, attach_penman_dir, load_rams, load_wikievents, DocumentRecord};
use cup::prompts::{PromptTemplate, Segment, TemplateStore};
use rand::Rng;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

/// The RAMS-style fixture documents with coreference chains and sentence graphs.
pub fn rams_docs() -> Vec<DocumentRecord> {
    let mut docs = load_rams(&fixture("rams.jsonl")).unwrap();
    attach_coref(&mut docs, &fixture("rams_coref.jsonl")).unwrap();
    attach_penman_dir(&mut docs, &fixture("amr")).unwrap();
    docs
}

pub fn wiki_docs() -> Vec<DocumentRecord> {
    load_wikievents(&fixture("wikievents.jsonl")).unwrap()
}

pub fn templates() -> TemplateStore {
    TemplateStore::load(&fixture("templates.jsonl")).unwrap()
}

/// Literals as the parser searches for them: inner whitespace collapsed, one space kept at
/// each edge that had whitespace.
pub fn literal_needles(t: &PromptTemplate) -> Vec<String> {
    t.segments()
        .iter()
        .filter_map(|s| match s {
            Segment::Literal(l) => {
                let core = l.split_whitespace().collect::<Vec<_>>().join(" ");
                let lead = if l.starts_with(' ') { " " } else { "" };
                let trail = if l.ends_with(' ') { " " } else { "" };
                Some(format!("{}{}{}", lead, core, trail))
            }
            Segment::Slot(_) => None,
        })
        .collect()
}

pub fn node_id(i: usize) -> String {
    format!("n{:02}", i)
}

/// Plain description of a random graph so failing cases print readably.
#[derive(Debug, Clone)]
pub struct RandomGraph {
    pub concepts: Vec<&'static str>,
    pub edges: Vec<(usize, &'static str, usize)>,
}

const CONCEPTS: [&str; 3] = ["a", "b", "c"];
const LABELS: [&str; 4] = [":ARG0", ":ARG1", ":mod", ":coref"];

impl RandomGraph {
    /// Small vocabularies on purpose so equal-length paths tie often.
    pub fn sample<R: Rng>(rng: &mut R, max_nodes: usize, density: f64) -> RandomGraph {
        let n = rng.gen_range(1..=max_nodes);
        let concepts = (0..n).map(|_| CONCEPTS[rng.gen_range(0..CONCEPTS.len())]).collect();
        let mut edges = Vec::new();
        for a in 0..n {
            for b in 0..n {
                if a != b && rng.gen_bool(density / 2.0) {
                    edges.push((a, LABELS[rng.gen_range(0..LABELS.len())], b));
                }
            }
        }
        RandomGraph { concepts, edges }
    }

    pub fn build(&self) -> DocumentGraph {
        let mut g = DocumentGraph::new();
        for (i, c) in self.concepts.iter().enumerate() {
            g.add_node(AmrNode::concept(&node_id(i), c, 0));
        }
        for &(a, l, b) in &self.edges {
            g.add_edge(AmrEdge::new(&node_id(a), l, &node_id(b))).unwrap();
        }
        g
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }
}

pub fn invert(label: &str) -> String {
    if label == ":coref" {
        label.to_string()
    } else if let Some(base) = label.strip_suffix("-of") {
        base.to_string()
    } else {
        format!("{}-of", label)
    }
}

/// Undirected adjacency straight from the edge list: node -> (label, neighbour) -> edge indices.
pub fn adjacency(g: &DocumentGraph) -> BTreeMap<String, BTreeMap<(String, String), BTreeSet<usize>>> {
    let mut adj: BTreeMap<String, BTreeMap<(String, String), BTreeSet<usize>>> = BTreeMap::new();
    for n in g.nodes() {
        adj.entry(n.id.clone()).or_default();
    }
    for (i, e) in g.edges().iter().enumerate() {
        if e.src == e.dst {
            continue;
        }
        adj.get_mut(&e.src).unwrap().entry((e.label.clone(), e.dst.clone())).or_default().insert(i);
        adj.get_mut(&e.dst).unwrap().entry((invert(&e.label), e.src.clone())).or_default().insert(i);
    }
    adj
}

/// All-pairs hop distances by Floyd–Warshall.
pub fn floyd_warshall(g: &DocumentGraph) -> BTreeMap<(String, String), usize> {
    let ids: Vec<String> = g.nodes().map(|n| n.id.clone()).collect();
    let n = ids.len();
    let index: BTreeMap<&String, usize> = ids.iter().enumerate().map(|(i, id)| (id, i)).collect();
    let inf = usize::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for e in g.edges() {
        let (a, b) = (index[&e.src], index[&e.dst]);
        if a != b {
            d[a][b] = 1;
            d[b][a] = 1;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    let mut out = BTreeMap::new();
    for i in 0..n {
        for j in 0..n {
            if d[i][j] < inf {
                out.insert((ids[i].clone(), ids[j].clone()), d[i][j]);
            }
        }
    }
    out
}

/// Plain BFS hop distance.
pub fn bfs_distance(g: &DocumentGraph, from: &str, to: &str) -> Option<usize> {
    let adj = adjacency(g);
    let mut dist: BTreeMap<&str, usize> = BTreeMap::from([(from, 0)]);
    let mut q = VecDeque::from([from]);
    while let Some(u) = q.pop_front() {
        if u == to {
            return Some(dist[u]);
        }
        for (_, v) in adj[u].keys() {
            if !dist.contains_key(v.as_str()) {
                dist.insert(v, dist[u] + 1);
                q.push_back(v);
            }
        }
    }
    None
}

/// A path as (nodes, labels).
pub type Path_ = (Vec<String>, Vec<String>);

/// Every simple path of exactly `len` hops, with each parallel label variant listed.
pub fn all_paths_of_length(g: &DocumentGraph, from: &str, to: &str, len: usize) -> Vec<Path_> {
    let adj = adjacency(g);
    let mut out = Vec::new();
    let mut nodes = vec![from.to_string()];
    let mut labels = Vec::new();
    fn rec(
        adj: &BTreeMap<String, BTreeMap<(String, String), BTreeSet<usize>>>,
        to: &str,
        len: usize,
        nodes: &mut Vec<String>,
        labels: &mut Vec<String>,
        out: &mut Vec<Path_>,
    ) {
        let u = nodes.last().unwrap().clone();
        if labels.len() == len {
            if u == to {
                out.push((nodes.clone(), labels.clone()));
            }
            return;
        }
        for (label, v) in adj[&u].keys() {
            if nodes.contains(v) {
                continue;
            }
            nodes.push(v.clone());
            labels.push(label.clone());
            rec(adj, to, len, nodes, labels, out);
            nodes.pop();
            labels.pop();
        }
    }
    rec(&adj, to, len, &mut nodes, &mut labels, &mut out);
    out
}

/// The expected choice among equally short paths: smallest (label, concept) sequence,
/// then smallest node ids read backwards from the target.
pub fn preferred_path(g: &DocumentGraph, from: &str, to: &str) -> Option<Path_> {
    let len = bfs_distance(g, from, to)?;
    all_paths_of_length(g, from, to, len).into_iter().min_by_key(|(nodes, labels)| {
        let key: Vec<(String, String)> =
            labels.iter().zip(&nodes[1..]).map(|(l, n)| (l.clone(), g.node(n).unwrap().concept.clone())).collect();
        let back: Vec<String> = nodes.iter().rev().skip(1).cloned().collect();
        (key, back)
    })
}

/// Fewest edges of any connected subgraph holding all terminals, by enumerating node subsets.
pub fn steiner_optimum(g: &DocumentGraph, terminals: &[&str]) -> Option<usize> {
    let ids: Vec<String> = g.nodes().map(|n| n.id.clone()).collect();
    let adj = adjacency(g);
    let n = ids.len();
    let mut best: Option<usize> = None;
    for mask in 0u32..(1 << n) {
        let subset: BTreeSet<&String> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| &ids[i]).collect();
        if !terminals.iter().all(|t| subset.iter().any(|s| s.as_str() == *t)) {
            continue;
        }
        let start = subset.iter().next().unwrap();
        let mut seen: BTreeSet<&String> = BTreeSet::from([*start]);
        let mut stack = vec![*start];
        while let Some(u) = stack.pop() {
            for (_, v) in adj[u].keys() {
                if subset.contains(v) && seen.insert(v) {
                    stack.push(v);
                }
            }
        }
        if seen.len() == subset.len() {
            let edges = subset.len() - 1;
            best = Some(best.map_or(edges, |b| b.min(edges)));
        }
    }
    best
}

/// Recursive depth-first rendering written against the raw edge list.
pub fn dfs_oracle(g: &DocumentGraph, root: &str) -> Vec<String> {
    let adj = adjacency(g);
    let mut out = Vec::new();
    let mut visited = BTreeSet::new();
    let mut used = BTreeSet::new();
    fn render(g: &DocumentGraph, id: &str) -> String {
        g.node(id).unwrap().rendering().to_string()
    }
    fn go(
        g: &DocumentGraph,
        adj: &BTreeMap<String, BTreeMap<(String, String), BTreeSet<usize>>>,
        u: &str,
        visited: &mut BTreeSet<String>,
        used: &mut BTreeSet<usize>,
        out: &mut Vec<String>,
    ) {
        out.push(render(g, u));
        visited.insert(u.to_string());
        let mut hops: Vec<(&String, &String, &BTreeSet<usize>)> =
            adj[u].iter().map(|((l, v), es)| (l, v, es)).collect();
        hops.sort_by(|a, b| (a.0, &g.node(a.1).unwrap().concept, a.1).cmp(&(b.0, &g.node(b.1).unwrap().concept, b.1)));
        for (label, v, edges) in hops {
            if edges.iter().any(|e| used.contains(e)) {
                continue;
            }
            used.extend(edges.iter().copied());
            out.push("(".into());
            out.push(label.clone());
            if visited.contains(v) {
                out.push(render(g, v));
            } else {
                go(g, adj, v, visited, used, out);
            }
            out.push(")".into());
        }
    }
    go(g, &adj, root, &mut visited, &mut used, &mut out);
    out
}
