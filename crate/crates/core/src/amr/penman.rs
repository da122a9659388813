//! PENMAN reader for sentence-level AMR graphs.
//!
//! Accepts the usual parser output: `# ::tok` and `# ::alignments` (JAMR style,
//! `start-end|path+path`) comment lines, and ISI style `~e.N` alignment suffixes on
//! concepts and constants. Alignment paths address a node by child position: `0` is
//! the root, `0.1` its second child. Re-entrant variable references do not occupy a
//! child position; constants do.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use super::{AmrEdge, AmrNode, SentenceGraph};
use crate::dataset::TokenSpan;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("PENMAN parse error at character {position}: {message}")]
pub struct PenmanError {
    pub position: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Open,
    Close,
    Slash,
    Role(String),
    Str(String, Vec<usize>),
    Sym(String, Vec<usize>),
}

fn err(position: usize, message: impl Into<String>) -> PenmanError {
    PenmanError { position, message: message.into() }
}

/// Splits a `~e.3,4` / `~3` alignment suffix off an atom.
fn split_alignment(atom: &str) -> (String, Vec<usize>) {
    match atom.rfind('~') {
        Some(pos) => {
            let marker = &atom[pos + 1..];
            let digits = marker.rsplit('.').next().unwrap_or("");
            let indices: Vec<usize> = digits.split(',').filter_map(|d| d.parse().ok()).collect();
            if indices.is_empty() {
                (atom.to_string(), Vec::new())
            } else {
                (atom[..pos].to_string(), indices)
            }
        }
        None => (atom.to_string(), Vec::new()),
    }
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, PenmanError> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line_start = true;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if c == '\n' {
            line_start = true;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '#' && line_start {
            while i < chars.len() && chars[i].1 != '\n' {
                i += 1;
            }
            continue;
        }
        line_start = false;
        match c {
            '(' => {
                out.push((pos, Tok::Open));
                i += 1;
            }
            ')' => {
                out.push((pos, Tok::Close));
                i += 1;
            }
            '/' => {
                out.push((pos, Tok::Slash));
                i += 1;
            }
            '"' => {
                let mut value = String::new();
                i += 1;
                let mut closed = false;
                while i < chars.len() {
                    let ch = chars[i].1;
                    if ch == '\\' && i + 1 < chars.len() {
                        value.push(chars[i + 1].1);
                        i += 2;
                        continue;
                    }
                    i += 1;
                    if ch == '"' {
                        closed = true;
                        break;
                    }
                    value.push(ch);
                }
                if !closed {
                    return Err(err(pos, "unterminated string"));
                }
                let mut suffix = String::new();
                while i < chars.len() && !is_delim(chars[i].1) {
                    suffix.push(chars[i].1);
                    i += 1;
                }
                let (_, align) = split_alignment(&suffix);
                out.push((pos, Tok::Str(value, align)));
            }
            _ => {
                let mut atom = String::new();
                while i < chars.len() && !is_delim(chars[i].1) {
                    atom.push(chars[i].1);
                    i += 1;
                }
                if let Some(role) = atom.strip_prefix(':') {
                    if role.is_empty() {
                        return Err(err(pos, "empty role"));
                    }
                    out.push((pos, Tok::Role(atom)));
                } else {
                    let (sym, align) = split_alignment(&atom);
                    out.push((pos, Tok::Sym(sym, align)));
                }
            }
        }
    }
    Ok(out)
}

fn is_delim(c: char) -> bool {
    c.is_whitespace() || matches!(c, '(' | ')' | '"' | '/')
}

/// Edge target before variable resolution.
enum Target {
    Node(usize),
    Atom { value: String, quoted: bool, align: Vec<usize>, position: usize },
}

struct RawNode {
    var: String,
    concept: String,
    align: Vec<usize>,
    edges: Vec<(String, Target)>,
}

struct Parser<'a> {
    toks: &'a [(usize, Tok)],
    pos: usize,
    end: usize,
    nodes: Vec<RawNode>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map(|(p, _)| *p).unwrap_or(self.end)
    }

    fn node(&mut self) -> Result<usize, PenmanError> {
        match self.peek() {
            Some(Tok::Open) => self.pos += 1,
            _ => return Err(err(self.here(), "expected `(`")),
        }
        let var = match self.toks.get(self.pos) {
            Some((_, Tok::Sym(v, _))) => {
                self.pos += 1;
                v.clone()
            }
            _ => return Err(err(self.here(), "expected variable")),
        };
        let (concept, align) = if let Some(Tok::Slash) = self.peek() {
            self.pos += 1;
            match self.toks.get(self.pos) {
                Some((_, Tok::Sym(c, a))) | Some((_, Tok::Str(c, a))) => {
                    self.pos += 1;
                    (c.clone(), a.clone())
                }
                _ => return Err(err(self.here(), "expected concept after `/`")),
            }
        } else {
            (String::new(), Vec::new())
        };
        let id = self.nodes.len();
        self.nodes.push(RawNode { var, concept, align, edges: Vec::new() });
        loop {
            match self.toks.get(self.pos) {
                Some((_, Tok::Close)) => {
                    self.pos += 1;
                    return Ok(id);
                }
                Some((role_pos, Tok::Role(role))) => {
                    let role = role.clone();
                    let role_pos = *role_pos;
                    self.pos += 1;
                    let target = match self.toks.get(self.pos) {
                        Some((_, Tok::Open)) => Target::Node(self.node()?),
                        Some((p, Tok::Sym(v, a))) => {
                            self.pos += 1;
                            Target::Atom { value: v.clone(), quoted: false, align: a.clone(), position: *p }
                        }
                        Some((p, Tok::Str(v, a))) => {
                            self.pos += 1;
                            Target::Atom { value: v.clone(), quoted: true, align: a.clone(), position: *p }
                        }
                        _ => return Err(err(role_pos, format!("dangling edge {}", role))),
                    };
                    self.nodes[id].edges.push((role, target));
                }
                None => return Err(err(self.end, "unbalanced parentheses: missing `)`")),
                Some((p, _)) => return Err(err(*p, "unexpected token inside node")),
            }
        }
    }
}

/// Metadata carried in `# ::` comment lines.
#[derive(Debug, Default)]
struct Comments {
    tokens: Option<Vec<String>>,
    alignments: Vec<(TokenSpan, Vec<String>)>,
}

fn read_comments(text: &str) -> Comments {
    let mut comments = Comments::default();
    for line in text.lines() {
        let line = line.trim_start();
        if let Some(rest) = line.strip_prefix("# ::tok") {
            comments.tokens = Some(rest.split_whitespace().map(str::to_string).collect());
        } else if let Some(rest) = line.strip_prefix("# ::alignments") {
            for item in rest.split_whitespace() {
                // trailing `::annotator ...` fields end the alignment list
                if item.starts_with("::") {
                    break;
                }
                let Some((range, paths)) = item.split_once('|') else { continue };
                let Some((s, e)) = range.split_once('-') else { continue };
                let (Ok(s), Ok(e)) = (s.parse::<usize>(), e.parse::<usize>()) else { continue };
                if e > s {
                    comments.alignments.push((TokenSpan::new(s, e), paths.split('+').map(str::to_string).collect()));
                }
            }
        }
    }
    comments
}

fn union(span: Option<TokenSpan>, other: TokenSpan) -> TokenSpan {
    match span {
        Some(s) => TokenSpan::new(s.start.min(other.start), s.end.max(other.end)),
        None => other,
    }
}

fn span_of(indices: &[usize]) -> Option<TokenSpan> {
    let lo = *indices.iter().min()?;
    let hi = *indices.iter().max()?;
    Some(TokenSpan::new(lo, hi + 1))
}

/// Parses one sentence graph. Node ids are prefixed with `s<sentence_index>.` so they
/// stay unique once sentence graphs are joined into a document graph.
pub fn parse_penman(text: &str, sentence_index: usize) -> Result<SentenceGraph, PenmanError> {
    let comments = read_comments(text);
    let toks = lex(text)?;
    let mut graph = SentenceGraph {
        sentence_index,
        nodes: Vec::new(),
        edges: Vec::new(),
        root: None,
        tokens: comments.tokens.clone().unwrap_or_default(),
    };
    if toks.is_empty() {
        return Ok(graph);
    }
    let mut parser = Parser { toks: &toks, pos: 0, end: text.len(), nodes: Vec::new() };
    let root = parser.node()?;
    if let Some((p, _)) = toks.get(parser.pos) {
        return Err(err(*p, "trailing content after graph"));
    }
    let raw = parser.nodes;

    let prefix = format!("s{}.", sentence_index);
    let mut var_index: HashMap<&str, usize> = HashMap::new();
    for (i, n) in raw.iter().enumerate() {
        if var_index.insert(n.var.as_str(), i).is_some() {
            return Err(err(0, format!("variable `{}` defined twice", n.var)));
        }
    }

    // Materialize nodes in pre-order, assigning alignment paths as we go.
    let mut spans: BTreeMap<String, TokenSpan> = BTreeMap::new();
    let mut paths: HashMap<String, String> = HashMap::new();
    let mut constant_count = 0;
    let mut stack = vec![(root, "0".to_string())];
    let mut order = Vec::new();
    while let Some((idx, path)) = stack.pop() {
        let node = &raw[idx];
        let id = format!("{}{}", prefix, node.var);
        order.push((idx, id.clone(), path.clone()));
        paths.insert(path.clone(), id.clone());
        if let Some(s) = span_of(&node.align) {
            spans.insert(id.clone(), s);
        }
        let mut child_pos = 0;
        let mut children = Vec::new();
        for (role, target) in &node.edges {
            match target {
                Target::Node(c) => {
                    children.push((*c, format!("{}.{}", path, child_pos)));
                    child_pos += 1;
                    graph.edges.push(AmrEdge::new(&id, role, &format!("{}{}", prefix, raw[*c].var)));
                }
                Target::Atom { value, quoted, align, position } => {
                    if !quoted && var_index.contains_key(value.as_str()) {
                        graph.edges.push(AmrEdge::new(&id, role, &format!("{}{}", prefix, value)));
                        continue;
                    }
                    if value.is_empty() {
                        return Err(err(*position, "empty constant"));
                    }
                    let cid = format!("{}#{}", prefix, constant_count);
                    constant_count += 1;
                    let cpath = format!("{}.{}", path, child_pos);
                    child_pos += 1;
                    paths.insert(cpath, cid.clone());
                    if let Some(s) = span_of(align) {
                        spans.insert(cid.clone(), s);
                    }
                    graph.nodes.push(AmrNode::constant(&cid, value, sentence_index));
                    graph.edges.push(AmrEdge::new(&id, role, &cid));
                }
            }
        }
        for child in children.into_iter().rev() {
            stack.push(child);
        }
    }
    for (idx, id, _) in &order {
        graph.nodes.push(AmrNode::concept(id, &raw[*idx].concept, sentence_index));
    }
    graph.nodes.sort_by(|a, b| a.id.cmp(&b.id));
    graph.root = Some(format!("{}{}", prefix, raw[root].var));

    for (span, node_paths) in &comments.alignments {
        for p in node_paths {
            if let Some(id) = paths.get(p) {
                let merged = union(spans.get(id).copied(), *span);
                spans.insert(id.clone(), merged);
            }
        }
    }
    for node in graph.nodes.iter_mut() {
        node.span = spans.get(&node.id).copied();
    }
    graph.refresh_surfaces();
    Ok(graph)
}
