//! Prompt and encoder-input construction.
//!
//! Templates hold role-indexed placeholders `<arg1>` … `<argN>`; `roles[K-1]` names the
//! role bound to `<argK>`. The encoder input wraps a prompt and a context as
//! `<s> PROMPT </s> CONTEXT </s>`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::amr::{DocumentGraph, GraphPath, LinearToken};
use crate::dataset::{DocumentRecord, EventMention, GoldArgument, TokenSpan};

pub const TRIGGER_MARK: &str = "<trg>";
pub const TARGET_MASK: &str = "<arg>";
pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const MENTION_JOIN: &str = " and ";

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("template for {event_type}: placeholder <arg{index}> appears {count} times")]
    Placeholder { event_type: String, index: usize, count: usize },
    #[error("template for {event_type}: {message}")]
    Roles { event_type: String, message: String },
    #[error("no template for event type {0}")]
    Missing(String),
    #[error("template file line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("cannot read template file: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
#[error("trigger span {span} is outside a sequence of {len} tokens")]
pub struct InvalidSpan {
    pub span: TokenSpan,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Segment {
    Literal(String),
    /// Zero-based placeholder index.
    Slot(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub event_type: String,
    pub text: String,
    pub role_order: Vec<String>,
    segments: Vec<Segment>,
}

/// Positions of `<argK>` placeholders as (byte start, byte end, zero-based K).
fn find_placeholders(text: &str) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    let mut from = 0;
    while let Some(rel) = text[from..].find("<arg") {
        let start = from + rel;
        let digits: String = text[start + 4..].chars().take_while(|c| c.is_ascii_digit()).collect();
        let close = start + 4 + digits.len();
        if !digits.is_empty() && text[close..].starts_with('>') {
            if let Ok(k) = digits.parse::<usize>() {
                if k >= 1 {
                    out.push((start, close + 1, k - 1));
                }
            }
            from = close + 1;
        } else {
            from = start + 4;
        }
    }
    out
}

pub fn placeholder(index: usize) -> String {
    format!("<arg{}>", index + 1)
}

impl PromptTemplate {
    pub fn new(event_type: &str, text: &str, roles: Vec<String>) -> Result<Self, TemplateError> {
        let found = find_placeholders(text);
        let mut counts = vec![0usize; roles.len()];
        for &(_, _, k) in &found {
            if k >= roles.len() {
                return Err(TemplateError::Roles {
                    event_type: event_type.to_string(),
                    message: format!("placeholder <arg{}> has no role", k + 1),
                });
            }
            counts[k] += 1;
        }
        if let Some((index, &count)) = counts.iter().enumerate().find(|(_, &c)| c != 1) {
            return Err(TemplateError::Placeholder { event_type: event_type.to_string(), index: index + 1, count });
        }
        let mut seen = std::collections::BTreeSet::new();
        for r in &roles {
            if r.is_empty() || !seen.insert(r) {
                return Err(TemplateError::Roles {
                    event_type: event_type.to_string(),
                    message: format!("role `{}` is empty or repeated", r),
                });
            }
        }
        let mut segments = Vec::new();
        let mut last = 0;
        for &(s, e, k) in &found {
            if s > last {
                segments.push(Segment::Literal(text[last..s].to_string()));
            }
            segments.push(Segment::Slot(k));
            last = e;
        }
        if last < text.len() {
            segments.push(Segment::Literal(text[last..].to_string()));
        }
        Ok(PromptTemplate { event_type: event_type.to_string(), text: text.to_string(), role_order: roles, segments })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn role_index(&self, role: &str) -> Option<usize> {
        self.role_order.iter().position(|r| r == role)
    }
}

/// Role to argument texts; several mentions of one role are joined with " and ".
pub type ClueSet = BTreeMap<String, Vec<String>>;

/// Replaces the placeholder of every clued role by its text; other placeholders stay.
pub fn fill_clues(template: &PromptTemplate, clues: &ClueSet) -> String {
    fill_placeholders(&template.text, &template.role_order, clues)
}

/// Placeholder substitution over arbitrary text, so a partially filled prompt can be
/// filled further with the template's role order.
pub fn fill_placeholders(text: &str, role_order: &[String], clues: &ClueSet) -> String {
    let mut out = String::with_capacity(text.len());
    let mut last = 0;
    for (s, e, k) in find_placeholders(text) {
        out.push_str(&text[last..s]);
        match role_order.get(k).and_then(|r| clues.get(r)).filter(|v| !v.is_empty()) {
            Some(values) => out.push_str(&values.join(MENTION_JOIN)),
            None => out.push_str(&text[s..e]),
        }
        last = e;
    }
    out.push_str(&text[last..]);
    out
}

/// Groups arguments by role in document order.
pub fn clues_from_args<'a>(args: impl IntoIterator<Item = &'a GoldArgument>) -> ClueSet {
    let mut sorted: Vec<&GoldArgument> = args.into_iter().collect();
    sorted.sort_by_key(|a| a.span);
    let mut clues = ClueSet::new();
    for a in sorted {
        clues.entry(a.role.clone()).or_default().push(a.text.clone());
    }
    clues
}

/// Gold-filled template for the given arguments.
pub fn render_target<'a>(template: &PromptTemplate, args: impl IntoIterator<Item = &'a GoldArgument>) -> String {
    fill_clues(template, &clues_from_args(args))
}

/// Surrounds the trigger tokens with `<trg>` markers.
pub fn mark_trigger(tokens: &[String], span: TokenSpan) -> Result<Vec<String>, InvalidSpan> {
    if span.is_empty() || span.end > tokens.len() {
        return Err(InvalidSpan { span, len: tokens.len() });
    }
    let mut out = Vec::with_capacity(tokens.len() + 2);
    out.extend_from_slice(&tokens[..span.start]);
    out.push(TRIGGER_MARK.to_string());
    out.extend_from_slice(&tokens[span.start..span.end]);
    out.push(TRIGGER_MARK.to_string());
    out.extend_from_slice(&tokens[span.end..]);
    Ok(out)
}

/// Text of sentences `[first, last)` of `doc`, trigger marked when it falls inside.
pub fn context_text(doc: &DocumentRecord, event: &EventMention, first: usize, last: usize) -> String {
    let mut parts: Vec<String> = Vec::new();
    for s in &doc.sentences[first..last] {
        if s.index == event.trigger_sentence {
            let local = event.trigger.shift_left(s.offset);
            match mark_trigger(&s.tokens, local) {
                Ok(marked) => parts.push(marked.join(" ")),
                Err(_) => parts.push(s.tokens.join(" ")),
            }
        } else {
            parts.push(s.tokens.join(" "));
        }
    }
    parts.join(" ")
}

/// `<s> p </s> x </s>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EncoderInput(String);

impl EncoderInput {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }

    /// Splits a wrapped string back into (prompt, context).
    pub fn parse(text: &str) -> Option<(String, String)> {
        let body = text.strip_prefix("<s> ")?.strip_suffix(" </s>")?;
        let (p, x) = body.split_once(" </s> ")?;
        Some((p.to_string(), x.to_string()))
    }
}

impl std::fmt::Display for EncoderInput {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn wrap(prompt: &str, context: &str) -> EncoderInput {
    EncoderInput(format!("{} {} {} {} {}", BOS, prompt, EOS, context, EOS))
}

/// Space-joined linearization with every rendering of `target` replaced by `<arg>`.
pub fn render_linearized_prompt(tokens: &[LinearToken], target: &str) -> String {
    tokens
        .iter()
        .map(|t| if t.node.as_deref() == Some(target) { TARGET_MASK } else { t.text.as_str() })
        .collect::<Vec<_>>()
        .join(" ")
}

/// `node label node … <arg>` for a trigger-to-target path; the path's last node is masked.
pub fn render_path_prompt(graph: &DocumentGraph, path: &GraphPath) -> String {
    let target = path.target();
    let render = |id: &str| -> String {
        if id == target {
            TARGET_MASK.to_string()
        } else {
            graph.node(id).map(|n| n.rendering().to_string()).unwrap_or_else(|| id.to_string())
        }
    };
    let mut parts = vec![render(&path.nodes[0])];
    for (label, node) in path.labels.iter().zip(&path.nodes[1..]) {
        parts.push(label.clone());
        parts.push(render(node));
    }
    parts.join(" ")
}

#[derive(Debug, Deserialize, Serialize)]
struct RawTemplate {
    event_type: String,
    template: String,
    roles: Vec<String>,
}

/// Event type to template, read from a line-delimited `{event_type, template, roles}` file.
#[derive(Debug, Clone, Default)]
pub struct TemplateStore {
    by_type: BTreeMap<String, PromptTemplate>,
}

impl TemplateStore {
    pub fn parse(text: &str) -> Result<Self, TemplateError> {
        let mut by_type = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let raw: RawTemplate = serde_json::from_str(line)
                .map_err(|e| TemplateError::Malformed { line: i + 1, message: e.to_string() })?;
            let t = PromptTemplate::new(&raw.event_type, &raw.template, raw.roles)?;
            by_type.insert(raw.event_type, t);
        }
        Ok(TemplateStore { by_type })
    }

    pub fn load(path: &Path) -> Result<Self, TemplateError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn insert(&mut self, template: PromptTemplate) {
        self.by_type.insert(template.event_type.clone(), template);
    }

    pub fn get(&self, event_type: &str) -> Result<&PromptTemplate, TemplateError> {
        self.by_type.get(event_type).ok_or_else(|| TemplateError::Missing(event_type.to_string()))
    }

    pub fn len(&self) -> usize {
        self.by_type.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_type.is_empty()
    }
}
