//! Three-stage pipeline decoding over a pluggable text generator.
//!
//! Each stage wraps the clue-filled template with its context window, asks the generator
//! to fill it, and parses the output back against the template. Roles decided at a stage
//! are final.

mod oracle;
mod remote;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompts::{
    context_text, fill_clues, wrap, ClueSet, PromptTemplate, Segment, TemplateError, TemplateStore, MENTION_JOIN,
};
use crate::staging::{stage_window, EventWindow, StageId};

pub use oracle::OracleGenerator;
pub use remote::RemoteGenerator;

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("generator transport failure: {0}")]
    Transport(String),
    #[error("generator protocol error: {0}")]
    Protocol(String),
}

/// Anything that maps a wrapped encoder input to a filled template.
pub trait Generator: Sync {
    fn generate(&self, input: &str) -> Result<String, GeneratorError>;

    fn generate_batch(&self, inputs: &[String]) -> Result<Vec<String>, GeneratorError> {
        inputs.iter().map(|i| self.generate(i)).collect()
    }

    /// Number of calls the orchestrator may have in flight at once.
    fn max_concurrency(&self) -> usize {
        1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecodeStage {
    Cent,
    Neigh,
    Doc,
}

impl DecodeStage {
    pub const ALL: [DecodeStage; 3] = [DecodeStage::Cent, DecodeStage::Neigh, DecodeStage::Doc];

    /// Training stage whose context window this decoding stage reads.
    pub fn window_stage(&self) -> StageId {
        match self {
            DecodeStage::Cent => StageId::CentEx,
            DecodeStage::Neigh => StageId::NeighEx,
            DecodeStage::Doc => StageId::DocEx,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DecodeStage::Cent => "cent",
            DecodeStage::Neigh => "neigh",
            DecodeStage::Doc => "doc",
        }
    }

    /// Parses a comma-separated subset such as `cent,doc`; the result is in pipeline order.
    pub fn parse_list(s: &str) -> Result<Vec<DecodeStage>, String> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let st: DecodeStage = part.parse()?;
            if !out.contains(&st) {
                out.push(st);
            }
        }
        if out.is_empty() {
            return Err("no decoding stage given".to_string());
        }
        out.sort();
        Ok(out)
    }
}

impl fmt::Display for DecodeStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DecodeStage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cent" => Ok(DecodeStage::Cent),
            "neigh" => Ok(DecodeStage::Neigh),
            "doc" => Ok(DecodeStage::Doc),
            other => Err(format!("unknown decoding stage `{}` (expected cent, neigh or doc)", other)),
        }
    }
}

/// Role to predicted argument strings.
pub type Prediction = BTreeMap<String, Vec<String>>;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DecodeState {
    pub clues: ClueSet,
    /// Stage at which each role was decided.
    pub decided: BTreeMap<String, DecodeStage>,
}

impl DecodeState {
    pub fn is_decided(&self, role: &str) -> bool {
        self.decided.contains_key(role)
    }

    pub fn prediction(&self) -> Prediction {
        self.clues.clone()
    }
}

/// Result of aligning generated text against a template.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedTemplate {
    pub values: Prediction,
    /// Roles whose slot could not be aligned.
    pub failed: Vec<String>,
}

fn collapse(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

// Whitespace runs become single spaces; a leading or trailing run is kept as one space.
fn collapse_keep_edges(s: &str) -> String {
    let mut out = String::new();
    if s.starts_with(char::is_whitespace) {
        out.push(' ');
    }
    out.push_str(&collapse(s));
    if s.ends_with(char::is_whitespace) && !out.ends_with(' ') {
        out.push(' ');
    }
    out
}

fn slot_values(text: &str) -> Vec<String> {
    text.split(MENTION_JOIN)
        .map(str::trim)
        .filter(|p| !p.is_empty() && !p.contains("<arg"))
        .map(str::to_string)
        .collect()
}

/// Reads role values out of a filled template.
///
/// Literal segments are located greedily left to right in the whitespace-collapsed,
/// space-padded output; the text between two literals belongs to the placeholder between them and is
/// split on " and ". Empty or still-placeholder slots yield nothing. When a literal is
/// missing, that slot and every later one are reported in `failed`.
pub fn parse_filled_template(template: &PromptTemplate, generated: &str) -> ParsedTemplate {
    let padded = format!(" {} ", collapse(generated));
    let mut out = ParsedTemplate::default();
    let segments = template.segments();
    // byte position in `padded` where the current slot text begins
    let mut cursor = 1usize;
    let mut pending: Vec<usize> = Vec::new();
    let mut failed_at: Option<usize> = None;

    for (i, seg) in segments.iter().enumerate() {
        match seg {
            Segment::Slot(k) => pending.push(*k),
            Segment::Literal(lit) => {
                let needle = collapse_keep_edges(lit);
                if needle.trim().is_empty() {
                    continue;
                }
                let from =
                    if needle.starts_with(' ') && padded.as_bytes()[cursor - 1] == b' ' { cursor - 1 } else { cursor };
                match padded[from..].find(&needle) {
                    Some(rel) => {
                        let start = from + rel;
                        let slot_text = if start >= cursor { &padded[cursor..start] } else { "" };
                        assign(template, &pending, slot_text, &mut out);
                        pending.clear();
                        cursor = start + needle.len();
                    }
                    None => {
                        failed_at = Some(i);
                        break;
                    }
                }
            }
        }
    }
    match failed_at {
        None => {
            let tail = if cursor < padded.len() { &padded[cursor..] } else { "" };
            assign(template, &pending, tail, &mut out);
        }
        Some(i) => {
            let mut failed: Vec<usize> = pending.clone();
            failed.extend(segments[i..].iter().filter_map(|s| match s {
                Segment::Slot(k) => Some(*k),
                Segment::Literal(_) => None,
            }));
            out.failed = failed.into_iter().map(|k| template.role_order[k].clone()).collect();
        }
    }
    out
}

// Adjacent placeholders with no literal between them cannot be separated; the text goes
// to the first of them.
fn assign(template: &PromptTemplate, slots: &[usize], text: &str, out: &mut ParsedTemplate) {
    if let Some(&k) = slots.first() {
        let values = slot_values(text);
        if !values.is_empty() {
            out.values.insert(template.role_order[k].clone(), values);
        }
    }
}

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("{doc_id} event {event_index}, {stage} stage: {source}")]
    Generator {
        doc_id: String,
        event_index: usize,
        stage: DecodeStage,
        #[source]
        source: GeneratorError,
    },
}

/// Encoder input for one decoding stage given the clues gathered so far.
pub fn stage_input(window: &EventWindow, template: &PromptTemplate, stage: DecodeStage, state: &DecodeState) -> String {
    let doc = &window.doc;
    let event = window.event();
    let (first, last) = stage_window(doc, event, stage.window_stage());
    wrap(&fill_clues(template, &state.clues), &context_text(doc, event, first, last)).into_string()
}

/// Runs one stage: a single generator call, then every newly parsed role becomes decided.
pub fn decode_stage(
    window: &EventWindow,
    template: &PromptTemplate,
    stage: DecodeStage,
    generator: &dyn Generator,
    state: &DecodeState,
) -> Result<DecodeState, GeneratorError> {
    let input = stage_input(window, template, stage, state);
    let output = generator.generate(&input)?;
    let parsed = parse_filled_template(template, &output);
    let mut next = state.clone();
    for (role, values) in parsed.values {
        if next.is_decided(&role) {
            continue;
        }
        next.decided.insert(role.clone(), stage);
        next.clues.insert(role, values);
    }
    Ok(next)
}

/// Runs `stages` in pipeline order, threading the state, and returns every snapshot
/// (the initial state first).
pub fn pipeline_trace(
    window: &EventWindow,
    templates: &TemplateStore,
    generator: &dyn Generator,
    stages: &[DecodeStage],
) -> Result<Vec<DecodeState>, DecodeError> {
    let template = templates.get(&window.event().event_type)?;
    let mut ordered = stages.to_vec();
    ordered.sort();
    ordered.dedup();
    let mut trace = vec![DecodeState::default()];
    for stage in ordered {
        let next = decode_stage(window, template, stage, generator, trace.last().unwrap()).map_err(|source| {
            DecodeError::Generator { doc_id: window.doc.doc_id.clone(), event_index: window.event_index, stage, source }
        })?;
        trace.push(next);
    }
    Ok(trace)
}

pub fn pipeline_decode(
    window: &EventWindow,
    templates: &TemplateStore,
    generator: &dyn Generator,
    stages: &[DecodeStage],
) -> Result<Prediction, DecodeError> {
    Ok(pipeline_trace(window, templates, generator, stages)?.pop().unwrap().prediction())
}

/// Decodes every window, keeping at most `generator.max_concurrency()` events in flight.
/// Results are in window order.
pub fn decode_all(
    windows: &[EventWindow],
    templates: &TemplateStore,
    generator: &dyn Generator,
    stages: &[DecodeStage],
) -> Result<Vec<Prediction>, DecodeError> {
    let workers = generator.max_concurrency().max(1).min(windows.len().max(1));
    if workers == 1 {
        return windows.iter().map(|w| pipeline_decode(w, templates, generator, stages)).collect();
    }
    let chunk = windows.len().div_ceil(workers);
    let results: Vec<Result<Vec<Prediction>, DecodeError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = windows
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter().map(|w| pipeline_decode(w, templates, generator, stages)).collect::<Result<Vec<_>, _>>()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("decoder worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(windows.len());
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}
