//! Loading of RAMS / WikiEvents style annotation files.
//!
//! Two line-delimited layouts are accepted for event records:
//!
//! * the normalized layout, one event per line:
//!   `{doc_key, sentences, trigger: {sent, start, end}, event_type, gold: [{sent, start, end, role}]}`
//!   with sentence-local, end-inclusive token indices. WikiEvents files add
//!   `informative_mentions: [{role, text, sent, start, end}]`.
//! * the public RAMS release layout (`evt_triggers` / `gold_evt_links`, document-level
//!   end-inclusive indices), detected per line.
//!
//! Lines sharing a document are grouped into a single [`DocumentRecord`] holding
//! several events. Internally every span is a document-level half-open [`TokenSpan`].

use std::collections::HashMap;
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("document {doc_id}: span {span} out of bounds")]
    SpanOutOfBounds { doc_id: String, span: String },
    #[error("document {doc_id}: {message}")]
    Inconsistent { doc_id: String, message: String },
}

/// Half-open range of document-level token positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TokenSpan {
    pub start: usize,
    pub end: usize,
}

impl TokenSpan {
    pub fn new(start: usize, end: usize) -> Self {
        TokenSpan { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlap(&self, other: &TokenSpan) -> usize {
        let lo = self.start.max(other.start);
        let hi = self.end.min(other.end);
        hi.saturating_sub(lo)
    }

    /// Number of tokens strictly between the two spans (0 when they touch or overlap).
    pub fn gap(&self, other: &TokenSpan) -> usize {
        other.start.saturating_sub(self.end).max(self.start.saturating_sub(other.end))
    }

    pub fn shift_left(&self, by: usize) -> TokenSpan {
        TokenSpan::new(self.start - by, self.end - by)
    }
}

impl std::fmt::Display for TokenSpan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub index: usize,
    /// Document-level position of the first token.
    pub offset: usize,
    pub tokens: Vec<String>,
}

impl Sentence {
    pub fn span(&self) -> TokenSpan {
        TokenSpan::new(self.offset, self.offset + self.tokens.len())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldArgument {
    pub role: String,
    pub span: TokenSpan,
    pub text: String,
    pub sentence_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventMention {
    pub event_type: String,
    pub trigger: TokenSpan,
    pub trigger_sentence: usize,
    pub gold_args: Vec<GoldArgument>,
    /// Gold arguments removed by truncation, kept in original document coordinates.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dropped_args: Vec<GoldArgument>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Mention {
    pub sentence: usize,
    pub span: TokenSpan,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorefChain {
    pub mentions: Vec<Mention>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub doc_id: String,
    pub sentences: Vec<Sentence>,
    pub events: Vec<EventMention>,
    #[serde(default)]
    pub coref_chains: Vec<CorefChain>,
    #[serde(default)]
    pub penman_by_sentence: Vec<String>,
    /// Index of the first sentence in the untruncated document.
    #[serde(default)]
    pub sentence_offset: usize,
}

impl DocumentRecord {
    pub fn token_count(&self) -> usize {
        self.sentences.last().map(|s| s.offset + s.tokens.len()).unwrap_or(0)
    }

    pub fn token(&self, pos: usize) -> Option<&str> {
        let sentence = self.sentence_of(pos)?;
        Some(&self.sentences[sentence].tokens[pos - self.sentences[sentence].offset])
    }

    /// Sentence index containing the document-level token position.
    pub fn sentence_of(&self, pos: usize) -> Option<usize> {
        let idx = self.sentences.partition_point(|s| s.offset + s.tokens.len() <= pos);
        (idx < self.sentences.len() && self.sentences[idx].offset <= pos).then_some(idx)
    }

    /// Tokens covered by `span`, joined with single spaces.
    pub fn span_text(&self, span: TokenSpan) -> String {
        (span.start..span.end).filter_map(|p| self.token(p)).collect::<Vec<_>>().join(" ")
    }

    pub fn all_tokens(&self) -> Vec<String> {
        self.sentences.iter().flat_map(|s| s.tokens.iter().cloned()).collect()
    }

    pub fn has_graphs(&self) -> bool {
        !self.penman_by_sentence.is_empty()
    }

    fn span_within_sentence(&self, sentence: usize, span: TokenSpan) -> bool {
        self.sentences
            .get(sentence)
            .map(|s| !span.is_empty() && span.start >= s.offset && span.end <= s.offset + s.tokens.len())
            .unwrap_or(false)
    }

    /// Checks the structural invariants of a loaded record.
    pub fn validate(&self) -> Result<(), DatasetError> {
        let mut expected = 0;
        for (i, s) in self.sentences.iter().enumerate() {
            if s.index != i || s.offset != expected {
                return Err(self.inconsistent(format!("sentence {} is not contiguous", i)));
            }
            if s.tokens.is_empty() {
                return Err(self.inconsistent(format!("sentence {} has no tokens", i)));
            }
            expected += s.tokens.len();
        }
        if !self.penman_by_sentence.is_empty() && self.penman_by_sentence.len() != self.sentences.len() {
            return Err(self.inconsistent(format!(
                "{} graphs for {} sentences",
                self.penman_by_sentence.len(),
                self.sentences.len()
            )));
        }
        for event in &self.events {
            if event.event_type.is_empty() {
                return Err(self.inconsistent("empty event type".to_string()));
            }
            if !self.span_within_sentence(event.trigger_sentence, event.trigger) {
                return Err(self.out_of_bounds(event.trigger));
            }
            for arg in &event.gold_args {
                if !self.span_within_sentence(arg.sentence_index, arg.span) {
                    return Err(self.out_of_bounds(arg.span));
                }
            }
        }
        for chain in &self.coref_chains {
            for m in &chain.mentions {
                if !self.span_within_sentence(m.sentence, m.span) {
                    return Err(self.out_of_bounds(m.span));
                }
            }
        }
        Ok(())
    }

    fn inconsistent(&self, message: String) -> DatasetError {
        DatasetError::Inconsistent { doc_id: self.doc_id.clone(), message }
    }

    fn out_of_bounds(&self, span: TokenSpan) -> DatasetError {
        DatasetError::SpanOutOfBounds { doc_id: self.doc_id.clone(), span: span.to_string() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Rams,
    Wikievents,
}

impl std::str::FromStr for DatasetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rams" => Ok(DatasetKind::Rams),
            "wikievents" => Ok(DatasetKind::Wikievents),
            other => Err(format!("unknown dataset kind `{}`", other)),
        }
    }
}

// On-disk layouts.

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawSpan {
    sent: usize,
    start: usize,
    end: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawArg {
    sent: usize,
    start: usize,
    end: usize,
    role: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawInformative {
    role: String,
    text: String,
    sent: usize,
    start: usize,
    end: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawRecord {
    doc_key: String,
    sentences: Vec<Vec<String>>,
    trigger: RawSpan,
    event_type: String,
    #[serde(default)]
    gold: Vec<RawArg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    informative_mentions: Option<Vec<RawInformative>>,
}

type NativeTrigger = (usize, usize, Vec<(String, f64)>);
type NativeLink = ((usize, usize), (usize, usize), String);

/// Public RAMS release line (only the fields used here).
#[derive(Debug, Deserialize)]
struct NativeRamsRecord {
    doc_key: String,
    sentences: Vec<Vec<String>>,
    evt_triggers: Vec<NativeTrigger>,
    #[serde(default)]
    gold_evt_links: Vec<NativeLink>,
}

/// Accumulates events per document in first-appearance order.
struct DocumentBuilder {
    order: Vec<DocumentRecord>,
    by_key: HashMap<String, usize>,
}

impl DocumentBuilder {
    fn new() -> Self {
        DocumentBuilder { order: Vec::new(), by_key: HashMap::new() }
    }

    fn document(
        &mut self,
        key: &str,
        doc_id: &str,
        sentences: &[Vec<String>],
        line: usize,
    ) -> Result<&mut DocumentRecord, DatasetError> {
        if let Some(&idx) = self.by_key.get(key) {
            let doc = &mut self.order[idx];
            let same = doc.sentences.len() == sentences.len()
                && doc.sentences.iter().zip(sentences).all(|(a, b)| &a.tokens == b);
            if !same {
                return Err(DatasetError::Malformed {
                    line,
                    message: format!("document {} repeated with different sentences", doc_id),
                });
            }
            return Ok(doc);
        }
        let mut offset = 0;
        let sents = sentences
            .iter()
            .enumerate()
            .map(|(index, tokens)| {
                let s = Sentence { index, offset, tokens: tokens.clone() };
                offset += tokens.len();
                s
            })
            .collect();
        self.by_key.insert(key.to_string(), self.order.len());
        self.order.push(DocumentRecord {
            doc_id: doc_id.to_string(),
            sentences: sents,
            events: Vec::new(),
            coref_chains: Vec::new(),
            penman_by_sentence: Vec::new(),
            sentence_offset: 0,
        });
        Ok(self.order.last_mut().unwrap())
    }
}

fn local_span(
    doc: &DocumentRecord,
    sent: usize,
    start: usize,
    end_inclusive: usize,
) -> Result<TokenSpan, DatasetError> {
    let bad = || DatasetError::SpanOutOfBounds {
        doc_id: doc.doc_id.clone(),
        span: format!("sentence {} tokens {}..={}", sent, start, end_inclusive),
    };
    let s = doc.sentences.get(sent).ok_or_else(bad)?;
    if start > end_inclusive || end_inclusive >= s.tokens.len() {
        return Err(bad());
    }
    Ok(TokenSpan::new(s.offset + start, s.offset + end_inclusive + 1))
}

fn document_span(doc: &DocumentRecord, start: usize, end_inclusive: usize) -> Result<(usize, TokenSpan), DatasetError> {
    let bad = || DatasetError::SpanOutOfBounds {
        doc_id: doc.doc_id.clone(),
        span: format!("tokens {}..={}", start, end_inclusive),
    };
    if start > end_inclusive {
        return Err(bad());
    }
    let sent = doc.sentence_of(start).ok_or_else(bad)?;
    if doc.sentence_of(end_inclusive) != Some(sent) {
        return Err(bad());
    }
    Ok((sent, TokenSpan::new(start, end_inclusive + 1)))
}

/// Strips the `evtNNNargNN` prefix of public RAMS role labels.
fn rams_role(label: &str) -> &str {
    let bytes = label.as_bytes();
    if label.starts_with("evt") {
        if let Some(pos) = label.find("arg") {
            let digits = &bytes[pos + 3..];
            let n = digits.iter().take_while(|b| b.is_ascii_digit()).count();
            if n > 0 && label[3..pos].bytes().all(|b| b.is_ascii_digit()) {
                return &label[pos + 3 + n..];
            }
        }
    }
    label
}

fn read_lines(path: &Path) -> Result<Vec<String>, DatasetError> {
    let file = fs::File::open(path).map_err(|source| DatasetError::Io { path: path.to_path_buf(), source })?;
    BufReader::new(file)
        .lines()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|source| DatasetError::Io { path: path.to_path_buf(), source })
}

fn parse_records(lines: &[String], kind: DatasetKind) -> Result<Vec<DocumentRecord>, DatasetError> {
    let mut builder = DocumentBuilder::new();
    for (i, line) in lines.iter().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value =
            serde_json::from_str(line).map_err(|e| DatasetError::Malformed { line: lineno, message: e.to_string() })?;
        if value.get("evt_triggers").is_some() {
            let rec: NativeRamsRecord = serde_json::from_value(value)
                .map_err(|e| DatasetError::Malformed { line: lineno, message: e.to_string() })?;
            add_native_rams(&mut builder, rec, lineno)?;
        } else {
            let rec: RawRecord = serde_json::from_value(value)
                .map_err(|e| DatasetError::Malformed { line: lineno, message: e.to_string() })?;
            add_raw(&mut builder, rec, kind, lineno)?;
        }
    }
    let docs = builder.order;
    for doc in &docs {
        doc.validate()?;
    }
    Ok(docs)
}

fn add_raw(builder: &mut DocumentBuilder, rec: RawRecord, kind: DatasetKind, line: usize) -> Result<(), DatasetError> {
    let doc = builder.document(&rec.doc_key, &rec.doc_key, &rec.sentences, line)?;
    let trigger = local_span(doc, rec.trigger.sent, rec.trigger.start, rec.trigger.end)?;
    let mut gold_args = Vec::new();
    match (&rec.informative_mentions, kind) {
        (Some(mentions), DatasetKind::Wikievents) => {
            for m in mentions {
                let span = local_span(doc, m.sent, m.start, m.end)?;
                gold_args.push(GoldArgument {
                    role: m.role.clone(),
                    span,
                    text: m.text.clone(),
                    sentence_index: m.sent,
                });
            }
        }
        _ => {
            for a in &rec.gold {
                let span = local_span(doc, a.sent, a.start, a.end)?;
                let text = doc.span_text(span);
                gold_args.push(GoldArgument { role: a.role.clone(), span, text, sentence_index: a.sent });
            }
        }
    }
    doc.events.push(EventMention {
        event_type: rec.event_type,
        trigger,
        trigger_sentence: rec.trigger.sent,
        gold_args,
        dropped_args: Vec::new(),
    });
    Ok(())
}

fn add_native_rams(builder: &mut DocumentBuilder, rec: NativeRamsRecord, line: usize) -> Result<(), DatasetError> {
    // Public RAMS keys every example separately; the paragraph text identifies the document.
    let key = serde_json::to_string(&rec.sentences).unwrap_or_default();
    let doc = builder.document(&key, &rec.doc_key, &rec.sentences, line)?;
    for (start, end, types) in &rec.evt_triggers {
        let event_type = types
            .first()
            .map(|(t, _)| t.clone())
            .ok_or_else(|| DatasetError::Malformed { line, message: "trigger without event type".into() })?;
        let (trigger_sentence, trigger) = document_span(doc, *start, *end)?;
        let mut gold_args = Vec::new();
        for ((ts, te), (as_, ae), role) in &rec.gold_evt_links {
            if (*ts, *te) != (*start, *end) {
                continue;
            }
            let (sentence_index, span) = document_span(doc, *as_, *ae)?;
            gold_args.push(GoldArgument {
                role: rams_role(role).to_string(),
                span,
                text: doc.span_text(span),
                sentence_index,
            });
        }
        doc.events.push(EventMention { event_type, trigger, trigger_sentence, gold_args, dropped_args: Vec::new() });
    }
    Ok(())
}

pub fn parse_rams_str(text: &str) -> Result<Vec<DocumentRecord>, DatasetError> {
    let lines: Vec<String> = text.lines().map(str::to_string).collect();
    parse_records(&lines, DatasetKind::Rams)
}

pub fn parse_wikievents_str(text: &str) -> Result<Vec<DocumentRecord>, DatasetError> {
    let lines: Vec<String> = text.lines().map(str::to_string).collect();
    parse_records(&lines, DatasetKind::Wikievents)
}

pub fn load_rams(path: &Path) -> Result<Vec<DocumentRecord>, DatasetError> {
    parse_records(&read_lines(path)?, DatasetKind::Rams)
}

pub fn load_wikievents(path: &Path) -> Result<Vec<DocumentRecord>, DatasetError> {
    parse_records(&read_lines(path)?, DatasetKind::Wikievents)
}

pub fn load_dataset(path: &Path, kind: DatasetKind) -> Result<Vec<DocumentRecord>, DatasetError> {
    match kind {
        DatasetKind::Rams => load_rams(path),
        DatasetKind::Wikievents => load_wikievents(path),
    }
}

/// Serializes records back into the normalized line layout, one line per event.
pub fn write_records<W: Write>(docs: &[DocumentRecord], kind: DatasetKind, mut out: W) -> io::Result<()> {
    for doc in docs {
        let sentences: Vec<Vec<String>> = doc.sentences.iter().map(|s| s.tokens.clone()).collect();
        for event in &doc.events {
            let local = |sent: usize, span: TokenSpan| {
                let offset = doc.sentences[sent].offset;
                (span.start - offset, span.end - offset - 1)
            };
            let (ts, te) = local(event.trigger_sentence, event.trigger);
            let args = event.gold_args.iter().map(|a| (a, local(a.sentence_index, a.span)));
            let (gold, informative_mentions) = match kind {
                DatasetKind::Rams => (
                    args.map(|(a, (s, e))| RawArg { sent: a.sentence_index, start: s, end: e, role: a.role.clone() })
                        .collect(),
                    None,
                ),
                DatasetKind::Wikievents => (
                    Vec::new(),
                    Some(
                        args.map(|(a, (s, e))| RawInformative {
                            role: a.role.clone(),
                            text: a.text.clone(),
                            sent: a.sentence_index,
                            start: s,
                            end: e,
                        })
                        .collect(),
                    ),
                ),
            };
            let rec = RawRecord {
                doc_key: doc.doc_id.clone(),
                sentences: sentences.clone(),
                trigger: RawSpan { sent: event.trigger_sentence, start: ts, end: te },
                event_type: event.event_type.clone(),
                gold,
                informative_mentions,
            };
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
struct RawCorefDoc {
    doc_key: String,
    chains: Vec<Vec<RawSpan>>,
}

/// Reads a coreference file and attaches chains to the matching documents.
///
/// Chains with fewer than two mentions are discarded.
pub fn attach_coref(docs: &mut [DocumentRecord], path: &Path) -> Result<(), DatasetError> {
    let lines = read_lines(path)?;
    let index: HashMap<String, usize> = docs.iter().enumerate().map(|(i, d)| (d.doc_id.clone(), i)).collect();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawCorefDoc =
            serde_json::from_str(line).map_err(|e| DatasetError::Malformed { line: i + 1, message: e.to_string() })?;
        let Some(&d) = index.get(&raw.doc_key) else {
            log::debug!("coreference for unknown document {}", raw.doc_key);
            continue;
        };
        let doc = &mut docs[d];
        let mut chains = Vec::new();
        for chain in raw.chains {
            let mentions = chain
                .iter()
                .map(|m| local_span(doc, m.sent, m.start, m.end).map(|span| Mention { sentence: m.sent, span }))
                .collect::<Result<Vec<_>, _>>()?;
            if mentions.len() >= 2 {
                chains.push(CorefChain { mentions });
            }
        }
        doc.coref_chains = chains;
    }
    Ok(())
}

/// Splits a PENMAN file into blank-line separated blocks.
pub fn split_penman_blocks(text: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                blocks.push(current.join("\n"));
                current.clear();
            }
        } else {
            current.push(line);
        }
    }
    if !current.is_empty() {
        blocks.push(current.join("\n"));
    }
    blocks
}

/// Attaches `<dir>/<doc_id>.amr` graph files; documents without a file keep no graphs.
pub fn attach_penman_dir(docs: &mut [DocumentRecord], dir: &Path) -> Result<(), DatasetError> {
    for doc in docs.iter_mut() {
        let path = dir.join(format!("{}.amr", doc.doc_id));
        if !path.exists() {
            continue;
        }
        let text = fs::read_to_string(&path).map_err(|source| DatasetError::Io { path: path.clone(), source })?;
        let blocks = split_penman_blocks(&text);
        if blocks.len() != doc.sentences.len() {
            return Err(DatasetError::Inconsistent {
                doc_id: doc.doc_id.clone(),
                message: format!(
                    "{} has {} graphs for {} sentences",
                    path.display(),
                    blocks.len(),
                    doc.sentences.len()
                ),
            });
        }
        doc.penman_by_sentence = blocks;
    }
    Ok(())
}

/// Sentence window `[first, last)` of at most `max_sentences` around `center`.
pub fn window_bounds(sentence_count: usize, center: usize, max_sentences: usize) -> (usize, usize) {
    let max = max_sentences.max(1);
    if sentence_count <= max {
        return (0, sentence_count);
    }
    let first = center.saturating_sub((max - 1) / 2).min(sentence_count - max);
    (first, first + max)
}

/// Restricts `doc` to a window of sentences centred on the trigger of event `event_index`.
///
/// The result carries only that event. Its gold arguments outside the window move to
/// `dropped_args` in original coordinates; `sentence_offset` records the window start.
pub fn truncate_around_trigger(doc: &DocumentRecord, event_index: usize, max_sentences: usize) -> DocumentRecord {
    let event = &doc.events[event_index];
    let (first, last) = window_bounds(doc.sentences.len(), event.trigger_sentence, max_sentences);
    let token_shift = doc.sentences[first].offset;
    let in_window = |sentence: usize| sentence >= first && sentence < last;

    let sentences = doc.sentences[first..last]
        .iter()
        .map(|s| Sentence { index: s.index - first, offset: s.offset - token_shift, tokens: s.tokens.clone() })
        .collect();

    let mut gold_args = Vec::new();
    let mut dropped_args = event.dropped_args.clone();
    for arg in &event.gold_args {
        if in_window(arg.sentence_index) {
            gold_args.push(GoldArgument {
                span: arg.span.shift_left(token_shift),
                sentence_index: arg.sentence_index - first,
                ..arg.clone()
            });
        } else {
            let mut original = arg.clone();
            original.sentence_index += doc.sentence_offset;
            dropped_args.push(original);
        }
    }

    let coref_chains = doc
        .coref_chains
        .iter()
        .filter_map(|c| {
            let mentions: Vec<Mention> = c
                .mentions
                .iter()
                .filter(|m| in_window(m.sentence))
                .map(|m| Mention { sentence: m.sentence - first, span: m.span.shift_left(token_shift) })
                .collect();
            (mentions.len() >= 2).then_some(CorefChain { mentions })
        })
        .collect();

    let penman_by_sentence =
        if doc.penman_by_sentence.is_empty() { Vec::new() } else { doc.penman_by_sentence[first..last].to_vec() };

    DocumentRecord {
        doc_id: doc.doc_id.clone(),
        sentences,
        events: vec![EventMention {
            event_type: event.event_type.clone(),
            trigger: event.trigger.shift_left(token_shift),
            trigger_sentence: event.trigger_sentence - first,
            gold_args,
            dropped_args,
        }],
        coref_chains,
        penman_by_sentence,
        sentence_offset: doc.sentence_offset + first,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture_line() -> String {
        r#"{"doc_key":"d1","sentences":[["A","man","fired","."],["He","fled","to","Kazan","."]],"trigger":{"sent":0,"start":2,"end":2},"event_type":"attack","gold":[{"sent":0,"start":0,"end":1,"role":"attacker"},{"sent":1,"start":3,"end":3,"role":"place"}]}"#.to_string()
    }

    #[test]
    fn single_document_fixture() {
        let docs = parse_rams_str(&fixture_line()).unwrap();
        assert_eq!(docs.len(), 1);
        assert_eq!(docs[0].events.len(), 1);
        assert_eq!(docs[0].events[0].gold_args.len(), 2);
        let place = &docs[0].events[0].gold_args[1];
        assert_eq!(place.text, "Kazan");
        assert_eq!(place.span, TokenSpan::new(7, 8));
        assert_eq!(docs[0].events[0].gold_args[0].text, "A man");
    }

    #[test]
    fn empty_file_is_empty_list() {
        assert!(parse_wikievents_str("").unwrap().is_empty());
        assert!(parse_rams_str("\n\n").unwrap().is_empty());
    }

    #[test]
    fn malformed_line_names_line_number() {
        let text = format!("{}\n{{not json", fixture_line());
        match parse_rams_str(&text) {
            Err(DatasetError::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {:?}", other),
        }
    }

    #[test]
    fn out_of_bounds_span_names_document() {
        let line = fixture_line().replace(r#""start":3,"end":3"#, r#""start":3,"end":9"#);
        match parse_rams_str(&line) {
            Err(DatasetError::SpanOutOfBounds { doc_id, .. }) => assert_eq!(doc_id, "d1"),
            other => panic!("unexpected {:?}", other),
        }
    }

    #[test]
    fn lines_of_one_document_are_grouped() {
        let second = fixture_line()
            .replace(r#""start":2,"end":2},"event_type":"attack""#, r#""start":1,"end":1},"event_type":"move""#);
        let docs = parse_rams_str(&format!("{}\n{}", fixture_line(), second)).unwrap();
        assert_eq!(docs.len(), 1);
        assert_eq!(docs[0].events.len(), 2);
        assert_eq!(docs[0].events[1].event_type, "move");
    }

    #[test]
    fn native_rams_layout() {
        let line = r#"{"doc_key":"nw_1","sentences":[["A","man","fired","."],["He","fled","to","Kazan","."]],"evt_triggers":[[2,2,[["conflict.attack.firearmattack",1.0]]]],"gold_evt_links":[[[2,2],[0,1],"evt042arg01attacker"],[[2,2],[7,7],"evt042arg04place"]],"ent_spans":[]}"#;
        let docs = parse_rams_str(line).unwrap();
        let event = &docs[0].events[0];
        assert_eq!(event.event_type, "conflict.attack.firearmattack");
        assert_eq!(event.gold_args[0].role, "attacker");
        assert_eq!(event.gold_args[1].role, "place");
        assert_eq!(event.gold_args[1].sentence_index, 1);
        assert_eq!(event.gold_args[1].text, "Kazan");
    }

    #[test]
    fn role_prefix_stripping() {
        assert_eq!(rams_role("evt089arg01victim"), "victim");
        assert_eq!(rams_role("victim"), "victim");
        assert_eq!(rams_role("evtXarg01victim"), "evtXarg01victim");
    }

    #[test]
    fn wikievents_uses_informative_mentions() {
        let line = r#"{"doc_key":"w1","sentences":[["Troops","entered","Aleppo","."]],"trigger":{"sent":0,"start":1,"end":1},"event_type":"Movement","gold":[{"sent":0,"start":0,"end":0,"role":"Transporter"}],"informative_mentions":[{"role":"Destination","text":"Aleppo","sent":0,"start":2,"end":2}]}"#;
        let docs = parse_wikievents_str(line).unwrap();
        let args = &docs[0].events[0].gold_args;
        assert_eq!(args.len(), 1);
        assert_eq!(args[0].role, "Destination");
    }

    fn long_doc(n: usize, trigger_sentence: usize) -> DocumentRecord {
        let sentences: Vec<Vec<String>> =
            (0..n).map(|i| vec![format!("w{}", i), format!("x{}", i), ".".to_string()]).collect();
        let gold: Vec<String> =
            (0..n).map(|i| format!(r#"{{"sent":{},"start":0,"end":1,"role":"r{}"}}"#, i, i)).collect();
        let line = format!(
            r#"{{"doc_key":"long","sentences":{},"trigger":{{"sent":{},"start":1,"end":1}},"event_type":"e","gold":[{}]}}"#,
            serde_json::to_string(&sentences).unwrap(),
            trigger_sentence,
            gold.join(",")
        );
        parse_rams_str(&line).unwrap().remove(0)
    }

    #[test]
    fn truncation_identity_when_short() {
        let doc = long_doc(9, 4);
        let t = truncate_around_trigger(&doc, 0, 9);
        assert_eq!(t.sentences, doc.sentences);
        assert_eq!(t.events, doc.events);
        assert_eq!(t.sentence_offset, 0);
    }

    #[test]
    fn truncation_shifts_at_start_boundary() {
        let doc = long_doc(20, 0);
        let t = truncate_around_trigger(&doc, 0, 9);
        assert_eq!(t.sentence_offset, 0);
        assert_eq!(t.sentences.len(), 9);
        assert_eq!(t.sentences[8].tokens[0], "w8");
        assert_eq!(t.events[0].gold_args.len(), 9);
        assert_eq!(t.events[0].dropped_args.len(), 11);
    }

    #[test]
    fn truncation_centers_on_trigger() {
        let doc = long_doc(20, 10);
        let t = truncate_around_trigger(&doc, 0, 9);
        assert_eq!(t.sentence_offset, 6);
        assert_eq!(t.sentences.first().unwrap().tokens[0], "w6");
        assert_eq!(t.sentences.last().unwrap().tokens[0], "w14");
        assert_eq!(t.events[0].trigger_sentence, 4);
        assert_eq!(t.span_text(t.events[0].trigger), "x10");
        for arg in &t.events[0].gold_args {
            assert_eq!(t.span_text(arg.span), arg.text);
        }
        t.validate().unwrap();
    }

    #[test]
    fn truncation_shifts_at_end_boundary() {
        assert_eq!(window_bounds(20, 19, 9), (11, 20));
        assert_eq!(window_bounds(20, 10, 4), (9, 13));
        assert_eq!(window_bounds(3, 1, 1), (1, 2));
    }

    #[test]
    fn penman_blocks_split_on_blank_lines() {
        let text = "# ::tok a\n(a / a)\n\n\n(b / b\n  :ARG0 (c / c))\n";
        let blocks = split_penman_blocks(text);
        assert_eq!(blocks.len(), 2);
        assert!(blocks[1].contains(":ARG0"));
    }
}
