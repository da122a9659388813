//! Curriculum stage assignment and staged training instance emission.
//!
//! Arguments are staged by sentence distance to the trigger: same sentence
//! ([`StageId::CentEx`]), adjacent sentence ([`StageId::NeighEx`]), anything further
//! ([`StageId::DocEx`]). The last stage, [`StageId::DocExNoClues`], covers every argument
//! again without clues.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::amr::{
    build_document_graph, connecting_subgraph, dfs_linearize_tagged, locate_node, shortest_path, DocumentGraph,
    GraphDiagnostics,
};
use crate::dataset::{truncate_around_trigger, DocumentRecord, EventMention, GoldArgument};
use crate::prompts::{
    clues_from_args, context_text, fill_clues, render_linearized_prompt, render_path_prompt, render_target, wrap,
    TemplateError, TemplateStore,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageId {
    CentEx,
    NeighEx,
    DocEx,
    DocExNoClues,
}

impl StageId {
    pub const ALL: [StageId; 4] = [StageId::CentEx, StageId::NeighEx, StageId::DocEx, StageId::DocExNoClues];

    pub fn name(&self) -> &'static str {
        match self {
            StageId::CentEx => "cent_ex",
            StageId::NeighEx => "neigh_ex",
            StageId::DocEx => "doc_ex",
            StageId::DocExNoClues => "doc_ex_no_clues",
        }
    }

    pub fn file_name(&self) -> String {
        format!("stage_{}.jsonl", self.name())
    }
}

impl std::str::FromStr for StageId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StageId::ALL.into_iter().find(|st| st.name() == s).ok_or_else(|| format!("unknown stage `{}`", s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptKind {
    Textual,
    Graph,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagedInstance {
    pub stage: StageId,
    pub doc_id: String,
    pub event_index: usize,
    pub prompt_kind: PromptKind,
    pub input_text: String,
    pub target_text: String,
    pub loss_weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_role: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_argument: Option<String>,
    /// Roles filled as clues in the prompt.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub clue_roles: Vec<String>,
}

#[derive(Debug, Error)]
pub enum StagingError {
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("loss weight {0} is outside (0, 1]")]
    LossWeight(f64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageDiagnostic {
    pub doc_id: String,
    pub event_index: usize,
    pub message: String,
}

/// One event's truncated document together with its document graph.
#[derive(Debug, Clone)]
pub struct EventWindow {
    /// Truncated document holding exactly this event.
    pub doc: DocumentRecord,
    /// Index of the event in the untruncated document.
    pub event_index: usize,
    pub graph: Option<DocumentGraph>,
    pub graph_diagnostics: GraphDiagnostics,
    pub graph_error: Option<String>,
}

impl EventWindow {
    pub fn build(doc: &DocumentRecord, event_index: usize, max_sentences: usize) -> EventWindow {
        let window = truncate_around_trigger(doc, event_index, max_sentences);
        let (graph, graph_diagnostics, graph_error) = if window.has_graphs() {
            match build_document_graph(&window) {
                Ok((mut g, d)) => {
                    let event = &window.events[0];
                    let local = event.trigger.shift_left(window.sentences[event.trigger_sentence].offset);
                    g.trigger_node = locate_node(&g, event.trigger_sentence, local);
                    (Some(g), d, None)
                }
                Err(e) => (None, GraphDiagnostics::default(), Some(e.to_string())),
            }
        } else {
            (None, GraphDiagnostics::default(), None)
        };
        EventWindow { doc: window, event_index, graph, graph_diagnostics, graph_error }
    }

    /// Windows for every event of every document, in document then event order.
    pub fn build_all(docs: &[DocumentRecord], max_sentences: usize) -> Vec<EventWindow> {
        docs.iter().flat_map(|d| (0..d.events.len()).map(move |e| EventWindow::build(d, e, max_sentences))).collect()
    }

    pub fn event(&self) -> &EventMention {
        &self.doc.events[0]
    }

    fn node_for(&self, arg: &GoldArgument) -> Option<String> {
        let graph = self.graph.as_ref()?;
        let local = arg.span.shift_left(self.doc.sentences[arg.sentence_index].offset);
        locate_node(graph, arg.sentence_index, local)
    }
}

/// Sentence holding the trigger.
pub fn centered_sentence(_doc: &DocumentRecord, event: &EventMention) -> usize {
    event.trigger_sentence
}

/// `[i-1, i, i+1]` clipped to the document.
pub fn neighborhood(doc: &DocumentRecord, i: usize) -> Vec<usize> {
    (i.saturating_sub(1)..=(i + 1).min(doc.sentences.len().saturating_sub(1))).collect()
}

pub fn stage_of_argument(_doc: &DocumentRecord, event: &EventMention, arg: &GoldArgument) -> StageId {
    match arg.sentence_index.abs_diff(event.trigger_sentence) {
        0 => StageId::CentEx,
        1 => StageId::NeighEx,
        _ => StageId::DocEx,
    }
}

/// Centred-sentence gold argument closest to the trigger (ties: leftmost).
pub fn center_argument(event: &EventMention) -> Option<&GoldArgument> {
    event
        .gold_args
        .iter()
        .filter(|a| a.sentence_index == event.trigger_sentence)
        .min_by_key(|a| (a.span.gap(&event.trigger), a.span.start))
}

/// Sentence range `[first, last)` a textual instance of `stage` reads.
pub fn stage_window(doc: &DocumentRecord, event: &EventMention, stage: StageId) -> (usize, usize) {
    let i = event.trigger_sentence;
    match stage {
        StageId::CentEx => (i, i + 1),
        StageId::NeighEx => {
            let n = neighborhood(doc, i);
            (n[0], n[n.len() - 1] + 1)
        }
        StageId::DocEx | StageId::DocExNoClues => (0, doc.sentences.len()),
    }
}

#[derive(Debug, Clone, Default)]
pub struct StageOutput {
    pub instances: Vec<StagedInstance>,
    pub diagnostics: Vec<StageDiagnostic>,
}

/// Emits the instances of one curriculum stage for every window.
///
/// Textual instances carry weight 1, graph instances `alpha`. Output is ordered by
/// (doc_id, event_index, prompt kind, target role).
pub fn emit_stage_instances(
    windows: &[EventWindow],
    stage: StageId,
    templates: &TemplateStore,
    alpha: f64,
) -> Result<StageOutput, StagingError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(StagingError::LossWeight(alpha));
    }
    let mut out = StageOutput::default();
    for w in windows {
        emit_window(w, stage, templates, alpha, &mut out)?;
    }
    out.instances.sort_by(|a, b| {
        (&a.doc_id, a.event_index, a.prompt_kind, &a.target_role).cmp(&(
            &b.doc_id,
            b.event_index,
            b.prompt_kind,
            &b.target_role,
        ))
    });
    Ok(out)
}

fn emit_window(
    w: &EventWindow,
    stage: StageId,
    templates: &TemplateStore,
    alpha: f64,
    out: &mut StageOutput,
) -> Result<(), StagingError> {
    let doc = &w.doc;
    let event = w.event();
    let template = templates.get(&event.event_type)?;
    let (first, last) = stage_window(doc, event, stage);
    let in_range = |a: &&GoldArgument| a.sentence_index >= first && a.sentence_index < last;
    let target_text = render_target(template, event.gold_args.iter().filter(in_range));
    let context = context_text(doc, event, first, last);

    let clue_args: Vec<&GoldArgument> = match stage {
        StageId::CentEx | StageId::DocExNoClues => Vec::new(),
        StageId::NeighEx => event.gold_args.iter().filter(|a| a.sentence_index == event.trigger_sentence).collect(),
        StageId::DocEx => {
            let (nf, nl) = stage_window(doc, event, StageId::NeighEx);
            event.gold_args.iter().filter(|a| a.sentence_index >= nf && a.sentence_index < nl).collect()
        }
    };
    let clues = clues_from_args(clue_args);
    let prompt = fill_clues(template, &clues);
    out.instances.push(StagedInstance {
        stage,
        doc_id: doc.doc_id.clone(),
        event_index: w.event_index,
        prompt_kind: PromptKind::Textual,
        input_text: wrap(&prompt, &context).into_string(),
        target_text: target_text.clone(),
        loss_weight: 1.0,
        target_role: None,
        target_argument: None,
        clue_roles: clues.keys().cloned().collect(),
    });

    let graph_targets: Vec<&GoldArgument> = match stage {
        StageId::CentEx | StageId::NeighEx => return Ok(()),
        StageId::DocEx => {
            event.gold_args.iter().filter(|a| a.sentence_index.abs_diff(event.trigger_sentence) > 1).collect()
        }
        StageId::DocExNoClues => event.gold_args.iter().collect(),
    };
    if graph_targets.is_empty() {
        return Ok(());
    }
    let diag = |message: String| StageDiagnostic { doc_id: doc.doc_id.clone(), event_index: w.event_index, message };
    let Some(graph) = &w.graph else {
        let reason = w.graph_error.clone().unwrap_or_else(|| "no document graph".to_string());
        out.diagnostics.push(diag(format!("{} graph instances skipped: {}", graph_targets.len(), reason)));
        return Ok(());
    };
    let Some(trigger_node) = graph.trigger_node.clone() else {
        out.diagnostics
            .push(diag(format!("{} graph instances skipped: trigger has no graph node", graph_targets.len())));
        return Ok(());
    };
    let center_node = center_argument(event).and_then(|a| w.node_for(a)).unwrap_or_else(|| trigger_node.clone());

    let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
    for arg in graph_targets {
        let Some(target_node) = w.node_for(arg) else {
            out.diagnostics.push(diag(format!("argument `{}` ({}) has no graph node", arg.text, arg.role)));
            continue;
        };
        let prompt = match stage {
            StageId::DocEx => match connecting_subgraph(graph, &trigger_node, &center_node, &target_node) {
                Ok(sub) => {
                    let tokens =
                        dfs_linearize_tagged(&sub, &trigger_node).expect("trigger is a terminal of the subgraph");
                    render_linearized_prompt(&tokens, &target_node)
                }
                Err(e) => {
                    out.diagnostics.push(diag(format!("argument `{}` ({}): {}", arg.text, arg.role, e)));
                    continue;
                }
            },
            _ => match shortest_path(graph, &trigger_node, &target_node) {
                Some(path) => render_path_prompt(graph, &path),
                None => {
                    out.diagnostics
                        .push(diag(format!("argument `{}` ({}) is not connected to the trigger", arg.text, arg.role)));
                    continue;
                }
            },
        };
        if !seen.insert((arg.role.clone(), arg.text.clone())) {
            continue;
        }
        out.instances.push(StagedInstance {
            stage,
            doc_id: doc.doc_id.clone(),
            event_index: w.event_index,
            prompt_kind: crate::staging::PromptKind::Graph,
            input_text: wrap(&prompt, &context).into_string(),
            target_text: target_text.clone(),
            loss_weight: alpha,
            target_role: Some(arg.role.clone()),
            target_argument: Some(arg.text.clone()),
            clue_roles: if stage == StageId::DocEx { clues.keys().cloned().collect() } else { Vec::new() },
        });
    }
    Ok(())
}

/// Line-delimited JSON of the instances, one per line.
pub fn to_jsonl(instances: &[StagedInstance]) -> String {
    let mut s = String::new();
    for i in instances {
        s.push_str(&serde_json::to_string(i).expect("instances serialize"));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Sentence, TokenSpan};

    fn doc_with_args(n_sent: usize, trigger_sentence: usize, arg_sentences: &[usize]) -> DocumentRecord {
        let sentences: Vec<Sentence> = (0..n_sent)
            .map(|i| Sentence {
                index: i,
                offset: i * 3,
                tokens: vec![format!("a{}", i), format!("b{}", i), ".".into()],
            })
            .collect();
        let roles = ["attacker", "target", "instrument", "place"];
        let gold_args = arg_sentences
            .iter()
            .enumerate()
            .map(|(k, &s)| GoldArgument {
                role: roles[k].to_string(),
                span: TokenSpan::new(s * 3, s * 3 + 1),
                text: format!("a{}", s),
                sentence_index: s,
            })
            .collect();
        DocumentRecord {
            doc_id: "d".into(),
            sentences,
            events: vec![EventMention {
                event_type: "attack".into(),
                trigger: TokenSpan::new(trigger_sentence * 3 + 1, trigger_sentence * 3 + 2),
                trigger_sentence,
                gold_args,
                dropped_args: vec![],
            }],
            coref_chains: vec![],
            penman_by_sentence: vec![],
            sentence_offset: 0,
        }
    }

    fn templates() -> TemplateStore {
        TemplateStore::parse(
            r#"{"event_type":"attack","template":"<arg1> attacked <arg2> using <arg3> at <arg4>","roles":["attacker","target","instrument","place"]}"#,
        )
        .unwrap()
    }

    #[test]
    fn neighborhood_clips() {
        let doc = doc_with_args(5, 2, &[]);
        assert_eq!(neighborhood(&doc, 2), vec![1, 2, 3]);
        assert_eq!(neighborhood(&doc, 0), vec![0, 1]);
        assert_eq!(neighborhood(&doc, 4), vec![3, 4]);
        let single = doc_with_args(1, 0, &[]);
        assert_eq!(neighborhood(&single, 0), vec![0]);
        assert_eq!(centered_sentence(&single, &single.events[0]), 0);
    }

    #[test]
    fn stages_by_sentence_distance() {
        let doc = doc_with_args(5, 3, &[3, 2, 1, 4]);
        let e = &doc.events[0];
        let stages: Vec<StageId> = e.gold_args.iter().map(|a| stage_of_argument(&doc, e, a)).collect();
        assert_eq!(stages, vec![StageId::CentEx, StageId::NeighEx, StageId::DocEx, StageId::NeighEx]);
        assert_eq!(centered_sentence(&doc, e), 3);
        assert!(StageId::CentEx < StageId::NeighEx && StageId::DocEx < StageId::DocExNoClues);
    }

    #[test]
    fn event_without_args_gets_unfilled_targets() {
        let doc = doc_with_args(3, 1, &[]);
        let windows = vec![EventWindow::build(&doc, 0, 9)];
        for stage in StageId::ALL {
            let out = emit_stage_instances(&windows, stage, &templates(), 0.7).unwrap();
            assert_eq!(out.instances.len(), 1);
            assert_eq!(out.instances[0].target_text, "<arg1> attacked <arg2> using <arg3> at <arg4>");
        }
    }

    #[test]
    fn neigh_clues_are_centered_gold() {
        let doc = doc_with_args(5, 2, &[2, 1, 2, 4]);
        let windows = vec![EventWindow::build(&doc, 0, 9)];
        let out = emit_stage_instances(&windows, StageId::NeighEx, &templates(), 0.7).unwrap();
        let inst = &out.instances[0];
        assert_eq!(inst.clue_roles, vec!["attacker", "instrument"]);
        assert_eq!(
            inst.input_text,
            "<s> a2 attacked <arg2> using a2 at <arg4> </s> a1 b1 . a2 <trg> b2 <trg> . a3 b3 . </s>"
        );
        assert_eq!(inst.target_text, "a2 attacked a1 using a2 at <arg4>");
    }

    #[test]
    fn cent_window_and_target() {
        let doc = doc_with_args(5, 2, &[2, 1, 2, 4]);
        let windows = vec![EventWindow::build(&doc, 0, 9)];
        let out = emit_stage_instances(&windows, StageId::CentEx, &templates(), 0.7).unwrap();
        assert_eq!(
            out.instances[0].input_text,
            "<s> <arg1> attacked <arg2> using <arg3> at <arg4> </s> a2 <trg> b2 <trg> . </s>"
        );
        assert_eq!(out.instances[0].target_text, "a2 attacked <arg2> using a2 at <arg4>");
    }

    #[test]
    fn graph_instances_need_graphs() {
        let doc = doc_with_args(5, 2, &[2, 1, 2, 4]);
        let windows = vec![EventWindow::build(&doc, 0, 9)];
        let out = emit_stage_instances(&windows, StageId::DocExNoClues, &templates(), 0.7).unwrap();
        assert_eq!(out.instances.len(), 1);
        assert_eq!(out.diagnostics.len(), 1);
    }

    #[test]
    fn missing_template_is_an_error() {
        let mut doc = doc_with_args(2, 0, &[]);
        doc.events[0].event_type = "unknown".into();
        let windows = vec![EventWindow::build(&doc, 0, 9)];
        assert!(matches!(
            emit_stage_instances(&windows, StageId::CentEx, &templates(), 0.7),
            Err(StagingError::Template(TemplateError::Missing(_)))
        ));
        assert!(emit_stage_instances(&windows, StageId::CentEx, &templates(), 0.0).is_err());
    }

    #[test]
    fn center_argument_nearest_then_leftmost() {
        let mut doc = doc_with_args(2, 0, &[0, 0]);
        let e = &mut doc.events[0];
        e.trigger = TokenSpan::new(2, 3);
        e.gold_args[0].span = TokenSpan::new(0, 1); // gap 1
        e.gold_args[1].span = TokenSpan::new(1, 2); // gap 0
        assert_eq!(center_argument(e).unwrap().role, "target");
        e.gold_args[1].span = TokenSpan::new(4, 5); // gap 1, right of trigger
        e.gold_args[0].span = TokenSpan::new(0, 1);
        assert_eq!(center_argument(e).unwrap().role, "attacker");
    }
}
