use std::collections::HashMap;

use super::{parse_filled_template, Generator, GeneratorError};
use crate::prompts::{context_text, render_target, EncoderInput, PromptTemplate, TemplateStore};
use crate::staging::EventWindow;

/// Test generator that answers with the gold fill of whatever window it is shown.
///
/// The context slot of the input is matched against every contiguous sentence range of
/// every known event; the reply is the template filled with the gold arguments inside
/// the matched range. Inputs that match nothing get the unfilled template of the first
/// event whose template fits the prompt, or an empty string.
pub struct OracleGenerator {
    templates: Vec<PromptTemplate>,
    /// Context text to (template index, gold fill), one per contiguous sentence range.
    by_context: HashMap<String, Vec<(usize, String)>>,
}

impl OracleGenerator {
    pub fn new(windows: &[EventWindow], templates: &TemplateStore) -> Self {
        let mut oracle = OracleGenerator { templates: Vec::new(), by_context: HashMap::new() };
        for w in windows {
            let Ok(template) = templates.get(&w.event().event_type) else {
                continue;
            };
            let doc = &w.doc;
            let event = w.event();
            let n = doc.sentences.len();
            let t = oracle.templates.len();
            oracle.templates.push(template.clone());
            for first in 0..n {
                for last in first + 1..=n {
                    let gold = event.gold_args.iter().filter(|a| a.sentence_index >= first && a.sentence_index < last);
                    let fill = render_target(template, gold);
                    oracle.by_context.entry(context_text(doc, event, first, last)).or_default().push((t, fill));
                }
            }
        }
        oracle
    }

    fn prompt_fits(template: &PromptTemplate, prompt: &str) -> bool {
        parse_filled_template(template, prompt).failed.is_empty()
    }
}

impl Generator for OracleGenerator {
    fn generate(&self, input: &str) -> Result<String, GeneratorError> {
        let Some((prompt, context)) = EncoderInput::parse(input) else {
            return Ok(String::new());
        };
        if let Some(candidates) = self.by_context.get(&context) {
            if let Some((_, fill)) = candidates.iter().find(|(t, _)| Self::prompt_fits(&self.templates[*t], &prompt)) {
                return Ok(fill.clone());
            }
        }
        Ok(self.templates.iter().find(|t| Self::prompt_fits(t, &prompt)).map(|t| t.text.clone()).unwrap_or_default())
    }
}
