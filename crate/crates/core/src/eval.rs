//! Exact-match scoring of predicted argument strings and trigger–argument distance buckets.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::{EventMention, GoldArgument};
use crate::staging::EventWindow;

/// Whitespace-collapsed comparison; case is preserved.
pub fn normalize(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn exact_match(pred: &str, gold: &str) -> bool {
    normalize(pred) == normalize(gold)
}

/// Signed sentence distance from trigger to argument.
pub fn sentence_distance(event: &EventMention, arg: &GoldArgument) -> i64 {
    arg.sentence_index as i64 - event.trigger_sentence as i64
}

pub fn clamp_distance(d: i64) -> i64 {
    d.clamp(-2, 2)
}

pub fn distance_bucket(event: &EventMention, arg: &GoldArgument) -> i64 {
    clamp_distance(sentence_distance(event, arg))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub doc_id: String,
    pub event_index: usize,
    pub role: String,
    pub predictions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldRecord {
    pub doc_id: String,
    pub event_index: usize,
    pub role: String,
    pub text: String,
    /// Unclamped sentence distance to the trigger.
    pub distance: i64,
    /// False for arguments removed by truncation.
    pub in_window: bool,
}

/// Gold records of every window, including arguments dropped by truncation.
pub fn gold_records(windows: &[EventWindow]) -> Vec<GoldRecord> {
    let mut out = Vec::new();
    for w in windows {
        let event = w.event();
        let trigger_abs = (event.trigger_sentence + w.doc.sentence_offset) as i64;
        for a in &event.gold_args {
            out.push(GoldRecord {
                doc_id: w.doc.doc_id.clone(),
                event_index: w.event_index,
                role: a.role.clone(),
                text: a.text.clone(),
                distance: sentence_distance(event, a),
                in_window: true,
            });
        }
        for a in &event.dropped_args {
            out.push(GoldRecord {
                doc_id: w.doc.doc_id.clone(),
                event_index: w.event_index,
                role: a.role.clone(),
                text: a.text.clone(),
                distance: a.sentence_index as i64 - trigger_abs,
                in_window: false,
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub predicted: usize,
    pub gold: usize,
    pub correct: usize,
    /// Per clamped distance bucket (−2..=2). Gold and correct counts add up to the totals;
    /// unmatched predictions are charged to the bucket of the first gold mention of their
    /// role, or to no bucket when the role has no gold.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub by_distance: BTreeMap<i64, ScoreReport>,
    /// Gold counts per unclamped distance.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub raw_distance_gold: BTreeMap<i64, usize>,
}

impl ScoreReport {
    pub fn from_counts(predicted: usize, gold: usize, correct: usize) -> Self {
        let precision = if predicted > 0 { correct as f64 / predicted as f64 } else { 0.0 };
        let recall = if gold > 0 { correct as f64 / gold as f64 } else { 0.0 };
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        ScoreReport {
            precision,
            recall,
            f1,
            predicted,
            gold,
            correct,
            by_distance: BTreeMap::new(),
            raw_distance_gold: BTreeMap::new(),
        }
    }

    /// Plain-text table with the overall scores and the distance breakdown.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<8} {:>9} {:>6} {:>8} {:>7} {:>7} {:>7}",
            "bucket", "predicted", "gold", "correct", "P", "R", "F1"
        );
        let mut row = |name: &str, r: &ScoreReport| {
            let _ = writeln!(
                s,
                "{:<8} {:>9} {:>6} {:>8} {:>7.4} {:>7.4} {:>7.4}",
                name, r.predicted, r.gold, r.correct, r.precision, r.recall, r.f1
            );
        };
        row("all", self);
        for (d, r) in &self.by_distance {
            row(&format!("{:+}", d), r);
        }
        if !self.raw_distance_gold.is_empty() {
            let _ = writeln!(s);
            let _ = writeln!(s, "gold arguments by unclamped distance");
            for (d, n) in &self.raw_distance_gold {
                let _ = writeln!(s, "{:>+4} {:>7}", d, n);
            }
        }
        s
    }
}

type Key = (String, usize, String);

#[derive(Default, Clone, Copy)]
struct Counts {
    predicted: usize,
    gold: usize,
    correct: usize,
}

/// Scores predictions against gold mentions keyed by (doc, event, role).
///
/// Within a key every prediction can match at most one gold mention and vice versa, so
/// the number correct per key is the size of a maximum matching under [`exact_match`].
/// Gold records with `in_window == false` are skipped unless `include_dropped` is set.
pub fn score(predictions: &[PredictionRecord], golds: &[GoldRecord], include_dropped: bool) -> ScoreReport {
    let mut pred_by_key: BTreeMap<Key, Vec<String>> = BTreeMap::new();
    for p in predictions {
        pred_by_key
            .entry((p.doc_id.clone(), p.event_index, p.role.clone()))
            .or_default()
            .extend(p.predictions.iter().map(|s| normalize(s)).filter(|s| !s.is_empty()));
    }
    let mut gold_by_key: BTreeMap<Key, Vec<(String, i64)>> = BTreeMap::new();
    let mut raw: BTreeMap<i64, usize> = BTreeMap::new();
    for g in golds.iter().filter(|g| include_dropped || g.in_window) {
        gold_by_key
            .entry((g.doc_id.clone(), g.event_index, g.role.clone()))
            .or_default()
            .push((normalize(&g.text), g.distance));
        *raw.entry(g.distance).or_default() += 1;
    }
    // gold mentions in a stable order so bucket attribution does not depend on input order
    for v in gold_by_key.values_mut() {
        v.sort();
    }

    let mut total = Counts::default();
    let mut buckets: BTreeMap<i64, Counts> = (-2..=2).map(|d| (d, Counts::default())).collect();
    let mut keys: Vec<&Key> = pred_by_key.keys().chain(gold_by_key.keys()).collect();
    keys.sort();
    keys.dedup();
    for key in keys {
        let preds = pred_by_key.get(key).map(Vec::as_slice).unwrap_or(&[]);
        let golds = gold_by_key.get(key).map(Vec::as_slice).unwrap_or(&[]);
        let mut pred_counts: HashMap<&str, usize> = HashMap::new();
        for p in preds {
            *pred_counts.entry(p.as_str()).or_default() += 1;
        }
        let mut matched = 0;
        for (text, d) in golds {
            let b = buckets.get_mut(&clamp_distance(*d)).unwrap();
            b.gold += 1;
            if let Some(c) = pred_counts.get_mut(text.as_str()).filter(|c| **c > 0) {
                *c -= 1;
                matched += 1;
                b.correct += 1;
                b.predicted += 1;
            }
        }
        let unmatched = preds.len() - matched;
        if let Some((_, d)) = golds.first() {
            buckets.get_mut(&clamp_distance(*d)).unwrap().predicted += unmatched;
        }
        total.predicted += preds.len();
        total.gold += golds.len();
        total.correct += matched;
    }
    let mut report = ScoreReport::from_counts(total.predicted, total.gold, total.correct);
    report.by_distance =
        buckets.into_iter().map(|(d, c)| (d, ScoreReport::from_counts(c.predicted, c.gold, c.correct))).collect();
    report.raw_distance_gold = raw;
    report
}
