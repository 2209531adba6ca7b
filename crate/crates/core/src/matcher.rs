//! Text normalization, the mixed Levenshtein/BLEU similarity, and greedy
//! assignment of metadata fields to ordered boxes.

use std::collections::HashMap;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::charstream::MetadataRecord;
use crate::label::Label;
use crate::layout::{detect_language, Language, LayoutParams, TextBox};
use crate::script::is_latin_letter;

#[derive(Debug, thiserror::Error)]
pub enum MatchError {
    #[error("metadata record {0:?} has no populated fields")]
    MissingRecord(String),
    #[error("invalid matcher parameter: {0}")]
    Params(String),
}

/// How the two 0-100 similarity components are combined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Combination {
    Mean,
    Max,
    /// `w * levenshtein + (1 - w) * bleu`, with `w` in `[0, 1]`.
    Weighted {
        levenshtein_weight: f64,
    },
}

impl Combination {
    pub fn combine(self, lev: f64, bleu100: f64) -> f64 {
        match self {
            Combination::Mean => (lev + bleu100) / 2.0,
            Combination::Max => lev.max(bleu100),
            Combination::Weighted { levenshtein_weight: w } => w * lev + (1.0 - w) * bleu100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatcherParams {
    pub threshold: f64,
    pub bleu_max_n: usize,
    pub combination: Combination,
}

impl Default for MatcherParams {
    fn default() -> Self {
        Self { threshold: 80.0, bleu_max_n: 4, combination: Combination::Mean }
    }
}

impl MatcherParams {
    pub fn validate(&self) -> Result<(), MatchError> {
        if !(0.0..=100.0).contains(&self.threshold) {
            return Err(MatchError::Params(format!("threshold must be in [0, 100], got {}", self.threshold)));
        }
        if self.bleu_max_n == 0 {
            return Err(MatchError::Params("bleu_max_n must be >= 1".into()));
        }
        if let Combination::Weighted { levenshtein_weight: w } = self.combination {
            if !(0.0..=1.0).contains(&w) {
                return Err(MatchError::Params(format!("levenshtein_weight must be in [0, 1], got {w}")));
            }
        }
        Ok(())
    }
}

static TEX_SPAN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?is)<TEX>.*?</TEX>").unwrap());
static CID_TOKEN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\(cid:\d+\)|cid:\d+").unwrap());

fn is_marker(c: char) -> bool {
    matches!(c, '*' | '†' | '‡' | '¹' | '²' | '³' | '⁰' | '⁴'..='⁹')
}

fn is_suspect(c: char) -> bool {
    let cp = c as u32;
    c.is_control() && !c.is_whitespace()
        || (0xE000..=0xF8FF).contains(&cp)
        || (0xF0000..=0x10FFFF).contains(&cp)
        || (0xFDD0..=0xFDEF).contains(&cp)
        || cp & 0xFFFE == 0xFFFE
}

/// Cleans extracted text for matching.
///
/// Removes `<TEX>` spans, `cid:N` tokens, superscript digits and reference
/// markers; collapses whitespace; lowercases Latin letters. The flag is
/// false when the text shows encoding damage: a replacement character, or
/// more than 20% control/private-use/noncharacter scalars.
pub fn normalize_text(raw: &str) -> (String, bool) {
    let mut text: String = raw.chars().filter(|&c| !is_marker(c)).collect();
    // Removing one artifact can expose another.
    loop {
        let next = CID_TOKEN.replace_all(&TEX_SPAN.replace_all(&text, " "), "").into_owned();
        if next == text {
            break;
        }
        text = next;
    }
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        for c in word.chars() {
            if is_latin_letter(c) {
                out.extend(c.to_lowercase());
            } else {
                out.push(c);
            }
        }
    }
    let total = out.chars().count();
    let suspect = out.chars().filter(|&c| is_suspect(c)).count();
    let ok = !out.contains('\u{FFFD}') && suspect * 5 <= total;
    (out, ok)
}

/// Unit-cost edit distance over Unicode scalars.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let (short, long) = if a.len() <= b.len() { (&a, &b) } else { (&b, &a) };
    let mut row: Vec<usize> = (0..=short.len()).collect();
    for (i, &lc) in long.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, &sc) in short.iter().enumerate() {
            let cost = usize::from(lc != sc);
            let next = (diag + cost).min(row[j] + 1).min(row[j + 1] + 1);
            diag = row[j + 1];
            row[j + 1] = next;
        }
    }
    row[short.len()]
}

/// `100 * (1 - distance / max_len)`; two empty strings score 100.
pub fn levenshtein_ratio(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 100.0;
    }
    100.0 * (1.0 - edit_distance(a, b) as f64 / longest as f64)
}

fn ngram_counts<'t, 's>(tokens: &'t [&'s str], n: usize) -> HashMap<&'t [&'s str], usize> {
    let mut counts = HashMap::new();
    for w in tokens.windows(n) {
        *counts.entry(w).or_insert(0) += 1;
    }
    counts
}

/// Sentence BLEU over whitespace tokens, unsmoothed, with the n-gram order
/// capped by both lengths.
pub fn bleu(candidate: &str, reference: &str, params: &MatcherParams) -> f64 {
    let cand: Vec<&str> = candidate.split_whitespace().collect();
    let refr: Vec<&str> = reference.split_whitespace().collect();
    let n_max = params.bleu_max_n.min(cand.len()).min(refr.len());
    if n_max == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=n_max {
        let c = ngram_counts(&cand, n);
        let r = ngram_counts(&refr, n);
        let clipped: usize = c.iter().map(|(g, &k)| k.min(r.get(g).copied().unwrap_or(0))).sum();
        if clipped == 0 {
            return 0.0;
        }
        let total = cand.len() + 1 - n;
        log_sum += (clipped as f64 / total as f64).ln() / n_max as f64;
    }
    let bp = if cand.len() >= refr.len() { 1.0 } else { (1.0 - refr.len() as f64 / cand.len() as f64).exp() };
    bp * log_sum.exp()
}

pub fn mixed_similarity(a: &str, b: &str, params: &MatcherParams) -> f64 {
    params.combination.combine(levenshtein_ratio(a, b), 100.0 * bleu(a, b, params))
}

/// Mixed similarity, or `None` when it provably cannot reach `floor`.
///
/// BLEU is computed first; the Levenshtein ratio is bounded by the length
/// difference before paying for the full edit distance.
pub fn similarity_at_least(a: &str, b: &str, floor: f64, params: &MatcherParams) -> Option<f64> {
    let b100 = 100.0 * bleu(a, b, params);
    let (la, lb) = (a.chars().count(), b.chars().count());
    let longest = la.max(lb);
    let lev_bound = if longest == 0 { 100.0 } else { 100.0 * (1.0 - la.abs_diff(lb) as f64 / longest as f64) };
    if params.combination.combine(lev_bound, b100) < floor {
        return None;
    }
    let score = params.combination.combine(levenshtein_ratio(a, b), b100);
    (score >= floor).then_some(score)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBox {
    pub text_box: TextBox,
    pub label: Label,
    /// Similarity to the matched field; 0 for `O`.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPage {
    pub doc_id: String,
    pub journal_id: String,
    pub page_width: f64,
    pub page_height: f64,
    pub boxes: Vec<LabeledBox>,
}

impl LabeledPage {
    /// Every box labeled `O`.
    pub fn unlabeled(doc_id: &str, journal_id: &str, page_width: f64, page_height: f64, boxes: Vec<TextBox>) -> Self {
        Self {
            doc_id: doc_id.to_string(),
            journal_id: journal_id.to_string(),
            page_width,
            page_height,
            boxes: boxes.into_iter().map(|b| LabeledBox { text_box: b, label: Label::O, score: 0.0 }).collect(),
        }
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for b in &self.boxes {
            let rec = LabeledRecord {
                doc_id: self.doc_id.clone(),
                journal_id: self.journal_id.clone(),
                order: b.text_box.order,
                label: b.label,
                score: b.score,
                text: b.text_box.text.clone(),
                x0: b.text_box.x0,
                y0: b.text_box.y0,
                x1: b.text_box.x1,
                y1: b.text_box.y1,
            };
            out.push_str(&serde_json::to_string(&rec).expect("labeled record serialization cannot fail"));
            out.push('\n');
        }
        out
    }
}

/// One line of the labeled output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRecord {
    pub doc_id: String,
    pub journal_id: String,
    pub order: usize,
    pub label: Label,
    pub score: f64,
    pub text: String,
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

/// Reference string per field, normalized; empty references are dropped.
pub fn field_references(record: &MetadataRecord) -> Vec<(Label, String)> {
    let joined = |v: &Option<Vec<String>>, sep: &str| v.as_ref().map(|items| items.join(sep));
    let raw = [
        (Label::TitleKo, record.title_ko.clone()),
        (Label::TitleEn, record.title_en.clone()),
        (Label::OrgKo, joined(&record.affiliations_ko, "; ")),
        (Label::OrgEn, joined(&record.affiliations_en, "; ")),
        (Label::AbstractKo, record.abstract_ko.clone()),
        (Label::AbstractEn, record.abstract_en.clone()),
        (Label::KeywordsKo, joined(&record.keywords_ko, "; ")),
        (Label::KeywordsEn, joined(&record.keywords_en, "; ")),
        (Label::AuthorNameKo, joined(&record.author_names_ko, ", ")),
        (Label::AuthorNameEn, joined(&record.author_names_en, ", ")),
    ];
    raw.into_iter()
        .filter_map(|(label, value)| {
            let (norm, _) = normalize_text(&value?);
            (!norm.is_empty()).then_some((label, norm))
        })
        .collect()
}

fn language_compatible(field: Label, lang: Language) -> bool {
    match lang {
        Language::Mixed => true,
        Language::Ko => field.is_korean(),
        Language::En => !field.is_korean(),
    }
}

/// Labels ordered boxes against a metadata record.
///
/// Every (field, box) pair whose languages agree and whose box text is
/// cleanly encoded is scored; pairs at or above the threshold are assigned
/// greedily by descending score, ties to the earlier box and then the
/// earlier label. Each field and each box is used at most once.
pub fn label_page(
    doc_id: &str,
    journal_id: &str,
    page_size: (f64, f64),
    boxes: Vec<TextBox>,
    record: &MetadataRecord,
    params: &MatcherParams,
    layout: &LayoutParams,
) -> Result<LabeledPage, MatchError> {
    let fields = field_references(record);
    if fields.is_empty() {
        return Err(MatchError::MissingRecord(record.doc_id.clone()));
    }

    let mut candidates: Vec<(f64, usize, Label)> = Vec::new();
    for (bi, b) in boxes.iter().enumerate() {
        let (text, ok) = normalize_text(&b.text);
        if !ok || text.is_empty() {
            continue;
        }
        let lang = detect_language(&text, layout);
        for (label, reference) in &fields {
            if !language_compatible(*label, lang) {
                continue;
            }
            if let Some(score) = similarity_at_least(&text, reference, params.threshold, params) {
                candidates.push((score, bi, *label));
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.0.total_cmp(&a.0).then(boxes[a.1].order.cmp(&boxes[b.1].order)).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
    });

    let mut assigned: Vec<Option<(Label, f64)>> = vec![None; boxes.len()];
    let mut used = [false; 11];
    for (score, bi, label) in candidates {
        if assigned[bi].is_none() && !used[label.index()] {
            assigned[bi] = Some((label, score));
            used[label.index()] = true;
        }
    }

    let mut page = LabeledPage::unlabeled(doc_id, journal_id, page_size.0, page_size.1, boxes);
    for (lb, a) in page.boxes.iter_mut().zip(assigned) {
        if let Some((label, score)) = a {
            lb.label = label;
            lb.score = score;
        }
    }
    Ok(page)
}
