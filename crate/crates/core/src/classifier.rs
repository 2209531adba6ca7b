//! Baseline box classifier (multinomial naive Bayes over text tokens and/or
//! coarse position features) and the evaluation harness.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::FinetuneRow;
use crate::label::{Label, UnknownLabel};
use crate::matcher::normalize_text;

const MODEL_HEADER: &str = "lame.nb/1";
const GRID: f64 = 10.0;
const RANK_BUCKETS: usize = 20;

#[derive(Debug, thiserror::Error)]
pub enum ClassifierError {
    #[error(transparent)]
    UnknownLabel(#[from] UnknownLabel),
    #[error("no training rows")]
    EmptyTraining,
    #[error("feature spec enables neither text nor position")]
    EmptySpec,
    #[error("model uses position features but no geometry was supplied")]
    MissingPosition,
    #[error("predictions and golds differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("nothing to evaluate")]
    EmptyEvaluation,
    #[error("split leaves the {0} side empty")]
    EmptySide(&'static str),
    #[error("invalid model file: {0}")]
    ModelFormat(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub use_text: bool,
    pub use_position: bool,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        Self::TEXT
    }
}

impl FeatureSpec {
    pub const TEXT: FeatureSpec = FeatureSpec { use_text: true, use_position: false };
    pub const POSITION: FeatureSpec = FeatureSpec { use_text: false, use_position: true };
    pub const BOTH: FeatureSpec = FeatureSpec { use_text: true, use_position: true };

    pub fn validate(&self) -> Result<(), ClassifierError> {
        if self.use_text || self.use_position {
            Ok(())
        } else {
            Err(ClassifierError::EmptySpec)
        }
    }
}

/// Box geometry needed by the position features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxGeometry {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
    pub page_width: f64,
    pub page_height: f64,
    pub order: usize,
}

impl BoxGeometry {
    pub fn of_row(row: &FinetuneRow) -> Self {
        Self {
            x0: row.x0,
            y0: row.y0,
            x1: row.x1,
            y1: row.y1,
            page_width: row.page_width,
            page_height: row.page_height,
            order: row.order,
        }
    }
}

fn grid_cell(center: f64, extent: f64) -> usize {
    if extent <= 0.0 {
        return 0;
    }
    ((center / extent * GRID).floor().max(0.0) as usize).min(GRID as usize - 1)
}

/// Feature strings for one box.
pub fn features(spec: FeatureSpec, text: &str, position: Option<&BoxGeometry>) -> Vec<String> {
    let mut out = Vec::new();
    if spec.use_text {
        let (norm, _) = normalize_text(text);
        out.extend(norm.split_whitespace().map(|t| format!("t:{t}")));
    }
    if spec.use_position {
        if let Some(g) = position {
            let cx = grid_cell((g.x0 + g.x1) / 2.0, g.page_width);
            let cy = grid_cell((g.y0 + g.y1) / 2.0, g.page_height);
            let rank = if g.order >= RANK_BUCKETS { format!("{RANK_BUCKETS}+") } else { g.order.to_string() };
            // One joint feature: as separate features, cell and rank each
            // vote for whichever journal uses them most, and outvote the
            // combination that actually identifies the layout.
            out.push(format!("p:{cx},{cy}|r:{rank}"));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub spec: FeatureSpec,
    /// Training rows per label, indexed by `Label::index`.
    pub class_docs: [u64; 11],
    /// Feature count totals per label.
    pub class_totals: [u64; 11],
    pub counts: BTreeMap<String, [u64; 11]>,
}

impl Model {
    pub fn vocabulary_size(&self) -> usize {
        self.counts.len()
    }

    pub fn priors(&self) -> [f64; 11] {
        let total: u64 = self.class_docs.iter().sum();
        let mut p = [0.0; 11];
        for (i, &c) in self.class_docs.iter().enumerate() {
            p[i] = c as f64 / total as f64;
        }
        p
    }

    /// Flat, versioned text form.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MODEL_HEADER}");
        let _ =
            writeln!(out, "spec\ttext={}\tposition={}", u8::from(self.spec.use_text), u8::from(self.spec.use_position));
        for label in Label::ALL {
            let i = label.index();
            let _ = writeln!(out, "class\t{label}\t{}\t{}", self.class_docs[i], self.class_totals[i]);
        }
        for (feature, counts) in &self.counts {
            for label in Label::ALL {
                let c = counts[label.index()];
                if c > 0 {
                    let _ = writeln!(out, "feat\t{label}\t{feature}\t{c}");
                }
            }
        }
        out
    }

    pub fn from_file_string(content: &str) -> Result<Self, ClassifierError> {
        let bad = |msg: String| ClassifierError::ModelFormat(msg);
        let mut lines = content.lines();
        if lines.next() != Some(MODEL_HEADER) {
            return Err(bad(format!("missing {MODEL_HEADER} header")));
        }
        let mut spec = None;
        let mut class_docs = [0u64; 11];
        let mut class_totals = [0u64; 11];
        let mut counts: BTreeMap<String, [u64; 11]> = BTreeMap::new();
        let num = |s: &str| s.parse::<u64>().map_err(|e| bad(format!("{s:?}: {e}")));
        for (n, line) in lines.enumerate() {
            let cols: Vec<&str> = line.split('\t').collect();
            match cols.as_slice() {
                ["spec", t, p] => {
                    spec = Some(FeatureSpec { use_text: *t == "text=1", use_position: *p == "position=1" });
                }
                ["class", label, docs, total] => {
                    let i = label.parse::<Label>()?.index();
                    class_docs[i] = num(docs)?;
                    class_totals[i] = num(total)?;
                }
                ["feat", label, feature, c] => {
                    let i = label.parse::<Label>()?.index();
                    counts.entry(feature.to_string()).or_insert([0; 11])[i] = num(c)?;
                }
                [""] => {}
                _ => return Err(bad(format!("line {}: unrecognized record", n + 2))),
            }
        }
        let spec = spec.ok_or_else(|| bad("missing spec line".into()))?;
        spec.validate()?;
        if class_docs.iter().sum::<u64>() == 0 {
            return Err(ClassifierError::EmptyTraining);
        }
        Ok(Self { spec, class_docs, class_totals, counts })
    }
}

/// A training example as a (text, label string, geometry) triple.
pub struct TrainExample<'a> {
    pub text: &'a str,
    pub label: &'a str,
    pub position: Option<BoxGeometry>,
}

/// Fits the model on rows in order.
pub fn train(rows: &[FinetuneRow], spec: FeatureSpec) -> Result<Model, ClassifierError> {
    let examples: Vec<TrainExample<'_>> = rows
        .iter()
        .map(|r| TrainExample { text: &r.text, label: r.label.as_str(), position: Some(BoxGeometry::of_row(r)) })
        .collect();
    train_examples(&examples, spec)
}

pub fn train_examples(examples: &[TrainExample<'_>], spec: FeatureSpec) -> Result<Model, ClassifierError> {
    spec.validate()?;
    if examples.is_empty() {
        return Err(ClassifierError::EmptyTraining);
    }
    let mut class_docs = [0u64; 11];
    let mut class_totals = [0u64; 11];
    let mut counts: BTreeMap<String, [u64; 11]> = BTreeMap::new();
    for ex in examples {
        let label: Label = ex.label.parse()?;
        if spec.use_position && ex.position.is_none() {
            return Err(ClassifierError::MissingPosition);
        }
        let i = label.index();
        class_docs[i] += 1;
        for f in features(spec, ex.text, ex.position.as_ref()) {
            counts.entry(f).or_insert([0; 11])[i] += 1;
            class_totals[i] += 1;
        }
    }
    Ok(Model { spec, class_docs, class_totals, counts })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: Label,
    /// Posterior per label in listing order; sums to 1.
    pub posteriors: [f64; 11],
}

/// Posterior over labels. Features never seen in training count with the
/// smoothing mass only; labels with no training rows get probability 0.
pub fn predict(model: &Model, text: &str, position: Option<&BoxGeometry>) -> Result<Prediction, ClassifierError> {
    if model.spec.use_position && position.is_none() {
        return Err(ClassifierError::MissingPosition);
    }
    let feats = features(model.spec, text, position);
    let vocab = model.vocabulary_size() as f64;
    let priors = model.priors();
    let mut log_post = [f64::NEG_INFINITY; 11];
    for label in Label::ALL {
        let i = label.index();
        if priors[i] == 0.0 {
            continue;
        }
        let denom = (model.class_totals[i] as f64 + vocab).ln();
        let mut lp = priors[i].ln();
        for f in &feats {
            let c = model.counts.get(f).map_or(0, |c| c[i]);
            lp += ((c + 1) as f64).ln() - denom;
        }
        log_post[i] = lp;
    }
    let max = log_post.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut posteriors = [0.0; 11];
    let mut total = 0.0;
    for i in 0..11 {
        if log_post[i].is_finite() {
            posteriors[i] = (log_post[i] - max).exp();
            total += posteriors[i];
        }
    }
    for p in &mut posteriors {
        *p /= total;
    }
    // First maximum in listing order wins exact ties.
    let mut best = 0;
    for i in 1..11 {
        if log_post[i] > log_post[best] {
            best = i;
        }
    }
    Ok(Prediction { label: Label::ALL[best], posteriors })
}

/// Partitions rows by journal.
pub fn split_by_journal(
    rows: &[FinetuneRow],
    test_journals: &BTreeSet<String>,
) -> Result<(Vec<FinetuneRow>, Vec<FinetuneRow>), ClassifierError> {
    let (test, train): (Vec<_>, Vec<_>) = rows.iter().cloned().partition(|r| test_journals.contains(&r.journal_id));
    if train.is_empty() {
        return Err(ClassifierError::EmptySide("train"));
    }
    if test.is_empty() {
        return Err(ClassifierError::EmptySide("test"));
    }
    Ok((train, test))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelScore {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub labels: Vec<LabelScore>,
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub split: String,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

// Known labels first in listing order, then anything else alphabetically.
fn label_rank(label: &str) -> (usize, &str) {
    match label.parse::<Label>() {
        Ok(l) => (l.index(), ""),
        Err(_) => (Label::ALL.len(), label),
    }
}

/// Per-label precision/recall/F1 with micro (pooled) and macro (mean over
/// labels with gold support) aggregates.
pub fn evaluate<S: AsRef<str>>(predictions: &[S], golds: &[S]) -> Result<EvalReport, ClassifierError> {
    if predictions.len() != golds.len() {
        return Err(ClassifierError::LengthMismatch(predictions.len(), golds.len()));
    }
    if golds.is_empty() {
        return Err(ClassifierError::EmptyEvaluation);
    }
    #[derive(Default)]
    struct Tally {
        tp: usize,
        fp: usize,
        fn_: usize,
    }
    let mut tallies: HashMap<&str, Tally> = HashMap::new();
    for (p, g) in predictions.iter().zip(golds) {
        let (p, g) = (p.as_ref(), g.as_ref());
        if p == g {
            tallies.entry(g).or_default().tp += 1;
        } else {
            tallies.entry(p).or_default().fp += 1;
            tallies.entry(g).or_default().fn_ += 1;
        }
    }
    let mut names: Vec<&str> = tallies.keys().copied().collect();
    names.sort_by_key(|n| label_rank(n));

    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    let mut labels = Vec::with_capacity(names.len());
    for name in names {
        let t = &tallies[name];
        tp += t.tp;
        fp += t.fp;
        fn_ += t.fn_;
        let precision = ratio(t.tp, t.tp + t.fp);
        let recall = ratio(t.tp, t.tp + t.fn_);
        labels.push(LabelScore {
            label: name.to_string(),
            precision,
            recall,
            f1: f1(precision, recall),
            support: t.tp + t.fn_,
        });
    }
    let micro_f1 = f1(ratio(tp, tp + fp), ratio(tp, tp + fn_));
    let supported: Vec<f64> = labels.iter().filter(|l| l.support > 0).map(|l| l.f1).collect();
    let macro_f1 = supported.iter().sum::<f64>() / supported.len() as f64;
    Ok(EvalReport { labels, micro_f1, macro_f1, split: String::new() })
}

impl EvalReport {
    pub fn with_split(mut self, split: impl Into<String>) -> Self {
        self.split = split.into();
        self
    }

    /// Aligned text table: one row per label, then the two aggregates.
    pub fn to_table(&self) -> String {
        let width = self.labels.iter().map(|l| l.label.len()).max().unwrap_or(0).max("Macro-F1".len());
        let mut out = String::new();
        if !self.split.is_empty() {
            let _ = writeln!(out, "# {}", self.split);
        }
        let _ =
            writeln!(out, "{:<width$}  {:>9}  {:>6}  {:>6}  {:>7}", "label", "precision", "recall", "f1", "support");
        for l in &self.labels {
            let _ = writeln!(
                out,
                "{:<width$}  {:>9.4}  {:>6.4}  {:>6.4}  {:>7}",
                l.label, l.precision, l.recall, l.f1, l.support
            );
        }
        let _ = writeln!(out, "{:<width$}  {:>9}  {:>6}  {:>6.4}", "Micro-F1", "", "", self.micro_f1);
        let _ = writeln!(out, "{:<width$}  {:>9}  {:>6}  {:>6.4}", "Macro-F1", "", "", self.macro_f1);
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex<'a>(text: &'a str, label: &'a str) -> TrainExample<'a> {
        TrainExample { text, label, position: None }
    }

    #[test]
    fn counts_vocabulary() {
        let m =
            train_examples(&[ex("deep learning", "title_en"), ex("심층 학습", "title_ko")], FeatureSpec::TEXT).unwrap();
        assert_eq!(m.vocabulary_size(), 4);
        let dup = train_examples(
            &[ex("deep learning", "title_en"), ex("deep learning", "title_en"), ex("심층 학습", "title_ko")],
            FeatureSpec::TEXT,
        )
        .unwrap();
        assert_eq!(dup.vocabulary_size(), 4);
        assert_ne!(dup.counts, m.counts);
    }

    #[test]
    fn unknown_label_rejected() {
        let err = train_examples(&[ex("x", "titl_en")], FeatureSpec::TEXT).unwrap_err();
        assert!(matches!(err, ClassifierError::UnknownLabel(_)));
    }

    #[test]
    fn predicts_from_token_evidence() {
        let m =
            train_examples(&[ex("deep learning", "title_en"), ex("심층 학습", "title_ko")], FeatureSpec::TEXT).unwrap();
        let p = predict(&m, "deep", None).unwrap();
        assert_eq!(p.label, Label::TitleEn);
        // (1+1)/(2+4) against (0+1)/(2+4) with equal priors.
        assert!((p.posteriors[Label::TitleEn.index()] - 2.0 / 3.0).abs() < 1e-12);
        assert!((p.posteriors.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_text_falls_back_to_priors() {
        let m = train_examples(&[ex("a", "O"), ex("b", "O"), ex("c", "title_en")], FeatureSpec::TEXT).unwrap();
        assert_eq!(predict(&m, "", None).unwrap().label, Label::O);
        let p = predict(&m, "zzz qqq", None).unwrap();
        assert!((p.posteriors.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.posteriors.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn position_required_when_enabled() {
        let geo =
            BoxGeometry { x0: 0.0, y0: 700.0, x1: 100.0, y1: 720.0, page_width: 595.0, page_height: 842.0, order: 0 };
        let rows = [TrainExample { text: "x", label: "title_en", position: Some(geo) }];
        let m = train_examples(&rows, FeatureSpec::POSITION).unwrap();
        assert!(matches!(predict(&m, "x", None), Err(ClassifierError::MissingPosition)));
        assert_eq!(predict(&m, "x", Some(&geo)).unwrap().label, Label::TitleEn);
        assert_eq!(features(FeatureSpec::POSITION, "x", Some(&geo)), ["p:0,8|r:0"]);
    }

    #[test]
    fn model_file_round_trip() {
        let m =
            train_examples(&[ex("deep learning", "title_en"), ex("심층 학습", "title_ko")], FeatureSpec::TEXT).unwrap();
        let back = Model::from_file_string(&m.to_file_string()).unwrap();
        assert_eq!(m, back);
        assert!(Model::from_file_string("nope\n").is_err());
    }

    #[test]
    fn hand_computed_report() {
        let r = evaluate(&["A", "A", "A", "B"], &["A", "A", "B", "B"]).unwrap();
        let a = &r.labels[0];
        let b = &r.labels[1];
        assert_eq!((a.label.as_str(), b.label.as_str()), ("A", "B"));
        assert!((a.precision - 2.0 / 3.0).abs() < 1e-15 && a.recall == 1.0 && (a.f1 - 0.8).abs() < 1e-15);
        assert!(b.precision == 1.0 && b.recall == 0.5 && (b.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.macro_f1 - (0.8 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        assert!((r.micro_f1 - 0.75).abs() < 1e-15);
    }

    #[test]
    fn perfect_and_degenerate_reports() {
        let r = evaluate(&["x", "y"], &["x", "y"]).unwrap();
        assert!(r.labels.iter().all(|l| l.f1 == 1.0));
        let r = evaluate(&["a", "a", "a", "a"], &["a", "a", "b", "b"]).unwrap();
        assert!((r.labels[0].f1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.labels[1].f1, 0.0);
        assert!((r.macro_f1 - 1.0 / 3.0).abs() < 1e-15);
        assert!(matches!(evaluate(&["a"], &["a", "b"]), Err(ClassifierError::LengthMismatch(1, 2))));
    }

    #[test]
    fn macro_ignores_prediction_only_labels() {
        let r = evaluate(&["a", "c"], &["a", "b"]).unwrap();
        assert_eq!(r.labels.len(), 3);
        assert!((r.macro_f1 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn report_orders_known_labels_first() {
        let r = evaluate(&["zzz", "title_en", "O"], &["zzz", "title_en", "O"]).unwrap();
        let names: Vec<_> = r.labels.iter().map(|l| l.label.as_str()).collect();
        assert_eq!(names, ["O", "title_en", "zzz"]);
        let table = r.to_table();
        assert!(table.contains("Micro-F1") && table.contains("Macro-F1"));
        let json: EvalReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(json, r);
    }

    fn row(journal: &str) -> FinetuneRow {
        FinetuneRow {
            text: "t".into(),
            label: Label::O,
            doc_id: "d".into(),
            journal_id: journal.into(),
            order: 0,
            x0: 0.0,
            y0: 0.0,
            x1: 1.0,
            y1: 1.0,
            page_width: 10.0,
            page_height: 10.0,
        }
    }

    #[test]
    fn journal_split() {
        let rows = vec![row("a"), row("b"), row("c"), row("c")];
        let test: BTreeSet<String> = ["c".to_string()].into();
        let (train, held) = split_by_journal(&rows, &test).unwrap();
        assert_eq!(train.len(), 2);
        assert!(held.iter().all(|r| r.journal_id == "c") && held.len() == 2);
        let all: BTreeSet<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        assert!(matches!(split_by_journal(&rows, &all), Err(ClassifierError::EmptySide("train"))));
        assert!(matches!(split_by_journal(&rows, &BTreeSet::new()), Err(ClassifierError::EmptySide("test"))));
    }
}
