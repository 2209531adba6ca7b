//! Text line and text box reconstruction from glyphs, plus reading order.
//!
//! Lines are built from y-bands of glyphs split at wide horizontal gaps.
//! Boxes are built by walking lines top to bottom inside column groups and
//! merging a line into the box above it when the vertical gap, indentation,
//! width and per-language font rules all agree.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::charstream::{CharGlyph, Page};
use crate::label::Label;
use crate::script::{script_counts, script_of, Script};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid layout parameter: {0}")]
pub struct LayoutParamError(pub String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayoutParams {
    /// Glyphs share a y-band when their bottoms differ by at most this
    /// fraction of the smaller glyph size.
    pub line_band_factor: f64,
    /// A line splits where the horizontal gap reaches this fraction of the
    /// larger neighbouring glyph size.
    pub gap_factor: f64,
    pub indent_factor: f64,
    pub width_slack_factor: f64,
    /// Minimum x-overlap (relative to the narrower line) for two lines to be
    /// vertical merge candidates.
    pub column_overlap_min: f64,
    pub hangul_ratio_threshold: f64,
}

impl Default for LayoutParams {
    fn default() -> Self {
        Self {
            line_band_factor: 0.5,
            gap_factor: 1.0,
            indent_factor: 1.0,
            width_slack_factor: 1.0,
            column_overlap_min: 0.3,
            hangul_ratio_threshold: 0.3,
        }
    }
}

impl LayoutParams {
    pub fn validate(&self) -> Result<(), LayoutParamError> {
        let factors = [
            ("line_band_factor", self.line_band_factor),
            ("gap_factor", self.gap_factor),
            ("indent_factor", self.indent_factor),
            ("width_slack_factor", self.width_slack_factor),
        ];
        for (name, v) in factors {
            if !(v.is_finite() && v > 0.0) {
                return Err(LayoutParamError(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.column_overlap_min > 0.0 && self.column_overlap_min <= 1.0) {
            return Err(LayoutParamError(format!(
                "column_overlap_min must be in (0, 1], got {}",
                self.column_overlap_min
            )));
        }
        if !(self.hangul_ratio_threshold > 0.0 && self.hangul_ratio_threshold < 1.0) {
            return Err(LayoutParamError(format!(
                "hangul_ratio_threshold must be in (0, 1), got {}",
                self.hangul_ratio_threshold
            )));
        }
        Ok(())
    }
}

/// Font identity used by the font rule: name without subset prefix, plus
/// style flags.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FontKey {
    pub name: Arc<str>,
    pub bold: bool,
    pub italic: bool,
}

impl FontKey {
    pub fn of(glyph: &CharGlyph) -> Self {
        Self { name: Arc::from(strip_subset_prefix(&glyph.font)), bold: glyph.bold, italic: glyph.italic }
    }
}

/// Drops a PDF subset tag (`ABCDEF+Name` -> `Name`).
pub fn strip_subset_prefix(font: &str) -> &str {
    match font.split_once('+') {
        Some((tag, rest)) if tag.len() == 6 && tag.bytes().all(|b| b.is_ascii_uppercase()) => rest,
        _ => font,
    }
}

/// Modal font per language.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FontProfile {
    pub ko: Option<FontKey>,
    pub en: Option<FontKey>,
}

impl FontProfile {
    pub fn from_glyphs<'a>(glyphs: impl IntoIterator<Item = &'a CharGlyph>) -> Self {
        let mut ko: HashMap<FontKey, usize> = HashMap::new();
        let mut en: HashMap<FontKey, usize> = HashMap::new();
        for g in glyphs {
            match script_of(g.text) {
                Some(Script::Hangul) => *ko.entry(FontKey::of(g)).or_default() += 1,
                Some(Script::Latin) => *en.entry(FontKey::of(g)).or_default() += 1,
                None => {}
            }
        }
        Self { ko: modal(ko), en: modal(en) }
    }

    fn get(&self, script: Script) -> Option<&FontKey> {
        match script {
            Script::Hangul => self.ko.as_ref(),
            Script::Latin => self.en.as_ref(),
        }
    }

    /// True when every language present in both profiles has the same modal
    /// font.
    pub fn compatible(&self, other: &FontProfile) -> bool {
        [Script::Hangul, Script::Latin].into_iter().all(|s| match (self.get(s), other.get(s)) {
            (Some(a), Some(b)) => a == b,
            _ => true,
        })
    }
}

// Highest count wins; ties go to the smallest key.
fn modal(counts: HashMap<FontKey, usize>) -> Option<FontKey> {
    counts.into_iter().max_by(|(ka, ca), (kb, cb)| ca.cmp(cb).then_with(|| kb.cmp(ka))).map(|(k, _)| k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextLine {
    /// Indices into `Page::chars`, parallel to `chars`.
    pub glyphs: Vec<usize>,
    pub chars: Vec<CharGlyph>,
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
    pub dominant_size: f64,
    pub text: String,
    pub fonts: FontProfile,
}

impl TextLine {
    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    fn from_glyphs(page: &Page, members: &[usize], params: &LayoutParams) -> Self {
        let chars: Vec<CharGlyph> = members.iter().map(|&i| page.chars[i].clone()).collect();
        let (x0, y0, x1, y1) = union_bbox(chars.iter().map(|g| (g.x0, g.y0, g.x1, g.y1)));

        let mut text = String::new();
        for (k, g) in chars.iter().enumerate() {
            if k > 0 {
                let prev = &chars[k - 1];
                let threshold = params.gap_factor * prev.size.max(g.size);
                if g.x0 - prev.x1 >= 0.25 * threshold {
                    push_space(&mut text);
                }
            }
            if g.text.is_whitespace() {
                push_space(&mut text);
            } else {
                text.push(g.text);
            }
        }
        let text = text.trim().to_string();

        Self {
            glyphs: members.to_vec(),
            dominant_size: modal_size(&chars),
            fonts: FontProfile::from_glyphs(&chars),
            chars,
            x0,
            y0,
            x1,
            y1,
            text,
        }
    }
}

fn push_space(text: &mut String) {
    if !text.is_empty() && !text.ends_with(' ') {
        text.push(' ');
    }
}

// Most frequent glyph size; ties go to the larger size.
fn modal_size(chars: &[CharGlyph]) -> f64 {
    let mut counts: Vec<(f64, usize)> = Vec::new();
    for g in chars {
        match counts.iter_mut().find(|(s, _)| *s == g.size) {
            Some((_, c)) => *c += 1,
            None => counts.push((g.size, 1)),
        }
    }
    counts.into_iter().max_by(|a, b| a.1.cmp(&b.1).then(a.0.total_cmp(&b.0))).map(|(s, _)| s).unwrap_or(0.0)
}

fn union_bbox(boxes: impl IntoIterator<Item = (f64, f64, f64, f64)>) -> (f64, f64, f64, f64) {
    boxes
        .into_iter()
        .fold((f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY), |(a, b, c, d), (x0, y0, x1, y1)| {
            (a.min(x0), b.min(y0), c.max(x1), d.max(y1))
        })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextBox {
    /// Member lines, top to bottom.
    pub lines: Vec<TextLine>,
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
    pub text: String,
    pub font_profile: FontProfile,
    /// Reading-order rank; assigned by [`order_boxes`].
    pub order: usize,
}

impl TextBox {
    fn from_lines(lines: Vec<TextLine>) -> Self {
        let (x0, y0, x1, y1) = union_bbox(lines.iter().map(|l| (l.x0, l.y0, l.x1, l.y1)));
        let text = lines.iter().map(|l| l.text.as_str()).filter(|t| !t.is_empty()).collect::<Vec<_>>().join(" ");
        let font_profile = FontProfile::from_glyphs(lines.iter().flat_map(|l| l.chars.iter()));
        Self { lines, x0, y0, x1, y1, text, font_profile, order: 0 }
    }

    pub fn glyph_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.lines.iter().flat_map(|l| l.glyphs.iter().copied())
    }

    pub fn glyph_count(&self) -> usize {
        self.lines.iter().map(|l| l.glyphs.len()).sum()
    }
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Smaller root wins so the result is order-independent.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Groups glyphs into text lines.
///
/// Returned lines are sorted top to bottom (descending top edge), then left
/// to right.
pub fn build_lines(page: &Page, params: &LayoutParams) -> Vec<TextLine> {
    let chars = &page.chars;
    let mut by_y: Vec<usize> = (0..chars.len()).collect();
    by_y.sort_by(|&a, &b| chars[a].y0.total_cmp(&chars[b].y0).then(a.cmp(&b)));

    let mut bands = DisjointSet::new(chars.len());
    // Glyphs with identical bottoms always share a band. A group relates to
    // another glyph exactly when its largest member does, since
    // min(size_i, size_j) grows with size_i; so each group is scanned once
    // as (bottom, largest size, representative).
    let mut reps: Vec<(f64, f64, usize)> = Vec::new();
    for &i in &by_y {
        let g = &chars[i];
        match reps.last_mut() {
            Some((y0, size, rep)) if *y0 == g.y0 => {
                bands.union(*rep, i);
                *size = size.max(g.size);
            }
            _ => reps.push((g.y0, g.size, i)),
        }
    }
    for (k, &(y0, size, i)) in reps.iter().enumerate() {
        let reach = params.line_band_factor * size;
        for &(yj, sj, j) in &reps[k + 1..] {
            let dy = yj - y0;
            if dy > reach {
                break;
            }
            if dy <= params.line_band_factor * size.min(sj) {
                bands.union(i, j);
            }
        }
    }

    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for i in 0..chars.len() {
        groups.entry(bands.find(i)).or_default().push(i);
    }
    let mut groups: Vec<Vec<usize>> = groups.into_values().collect();
    groups.sort_by_key(|g| g[0]);

    let mut lines = Vec::new();
    for mut band in groups {
        band.sort_by(|&a, &b| {
            chars[a].x0.total_cmp(&chars[b].x0).then(chars[a].x1.total_cmp(&chars[b].x1)).then(a.cmp(&b))
        });
        let mut start = 0;
        for k in 1..=band.len() {
            let split = k == band.len() || {
                let (prev, next) = (&chars[band[k - 1]], &chars[band[k]]);
                next.x0 - prev.x1 >= params.gap_factor * prev.size.max(next.size)
            };
            if split {
                lines.push(TextLine::from_glyphs(page, &band[start..k], params));
                start = k;
            }
        }
    }
    lines.sort_by(line_order);
    lines
}

fn line_order(a: &TextLine, b: &TextLine) -> Ordering {
    b.y1.total_cmp(&a.y1).then(a.x0.total_cmp(&b.x0)).then(a.y0.total_cmp(&b.y0)).then(a.glyphs[0].cmp(&b.glyphs[0]))
}

/// Overlap of the x-intervals divided by the narrower width.
pub fn x_overlap_ratio(a: (f64, f64), b: (f64, f64)) -> f64 {
    let overlap = (a.1.min(b.1) - a.0.max(b.0)).max(0.0);
    let narrow = (a.1 - a.0).min(b.1 - b.0);
    if narrow <= 0.0 {
        0.0
    } else {
        overlap / narrow
    }
}

/// Whether `next` continues the box that ends with `prev`.
pub fn lines_join(prev: &TextLine, next: &TextLine, params: &LayoutParams) -> bool {
    let size = prev.dominant_size.max(next.dominant_size);
    let vertical_gap = prev.y0 - next.y1;
    let close = vertical_gap < prev.height().min(next.height());
    let aligned = (next.x0 - prev.x0).abs() <= params.indent_factor * size;
    let paragraph_end = prev.width() < next.width() - params.width_slack_factor * size;
    close && aligned && !paragraph_end && prev.fonts.compatible(&next.fonts)
}

/// Merges lines into text boxes. Boxes come back in creation order with
/// `order` unset; pass them through [`order_boxes`].
pub fn merge_lines(lines: Vec<TextLine>, params: &LayoutParams) -> Vec<TextBox> {
    let mut lines = lines;
    lines.sort_by(line_order);

    let mut boxes: Vec<Vec<usize>> = Vec::new();
    let mut box_of: Vec<usize> = Vec::with_capacity(lines.len());
    for i in 0..lines.len() {
        let line = &lines[i];
        // Nearest earlier line in the same column group.
        let pred = (0..i)
            .rev()
            .find(|&p| x_overlap_ratio((lines[p].x0, lines[p].x1), (line.x0, line.x1)) >= params.column_overlap_min);
        let target = pred.and_then(|p| {
            let b = box_of[p];
            (boxes[b].last() == Some(&p) && lines_join(&lines[p], line, params)).then_some(b)
        });
        match target {
            Some(b) => {
                boxes[b].push(i);
                box_of.push(b);
            }
            None => {
                box_of.push(boxes.len());
                boxes.push(vec![i]);
            }
        }
    }

    let mut slots: Vec<Option<TextLine>> = lines.into_iter().map(Some).collect();
    boxes
        .into_iter()
        .map(|members| TextBox::from_lines(members.into_iter().map(|i| slots[i].take().unwrap()).collect()))
        .collect()
}

/// Sorts boxes top to bottom (descending top edge), ties by left edge then
/// bottom edge, and assigns ranks `0..n`.
pub fn order_boxes(mut boxes: Vec<TextBox>) -> Vec<TextBox> {
    boxes.sort_by(|a, b| b.y1.total_cmp(&a.y1).then(a.x0.total_cmp(&b.x0)).then(a.y0.total_cmp(&b.y0)));
    for (rank, b) in boxes.iter_mut().enumerate() {
        b.order = rank;
    }
    boxes
}

/// Lines, boxes and reading order in one call.
pub fn analyze_page(page: &Page, params: &LayoutParams) -> Vec<TextBox> {
    order_boxes(merge_lines(build_lines(page, params), params))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Ko,
    En,
    Mixed,
}

pub fn detect_language(text: &str, params: &LayoutParams) -> Language {
    let (hangul, latin) = script_counts(text);
    if hangul + latin == 0 {
        return Language::En;
    }
    let ratio = hangul as f64 / (hangul + latin) as f64;
    if ratio >= 1.0 - params.hangul_ratio_threshold {
        Language::Ko
    } else if ratio <= params.hangul_ratio_threshold {
        Language::En
    } else {
        Language::Mixed
    }
}

/// One line of the box dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRecord {
    pub doc_id: String,
    pub order: usize,
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
    pub text: String,
    pub font_profile: FontProfile,
}

impl BoxRecord {
    pub fn new(doc_id: &str, b: &TextBox) -> Self {
        Self {
            doc_id: doc_id.to_string(),
            order: b.order,
            x0: b.x0,
            y0: b.y0,
            x1: b.x1,
            y1: b.y1,
            text: b.text.clone(),
            font_profile: b.font_profile.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineRecord {
    pub doc_id: String,
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
    pub size: f64,
    pub text: String,
}

impl LineRecord {
    pub fn new(doc_id: &str, l: &TextLine) -> Self {
        Self {
            doc_id: doc_id.to_string(),
            x0: l.x0,
            y0: l.y0,
            x1: l.x1,
            y1: l.y1,
            size: l.dominant_size,
            text: l.text.clone(),
        }
    }
}

pub fn box_dump_jsonl(doc_id: &str, boxes: &[TextBox]) -> String {
    let mut out = String::new();
    for b in boxes {
        out.push_str(&serde_json::to_string(&BoxRecord::new(doc_id, b)).expect("box serialization cannot fail"));
        out.push('\n');
    }
    out
}

fn label_color(label: Option<Label>) -> &'static str {
    match label {
        None => "#808080",
        Some(Label::O) => "#b0b0b0",
        Some(Label::TitleKo | Label::TitleEn) => "#d62728",
        Some(Label::OrgKo | Label::OrgEn) => "#2ca02c",
        Some(Label::AbstractKo | Label::AbstractEn) => "#1f77b4",
        Some(Label::KeywordsKo | Label::KeywordsEn) => "#9467bd",
        Some(Label::AuthorNameKo | Label::AuthorNameEn) => "#ff7f0e",
    }
}

/// SVG debug overlay: one rectangle per box, stroke keyed by label.
pub fn render_svg(width: f64, height: f64, boxes: &[(&TextBox, Option<Label>)]) -> String {
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}" width="{width}" height="{height}">"#
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>"#);
    for (b, label) in boxes {
        let title = match label {
            Some(l) => format!("{} {}", b.order, l),
            None => b.order.to_string(),
        };
        let _ = writeln!(
            svg,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="{}" stroke-width="1"><title>{}</title></rect>"#,
            b.x0,
            height - b.y1,
            b.x1 - b.x0,
            b.y1 - b.y0,
            label_color(*label),
            xml_escape(&title)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(t: char, x0: f64, x1: f64, y0: f64, size: f64, font: &str) -> CharGlyph {
        CharGlyph {
            text: t,
            x0,
            y0,
            x1,
            y1: y0 + size,
            size,
            font: Arc::from(font),
            bold: font.contains("Bold"),
            italic: false,
        }
    }

    fn page(chars: Vec<CharGlyph>) -> Page {
        Page { doc_id: "d".into(), journal_id: "j".into(), page_index: 0, width: 595.0, height: 842.0, chars }
    }

    /// A line of `n` glyphs starting at `x0`, 6pt advance, abutting.
    fn run(text: &str, x0: f64, y0: f64, size: f64, font: &str) -> Vec<CharGlyph> {
        text.chars()
            .enumerate()
            .map(|(k, c)| g(c, x0 + 6.0 * k as f64, x0 + 6.0 * (k + 1) as f64, y0, size, font))
            .collect()
    }

    fn params() -> LayoutParams {
        LayoutParams::default()
    }

    #[test]
    fn adjacent_glyphs_form_one_line() {
        let p = page(vec![g('A', 10.0, 16.0, 700.0, 12.0, "F"), g('B', 18.0, 24.0, 700.0, 12.0, "F")]);
        let lines = build_lines(&p, &params());
        assert_eq!(lines.len(), 1);
        assert_eq!(lines[0].text, "AB");
    }

    #[test]
    fn wide_gap_splits_columns() {
        let p = page(vec![
            g('A', 10.0, 16.0, 700.0, 12.0, "F"),
            g('B', 18.0, 24.0, 700.0, 12.0, "F"),
            g('C', 40.0, 46.0, 700.0, 12.0, "F"),
        ]);
        let lines = build_lines(&p, &params());
        let texts: Vec<_> = lines.iter().map(|l| l.text.as_str()).collect();
        assert_eq!(texts, ["AB", "C"]);
    }

    #[test]
    fn single_glyph_page() {
        let p = page(vec![g('Z', 10.0, 16.0, 700.0, 12.0, "F")]);
        let lines = build_lines(&p, &params());
        assert_eq!(lines.len(), 1);
        assert_eq!(lines[0].glyphs, vec![0]);
    }

    #[test]
    fn word_gap_inserts_space() {
        // threshold 12: gap 4 is in [3, 12) -> space; gap 2 is not.
        let p = page(vec![
            g('a', 10.0, 16.0, 700.0, 12.0, "F"),
            g('b', 18.0, 24.0, 700.0, 12.0, "F"),
            g('c', 28.0, 34.0, 700.0, 12.0, "F"),
        ]);
        assert_eq!(build_lines(&p, &params())[0].text, "ab c");
    }

    #[test]
    fn y_band_is_transitive() {
        // 0 and 2 differ by 8 > 6, but both are within 6 of glyph 1.
        let p = page(vec![
            g('a', 10.0, 16.0, 700.0, 12.0, "F"),
            g('b', 16.0, 22.0, 704.0, 12.0, "F"),
            g('c', 22.0, 28.0, 708.0, 12.0, "F"),
        ]);
        assert_eq!(build_lines(&p, &params()).len(), 1);
    }

    #[test]
    fn line_bbox_is_union() {
        let p = page(vec![g('a', 10.0, 16.0, 700.0, 12.0, "F"), g('b', 16.0, 22.0, 702.0, 10.0, "F")]);
        let l = &build_lines(&p, &params())[0];
        assert_eq!((l.x0, l.y0, l.x1, l.y1), (10.0, 700.0, 22.0, 712.0));
        assert_eq!(l.dominant_size, 12.0);
    }

    fn two_lines(first: Vec<CharGlyph>, second: Vec<CharGlyph>) -> Vec<TextBox> {
        let mut chars = first;
        chars.extend(second);
        let p = page(chars);
        merge_lines(build_lines(&p, &params()), &params())
    }

    #[test]
    fn merge_when_all_rules_hold() {
        // L1 bottom 700 height 12, L2 top 692: gap 8 < 12.
        let boxes = two_lines(run("aaaaaaaaaa", 50.0, 700.0, 12.0, "F"), run("bbbbbbbbbb", 50.0, 680.0, 12.0, "F"));
        assert_eq!(boxes.len(), 1);
        assert_eq!(boxes[0].text, "aaaaaaaaaa bbbbbbbbbb");
    }

    #[test]
    fn indent_splits() {
        let boxes = two_lines(run("aaaaaaaaaa", 50.0, 700.0, 12.0, "F"), run("bbbbbbbbbb", 65.0, 680.0, 12.0, "F"));
        assert_eq!(boxes.len(), 2);
    }

    #[test]
    fn shorter_previous_line_splits() {
        // W1 = 180, W2 = 300: 180 < 300 - 12.
        let boxes =
            two_lines(run(&"a".repeat(30), 50.0, 700.0, 12.0, "F"), run(&"b".repeat(50), 50.0, 680.0, 12.0, "F"));
        assert_eq!(boxes.len(), 2);
    }

    #[test]
    fn ragged_line_within_slack_merges() {
        // W1 = 294, W2 = 300: 294 >= 300 - 12.
        let boxes =
            two_lines(run(&"a".repeat(49), 50.0, 700.0, 12.0, "F"), run(&"b".repeat(50), 50.0, 680.0, 12.0, "F"));
        assert_eq!(boxes.len(), 1);
    }

    #[test]
    fn korean_font_change_splits() {
        let boxes = two_lines(
            run("가나다라마바사", 50.0, 700.0, 12.0, "INPILL+Gulim"),
            run("아자차카타파하", 50.0, 680.0, 12.0, "ELNFKM+KoreanGD-Bold"),
        );
        assert_eq!(boxes.len(), 2);
    }

    #[test]
    fn subset_prefix_ignored_and_other_language_fonts_ignored() {
        let mut l1 = run("가나다라", 50.0, 700.0, 12.0, "INPILL+Gulim");
        l1.extend(run("abc", 74.0, 700.0, 12.0, "Times"));
        let l2 = run("아자차카타파", 50.0, 680.0, 12.0, "QWERTY+Gulim");
        let boxes = two_lines(l1, l2);
        assert_eq!(boxes.len(), 1);
    }

    #[test]
    fn large_vertical_gap_splits() {
        let boxes = two_lines(run("aaaaaaaaaa", 50.0, 700.0, 12.0, "F"), run("bbbbbbbbbb", 50.0, 670.0, 12.0, "F"));
        assert_eq!(boxes.len(), 2);
    }

    #[test]
    fn columns_do_not_merge() {
        // Two columns of two lines each.
        let chars: Vec<CharGlyph> = [
            run("leftleftle", 50.0, 700.0, 12.0, "F"),
            run("rightright", 320.0, 700.0, 12.0, "F"),
            run("leftleftle", 50.0, 686.0, 12.0, "F"),
            run("rightright", 320.0, 686.0, 12.0, "F"),
        ]
        .concat();
        let p = page(chars);
        let boxes = order_boxes(merge_lines(build_lines(&p, &params()), &params()));
        assert_eq!(boxes.len(), 2);
        assert!(boxes[0].x0 < boxes[1].x0);
        assert_eq!(boxes[0].lines.len(), 2);
    }

    fn boxed(y1: f64, x0: f64) -> TextBox {
        let line = TextLine {
            glyphs: vec![0],
            chars: vec![],
            x0,
            y0: y1 - 10.0,
            x1: x0 + 10.0,
            y1,
            dominant_size: 10.0,
            text: String::new(),
            fonts: FontProfile::default(),
        };
        TextBox::from_lines(vec![line])
    }

    #[test]
    fn order_by_top_edge() {
        let ordered = order_boxes(vec![boxed(600.0, 0.0), boxed(800.0, 0.0), boxed(700.0, 0.0)]);
        let tops: Vec<_> = ordered.iter().map(|b| (b.y1, b.order)).collect();
        assert_eq!(tops, [(800.0, 0), (700.0, 1), (600.0, 2)]);
    }

    #[test]
    fn order_ties_left_first() {
        let ordered = order_boxes(vec![boxed(700.0, 300.0), boxed(700.0, 50.0)]);
        assert_eq!(ordered[0].x0, 50.0);
        assert!(order_boxes(Vec::new()).is_empty());
    }

    #[test]
    fn language_detection() {
        let p = params();
        assert_eq!(detect_language("안녕하세요", &p), Language::Ko);
        assert_eq!(detect_language("Hello world", &p), Language::En);
        // 6 Hangul vs 8 Latin: ratio 3/7 lies in (0.3, 0.7).
        assert_eq!(detect_language("요약 Abstract 요약 결과", &p), Language::Mixed);
        assert_eq!(detect_language("1234 --", &p), Language::En);
    }

    #[test]
    fn params_validation() {
        assert!(LayoutParams::default().validate().is_ok());
        let bad = LayoutParams { column_overlap_min: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = LayoutParams { hangul_ratio_threshold: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = LayoutParams { gap_factor: -1.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn svg_flips_y_axis() {
        let b = boxed(800.0, 10.0);
        let svg = render_svg(595.0, 842.0, &[(&b, Some(Label::TitleEn))]);
        assert!(svg.contains(r#"viewBox="0 0 595 842""#));
        assert!(svg.contains(r#"y="42.00""#));
        assert!(svg.contains("#d62728"));
    }

    #[test]
    fn strips_subset_tags_only() {
        assert_eq!(strip_subset_prefix("ABCDEF+Times"), "Times");
        assert_eq!(strip_subset_prefix("Times+Bold"), "Times+Bold");
        assert_eq!(strip_subset_prefix("Arial-BoldItalicMT"), "Arial-BoldItalicMT");
    }
}
