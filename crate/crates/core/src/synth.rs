//! Seeded synthetic first pages with known boxes, labels and metadata.
//!
//! Every style lays out metadata blocks and body paragraphs so that the
//! layout rules separate blocks with at least a 2x margin and never split a
//! block internally: non-final lines are justified to the column width with
//! bounded tracking, word gaps stay below half the split threshold, and
//! block transitions rely on a vertical gap, a font change, an indent or a
//! short final line.

use std::fs;
use std::io;
use std::path::Path;
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::charstream::{to_charstream_json, write_metadata_jsonl, CharGlyph, MetadataRecord, Page};
use crate::doi::cache_path;
use crate::label::Label;
use crate::script::{is_hangul, is_latin_letter};

pub const PAGE_WIDTH: f64 = 595.28;
pub const PAGE_HEIGHT: f64 = 841.89;

const LINE_PITCH: f64 = 1.2;
const WORD_GAP: f64 = 0.4;
const WORD_GAP_SLACK: f64 = 0.1;
const MAX_TRACKING: f64 = 0.125;
/// Rule margins in units of the larger font size.
const RULE_MARGIN: f64 = 2.5;
const TIGHT_GAP: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lang {
    Ko,
    En,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    Title,
    Authors,
    Org,
    Abstract,
    Keywords,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSlot {
    pub field: Field,
    pub lang: Lang,
}

impl FieldSlot {
    pub const fn new(field: Field, lang: Lang) -> Self {
        Self { field, lang }
    }

    pub fn label(self) -> Label {
        match (self.field, self.lang) {
            (Field::Title, Lang::Ko) => Label::TitleKo,
            (Field::Title, Lang::En) => Label::TitleEn,
            (Field::Authors, Lang::Ko) => Label::AuthorNameKo,
            (Field::Authors, Lang::En) => Label::AuthorNameEn,
            (Field::Org, Lang::Ko) => Label::OrgKo,
            (Field::Org, Lang::En) => Label::OrgEn,
            (Field::Abstract, Lang::Ko) => Label::AbstractKo,
            (Field::Abstract, Lang::En) => Label::AbstractEn,
            (Field::Keywords, Lang::Ko) => Label::KeywordsKo,
            (Field::Keywords, Lang::En) => Label::KeywordsEn,
        }
    }
}

/// How consecutive stacked blocks are kept apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Separation {
    Gap,
    Font,
    Indent,
    Width,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Margins {
    pub left: f64,
    pub right: f64,
    pub top: f64,
    pub bottom: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSizes {
    pub header: f64,
    pub title: f64,
    pub author: f64,
    pub org: f64,
    pub heading: f64,
    pub abstract_text: f64,
    pub keywords: f64,
    pub body: f64,
}

impl FieldSizes {
    fn max(&self) -> f64 {
        [self.header, self.title, self.author, self.org, self.heading, self.abstract_text, self.keywords, self.body]
            .into_iter()
            .fold(0.0, f64::max)
    }

    fn of(&self, field: Field) -> f64 {
        match field {
            Field::Title => self.title,
            Field::Authors => self.author,
            Field::Org => self.org,
            Field::Abstract => self.abstract_text,
            Field::Keywords => self.keywords,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticStyle {
    pub journal_id: String,
    /// Body text columns (1 or 2).
    pub columns: u8,
    pub margins: Margins,
    /// Extra inset of the metadata block on both sides.
    pub metadata_inset: f64,
    pub sizes: FieldSizes,
    pub field_order: Vec<FieldSlot>,
    /// Korean abstract present (drops `abstract`/`ko` slots when false).
    pub korean_abstract: bool,
    /// Korean and English abstracts side by side in two columns.
    pub side_by_side_abstracts: bool,
    /// Heading lines ("Abstract", "요약") before abstracts.
    pub abstract_headings: bool,
    /// Running header and DOI line at the top of the page.
    pub header: bool,
    pub separation: Separation,
    pub body_lang: Lang,
}

impl SyntheticStyle {
    fn slots(&self) -> Vec<FieldSlot> {
        self.field_order
            .iter()
            .copied()
            .filter(|s| self.korean_abstract || !(s.field == Field::Abstract && s.lang == Lang::Ko))
            .collect()
    }
}

fn sizes(title: f64, base: f64) -> FieldSizes {
    FieldSizes {
        header: 7.5,
        title,
        author: base + 1.0,
        org: base - 0.5,
        heading: base + 1.0,
        abstract_text: base,
        keywords: base,
        body: base + 0.5,
    }
}

/// Seven journal styles covering one and two columns and every split rule.
pub fn default_styles() -> Vec<SyntheticStyle> {
    use Field::*;
    use Lang::*;
    let s = FieldSlot::new;
    let en_only = vec![s(Title, En), s(Authors, En), s(Org, En), s(Abstract, En), s(Keywords, En)];
    let bilingual_stacked = vec![
        s(Title, Ko),
        s(Title, En),
        s(Authors, Ko),
        s(Authors, En),
        s(Org, Ko),
        s(Org, En),
        s(Abstract, Ko),
        s(Abstract, En),
        s(Keywords, Ko),
        s(Keywords, En),
    ];
    vec![
        SyntheticStyle {
            journal_id: "J01".into(),
            columns: 1,
            margins: Margins { left: 72.0, right: 72.0, top: 60.0, bottom: 60.0 },
            metadata_inset: 0.0,
            sizes: sizes(16.0, 9.0),
            field_order: en_only.clone(),
            korean_abstract: false,
            side_by_side_abstracts: false,
            abstract_headings: true,
            header: false,
            separation: Separation::Gap,
            body_lang: En,
        },
        SyntheticStyle {
            journal_id: "J02".into(),
            columns: 2,
            margins: Margins { left: 56.0, right: 56.0, top: 40.0, bottom: 50.0 },
            metadata_inset: 0.0,
            sizes: sizes(15.0, 8.5),
            field_order: bilingual_stacked.clone(),
            korean_abstract: true,
            side_by_side_abstracts: false,
            abstract_headings: false,
            header: true,
            separation: Separation::Gap,
            body_lang: Ko,
        },
        SyntheticStyle {
            journal_id: "J03".into(),
            columns: 2,
            margins: Margins { left: 60.0, right: 60.0, top: 200.0, bottom: 56.0 },
            metadata_inset: 110.0,
            sizes: sizes(14.0, 9.0),
            field_order: en_only.clone(),
            korean_abstract: false,
            side_by_side_abstracts: false,
            abstract_headings: true,
            header: false,
            separation: Separation::Font,
            body_lang: En,
        },
        SyntheticStyle {
            journal_id: "J04".into(),
            columns: 1,
            margins: Margins { left: 64.0, right: 64.0, top: 300.0, bottom: 56.0 },
            metadata_inset: 0.0,
            sizes: sizes(14.0, 8.5),
            field_order: vec![
                s(Title, Ko),
                s(Authors, Ko),
                s(Org, Ko),
                s(Title, En),
                s(Authors, En),
                s(Org, En),
                s(Abstract, Ko),
                s(Keywords, Ko),
                s(Abstract, En),
                s(Keywords, En),
            ],
            korean_abstract: true,
            side_by_side_abstracts: false,
            abstract_headings: false,
            header: true,
            separation: Separation::Indent,
            body_lang: Ko,
        },
        SyntheticStyle {
            journal_id: "J05".into(),
            columns: 2,
            margins: Margins { left: 50.0, right: 50.0, top: 120.0, bottom: 48.0 },
            metadata_inset: 0.0,
            sizes: sizes(17.0, 9.0),
            field_order: en_only.clone(),
            korean_abstract: false,
            side_by_side_abstracts: false,
            abstract_headings: false,
            header: false,
            separation: Separation::Width,
            body_lang: En,
        },
        SyntheticStyle {
            journal_id: "J06".into(),
            columns: 2,
            margins: Margins { left: 54.0, right: 54.0, top: 150.0, bottom: 50.0 },
            metadata_inset: 0.0,
            sizes: sizes(15.0, 8.0),
            field_order: bilingual_stacked,
            korean_abstract: true,
            side_by_side_abstracts: true,
            abstract_headings: true,
            header: false,
            separation: Separation::Gap,
            body_lang: Ko,
        },
        SyntheticStyle {
            journal_id: "J07".into(),
            columns: 1,
            margins: Margins { left: 70.0, right: 70.0, top: 90.0, bottom: 60.0 },
            metadata_inset: 50.0,
            sizes: sizes(13.0, 9.0),
            field_order: vec![
                s(Authors, En),
                s(Title, En),
                s(Org, En),
                s(Keywords, En),
                s(Abstract, En),
                s(Abstract, Ko),
            ],
            korean_abstract: true,
            side_by_side_abstracts: false,
            abstract_headings: false,
            header: true,
            separation: Separation::Gap,
            body_lang: En,
        },
    ]
}

/// A minimal English style: metadata first, no running header or headings.
pub fn plain_style(journal_id: &str) -> SyntheticStyle {
    let mut style = default_styles().remove(0);
    style.journal_id = journal_id.to_string();
    style.header = false;
    style.abstract_headings = false;
    style
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldBox {
    pub doc_id: String,
    pub journal_id: String,
    pub order: usize,
    pub label: Label,
    /// Glyph index range `[glyph_start, glyph_end)` into the page.
    pub glyph_start: usize,
    pub glyph_end: usize,
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDoc {
    pub page: Page,
    pub record: MetadataRecord,
    pub gold: Vec<GoldBox>,
}

// ---------------------------------------------------------------------------
// Vocabulary pools

const TITLE_EN: &[&str] = &[
    "deep",
    "learning",
    "layout",
    "analysis",
    "metadata",
    "extraction",
    "robust",
    "framework",
    "neural",
    "network",
    "adaptive",
    "scholarly",
    "document",
    "semantic",
    "segmentation",
    "graph",
    "retrieval",
    "efficient",
    "transformer",
    "classification",
    "multilingual",
    "optimization",
    "detection",
    "antenna",
    "satellite",
    "dual",
    "band",
    "polarization",
    "structure",
    "automatic",
    "scale",
    "novel",
    "towards",
    "for",
    "of",
    "with",
    "using",
    "based",
    "on",
    "and",
    "in",
    "a",
    "the",
    "via",
];
const TITLE_KO: &[&str] = &[
    "심층",
    "학습",
    "기반",
    "문서",
    "레이아웃",
    "분석",
    "메타데이터",
    "추출",
    "기법",
    "설계",
    "안테나",
    "위성",
    "이중",
    "대역",
    "원편파",
    "구조",
    "성능",
    "자동",
    "대규모",
    "학술지",
    "분류",
    "신경망",
    "최적화",
    "검출",
    "시스템",
    "및",
    "의",
    "위한",
    "관한",
    "새로운",
];
const ABSTRACT_EN: &[&str] = &[
    "this",
    "paper",
    "proposes",
    "we",
    "present",
    "results",
    "show",
    "that",
    "proposed",
    "method",
    "achieves",
    "experiments",
    "demonstrate",
    "improved",
    "compared",
    "existing",
    "approaches",
    "our",
    "in",
    "of",
    "a",
    "an",
    "to",
    "and",
    "is",
    "are",
    "was",
    "by",
    "for",
    "with",
    "on",
    "as",
    "gain",
    "frequency",
    "characteristics",
    "confirmed",
    "simulation",
    "measurement",
    "obtained",
    "findings",
    "suggest",
    "significant",
    "accuracy",
    "outperforms",
    "evaluated",
    "dataset",
];
const ABSTRACT_KO: &[&str] = &[
    "본",
    "논문에서는",
    "제안한",
    "방법을",
    "이용하여",
    "결과",
    "실험",
    "측정",
    "확인하였다",
    "얻었다",
    "특성을",
    "성능이",
    "향상되었다",
    "기존",
    "비교하여",
    "분석하였다",
    "설계하였다",
    "수행하였다",
    "통하여",
    "있다",
    "및",
    "수",
    "또한",
    "이를",
    "위하여",
    "연구에서는",
    "정확도",
    "제안하는",
];
const BODY_EN: &[&str] = &[
    "introduction",
    "recently",
    "however",
    "section",
    "figure",
    "table",
    "previous",
    "studies",
    "research",
    "has",
    "been",
    "conducted",
    "field",
    "various",
    "such",
    "which",
    "these",
    "it",
    "also",
    "since",
    "the",
    "of",
    "and",
    "to",
    "a",
    "is",
    "this",
    "many",
    "several",
    "important",
    "problem",
    "therefore",
    "first",
    "second",
    "describes",
    "organized",
    "follows",
    "related",
    "work",
    "conclusion",
    "remainder",
    "literature",
    "widely",
    "used",
    "applied",
];
const BODY_KO: &[&str] = &[
    "서론",
    "최근",
    "그러나",
    "연구가",
    "진행되고",
    "있으며",
    "다양한",
    "분야에서",
    "활용되고",
    "있다",
    "선행",
    "관련",
    "절에서는",
    "그림",
    "표",
    "다음과",
    "같다",
    "장에서는",
    "구성은",
    "이다",
    "및",
    "수",
    "것",
    "따라서",
];
const KEYWORDS_EN: &[&str] = &[
    "deep learning",
    "layout analysis",
    "metadata extraction",
    "document understanding",
    "transformer",
    "text classification",
    "scholarly documents",
    "information retrieval",
    "antenna design",
    "circular polarization",
    "satellite communication",
    "language model",
    "training data",
];
const KEYWORDS_KO: &[&str] = &[
    "심층 학습",
    "레이아웃 분석",
    "메타데이터 추출",
    "문서 이해",
    "트랜스포머",
    "텍스트 분류",
    "학술 문헌",
    "정보 검색",
    "안테나 설계",
    "원편파",
    "위성 통신",
    "언어 모델",
    "학습 데이터",
];
const GIVEN_EN: &[&str] =
    &["Minsu", "Jiwon", "Seoyeon", "Doyun", "Haeun", "Junho", "Subin", "Yerin", "Hyunwoo", "Jimin"];
const FAMILY_EN: &[&str] = &["Kim", "Lee", "Park", "Choi", "Jung", "Kang", "Cho", "Yoon", "Jang", "Lim"];
const GIVEN_KO: &[&str] = &["민수", "지원", "서연", "도윤", "하은", "준호", "수빈", "예린", "현우", "지민"];
const FAMILY_KO: &[&str] = &["김", "이", "박", "최", "정", "강", "조", "윤", "장", "임"];
const DEPT_EN: &[&str] = &[
    "Dept. of Computer Science",
    "School of Electrical Engineering",
    "Institute of Data Science",
    "Division of Information Systems",
];
const UNIV_EN: &[&str] = &["Seoul National University", "Korea University", "Yonsei University", "KAIST", "KISTI"];
const DEPT_KO: &[&str] = &["컴퓨터공학과", "전자공학과", "데이터사이언스학과", "정보통신공학부", "인공지능연구소"];
const UNIV_KO: &[&str] = &["서울대학교", "한국과학기술정보연구원", "연세대학교", "고려대학교", "부산대학교"];
const SMALL_WORDS: &[&str] = &["for", "of", "with", "on", "and", "in", "a", "the", "via"];

fn title_case(word: &str) -> String {
    if SMALL_WORDS.contains(&word) {
        return word.to_string();
    }
    let mut cs = word.chars();
    match cs.next() {
        Some(first) => first.to_uppercase().chain(cs).collect(),
        None => String::new(),
    }
}

// ---------------------------------------------------------------------------
// Glyph metrics and line composition

fn advance(c: char, size: f64) -> f64 {
    if is_hangul(c) {
        return size;
    }
    let em = match c {
        'i' | 'j' | 'l' | '\'' | '.' | ',' | ';' | ':' | '!' | '|' => 0.28,
        'f' | 't' | 'r' | 'I' | '(' | ')' | '*' | '-' => 0.36,
        'm' | 'w' | 'M' | 'W' => 0.78,
        'A'..='Z' => 0.66,
        _ => 0.5,
    };
    em * size
}

fn word_width(word: &str, size: f64) -> f64 {
    word.chars().map(|c| advance(c, size)).sum()
}

fn natural_width(words: &[String], size: f64) -> f64 {
    let gaps = words.len().saturating_sub(1) as f64;
    words.iter().map(|w| word_width(w, size)).sum::<f64>() + gaps * WORD_GAP * size
}

/// Extra width a line can absorb without creating spurious spaces or splits.
fn stretch_capacity(words: &[String], size: f64) -> f64 {
    let word_gaps = words.len().saturating_sub(1) as f64;
    let intra: usize = words.iter().map(|w| w.chars().count().saturating_sub(1)).sum();
    (word_gaps * WORD_GAP_SLACK + intra as f64 * MAX_TRACKING) * size
}

#[derive(Debug, Clone)]
struct ComposedLine {
    /// `(char, x0, x1)` relative to the line start.
    glyphs: Vec<(char, f64, f64)>,
    width: f64,
}

fn place_words(words: &[String], size: f64, justify_to: Option<f64>) -> ComposedLine {
    let natural = natural_width(words, size);
    let (word_extra, track) = match justify_to {
        Some(target) if target > natural => {
            let extra = target - natural;
            let word_gaps = words.len().saturating_sub(1);
            let intra: usize = words.iter().map(|w| w.chars().count().saturating_sub(1)).sum();
            let per_gap = if word_gaps > 0 { (extra / word_gaps as f64).min(WORD_GAP_SLACK * size) } else { 0.0 };
            let rest = extra - per_gap * word_gaps as f64;
            let track = if intra > 0 { rest / intra as f64 } else { 0.0 };
            (per_gap, track)
        }
        _ => (0.0, 0.0),
    };
    let mut glyphs = Vec::new();
    let mut x = 0.0;
    for (wi, word) in words.iter().enumerate() {
        if wi > 0 {
            x += WORD_GAP * size + word_extra;
        }
        for (ci, c) in word.chars().enumerate() {
            if ci > 0 {
                x += track;
            }
            let w = advance(c, size);
            glyphs.push((c, x, x + w));
            x += w;
        }
    }
    ComposedLine { glyphs, width: x }
}

/// Fills lines with drawn words. Non-final lines are topped up with
/// further draws until they can be justified to `width`. Returns `None` if a
/// line cannot be filled.
fn fill_paragraph(
    rng: &mut ChaCha8Rng,
    draw: &mut dyn FnMut(&mut ChaCha8Rng) -> String,
    target_words: usize,
    width: f64,
    size: f64,
) -> Option<Vec<Vec<String>>> {
    let mut lines: Vec<Vec<String>> = Vec::new();
    let mut cur: Vec<String> = Vec::new();
    let mut count = 0;
    while count < target_words {
        let w = draw(rng);
        let mut trial = cur.clone();
        trial.push(w.clone());
        if natural_width(&trial, size) <= width {
            cur = trial;
            count += 1;
            continue;
        }
        for _ in 0..200 {
            if width - natural_width(&cur, size) <= stretch_capacity(&cur, size) {
                break;
            }
            let filler = draw(rng);
            let mut trial = cur.clone();
            trial.push(filler);
            if natural_width(&trial, size) <= width {
                cur = trial;
                count += 1;
            }
        }
        if cur.is_empty() || width - natural_width(&cur, size) > stretch_capacity(&cur, size) {
            return None;
        }
        lines.push(std::mem::take(&mut cur));
        cur.push(w);
        count += 1;
    }
    if !cur.is_empty() {
        lines.push(cur);
    }
    Some(lines)
}

// ---------------------------------------------------------------------------
// Blocks

#[derive(Debug, Clone, Copy, PartialEq)]
enum Weight {
    Regular,
    Bold,
    Italic,
}

#[derive(Debug, Clone)]
struct FontSet {
    latin: Arc<str>,
    latin_bold: Arc<str>,
    latin_italic: Arc<str>,
    hangul: Arc<str>,
    hangul_bold: Arc<str>,
}

impl FontSet {
    fn new(rng: &mut ChaCha8Rng) -> Self {
        let mut tag = || -> String { (0..6).map(|_| rng.random_range(b'A'..=b'Z') as char).collect() };
        Self {
            latin: format!("{}+TimesNewRomanPSMT", tag()).into(),
            latin_bold: format!("{}+TimesNewRomanPS-BoldMT", tag()).into(),
            latin_italic: format!("{}+TimesNewRomanPS-ItalicMT", tag()).into(),
            hangul: format!("{}+Batang", tag()).into(),
            hangul_bold: format!("{}+KoreanGD-Bold", tag()).into(),
        }
    }

    /// (font, bold, italic) for a glyph.
    fn pick(&self, c: char, weight: Weight) -> (Arc<str>, bool, bool) {
        if is_hangul(c) {
            match weight {
                Weight::Bold => (self.hangul_bold.clone(), true, false),
                _ => (self.hangul.clone(), false, false),
            }
        } else {
            match weight {
                Weight::Regular => (self.latin.clone(), false, false),
                Weight::Bold => (self.latin_bold.clone(), true, false),
                Weight::Italic => (self.latin_italic.clone(), false, true),
            }
        }
    }

    /// Modal font key for the block's language, as the font rule sees it.
    fn key(&self, lang: Lang, weight: Weight) -> (Lang, &'static str) {
        let name = match (lang, weight) {
            (Lang::Ko, Weight::Bold) => "hangul_bold",
            (Lang::Ko, _) => "hangul",
            (Lang::En, Weight::Regular) => "latin",
            (Lang::En, Weight::Bold) => "latin_bold",
            (Lang::En, Weight::Italic) => "latin_italic",
        };
        (lang, name)
    }
}

#[derive(Debug, Clone)]
struct Block {
    label: Label,
    lang: Lang,
    size: f64,
    weight: Weight,
    lines: Vec<ComposedLine>,
    text: String,
}

impl Block {
    fn first_width(&self) -> f64 {
        self.lines[0].width
    }

    fn last_width(&self) -> f64 {
        self.lines.last().unwrap().width
    }

    fn height(&self) -> f64 {
        self.size + (self.lines.len() - 1) as f64 * LINE_PITCH * self.size
    }
}

fn words_to_block(label: Label, lang: Lang, size: f64, weight: Weight, lines: Vec<Vec<String>>, width: f64) -> Block {
    let n = lines.len();
    let text = lines.iter().flatten().cloned().collect::<Vec<_>>().join(" ");
    let lines =
        lines.iter().enumerate().map(|(i, words)| place_words(words, size, (i + 1 < n).then_some(width))).collect();
    Block { label, lang, size, weight, lines, text }
}

struct Composer<'a> {
    rng: &'a mut ChaCha8Rng,
}

impl Composer<'_> {
    fn paragraph(
        &mut self,
        pool: &'static [&'static str],
        words: (usize, usize),
        width: f64,
        size: f64,
        capitalize: bool,
        short_last: bool,
    ) -> Vec<Vec<String>> {
        let mut draw = |rng: &mut ChaCha8Rng| -> String {
            let w = *pool.choose(rng).unwrap();
            if capitalize {
                title_case(w)
            } else {
                w.to_string()
            }
        };
        loop {
            let target = self.rng.random_range(words.0..=words.1);
            if let Some(mut lines) = fill_paragraph(self.rng, &mut draw, target, width, size) {
                if capitalize {
                    if let Some(first) = lines.first_mut().and_then(|l| l.first_mut()) {
                        let mut cs = first.chars();
                        if let Some(c) = cs.next() {
                            *first = c.to_uppercase().chain(cs).collect();
                        }
                    }
                }
                if short_last {
                    let last = lines.last_mut().unwrap();
                    while last.len() > 1 && natural_width(last, size) > 0.5 * width {
                        last.pop();
                    }
                }
                return lines;
            }
        }
    }

    fn list(&mut self, items: Vec<String>, sep: &str, width: f64, size: f64) -> (Vec<String>, Vec<String>) {
        let mut items = items;
        loop {
            let text = items.join(sep);
            let words: Vec<String> = text.split(' ').map(str::to_string).collect();
            if natural_width(&words, size) <= width || items.len() == 1 {
                return (items, words);
            }
            items.pop();
        }
    }

    fn distinct(&mut self, pool: &[&str], n: usize) -> Vec<String> {
        let mut picked: Vec<String> = Vec::new();
        while picked.len() < n.min(pool.len()) {
            let w = pool.choose(self.rng).unwrap().to_string();
            if !picked.contains(&w) {
                picked.push(w);
            }
        }
        picked
    }

    fn person(&mut self, lang: Lang) -> String {
        match lang {
            Lang::En => format!("{} {}", GIVEN_EN.choose(self.rng).unwrap(), FAMILY_EN.choose(self.rng).unwrap()),
            Lang::Ko => format!("{}{}", FAMILY_KO.choose(self.rng).unwrap(), GIVEN_KO.choose(self.rng).unwrap()),
        }
    }

    fn affiliation(&mut self, lang: Lang) -> String {
        match lang {
            Lang::En => format!("{}, {}", DEPT_EN.choose(self.rng).unwrap(), UNIV_EN.choose(self.rng).unwrap()),
            Lang::Ko => format!("{} {}", UNIV_KO.choose(self.rng).unwrap(), DEPT_KO.choose(self.rng).unwrap()),
        }
    }
}

/// Field values written to the record, keyed by slot.
#[derive(Default)]
struct RecordBuilder {
    record: MetadataRecord,
}

impl RecordBuilder {
    fn set_text(&mut self, slot: FieldSlot, text: String) {
        let r = &mut self.record;
        match (slot.field, slot.lang) {
            (Field::Title, Lang::Ko) => r.title_ko = Some(text),
            (Field::Title, Lang::En) => r.title_en = Some(text),
            (Field::Abstract, Lang::Ko) => r.abstract_ko = Some(text),
            (Field::Abstract, Lang::En) => r.abstract_en = Some(text),
            _ => unreachable!("list field"),
        }
    }

    fn set_list(&mut self, slot: FieldSlot, items: Vec<String>) {
        let r = &mut self.record;
        match (slot.field, slot.lang) {
            (Field::Authors, Lang::Ko) => r.author_names_ko = Some(items),
            (Field::Authors, Lang::En) => r.author_names_en = Some(items),
            (Field::Org, Lang::Ko) => r.affiliations_ko = Some(items),
            (Field::Org, Lang::En) => r.affiliations_en = Some(items),
            (Field::Keywords, Lang::Ko) => r.keywords_ko = Some(items),
            (Field::Keywords, Lang::En) => r.keywords_en = Some(items),
            _ => unreachable!("text field"),
        }
    }
}

fn field_weight(field: Field) -> Weight {
    match field {
        Field::Title => Weight::Bold,
        Field::Authors | Field::Abstract => Weight::Regular,
        Field::Org | Field::Keywords => Weight::Italic,
    }
}

fn compose_field(
    c: &mut Composer<'_>,
    slot: FieldSlot,
    style: &SyntheticStyle,
    width: f64,
    rec: &mut RecordBuilder,
) -> Block {
    let size = style.sizes.of(slot.field);
    let weight = field_weight(slot.field);
    let label = slot.label();
    let short_last = style.separation == Separation::Width;
    match slot.field {
        Field::Title => {
            let (pool, range) = match slot.lang {
                Lang::En => (TITLE_EN, (5, 9)),
                Lang::Ko => (TITLE_KO, (4, 6)),
            };
            let lines = c.paragraph(pool, range, width, size, slot.lang == Lang::En, false);
            let block = words_to_block(label, slot.lang, size, weight, lines, width);
            rec.set_text(slot, block.text.clone());
            block
        }
        Field::Abstract => {
            let (pool, range) = match slot.lang {
                Lang::En => (ABSTRACT_EN, (45, 55)),
                Lang::Ko => (ABSTRACT_KO, (28, 34)),
            };
            let lines = c.paragraph(pool, range, width, size, false, short_last);
            let block = words_to_block(label, slot.lang, size, weight, lines, width);
            rec.set_text(slot, block.text.clone());
            block
        }
        Field::Authors | Field::Org | Field::Keywords => {
            let (items, sep) = match slot.field {
                Field::Authors => {
                    let n = c.rng.random_range(2..=4);
                    let mut names: Vec<String> = Vec::new();
                    while names.len() < n {
                        let p = c.person(slot.lang);
                        if !names.contains(&p) {
                            names.push(p);
                        }
                    }
                    (names, ", ")
                }
                Field::Org => {
                    let n = c.rng.random_range(1..=2);
                    let mut orgs: Vec<String> = Vec::new();
                    while orgs.len() < n {
                        let a = c.affiliation(slot.lang);
                        if !orgs.contains(&a) {
                            orgs.push(a);
                        }
                    }
                    (orgs, "; ")
                }
                _ => {
                    let n = c.rng.random_range(3..=5);
                    let pool = if slot.lang == Lang::En { KEYWORDS_EN } else { KEYWORDS_KO };
                    (c.distinct(pool, n), "; ")
                }
            };
            // Corresponding-author marker; stripped by normalization.
            let mut display = items.clone();
            if slot.field == Field::Authors {
                display[0].push('*');
            }
            let (kept, words) = c.list(display, sep, width, size);
            let kept_items = items[..kept.len()].to_vec();
            let block = words_to_block(label, slot.lang, size, weight, vec![words], width);
            rec.set_list(slot, kept_items);
            block
        }
    }
}

fn heading_block(lang: Lang, style: &SyntheticStyle) -> Block {
    let text = match lang {
        Lang::En => "Abstract",
        Lang::Ko => "요약",
    };
    let size = style.sizes.heading;
    let line = place_words(&[text.to_string()], size, None);
    Block { label: Label::O, lang, size, weight: Weight::Bold, lines: vec![line], text: text.to_string() }
}

fn single_line_block(text: &str, lang: Lang, size: f64) -> Block {
    let words: Vec<String> = text.split(' ').map(str::to_string).collect();
    let line = place_words(&words, size, None);
    Block { label: Label::O, lang, size, weight: Weight::Regular, lines: vec![line], text: text.to_string() }
}

// ---------------------------------------------------------------------------
// Page assembly

struct PageBuilder<'a> {
    fonts: &'a FontSet,
    chars: Vec<CharGlyph>,
    gold: Vec<GoldBox>,
    doc_id: String,
    journal_id: String,
}

/// A block placed in a column: (block, x0, top edge of its first line).
struct Placed {
    x0: f64,
    top: f64,
}

impl PageBuilder<'_> {
    fn emit(&mut self, block: &Block, placed: &Placed) -> f64 {
        let start = self.chars.len();
        let mut line_top = placed.top;
        let (mut bx0, mut by0, mut bx1, mut by1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for line in &block.lines {
            let y1 = line_top;
            let y0 = line_top - block.size;
            for &(c, gx0, gx1) in &line.glyphs {
                let (font, bold, italic) = self.fonts.pick(c, block.weight);
                let g = CharGlyph {
                    text: c,
                    x0: placed.x0 + gx0,
                    y0,
                    x1: placed.x0 + gx1,
                    y1,
                    size: block.size,
                    font,
                    bold,
                    italic,
                };
                bx0 = bx0.min(g.x0);
                bx1 = bx1.max(g.x1);
                by0 = by0.min(g.y0);
                by1 = by1.max(g.y1);
                self.chars.push(g);
            }
            line_top -= LINE_PITCH * block.size;
        }
        self.gold.push(GoldBox {
            doc_id: self.doc_id.clone(),
            journal_id: self.journal_id.clone(),
            order: 0,
            label: block.label,
            glyph_start: start,
            glyph_end: self.chars.len(),
            x0: bx0,
            y0: by0,
            x1: bx1,
            y1: by1,
            text: block.text.clone(),
        });
        // Bottom edge of the last line.
        placed.top - block.height()
    }
}

/// Whether `next` may sit directly under `prev` (normal line pitch) and
/// still be split from it under `mode`.
fn tight_allowed(mode: Separation, fonts: &FontSet, prev: (&Block, f64), next: (&Block, f64)) -> bool {
    let (pb, px) = prev;
    let (nb, nx) = next;
    let size = pb.size.max(nb.size);
    match mode {
        Separation::Gap => false,
        Separation::Font => pb.lang == nb.lang && fonts.key(pb.lang, pb.weight) != fonts.key(nb.lang, nb.weight),
        Separation::Indent => (nx - px).abs() >= RULE_MARGIN * size,
        Separation::Width => pb.last_width() < nb.first_width() - RULE_MARGIN * size,
    }
}

/// Places a sequence of blocks in one column, top to bottom. Returns the
/// bottom edge of the last block.
fn stack(
    pb: &mut PageBuilder<'_>,
    blocks: &[(Block, f64)],
    mode: Separation,
    start_top: f64,
    prev: Option<(&Block, f64)>,
) -> f64 {
    let mut bottom = start_top;
    let mut last: Option<(&Block, f64)> = prev;
    let mut first = prev.is_none();
    for (block, x0) in blocks {
        let top = match last {
            _ if first => start_top,
            Some((p, px)) => {
                let min_size = p.size.min(block.size);
                let max_size = p.size.max(block.size);
                if tight_allowed(mode, pb.fonts, (p, px), (block, *x0)) {
                    bottom - TIGHT_GAP * min_size
                } else {
                    bottom - RULE_MARGIN * max_size
                }
            }
            None => start_top,
        };
        first = false;
        bottom = pb.emit(block, &Placed { x0: *x0, top });
        last = Some((block, *x0));
    }
    bottom
}

fn doc_seed(seed: u64, style_index: usize, doc_index: usize) -> u64 {
    // splitmix64 over a packed key
    let mut z = seed ^ ((style_index as u64) << 32 | doc_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn doc_id(style: &SyntheticStyle, doc_index: usize) -> String {
    format!("{}-{:04}", style.journal_id, doc_index)
}

pub fn doc_doi(style_index: usize, style: &SyntheticStyle, doc_index: usize) -> String {
    format!("10.{}/{}.{}", 5000 + style_index, style.journal_id.to_lowercase(), doc_index)
}

/// Generates one document of `style`.
pub fn generate_doc(style: &SyntheticStyle, style_index: usize, doc_index: usize, seed: u64) -> SyntheticDoc {
    let mut rng = ChaCha8Rng::seed_from_u64(doc_seed(seed, style_index, doc_index));
    let fonts = FontSet::new(&mut rng);
    let id = doc_id(style, doc_index);
    let doi = doc_doi(style_index, style, doc_index);
    let mut pb = PageBuilder {
        fonts: &fonts,
        chars: Vec::new(),
        gold: Vec::new(),
        doc_id: id.clone(),
        journal_id: style.journal_id.clone(),
    };
    let mut rec = RecordBuilder::default();
    rec.record.doc_id = id.clone();
    rec.record.doi = Some(doi.clone());

    let m = style.margins;
    let left = m.left;
    let content_w = PAGE_WIDTH - m.left - m.right;
    let mut cursor = PAGE_HEIGHT - m.top;
    let mut prev_block: Option<(Block, f64)> = None;

    if style.header {
        let size = style.sizes.header;
        let vol = rng.random_range(1..40);
        let head = single_line_block(
            &format!("{} Vol. {vol}, No. {}", journal_name(&style.journal_id), rng.random_range(1..12)),
            Lang::En,
            size,
        );
        let doi_line = single_line_block(&format!("DOI: {doi}"), Lang::En, size);
        let doi_x = left + content_w - doi_line.first_width();
        let top = cursor;
        let b1 = pb.emit(&head, &Placed { x0: left, top });
        pb.emit(&doi_line, &Placed { x0: doi_x, top });
        cursor = b1;
        prev_block = Some((head, left));
    }

    let mut composer = Composer { rng: &mut rng };
    let meta_left = left + style.metadata_inset;
    let meta_w = content_w - 2.0 * style.metadata_inset;
    let indent = RULE_MARGIN * style.sizes.max();
    let stacked_w = if style.separation == Separation::Indent { meta_w - indent } else { meta_w };

    // Metadata region: stacked blocks, with an optional side-by-side
    // abstract pair at the position of the first abstract.
    let slots = style.slots();
    let mut pending: Vec<(Block, f64)> = Vec::new();
    let mut stacked_index = 0usize;
    let mut side_done = false;
    let flush = |pb: &mut PageBuilder<'_>,
                 pending: &mut Vec<(Block, f64)>,
                 cursor: &mut f64,
                 prev: &mut Option<(Block, f64)>| {
        if pending.is_empty() {
            return;
        }
        let start_top = match prev {
            Some((p, _)) => *cursor - RULE_MARGIN * p.size.max(pending[0].0.size),
            None => *cursor,
        };
        // The first pending block is always separated from what came
        // before by a gap; the rest follow the style's mode.
        *cursor = stack(pb, pending, style.separation, start_top, None);
        *prev = pending.pop();
        pending.clear();
    };

    for slot in &slots {
        if style.side_by_side_abstracts && slot.field == Field::Abstract {
            if side_done {
                continue;
            }
            side_done = true;
            flush(&mut pb, &mut pending, &mut cursor, &mut prev_block);
            let gutter = 3.0 * style.sizes.max();
            let col_w = (meta_w - gutter) / 2.0;
            let region_top = match &prev_block {
                Some((p, _)) => cursor - RULE_MARGIN * p.size.max(style.sizes.max()),
                None => cursor,
            };
            let mut bottoms = Vec::new();
            for (k, lang) in [Lang::Ko, Lang::En].into_iter().enumerate() {
                let x = meta_left + k as f64 * (col_w + gutter);
                let mut col: Vec<(Block, f64)> = Vec::new();
                if style.abstract_headings {
                    col.push((heading_block(lang, style), x));
                }
                let block = compose_field(&mut composer, FieldSlot::new(Field::Abstract, lang), style, col_w, &mut rec);
                col.push((block, x));
                bottoms.push(stack(&mut pb, &col, Separation::Gap, region_top, None));
            }
            cursor = bottoms.into_iter().fold(f64::INFINITY, f64::min);
            prev_block = Some((heading_block(Lang::En, style), meta_left));
            // Anything after the pair starts a fresh stacked run.
            stacked_index = 0;
            continue;
        }
        let x = if style.separation == Separation::Indent && stacked_index % 2 == 1 {
            meta_left + indent
        } else {
            meta_left
        };
        if slot.field == Field::Abstract && style.abstract_headings {
            pending.push((heading_block(slot.lang, style), x));
            stacked_index += 1;
        }
        let x = if style.separation == Separation::Indent && stacked_index % 2 == 1 {
            meta_left + indent
        } else {
            meta_left
        };
        let block = compose_field(&mut composer, *slot, style, stacked_w, &mut rec);
        pending.push((block, x));
        stacked_index += 1;
    }
    flush(&mut pb, &mut pending, &mut cursor, &mut prev_block);

    // Body region.
    let body_size = style.sizes.body;
    let gutter = 3.0 * style.sizes.max();
    let cols = usize::from(style.columns.clamp(1, 2));
    let col_w = (content_w - gutter * (cols - 1) as f64) / cols as f64;
    let body_top = cursor - RULE_MARGIN * style.sizes.max();
    let floor = m.bottom;
    let (pool, range) = match style.body_lang {
        Lang::En => (BODY_EN, (25, 60)),
        Lang::Ko => (BODY_KO, (18, 40)),
    };
    let heading_text = match style.body_lang {
        Lang::En => "1. Introduction",
        Lang::Ko => "1. 서론",
    };
    let body_mode = match style.separation {
        Separation::Indent => Separation::Gap,
        other => other,
    };
    let mut placed_any = false;
    for col in 0..cols {
        let x = left + col as f64 * (col_w + gutter);
        let mut col_blocks: Vec<(Block, f64)> = Vec::new();
        let mut bottom = body_top;
        if col == 0 {
            let mut h = single_line_block(heading_text, style.body_lang, style.sizes.heading);
            h.weight = Weight::Bold;
            bottom -= h.height();
            col_blocks.push((h, x));
        }
        loop {
            let lines = composer.paragraph(pool, range, col_w, body_size, false, body_mode == Separation::Width);
            let block = words_to_block(Label::O, style.body_lang, body_size, Weight::Regular, lines, col_w);
            // Worst-case spacing keeps the fit check independent of the mode.
            let need = RULE_MARGIN * style.sizes.max() + block.height();
            if bottom - need < floor {
                break;
            }
            bottom -= need;
            col_blocks.push((block, x));
        }
        if col_blocks.len() > usize::from(col == 0) || !placed_any {
            stack(&mut pb, &col_blocks, body_mode, body_top, None);
            placed_any = true;
        }
    }

    let PageBuilder { chars, mut gold, .. } = pb;
    let page = Page {
        doc_id: id.clone(),
        journal_id: style.journal_id.clone(),
        page_index: 0,
        width: PAGE_WIDTH,
        height: PAGE_HEIGHT,
        chars,
    };
    gold.sort_by(|a, b| b.y1.total_cmp(&a.y1).then(a.x0.total_cmp(&b.x0)).then(a.y0.total_cmp(&b.y0)));
    for (i, g) in gold.iter_mut().enumerate() {
        g.order = i;
    }
    SyntheticDoc { page, record: rec.record, gold }
}

fn journal_name(journal_id: &str) -> String {
    format!("Journal of Information Science {journal_id}")
}

/// Generates `docs_per_style` documents for each style.
pub fn generate_synthetic(styles: &[SyntheticStyle], docs_per_style: usize, seed: u64) -> Vec<SyntheticDoc> {
    let jobs: Vec<(usize, usize)> = (0..styles.len()).flat_map(|s| (0..docs_per_style).map(move |d| (s, d))).collect();
    crate::par::map_ordered(&jobs, 0, |&(s, d)| generate_doc(&styles[s], s, d, seed))
}

/// Replaces each letter with a random letter of the same script with
/// probability `rate`. Geometry and fonts are untouched.
pub fn add_substitution_noise(page: &Page, rate: f64, seed: u64) -> Page {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = page.clone();
    for g in &mut out.chars {
        let c = g.text;
        let hangul = is_hangul(c) && ('\u{AC00}'..='\u{D7A3}').contains(&c);
        if !(hangul || is_latin_letter(c) && c.is_ascii()) {
            continue;
        }
        if !rng.random_bool(rate) {
            continue;
        }
        g.text = if hangul {
            char::from_u32(rng.random_range(0xAC00..=0xD7A3)).unwrap()
        } else if c.is_ascii_uppercase() {
            rng.random_range(b'A'..=b'Z') as char
        } else {
            rng.random_range(b'a'..=b'z') as char
        };
    }
    out
}

/// Writes charstreams, records, gold labels and DOI fixtures under `out`.
pub fn write_corpus(docs: &[SyntheticDoc], out: &Path) -> io::Result<()> {
    let streams = out.join("charstreams");
    let fixtures = out.join("doi");
    fs::create_dir_all(&streams)?;
    fs::create_dir_all(&fixtures)?;
    let mut gold = String::new();
    for d in docs {
        fs::write(streams.join(format!("{}.json", d.page.doc_id)), to_charstream_json(&d.page))?;
        if let Some(doi) = &d.record.doi {
            let json = serde_json::to_string_pretty(&d.record).expect("record serialization cannot fail");
            fs::write(cache_path(&fixtures, doi), json)?;
        }
        for g in &d.gold {
            gold.push_str(&serde_json::to_string(g).expect("gold serialization cannot fail"));
            gold.push('\n');
        }
    }
    let records: Vec<MetadataRecord> = docs.iter().map(|d| d.record.clone()).collect();
    fs::write(out.join("metadata.jsonl"), write_metadata_jsonl(&records))?;
    fs::write(out.join("gold.jsonl"), gold)?;
    Ok(())
}
