//! Canonical character-stream input: one positioned glyph per record, first
//! page only, bottom-left origin with y increasing upward.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::matcher::normalize_text;
use crate::script::is_hangul;

pub const SCHEMA: &str = "lame.charstream/1";

#[derive(Debug, thiserror::Error)]
pub enum CharstreamError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("page has no glyphs")]
    EmptyPage,
    #[error("invalid metadata record: {0}")]
    Metadata(String),
}

fn schema_err(msg: impl Into<String>) -> CharstreamError {
    CharstreamError::Schema(msg.into())
}

/// One extracted glyph.
#[derive(Debug, Clone, PartialEq)]
pub struct CharGlyph {
    pub text: char,
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
    pub size: f64,
    /// Raw font name, possibly with a subset prefix such as `ABCDEF+`.
    pub font: Arc<str>,
    pub bold: bool,
    pub italic: bool,
}

impl CharGlyph {
    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Page {
    pub doc_id: String,
    pub journal_id: String,
    pub page_index: u32,
    pub width: f64,
    pub height: f64,
    pub chars: Vec<CharGlyph>,
}

#[derive(Serialize, Deserialize)]
struct RawFile {
    schema: String,
    doc_id: String,
    journal_id: String,
    page: RawPage,
    chars: Vec<RawGlyph>,
}

#[derive(Serialize, Deserialize)]
struct RawPage {
    index: u32,
    width: f64,
    height: f64,
}

#[derive(Serialize, Deserialize)]
struct RawGlyph {
    t: String,
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
    size: f64,
    font: String,
    bold: bool,
    italic: bool,
}

/// Parses and validates a charstream document.
///
/// Glyph boxes are clamped to the page. A glyph whose box is degenerate
/// before clamping is a schema error; a glyph that lies entirely off the
/// page (zero extent after clamping) is dropped.
pub fn validate_charstream(document: &str) -> Result<Page, CharstreamError> {
    let raw: RawFile = serde_json::from_str(document).map_err(|e| schema_err(e.to_string()))?;
    if raw.schema != SCHEMA {
        return Err(schema_err(format!("expected schema {SCHEMA:?}, found {:?}", raw.schema)));
    }
    if raw.page.index != 0 {
        return Err(schema_err(format!("page.index must be 0, found {}", raw.page.index)));
    }
    let (width, height) = (raw.page.width, raw.page.height);
    if !(width.is_finite() && width > 0.0 && height.is_finite() && height > 0.0) {
        return Err(schema_err("page width and height must be positive"));
    }

    let mut fonts: HashMap<String, Arc<str>> = HashMap::new();
    let mut chars = Vec::with_capacity(raw.chars.len());
    for (i, g) in raw.chars.into_iter().enumerate() {
        let mut scalars = g.t.chars();
        let text = match (scalars.next(), scalars.next()) {
            (Some(c), None) => c,
            _ => return Err(schema_err(format!("chars[{i}].t must be exactly one scalar"))),
        };
        let coords = [g.x0, g.y0, g.x1, g.y1, g.size];
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(schema_err(format!("chars[{i}] has a non-finite coordinate")));
        }
        if g.x0 >= g.x1 || g.y0 >= g.y1 {
            return Err(schema_err(format!("chars[{i}] has a degenerate box")));
        }
        if g.size <= 0.0 {
            return Err(schema_err(format!("chars[{i}].size must be positive")));
        }
        let x0 = g.x0.clamp(0.0, width);
        let x1 = g.x1.clamp(0.0, width);
        let y0 = g.y0.clamp(0.0, height);
        let y1 = g.y1.clamp(0.0, height);
        if x0 >= x1 || y0 >= y1 {
            continue;
        }
        let font = fonts.entry(g.font).or_insert_with_key(|k| Arc::from(k.as_str())).clone();
        chars.push(CharGlyph { text, x0, y0, x1, y1, size: g.size, font, bold: g.bold, italic: g.italic });
    }
    if chars.is_empty() {
        return Err(CharstreamError::EmptyPage);
    }
    Ok(Page { doc_id: raw.doc_id, journal_id: raw.journal_id, page_index: 0, width, height, chars })
}

/// Serializes a page back into the charstream format.
pub fn to_charstream_json(page: &Page) -> String {
    let raw = RawFile {
        schema: SCHEMA.to_string(),
        doc_id: page.doc_id.clone(),
        journal_id: page.journal_id.clone(),
        page: RawPage { index: page.page_index, width: page.width, height: page.height },
        chars: page
            .chars
            .iter()
            .map(|g| RawGlyph {
                t: g.text.to_string(),
                x0: g.x0,
                y0: g.y0,
                x1: g.x1,
                y1: g.y1,
                size: g.size,
                font: g.font.to_string(),
                bold: g.bold,
                italic: g.italic,
            })
            .collect(),
    };
    serde_json::to_string(&raw).expect("charstream serialization cannot fail")
}

/// Ground-truth metadata for one document. Absent fields are omitted when
/// serialized.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetadataRecord {
    pub doc_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title_ko: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title_en: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abstract_ko: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abstract_en: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keywords_ko: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keywords_en: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub author_names_ko: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub author_names_en: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub affiliations_ko: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub affiliations_en: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doi: Option<String>,
}

impl MetadataRecord {
    pub fn has_any_field(&self) -> bool {
        self.title_ko.is_some()
            || self.title_en.is_some()
            || self.abstract_ko.is_some()
            || self.abstract_en.is_some()
            || self.keywords_ko.is_some()
            || self.keywords_en.is_some()
            || self.author_names_ko.is_some()
            || self.author_names_en.is_some()
            || self.affiliations_ko.is_some()
            || self.affiliations_en.is_some()
            || self.doi.is_some()
    }

    pub fn validate(&self) -> Result<(), CharstreamError> {
        if !self.has_any_field() {
            return Err(CharstreamError::Metadata(format!("{}: no fields besides doc_id", self.doc_id)));
        }
        let korean: [(&str, Option<String>); 5] = [
            ("title_ko", self.title_ko.clone()),
            ("abstract_ko", self.abstract_ko.clone()),
            ("keywords_ko", self.keywords_ko.as_ref().map(|v| v.join("; "))),
            ("author_names_ko", self.author_names_ko.as_ref().map(|v| v.join(", "))),
            ("affiliations_ko", self.affiliations_ko.as_ref().map(|v| v.join("; "))),
        ];
        for (name, value) in korean {
            let Some(value) = value else { continue };
            let (normalized, _) = normalize_text(&value);
            if !normalized.is_empty() && !normalized.chars().any(is_hangul) {
                return Err(CharstreamError::Metadata(format!("{}: {name} contains no Hangul", self.doc_id)));
            }
        }
        Ok(())
    }
}

/// Reads a JSONL metadata file, validating every record. Blank lines are
/// skipped.
pub fn read_metadata_jsonl(content: &str) -> Result<Vec<MetadataRecord>, CharstreamError> {
    content
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, line)| {
            let rec: MetadataRecord =
                serde_json::from_str(line).map_err(|e| CharstreamError::Metadata(format!("line {}: {e}", n + 1)))?;
            rec.validate()?;
            Ok(rec)
        })
        .collect()
}

pub fn write_metadata_jsonl(records: &[MetadataRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serialization cannot fail"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(chars: &str) -> String {
        format!(
            r#"{{"schema":"lame.charstream/1","doc_id":"d1","journal_id":"j1","page":{{"index":0,"width":595.0,"height":842.0}},"chars":[{chars}]}}"#
        )
    }

    fn glyph(t: &str, x0: f64, y0: f64, x1: f64, y1: f64) -> String {
        format!(
            r#"{{"t":"{t}","x0":{x0},"y0":{y0},"x1":{x1},"y1":{y1},"size":12.0,"font":"ABCDEF+TimesNewRomanPSMT","bold":false,"italic":false}}"#
        )
    }

    #[test]
    fn accepts_minimal_page() {
        let page = validate_charstream(&doc(&glyph("A", 10.0, 700.0, 16.0, 712.0))).unwrap();
        assert_eq!(page.chars.len(), 1);
        assert_eq!(page.chars[0].text, 'A');
        assert_eq!(&*page.chars[0].font, "ABCDEF+TimesNewRomanPSMT");
    }

    #[test]
    fn rejects_degenerate_box() {
        let err = validate_charstream(&doc(&glyph("A", 20.0, 700.0, 20.0, 712.0))).unwrap_err();
        assert!(matches!(err, CharstreamError::Schema(_)));
    }

    #[test]
    fn clamps_to_page_bounds() {
        let page = validate_charstream(&doc(&glyph("A", 10.0, 700.0, 16.0, 900.0))).unwrap();
        assert_eq!(page.chars[0].y1, 842.0);
    }

    #[test]
    fn drops_glyphs_entirely_off_page() {
        let chars = format!("{},{}", glyph("A", 10.0, 700.0, 16.0, 712.0), glyph("B", 600.0, 700.0, 606.0, 712.0));
        let page = validate_charstream(&doc(&chars)).unwrap();
        assert_eq!(page.chars.len(), 1);
    }

    #[test]
    fn empty_page_is_an_error() {
        assert!(matches!(validate_charstream(&doc("")), Err(CharstreamError::EmptyPage)));
    }

    #[test]
    fn wrong_schema_tag() {
        let text = doc(&glyph("A", 10.0, 700.0, 16.0, 712.0)).replace("charstream/1", "charstream/9");
        assert!(matches!(validate_charstream(&text), Err(CharstreamError::Schema(_))));
    }

    #[test]
    fn missing_field_and_multi_scalar_text() {
        let missing = doc(&glyph("A", 10.0, 700.0, 16.0, 712.0)).replace(r#","bold":false"#, "");
        assert!(matches!(validate_charstream(&missing), Err(CharstreamError::Schema(_))));
        let wide = doc(&glyph("AB", 10.0, 700.0, 16.0, 712.0));
        assert!(matches!(validate_charstream(&wide), Err(CharstreamError::Schema(_))));
    }

    #[test]
    fn non_first_page_rejected() {
        let text = doc(&glyph("A", 10.0, 700.0, 16.0, 712.0)).replace(r#""index":0"#, r#""index":2"#);
        assert!(matches!(validate_charstream(&text), Err(CharstreamError::Schema(_))));
    }

    #[test]
    fn revalidation_is_identical() {
        let page = validate_charstream(&doc(&glyph("가", 10.5, 700.25, 16.125, 900.0))).unwrap();
        let again = validate_charstream(&to_charstream_json(&page)).unwrap();
        assert_eq!(page, again);
    }

    #[test]
    fn metadata_record_rules() {
        let empty = MetadataRecord { doc_id: "x".into(), ..Default::default() };
        assert!(empty.validate().is_err());
        let bad_ko = MetadataRecord { doc_id: "x".into(), title_ko: Some("English only".into()), ..Default::default() };
        assert!(bad_ko.validate().is_err());
        let ok =
            MetadataRecord {
                doc_id: "x".into(), title_ko: Some("심층 학습 (cid:12)".into()), ..Default::default()
            };
        assert!(ok.validate().is_ok());
    }

    #[test]
    fn metadata_jsonl_omits_absent_fields() {
        let rec = MetadataRecord { doc_id: "x".into(), title_en: Some("T".into()), ..Default::default() };
        let text = write_metadata_jsonl(std::slice::from_ref(&rec));
        assert_eq!(text, "{\"doc_id\":\"x\",\"title_en\":\"T\"}\n");
        assert_eq!(read_metadata_jsonl(&text).unwrap(), vec![rec]);
    }
}
