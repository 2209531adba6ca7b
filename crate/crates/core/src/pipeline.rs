//! End-to-end processing: charstreams in, labeled boxes and corpora out.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::charstream::{read_metadata_jsonl, validate_charstream, MetadataRecord};
use crate::classifier::FeatureSpec;
use crate::corpus::{build_vocab, emit_model_config, rows_to_jsonl, sequence_row, serialize_page, DEFAULT_VOCAB_SIZE};
use crate::doi::{DoiClient, DoiClientConfig, DoiError};
use crate::layout::{analyze_page, box_dump_jsonl, render_svg, LayoutParams};
use crate::matcher::{label_page, LabeledPage, MatcherParams};
use crate::{par, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub layout: LayoutParams,
    pub matcher: MatcherParams,
    /// DOI lookups for records that carry only a DOI; disabled when absent.
    pub doi: Option<DoiClientConfig>,
    pub vocab_size: usize,
    pub presets: Vec<String>,
    /// Also write one SVG overlay per document.
    pub svg: bool,
    /// Features for `train`.
    pub features: FeatureSpec,
    /// Seed for the synthetic generator.
    pub seed: u64,
    /// Directory of charstream files.
    pub input: Option<PathBuf>,
    /// Metadata JSONL keyed by `doc_id`.
    pub metadata: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            layout: LayoutParams::default(),
            matcher: MatcherParams::default(),
            doi: None,
            vocab_size: DEFAULT_VOCAB_SIZE,
            presets: vec!["base".into(), "small".into(), "tiny".into()],
            svg: false,
            features: FeatureSpec::TEXT,
            seed: 0,
            input: None,
            metadata: None,
            out: None,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn validate(&self) -> Result<()> {
        self.layout.validate()?;
        self.matcher.validate()?;
        if let Some(doi) = &self.doi {
            doi.validate()?;
        }
        self.features.validate()?;
        for preset in &self.presets {
            emit_model_config(preset)?;
        }
        for path in [&self.input, &self.metadata].into_iter().flatten() {
            if !path.exists() {
                return Err(Error::Config(format!("input path {} does not exist", path.display())));
            }
        }
        Ok(())
    }
}

/// Picks the record to label against: an explicit record with fields, or
/// one fetched by its DOI. `None` means the page stays unlabeled.
fn resolve_record(record: Option<&MetadataRecord>, doi: Option<&DoiClient>) -> Result<Option<MetadataRecord>> {
    let Some(record) = record else { return Ok(None) };
    if record.has_any_field() {
        return Ok(Some(record.clone()));
    }
    match (record.doi.as_deref(), doi) {
        (Some(id), Some(client)) => match client.fetch_metadata(id) {
            Ok(fetched) if fetched.has_any_field() => Ok(Some(fetched)),
            Ok(_) | Err(DoiError::NotFound(_)) => Ok(None),
            Err(e) => Err(e.into()),
        },
        _ => Ok(None),
    }
}

/// Validates one charstream, builds ordered boxes and labels them.
///
/// Without a usable record every box is labeled `O`.
pub fn process_document(
    charstream: &str,
    record: Option<&MetadataRecord>,
    doi: Option<&DoiClient>,
    config: &PipelineConfig,
) -> Result<LabeledPage> {
    let page = validate_charstream(charstream)?;
    let boxes = analyze_page(&page, &config.layout);
    match resolve_record(record, doi)? {
        Some(rec) => Ok(label_page(
            &page.doc_id,
            &page.journal_id,
            (page.width, page.height),
            boxes,
            &rec,
            &config.matcher,
            &config.layout,
        )?),
        None => Ok(LabeledPage::unlabeled(&page.doc_id, &page.journal_id, page.width, page.height, boxes)),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PipelineSummary {
    pub documents: usize,
    pub boxes: usize,
    pub labeled_boxes: usize,
    pub vocab_size: usize,
}

/// Charstream files (`*.json`) in `dir`, sorted by name.
pub fn list_charstreams(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

pub fn load_records(path: &Path) -> Result<HashMap<String, MetadataRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(read_metadata_jsonl(&text)?.into_iter().map(|r| (r.doc_id.clone(), r)).collect())
}

fn write(path: &Path, content: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, content).map_err(|e| Error::io(path, e))
}

fn doi_client(config: &PipelineConfig) -> Result<Option<DoiClient>> {
    Ok(config.doi.clone().map(|c| DoiClient::new(c.with_env_override())).transpose()?)
}

/// Labels every charstream in `input`, in file-name order.
pub fn process_directory(
    input: &Path,
    records: &HashMap<String, MetadataRecord>,
    config: &PipelineConfig,
    jobs: usize,
) -> Result<Vec<LabeledPage>> {
    config.validate()?;
    let client = doi_client(config)?;
    let texts: Vec<(PathBuf, String)> = list_charstreams(input)?
        .into_iter()
        .map(|p| fs::read_to_string(&p).map(|t| (p.clone(), t)).map_err(|e| Error::io(p, e)))
        .collect::<Result<_>>()?;

    let results = par::map_ordered(&texts, jobs, |(path, text)| {
        let doc_id = serde_json::from_str::<serde_json::Value>(text)
            .ok()
            .and_then(|v| v.get("doc_id").and_then(|d| d.as_str()).map(str::to_string));
        let record = doc_id.as_deref().and_then(|id| records.get(id));
        process_document(text, record, client.as_ref(), config).map_err(|e| match e {
            Error::Charstream(inner) => Error::Config(format!("{}: {inner}", path.display())),
            other => other,
        })
    });
    results.into_iter().collect()
}

/// Writes `pretrain.txt`, `finetune.jsonl` and `sequences.jsonl`; returns
/// the pretraining text.
pub fn write_corpus_files(pages: &[LabeledPage], out: &Path) -> Result<String> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut pretrain = String::new();
    let mut finetune = Vec::new();
    let mut sequences = Vec::new();
    for page in pages {
        let (line, rows) = serialize_page(page);
        pretrain.push_str(&line);
        pretrain.push('\n');
        finetune.extend(rows);
        sequences.push(sequence_row(page));
    }
    write(&out.join("pretrain.txt"), &pretrain)?;
    write(&out.join("finetune.jsonl"), rows_to_jsonl(&finetune))?;
    write(&out.join("sequences.jsonl"), rows_to_jsonl(&sequences))?;
    Ok(pretrain)
}

/// Processes every charstream in `input` and writes all artifacts to `out`.
///
/// Output is byte-identical across runs and thread counts.
pub fn run_pipeline(
    input: &Path,
    records: &HashMap<String, MetadataRecord>,
    out: &Path,
    config: &PipelineConfig,
    jobs: usize,
) -> Result<PipelineSummary> {
    let pages = process_directory(input, records, config, jobs)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut boxes = String::new();
    let mut labeled = String::new();
    for page in &pages {
        let plain: Vec<_> = page.boxes.iter().map(|b| b.text_box.clone()).collect();
        boxes.push_str(&box_dump_jsonl(&page.doc_id, &plain));
        labeled.push_str(&page.to_jsonl());
    }
    write(&out.join("boxes.jsonl"), boxes)?;
    write(&out.join("labeled.jsonl"), labeled)?;
    let pretrain = write_corpus_files(&pages, out)?;

    let vocab = build_vocab(pretrain.lines(), config.vocab_size)?;
    write(&out.join("vocab.txt"), vocab.to_file_string())?;
    for preset in &config.presets {
        write(&out.join(format!("config_{preset}.txt")), emit_model_config(preset)?.to_kv())?;
    }
    if config.svg {
        let dir = out.join("svg");
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for page in &pages {
            write(&dir.join(format!("{}.svg", page.doc_id)), page_svg(page))?;
        }
    }

    Ok(PipelineSummary {
        documents: pages.len(),
        boxes: pages.iter().map(|p| p.boxes.len()).sum(),
        labeled_boxes: pages.iter().flat_map(|p| &p.boxes).filter(|b| b.label.is_field()).count(),
        vocab_size: vocab.len(),
    })
}

pub fn page_svg(page: &LabeledPage) -> String {
    let items: Vec<_> = page.boxes.iter().map(|b| (&b.text_box, Some(b.label))).collect();
    render_svg(page.page_width, page.page_height, &items)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charstream::to_charstream_json;
    use crate::label::Label;
    use crate::synth::{generate_doc, plain_style};

    #[test]
    fn plain_document_labels_in_reading_order() {
        let style = plain_style("P01");
        let doc = generate_doc(&style, 0, 0, 42);
        let page =
            process_document(&to_charstream_json(&doc.page), Some(&doc.record), None, &PipelineConfig::default())
                .unwrap();
        let labels: Vec<Label> = page.boxes.iter().map(|b| b.label).collect();
        assert_eq!(
            &labels[..5],
            &[Label::TitleEn, Label::AuthorNameEn, Label::OrgEn, Label::AbstractEn, Label::KeywordsEn]
        );
        assert!(labels[5..].iter().all(|&l| l == Label::O));
    }

    #[test]
    fn no_record_means_all_outside() {
        let doc = generate_doc(&plain_style("P01"), 0, 1, 42);
        let page = process_document(&to_charstream_json(&doc.page), None, None, &PipelineConfig::default()).unwrap();
        assert!(page.boxes.iter().all(|b| b.label == Label::O));
    }

    #[test]
    fn config_rejects_unknown_keys_and_bad_values() {
        assert!(PipelineConfig::from_json(r#"{"vocab_sise": 10}"#).is_err());
        assert!(PipelineConfig::from_json(r#"{"matcher": {"threshold": 120}}"#).is_err());
        assert!(PipelineConfig::from_json(r#"{"presets": ["huge"]}"#).is_err());
        assert!(PipelineConfig::from_json(r#"{"input": "/nonexistent/charstreams"}"#).is_err());
        assert!(PipelineConfig::from_json(r#"{"features": {"use_text": false, "use_position": false}}"#).is_err());
        let c = PipelineConfig::from_json(r#"{"matcher": {"threshold": 70}}"#).unwrap();
        assert_eq!(c.matcher.threshold, 70.0);
    }
}
