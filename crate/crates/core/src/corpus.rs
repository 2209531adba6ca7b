//! Layout-sequence corpus, per-box fine-tuning rows, subword vocabulary and
//! model configuration presets.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::label::Label;
use crate::matcher::LabeledPage;

pub const SEP: &str = "[SEP]";
pub const SEP_JOINER: &str = " [SEP] ";
const SEP_ESCAPED: &str = "[SEP\u{200B}]";
pub const SPECIALS: [&str; 5] = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"];
pub const UNK: &str = "[UNK]";
pub const DEFAULT_VOCAB_SIZE: usize = 10_000;
const MAX_WORD_CHARS: usize = 100;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("target vocabulary size {target} cannot hold {needed} specials and base symbols")]
    TargetTooSmall { target: usize, needed: usize },
    #[error("unknown model preset {0:?}")]
    UnknownPreset(String),
    #[error("invalid vocabulary file: {0}")]
    VocabFormat(String),
}

/// One fine-tuning example: a single box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneRow {
    pub text: String,
    pub label: Label,
    pub doc_id: String,
    pub journal_id: String,
    pub order: usize,
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
    pub page_width: f64,
    pub page_height: f64,
}

/// A whole page as one separator-joined sequence with per-segment labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceRow {
    pub doc_id: String,
    pub journal_id: String,
    pub text: String,
    pub labels: Vec<Label>,
}

pub fn escape_separator(text: &str) -> String {
    text.replace(SEP, SEP_ESCAPED)
}

pub fn split_sequence(line: &str) -> Vec<&str> {
    line.split(SEP_JOINER).collect()
}

/// Pretraining line plus one fine-tuning row per box, in reading order.
pub fn serialize_page(page: &LabeledPage) -> (String, Vec<FinetuneRow>) {
    let line = page.boxes.iter().map(|b| escape_separator(&b.text_box.text)).collect::<Vec<_>>().join(SEP_JOINER);
    let rows = page
        .boxes
        .iter()
        .map(|b| FinetuneRow {
            text: b.text_box.text.clone(),
            label: b.label,
            doc_id: page.doc_id.clone(),
            journal_id: page.journal_id.clone(),
            order: b.text_box.order,
            x0: b.text_box.x0,
            y0: b.text_box.y0,
            x1: b.text_box.x1,
            y1: b.text_box.y1,
            page_width: page.page_width,
            page_height: page.page_height,
        })
        .collect();
    (line, rows)
}

pub fn sequence_row(page: &LabeledPage) -> SequenceRow {
    let (text, _) = serialize_page(page);
    SequenceRow {
        doc_id: page.doc_id.clone(),
        journal_id: page.journal_id.clone(),
        text,
        labels: page.boxes.iter().map(|b| b.label).collect(),
    }
}

pub fn rows_to_jsonl<T: Serialize>(rows: &[T]) -> String {
    let mut out = String::new();
    for r in rows {
        out.push_str(&serde_json::to_string(r).expect("row serialization cannot fail"));
        out.push('\n');
    }
    out
}

pub fn rows_from_jsonl(content: &str) -> Result<Vec<FinetuneRow>, serde_json::Error> {
    content.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    entries: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    fn from_entries(entries: Vec<String>) -> Result<Self, CorpusError> {
        for (i, s) in SPECIALS.iter().enumerate() {
            if entries.get(i).map(String::as_str) != Some(*s) {
                return Err(CorpusError::VocabFormat(format!("id {i} must be {s}")));
            }
        }
        let mut index = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            if e.is_empty() || e.chars().any(char::is_whitespace) {
                return Err(CorpusError::VocabFormat(format!("entry {i} is empty or contains whitespace")));
            }
            if index.insert(e.clone(), i as u32).is_some() {
                return Err(CorpusError::VocabFormat(format!("duplicate entry {e:?}")));
            }
        }
        Ok(Self { entries, index })
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    /// One token per line; the line number is the id.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(e);
            out.push('\n');
        }
        out
    }

    pub fn from_file_string(content: &str) -> Result<Self, CorpusError> {
        Self::from_entries(content.lines().map(str::to_string).collect())
    }
}

fn word_symbols(word: &str) -> Vec<String> {
    word.chars().enumerate().map(|(i, c)| if i == 0 { c.to_string() } else { format!("##{c}") }).collect()
}

fn merged_token(left: &str, right: &str) -> String {
    format!("{left}{}", right.strip_prefix("##").unwrap_or(right))
}

/// Frequency-merge subword vocabulary.
///
/// Starts from the specials and every base symbol (word-initial characters
/// plain, word-internal ones `##`-prefixed), then repeatedly merges the most
/// frequent adjacent pair (ties to the lexicographically smaller pair) until
/// the target size is reached or no pair occurs at least twice.
pub fn build_vocab<I, S>(corpus_lines: I, target_size: usize) -> Result<Vocab, CorpusError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut word_freq: HashMap<String, usize> = HashMap::new();
    for line in corpus_lines {
        for w in line.as_ref().split_whitespace() {
            if !SPECIALS.contains(&w) {
                *word_freq.entry(w.to_string()).or_default() += 1;
            }
        }
    }
    let mut words: Vec<(String, usize)> = word_freq.into_iter().collect();
    words.sort();

    // Symbols are interned; ids are stable for the whole build.
    let mut symbols: Vec<String> = Vec::new();
    let mut symbol_id: HashMap<String, u32> = HashMap::new();
    let mut intern = |s: String, symbols: &mut Vec<String>| -> u32 {
        *symbol_id.entry(s.clone()).or_insert_with(|| {
            symbols.push(s);
            (symbols.len() - 1) as u32
        })
    };

    let mut seqs: Vec<Vec<u32>> = Vec::with_capacity(words.len());
    let mut alphabet = BTreeSet::new();
    for (w, _) in &words {
        let seq: Vec<u32> = word_symbols(w)
            .into_iter()
            .map(|s| {
                alphabet.insert(s.clone());
                intern(s, &mut symbols)
            })
            .collect();
        seqs.push(seq);
    }

    let needed = SPECIALS.len() + alphabet.len();
    if target_size < needed {
        return Err(CorpusError::TargetTooSmall { target: target_size, needed });
    }
    let mut entries: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
    let mut present: HashSet<String> = entries.iter().cloned().collect();
    for s in alphabet {
        present.insert(s.clone());
        entries.push(s);
    }

    let mut pair_count: HashMap<(u32, u32), usize> = HashMap::new();
    let mut pair_words: HashMap<(u32, u32), HashSet<usize>> = HashMap::new();
    for (wi, seq) in seqs.iter().enumerate() {
        let freq = words[wi].1;
        for p in seq.windows(2) {
            *pair_count.entry((p[0], p[1])).or_default() += freq;
            pair_words.entry((p[0], p[1])).or_default().insert(wi);
        }
    }

    type HeapItem = (usize, Reverse<(String, String)>, (u32, u32));
    let mut heap: BinaryHeap<HeapItem> = pair_count
        .iter()
        .map(|(&(a, b), &c)| (c, Reverse((symbols[a as usize].clone(), symbols[b as usize].clone())), (a, b)))
        .collect();

    while entries.len() < target_size {
        let Some((count, _, pair)) = heap.pop() else { break };
        if pair_count.get(&pair).copied().unwrap_or(0) != count {
            continue; // stale
        }
        if count < 2 {
            break;
        }
        let token = merged_token(&symbols[pair.0 as usize], &symbols[pair.1 as usize]);
        let new_id = intern(token.clone(), &mut symbols);
        if present.insert(token.clone()) {
            entries.push(token);
        }

        let mut touched: HashSet<(u32, u32)> = HashSet::new();
        let affected: Vec<usize> = {
            let mut v: Vec<usize> = pair_words.remove(&pair).unwrap_or_default().into_iter().collect();
            v.sort_unstable();
            v
        };
        for wi in affected {
            let freq = words[wi].1;
            let old = std::mem::take(&mut seqs[wi]);
            for p in old.windows(2) {
                let key = (p[0], p[1]);
                if let Some(c) = pair_count.get_mut(&key) {
                    *c -= freq;
                }
                if let Some(set) = pair_words.get_mut(&key) {
                    set.remove(&wi);
                }
                touched.insert(key);
            }
            let mut merged = Vec::with_capacity(old.len());
            let mut k = 0;
            while k < old.len() {
                if k + 1 < old.len() && (old[k], old[k + 1]) == pair {
                    merged.push(new_id);
                    k += 2;
                } else {
                    merged.push(old[k]);
                    k += 1;
                }
            }
            for p in merged.windows(2) {
                let key = (p[0], p[1]);
                *pair_count.entry(key).or_default() += freq;
                pair_words.entry(key).or_default().insert(wi);
                touched.insert(key);
            }
            seqs[wi] = merged;
        }
        pair_count.remove(&pair);
        let mut touched: Vec<(u32, u32)> = touched.into_iter().collect();
        touched.sort_unstable();
        for key in touched {
            match pair_count.get(&key).copied() {
                Some(0) => {
                    pair_count.remove(&key);
                }
                Some(c) => {
                    heap.push((c, Reverse((symbols[key.0 as usize].clone(), symbols[key.1 as usize].clone())), key))
                }
                None => {}
            }
        }
    }

    Vocab::from_entries(entries)
}

fn tokenize_word(word: &str, vocab: &Vocab, out: &mut Vec<String>) {
    if SPECIALS.contains(&word) {
        out.push(word.to_string());
        return;
    }
    let chars: Vec<(usize, char)> = word.char_indices().collect();
    if chars.len() > MAX_WORD_CHARS {
        out.push(UNK.to_string());
        return;
    }
    let mut pieces = Vec::new();
    let mut start = 0;
    while start < chars.len() {
        let from = chars[start].0;
        let mut found = None;
        for end in (start + 1..=chars.len()).rev() {
            let to = chars.get(end).map_or(word.len(), |c| c.0);
            let piece = if start == 0 { word[from..to].to_string() } else { format!("##{}", &word[from..to]) };
            if vocab.contains(&piece) {
                found = Some((end, piece));
                break;
            }
        }
        match found {
            Some((end, piece)) => {
                pieces.push(piece);
                start = end;
            }
            None => {
                out.push(UNK.to_string());
                return;
            }
        }
    }
    out.extend(pieces);
}

/// Greedy longest-match subword tokenization, truncated to `max_seq_len`.
pub fn tokenize(text: &str, vocab: &Vocab, max_seq_len: usize) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        if out.len() >= max_seq_len {
            break;
        }
        tokenize_word(word, vocab, &mut out);
    }
    out.truncate(max_seq_len);
    out
}

/// Joins subword pieces back into whitespace-separated words.
pub fn detokenize(tokens: &[String]) -> String {
    let mut out = String::new();
    for t in tokens {
        match t.strip_prefix("##") {
            Some(rest) if !out.is_empty() => out.push_str(rest),
            _ => {
                if !out.is_empty() {
                    out.push(' ');
                }
                out.push_str(t);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub preset: String,
    pub num_layers: u32,
    pub hidden_size: u32,
    pub num_attention_heads: u32,
    pub epochs: u32,
    pub batch_size: u32,
    pub learning_rate: f64,
    pub max_seq_len: u32,
    pub vocab_size: u32,
}

impl ModelConfig {
    /// Flat `key=value` lines.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "preset={}", self.preset);
        let _ = writeln!(out, "num_layers={}", self.num_layers);
        let _ = writeln!(out, "hidden_size={}", self.hidden_size);
        let _ = writeln!(out, "num_attention_heads={}", self.num_attention_heads);
        let _ = writeln!(out, "epochs={}", self.epochs);
        let _ = writeln!(out, "batch_size={}", self.batch_size);
        let _ = writeln!(out, "learning_rate={:e}", self.learning_rate);
        let _ = writeln!(out, "max_seq_len={}", self.max_seq_len);
        let _ = writeln!(out, "vocab_size={}", self.vocab_size);
        out
    }
}

pub fn emit_model_config(preset: &str) -> Result<ModelConfig, CorpusError> {
    let (layers, hidden, heads) = match preset {
        "base" => (12, 768, 12),
        "small" => (4, 512, 8),
        "tiny" => (2, 128, 2),
        other => return Err(CorpusError::UnknownPreset(other.to_string())),
    };
    Ok(ModelConfig {
        preset: preset.to_string(),
        num_layers: layers,
        hidden_size: hidden,
        num_attention_heads: heads,
        epochs: 5,
        batch_size: 32,
        learning_rate: 2e-5,
        max_seq_len: 256,
        vocab_size: DEFAULT_VOCAB_SIZE as u32,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{FontProfile, TextBox};
    use crate::matcher::LabeledBox;

    fn page(texts: &[(&str, Label)]) -> LabeledPage {
        let boxes = texts
            .iter()
            .enumerate()
            .map(|(i, (t, l))| LabeledBox {
                text_box: TextBox {
                    lines: vec![],
                    x0: 0.0,
                    y0: 0.0,
                    x1: 1.0,
                    y1: 1.0,
                    text: t.to_string(),
                    font_profile: FontProfile::default(),
                    order: i,
                },
                label: *l,
                score: 0.0,
            })
            .collect();
        LabeledPage { doc_id: "d".into(), journal_id: "j".into(), page_width: 595.0, page_height: 842.0, boxes }
    }

    #[test]
    fn serializes_two_boxes() {
        let (line, rows) = serialize_page(&page(&[("T", Label::TitleEn), ("A", Label::AbstractEn)]));
        assert_eq!(line, "T [SEP] A");
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].label, Label::AbstractEn);
        assert_eq!(rows[1].order, 1);
    }

    #[test]
    fn single_box_has_no_separator() {
        let (line, _) = serialize_page(&page(&[("only", Label::O)]));
        assert_eq!(line, "only");
    }

    #[test]
    fn literal_separator_is_escaped() {
        let (line, _) = serialize_page(&page(&[("x [SEP] y", Label::O), ("z", Label::O)]));
        assert_eq!(line, "x [SEP\u{200B}] y [SEP] z");
        assert_eq!(split_sequence(&line), ["x [SEP\u{200B}] y", "z"]);
    }

    #[test]
    fn vocab_from_repeated_word() {
        // "b" never starts a word, so only "##b" enters the alphabet.
        let v = build_vocab(["aaab aaab"], 8).unwrap();
        assert_eq!(v.entries()[5..], ["##a", "##b", "a"]);
        // All three pairs occur twice; ("##a", "##a") is lexicographically
        // smallest, so the next entry is "##aa".
        let v = build_vocab(["aaab aaab"], 9).unwrap();
        assert_eq!(v.entries().last().unwrap(), "##aa");
    }

    #[test]
    fn vocab_stops_without_repeated_pairs() {
        let v = build_vocab(["x"], 7).unwrap();
        assert_eq!(v.len(), 6);
    }

    #[test]
    fn vocab_target_too_small() {
        assert!(matches!(build_vocab(["x"], 3), Err(CorpusError::TargetTooSmall { .. })));
    }

    #[test]
    fn vocab_file_round_trip() {
        let v = build_vocab(["the cat sat on the mat", "the hat"], 40).unwrap();
        let back = Vocab::from_file_string(&v.to_file_string()).unwrap();
        assert_eq!(v, back);
        assert!(Vocab::from_file_string("[PAD]\n[UNK]\n").is_err());
    }

    fn vocab_with(extra: &[&str]) -> Vocab {
        let mut entries: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        entries.extend(extra.iter().map(|s| s.to_string()));
        Vocab::from_entries(entries).unwrap()
    }

    #[test]
    fn tokenize_greedy_and_fallback() {
        let v = vocab_with(&["ab", "##c", "a", "##b"]);
        assert_eq!(tokenize("abc", &v, 256), ["ab", "##c"]);
        assert_eq!(tokenize("zq", &v, 256), ["[UNK]"]);
        assert_eq!(tokenize("abc abc", &v, 3), ["ab", "##c", "ab"]);
        assert_eq!(tokenize("abc [SEP] ab", &v, 256), ["ab", "##c", "[SEP]", "ab"]);
    }

    #[test]
    fn detokenize_rejoins_pieces() {
        let toks: Vec<String> = ["ab", "##c", "x"].iter().map(|s| s.to_string()).collect();
        assert_eq!(detokenize(&toks), "abc x");
    }

    #[test]
    fn presets() {
        let base = emit_model_config("base").unwrap();
        assert_eq!(
            (base.num_layers, base.hidden_size, base.num_attention_heads, base.epochs, base.batch_size),
            (12, 768, 12, 5, 32)
        );
        assert_eq!((base.learning_rate, base.max_seq_len, base.vocab_size), (2e-5, 256, 10_000));
        let tiny = emit_model_config("tiny").unwrap();
        assert_eq!((tiny.num_layers, tiny.hidden_size, tiny.num_attention_heads), (2, 128, 2));
        assert!(matches!(emit_model_config("huge"), Err(CorpusError::UnknownPreset(_))));
        assert!(base.to_kv().contains("learning_rate=2e-5\n"));
    }
}
