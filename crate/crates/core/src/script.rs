//! Script classification for the two languages the pipeline distinguishes.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Script {
    Hangul,
    Latin,
}

/// Hangul syllables and jamo (including compatibility and extended blocks).
pub fn is_hangul(c: char) -> bool {
    matches!(c as u32,
        0xAC00..=0xD7A3
        | 0x1100..=0x11FF
        | 0x3130..=0x318F
        | 0xA960..=0xA97F
        | 0xD7B0..=0xD7FF)
}

/// Latin letters: ASCII, Latin-1 supplement, Latin Extended-A/B and
/// Latin Extended Additional.
pub fn is_latin_letter(c: char) -> bool {
    if c.is_ascii_alphabetic() {
        return true;
    }
    matches!(c as u32, 0x00C0..=0x024F | 0x1E00..=0x1EFF) && c.is_alphabetic()
}

pub fn script_of(c: char) -> Option<Script> {
    if is_hangul(c) {
        Some(Script::Hangul)
    } else if is_latin_letter(c) {
        Some(Script::Latin)
    } else {
        None
    }
}

/// Counts `(hangul, latin)` scalars in `text`.
pub fn script_counts(text: &str) -> (usize, usize) {
    text.chars().fold((0, 0), |(h, l), c| match script_of(c) {
        Some(Script::Hangul) => (h + 1, l),
        Some(Script::Latin) => (h, l + 1),
        None => (h, l),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classifies_common_scalars() {
        assert!(is_hangul('한'));
        assert!(is_hangul('ㄱ'));
        assert!(!is_hangul('A'));
        assert!(is_latin_letter('é'));
        assert!(!is_latin_letter('×'));
        assert!(!is_latin_letter('1'));
        assert_eq!(script_of('。'), None);
    }

    #[test]
    fn counts_mixed_text() {
        assert_eq!(script_counts("요약 Abstract 요약 결과"), (6, 8));
    }
}
