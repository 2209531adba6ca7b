use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Box label: `O` for anything outside the metadata fields, plus ten
/// bilingual metadata fields.
///
/// Variant order is the canonical listing order; it is used as the final
/// tie-break in labeling and prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    O,
    TitleKo,
    TitleEn,
    OrgKo,
    OrgEn,
    AbstractKo,
    AbstractEn,
    KeywordsKo,
    KeywordsEn,
    AuthorNameKo,
    AuthorNameEn,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown label {0:?}")]
pub struct UnknownLabel(pub String);

impl Label {
    pub const ALL: [Label; 11] = [
        Label::O,
        Label::TitleKo,
        Label::TitleEn,
        Label::OrgKo,
        Label::OrgEn,
        Label::AbstractKo,
        Label::AbstractEn,
        Label::KeywordsKo,
        Label::KeywordsEn,
        Label::AuthorNameKo,
        Label::AuthorNameEn,
    ];

    /// The ten metadata fields, i.e. everything except `O`.
    pub fn fields() -> &'static [Label] {
        &Self::ALL[1..]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::O => "O",
            Label::TitleKo => "title_ko",
            Label::TitleEn => "title_en",
            Label::OrgKo => "org_ko",
            Label::OrgEn => "org_en",
            Label::AbstractKo => "abstract_ko",
            Label::AbstractEn => "abstract_en",
            Label::KeywordsKo => "keywords_ko",
            Label::KeywordsEn => "keywords_en",
            Label::AuthorNameKo => "author_name_ko",
            Label::AuthorNameEn => "author_name_en",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_korean(self) -> bool {
        matches!(self, Label::TitleKo | Label::OrgKo | Label::AbstractKo | Label::KeywordsKo | Label::AuthorNameKo)
    }

    pub fn is_field(self) -> bool {
        self != Label::O
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Label::ALL.iter().copied().find(|l| l.as_str() == s).ok_or_else(|| UnknownLabel(s.to_string()))
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_every_label_name() {
        for label in Label::ALL {
            assert_eq!(label.as_str().parse::<Label>().unwrap(), label);
        }
        assert_eq!(Label::ALL.len(), 11);
    }

    #[test]
    fn rejects_misspelled_label() {
        assert_eq!("titl_en".parse::<Label>(), Err(UnknownLabel("titl_en".into())));
    }

    #[test]
    fn listing_order_matches_indices() {
        for (i, label) in Label::ALL.iter().enumerate() {
            assert_eq!(label.index(), i);
        }
    }
}
