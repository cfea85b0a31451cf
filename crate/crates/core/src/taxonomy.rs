//! Risk categories, risk tags and risk words.
//!
//! Every visual tag and every spoken word belongs to exactly one of the four
//! moderation categories. The taxonomy fixes a dense index for tags and for
//! words so that per-frame and per-clip scores can be stored as plain vectors.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("io error reading taxonomy: {0}")]
    Io(#[from] std::io::Error),
    #[error("taxonomy parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unknown risk category `{0}`")]
    UnknownCategory(String),
    #[error("taxonomy must define all 4 categories, missing `{0}`")]
    MissingCategory(RiskCategory),
    #[error("id `{id}` is listed more than once")]
    DuplicateId { id: String },
    #[error("unknown risk tag `{0}`")]
    UnknownTag(String),
    #[error("unknown risk word `{0}`")]
    UnknownWord(String),
}

/// One of the four moderation policies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskCategory {
    FalseAdvertising,
    ProtectedProducts,
    InappropriateBusiness,
    SensitiveContent,
}

impl RiskCategory {
    pub const ALL: [RiskCategory; 4] = [
        RiskCategory::FalseAdvertising,
        RiskCategory::ProtectedProducts,
        RiskCategory::InappropriateBusiness,
        RiskCategory::SensitiveContent,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RiskCategory::FalseAdvertising => "false_advertising",
            RiskCategory::ProtectedProducts => "protected_products",
            RiskCategory::InappropriateBusiness => "inappropriate_business",
            RiskCategory::SensitiveContent => "sensitive_content",
        }
    }

    /// Position in the canonical category order.
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for RiskCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RiskCategory {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RiskCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| TaxonomyError::UnknownCategory(s.to_string()))
    }
}

/// A moderator verdict or a ground-truth label: `normal` or one category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Label {
    Normal,
    Deviant(RiskCategory),
}

impl Label {
    pub fn is_deviant(self) -> bool {
        matches!(self, Label::Deviant(_))
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Normal => f.write_str("normal"),
            Label::Deviant(c) => f.write_str(c.as_str()),
        }
    }
}

impl FromStr for Label {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "normal" {
            Ok(Label::Normal)
        } else {
            s.parse().map(Label::Deviant)
        }
    }
}

impl TryFrom<String> for Label {
    type Error = TaxonomyError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<Label> for String {
    fn from(value: Label) -> Self {
        value.to_string()
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct CategoryLists {
    #[serde(default)]
    tags: Vec<String>,
    #[serde(default)]
    words: Vec<String>,
}

/// Tag and word vocabularies grouped by category.
///
/// Tags are indexed in category order, then in the order they are listed
/// within a category; words likewise.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskTaxonomy {
    tags: Vec<(String, RiskCategory)>,
    words: Vec<(String, RiskCategory)>,
    tag_index: HashMap<String, usize>,
    word_index: HashMap<String, usize>,
}

impl RiskTaxonomy {
    /// Builds a taxonomy from per-category tag and word lists.
    ///
    /// Ids must be unique across both tags and words of all categories.
    pub fn new(
        entries: impl IntoIterator<Item = (RiskCategory, Vec<String>, Vec<String>)>,
    ) -> Result<Self, TaxonomyError> {
        let mut grouped: BTreeMap<RiskCategory, (Vec<String>, Vec<String>)> = BTreeMap::new();
        for (cat, tags, words) in entries {
            let slot = grouped.entry(cat).or_default();
            slot.0.extend(tags);
            slot.1.extend(words);
        }
        if let Some(missing) = RiskCategory::ALL.into_iter().find(|c| !grouped.contains_key(c)) {
            return Err(TaxonomyError::MissingCategory(missing));
        }

        let mut taxonomy = RiskTaxonomy {
            tags: Vec::new(),
            words: Vec::new(),
            tag_index: HashMap::new(),
            word_index: HashMap::new(),
        };
        let mut seen = std::collections::HashSet::new();
        for (cat, (tags, words)) in grouped {
            for tag in tags {
                if !seen.insert(tag.clone()) {
                    return Err(TaxonomyError::DuplicateId { id: tag });
                }
                taxonomy.tag_index.insert(tag.clone(), taxonomy.tags.len());
                taxonomy.tags.push((tag, cat));
            }
            for word in words {
                if !seen.insert(word.clone()) {
                    return Err(TaxonomyError::DuplicateId { id: word });
                }
                taxonomy.word_index.insert(word.clone(), taxonomy.words.len());
                taxonomy.words.push((word, cat));
            }
        }
        Ok(taxonomy)
    }

    /// Parses the taxonomy file format `{category: {tags: [...], words: [...]}}`.
    pub fn from_json(text: &str) -> Result<Self, TaxonomyError> {
        let raw: BTreeMap<String, CategoryLists> = serde_json::from_str(text)?;
        let mut entries = Vec::with_capacity(raw.len());
        for (name, lists) in raw {
            let cat: RiskCategory = name.parse()?;
            entries.push((cat, lists.tags, lists.words));
        }
        Self::new(entries)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TaxonomyError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let mut raw: BTreeMap<&str, CategoryLists> = RiskCategory::ALL
            .iter()
            .map(|c| (c.as_str(), CategoryLists::default()))
            .collect();
        for (tag, cat) in &self.tags {
            raw.get_mut(cat.as_str()).unwrap().tags.push(tag.clone());
        }
        for (word, cat) in &self.words {
            raw.get_mut(cat.as_str()).unwrap().words.push(word.clone());
        }
        serde_json::to_string_pretty(&raw).expect("taxonomy serializes")
    }

    /// A small built-in vocabulary, three tags and three words per category.
    pub fn builtin() -> Self {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        Self::new([
            (
                RiskCategory::FalseAdvertising,
                s(&["exaggerated_banner", "fake_certificate", "before_after_photo"]),
                s(&["miracle", "guaranteed", "best_ever"]),
            ),
            (
                RiskCategory::ProtectedProducts,
                s(&["luxury_logo", "turtle", "ivory"]),
                s(&["replica", "wildlife", "prescription"]),
            ),
            (
                RiskCategory::InappropriateBusiness,
                s(&["qr_code", "phone_number", "cash_pile"]),
                s(&["add_wechat", "private_deal", "transfer"]),
            ),
            (
                RiskCategory::SensitiveContent,
                s(&["revealing_outfit", "weapon", "smoking"]),
                s(&["gamble", "violence", "cigarette"]),
            ),
        ])
        .expect("builtin taxonomy is valid")
    }

    pub fn tag_count(&self) -> usize {
        self.tags.len()
    }

    pub fn word_count(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty() && self.words.is_empty()
    }

    pub fn categories(&self) -> [RiskCategory; 4] {
        RiskCategory::ALL
    }

    pub fn tag_index(&self, tag: &str) -> Result<usize, TaxonomyError> {
        self.tag_index
            .get(tag)
            .copied()
            .ok_or_else(|| TaxonomyError::UnknownTag(tag.to_string()))
    }

    pub fn word_index(&self, word: &str) -> Result<usize, TaxonomyError> {
        self.word_index
            .get(word)
            .copied()
            .ok_or_else(|| TaxonomyError::UnknownWord(word.to_string()))
    }

    pub fn tag(&self, index: usize) -> &str {
        &self.tags[index].0
    }

    pub fn word(&self, index: usize) -> &str {
        &self.words[index].0
    }

    pub fn tag_category(&self, index: usize) -> RiskCategory {
        self.tags[index].1
    }

    pub fn word_category(&self, index: usize) -> RiskCategory {
        self.words[index].1
    }

    pub fn tags(&self) -> impl Iterator<Item = (&str, RiskCategory)> {
        self.tags.iter().map(|(t, c)| (t.as_str(), *c))
    }

    pub fn words(&self) -> impl Iterator<Item = (&str, RiskCategory)> {
        self.words.iter().map(|(w, c)| (w.as_str(), *c))
    }

    pub fn tags_in(&self, cat: RiskCategory) -> Vec<usize> {
        (0..self.tags.len()).filter(|&i| self.tags[i].1 == cat).collect()
    }

    pub fn words_in(&self, cat: RiskCategory) -> Vec<usize> {
        (0..self.words.len()).filter(|&i| self.words[i].1 == cat).collect()
    }
}
