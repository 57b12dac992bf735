//! Romanization of arbitrary scripts into lowercase, diacritics-free ASCII.
//!
//! Text is lowercased and canonically decomposed, rewritten left to right
//! with the longest matching table key, stripped of combining marks, and
//! finally any character still outside ASCII is replaced by `?`. Hangul
//! syllables decompose into conjoining jamo during the first step, so the
//! bundled Hangul table only needs jamo entries.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::corpus::{RawSentence, SentenceCorpus, Sentences};
use crate::error::{Error, Result};

const BUNDLED: &[(&str, &str)] = &[
    ("greek", include_str!("../tables/greek.json")),
    ("cyrillic", include_str!("../tables/cyrillic.json")),
    ("arabic", include_str!("../tables/arabic.json")),
    ("hebrew", include_str!("../tables/hebrew.json")),
    ("devanagari", include_str!("../tables/devanagari.json")),
    ("tamil", include_str!("../tables/tamil.json")),
    ("hangul", include_str!("../tables/hangul.json")),
];

/// Tables enabled when no explicit selection is made.
pub const DEFAULT_TABLES: &[&str] = &["greek", "cyrillic"];

/// Replacement rules for one script. Entries are kept sorted by key length
/// (in characters) descending, then by code points.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslitTable {
    pub script_name: String,
    pub entries: Vec<(String, String)>,
}

impl TranslitTable {
    pub fn new(script_name: impl Into<String>, entries: Vec<(String, String)>) -> Result<Self> {
        let script_name = script_name.into();
        for (key, replacement) in &entries {
            if key.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "table {script_name:?} has an empty key"
                )));
            }
            if !replacement.chars().all(|c| c.is_ascii_alphabetic()) {
                return Err(Error::InvalidArgument(format!(
                    "table {script_name:?}: replacement {replacement:?} for {key:?} is not ASCII letters"
                )));
            }
        }
        let mut entries = entries;
        entries.sort_by(|(a, _), (b, _)| {
            b.chars()
                .count()
                .cmp(&a.chars().count())
                .then_with(|| a.chars().cmp(b.chars()))
        });
        entries.dedup_by(|a, b| a.0 == b.0);
        Ok(TranslitTable {
            script_name,
            entries,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: TranslitTable = serde_json::from_str(text)?;
        TranslitTable::new(raw.script_name, raw.entries)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// One of the tables shipped with the crate.
    pub fn bundled(name: &str) -> Result<Self> {
        let (_, json) = BUNDLED
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| Error::InvalidArgument(format!("no bundled table named {name:?}")))?;
        Self::from_json(json)
    }

    pub fn bundled_names() -> impl Iterator<Item = &'static str> {
        BUNDLED.iter().map(|(n, _)| *n)
    }
}

/// Removes combining marks after canonical decomposition and recomposes.
/// ASCII input is returned unchanged.
pub fn strip_diacritics(text: &str) -> String {
    if text.is_ascii() {
        return text.to_string();
    }
    text.nfd()
        .filter(|c| !is_combining_mark(*c))
        .nfc()
        .collect()
}

/// Compiled set of tables applying longest-match replacement.
#[derive(Debug, Clone, Default)]
pub struct Transliterator {
    rules: HashMap<String, String>,
    max_key_chars: usize,
}

impl Transliterator {
    /// Merges `tables` in order; a key defined twice takes the later value.
    /// Keys are lowercased and decomposed to match the prepared input.
    pub fn new(tables: &[TranslitTable]) -> Self {
        let mut rules = HashMap::new();
        for table in tables {
            for (key, replacement) in &table.entries {
                let key: String = key.to_lowercase().nfd().collect();
                rules.insert(key, replacement.to_ascii_lowercase());
            }
        }
        let max_key_chars = rules.keys().map(|k| k.chars().count()).max().unwrap_or(0);
        Transliterator {
            rules,
            max_key_chars,
        }
    }

    /// Greek and Cyrillic.
    pub fn with_defaults() -> Self {
        let tables: Vec<_> = DEFAULT_TABLES
            .iter()
            .map(|n| TranslitTable::bundled(n).expect("bundled table parses"))
            .collect();
        Self::new(&tables)
    }

    fn apply_rules(&self, chars: &[char]) -> String {
        let mut out = String::with_capacity(chars.len());
        let mut key = String::new();
        let mut i = 0;
        'outer: while i < chars.len() {
            let longest = self.max_key_chars.min(chars.len() - i);
            for len in (1..=longest).rev() {
                key.clear();
                key.extend(&chars[i..i + len]);
                if let Some(rep) = self.rules.get(&key) {
                    out.push_str(rep);
                    i += len;
                    continue 'outer;
                }
            }
            out.push(chars[i]);
            i += 1;
        }
        out
    }

    pub fn transliterate(&self, text: &str) -> String {
        let prepared: Vec<char> = text.to_lowercase().nfd().collect();
        let replaced = self.apply_rules(&prepared);
        strip_diacritics(&replaced)
            .chars()
            .map(|c| {
                if c.is_ascii() {
                    c.to_ascii_lowercase()
                } else if c.is_whitespace() {
                    ' '
                } else {
                    '?'
                }
            })
            .collect()
    }

    /// Transliterates every sentence of a raw corpus. Tagged corpora are
    /// returned unchanged.
    pub fn apply_to_corpus(&self, corpus: &SentenceCorpus) -> SentenceCorpus {
        match &corpus.sentences {
            Sentences::Raw(v) => SentenceCorpus::raw(
                corpus.language_code.clone(),
                v.iter()
                    .filter_map(|s| RawSentence::new(self.transliterate(&s.text)))
                    .collect(),
            ),
            Sentences::Tagged(_) => corpus.clone(),
        }
    }
}

/// Convenience wrapper compiling `tables` for a single call.
pub fn transliterate(text: &str, tables: &[TranslitTable]) -> String {
    Transliterator::new(tables).transliterate(text)
}
