//! Corpus ingestion, cleaning and sampling.
//!
//! Raw corpora are plain UTF-8 text with one sentence per line. Tagged
//! corpora use the CoNLL-U layout: tab-separated token lines whose fourth
//! column holds the universal part-of-speech tag, blank lines between
//! sentences and `#` comment lines.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;
use unicode_script::{Script, UnicodeScript};

use crate::error::{Error, Result};
use crate::rng;

/// Universal part-of-speech tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum UposTag {
    ADJ,
    ADP,
    ADV,
    AUX,
    CCONJ,
    DET,
    INTJ,
    NOUN,
    NUM,
    PART,
    PRON,
    PROPN,
    PUNCT,
    SCONJ,
    SYM,
    VERB,
    X,
}

impl UposTag {
    pub const ALL: [UposTag; 17] = [
        UposTag::ADJ,
        UposTag::ADP,
        UposTag::ADV,
        UposTag::AUX,
        UposTag::CCONJ,
        UposTag::DET,
        UposTag::INTJ,
        UposTag::NOUN,
        UposTag::NUM,
        UposTag::PART,
        UposTag::PRON,
        UposTag::PROPN,
        UposTag::PUNCT,
        UposTag::SCONJ,
        UposTag::SYM,
        UposTag::VERB,
        UposTag::X,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            UposTag::ADJ => "ADJ",
            UposTag::ADP => "ADP",
            UposTag::ADV => "ADV",
            UposTag::AUX => "AUX",
            UposTag::CCONJ => "CCONJ",
            UposTag::DET => "DET",
            UposTag::INTJ => "INTJ",
            UposTag::NOUN => "NOUN",
            UposTag::NUM => "NUM",
            UposTag::PART => "PART",
            UposTag::PRON => "PRON",
            UposTag::PROPN => "PROPN",
            UposTag::PUNCT => "PUNCT",
            UposTag::SCONJ => "SCONJ",
            UposTag::SYM => "SYM",
            UposTag::VERB => "VERB",
            UposTag::X => "X",
        }
    }
}

impl fmt::Display for UposTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseUposError(pub String);

impl fmt::Display for ParseUposError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown UPOS tag {:?}", self.0)
    }
}

impl std::error::Error for ParseUposError {}

impl FromStr for UposTag {
    type Err = ParseUposError;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        UposTag::ALL
            .iter()
            .copied()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| ParseUposError(s.to_string()))
    }
}

/// One line of running text.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RawSentence {
    pub text: String,
    pub word_count: usize,
}

impl RawSentence {
    /// `None` when the text is blank.
    pub fn new(text: impl Into<String>) -> Option<Self> {
        let text = text.into();
        let word_count = text.split_whitespace().count();
        (word_count > 0).then_some(RawSentence { text, word_count })
    }
}

/// The tag sequence of one sentence.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PosSentence {
    pub tags: Vec<UposTag>,
}

impl PosSentence {
    /// `None` when `tags` is empty.
    pub fn new(tags: Vec<UposTag>) -> Option<Self> {
        (!tags.is_empty()).then_some(PosSentence { tags })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusKind {
    Raw,
    Tagged,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sentences {
    Raw(Vec<RawSentence>),
    Tagged(Vec<PosSentence>),
}

impl Sentences {
    pub fn len(&self) -> usize {
        match self {
            Sentences::Raw(v) => v.len(),
            Sentences::Tagged(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> CorpusKind {
        match self {
            Sentences::Raw(_) => CorpusKind::Raw,
            Sentences::Tagged(_) => CorpusKind::Tagged,
        }
    }
}

/// Sentences of one language.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceCorpus {
    pub language_code: String,
    pub sentences: Sentences,
}

impl SentenceCorpus {
    pub fn raw(language_code: impl Into<String>, sentences: Vec<RawSentence>) -> Self {
        SentenceCorpus {
            language_code: language_code.into(),
            sentences: Sentences::Raw(sentences),
        }
    }

    pub fn tagged(language_code: impl Into<String>, sentences: Vec<PosSentence>) -> Self {
        SentenceCorpus {
            language_code: language_code.into(),
            sentences: Sentences::Tagged(sentences),
        }
    }

    /// Builds a raw corpus from string slices, skipping blank entries.
    pub fn from_lines<'a>(
        language_code: impl Into<String>,
        lines: impl IntoIterator<Item = &'a str>,
    ) -> Self {
        let sentences = lines.into_iter().filter_map(RawSentence::new).collect();
        SentenceCorpus::raw(language_code, sentences)
    }

    pub fn kind(&self) -> CorpusKind {
        self.sentences.kind()
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// Raw sentences, or an empty slice for tagged corpora.
    pub fn raw_sentences(&self) -> &[RawSentence] {
        match &self.sentences {
            Sentences::Raw(v) => v,
            Sentences::Tagged(_) => &[],
        }
    }

    /// Tagged sentences, or an empty slice for raw corpora.
    pub fn tagged_sentences(&self) -> &[PosSentence] {
        match &self.sentences {
            Sentences::Tagged(v) => v,
            Sentences::Raw(_) => &[],
        }
    }
}

fn check_language(code: &str) -> Result<()> {
    if code.trim().is_empty() {
        return Err(Error::InvalidArgument("language code is empty".into()));
    }
    Ok(())
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Splits on LF, strips a trailing CR and decodes each line, reporting the
/// 1-based line number of the first invalid byte sequence.
fn decoded_lines(bytes: &[u8]) -> impl Iterator<Item = Result<(usize, &str)>> {
    let bytes = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
    let trailing_newline = bytes.last() == Some(&b'\n');
    let mut parts: Vec<&[u8]> = bytes.split(|&b| b == b'\n').collect();
    if trailing_newline || bytes.is_empty() {
        parts.pop();
    }
    parts.into_iter().enumerate().map(|(i, line)| {
        let line = line.strip_suffix(b"\r").unwrap_or(line);
        std::str::from_utf8(line)
            .map(|s| (i + 1, s))
            .map_err(|_| Error::Encoding { line: i + 1 })
    })
}

/// Reads one sentence per non-blank line, in file order, without cleaning.
pub fn load_raw_corpus(path: impl AsRef<Path>, language_code: &str) -> Result<SentenceCorpus> {
    check_language(language_code)?;
    let bytes = read_bytes(path.as_ref())?;
    let mut sentences = Vec::new();
    for line in decoded_lines(&bytes) {
        let (_, text) = line?;
        if let Some(s) = RawSentence::new(text) {
            sentences.push(s);
        }
    }
    Ok(SentenceCorpus::raw(language_code, sentences))
}

/// Parses CoNLL-U text into tag sequences.
pub fn parse_tagged(text: &str) -> Result<Vec<PosSentence>> {
    parse_tagged_lines(text.lines().enumerate().map(|(i, l)| Ok((i + 1, l))))
}

fn parse_tagged_lines<'a>(
    lines: impl Iterator<Item = Result<(usize, &'a str)>>,
) -> Result<Vec<PosSentence>> {
    let mut sentences = Vec::new();
    let mut current = Vec::new();
    for line in lines {
        let (lineno, line) = line?;
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            if let Some(s) = PosSentence::new(std::mem::take(&mut current)) {
                sentences.push(s);
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 4 {
            return Err(Error::MalformedLine {
                line: lineno,
                reason: format!("expected at least 4 tab-separated columns, got {}", cols.len()),
            });
        }
        let id = cols[0].trim();
        if id.is_empty() {
            return Err(Error::MalformedLine {
                line: lineno,
                reason: "empty token id".into(),
            });
        }
        // Multiword-token ranges and empty nodes carry no tag of their own.
        if id.contains('-') || id.contains('.') {
            continue;
        }
        let tag = cols[3].trim();
        let tag = tag.parse::<UposTag>().map_err(|_| Error::UnknownTag {
            tag: tag.to_string(),
            line: lineno,
        })?;
        current.push(tag);
    }
    if let Some(s) = PosSentence::new(current) {
        sentences.push(s);
    }
    Ok(sentences)
}

/// Reads a CoNLL-U file; each sentence becomes its ordered UPOS sequence.
pub fn load_tagged_corpus(path: impl AsRef<Path>, language_code: &str) -> Result<SentenceCorpus> {
    check_language(language_code)?;
    let bytes = read_bytes(path.as_ref())?;
    let sentences = parse_tagged_lines(decoded_lines(&bytes))?;
    Ok(SentenceCorpus::tagged(language_code, sentences))
}

/// Collapses whitespace runs to single spaces, trims, and applies NFC.
pub fn normalize_whitespace(text: &str) -> String {
    let joined = text.split_whitespace().collect::<Vec<_>>().join(" ");
    joined.nfc().collect()
}

/// Drops sentences with fewer than `min_words` tokens (tags, for tagged
/// corpora) and keeps only the first occurrence of each distinct sentence.
/// Raw text is whitespace- and NFC-normalized before comparison.
pub fn preprocess(corpus: &SentenceCorpus, min_words: usize) -> SentenceCorpus {
    let sentences = match &corpus.sentences {
        Sentences::Raw(v) => {
            let mut seen = HashSet::new();
            let kept = v
                .iter()
                .filter_map(|s| RawSentence::new(normalize_whitespace(&s.text)))
                .filter(|s| s.word_count >= min_words)
                .filter(|s| seen.insert(s.text.clone()))
                .collect();
            Sentences::Raw(kept)
        }
        Sentences::Tagged(v) => {
            let mut seen = HashSet::new();
            let kept = v
                .iter()
                .filter(|s| s.tags.len() >= min_words)
                .filter(|s| seen.insert(s.tags.clone()))
                .cloned()
                .collect();
            Sentences::Tagged(kept)
        }
    };
    SentenceCorpus {
        language_code: corpus.language_code.clone(),
        sentences,
    }
}

/// Indices of `n` items drawn from `0..len`: without replacement when
/// `n <= len`, uniformly with replacement otherwise.
pub fn sample_indices(rng: &mut rng::ChaCha8Rng, len: usize, n: usize) -> Vec<usize> {
    if len == 0 {
        return Vec::new();
    }
    if n <= len {
        // Partial Fisher-Yates over an index array.
        let mut idx: Vec<usize> = (0..len).collect();
        for i in 0..n {
            let j = i + rng::index(rng, len - i);
            idx.swap(i, j);
        }
        idx.truncate(n);
        idx
    } else {
        (0..n).map(|_| rng::index(rng, len)).collect()
    }
}

/// Draws `n` sentences; identical seeds give identical samples.
pub fn sample_sentences(corpus: &SentenceCorpus, n: usize, seed: u64) -> Result<Sentences> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut rng = rng::seeded(seed);
    let idx = sample_indices(&mut rng, corpus.len(), n);
    Ok(match &corpus.sentences {
        Sentences::Raw(v) => Sentences::Raw(idx.iter().map(|&i| v[i].clone()).collect()),
        Sentences::Tagged(v) => Sentences::Tagged(idx.iter().map(|&i| v[i].clone()).collect()),
    })
}

/// Per-language allowed scripts, loaded from a JSON object mapping
/// language codes to lists of Unicode script names (e.g. `"Latin"`).
#[derive(Debug, Clone, Default)]
pub struct CharsetWhitelist {
    allowed: BTreeMap<String, Vec<Script>>,
}

impl CharsetWhitelist {
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: BTreeMap<String, Vec<String>> = serde_json::from_str(text)?;
        let mut allowed = BTreeMap::new();
        for (lang, names) in raw {
            let scripts = names
                .iter()
                .map(|n| {
                    Script::from_full_name(n)
                        .or_else(|| Script::from_short_name(n))
                        .ok_or_else(|| Error::InvalidArgument(format!("unknown script {n:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            allowed.insert(lang, scripts);
        }
        Ok(CharsetWhitelist { allowed })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// True when every letter of `text` belongs to one of the scripts allowed
    /// for `language_code`. Languages without an entry accept everything.
    pub fn accepts(&self, language_code: &str, text: &str) -> bool {
        let Some(scripts) = self.allowed.get(language_code) else {
            return true;
        };
        text.chars().filter(|c| c.is_alphabetic()).all(|c| {
            let s = c.script();
            s == Script::Common || s == Script::Inherited || scripts.contains(&s)
        })
    }

    /// Keeps the raw sentences written entirely in allowed scripts. Tagged
    /// corpora are returned unchanged.
    pub fn filter(&self, corpus: &SentenceCorpus) -> SentenceCorpus {
        match &corpus.sentences {
            Sentences::Raw(v) => SentenceCorpus::raw(
                corpus.language_code.clone(),
                v.iter()
                    .filter(|s| self.accepts(&corpus.language_code, &s.text))
                    .cloned()
                    .collect(),
            ),
            Sentences::Tagged(_) => corpus.clone(),
        }
    }
}
