//! Part-of-speech tri-gram profiles.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::corpus::{CorpusKind, PosSentence, SentenceCorpus, UposTag};
use crate::error::{Error, Result};
use crate::profile::{top_k_frequencies, FeatureProfile, ProfileKind};

pub const DEFAULT_TOP_K: usize = 2000;

pub type Trigram = [UposTag; 3];

/// Contiguous tag triples of one sentence.
pub fn pos_trigrams(sentence: &PosSentence) -> Vec<Trigram> {
    sentence
        .tags
        .windows(3)
        .map(|w| [w[0], w[1], w[2]])
        .collect()
}

/// `"ADP|DET|NOUN"`.
pub fn trigram_key(t: &Trigram) -> String {
    format!("{}|{}|{}", t[0], t[1], t[2])
}

pub fn parse_trigram_key(key: &str) -> Option<Trigram> {
    let mut parts = key.split('|');
    let a = parts.next()?.parse().ok()?;
    let b = parts.next()?.parse().ok()?;
    let c = parts.next()?.parse().ok()?;
    parts.next().is_none().then_some([a, b, c])
}

pub fn contains_x(t: &Trigram) -> bool {
    t.contains(&UposTag::X)
}

/// True when the three tags of a key are pairwise different.
pub fn is_distinct_key(key: &str) -> bool {
    parse_trigram_key(key).is_some_and(|[a, b, c]| a != b && b != c && a != c)
}

/// Tri-gram counts over `sentences`, optionally dropping triples with X.
pub fn count_trigrams(sentences: &[PosSentence], exclude_x: bool) -> HashMap<Trigram, u64> {
    sentences
        .par_iter()
        .fold(HashMap::new, |mut acc, s| {
            for t in pos_trigrams(s) {
                if !(exclude_x && contains_x(&t)) {
                    *acc.entry(t).or_insert(0) += 1;
                }
            }
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_insert(0) += v;
            }
            a
        })
}

/// Relative-frequency profile of the `top_k` most frequent tag triples.
pub fn build_pos_profile(
    corpus: &SentenceCorpus,
    top_k: usize,
    exclude_x: bool,
) -> Result<FeatureProfile> {
    if corpus.kind() != CorpusKind::Tagged {
        return Err(Error::InvalidArgument(
            "part-of-speech profiles need a tagged corpus".into(),
        ));
    }
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let counts = count_trigrams(corpus.tagged_sentences(), exclude_x);
    let keyed: HashMap<String, u64> = counts.iter().map(|(t, c)| (trigram_key(t), *c)).collect();
    let (top, total) = top_k_frequencies(keyed, top_k);
    if total == 0 {
        return Err(Error::NoTriples);
    }
    Ok(FeatureProfile::new(
        corpus.language_code.clone(),
        ProfileKind::PosTrigram,
        total,
        top,
    ))
}
