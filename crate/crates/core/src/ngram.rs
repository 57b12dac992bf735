//! Character di-gram and tri-gram profiles.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::corpus::{CorpusKind, SentenceCorpus};
use crate::error::{Error, Result};
use crate::profile::{top_k_frequencies, FeatureProfile, ProfileKind};

pub const DEFAULT_TOP_K_PER_N: usize = 1000;

/// All windows of `n` characters inside each whitespace-free run. Runs
/// shorter than `n` contribute nothing; windows never span a space.
pub fn char_ngrams(sentence: &str, n: usize) -> Vec<String> {
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    for run in sentence.split(char::is_whitespace) {
        let chars: Vec<char> = run.chars().collect();
        for w in chars.windows(n) {
            out.push(w.iter().collect());
        }
    }
    out
}

fn merge(mut a: HashMap<String, u64>, b: HashMap<String, u64>) -> HashMap<String, u64> {
    if a.len() < b.len() {
        return merge(b, a);
    }
    for (k, v) in b {
        *a.entry(k).or_insert(0) += v;
    }
    a
}

/// Counts n-grams of one size over a corpus. The result does not depend
/// on how the work is split across threads.
pub fn count_char_ngrams(corpus: &SentenceCorpus, n: usize) -> HashMap<String, u64> {
    corpus
        .raw_sentences()
        .par_iter()
        .fold(HashMap::new, |mut acc, s| {
            for g in char_ngrams(&s.text, n) {
                *acc.entry(g).or_insert(0) += 1;
            }
            acc
        })
        .reduce(HashMap::new, merge)
}

/// Di-gram and tri-gram profile of a preprocessed, transliterated raw
/// corpus. Each family is normalized by its own total and truncated to its
/// `top_k_per_n` most frequent keys.
pub fn build_char_profile(corpus: &SentenceCorpus, top_k_per_n: usize) -> Result<FeatureProfile> {
    if corpus.kind() != CorpusKind::Raw {
        return Err(Error::InvalidArgument(
            "character profiles need a raw-text corpus".into(),
        ));
    }
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut freqs = Vec::new();
    let mut total_units = 0;
    for n in [2, 3] {
        let (top, total) = top_k_frequencies(count_char_ngrams(corpus, n), top_k_per_n);
        freqs.extend(top);
        total_units += total;
    }
    if total_units == 0 {
        return Err(Error::EmptyCorpus);
    }
    Ok(FeatureProfile::new(
        corpus.language_code.clone(),
        ProfileKind::CharNgram,
        total_units,
        freqs,
    ))
}
