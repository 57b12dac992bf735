//! Language fingerprinting from spelling and sentence structure.
//!
//! Two kinds of per-language profiles are built: relative frequencies of
//! character di-grams and tri-grams over transliterated text, and relative
//! frequencies of universal part-of-speech tri-grams over tagged text.
//! Profiles are compared with the Manhattan distance; the resulting
//! matrices feed average-linkage trees (Newick) and z-score filtered
//! similarity graphs whose communities are found by label propagation
//! (DOT, JSON). A small two-layer network trained with Adam identifies a
//! language from part-of-speech tri-gram frequencies alone.

pub mod cluster;
pub mod corpus;
pub mod distance;
pub mod error;
pub mod neural;
pub mod ngram;
pub mod pipeline;
pub mod posgram;
pub mod profile;
pub mod rng;
pub mod translit;

pub use corpus::{
    load_raw_corpus, load_tagged_corpus, preprocess, sample_sentences, PosSentence, RawSentence,
    SentenceCorpus, Sentences, UposTag,
};
pub use error::{Error, Result};
pub use profile::{FeatureProfile, ProfileKind};
