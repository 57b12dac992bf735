//! Relative-frequency feature profiles and their on-disk form.
//!
//! A profile is written as a TSV file (`feature<TAB>frequency`, sorted by
//! frequency descending then key ascending) plus a JSON sidecar carrying the
//! language code, the profile kind and the pre-truncation unit count.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProfileKind {
    #[serde(rename = "char-ngram")]
    CharNgram,
    #[serde(rename = "pos-trigram")]
    PosTrigram,
}

impl ProfileKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProfileKind::CharNgram => "char-ngram",
            ProfileKind::PosTrigram => "pos-trigram",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureProfile {
    pub language_code: String,
    pub kind: ProfileKind,
    /// Number of units counted before truncation.
    pub total_units: u64,
    freqs: BTreeMap<String, f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    language_code: String,
    kind: ProfileKind,
    total_units: u64,
}

/// Sort order used everywhere a ranking is shown or written.
pub(crate) fn rank_order(a: (&str, f64), b: (&str, f64)) -> Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.0.cmp(b.0))
}

/// Keeps the `top_k` most frequent keys of one family, breaking count ties
/// by ascending key. Frequencies are `count / total` over the untruncated
/// family and are not renormalized afterwards.
pub(crate) fn top_k_frequencies(
    counts: HashMap<String, u64>,
    top_k: usize,
) -> (Vec<(String, f64)>, u64) {
    let total: u64 = counts.values().sum();
    let mut entries: Vec<(String, u64)> = counts.into_iter().filter(|(_, c)| *c > 0).collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    entries.truncate(top_k);
    let freqs = entries
        .into_iter()
        .map(|(k, c)| (k, c as f64 / total as f64))
        .collect();
    (freqs, total)
}

impl FeatureProfile {
    pub fn new(
        language_code: impl Into<String>,
        kind: ProfileKind,
        total_units: u64,
        freqs: impl IntoIterator<Item = (String, f64)>,
    ) -> Self {
        FeatureProfile {
            language_code: language_code.into(),
            kind,
            total_units,
            freqs: freqs.into_iter().collect(),
        }
    }

    pub fn get(&self, key: &str) -> f64 {
        self.freqs.get(key).copied().unwrap_or(0.0)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.freqs.contains_key(key)
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// Entries in ascending key order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.freqs.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.freqs.keys().map(String::as_str)
    }

    pub fn total_frequency(&self) -> f64 {
        self.freqs.values().sum()
    }

    /// Entries sorted by frequency descending, then key ascending.
    pub fn ranked(&self) -> Vec<(&str, f64)> {
        let mut v: Vec<_> = self.iter().collect();
        v.sort_by(|a, b| rank_order(*a, *b));
        v
    }

    /// The `n` highest-ranked entries among those accepted by `filter`.
    pub fn top_where(&self, n: usize, filter: impl Fn(&str) -> bool) -> Vec<(&str, f64)> {
        self.ranked()
            .into_iter()
            .filter(|(k, _)| filter(k))
            .take(n)
            .collect()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("feature\tfrequency\n");
        for (k, v) in self.ranked() {
            let _ = writeln!(out, "{k}\t{v}");
        }
        out
    }

    pub fn sidecar_json(&self) -> String {
        let side = Sidecar {
            language_code: self.language_code.clone(),
            kind: self.kind,
            total_units: self.total_units,
        };
        serde_json::to_string_pretty(&side).expect("sidecar serializes") + "\n"
    }

    pub fn from_tsv_and_sidecar(tsv: &str, sidecar: &str) -> Result<Self> {
        let side: Sidecar = serde_json::from_str(sidecar)?;
        let mut freqs = BTreeMap::new();
        for (i, line) in tsv.lines().enumerate() {
            if i == 0 || line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('\t').ok_or_else(|| Error::MalformedLine {
                line: i + 1,
                reason: "expected key<TAB>frequency".into(),
            })?;
            let value: f64 = value.trim().parse().map_err(|_| Error::MalformedLine {
                line: i + 1,
                reason: format!("bad frequency {value:?}"),
            })?;
            freqs.insert(key.to_string(), value);
        }
        Ok(FeatureProfile {
            language_code: side.language_code,
            kind: side.kind,
            total_units: side.total_units,
            freqs,
        })
    }

    /// Writes `<stem>.tsv` and `<stem>.json`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        let tsv = dir.join(format!("{stem}.tsv"));
        let json = dir.join(format!("{stem}.json"));
        std::fs::write(&tsv, self.to_tsv()).map_err(|e| Error::io(&tsv, e))?;
        std::fs::write(&json, self.sidecar_json()).map_err(|e| Error::io(&json, e))?;
        Ok(())
    }

    pub fn load(dir: &Path, stem: &str) -> Result<Self> {
        let tsv = dir.join(format!("{stem}.tsv"));
        let json = dir.join(format!("{stem}.json"));
        let t = std::fs::read_to_string(&tsv).map_err(|e| Error::io(&tsv, e))?;
        let j = std::fs::read_to_string(&json).map_err(|e| Error::io(&json, e))?;
        Self::from_tsv_and_sidecar(&t, &j)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn top_k_tie_break_is_lexicographic() {
        let counts: HashMap<String, u64> =
            [("b", 2), ("a", 2), ("c", 1), ("d", 5)].iter().map(|(k, c)| (k.to_string(), *c)).collect();
        let (top, total) = top_k_frequencies(counts, 3);
        assert_eq!(total, 10);
        let keys: Vec<_> = top.iter().map(|(k, _)| k.as_str()).collect();
        assert_eq!(keys, ["d", "a", "b"]);
        assert_eq!(top[0].1, 0.5);
    }

    #[test]
    fn tsv_order_and_header() {
        let p = FeatureProfile::new(
            "en",
            ProfileKind::CharNgram,
            4,
            [("zz".to_string(), 0.25), ("aa".to_string(), 0.25), ("th".to_string(), 0.5)],
        );
        assert_eq!(p.to_tsv(), "feature\tfrequency\nth\t0.5\naa\t0.25\nzz\t0.25\n");
    }

    proptest! {
        #[test]
        fn serialization_round_trips(entries in proptest::collection::btree_map("[a-z|?]{1,8}", 1e-9f64..1.0, 0..40), total in 0u64..1_000_000) {
            let p = FeatureProfile::new("xx", ProfileKind::PosTrigram, total, entries);
            let q = FeatureProfile::from_tsv_and_sidecar(&p.to_tsv(), &p.sidecar_json()).unwrap();
            prop_assert_eq!(p, q);
        }
    }
}
