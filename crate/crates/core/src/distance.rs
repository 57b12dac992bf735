//! Manhattan distances between profiles and the matrices built from them.
//!
//! Profiles are truncated per language, so two profiles rarely share the
//! same keys. Comparisons run over the sorted union of all keys, with a
//! missing key counting as frequency 0.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::{FeatureProfile, ProfileKind};

/// Sorted union of profile keys.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureIndex {
    pub kind: ProfileKind,
    pub keys: Vec<String>,
}

impl FeatureIndex {
    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Dense view of `profile` over this index.
    pub fn vector(&self, profile: &FeatureProfile) -> Result<Vec<f64>> {
        if profile.kind != self.kind {
            return Err(Error::MixedKinds);
        }
        Ok(self.keys.iter().map(|k| profile.get(k)).collect())
    }
}

pub fn align_features(profiles: &[FeatureProfile]) -> Result<FeatureIndex> {
    let first = profiles.first().ok_or(Error::TooFewLabels { needed: 1, got: 0 })?;
    if profiles.iter().any(|p| p.kind != first.kind) {
        return Err(Error::MixedKinds);
    }
    let keys: BTreeSet<&str> = profiles.iter().flat_map(|p| p.keys()).collect();
    Ok(FeatureIndex {
        kind: first.kind,
        keys: keys.into_iter().map(str::to_string).collect(),
    })
}

/// Sum of absolute coordinate differences.
pub fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Manhattan distance between two profiles over `index`.
pub fn manhattan(a: &FeatureProfile, b: &FeatureProfile, index: &FeatureIndex) -> Result<f64> {
    if a.kind != index.kind || b.kind != index.kind {
        return Err(Error::MixedKinds);
    }
    Ok(index.keys.iter().map(|k| (a.get(k) - b.get(k)).abs()).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixKind {
    Written,
    Structure,
    Overall,
}

impl MatrixKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MatrixKind::Written => "written",
            MatrixKind::Structure => "structure",
            MatrixKind::Overall => "overall",
        }
    }

    pub fn of_profiles(kind: ProfileKind) -> Self {
        match kind {
            ProfileKind::CharNgram => MatrixKind::Written,
            ProfileKind::PosTrigram => MatrixKind::Structure,
        }
    }
}

/// Symmetric matrix of pairwise distances with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub labels: Vec<String>,
    pub kind: MatrixKind,
    values: Vec<f64>,
}

impl DistanceMatrix {
    /// Builds a matrix from its strict upper triangle, given row by row.
    pub fn from_upper(
        labels: Vec<String>,
        kind: MatrixKind,
        upper: impl IntoIterator<Item = f64>,
    ) -> Result<Self> {
        let n = labels.len();
        let mut values = vec![0.0; n * n];
        let mut it = upper.into_iter();
        for i in 0..n {
            for j in i + 1..n {
                let v = it.next().ok_or(Error::DimensionMismatch {
                    expected: n * (n - 1) / 2,
                    got: 0,
                })?;
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        Ok(DistanceMatrix { labels, kind, values })
    }

    /// Builds a matrix from full rows; the rows must be symmetric with a
    /// zero diagonal.
    pub fn from_rows(labels: Vec<String>, kind: MatrixKind, rows: &[Vec<f64>]) -> Result<Self> {
        let n = labels.len();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: rows.len(),
            });
        }
        for i in 0..n {
            if rows[i][i] != 0.0 {
                return Err(Error::InvalidArgument(format!("diagonal entry {i} is not zero")));
            }
            for j in 0..i {
                if rows[i][j] != rows[j][i] {
                    return Err(Error::InvalidArgument(format!("entries ({i},{j}) are not symmetric")));
                }
            }
        }
        Ok(DistanceMatrix {
            labels,
            kind,
            values: rows.concat(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.len();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Strict upper triangle, row by row.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .collect()
    }

    /// Same matrix with rows and columns permuted to follow `labels`.
    pub fn reordered(&self, labels: &[String]) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::LabelMismatch);
        }
        self.select(labels)
    }

    /// Sub-matrix over `labels`, in that order.
    pub fn select(&self, labels: &[String]) -> Result<Self> {
        let idx = labels
            .iter()
            .map(|l| self.index_of(l).ok_or(Error::LabelMismatch))
            .collect::<Result<Vec<_>>>()?;
        let n = idx.len();
        let mut values = vec![0.0; n * n];
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                values[a * n + b] = self.get(i, j);
            }
        }
        Ok(DistanceMatrix {
            labels: labels.to_vec(),
            kind: self.kind,
            values,
        })
    }

    /// Rescales off-diagonal entries to `[0, 1]` by their minimum and range.
    /// A matrix whose off-diagonal entries are all equal maps to zeros.
    pub fn minmax_normalized(&self) -> Self {
        let upper = self.upper_triangle();
        let min = upper.iter().copied().fold(f64::INFINITY, f64::min);
        let max = upper.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let range = max - min;
        let n = self.len();
        let mut out = self.clone();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    out.values[i * n + j] = if range > 0.0 {
                        (self.get(i, j) - min) / range
                    } else {
                        0.0
                    };
                }
            }
        }
        out
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for l in &self.labels {
            out.push('\t');
            out.push_str(l);
        }
        out.push('\n');
        for (i, l) in self.labels.iter().enumerate() {
            out.push_str(l);
            for v in self.row(i) {
                let _ = write!(out, "\t{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_tsv(text: &str, kind: MatrixKind) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or(Error::MalformedLine {
            line: 1,
            reason: "missing header".into(),
        })?;
        let labels: Vec<String> = header.split('\t').skip(1).map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let mut cols = line.split('\t');
            let label = cols.next().unwrap_or_default();
            if labels.get(rows.len()).map(String::as_str) != Some(label) {
                return Err(Error::MalformedLine {
                    line: i + 2,
                    reason: format!("row label {label:?} does not match header"),
                });
            }
            let row = cols
                .map(|c| {
                    c.parse::<f64>().map_err(|_| Error::MalformedLine {
                        line: i + 2,
                        reason: format!("bad value {c:?}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::from_rows(labels, kind, &rows)
    }

    /// Square PHYLIP distance matrix (relaxed names: padded to at least ten
    /// characters and always followed by a space).
    pub fn to_phylip(&self) -> String {
        let mut out = format!("{:>5}\n", self.len());
        for (i, l) in self.labels.iter().enumerate() {
            let _ = write!(out, "{l:<10}");
            for v in self.row(i) {
                let _ = write!(out, " {v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        let tsv = dir.join(format!("{stem}.tsv"));
        let phy = dir.join(format!("{stem}.phy"));
        std::fs::write(&tsv, self.to_tsv()).map_err(|e| Error::io(&tsv, e))?;
        std::fs::write(&phy, self.to_phylip()).map_err(|e| Error::io(&phy, e))?;
        Ok(())
    }
}

/// Pairwise distances computed with `metric` over the aligned vectors.
pub fn distance_matrix_with(
    profiles: &[FeatureProfile],
    metric: impl Fn(&[f64], &[f64]) -> f64 + Sync,
) -> Result<DistanceMatrix> {
    if profiles.len() < 2 {
        return Err(Error::TooFewLabels {
            needed: 2,
            got: profiles.len(),
        });
    }
    let mut seen = HashSet::new();
    for p in profiles {
        if !seen.insert(p.language_code.as_str()) {
            return Err(Error::DuplicateLanguage(p.language_code.clone()));
        }
    }
    let index = align_features(profiles)?;
    let vectors = profiles
        .iter()
        .map(|p| index.vector(p))
        .collect::<Result<Vec<_>>>()?;
    let n = profiles.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let upper: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| metric(&vectors[i], &vectors[j]))
        .collect();
    DistanceMatrix::from_upper(
        profiles.iter().map(|p| p.language_code.clone()).collect(),
        MatrixKind::of_profiles(index.kind),
        upper,
    )
}

/// Pairwise Manhattan distances; labels follow the input order.
pub fn distance_matrix(profiles: &[FeatureProfile]) -> Result<DistanceMatrix> {
    distance_matrix_with(profiles, l1)
}

/// Element-wise mean of two matrices over the same languages, in the label
/// order of `a`.
pub fn average_matrices(a: &DistanceMatrix, b: &DistanceMatrix) -> Result<DistanceMatrix> {
    let b = b.reordered(&a.labels)?;
    let n = a.len();
    let mut out = a.clone();
    out.kind = MatrixKind::Overall;
    for k in 0..n * n {
        out.values[k] = (a.values[k] + b.values[k]) / 2.0;
    }
    Ok(out)
}
