//! Feed-forward language classifier over POS tri-gram probabilities.
//!
//! One hidden layer of eight ReLU units feeds a softmax over languages.
//! Documents are sparse (a few hundred tri-grams out of thousands), so rows
//! are stored sparse and the first layer only touches non-zero inputs.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{sample_indices, CorpusKind, PosSentence, SentenceCorpus};
use crate::error::{Error, Result};
use crate::posgram::{contains_x, pos_trigrams, trigram_key};
use crate::rng;

pub const HIDDEN: usize = 8;
/// Floor applied to the true-class probability inside the log.
pub const LOSS_CLIP: f64 = 1e-12;
pub const DEFAULT_DOCS_PER_LANG: usize = 1000;
pub const DEFAULT_SENTENCES_PER_DOC: usize = 100;
pub const DEFAULT_FOLDS: usize = 10;

/// Sparse feature vector with strictly increasing indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseRow {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseRow {
    pub fn from_dense(x: &[f64]) -> Self {
        let mut row = SparseRow::default();
        for (i, &v) in x.iter().enumerate() {
            if v != 0.0 {
                row.indices.push(i as u32);
                row.values.push(v);
            }
        }
        row
    }

    pub fn to_dense(&self, width: usize) -> Vec<f64> {
        let mut x = vec![0.0; width];
        for (i, v) in self.iter() {
            x[i] = v;
        }
        x
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&i, &v)| (i as usize, v))
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Per-document tri-gram probabilities with language labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DocumentDataset {
    /// Sorted tri-gram keys; none contains X.
    pub feature_index: Vec<String>,
    pub rows: Vec<SparseRow>,
    pub labels: Vec<usize>,
    pub label_names: Vec<String>,
}

impl DocumentDataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn width(&self) -> usize {
        self.feature_index.len()
    }

    pub fn classes(&self) -> usize {
        self.label_names.len()
    }
}

/// X-free tri-gram counts over a group of sentences.
fn document_counts<'a>(sentences: impl Iterator<Item = &'a PosSentence>) -> BTreeMap<String, u64> {
    let mut counts = BTreeMap::new();
    for s in sentences {
        for t in pos_trigrams(s) {
            if !contains_x(&t) {
                *counts.entry(trigram_key(&t)).or_insert(0) += 1;
            }
        }
    }
    counts
}

/// Builds `docs_per_lang` documents per language, each the concatenation of
/// `sentences_per_doc` sampled sentences. Documents without any X-free
/// tri-gram are dropped. Each language samples from its own seeded stream,
/// so adding a language leaves the documents of the others unchanged.
pub fn build_dataset(
    corpora: &[SentenceCorpus],
    docs_per_lang: usize,
    sentences_per_doc: usize,
    seed: u64,
) -> Result<DocumentDataset> {
    if corpora.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut seen = HashSet::new();
    for c in corpora {
        if !seen.insert(c.language_code.as_str()) {
            return Err(Error::DuplicateLanguage(c.language_code.clone()));
        }
        if c.kind() != CorpusKind::Tagged {
            return Err(Error::InvalidArgument(format!(
                "{}: documents need a tagged corpus",
                c.language_code
            )));
        }
    }
    let docs: Vec<Vec<BTreeMap<String, u64>>> = corpora
        .par_iter()
        .enumerate()
        .map(|(lang, corpus)| {
            let ctx = |e: Error| e.context(format!("language {}", corpus.language_code));
            if corpus.is_empty() {
                return Err(ctx(Error::EmptyCorpus));
            }
            let sentences = corpus.tagged_sentences();
            let mut rng = rng::seeded_stream(seed, lang as u64);
            let docs: Vec<_> = (0..docs_per_lang)
                .map(|_| {
                    let idx = sample_indices(&mut rng, sentences.len(), sentences_per_doc);
                    document_counts(idx.iter().map(|&i| &sentences[i]))
                })
                .filter(|d| !d.is_empty())
                .collect();
            if docs.is_empty() {
                return Err(ctx(Error::NoTriples));
            }
            Ok(docs)
        })
        .collect::<Result<_>>()?;

    let keys: BTreeSet<&str> = docs
        .iter()
        .flatten()
        .flat_map(|d| d.keys().map(String::as_str))
        .collect();
    let feature_index: Vec<String> = keys.into_iter().map(str::to_string).collect();
    let position: HashMap<&str, u32> = feature_index
        .iter()
        .enumerate()
        .map(|(i, k)| (k.as_str(), i as u32))
        .collect();

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (lang, lang_docs) in docs.iter().enumerate() {
        for d in lang_docs {
            let total: u64 = d.values().sum();
            rows.push(SparseRow {
                indices: d.keys().map(|k| position[k.as_str()]).collect(),
                values: d.values().map(|&c| c as f64 / total as f64).collect(),
            });
            labels.push(lang);
        }
    }
    Ok(DocumentDataset {
        feature_index,
        rows,
        labels,
        label_names: corpora.iter().map(|c| c.language_code.clone()).collect(),
    })
}

/// Network parameters. `w1` is `inputs × hidden` and `w2` is
/// `hidden × classes`, both row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub inputs: usize,
    pub hidden: usize,
    pub classes: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl MlpModel {
    pub fn zeros(inputs: usize, hidden: usize, classes: usize) -> Self {
        MlpModel {
            inputs,
            hidden,
            classes,
            w1: vec![0.0; inputs * hidden],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden * classes],
            b2: vec![0.0; classes],
        }
    }

    /// He-normal first layer, Glorot-uniform second layer, zero biases.
    pub fn initialized(inputs: usize, hidden: usize, classes: usize, rng: &mut impl Rng) -> Self {
        let mut m = Self::zeros(inputs, hidden, classes);
        let he = Normal::new(0.0, (2.0 / inputs.max(1) as f64).sqrt()).expect("finite std");
        for w in &mut m.w1 {
            *w = he.sample(rng);
        }
        let limit = (6.0 / (hidden + classes) as f64).sqrt();
        for w in &mut m.w2 {
            *w = rng.random_range(-limit..limit);
        }
        m
    }

    pub fn parameter_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn slices(&self) -> [&[f64]; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn slices_mut(&mut self) -> [&mut [f64]; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    fn same_shape(&self, other: &MlpModel) -> bool {
        (self.inputs, self.hidden, self.classes) == (other.inputs, other.hidden, other.classes)
    }

    fn check_row(&self, row: &SparseRow) -> Result<()> {
        match row.indices.last() {
            Some(&i) if i as usize >= self.inputs => Err(Error::DimensionMismatch {
                expected: self.inputs,
                got: i as usize + 1,
            }),
            _ => Ok(()),
        }
    }

    /// Hidden pre-activations, hidden activations and output probabilities.
    fn activations(&self, row: &SparseRow) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (h, c) = (self.hidden, self.classes);
        let mut z1 = self.b1.clone();
        for (i, x) in row.iter() {
            let w = &self.w1[i * h..(i + 1) * h];
            for j in 0..h {
                z1[j] += x * w[j];
            }
        }
        let a1: Vec<f64> = z1.iter().map(|&z| z.max(0.0)).collect();
        let mut z2 = self.b2.clone();
        for j in 0..h {
            let w = &self.w2[j * c..(j + 1) * c];
            for k in 0..c {
                z2[k] += a1[j] * w[k];
            }
        }
        (z1, a1, softmax(&z2))
    }

    pub fn predict_sparse(&self, row: &SparseRow) -> Result<Vec<f64>> {
        self.check_row(row)?;
        Ok(self.activations(row).2)
    }
}

/// Softmax with the maximum subtracted before exponentiation.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

/// Class probabilities for a dense input.
pub fn forward(model: &MlpModel, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != model.inputs {
        return Err(Error::DimensionMismatch {
            expected: model.inputs,
            got: x.len(),
        });
    }
    Ok(model.activations(&SparseRow::from_dense(x)).2)
}

/// Cross-entropy of class `y` under `p`.
pub fn loss(p: &[f64], y: usize) -> f64 {
    -p[y].max(LOSS_CLIP).ln()
}

/// Index of the largest probability; ties go to the lower index.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

/// Mean-over-batch gradients of the cross-entropy loss, returned in a
/// model-shaped container together with the mean batch loss.
pub fn backward(model: &MlpModel, rows: &[&SparseRow], labels: &[usize]) -> Result<(MlpModel, f64)> {
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if rows.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: rows.len(),
            got: labels.len(),
        });
    }
    let (h, c) = (model.hidden, model.classes);
    let mut g = MlpModel::zeros(model.inputs, h, c);
    let mut total_loss = 0.0;
    let mut d1 = vec![0.0; h];
    for (row, &y) in rows.iter().zip(labels) {
        model.check_row(row)?;
        if y >= c {
            return Err(Error::DimensionMismatch { expected: c, got: y + 1 });
        }
        let (z1, a1, p) = model.activations(row);
        total_loss += loss(&p, y);
        let mut d2 = p;
        d2[y] -= 1.0;
        for j in 0..h {
            let w = &model.w2[j * c..(j + 1) * c];
            let gw = &mut g.w2[j * c..(j + 1) * c];
            let mut back = 0.0;
            for k in 0..c {
                gw[k] += a1[j] * d2[k];
                back += w[k] * d2[k];
            }
            d1[j] = if z1[j] > 0.0 { back } else { 0.0 };
        }
        for k in 0..c {
            g.b2[k] += d2[k];
        }
        for j in 0..h {
            g.b1[j] += d1[j];
        }
        for (i, x) in row.iter() {
            let gw = &mut g.w1[i * h..(i + 1) * h];
            for j in 0..h {
                gw[j] += x * d1[j];
            }
        }
    }
    let n = rows.len() as f64;
    for s in g.slices_mut() {
        for v in s.iter_mut() {
            *v /= n;
        }
    }
    Ok((g, total_loss / n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparameters {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub hidden: usize,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            epochs: 50,
            batch_size: 32,
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            hidden: HIDDEN,
        }
    }
}

/// Adam moments for a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(parameters: usize, alpha: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        AdamState {
            alpha,
            beta1,
            beta2,
            epsilon,
            t: 0,
            m: vec![0.0; parameters],
            v: vec![0.0; parameters],
        }
    }

    pub fn for_model(model: &MlpModel, hp: &Hyperparameters) -> Self {
        Self::new(model.parameter_count(), hp.learning_rate, hp.beta1, hp.beta2, hp.epsilon)
    }

    /// One bias-corrected update over parameter groups laid end to end.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        let total: usize = params.iter().map(|p| p.len()).sum();
        let shapes_match = params.len() == grads.len()
            && params.iter().zip(grads).all(|(p, g)| p.len() == g.len());
        if total != self.m.len() || !shapes_match {
            return Err(Error::DimensionMismatch {
                expected: self.m.len(),
                got: total,
            });
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        let mut k = 0;
        for (p, g) in params.iter_mut().zip(grads) {
            for (w, &gi) in p.iter_mut().zip(g.iter()) {
                self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * gi;
                self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * gi * gi;
                let m_hat = self.m[k] / c1;
                let v_hat = self.v[k] / c2;
                *w -= self.alpha * m_hat / (v_hat.sqrt() + self.epsilon);
                k += 1;
            }
        }
        Ok(())
    }
}

pub fn adam_step(model: &mut MlpModel, grads: &MlpModel, state: &mut AdamState) -> Result<()> {
    if !model.same_shape(grads) {
        return Err(Error::DimensionMismatch {
            expected: model.parameter_count(),
            got: grads.parameter_count(),
        });
    }
    state.step(&mut model.slices_mut(), &grads.slices())
}

/// The model `train` starts from for this dataset shape and seed.
pub fn initial_model(inputs: usize, classes: usize, hp: &Hyperparameters, seed: u64) -> MlpModel {
    MlpModel::initialized(inputs, hp.hidden, classes, &mut rng::seeded_stream(seed, 0))
}

/// Trains on all rows; returns the model and the mean loss of each epoch.
pub fn train(dataset: &DocumentDataset, hp: &Hyperparameters, seed: u64) -> Result<(MlpModel, Vec<f64>)> {
    let rows: Vec<usize> = (0..dataset.len()).collect();
    train_rows(dataset, &rows, hp, seed)
}

/// Trains on the given subset of rows.
pub fn train_rows(
    dataset: &DocumentDataset,
    rows: &[usize],
    hp: &Hyperparameters,
    seed: u64,
) -> Result<(MlpModel, Vec<f64>)> {
    if rows.is_empty() || dataset.classes() == 0 {
        return Err(Error::EmptyDataset);
    }
    if hp.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    let mut model = initial_model(dataset.width(), dataset.classes(), hp, seed);
    let mut adam = AdamState::for_model(&model, hp);
    let mut order = rows.to_vec();
    let mut shuffler = rng::seeded_stream(seed, 1);
    let mut history = Vec::with_capacity(hp.epochs);
    for epoch in 0..hp.epochs {
        rng::shuffle(&mut shuffler, &mut order);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(hp.batch_size) {
            let batch: Vec<&SparseRow> = chunk.iter().map(|&i| &dataset.rows[i]).collect();
            let labels: Vec<usize> = chunk.iter().map(|&i| dataset.labels[i]).collect();
            let (grads, l) = backward(&model, &batch, &labels)?;
            adam_step(&mut model, &grads, &mut adam)?;
            epoch_loss += l * chunk.len() as f64;
        }
        let mean = epoch_loss / order.len() as f64;
        if !mean.is_finite() || !model.is_finite() {
            return Err(Error::NonFinite(format!("training diverged at epoch {}", epoch + 1)));
        }
        history.push(mean);
    }
    Ok((model, history))
}

/// `confusion[true][predicted]` counts over the given rows.
pub fn confusion(model: &MlpModel, dataset: &DocumentDataset, rows: &[usize]) -> Result<Vec<Vec<u64>>> {
    let c = dataset.classes();
    let mut m = vec![vec![0u64; c]; c];
    for &i in rows {
        let p = model.predict_sparse(&dataset.rows[i])?;
        m[dataset.labels[i]][argmax(&p)] += 1;
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f_score: Vec<f64>,
    pub support: Vec<u64>,
    pub accuracy: f64,
    pub confusion: Vec<Vec<u64>>,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Per-class precision, recall and F-score; any ratio with a zero
/// denominator is 0.
pub fn metrics(confusion: &[Vec<u64>]) -> Result<ClassMetrics> {
    let c = confusion.len();
    if confusion.iter().any(|r| r.len() != c) {
        return Err(Error::DimensionMismatch {
            expected: c,
            got: confusion.iter().map(Vec::len).find(|&l| l != c).unwrap_or(0),
        });
    }
    let total: u64 = confusion.iter().flatten().sum();
    if c == 0 || total == 0 {
        return Err(Error::EmptyConfusion);
    }
    let mut out = ClassMetrics {
        precision: Vec::with_capacity(c),
        recall: Vec::with_capacity(c),
        f_score: Vec::with_capacity(c),
        support: Vec::with_capacity(c),
        accuracy: 0.0,
        confusion: confusion.to_vec(),
    };
    let mut trace = 0;
    for k in 0..c {
        let tp = confusion[k][k];
        let predicted: u64 = confusion.iter().map(|r| r[k]).sum();
        let actual: u64 = confusion[k].iter().sum();
        let p = ratio(tp as f64, predicted as f64);
        let r = ratio(tp as f64, actual as f64);
        out.precision.push(p);
        out.recall.push(r);
        out.f_score.push(ratio(2.0 * p * r, p + r));
        out.support.push(actual);
        trace += tp;
    }
    out.accuracy = trace as f64 / total as f64;
    Ok(out)
}

/// Fold number for every row. Rows of each class are shuffled with the
/// seed and dealt round-robin; each class starts where the previous one
/// stopped so overall fold sizes also differ by at most one.
pub fn stratified_folds(labels: &[usize], classes: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::InvalidArgument("need at least 2 folds".into()));
    }
    let mut by_class = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut folds = vec![0; labels.len()];
    let mut next = 0;
    for (class, mut rows) in by_class.into_iter().enumerate() {
        if rows.len() < k {
            return Err(Error::TooFewRowsPerClass {
                label: class.to_string(),
                rows: rows.len(),
                folds: k,
            });
        }
        rng::shuffle(&mut rng::seeded_stream(seed, class as u64), &mut rows);
        for r in rows {
            folds[r] = next;
            next = (next + 1) % k;
        }
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvReport {
    pub folds: Vec<ClassMetrics>,
    pub fold_accuracies: Vec<f64>,
    /// Mean of the per-fold accuracies.
    pub mean_accuracy: f64,
    /// Sample standard deviation of the per-fold accuracies.
    pub sd_accuracy: f64,
    /// Metrics of the summed confusion matrix over all folds.
    pub pooled: ClassMetrics,
}

/// Stratified k-fold cross-validation. Folds train independently and may
/// run in parallel; results do not depend on scheduling.
pub fn kfold_cv(dataset: &DocumentDataset, k: usize, hp: &Hyperparameters, seed: u64) -> Result<CvReport> {
    let folds = stratified_folds(&dataset.labels, dataset.classes(), k, seed)
        .map_err(|e| match e {
            Error::TooFewRowsPerClass { label, rows, folds } => Error::TooFewRowsPerClass {
                label: label
                    .parse::<usize>()
                    .ok()
                    .and_then(|i| dataset.label_names.get(i).cloned())
                    .unwrap_or(label),
                rows,
                folds,
            },
            other => other,
        })?;
    let per_fold: Vec<ClassMetrics> = (0..k)
        .into_par_iter()
        .map(|f| {
            let train_rows_: Vec<usize> = (0..dataset.len()).filter(|&i| folds[i] != f).collect();
            let test_rows: Vec<usize> = (0..dataset.len()).filter(|&i| folds[i] == f).collect();
            let fold_seed = seed.wrapping_add(f as u64 + 1);
            let (model, _) = train_rows(dataset, &train_rows_, hp, fold_seed)?;
            metrics(&confusion(&model, dataset, &test_rows)?)
        })
        .collect::<Result<_>>()?;
    let fold_accuracies: Vec<f64> = per_fold.iter().map(|m| m.accuracy).collect();
    let (mean_accuracy, sd_accuracy) = crate::cluster::mean_and_sd(&fold_accuracies);
    let c = dataset.classes();
    let mut pooled = vec![vec![0u64; c]; c];
    for m in &per_fold {
        for (a, row) in m.confusion.iter().enumerate() {
            for (b, v) in row.iter().enumerate() {
                pooled[a][b] += v;
            }
        }
    }
    Ok(CvReport {
        folds: per_fold,
        fold_accuracies,
        mean_accuracy,
        sd_accuracy,
        pooled: metrics(&pooled)?,
    })
}

/// A trained network with everything needed to classify new text.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub feature_index: Vec<String>,
    pub label_names: Vec<String>,
    pub model: MlpModel,
    pub hyperparameters: Hyperparameters,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    feature_index: Vec<String>,
    label_names: Vec<String>,
    #[serde(rename = "W1")]
    w1: Vec<Vec<f64>>,
    b1: Vec<f64>,
    #[serde(rename = "W2")]
    w2: Vec<Vec<f64>>,
    b2: Vec<f64>,
    hyperparameters: Hyperparameters,
    seed: u64,
}

impl TrainedModel {
    pub fn to_json(&self) -> String {
        let m = &self.model;
        let file = ModelFile {
            feature_index: self.feature_index.clone(),
            label_names: self.label_names.clone(),
            w1: m.w1.chunks(m.hidden.max(1)).map(<[f64]>::to_vec).collect(),
            b1: m.b1.clone(),
            w2: m.w2.chunks(m.classes.max(1)).map(<[f64]>::to_vec).collect(),
            b2: m.b2.clone(),
            hyperparameters: self.hyperparameters,
            seed: self.seed,
        };
        serde_json::to_string(&file).expect("model serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: ModelFile = serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
        let (inputs, classes) = (f.feature_index.len(), f.label_names.len());
        let hidden = f.b1.len();
        let bad = |what: &str| Err(Error::ModelFormat(what.to_string()));
        if classes == 0 || hidden == 0 {
            return bad("model has no classes or no hidden units");
        }
        if f.w1.len() != inputs || f.w1.iter().any(|r| r.len() != hidden) {
            return bad("W1 does not match feature_index × b1");
        }
        if f.w2.len() != hidden || f.w2.iter().any(|r| r.len() != classes) || f.b2.len() != classes {
            return bad("W2 or b2 does not match b1 × label_names");
        }
        let model = MlpModel {
            inputs,
            hidden,
            classes,
            w1: f.w1.concat(),
            b1: f.b1,
            w2: f.w2.concat(),
            b2: f.b2,
        };
        if !model.is_finite() {
            return bad("model has non-finite parameters");
        }
        Ok(TrainedModel {
            feature_index: f.feature_index,
            label_names: f.label_names,
            model,
            hyperparameters: f.hyperparameters,
            seed: f.seed,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Language probabilities for tagged text, highest first. Tri-grams
    /// outside the feature index are ignored and the remaining ones are
    /// renormalized, matching how training rows were built.
    pub fn identify(&self, sentences: &[PosSentence]) -> Result<Vec<(String, f64)>> {
        let position: HashMap<&str, u32> = self
            .feature_index
            .iter()
            .enumerate()
            .map(|(i, k)| (k.as_str(), i as u32))
            .collect();
        let mut counts: BTreeMap<u32, u64> = BTreeMap::new();
        for (key, n) in document_counts(sentences.iter()) {
            if let Some(&i) = position.get(key.as_str()) {
                *counts.entry(i).or_insert(0) += n;
            }
        }
        let total: u64 = counts.values().sum();
        if total == 0 {
            return Err(Error::NoUsableTriples);
        }
        let row = SparseRow {
            indices: counts.keys().copied().collect(),
            values: counts.values().map(|&c| c as f64 / total as f64).collect(),
        };
        let p = self.model.predict_sparse(&row)?;
        let mut ranked: Vec<(String, f64)> = self.label_names.iter().cloned().zip(p).collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Ok(ranked)
    }
}
