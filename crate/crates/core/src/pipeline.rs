//! End-to-end runs over a corpus directory.
//!
//! The corpus directory holds one subdirectory per language code with a
//! `raw.txt` (one sentence per line) and/or a `tagged.conllu`. Every run is
//! a pure function of the corpus files and the [`PipelineConfig`]; outputs
//! land under the configured output directory:
//!
//! ```text
//! profiles/<lang>.char.{tsv,json}  profiles/<lang>.pos.{tsv,json}
//! profiles/summary.tsv             profiles/index.json
//! matrices/{written,structure,overall}.{tsv,phy}
//! trees/{written,structure,overall}.nwk
//! graph/overall.{dot,json}
//! model.json  train_loss.tsv
//! metrics/{metrics.tsv,metrics.json,confusion.tsv}
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cluster::{self, Linkage, SimilarityGraph};
use crate::corpus::{self, CharsetWhitelist, SentenceCorpus};
use crate::distance::{self, DistanceMatrix};
use crate::error::{Error, Result};
use crate::neural::{self, CvReport, Hyperparameters, TrainedModel};
use crate::ngram;
use crate::posgram;
use crate::profile::{FeatureProfile, ProfileKind};
use crate::translit::{TranslitTable, Transliterator, DEFAULT_TABLES};

pub const RAW_FILE: &str = "raw.txt";
pub const TAGGED_FILE: &str = "tagged.conllu";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalize {
    #[default]
    None,
    Minmax,
}

impl std::str::FromStr for Normalize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Normalize::None),
            "minmax" => Ok(Normalize::Minmax),
            _ => Err(Error::InvalidArgument(format!("unknown normalization {s:?}"))),
        }
    }
}

/// Every choice a run depends on. Missing fields take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus_dir: PathBuf,
    pub output_dir: PathBuf,
    /// Languages to use; all subdirectories of `corpus_dir` when absent.
    pub languages: Option<Vec<String>>,
    pub min_words: usize,
    pub min_words_per_language: BTreeMap<String, usize>,
    pub charset_whitelist: Option<PathBuf>,
    /// Bundled table names or paths to table files.
    pub translit_tables: Vec<String>,
    pub char_top_k: usize,
    pub pos_top_k: usize,
    pub z_threshold: f64,
    pub linkage: Linkage,
    pub normalize: Normalize,
    pub docs_per_lang: usize,
    pub sentences_per_doc: usize,
    pub folds: usize,
    pub hyperparameters: Hyperparameters,
    /// Drives document sampling, weight initialization and fold splits.
    pub seed: u64,
    pub community_seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            corpus_dir: PathBuf::from("corpora"),
            output_dir: PathBuf::from("out"),
            languages: None,
            min_words: 3,
            min_words_per_language: BTreeMap::new(),
            charset_whitelist: None,
            translit_tables: DEFAULT_TABLES.iter().map(|s| s.to_string()).collect(),
            char_top_k: ngram::DEFAULT_TOP_K_PER_N,
            pos_top_k: posgram::DEFAULT_TOP_K,
            z_threshold: cluster::DEFAULT_Z_THRESHOLD,
            linkage: Linkage::Average,
            normalize: Normalize::None,
            docs_per_lang: neural::DEFAULT_DOCS_PER_LANG,
            sentences_per_doc: neural::DEFAULT_SENTENCES_PER_DOC,
            folds: neural::DEFAULT_FOLDS,
            hyperparameters: Hyperparameters::default(),
            seed: 42,
            community_seed: 42,
        }
    }
}

impl PipelineConfig {
    /// Parses a config file. Relative paths inside it are taken relative
    /// to the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: PipelineConfig = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        rebase(&mut cfg.corpus_dir);
        rebase(&mut cfg.output_dir);
        if let Some(p) = cfg.charset_whitelist.as_mut() {
            rebase(p);
        }
        for t in &mut cfg.translit_tables {
            if t.ends_with(".json") && Path::new(t).is_relative() {
                *t = base.join(&*t).to_string_lossy().into_owned();
            }
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    pub fn min_words_for(&self, lang: &str) -> usize {
        self.min_words_per_language
            .get(lang)
            .copied()
            .unwrap_or(self.min_words)
    }

    /// Rejects settings no run could use.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(self.z_threshold.is_finite() && self.z_threshold >= 0.0) {
            return bad("z_threshold must be a non-negative number");
        }
        if self.char_top_k == 0 || self.pos_top_k == 0 {
            return bad("top-k settings must be positive");
        }
        if self.docs_per_lang == 0 || self.sentences_per_doc == 0 {
            return bad("docs_per_lang and sentences_per_doc must be positive");
        }
        if self.folds < 2 {
            return bad("folds must be at least 2");
        }
        let hp = &self.hyperparameters;
        if hp.batch_size == 0 || hp.hidden == 0 {
            return bad("batch_size and hidden must be positive");
        }
        if !(hp.learning_rate.is_finite() && hp.learning_rate >= 0.0) {
            return bad("learning_rate must be a non-negative number");
        }
        Ok(())
    }

    fn out(&self, parts: &[&str]) -> PathBuf {
        let mut p = self.output_dir.clone();
        p.extend(parts);
        p
    }

    /// Language directories to process, sorted unless given explicitly.
    pub fn languages(&self) -> Result<Vec<String>> {
        if let Some(langs) = &self.languages {
            for l in langs {
                let dir = self.corpus_dir.join(l);
                if !dir.is_dir() {
                    return Err(Error::FileNotFound(dir));
                }
            }
            return Ok(langs.clone());
        }
        let entries = std::fs::read_dir(&self.corpus_dir).map_err(|e| Error::io(&self.corpus_dir, e))?;
        let mut langs = Vec::new();
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(&self.corpus_dir, e))?;
            let path = entry.path();
            if path.join(RAW_FILE).is_file() || path.join(TAGGED_FILE).is_file() {
                langs.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        langs.sort();
        if langs.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "no language directories with {RAW_FILE} or {TAGGED_FILE} in {}",
                self.corpus_dir.display()
            )));
        }
        Ok(langs)
    }

    pub fn transliterator(&self) -> Result<Transliterator> {
        let tables = self
            .translit_tables
            .iter()
            .map(|t| {
                if Path::new(t).is_file() {
                    TranslitTable::load(t)
                } else {
                    TranslitTable::bundled(t)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Transliterator::new(&tables))
    }
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Per-language counts reported by the profile run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LanguageSummary {
    pub language: String,
    pub raw_lines: Option<usize>,
    pub clean_sentences: Option<usize>,
    pub char_features: Option<usize>,
    pub tagged_sentences: Option<usize>,
    pub clean_tagged_sentences: Option<usize>,
    pub pos_features: Option<usize>,
}

impl LanguageSummary {
    fn has_char(&self) -> bool {
        self.char_features.is_some()
    }

    fn has_pos(&self) -> bool {
        self.pos_features.is_some()
    }
}

pub fn summary_tsv(rows: &[LanguageSummary]) -> String {
    let cell = |v: Option<usize>| v.map_or("-".to_string(), |n| n.to_string());
    let mut out = String::from(
        "language\traw_lines\tclean_sentences\tchar_features\ttagged_sentences\tclean_tagged_sentences\tpos_features\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.language,
            cell(r.raw_lines),
            cell(r.clean_sentences),
            cell(r.char_features),
            cell(r.tagged_sentences),
            cell(r.clean_tagged_sentences),
            cell(r.pos_features)
        );
    }
    out
}

/// Cleaned, transliterated raw corpus of one language.
pub fn prepare_raw(
    cfg: &PipelineConfig,
    lang: &str,
    whitelist: Option<&CharsetWhitelist>,
    translit: &Transliterator,
) -> Result<(usize, SentenceCorpus)> {
    let path = cfg.corpus_dir.join(lang).join(RAW_FILE);
    let loaded = corpus::load_raw_corpus(&path, lang)?;
    let lines = loaded.len();
    let mut clean = corpus::preprocess(&loaded, cfg.min_words_for(lang));
    if let Some(w) = whitelist {
        clean = w.filter(&clean);
    }
    Ok((lines, translit.apply_to_corpus(&clean)))
}

/// Cleaned tagged corpus of one language.
pub fn prepare_tagged(cfg: &PipelineConfig, lang: &str) -> Result<(usize, SentenceCorpus)> {
    let path = cfg.corpus_dir.join(lang).join(TAGGED_FILE);
    let loaded = corpus::load_tagged_corpus(&path, lang)?;
    Ok((loaded.len(), corpus::preprocess(&loaded, cfg.min_words_for(lang))))
}

/// Builds and writes character and POS profiles for every language.
pub fn run_profile(cfg: &PipelineConfig) -> Result<Vec<LanguageSummary>> {
    let langs = cfg.languages()?;
    let translit = cfg.transliterator()?;
    let whitelist = cfg
        .charset_whitelist
        .as_ref()
        .map(CharsetWhitelist::load)
        .transpose()?;
    let dir = cfg.out(&["profiles"]);
    create_dir(&dir)?;
    let mut rows = Vec::new();
    for lang in &langs {
        let ctx = |e: Error| e.context(format!("language {lang}"));
        let mut row = LanguageSummary {
            language: lang.clone(),
            ..Default::default()
        };
        if cfg.corpus_dir.join(lang).join(RAW_FILE).is_file() {
            let (lines, clean) = prepare_raw(cfg, lang, whitelist.as_ref(), &translit).map_err(ctx)?;
            let profile = ngram::build_char_profile(&clean, cfg.char_top_k).map_err(ctx)?;
            profile.save(&dir, &format!("{lang}.char"))?;
            row.raw_lines = Some(lines);
            row.clean_sentences = Some(clean.len());
            row.char_features = Some(profile.len());
        }
        if cfg.corpus_dir.join(lang).join(TAGGED_FILE).is_file() {
            let (lines, clean) = prepare_tagged(cfg, lang).map_err(ctx)?;
            let profile = posgram::build_pos_profile(&clean, cfg.pos_top_k, false).map_err(ctx)?;
            profile.save(&dir, &format!("{lang}.pos"))?;
            row.tagged_sentences = Some(lines);
            row.clean_tagged_sentences = Some(clean.len());
            row.pos_features = Some(profile.len());
        }
        log::info!(
            "{lang}: {} clean sentences, {} char features; {} clean tagged sentences, {} POS features",
            row.clean_sentences.map_or("-".into(), |n| n.to_string()),
            row.char_features.map_or("-".into(), |n| n.to_string()),
            row.clean_tagged_sentences.map_or("-".into(), |n| n.to_string()),
            row.pos_features.map_or("-".into(), |n| n.to_string()),
        );
        rows.push(row);
    }
    write(&dir.join("summary.tsv"), &summary_tsv(&rows))?;
    let index = serde_json::to_string_pretty(&rows)? + "\n";
    write(&dir.join("index.json"), &index)?;
    Ok(rows)
}

fn read_index(cfg: &PipelineConfig) -> Result<Vec<LanguageSummary>> {
    let path = cfg.out(&["profiles", "index.json"]);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Loads the saved profiles of one kind, in index order.
pub fn load_profiles(cfg: &PipelineConfig, kind: ProfileKind) -> Result<Vec<FeatureProfile>> {
    let dir = cfg.out(&["profiles"]);
    read_index(cfg)?
        .iter()
        .filter(|r| match kind {
            ProfileKind::CharNgram => r.has_char(),
            ProfileKind::PosTrigram => r.has_pos(),
        })
        .map(|r| {
            let suffix = if kind == ProfileKind::CharNgram { "char" } else { "pos" };
            FeatureProfile::load(&dir, &format!("{}.{suffix}", r.language))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareOutput {
    pub written: Option<DistanceMatrix>,
    pub structure: Option<DistanceMatrix>,
    pub overall: Option<DistanceMatrix>,
    pub graph: Option<SimilarityGraph>,
}

fn write_matrix_and_tree(cfg: &PipelineConfig, m: &DistanceMatrix, name: &str) -> Result<()> {
    m.save(&cfg.out(&["matrices"]), name)?;
    let tree = cluster::cluster(m, cfg.linkage)?;
    write(&cfg.out(&["trees", &format!("{name}.nwk")]), &(tree.to_newick() + "\n"))
}

/// Distance matrices, trees and the similarity graph from saved profiles.
pub fn run_compare(cfg: &PipelineConfig) -> Result<CompareOutput> {
    for d in ["matrices", "trees", "graph"] {
        create_dir(&cfg.out(&[d]))?;
    }
    let matrix_of = |kind: ProfileKind| -> Result<Option<DistanceMatrix>> {
        let profiles = load_profiles(cfg, kind)?;
        if profiles.len() < 2 {
            log::warn!("fewer than two {} profiles; skipping", kind.as_str());
            return Ok(None);
        }
        distance::distance_matrix(&profiles).map(Some)
    };
    let written = matrix_of(ProfileKind::CharNgram)?;
    let structure = matrix_of(ProfileKind::PosTrigram)?;
    if let Some(m) = &written {
        write_matrix_and_tree(cfg, m, "written")?;
    }
    if let Some(m) = &structure {
        write_matrix_and_tree(cfg, m, "structure")?;
    }

    let overall = match (&written, &structure) {
        (Some(w), Some(s)) => {
            let common: Vec<String> = w
                .labels
                .iter()
                .filter(|l| s.index_of(l).is_some())
                .cloned()
                .collect();
            if common.len() < w.len() || common.len() < s.len() {
                log::warn!("overall distance uses only the {} languages with both profiles", common.len());
            }
            if common.len() < 2 {
                None
            } else {
                let (mut w, mut s) = (w.select(&common)?, s.select(&common)?);
                if cfg.normalize == Normalize::Minmax {
                    w = w.minmax_normalized();
                    s = s.minmax_normalized();
                }
                Some(distance::average_matrices(&w, &s)?)
            }
        }
        _ => None,
    };
    let graph = match &overall {
        Some(m) => {
            write_matrix_and_tree(cfg, m, "overall")?;
            let filtered = if m.len() < 3 {
                log::warn!("z-scores need at least three languages; graph has no edges");
                SimilarityGraph::empty(m.labels.clone())
            } else {
                cluster::zscore_filter(m, cfg.z_threshold)?
            };
            let g = cluster::detect_communities(&filtered, cfg.community_seed);
            log::info!(
                "{} similarity edges, {} communities (label propagation, used in place of Infomap)",
                g.edges.len(),
                g.community_count()
            );
            write(&cfg.out(&["graph", "overall.dot"]), &g.to_dot())?;
            write(&cfg.out(&["graph", "overall.json"]), &g.to_json())?;
            Some(g)
        }
        None => None,
    };
    if written.is_none() && structure.is_none() {
        return Err(Error::TooFewLabels { needed: 2, got: read_index(cfg)?.len() });
    }
    Ok(CompareOutput {
        written,
        structure,
        overall,
        graph,
    })
}

/// Cleaned tagged corpora of every language that has one.
pub fn tagged_corpora(cfg: &PipelineConfig) -> Result<Vec<SentenceCorpus>> {
    let mut out = Vec::new();
    for lang in cfg.languages()? {
        if cfg.corpus_dir.join(&lang).join(TAGGED_FILE).is_file() {
            let (_, c) = prepare_tagged(cfg, &lang).map_err(|e| e.context(format!("language {lang}")))?;
            out.push(c);
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(out)
}

pub fn build_dataset(cfg: &PipelineConfig) -> Result<neural::DocumentDataset> {
    let corpora = tagged_corpora(cfg)?;
    let ds = neural::build_dataset(&corpora, cfg.docs_per_lang, cfg.sentences_per_doc, cfg.seed)?;
    log::info!(
        "{} documents, {} languages, {} input features",
        ds.len(),
        ds.classes(),
        ds.width()
    );
    Ok(ds)
}

/// Trains on every document and writes the model and loss history.
pub fn run_train(cfg: &PipelineConfig) -> Result<(TrainedModel, Vec<f64>)> {
    let ds = build_dataset(cfg)?;
    let (model, history) = neural::train(&ds, &cfg.hyperparameters, cfg.seed)?;
    let trained = TrainedModel {
        feature_index: ds.feature_index,
        label_names: ds.label_names,
        model,
        hyperparameters: cfg.hyperparameters,
        seed: cfg.seed,
    };
    create_dir(&cfg.output_dir)?;
    trained.save(&cfg.out(&["model.json"]))?;
    let mut loss = String::from("epoch\tloss\n");
    for (i, l) in history.iter().enumerate() {
        let _ = writeln!(loss, "{}\t{l}", i + 1);
    }
    write(&cfg.out(&["train_loss.tsv"]), &loss)?;
    if let Some(last) = history.last() {
        log::info!("final training loss {last}");
    }
    Ok((trained, history))
}

/// Per-class metrics of the pooled confusion matrix as TSV.
pub fn metrics_tsv(report: &CvReport, labels: &[String]) -> String {
    let m = &report.pooled;
    let mut out = String::from("language\tprecision\trecall\tf_score\tsupport\n");
    for (i, l) in labels.iter().enumerate() {
        let _ = writeln!(out, "{l}\t{}\t{}\t{}\t{}", m.precision[i], m.recall[i], m.f_score[i], m.support[i]);
    }
    out
}

fn confusion_tsv(report: &CvReport, labels: &[String]) -> String {
    let mut out = String::from("true\\predicted");
    for l in labels {
        let _ = write!(out, "\t{l}");
    }
    out.push('\n');
    for (l, row) in labels.iter().zip(&report.pooled.confusion) {
        out.push_str(l);
        for v in row {
            let _ = write!(out, "\t{v}");
        }
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct MetricsSummary<'a> {
    label_names: &'a [String],
    folds: usize,
    mean_accuracy: f64,
    sd_accuracy: f64,
    pooled_accuracy: f64,
    fold_accuracies: &'a [f64],
    per_class: Vec<ClassRow<'a>>,
    per_fold: &'a [neural::ClassMetrics],
}

#[derive(Serialize)]
struct ClassRow<'a> {
    language: &'a str,
    precision: f64,
    recall: f64,
    f_score: f64,
    support: u64,
}

/// Stratified cross-validation; writes the metrics files.
pub fn run_evaluate(cfg: &PipelineConfig) -> Result<(CvReport, Vec<String>)> {
    let ds = build_dataset(cfg)?;
    let report = neural::kfold_cv(&ds, cfg.folds, &cfg.hyperparameters, cfg.seed)?;
    let labels = ds.label_names;
    let dir = cfg.out(&["metrics"]);
    create_dir(&dir)?;
    write(&dir.join("metrics.tsv"), &metrics_tsv(&report, &labels))?;
    write(&dir.join("confusion.tsv"), &confusion_tsv(&report, &labels))?;
    let p = &report.pooled;
    let summary = MetricsSummary {
        label_names: &labels,
        folds: cfg.folds,
        mean_accuracy: report.mean_accuracy,
        sd_accuracy: report.sd_accuracy,
        pooled_accuracy: p.accuracy,
        fold_accuracies: &report.fold_accuracies,
        per_class: labels
            .iter()
            .enumerate()
            .map(|(i, l)| ClassRow {
                language: l,
                precision: p.precision[i],
                recall: p.recall[i],
                f_score: p.f_score[i],
                support: p.support[i],
            })
            .collect(),
        per_fold: &report.folds,
    };
    write(&dir.join("metrics.json"), &(serde_json::to_string_pretty(&summary)? + "\n"))?;
    log::info!(
        "accuracy {} ± {} over {} folds (pooled {})",
        report.mean_accuracy,
        report.sd_accuracy,
        cfg.folds,
        p.accuracy
    );
    Ok((report, labels))
}

/// Ranked language probabilities for a tagged file.
pub fn identify_file(model: &Path, input: &Path) -> Result<Vec<(String, f64)>> {
    let trained = TrainedModel::load(model)?;
    let sentences = corpus::load_tagged_corpus(input, "input")?;
    trained.identify(sentences.tagged_sentences())
}

/// Options for the human-readable report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportOptions {
    pub top: usize,
    /// Only show POS tri-grams made of three different tags.
    pub distinct_only: bool,
}

/// Top features per language, plus communities and metrics when present.
pub fn report(cfg: &PipelineConfig, opts: ReportOptions) -> Result<String> {
    let mut out = String::new();
    let join = |v: Vec<(&str, f64)>| v.iter().map(|(k, _)| *k).collect::<Vec<_>>().join(" ");
    for p in load_profiles(cfg, ProfileKind::CharNgram)? {
        let _ = writeln!(out, "{}\tdi-grams\t{}", p.language_code, join(p.top_where(opts.top, |k| k.chars().count() == 2)));
        let _ = writeln!(out, "{}\ttri-grams\t{}", p.language_code, join(p.top_where(opts.top, |k| k.chars().count() == 3)));
    }
    for p in load_profiles(cfg, ProfileKind::PosTrigram)? {
        let top = p.top_where(opts.top, |k| !opts.distinct_only || posgram::is_distinct_key(k));
        let _ = writeln!(out, "{}\tpos-trigrams\t{}", p.language_code, join(top));
    }
    let graph = cfg.out(&["graph", "overall.json"]);
    if graph.is_file() {
        let text = std::fs::read_to_string(&graph).map_err(|e| Error::io(&graph, e))?;
        let v: serde_json::Value = serde_json::from_str(&text)?;
        let mut groups: BTreeMap<u64, Vec<&str>> = BTreeMap::new();
        if let Some(c) = v["communities"].as_object() {
            for (lang, id) in c {
                groups.entry(id.as_u64().unwrap_or(0)).or_default().push(lang);
            }
        }
        out.push_str("# communities found by label propagation (in place of Infomap)\n");
        for (id, langs) in groups {
            let _ = writeln!(out, "community {id}\t{}", langs.join(" "));
        }
    }
    let metrics = cfg.out(&["metrics", "metrics.json"]);
    if metrics.is_file() {
        let text = std::fs::read_to_string(&metrics).map_err(|e| Error::io(&metrics, e))?;
        let v: serde_json::Value = serde_json::from_str(&text)?;
        let _ = writeln!(
            out,
            "accuracy\tmean {}\tsd {}\tpooled {}",
            v["mean_accuracy"], v["sd_accuracy"], v["pooled_accuracy"]
        );
    }
    Ok(out)
}
