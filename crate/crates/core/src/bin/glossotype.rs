use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use glossotype::cluster::Linkage;
use glossotype::pipeline::{self, Normalize, PipelineConfig, ReportOptions};
use glossotype::Error;

/// Language fingerprints from character n-grams and part-of-speech
/// tri-grams: profiles, distance trees, similarity graphs and a small
/// neural language identifier.
///
/// Communities in the similarity graph are found with label propagation,
/// used in place of Infomap.
///
/// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
/// GLOSSOTYPE_THREADS caps the number of worker threads.
#[derive(Parser)]
#[command(name = "glossotype", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config file; flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory with one subdirectory per language code.
    #[arg(long)]
    corpus_dir: Option<PathBuf>,
    /// Output directory.
    #[arg(long = "out")]
    output_dir: Option<PathBuf>,
    /// Comma-separated language codes (default: every subdirectory).
    #[arg(long, value_delimiter = ',')]
    languages: Option<Vec<String>>,
    /// Minimum words per sentence, as N for all languages or LANG=N for
    /// one; repeatable.
    #[arg(long)]
    min_words: Vec<String>,
    /// Seed for sampling, initialization and fold splits.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct NetArgs {
    #[arg(long)]
    docs_per_lang: Option<usize>,
    #[arg(long)]
    sentences_per_doc: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Build character n-gram and POS tri-gram profiles per language.
    Profile {
        #[command(flatten)]
        common: Common,
        /// Bundled table name or table file; repeatable, replaces the
        /// default Greek and Cyrillic tables.
        #[arg(long = "translit-table")]
        translit_tables: Vec<String>,
        #[arg(long)]
        char_top_k: Option<usize>,
        #[arg(long)]
        pos_top_k: Option<usize>,
        /// JSON map of language code to allowed Unicode script names.
        #[arg(long)]
        whitelist: Option<PathBuf>,
    },
    /// Distance matrices, trees and the z-filtered similarity graph.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        z_threshold: Option<f64>,
        /// average (UPGMA), single or complete.
        #[arg(long)]
        linkage: Option<Linkage>,
        /// Rescale written and structure distances before averaging:
        /// none or minmax.
        #[arg(long)]
        normalize: Option<Normalize>,
        #[arg(long)]
        community_seed: Option<u64>,
    },
    /// Train the language identifier on all documents.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        net: NetArgs,
    },
    /// Stratified k-fold cross-validation of the identifier.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        net: NetArgs,
        #[arg(long)]
        folds: Option<usize>,
    },
    /// Rank languages for a tagged (CoNLL-U) file.
    Identify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Show only the N most probable languages.
        #[arg(long)]
        top: Option<usize>,
    },
    /// Top features per language, communities and accuracy.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10)]
        top: usize,
        /// Only POS tri-grams made of three different tags.
        #[arg(long)]
        distinct_only: bool,
    },
}

enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

fn usage(msg: impl std::fmt::Display) -> Failure {
    Failure::Usage(msg.to_string())
}

fn base_config(common: &Common) -> Result<PipelineConfig, Failure> {
    let mut cfg = match &common.config {
        Some(path) => PipelineConfig::load(path).map_err(|e| usage(format!("config {}: {e}", path.display())))?,
        None => PipelineConfig::default(),
    };
    if let Some(d) = &common.corpus_dir {
        cfg.corpus_dir = d.clone();
    }
    if let Some(d) = &common.output_dir {
        cfg.output_dir = d.clone();
    }
    if let Some(l) = &common.languages {
        cfg.languages = Some(l.clone());
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    for entry in &common.min_words {
        let parse = |v: &str| v.parse::<usize>().map_err(|_| usage(format!("bad --min-words value {entry:?}")));
        match entry.split_once('=') {
            Some((lang, n)) => {
                cfg.min_words_per_language.insert(lang.to_string(), parse(n)?);
            }
            None => cfg.min_words = parse(entry)?,
        }
    }
    Ok(cfg)
}

fn apply_net(cfg: &mut PipelineConfig, net: &NetArgs) {
    let hp = &mut cfg.hyperparameters;
    if let Some(v) = net.epochs {
        hp.epochs = v;
    }
    if let Some(v) = net.batch_size {
        hp.batch_size = v;
    }
    if let Some(v) = net.learning_rate {
        hp.learning_rate = v;
    }
    if let Some(v) = net.docs_per_lang {
        cfg.docs_per_lang = v;
    }
    if let Some(v) = net.sentences_per_doc {
        cfg.sentences_per_doc = v;
    }
}

fn checked(cfg: PipelineConfig) -> Result<PipelineConfig, Failure> {
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Profile {
            common,
            translit_tables,
            char_top_k,
            pos_top_k,
            whitelist,
        } => {
            let mut cfg = base_config(&common)?;
            if !translit_tables.is_empty() {
                cfg.translit_tables = translit_tables;
            }
            if let Some(k) = char_top_k {
                cfg.char_top_k = k;
            }
            if let Some(k) = pos_top_k {
                cfg.pos_top_k = k;
            }
            if whitelist.is_some() {
                cfg.charset_whitelist = whitelist;
            }
            let cfg = checked(cfg)?;
            cfg.transliterator().map_err(usage)?;
            let rows = pipeline::run_profile(&cfg)?;
            print!("{}", pipeline::summary_tsv(&rows));
        }
        Command::Compare {
            common,
            z_threshold,
            linkage,
            normalize,
            community_seed,
        } => {
            let mut cfg = base_config(&common)?;
            if let Some(z) = z_threshold {
                cfg.z_threshold = z;
            }
            if let Some(l) = linkage {
                cfg.linkage = l;
            }
            if let Some(n) = normalize {
                cfg.normalize = n;
            }
            if let Some(s) = community_seed {
                cfg.community_seed = s;
            }
            let out = pipeline::run_compare(&checked(cfg)?)?;
            if let Some(g) = out.graph {
                for (id, members) in g.community_sets().iter().enumerate() {
                    let names: Vec<&str> = members.iter().map(String::as_str).collect();
                    println!("community {id}\t{}", names.join(" "));
                }
            }
        }
        Command::Train { common, net } => {
            let mut cfg = base_config(&common)?;
            apply_net(&mut cfg, &net);
            let (_, history) = pipeline::run_train(&checked(cfg)?)?;
            if let Some(l) = history.last() {
                println!("final loss\t{l}");
            }
        }
        Command::Evaluate { common, net, folds } => {
            let mut cfg = base_config(&common)?;
            apply_net(&mut cfg, &net);
            if let Some(k) = folds {
                cfg.folds = k;
            }
            let (report, labels) = pipeline::run_evaluate(&checked(cfg)?)?;
            print!("{}", pipeline::metrics_tsv(&report, &labels));
            println!(
                "accuracy\tmean {}\tsd {}\tpooled {}",
                report.mean_accuracy, report.sd_accuracy, report.pooled.accuracy
            );
        }
        Command::Identify { model, input, top } => {
            let ranked = pipeline::identify_file(&model, &input)?;
            for (lang, p) in ranked.iter().take(top.unwrap_or(usize::MAX)) {
                println!("{lang}\t{p}");
            }
        }
        Command::Report {
            common,
            top,
            distinct_only,
        } => {
            let cfg = base_config(&common)?;
            print!("{}", pipeline::report(&cfg, ReportOptions { top, distinct_only })?);
        }
    }
    Ok(())
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("GLOSSOTYPE_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| usage(format!("GLOSSOTYPE_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(usage)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = configure_threads().and_then(|()| run(cli));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() { 3 } else { 2 })
        }
    }
}
