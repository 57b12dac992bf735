//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if
//! any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::path::Path;
use std::time::{Duration, Instant};

use glossotype::cluster::{self, detect_communities, zscore_filter, DEFAULT_Z_THRESHOLD};
use glossotype::corpus::{load_raw_corpus, load_tagged_corpus, preprocess, PosSentence, SentenceCorpus, UposTag};
use glossotype::distance::{align_features, manhattan, DistanceMatrix, MatrixKind};
use glossotype::neural::{self, backward, build_dataset, forward, kfold_cv, loss, AdamState, Hyperparameters, MlpModel, SparseRow, TrainedModel};
use glossotype::ngram::build_char_profile;
use glossotype::pipeline::{self, PipelineConfig};
use glossotype::posgram::{build_pos_profile, trigram_key};
use glossotype::profile::{FeatureProfile, ProfileKind};
use glossotype::rng::{self, ChaCha8Rng};
use glossotype::translit::Transliterator;
use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn top_keys(p: &FeatureProfile, k: usize, keep: impl Fn(&str) -> bool) -> Vec<String> {
    p.top_where(k, keep).into_iter().map(|(k, _)| k.to_string()).collect()
}

fn synthetic_accuracy() -> Outcome {
    let start = Instant::now();
    let mut r = rng::seeded(2024);
    let dists = common::distinct_triple_distributions(&mut r, 5, 0.05, 0.3);
    let corpora: Vec<SentenceCorpus> = dists
        .iter()
        .enumerate()
        .map(|(i, d)| SentenceCorpus::tagged(format!("s{i}"), common::triple_sentences(&mut r, d, 2000)))
        .collect();
    let ds = build_dataset(&corpora, 100, 20, 7).map_err(|e| e.to_string())?;
    let report = kfold_cv(&ds, 10, &Hyperparameters::default(), 7).map_err(|e| e.to_string())?;
    let took = start.elapsed();
    check(
        report.mean_accuracy >= 0.95 && took <= Duration::from_secs(300),
        format!("mean accuracy {:.4} (sd {:.4}) in {:.1}s", report.mean_accuracy, report.sd_accuracy, took.as_secs_f64()),
    )
}

fn english_char_ngrams() -> Outcome {
    let start = Instant::now();
    let raw = load_raw_corpus(common::english_dir().join("raw.txt"), "en").map_err(|e| e.to_string())?;
    let clean = Transliterator::with_defaults().apply_to_corpus(&preprocess(&raw, 3));
    let p = build_char_profile(&clean, 1000).map_err(|e| e.to_string())?;
    let di = top_keys(&p, 10, |k| k.chars().count() == 2);
    let tri = top_keys(&p, 10, |k| k.chars().count() == 3);
    let took = start.elapsed();
    let has = |v: &[String], k: &str| v.iter().any(|x| x == k);
    check(
        clean.len() >= 5000 && has(&di, "th") && has(&di, "he") && has(&tri, "the") && took <= Duration::from_secs(30),
        format!("{} sentences, di-grams [{}], tri-grams [{}], {:.1}s", clean.len(), di.join(" "), tri.join(" "), took.as_secs_f64()),
    )
}

fn english_pos_trigrams() -> Outcome {
    let start = Instant::now();
    let tagged = load_tagged_corpus(common::english_dir().join("tagged.conllu"), "en").map_err(|e| e.to_string())?;
    let clean = preprocess(&tagged, 3);
    let p = build_pos_profile(&clean, 2000, false).map_err(|e| e.to_string())?;
    let top = top_keys(&p, 10, |_| true);
    let took = start.elapsed();
    check(
        clean.len() >= 2000 && top.iter().any(|k| k == "ADP|DET|NOUN") && took <= Duration::from_secs(30),
        format!("{} sentences, top [{}], {:.1}s", clean.len(), top.join(" "), took.as_secs_f64()),
    )
}

fn random_small_model(r: &mut ChaCha8Rng, inputs: usize, classes: usize) -> MlpModel {
    let mut m = MlpModel::initialized(inputs, neural::HIDDEN, classes, r);
    for b in m.b1.iter_mut().chain(m.b2.iter_mut()) {
        *b = r.random_range(-0.5..0.5);
    }
    m
}

/// Relative error |a - n| / max(|a|, |n|, 1e-8). The floor only matters for
/// components of inactive hidden units, whose gradients are exactly zero.
fn gradient_check() -> Outcome {
    let step = 1e-5;
    let mut r = rng::seeded(404);
    let mut worst: f64 = 0.0;
    let mut components = 0usize;
    let mut tiny = 0usize;
    for _ in 0..100 {
        let m = random_small_model(&mut r, 20, 5);
        let x = SparseRow::from_dense(&(0..20).map(|_| r.random_range(0.0..1.0)).collect::<Vec<f64>>());
        let y = rng::index(&mut r, 5);
        let (g, _) = backward(&m, &[&x], &[y]).map_err(|e| e.to_string())?;
        for (group, gs) in g.slices().iter().enumerate() {
            for (k, &a) in gs.iter().enumerate() {
                let eval = |delta: f64| {
                    let mut q = m.clone();
                    q.slices_mut()[group][k] += delta;
                    loss(&q.predict_sparse(&x).unwrap(), y)
                };
                let n = (eval(step) - eval(-step)) / (2.0 * step);
                let scale = a.abs().max(n.abs());
                components += 1;
                let err = if scale < 1e-8 {
                    tiny += 1;
                    (a - n).abs() / 1e-8
                } else {
                    (a - n).abs() / scale
                };
                worst = worst.max(err);
            }
        }
    }
    check(worst <= 1e-4, format!("{components} components ({tiny} below 1e-8), worst relative error {worst:.3e}"))
}

fn adam_trace() -> Outcome {
    // f(a, b) = 2(a - 3)² + 0.5 b², gradients (4(a - 3), b).
    let (alpha, b1, b2, eps) = (0.05, 0.9, 0.999, 1e-8);
    let mut p = vec![0.5, -1.5];
    let mut state = AdamState::new(2, alpha, b1, b2, eps);
    let mut oracle = [(0.5f64, 0.0f64, 0.0f64), (-1.5, 0.0, 0.0)];
    let mut worst: f64 = 0.0;
    for t in 1..=10 {
        let g = vec![4.0 * (p[0] - 3.0), p[1]];
        state.step(&mut [&mut p[..]], &[&g[..]]).map_err(|e| e.to_string())?;
        for (i, (w, m, v)) in oracle.iter_mut().enumerate() {
            let gi = if i == 0 { 4.0 * (*w - 3.0) } else { *w };
            *m = b1 * *m + (1.0 - b1) * gi;
            *v = b2 * *v + (1.0 - b2) * gi * gi;
            let mh = *m / (1.0 - b1.powi(t));
            let vh = *v / (1.0 - b2.powi(t));
            *w -= alpha * mh / (vh.sqrt() + eps);
            worst = worst.max((p[i] - *w).abs());
        }
    }
    check(worst <= 1e-12, format!("10 steps, max deviation {worst:.3e}"))
}

fn random_profile(r: &mut ChaCha8Rng, lang: &str) -> FeatureProfile {
    let alphabet = ['a', 'b', 'c', 'd', 'e', 'f'];
    let n = r.random_range(1..60);
    let entries: Vec<(String, f64)> = (0..n)
        .map(|_| {
            let len = r.random_range(2..4);
            let k: String = (0..len).map(|_| alphabet[rng::index(r, alphabet.len())]).collect();
            (k, r.random_range(0.0..1.0) / n as f64)
        })
        .collect();
    FeatureProfile::new(lang, ProfileKind::CharNgram, 0, entries)
}

fn metric_axioms() -> Outcome {
    let mut r = rng::seeded(606);
    let mut worst_triangle: f64 = 0.0;
    let mut asymmetric = 0;
    for _ in 0..1000 {
        let (a, b, c) = (random_profile(&mut r, "a"), random_profile(&mut r, "b"), random_profile(&mut r, "c"));
        let idx = align_features(&[a.clone(), b.clone(), c.clone()]).map_err(|e| e.to_string())?;
        let d = |x: &FeatureProfile, y: &FeatureProfile| manhattan(x, y, &idx).unwrap();
        if d(&a, &b) != d(&b, &a) || d(&a, &c) != d(&c, &a) || d(&b, &c) != d(&c, &b) {
            asymmetric += 1;
        }
        for (x, y, z) in [(&a, &b, &c), (&b, &c, &a), (&c, &a, &b)] {
            worst_triangle = worst_triangle.max(d(x, z) - d(x, y) - d(y, z));
        }
    }
    check(
        asymmetric == 0 && worst_triangle <= 1e-12,
        format!("1000 triples, {asymmetric} asymmetric, worst triangle excess {worst_triangle:.3e}"),
    )
}

fn upgma_oracle() -> Outcome {
    let mut r = rng::seeded(707);
    let mut mismatches = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let m = common::random_matrix(&mut r, 8);
        let tree = cluster::upgma(&m).map_err(|e| e.to_string())?;
        let expected = common::upgma_oracle(&m);
        for (merge, (left, right, h)) in tree.merges.iter().zip(&expected) {
            if tree.leaves_of(merge.left) != *left || tree.leaves_of(merge.right) != *right {
                mismatches += 1;
            }
            worst = worst.max((merge.height - h).abs());
        }
        if tree.merges.len() != expected.len() {
            mismatches += 1;
        }
    }
    check(mismatches == 0 && worst <= 1e-12, format!("50 matrices, {mismatches} pair mismatches, max height error {worst:.3e}"))
}

fn zscore_calibration() -> Outcome {
    // 142 labels give 10,011 pairwise distances. A constant shift keeps
    // every entry positive without changing z-scores.
    let n = 142;
    let mut r = rng::seeded(808);
    let normal = rand_distr::Normal::new(10.0, 1.0).unwrap();
    let upper: Vec<f64> = (0..n * (n - 1) / 2).map(|_| rand_distr::Distribution::sample(&normal, &mut r)).collect();
    let labels = (0..n).map(|i| format!("l{i:03}")).collect();
    let m = DistanceMatrix::from_upper(labels, MatrixKind::Overall, upper.clone()).map_err(|e| e.to_string())?;
    let g = zscore_filter(&m, DEFAULT_Z_THRESHOLD).map_err(|e| e.to_string())?;
    let fraction = g.edges.len() as f64 / upper.len() as f64;
    let expected = Normal::standard().cdf(-1.15035);
    check(
        (fraction - expected).abs() <= 0.01 && DEFAULT_Z_THRESHOLD == 1.15035,
        format!("{} distances, retained {fraction:.4} vs {expected:.4}, default threshold {DEFAULT_Z_THRESHOLD}", upper.len()),
    )
}

fn community_recovery() -> Outcome {
    let mut total = 0.0;
    for seed in 0..20u64 {
        let mut r = rng::seeded(900 + seed);
        let (g, truth) = common::planted_partition(&mut r, 4, 10, 0.9, 0.05);
        let found = detect_communities(&g, seed).communities.ok_or("no communities")?;
        total += common::adjusted_rand_index(&truth, &found);
    }
    let mean = total / 20.0;
    check(mean >= 0.9, format!("mean adjusted Rand index {mean:.4} over 20 seeds"))
}

fn probability_hygiene() -> Outcome {
    let mut r = rng::seeded(1010);
    let triples = common::x_free_triples();
    let mut worst: f64 = 0.0;
    let mut negatives = 0;
    let mut outputs = 0;
    let mut audit = |p: &[f64]| {
        outputs += 1;
        worst = worst.max((p.iter().sum::<f64>() - 1.0).abs());
        negatives += p.iter().filter(|&&v| v < 0.0 || v.is_nan()).count();
    };
    for _ in 0..10_000 {
        let inputs = r.random_range(1..40);
        let classes = r.random_range(2..8);
        let mut m = random_small_model(&mut r, inputs, classes);
        let scale = 10f64.powf(r.random_range(-2.0..3.0));
        for s in m.slices_mut() {
            for w in s.iter_mut() {
                *w *= scale;
            }
        }
        let x: Vec<f64> = (0..inputs).map(|_| if r.random_bool(0.3) { 0.0 } else { r.random_range(0.0..1.0) }).collect();
        audit(&forward(&m, &x).map_err(|e| e.to_string())?);

        let mut keys: Vec<String> = (0..inputs).map(|_| trigram_key(&triples[rng::index(&mut r, triples.len())])).collect();
        keys.sort();
        keys.dedup();
        let mut m = m;
        m.inputs = keys.len();
        m.w1.truncate(keys.len() * m.hidden);
        let trained = TrainedModel {
            label_names: (0..classes).map(|c| format!("c{c}")).collect(),
            feature_index: keys.clone(),
            model: m,
            hyperparameters: Hyperparameters::default(),
            seed: 0,
        };
        let known = glossotype::posgram::parse_trigram_key(&keys[rng::index(&mut r, keys.len())]).unwrap();
        let mut sentences = vec![PosSentence::new(known.to_vec()).unwrap()];
        for _ in 0..r.random_range(0..5) {
            let len = r.random_range(3..10);
            let tags: Vec<UposTag> = (0..len).map(|_| UposTag::ALL[rng::index(&mut r, UposTag::ALL.len())]).collect();
            sentences.push(PosSentence::new(tags).unwrap());
        }
        let ranked = trained.identify(&sentences).map_err(|e| e.to_string())?;
        let p: Vec<f64> = ranked.iter().map(|(_, p)| *p).collect();
        audit(&p);
    }
    check(
        worst <= 1e-9 && negatives == 0,
        format!("{outputs} outputs, max |sum - 1| {worst:.3e}, {negatives} negative or NaN entries"),
    )
}

fn fixture_config(corpus: &Path, out: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig {
        corpus_dir: corpus.to_path_buf(),
        output_dir: out.to_path_buf(),
        docs_per_lang: 40,
        sentences_per_doc: 20,
        folds: 5,
        ..PipelineConfig::default()
    };
    cfg.hyperparameters.epochs = 20;
    cfg
}

fn snapshot(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn full_pipeline(cfg: &PipelineConfig) -> glossotype::Result<()> {
    pipeline::run_profile(cfg)?;
    pipeline::run_compare(cfg)?;
    pipeline::run_train(cfg)?;
    pipeline::run_evaluate(cfg)?;
    Ok(())
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus = dir.path().join("corpus");
    common::write_family_corpus(&corpus, 3, 2, 400, 1111);
    let mut snaps = Vec::new();
    for run in ["a", "b"] {
        let cfg = fixture_config(&corpus, &dir.path().join(run));
        full_pipeline(&cfg).map_err(|e| e.to_string())?;
        snaps.push(snapshot(&cfg.output_dir));
    }
    let wanted = ["profiles/", "matrices/", "trees/", "graph/overall.dot", "model.json", "metrics/"];
    let covered = wanted.iter().all(|w| snaps[0].iter().any(|(p, _)| p.starts_with(w)));
    let differing: Vec<&str> = snaps[0]
        .iter()
        .zip(&snaps[1])
        .filter(|(a, b)| a != b)
        .map(|(a, _)| a.0.as_str())
        .collect();
    check(
        covered && differing.is_empty() && snaps[0].len() == snaps[1].len(),
        format!("{} files compared, differing {:?}", snaps[0].len(), differing),
    )
}

fn family_clustering() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus = dir.path().join("corpus");
    common::write_family_corpus(&corpus, 3, 3, 1000, 1212);
    let cfg = fixture_config(&corpus, &dir.path().join("out"));
    pipeline::run_profile(&cfg).map_err(|e| e.to_string())?;
    let out = pipeline::run_compare(&cfg).map_err(|e| e.to_string())?;
    let overall = out.overall.ok_or("no overall matrix")?;
    let tree = cluster::upgma(&overall).map_err(|e| e.to_string())?;
    let clades = tree.clades();
    let families: Vec<BTreeSet<String>> = (0..3).map(|f| (0..3).map(|m| format!("f{f}l{m}")).collect()).collect();
    let missing: Vec<usize> = (0..3).filter(|&f| !clades.contains(&families[f])).collect();
    let mut communities = out.graph.ok_or("no graph")?.community_sets();
    communities.sort();
    check(
        missing.is_empty() && communities == families,
        format!("families missing as clades {missing:?}, communities {communities:?}"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("synthetic 10-fold accuracy", synthetic_accuracy),
        ("English character n-grams", english_char_ngrams),
        ("English POS tri-grams", english_pos_trigrams),
        ("gradient check", gradient_check),
        ("Adam trace", adam_trace),
        ("metric axioms", metric_axioms),
        ("UPGMA oracle", upgma_oracle),
        ("z-filter calibration", zscore_calibration),
        ("community recovery", community_recovery),
        ("probability hygiene", probability_hygiene),
        ("determinism", determinism),
        ("family clustering", family_clustering),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let (status, detail) = match run() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{status} {:>2} {name}: {detail}", i + 1);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
