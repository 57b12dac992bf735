//! Fixtures and oracles shared by the integration tests.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::Path;

use glossotype::corpus::{PosSentence, UposTag};
use glossotype::distance::DistanceMatrix;
use glossotype::rng::{self, ChaCha8Rng};
use rand::Rng;
use rand_distr::{Distribution, Gamma};

/// The 16 tags other than X.
pub fn x_free_tags() -> Vec<UposTag> {
    UposTag::ALL.iter().copied().filter(|t| *t != UposTag::X).collect()
}

/// All 4096 X-free tag triples in a fixed order.
pub fn x_free_triples() -> Vec<[UposTag; 3]> {
    let tags = x_free_tags();
    let mut out = Vec::with_capacity(4096);
    for &a in &tags {
        for &b in &tags {
            for &c in &tags {
                out.push([a, b, c]);
            }
        }
    }
    out
}

/// Symmetric Dirichlet draw via normalized gamma variates.
pub fn dirichlet(rng: &mut ChaCha8Rng, alpha: f64, k: usize) -> Vec<f64> {
    let g = Gamma::new(alpha, 1.0).unwrap();
    loop {
        let x: Vec<f64> = (0..k).map(|_| g.sample(rng)).collect();
        let s: f64 = x.iter().sum();
        if s > 0.0 {
            return x.into_iter().map(|v| v / s).collect();
        }
    }
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0
}

/// Index drawn from a discrete distribution through its running sum.
pub fn draw(rng: &mut ChaCha8Rng, cdf: &[f64]) -> usize {
    let u: f64 = rng.random::<f64>() * cdf[cdf.len() - 1];
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

pub fn cdf(p: &[f64]) -> Vec<f64> {
    p.iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect()
}

/// Triple distributions, one per language, resampled until every pair is
/// at least `min_tv` apart in total variation.
pub fn distinct_triple_distributions(rng: &mut ChaCha8Rng, langs: usize, alpha: f64, min_tv: f64) -> Vec<Vec<f64>> {
    loop {
        let d: Vec<Vec<f64>> = (0..langs).map(|_| dirichlet(rng, alpha, 4096)).collect();
        let ok = (0..langs).all(|i| (i + 1..langs).all(|j| total_variation(&d[i], &d[j]) >= min_tv));
        if ok {
            return d;
        }
    }
}

/// Three-tag sentences, one sampled triple each.
pub fn triple_sentences(rng: &mut ChaCha8Rng, dist: &[f64], n: usize) -> Vec<PosSentence> {
    let triples = x_free_triples();
    let c = cdf(dist);
    (0..n)
        .map(|_| PosSentence::new(triples[draw(rng, &c)].to_vec()).unwrap())
        .collect()
}

pub fn conllu(sentences: &[PosSentence]) -> String {
    let mut out = String::new();
    for (s, sent) in sentences.iter().enumerate() {
        let _ = writeln!(out, "# sent_id = {}", s + 1);
        for (i, t) in sent.tags.iter().enumerate() {
            let _ = writeln!(out, "{}\tw{}\t_\t{}\t_\t_\t_\t_\t_\t_", i + 1, i, t);
        }
        out.push('\n');
    }
    out
}

/// Raw sentences from a first-order character chain over `alphabet`.
pub fn chain_sentences(rng: &mut ChaCha8Rng, alphabet: &[char], transitions: &[Vec<f64>], n: usize) -> Vec<String> {
    let cdfs: Vec<Vec<f64>> = transitions.iter().map(|r| cdf(r)).collect();
    (0..n)
        .map(|_| {
            let words = rng.random_range(4..9);
            (0..words)
                .map(|_| {
                    let len = rng.random_range(3..8);
                    let mut state = rng::index(rng, alphabet.len());
                    let mut w = String::new();
                    for _ in 0..len {
                        w.push(alphabet[state]);
                        state = draw(rng, &cdfs[state]);
                    }
                    w
                })
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}

fn mix(a: &[f64], b: &[f64], w: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| w * x + (1.0 - w) * y).collect()
}

/// Writes a corpus tree of `families × per_family` languages named
/// `f{family}l{member}`. Languages of one family share most of their
/// character chain and tag-triple distribution.
pub fn write_family_corpus(dir: &Path, families: usize, per_family: usize, sentences: usize, seed: u64) {
    let alphabet: Vec<char> = "abcdefghijklmnop".chars().collect();
    let k = alphabet.len();
    let mut r = rng::seeded(seed);
    for f in 0..families {
        let base_chain: Vec<Vec<f64>> = (0..k).map(|_| dirichlet(&mut r, 0.3, k)).collect();
        let base_triples = dirichlet(&mut r, 0.05, 4096);
        for m in 0..per_family {
            let chain: Vec<Vec<f64>> = base_chain
                .iter()
                .map(|row| mix(row, &dirichlet(&mut r, 0.3, k), 0.85))
                .collect();
            let triples = mix(&base_triples, &dirichlet(&mut r, 0.05, 4096), 0.85);
            let lang = dir.join(format!("f{f}l{m}"));
            std::fs::create_dir_all(&lang).unwrap();
            let raw = chain_sentences(&mut r, &alphabet, &chain, sentences).join("\n") + "\n";
            std::fs::write(lang.join("raw.txt"), raw).unwrap();
            std::fs::write(lang.join("tagged.conllu"), conllu(&triple_sentences(&mut r, &triples, sentences))).unwrap();
        }
    }
}

/// Writes tagged-only languages `s0..` with distinct triple distributions.
pub fn write_separable_tagged(dir: &Path, langs: usize, sentences: usize, seed: u64) {
    let mut r = rng::seeded(seed);
    let dists = distinct_triple_distributions(&mut r, langs, 0.05, 0.3);
    for (i, d) in dists.iter().enumerate() {
        let lang = dir.join(format!("s{i}"));
        std::fs::create_dir_all(&lang).unwrap();
        std::fs::write(lang.join("tagged.conllu"), conllu(&triple_sentences(&mut r, d, sentences))).unwrap();
    }
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0f64; kb]; ka];
    for i in 0..n {
        table[a[i]][b[i]] += 1.0;
    }
    let pairs = |x: f64| x * (x - 1.0) / 2.0;
    let index: f64 = table.iter().flatten().map(|&x| pairs(x)).sum();
    let rows: f64 = table.iter().map(|r| pairs(r.iter().sum())).sum();
    let cols: f64 = (0..kb).map(|j| pairs(table.iter().map(|r| r[j]).sum())).sum();
    let expected = rows * cols / pairs(n as f64);
    let max = (rows + cols) / 2.0;
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

/// Average-linkage merges recomputed from the original matrix at every
/// step. Each merge lists the sorted leaf indices of both sides and the
/// height; the side holding the smaller label comes first.
pub fn upgma_oracle(m: &DistanceMatrix) -> Vec<(Vec<usize>, Vec<usize>, f64)> {
    let mut clusters: Vec<Vec<usize>> = (0..m.len()).map(|i| vec![i]).collect();
    let min_label = |c: &Vec<usize>| c.iter().map(|&i| m.labels[i].clone()).min().unwrap();
    let mut out = Vec::new();
    while clusters.len() > 1 {
        let mut best: Option<(f64, (String, String), usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let mut s = 0.0;
                for &i in &clusters[a] {
                    for &j in &clusters[b] {
                        s += m.get(i, j);
                    }
                }
                let d = s / (clusters[a].len() * clusters[b].len()) as f64;
                let (x, y) = (min_label(&clusters[a]), min_label(&clusters[b]));
                let pair = if x <= y { (x, y) } else { (y, x) };
                if best.as_ref().is_none_or(|(bd, bp, _, _)| d < *bd || (d == *bd && pair < *bp)) {
                    best = Some((d, pair, a, b));
                }
            }
        }
        let (d, _, a, b) = best.unwrap();
        let cb = clusters.remove(b);
        let ca = clusters[a].clone();
        let (mut l, mut r) = if min_label(&ca) <= min_label(&cb) { (ca, cb.clone()) } else { (cb.clone(), ca) };
        l.sort();
        r.sort();
        out.push((l, r, d / 2.0));
        clusters[a].extend(cb);
    }
    out
}

pub fn random_matrix(r: &mut ChaCha8Rng, n: usize) -> DistanceMatrix {
    let upper: Vec<f64> = (0..n * (n - 1) / 2).map(|_| r.random_range(0.0..10.0)).collect();
    let labels = (0..n).map(|i| format!("l{i}")).collect();
    DistanceMatrix::from_upper(labels, glossotype::distance::MatrixKind::Overall, upper).unwrap()
}

/// Planted-partition graph: `blocks × size` nodes, edge probability
/// `p_in` inside a block and `p_out` across blocks.
pub fn planted_partition(r: &mut ChaCha8Rng, blocks: usize, size: usize, p_in: f64, p_out: f64) -> (glossotype::cluster::SimilarityGraph, Vec<usize>) {
    let n = blocks * size;
    let truth: Vec<usize> = (0..n).map(|i| i / size).collect();
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let p = if truth[a] == truth[b] { p_in } else { p_out };
            if r.random_bool(p) {
                edges.push(glossotype::cluster::Edge { a, b, z: -2.0 });
            }
        }
    }
    let nodes = (0..n).map(|i| format!("n{i}")).collect();
    (glossotype::cluster::SimilarityGraph { nodes, edges, communities: None }, truth)
}

/// Path to the bundled English data.
pub fn english_dir() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join("en")
}
