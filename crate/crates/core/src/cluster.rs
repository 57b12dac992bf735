//! Similarity trees and z-score filtered similarity graphs.
//!
//! Communities are found with asynchronous label propagation rather than
//! Infomap; the partition is only used descriptively.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::distance::DistanceMatrix;
use crate::error::{Error, Result};
use crate::rng;

/// Default retention threshold: pairs whose distance lies this many sample
/// standard deviations below the mean are kept.
pub const DEFAULT_Z_THRESHOLD: f64 = 1.15035;

/// Sweep limit for label propagation.
pub const MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    #[default]
    Average,
    Single,
    Complete,
}

impl std::str::FromStr for Linkage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "average" | "upgma" => Ok(Linkage::Average),
            "single" => Ok(Linkage::Single),
            "complete" => Ok(Linkage::Complete),
            _ => Err(Error::InvalidArgument(format!("unknown linkage {s:?}"))),
        }
    }
}

/// One agglomeration step. Node ids below the leaf count are leaves; the
/// node created by merge `k` has id `leaf_count + k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    pub labels: Vec<String>,
    pub merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn leaf_count(&self) -> usize {
        self.labels.len()
    }

    pub fn root(&self) -> usize {
        self.leaf_count() + self.merges.len() - 1
    }

    pub fn height(&self, node: usize) -> f64 {
        if node < self.leaf_count() {
            0.0
        } else {
            self.merges[node - self.leaf_count()].height
        }
    }

    fn children(&self, node: usize) -> Option<(usize, usize)> {
        let n = self.leaf_count();
        (node >= n).then(|| {
            let m = self.merges[node - n];
            (m.left, m.right)
        })
    }

    /// Leaf indices under `node`, ascending.
    pub fn leaves_of(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            match self.children(x) {
                Some((l, r)) => stack.extend([l, r]),
                None => out.push(x),
            }
        }
        out.sort_unstable();
        out
    }

    /// Label sets of every internal node, in merge order.
    pub fn clades(&self) -> Vec<BTreeSet<String>> {
        let n = self.leaf_count();
        (0..self.merges.len())
            .map(|k| {
                self.leaves_of(n + k)
                    .into_iter()
                    .map(|i| self.labels[i].clone())
                    .collect()
            })
            .collect()
    }

    pub fn to_newick(&self) -> String {
        let mut out = String::new();
        self.write_node(self.root(), None, &mut out);
        out.push(';');
        out
    }

    fn write_node(&self, node: usize, parent_height: Option<f64>, out: &mut String) {
        match self.children(node) {
            Some((l, r)) => {
                let h = self.height(node);
                out.push('(');
                self.write_node(l, Some(h), out);
                out.push(',');
                self.write_node(r, Some(h), out);
                out.push(')');
            }
            None => out.push_str(&newick_label(&self.labels[node])),
        }
        if let Some(p) = parent_height {
            let _ = write!(out, ":{}", p - self.height(node));
        }
    }
}

/// Quotes a label when it contains Newick punctuation or whitespace.
fn newick_label(label: &str) -> String {
    let plain = !label.is_empty()
        && !label
            .chars()
            .any(|c| c.is_whitespace() || "()[]':;,".contains(c));
    if plain {
        label.to_string()
    } else {
        format!("'{}'", label.replace('\'', "''"))
    }
}

/// Agglomerative clustering with the given linkage. The closest pair of
/// clusters merges first; exact ties go to the pair whose smallest labels
/// sort first. Merge height is half the linkage distance.
pub fn cluster(matrix: &DistanceMatrix, linkage: Linkage) -> Result<Dendrogram> {
    let n = matrix.len();
    if n < 2 {
        return Err(Error::TooFewLabels { needed: 2, got: n });
    }
    // active clusters: (node id, size, smallest label)
    let mut active: Vec<(usize, usize, &str)> = (0..n)
        .map(|i| (i, 1, matrix.labels[i].as_str()))
        .collect();
    let mut dist: Vec<Vec<f64>> = (0..n).map(|i| matrix.row(i).to_vec()).collect();
    let mut merges = Vec::with_capacity(n - 1);

    while active.len() > 1 {
        let mut best: Option<(f64, (&str, &str), usize, usize)> = None;
        for a in 0..active.len() {
            for b in a + 1..active.len() {
                let d = dist[a][b];
                let (la, lb) = (active[a].2, active[b].2);
                let pair = if la <= lb { (la, lb) } else { (lb, la) };
                let better = match &best {
                    None => true,
                    Some((bd, bp, _, _)) => d < *bd || (d == *bd && pair < *bp),
                };
                if better {
                    best = Some((d, pair, a, b));
                }
            }
        }
        let (d, _, a, b) = best.expect("at least two clusters");
        let (ia, sa, la) = active[a];
        let (ib, sb, lb) = active[b];
        let (left, right) = if la <= lb { (ia, ib) } else { (ib, ia) };
        merges.push(Merge {
            left,
            right,
            height: d / 2.0,
        });

        let merged: Vec<f64> = (0..active.len())
            .map(|c| match linkage {
                Linkage::Average => {
                    (sa as f64 * dist[a][c] + sb as f64 * dist[b][c]) / (sa + sb) as f64
                }
                Linkage::Single => dist[a][c].min(dist[b][c]),
                Linkage::Complete => dist[a][c].max(dist[b][c]),
            })
            .collect();
        // a < b: the new cluster takes slot a, slot b is removed
        for c in 0..active.len() {
            dist[a][c] = merged[c];
            dist[c][a] = merged[c];
        }
        dist[a][a] = 0.0;
        dist.remove(b);
        for row in &mut dist {
            row.remove(b);
        }
        active[a] = (n + merges.len() - 1, sa + sb, la.min(lb));
        active.remove(b);
    }
    Ok(Dendrogram {
        labels: matrix.labels.clone(),
        merges,
    })
}

/// Average-linkage clustering.
pub fn upgma(matrix: &DistanceMatrix) -> Result<Dendrogram> {
    cluster(matrix, Linkage::Average)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    pub nodes: Vec<String>,
    pub edges: Vec<Edge>,
    /// Community id per node once detected.
    pub communities: Option<Vec<usize>>,
}

/// Mean and sample standard deviation of a slice.
pub fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Keeps the pairs whose distance z-score is at most `-z_threshold`, that
/// is, pairs markedly closer than the average pair.
pub fn zscore_filter(matrix: &DistanceMatrix, z_threshold: f64) -> Result<SimilarityGraph> {
    let n = matrix.len();
    if n < 3 {
        return Err(Error::TooFewLabels { needed: 3, got: n });
    }
    let upper = matrix.upper_triangle();
    if upper.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("distance matrix".into()));
    }
    let (mean, sd) = mean_and_sd(&upper);
    if !(sd > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let z = (matrix.get(a, b) - mean) / sd;
            if z <= -z_threshold {
                edges.push(Edge { a, b, z });
            }
        }
    }
    Ok(SimilarityGraph {
        nodes: matrix.labels.clone(),
        edges,
        communities: None,
    })
}

impl SimilarityGraph {
    /// A graph with nodes and no edges.
    pub fn empty(nodes: Vec<String>) -> Self {
        SimilarityGraph {
            nodes,
            edges: Vec::new(),
            communities: None,
        }
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            if e.a != e.b {
                adj[e.a].push(e.b);
                adj[e.b].push(e.a);
            }
        }
        adj
    }

    pub fn community_count(&self) -> usize {
        self.communities
            .as_ref()
            .map_or(0, |c| c.iter().copied().collect::<BTreeSet<_>>().len())
    }

    /// Node label sets of each community, ordered by community id.
    pub fn community_sets(&self) -> Vec<BTreeSet<String>> {
        let mut sets: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();
        if let Some(c) = &self.communities {
            for (i, id) in c.iter().enumerate() {
                sets.entry(*id).or_default().insert(self.nodes[i].clone());
            }
        }
        sets.into_values().collect()
    }

    /// Graphviz source. Node colors follow community ids; edge weight is
    /// the magnitude of the z-score (graphviz rejects negative weights) and
    /// the signed value is kept in a `zscore` attribute. Edges joining two
    /// communities are drawn red.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph similarity {\n  node [colorscheme=set312, style=filled];\n");
        for (i, name) in self.nodes.iter().enumerate() {
            let _ = write!(out, "  {}", dot_id(name));
            match &self.communities {
                Some(c) => {
                    let _ = writeln!(out, " [color={}, community={}];", c[i] % 12 + 1, c[i]);
                }
                None => out.push_str(";\n"),
            }
        }
        for e in &self.edges {
            let _ = write!(
                out,
                "  {} -- {} [weight={}, zscore={}",
                dot_id(&self.nodes[e.a]),
                dot_id(&self.nodes[e.b]),
                e.z.abs(),
                e.z
            );
            if let Some(c) = &self.communities {
                if c[e.a] != c[e.b] {
                    out.push_str(", color=red");
                }
            }
            out.push_str("];\n");
        }
        out.push_str("}\n");
        out
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct JsonEdge<'a> {
            source: &'a str,
            target: &'a str,
            zscore: f64,
        }
        #[derive(Serialize)]
        struct JsonGraph<'a> {
            nodes: &'a [String],
            edges: Vec<JsonEdge<'a>>,
            communities: Option<BTreeMap<&'a str, usize>>,
        }
        let g = JsonGraph {
            nodes: &self.nodes,
            edges: self
                .edges
                .iter()
                .map(|e| JsonEdge {
                    source: &self.nodes[e.a],
                    target: &self.nodes[e.b],
                    zscore: e.z,
                })
                .collect(),
            communities: self.communities.as_ref().map(|c| {
                self.nodes
                    .iter()
                    .map(String::as_str)
                    .zip(c.iter().copied())
                    .collect()
            }),
        };
        serde_json::to_string_pretty(&g).expect("graph serializes") + "\n"
    }
}

fn dot_id(name: &str) -> String {
    format!("\"{}\"", name.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Asynchronous label propagation. Every node starts in its own community;
/// each sweep visits nodes in a seeded random order and moves each to the
/// label most common among its neighbours. A node whose label is already
/// among the most common keeps it; otherwise ties are broken by the seeded
/// generator. Breaking ties toward the smallest label instead lets a single
/// low label invade neighbouring blocks before they settle. Stops at a
/// fixed point or after [`MAX_SWEEPS`] sweeps. Ids are renumbered by first
/// appearance in node order.
pub fn detect_communities(graph: &SimilarityGraph, seed: u64) -> SimilarityGraph {
    let n = graph.nodes.len();
    let adj = graph.adjacency();
    let mut rng = rng::seeded(seed);
    let mut labels: Vec<usize> = (0..n).collect();
    let mut order: Vec<usize> = (0..n).collect();
    let mut counts = vec![0usize; n];
    for _ in 0..MAX_SWEEPS {
        rng::shuffle(&mut rng, &mut order);
        let mut changed = false;
        for &v in &order {
            if adj[v].is_empty() {
                continue;
            }
            for &u in &adj[v] {
                counts[labels[u]] += 1;
            }
            let top = adj[v].iter().map(|&u| counts[labels[u]]).max().unwrap_or(0);
            let mut tied: Vec<usize> = adj[v]
                .iter()
                .map(|&u| labels[u])
                .filter(|&l| counts[l] == top)
                .collect();
            tied.sort_unstable();
            tied.dedup();
            for &u in &adj[v] {
                counts[labels[u]] = 0;
            }
            // a node already holding a winning label keeps it
            let best = if tied.contains(&labels[v]) {
                labels[v]
            } else {
                tied[rng::index(&mut rng, tied.len())]
            };
            if best != labels[v] {
                labels[v] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut renumber = BTreeMap::new();
    let mut next = 0;
    let communities = labels
        .iter()
        .map(|l| {
            *renumber.entry(*l).or_insert_with(|| {
                next += 1;
                next - 1
            })
        })
        .collect();
    SimilarityGraph {
        communities: Some(communities),
        ..graph.clone()
    }
}
