use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::NodeKind;
use crate::napast::{NapAst, NodeLabel};

pub const FEATURE_RECIPE: &str = "kind_histogram+log_nodes+log_edges+name_fraction+label_fraction";
pub const DEFAULT_K: usize = 5;
pub const MAX_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    pub feature_recipe: String,
    pub assignments: BTreeMap<String, usize>,
    pub inertia_curve: Vec<(usize, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

impl ClusterModel {
    /// Index of the centroid nearest to a graph.
    pub fn assign(&self, nap: &NapAst) -> usize {
        nearest(&graph_features(nap), &self.centroids).0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("cluster model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: ClusterModel = serde_json::from_str(text).map_err(|e| Error::json("cluster model", e))?;
        let dim = feature_dimension();
        if m.feature_recipe != FEATURE_RECIPE || m.centroids.iter().any(|c| c.len() != dim) {
            return Err(Error::Config("cluster model uses a different feature recipe".into()));
        }
        Ok(m)
    }
}

pub fn feature_dimension() -> usize {
    NodeKind::count() + 4
}

/// Graph-level descriptor used for clustering.
pub fn graph_features(nap: &NapAst) -> Vec<f64> {
    let mut v = vec![0.0; feature_dimension()];
    let n = nap.len().max(1) as f64;
    for node in &nap.nodes {
        v[node.kind.index()] += 1.0 / n;
    }
    let k = NodeKind::count();
    let edges: usize = nap.edge_sets.values().map(|e| e.len()).sum();
    v[k] = (1.0 + nap.len() as f64).ln();
    v[k + 1] = (1.0 + edges as f64).ln();
    v[k + 2] = nap.nodes.iter().filter(|x| x.kind == NodeKind::NameNode).count() as f64 / n;
    v[k + 3] = nap.label_vector.iter().filter(|l| **l != NodeLabel::Unlabeled).count() as f64 / n;
    v
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(x: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = dist2(x, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Adds k-means++ seeds to `centroids` until there are `k`.
fn seed_plus_plus(points: &[Vec<f64>], centroids: &mut Vec<Vec<f64>>, k: usize, rng: &mut ChaCha8Rng) {
    if centroids.is_empty() {
        centroids.push(points[rng.gen_range(0..points.len())].clone());
    }
    while centroids.len() < k {
        let d: Vec<f64> = points.iter().map(|p| nearest(p, centroids).1).collect();
        let total: f64 = d.iter().sum();
        let pick = if total <= 0.0 {
            rng.gen_range(0..points.len())
        } else {
            let mut r = rng.gen::<f64>() * total;
            let mut chosen = d.len() - 1;
            for (i, w) in d.iter().enumerate() {
                if r < *w {
                    chosen = i;
                    break;
                }
                r -= w;
            }
            chosen
        };
        centroids.push(points[pick].clone());
    }
}

/// Lloyd iterations from the given centroids; returns (assignment, inertia).
fn lloyd(points: &[Vec<f64>], centroids: &mut [Vec<f64>]) -> (Vec<usize>, f64) {
    let dim = points[0].len();
    let mut assign: Vec<usize> = points.iter().map(|p| nearest(p, centroids).0).collect();
    for _ in 0..MAX_ITERATIONS {
        let mut sums = vec![vec![0.0; dim]; centroids.len()];
        let mut counts = vec![0usize; centroids.len()];
        for (p, &a) in points.iter().zip(&assign) {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(p) {
                *s += x;
            }
        }
        for (c, (s, n)) in centroids.iter_mut().zip(sums.into_iter().zip(counts)) {
            if n > 0 {
                *c = s.into_iter().map(|v| v / n as f64).collect();
            }
        }
        let next: Vec<usize> = points.iter().map(|p| nearest(p, centroids).0).collect();
        if next == assign {
            break;
        }
        assign = next;
    }
    let inertia = points.iter().zip(&assign).map(|(p, &a)| dist2(p, &centroids[a])).sum();
    (assign, inertia)
}

/// Index into `curve` of the elbow, or `None` when the curve is flat.
pub fn elbow(curve: &[(usize, f64)]) -> Option<usize> {
    if curve.len() < 3 {
        return None;
    }
    let scale = curve[0].1.abs().max(f64::MIN_POSITIVE);
    let mut best: Option<(usize, f64)> = None;
    for i in 1..curve.len() - 1 {
        let second = curve[i - 1].1 - 2.0 * curve[i].1 + curve[i + 1].1;
        if second / scale > 1e-9 && best.map_or(true, |(_, b)| second > b) {
            best = Some((i, second));
        }
    }
    best.map(|(i, _)| i)
}

/// Seeded k-means over graph descriptors with elbow selection of k.
pub fn cluster_graphs(corpus: &[NapAst], k_range: &[usize], seed: u64) -> Result<ClusterModel> {
    let mut ks: Vec<usize> = k_range.to_vec();
    ks.sort_unstable();
    ks.dedup();
    let max_k = *ks.last().ok_or_else(|| Error::Config("empty k range".into()))?;
    if ks[0] == 0 {
        return Err(Error::Config("k must be positive".into()));
    }
    if corpus.len() < max_k {
        return Err(Error::Config(format!("{} graphs cannot form {max_k} clusters", corpus.len())));
    }
    let points: Vec<Vec<f64>> = corpus.iter().map(graph_features).collect();
    if points.iter().all(|p| p == &points[0]) {
        return Err(Error::DegenerateFeatures);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids: Vec<Vec<f64>> = Vec::new();
    let mut runs: Vec<(usize, Vec<Vec<f64>>, Vec<usize>, f64)> = Vec::new();
    for &k in &ks {
        // warm start from the previous k keeps the inertia curve monotone
        let mut c = centroids.clone();
        seed_plus_plus(&points, &mut c, k, &mut rng);
        let (assign, inertia) = lloyd(&points, &mut c);
        centroids = c.clone();
        runs.push((k, c, assign, inertia));
    }
    let curve: Vec<(usize, f64)> = runs.iter().map(|r| (r.0, r.3)).collect();
    let chosen = match elbow(&curve) {
        Some(i) => i,
        None if ks.len() == 1 => 0,
        None => ks.iter().position(|&k| k == DEFAULT_K).unwrap_or(0),
    };
    let (k, centroids, assign, _) = runs.swap_remove(chosen);
    let assignments = corpus.iter().zip(assign).map(|(g, a)| (g.class_id.clone(), a)).collect();
    Ok(ClusterModel {
        k,
        centroids,
        feature_recipe: FEATURE_RECIPE.to_string(),
        assignments,
        inertia_curve: curve,
        provenance: None,
    })
}

pub fn cluster_csv(model: &ClusterModel) -> String {
    let mut out = String::from("class_id,cluster\n");
    for (c, a) in &model.assignments {
        out.push_str(&format!("{c},{a}\n"));
    }
    out
}
