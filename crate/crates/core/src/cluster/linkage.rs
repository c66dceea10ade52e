use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

use super::embed::cosine_distance;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Linkage {
    #[default]
    Average,
    Complete,
    Single,
}

/// One agglomeration step. Clusters are named by their smallest member index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    /// Size of the merged cluster.
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    /// Cluster id per input row; ids are numbered by first appearance.
    pub labels: Vec<usize>,
    pub n_clusters: usize,
    /// Full merge sequence down to one cluster.
    pub merges: Vec<Merge>,
    /// Number of leading merges applied under the threshold.
    pub applied: usize,
    pub threshold: f64,
    pub linkage: Linkage,
    /// Indices of merges whose height is below the previous one.
    pub inversions: Vec<usize>,
}

impl ClusterAssignment {
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_clusters];
        for (i, &c) in self.labels.iter().enumerate() {
            out[c].push(i);
        }
        out
    }
}

fn key(d: f64, a: usize, b: usize) -> (f64, usize, usize) {
    (d, a.min(b), a.max(b))
}

/// Heights closer than this are ties; cosine round-off on parallel vectors
/// is of order 1e-16.
const TIE_EPS: f64 = 1e-12;

fn less(x: (f64, usize, usize), y: (f64, usize, usize)) -> bool {
    x.0 < y.0 - TIE_EPS || ((x.0 - y.0).abs() <= TIE_EPS && (x.1, x.2) < (y.1, y.2))
}

/// Agglomerative clustering under cosine distance.
///
/// At each step the closest pair of clusters merges; heights equal up to
/// round-off go to the lexicographically smallest `(i, j)` of cluster names. Merging stops at the
/// first merge whose height exceeds `threshold`; the remaining merges are
/// still computed for the dendrogram.
pub fn agglomerative_cluster(vectors: &Matrix<f64>, threshold: f64, linkage: Linkage) -> Result<ClusterAssignment> {
    if !(0.0..=2.0).contains(&threshold) {
        return Err(Error::invalid(format!("threshold {threshold} outside [0, 2]")));
    }
    let n = vectors.rows;
    if n == 0 {
        return Err(Error::invalid("clustering needs at least one vector"));
    }
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = cosine_distance(vectors.row(i), vectors.row(j));
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let mut active = vec![true; n];
    let mut size = vec![1usize; n];
    let nearest = |a: usize, active: &[bool], dist: &[f64]| -> Option<(f64, usize, usize)> {
        let mut best: Option<(f64, usize, usize)> = None;
        for b in 0..n {
            if b != a && active[b] {
                let k = key(dist[a * n + b], a, b);
                if best.is_none_or(|x| less(k, x)) {
                    best = Some(k);
                }
            }
        }
        best
    };
    let mut nn: Vec<Option<(f64, usize, usize)>> = (0..n).map(|a| nearest(a, &active, &dist)).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for _ in 1..n {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..n {
            if active[a] {
                if let Some(k) = nn[a] {
                    if best.is_none_or(|x| less(k, x)) {
                        best = Some(k);
                    }
                }
            }
        }
        let (height, s, t) = best.expect("at least two active clusters");
        let (ns, nt) = (size[s] as f64, size[t] as f64);
        active[t] = false;
        for k in 0..n {
            if !active[k] || k == s {
                continue;
            }
            let (dsk, dtk) = (dist[s * n + k], dist[t * n + k]);
            let d = match linkage {
                Linkage::Average => (ns * dsk + nt * dtk) / (ns + nt),
                Linkage::Complete => dsk.max(dtk),
                Linkage::Single => dsk.min(dtk),
            };
            dist[s * n + k] = d;
            dist[k * n + s] = d;
        }
        size[s] += size[t];
        merges.push(Merge { left: s, right: t, height, size: size[s] });
        nn[t] = None;
        nn[s] = nearest(s, &active, &dist);
        for k in 0..n {
            if !active[k] || k == s {
                continue;
            }
            match nn[k] {
                Some((_, a, b)) if a == s || b == s || a == t || b == t => nn[k] = nearest(k, &active, &dist),
                Some(cur) => {
                    let cand = key(dist[k * n + s], k, s);
                    if less(cand, cur) {
                        nn[k] = Some(cand);
                    }
                }
                None => nn[k] = nearest(k, &active, &dist),
            }
        }
    }
    let applied = merges.iter().position(|m| m.height > threshold).unwrap_or(merges.len());
    let inversions: Vec<usize> = (1..merges.len()).filter(|&i| merges[i].height < merges[i - 1].height).collect();
    if !inversions.is_empty() {
        log::warn!("dendrogram has {} height inversion(s)", inversions.len());
    }
    // replay the applied merges with union-find on cluster names
    let mut parent: Vec<usize> = (0..n).collect();
    for m in &merges[..applied] {
        parent[m.right] = m.left;
    }
    let find = |mut x: usize| {
        while parent[x] != x {
            x = parent[x];
        }
        x
    };
    let mut ids: BTreeMap<usize, usize> = BTreeMap::new();
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let root = find(i);
        let next = ids.len();
        labels.push(*ids.entry(root).or_insert(next));
    }
    Ok(ClusterAssignment { labels, n_clusters: ids.len(), merges, applied, threshold, linkage, inversions })
}

/// Medoid label per cluster: the member with the smallest summed cosine
/// distance to the others; ties go to the shorter, then smaller, string.
pub fn label_clusters(assignment: &ClusterAssignment, vectors: &Matrix<f64>, intents: &[String]) -> Result<Vec<String>> {
    if intents.len() != assignment.labels.len() || vectors.rows != intents.len() {
        return Err(Error::DimensionMismatch { expected: assignment.labels.len(), got: intents.len() });
    }
    Ok(assignment
        .members()
        .iter()
        .map(|members| {
            let mut best: Option<(f64, &String)> = None;
            for &i in members {
                let total: f64 = members.iter().map(|&j| cosine_distance(vectors.row(i), vectors.row(j))).sum();
                let cand = &intents[i];
                let better = match best {
                    None => true,
                    Some((bt, bs)) => total < bt || (total == bt && (cand.len(), cand) < (bs.len(), bs)),
                };
                if better {
                    best = Some((total, cand));
                }
            }
            best.map(|(_, s)| s.clone()).unwrap_or_default()
        })
        .collect())
}

/// Writes `intent,cluster_id,representative` rows in input order.
pub fn write_cluster_csv(path: &Path, intents: &[String], assignment: &ClusterAssignment, labels: &[String]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
    w.write_record(["intent", "cluster_id", "representative"])?;
    for (intent, &c) in intents.iter().zip(&assignment.labels) {
        w.write_record([intent.as_str(), &c.to_string(), labels[c].as_str()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
