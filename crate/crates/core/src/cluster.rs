//! Threshold clustering: connected components of the similarity graph
//! restricted to edges with weight `>= threshold`.

use std::cmp::Reverse;
use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::embeddings::VectorCollection;
use crate::error::{Error, Result};
use crate::numfmt::ser_sig9;
use crate::simgraph::{cosine_similarity, SimilarityGraph};

/// A partition of question ids at one threshold.
///
/// Always canonical: members ascending, clusters ordered by descending
/// size and then by smallest member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawClusterSet")]
pub struct ClusterSet {
    #[serde(serialize_with = "ser_sig9")]
    threshold: f64,
    clusters: Vec<Vec<u64>>,
}

#[derive(Deserialize)]
struct RawClusterSet {
    threshold: f64,
    clusters: Vec<Vec<u64>>,
}

impl TryFrom<RawClusterSet> for ClusterSet {
    type Error = Error;

    fn try_from(raw: RawClusterSet) -> Result<Self> {
        ClusterSet::new(raw.threshold, raw.clusters)
    }
}

impl ClusterSet {
    /// Validates that `clusters` are non-empty and pairwise disjoint, then
    /// puts them in canonical order.
    pub fn new(threshold: f64, mut clusters: Vec<Vec<u64>>) -> Result<Self> {
        check_threshold(threshold)?;
        let mut seen = HashMap::new();
        for (i, c) in clusters.iter_mut().enumerate() {
            if c.is_empty() {
                return Err(Error::config("empty cluster"));
            }
            c.sort_unstable();
            for &id in c.iter() {
                if seen.insert(id, i).is_some() {
                    return Err(Error::DuplicateId(id));
                }
            }
        }
        clusters.sort_by_key(|c| (Reverse(c.len()), c[0]));
        Ok(ClusterSet { threshold, clusters })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn clusters(&self) -> &[Vec<u64>] {
        &self.clusters
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// Total number of ids across all clusters.
    pub fn point_count(&self) -> usize {
        self.clusters.iter().map(Vec::len).sum()
    }

    pub fn sizes(&self) -> impl Iterator<Item = usize> + '_ {
        self.clusters.iter().map(Vec::len)
    }

    pub fn cluster_index_map(&self) -> HashMap<u64, usize> {
        let mut map = HashMap::with_capacity(self.point_count());
        for (i, c) in self.clusters.iter().enumerate() {
            for &id in c {
                map.insert(id, i);
            }
        }
        map
    }

    /// Cluster index of every vector in `vectors`, by position. Fails unless
    /// the partition covers exactly the collection's ids.
    pub fn labels(&self, vectors: &VectorCollection) -> Result<Vec<u32>> {
        let mut labels = vec![u32::MAX; vectors.len()];
        for (i, c) in self.clusters.iter().enumerate() {
            for &id in c {
                let pos = vectors.position(id).ok_or_else(|| {
                    Error::PartitionMismatch(format!("id {id} has no vector"))
                })?;
                labels[pos] = i as u32;
            }
        }
        if let Some(pos) = labels.iter().position(|&l| l == u32::MAX) {
            return Err(Error::PartitionMismatch(format!(
                "id {} is in no cluster",
                vectors.id(pos)
            )));
        }
        Ok(labels)
    }

    /// True when every cluster of `self` lies inside one cluster of
    /// `coarser` and both cover the same ids.
    pub fn refines(&self, coarser: &ClusterSet) -> bool {
        let outer = coarser.cluster_index_map();
        if outer.len() != self.point_count() {
            return false;
        }
        self.clusters.iter().all(|c| {
            let first = outer.get(&c[0]);
            first.is_some() && c.iter().all(|id| outer.get(id) == first)
        })
    }
}

fn check_threshold(t: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&t) {
        return Err(Error::config(format!("threshold {t} outside [-1, 1]")));
    }
    Ok(())
}

/// Clusters `graph` at `threshold`.
///
/// Vertices are visited in index order; each unvisited vertex seeds a
/// breadth-first search that follows only edges of weight `>= threshold`.
/// Every search yields one cluster, so isolated vertices become singletons.
pub fn cluster(graph: &SimilarityGraph, threshold: f64) -> Result<ClusterSet> {
    check_threshold(threshold)?;
    if threshold < graph.min_weight_stored() {
        return Err(Error::GraphFloorTooHigh { threshold, floor: graph.min_weight_stored() });
    }
    let n = graph.len();
    let ids = graph.vertex_ids();
    let mut visited = vec![false; n];
    let mut queue = VecDeque::new();
    let mut clusters = Vec::new();

    for start in 0..n {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        queue.push_back(start);
        let mut members = vec![ids[start]];
        while let Some(s) = queue.pop_front() {
            for (p, w) in graph.neighbors(s) {
                if !visited[p] && w >= threshold {
                    visited[p] = true;
                    queue.push_back(p);
                    members.push(ids[p]);
                }
            }
        }
        clusters.push(members);
    }
    ClusterSet::new(threshold, clusters)
}

/// Finds the cluster of the stored vector most similar to `query`.
///
/// Returns `None` when no vector reaches `threshold`. Equal similarities
/// resolve to the smaller question id.
pub fn assign_to_cluster(
    clusters: &ClusterSet,
    vectors: &VectorCollection,
    query: &[f32],
    threshold: f64,
) -> Result<Option<usize>> {
    if query.len() != vectors.dim() {
        return Err(Error::DimensionMismatch { expected: vectors.dim(), found: query.len() });
    }
    let mut best: Option<(f64, u64)> = None;
    for (id, v) in vectors.iter() {
        let s = cosine_similarity(query, v)?;
        let better = match best {
            None => true,
            Some((bs, bid)) => s > bs || (s == bs && id < bid),
        };
        if better {
            best = Some((s, id));
        }
    }
    match best {
        Some((s, id)) if s >= threshold => clusters
            .clusters
            .iter()
            .position(|c| c.binary_search(&id).is_ok())
            .map(Some)
            .ok_or(Error::UnknownId(id)),
        _ => Ok(None),
    }
}
