//! Threshold sweep: one graph build, one clustering per threshold, and the
//! validity indices for each clustering.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use crate::cluster::{cluster, ClusterSet};
use crate::embeddings::VectorCollection;
use crate::error::{Error, Result};
use crate::metrics::{evaluate_many, Distance, MetricReport};
use crate::numfmt::ser_sig9;
use crate::simgraph::build_graph;

/// The eight similarity thresholds of the reference evaluation.
pub const DEFAULT_THRESHOLDS: [f64; 8] = [0.5, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Strictly ascending, each in (-1, 1].
    pub thresholds: Vec<f64>,
    pub distance: Distance,
    /// Graph storage floor; `None` means the smallest threshold.
    pub min_weight_stored: Option<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { thresholds: DEFAULT_THRESHOLDS.to_vec(), distance: Distance::Euclidean, min_weight_stored: None }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thresholds.is_empty() {
            return Err(Error::config("no thresholds"));
        }
        if let Some(t) = self.thresholds.iter().find(|&&t| !(t > -1.0 && t <= 1.0)) {
            return Err(Error::config(format!("threshold {t} outside (-1, 1]")));
        }
        if self.thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("thresholds must be strictly ascending"));
        }
        if let Some(floor) = self.min_weight_stored {
            if !(-1.0..=1.0).contains(&floor) {
                return Err(Error::config(format!("storage floor {floor} outside [-1, 1]")));
            }
            if floor > self.thresholds[0] {
                return Err(Error::config(format!(
                    "storage floor {floor} above smallest threshold {}",
                    self.thresholds[0]
                )));
            }
        }
        Ok(())
    }

    pub fn floor(&self) -> f64 {
        self.min_weight_stored.unwrap_or(self.thresholds[0])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdReport {
    #[serde(serialize_with = "ser_sig9")]
    pub threshold: f64,
    pub cluster_count: usize,
    /// cluster size → number of clusters of that size
    pub size_distribution: BTreeMap<usize, usize>,
    /// Singleton clusters over all clusters.
    #[serde(serialize_with = "ser_sig9")]
    pub scr: f64,
    pub metrics: MetricReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Timing {
    #[serde(serialize_with = "ser_ms")]
    pub graph_build: Duration,
    #[serde(serialize_with = "ser_ms")]
    pub clustering: Duration,
    #[serde(serialize_with = "ser_ms")]
    pub metrics: Duration,
}

fn ser_ms<S: serde::Serializer>(d: &Duration, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_u128(d.as_millis())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub n: usize,
    pub dim: usize,
    #[serde(serialize_with = "ser_sig9")]
    pub min_weight_stored: f64,
    pub edge_count: usize,
    pub thresholds: Vec<ThresholdReport>,
    /// Wall-clock timings. Left out of JSON when `None` so reports stay
    /// byte-reproducible.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

pub fn size_distribution(clusters: &ClusterSet) -> BTreeMap<usize, usize> {
    let mut dist = BTreeMap::new();
    for size in clusters.sizes() {
        *dist.entry(size).or_insert(0) += 1;
    }
    dist
}

/// Singleton cluster ratio of a size distribution.
pub fn singleton_ratio(dist: &BTreeMap<usize, usize>) -> f64 {
    let total: usize = dist.values().sum();
    if total == 0 {
        return 0.0;
    }
    dist.get(&1).copied().unwrap_or(0) as f64 / total as f64
}

pub fn run_sweep(vectors: &VectorCollection, cfg: &SweepConfig) -> Result<SweepReport> {
    run_sweep_with_clusters(vectors, cfg).map(|(report, _)| report)
}

/// Runs the sweep and also returns the clustering at each threshold.
pub fn run_sweep_with_clusters(
    vectors: &VectorCollection,
    cfg: &SweepConfig,
) -> Result<(SweepReport, Vec<ClusterSet>)> {
    cfg.validate()?;
    if vectors.is_empty() {
        return Err(Error::config("sweep needs at least one vector"));
    }

    let started = Instant::now();
    let graph = build_graph(vectors, cfg.floor())?;
    let graph_build = started.elapsed();

    let started = Instant::now();
    let clusterings: Vec<ClusterSet> = cfg
        .thresholds
        .par_iter()
        .map(|&t| cluster(&graph, t))
        .collect::<Result<_>>()?;
    let clustering = started.elapsed();

    let started = Instant::now();
    let metrics = evaluate_many(vectors, &clusterings, cfg.distance)?;
    let metrics_time = started.elapsed();

    let thresholds = clusterings
        .iter()
        .zip(metrics)
        .map(|(cs, metrics)| {
            let size_distribution = size_distribution(cs);
            ThresholdReport {
                threshold: cs.threshold(),
                cluster_count: cs.len(),
                scr: singleton_ratio(&size_distribution),
                size_distribution,
                metrics,
            }
        })
        .collect();

    let report = SweepReport {
        n: vectors.len(),
        dim: vectors.dim(),
        min_weight_stored: graph.min_weight_stored(),
        edge_count: graph.edge_count(),
        thresholds,
        timing: Some(Timing { graph_build, clustering, metrics: metrics_time }),
    };
    Ok((report, clusterings))
}
