//! Internal cluster-validity indices: silhouette, Calinski-Harabasz and
//! Davies-Bouldin.
//!
//! An index that cannot be computed for a partition is reported as
//! [`MetricValue::Undefined`] with a reason, never as NaN.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use crate::cluster::ClusterSet;
use crate::embeddings::VectorCollection;
use crate::error::{Error, Result};
use crate::numfmt::round_sig9;
use crate::simgraph::{dot, dot_block, Interleaved, LANES};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distance {
    #[default]
    Euclidean,
    /// `1 - cosine similarity`; used by the silhouette only.
    CosineDistance,
}

impl FromStr for Distance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Distance::Euclidean),
            "cosine" | "cosine_distance" => Ok(Distance::CosineDistance),
            other => Err(Error::config(format!("unknown distance {other:?}"))),
        }
    }
}

impl fmt::Display for Distance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Distance::Euclidean => "euclidean",
            Distance::CosineDistance => "cosine_distance",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MetricValue {
    Defined(f64),
    Undefined(String),
}

impl MetricValue {
    fn undefined(reason: &str) -> Self {
        MetricValue::Undefined(reason.to_string())
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            MetricValue::Defined(v) => Some(*v),
            MetricValue::Undefined(_) => None,
        }
    }

    pub fn is_defined(&self) -> bool {
        matches!(self, MetricValue::Defined(_))
    }
}

impl Serialize for MetricValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            MetricValue::Defined(v) => s.serialize_f64(round_sig9(*v)),
            MetricValue::Undefined(reason) => {
                let mut map = s.serialize_map(Some(1))?;
                map.serialize_entry("undefined", reason)?;
                map.end()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub distance: Distance,
    pub silhouette: MetricValue,
    pub calinski_harabasz: MetricValue,
    pub davies_bouldin: MetricValue,
}

const NEEDS_TWO: &str = "needs >= 2 clusters";

/// Cluster labels by vector position plus per-cluster sizes.
struct Labeling {
    labels: Vec<u32>,
    sizes: Vec<usize>,
}

impl Labeling {
    fn new(partition: &ClusterSet, vectors: &VectorCollection) -> Result<Self> {
        let labels = partition.labels(vectors)?;
        let sizes = partition.sizes().collect();
        Ok(Labeling { labels, sizes })
    }

    fn k(&self) -> usize {
        self.sizes.len()
    }
}

fn sq_dist_mixed(a: &[f32], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| (f64::from(x) - y).powi(2)).sum()
}

fn sq_dist_f64(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let (ca, ra) = a.split_at(a.len() - a.len() % 4);
    let (cb, rb) = b.split_at(ca.len());
    for (x, y) in ca.chunks_exact(4).zip(cb.chunks_exact(4)) {
        for l in 0..4 {
            let d = x[l] - y[l];
            acc[l] += d * d;
        }
    }
    let mut tail = 0.0;
    for (&x, &y) in ra.iter().zip(rb) {
        tail += (x - y) * (x - y);
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Squared Euclidean distance summed in ascending coordinate order.
#[inline(always)]
fn sq_dist_seq(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        let d = f64::from(x) - f64::from(y);
        acc += d * d;
    }
    acc
}

/// [`sq_dist_seq`] against every row of one interleaved block.
#[inline(always)]
fn sq_dist_block(a: &[f32], block: &[f32]) -> [f64; LANES] {
    let mut acc = [0.0f64; LANES];
    for (&x, col) in a.iter().zip(block.chunks_exact(LANES)) {
        let x = f64::from(x);
        for l in 0..LANES {
            let d = x - f64::from(col[l]);
            acc[l] += d * d;
        }
    }
    acc
}

struct RowContext<'a> {
    vectors: &'a VectorCollection,
    blocks: Interleaved,
    sq_norms: Vec<f64>,
    distance: Distance,
}

impl<'a> RowContext<'a> {
    fn new(vectors: &'a VectorCollection, distance: Distance) -> Self {
        let sq_norms = match distance {
            Distance::CosineDistance => vectors.iter().map(|(_, v)| dot(v, v)).collect(),
            Distance::Euclidean => Vec::new(),
        };
        RowContext { vectors, blocks: Interleaved::new(vectors), sq_norms, distance }
    }

    /// Distances from point `i` to every point.
    fn row(&self, i: usize, out: &mut [f64]) {
        #[cfg(target_arch = "x86_64")]
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: the feature was detected at runtime.
            return unsafe { self.row_avx2(i, out) };
        }
        self.row_generic(i, out)
    }

    // Wider registers only; no FMA, so results match the generic path bit for bit.
    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2")]
    unsafe fn row_avx2(&self, i: usize, out: &mut [f64]) {
        self.row_generic(i, out)
    }

    #[inline(always)]
    fn row_generic(&self, i: usize, out: &mut [f64]) {
        let a = self.vectors.vector(i);
        let cos = |d: f64, j: usize| 1.0 - (d / (self.sq_norms[i] * self.sq_norms[j]).sqrt()).clamp(-1.0, 1.0);
        for b in 0..self.blocks.full_blocks {
            let block = self.blocks.block(b);
            let dst = &mut out[b * LANES..(b + 1) * LANES];
            match self.distance {
                Distance::Euclidean => {
                    for (o, d) in dst.iter_mut().zip(sq_dist_block(a, block)) {
                        *o = d.sqrt();
                    }
                }
                Distance::CosineDistance => {
                    for (l, (o, d)) in dst.iter_mut().zip(dot_block(a, block)).enumerate() {
                        *o = cos(d, b * LANES + l);
                    }
                }
            }
        }
        for (j, o) in out.iter_mut().enumerate().skip(self.blocks.full_blocks * LANES) {
            let b = self.vectors.vector(j);
            *o = match self.distance {
                Distance::Euclidean => sq_dist_seq(a, b).sqrt(),
                Distance::CosineDistance => cos(dot(a, b), j),
            };
        }
        out[i] = 0.0;
    }
}

/// Mean silhouette width.
///
/// Points in singleton clusters score 0. Needs at least two clusters.
pub fn silhouette(vectors: &VectorCollection, partition: &ClusterSet, distance: Distance) -> Result<MetricValue> {
    let labeling = Labeling::new(partition, vectors)?;
    Ok(silhouette_batch(vectors, &[labeling], distance).pop().unwrap())
}

/// Silhouettes for several partitions of the same vectors. Each pairwise
/// distance is computed once per row and shared by every partition.
fn silhouette_batch(vectors: &VectorCollection, parts: &[Labeling], distance: Distance) -> Vec<MetricValue> {
    let n = vectors.len();
    let mut out: Vec<Option<MetricValue>> = parts
        .iter()
        .map(|p| (p.k() < 2).then(|| MetricValue::undefined(NEEDS_TWO)))
        .collect();
    for (slot, p) in out.iter_mut().zip(parts) {
        if slot.is_none() && p.k() == n {
            log::warn!("silhouette: every cluster is a singleton, reporting 0");
            *slot = Some(MetricValue::Defined(0.0));
        }
    }
    let active: Vec<usize> = (0..parts.len()).filter(|&t| out[t].is_none()).collect();
    if active.is_empty() {
        return out.into_iter().map(Option::unwrap).collect();
    }

    let ctx = RowContext::new(vectors, distance);
    let max_k = active.iter().map(|&t| parts[t].k()).max().unwrap();

    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .with_min_len(8)
        .map_init(
            || (vec![0.0f64; n], vec![0.0f64; max_k]),
            |(dist, sums), i| {
                let mut s = vec![0.0; active.len()];
                let needs_row = active.iter().any(|&t| {
                    let p = &parts[t];
                    p.sizes[p.labels[i] as usize] > 1
                });
                if !needs_row {
                    return s;
                }
                ctx.row(i, dist);
                for (slot, &t) in s.iter_mut().zip(&active) {
                    let p = &parts[t];
                    let own = p.labels[i] as usize;
                    if p.sizes[own] == 1 {
                        continue;
                    }
                    let sums = &mut sums[..p.k()];
                    sums.fill(0.0);
                    for (&l, &d) in p.labels.iter().zip(dist.iter()) {
                        sums[l as usize] += d;
                    }
                    let a_i = sums[own] / (p.sizes[own] - 1) as f64;
                    let b_i = sums
                        .iter()
                        .zip(&p.sizes)
                        .enumerate()
                        .filter(|&(c, _)| c != own)
                        .map(|(_, (&sum, &size))| sum / size as f64)
                        .fold(f64::INFINITY, f64::min);
                    let m = a_i.max(b_i);
                    *slot = if m > 0.0 { (b_i - a_i) / m } else { 0.0 };
                }
                s
            },
        )
        .collect();

    for (col, &t) in active.iter().enumerate() {
        let total: f64 = rows.iter().map(|r| r[col]).sum();
        out[t] = Some(MetricValue::Defined(total / n as f64));
    }
    out.into_iter().map(Option::unwrap).collect()
}

/// Per-cluster centroids, flattened `k × dim`, in f64.
fn centroids(vectors: &VectorCollection, p: &Labeling) -> Vec<f64> {
    let dim = vectors.dim();
    let mut c = vec![0.0f64; p.k() * dim];
    for (i, &l) in p.labels.iter().enumerate() {
        let row = &mut c[l as usize * dim..(l as usize + 1) * dim];
        for (acc, &x) in row.iter_mut().zip(vectors.vector(i)) {
            *acc += f64::from(x);
        }
    }
    for (row, &size) in c.chunks_exact_mut(dim).zip(&p.sizes) {
        for x in row {
            *x /= size as f64;
        }
    }
    c
}

/// Calinski-Harabasz variance ratio, Euclidean.
pub fn calinski_harabasz(vectors: &VectorCollection, partition: &ClusterSet) -> Result<MetricValue> {
    let p = Labeling::new(partition, vectors)?;
    Ok(calinski_harabasz_labels(vectors, &p))
}

fn calinski_harabasz_labels(vectors: &VectorCollection, p: &Labeling) -> MetricValue {
    let (n, k, dim) = (vectors.len(), p.k(), vectors.dim());
    if k < 2 {
        return MetricValue::undefined(NEEDS_TWO);
    }
    if n <= k {
        return MetricValue::undefined("needs more points than clusters");
    }
    let cents = centroids(vectors, p);
    let mut mean = vec![0.0f64; dim];
    for (_, v) in vectors.iter() {
        for (m, &x) in mean.iter_mut().zip(v) {
            *m += f64::from(x);
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let between: f64 = cents
        .chunks_exact(dim)
        .zip(&p.sizes)
        .map(|(c, &size)| size as f64 * sq_dist_f64(c, &mean))
        .sum();
    let within: f64 = (0..n)
        .map(|i| {
            let l = p.labels[i] as usize;
            sq_dist_mixed(vectors.vector(i), &cents[l * dim..(l + 1) * dim])
        })
        .sum();
    if within == 0.0 {
        return MetricValue::undefined("zero within-cluster dispersion");
    }
    MetricValue::Defined((between / (k - 1) as f64) / (within / (n - k) as f64))
}

/// Davies-Bouldin index, Euclidean.
pub fn davies_bouldin(vectors: &VectorCollection, partition: &ClusterSet) -> Result<MetricValue> {
    let p = Labeling::new(partition, vectors)?;
    Ok(davies_bouldin_labels(vectors, &p))
}

fn davies_bouldin_labels(vectors: &VectorCollection, p: &Labeling) -> MetricValue {
    let (k, dim) = (p.k(), vectors.dim());
    if k < 2 {
        return MetricValue::undefined(NEEDS_TWO);
    }
    let cents = centroids(vectors, p);
    let mut spread = vec![0.0f64; k];
    for (i, &l) in p.labels.iter().enumerate() {
        let l = l as usize;
        spread[l] += sq_dist_mixed(vectors.vector(i), &cents[l * dim..(l + 1) * dim]).sqrt();
    }
    for (s, &size) in spread.iter_mut().zip(&p.sizes) {
        *s /= size as f64;
    }

    // Each unordered pair once; per-worker row maxima merge exactly. Ratios
    // are never negative and a pair with zero total spread has ratio 0, so
    // such pairs (every singleton-singleton pair) are skipped.
    let fresh = || (vec![0.0f64; k], false);
    let (worst, coincident) = (0..k)
        .into_par_iter()
        .with_min_len(64)
        .fold(fresh, |(mut worst, mut coincident), i| {
            let ci = &cents[i * dim..(i + 1) * dim];
            for j in i + 1..k {
                let num = spread[i] + spread[j];
                if num == 0.0 {
                    continue;
                }
                let sep = sq_dist_f64(ci, &cents[j * dim..(j + 1) * dim]).sqrt();
                let r = if sep > 0.0 {
                    num / sep
                } else {
                    coincident = true;
                    continue;
                };
                worst[i] = worst[i].max(r);
                worst[j] = worst[j].max(r);
            }
            (worst, coincident)
        })
        .reduce(fresh, |(mut a, ca), (b, cb)| {
            for (x, y) in a.iter_mut().zip(&b) {
                *x = x.max(*y);
            }
            (a, ca || cb)
        });
    if coincident {
        return MetricValue::undefined("coincident centroids");
    }
    let total: f64 = worst.iter().sum();
    MetricValue::Defined(total / k as f64)
}

/// All three indices for one partition.
pub fn evaluate(vectors: &VectorCollection, partition: &ClusterSet, distance: Distance) -> Result<MetricReport> {
    Ok(evaluate_many(vectors, std::slice::from_ref(partition), distance)?.pop().unwrap())
}

/// All three indices for several partitions of the same vectors.
pub fn evaluate_many(
    vectors: &VectorCollection,
    partitions: &[ClusterSet],
    distance: Distance,
) -> Result<Vec<MetricReport>> {
    let parts = partitions
        .iter()
        .map(|p| Labeling::new(p, vectors))
        .collect::<Result<Vec<_>>>()?;
    let silhouettes = silhouette_batch(vectors, &parts, distance);
    Ok(parts
        .iter()
        .zip(silhouettes)
        .map(|(p, silhouette)| MetricReport {
            distance,
            silhouette,
            calinski_harabasz: calinski_harabasz_labels(vectors, p),
            davies_bouldin: davies_bouldin_labels(vectors, p),
        })
        .collect())
}
