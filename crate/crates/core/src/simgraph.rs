//! Cosine-similarity graph over a vector collection.
//!
//! Only pairs at or above a storage floor are kept, in compressed sparse
//! row form with both directions present. Weights are `f64` and each one
//! comes from a single dot product summed in ascending coordinate order, so
//! the graph does not depend on how rows are scheduled across workers.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::embeddings::VectorCollection;
use crate::error::{Error, Result};
use crate::numfmt::ser_sig9;

/// Largest collection [`dense_similarities`] will materialize.
pub const DENSE_MAX: usize = 2000;

/// Tolerance when checking that a weight lies in [-1, 1].
const WEIGHT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    vertex_ids: Vec<u64>,
    min_weight_stored: f64,
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
    weights: Vec<f64>,
}

impl SimilarityGraph {
    /// Builds a graph from an explicit edge list. Each undirected pair may
    /// appear once, in either orientation.
    pub fn from_edges<I>(vertex_ids: Vec<u64>, min_weight_stored: f64, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = Edge>,
    {
        check_floor(min_weight_stored)?;
        let n = vertex_ids.len();
        if n > u32::MAX as usize {
            return Err(Error::config("too many vertices"));
        }
        let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
        for Edge { u, v, w } in edges {
            let (u, v) = if u < v { (u, v) } else { (v, u) };
            if u == v {
                return Err(Error::config(format!("self-loop on vertex {u}")));
            }
            if v >= n {
                return Err(Error::config(format!("edge endpoint {v} out of range")));
            }
            if !(w >= -1.0 - WEIGHT_EPS && w <= 1.0 + WEIGHT_EPS) {
                return Err(Error::config(format!("edge weight {w} outside [-1, 1]")));
            }
            if w < min_weight_stored {
                return Err(Error::config(format!(
                    "edge weight {w} below stored floor {min_weight_stored}"
                )));
            }
            rows[u].push((v as u32, w));
        }
        for (u, row) in rows.iter_mut().enumerate() {
            row.sort_by_key(|&(v, _)| v);
            if row.windows(2).any(|p| p[0].0 == p[1].0) {
                return Err(Error::config(format!("duplicate edge at vertex {u}")));
            }
        }
        Ok(Self::from_upper_rows(vertex_ids, min_weight_stored, rows))
    }

    /// `rows[u]` holds `(v, w)` with `v > u`, ascending in `v`.
    fn from_upper_rows(vertex_ids: Vec<u64>, min_weight_stored: f64, rows: Vec<Vec<(u32, f64)>>) -> Self {
        let n = vertex_ids.len();
        let mut degree = vec![0usize; n];
        for (u, row) in rows.iter().enumerate() {
            degree[u] += row.len();
            for &(v, _) in row {
                degree[v as usize] += 1;
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let total = *offsets.last().unwrap();
        let mut neighbors = vec![0u32; total];
        let mut weights = vec![0f64; total];
        let mut cursor = offsets[..n].to_vec();
        // Rows are visited in ascending u, so every adjacency list comes out
        // sorted: lower neighbors arrive first, then the row's own entries.
        for (u, row) in rows.into_iter().enumerate() {
            for (v, w) in row {
                let v = v as usize;
                neighbors[cursor[u]] = v as u32;
                weights[cursor[u]] = w;
                cursor[u] += 1;
                neighbors[cursor[v]] = u as u32;
                weights[cursor[v]] = w;
                cursor[v] += 1;
            }
        }
        SimilarityGraph { vertex_ids, min_weight_stored, offsets, neighbors, weights }
    }

    pub fn len(&self) -> usize {
        self.vertex_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertex_ids.is_empty()
    }

    /// Question ids, in vertex order.
    pub fn vertex_ids(&self) -> &[u64] {
        &self.vertex_ids
    }

    pub fn min_weight_stored(&self) -> f64 {
        self.min_weight_stored
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    /// Neighbors of `u` with edge weights, ascending by neighbor index.
    pub fn neighbors(&self, u: usize) -> impl ExactSizeIterator<Item = (usize, f64)> + '_ {
        let range = self.offsets[u]..self.offsets[u + 1];
        self.neighbors[range.clone()]
            .iter()
            .map(|&v| v as usize)
            .zip(self.weights[range].iter().copied())
    }

    /// Stored weight between two vertices, in either order.
    pub fn weight(&self, u: usize, v: usize) -> Option<f64> {
        let range = self.offsets[u]..self.offsets[u + 1];
        let row = &self.neighbors[range.clone()];
        row.binary_search(&(v as u32)).ok().map(|i| self.weights[range.start + i])
    }

    /// Every stored edge once, with `u < v`, sorted by `(u, v)`.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        (0..self.len()).flat_map(move |u| {
            self.neighbors(u).filter(move |&(v, _)| v > u).map(move |(v, w)| Edge { u, v, w })
        })
    }
}

fn check_floor(floor: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&floor) {
        return Err(Error::config(format!("storage floor {floor} outside [-1, 1]")));
    }
    Ok(())
}

/// Dot product in f64, summed in ascending coordinate order.
#[inline(always)]
pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        acc += f64::from(x) * f64::from(y);
    }
    acc
}

/// `dot / sqrt(|a|² |b|²)`; exact 1 for identical inputs.
fn cosine_from_parts(dot: f64, sq_norm_a: f64, sq_norm_b: f64) -> f64 {
    (dot / (sq_norm_a * sq_norm_b).sqrt()).clamp(-1.0, 1.0)
}

/// Cosine of the angle between `a` and `b`, clamped to [-1, 1].
pub fn cosine_similarity(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    let (na, nb) = (dot(a, a), dot(b, b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(cosine_from_parts(dot(a, b), na, nb))
}

pub(crate) const LANES: usize = 8;

/// Rows regrouped in blocks of `LANES`, coordinate-major inside a block, so
/// one load yields the same coordinate of every row in the block.
pub(crate) struct Interleaved {
    dim: usize,
    pub(crate) full_blocks: usize,
    data: Vec<f32>,
}

impl Interleaved {
    pub(crate) fn new(vectors: &VectorCollection) -> Self {
        let dim = vectors.dim();
        let full_blocks = vectors.len() / LANES;
        let mut data = vec![0.0f32; full_blocks * dim * LANES];
        for (b, block) in data.chunks_exact_mut(dim * LANES).enumerate() {
            for l in 0..LANES {
                for (k, &x) in vectors.vector(b * LANES + l).iter().enumerate() {
                    block[k * LANES + l] = x;
                }
            }
        }
        Interleaved { dim, full_blocks, data }
    }

    pub(crate) fn block(&self, b: usize) -> &[f32] {
        &self.data[b * self.dim * LANES..(b + 1) * self.dim * LANES]
    }
}

/// Dot products of `a` against the rows of one block. Each lane keeps its
/// own ascending-order accumulator, so every result equals [`dot`] exactly.
#[inline(always)]
pub(crate) fn dot_block(a: &[f32], block: &[f32]) -> [f64; LANES] {
    let mut acc = [0.0f64; LANES];
    for (&x, col) in a.iter().zip(block.chunks_exact(LANES)) {
        let x = f64::from(x);
        for l in 0..LANES {
            acc[l] += x * f64::from(col[l]);
        }
    }
    acc
}

fn upper_row(vectors: &VectorCollection, blocks: &Interleaved, sq_norms: &[f64], u: usize, floor: f64) -> Vec<(u32, f64)> {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") {
        // SAFETY: the feature was detected at runtime.
        return unsafe { upper_row_avx2(vectors, blocks, sq_norms, u, floor) };
    }
    upper_row_generic(vectors, blocks, sq_norms, u, floor)
}

// Same operations in the same order, only wider registers; no FMA, so
// results are bit-identical to the generic path.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn upper_row_avx2(
    vectors: &VectorCollection,
    blocks: &Interleaved,
    sq_norms: &[f64],
    u: usize,
    floor: f64,
) -> Vec<(u32, f64)> {
    upper_row_generic(vectors, blocks, sq_norms, u, floor)
}

#[inline(always)]
fn upper_row_generic(
    vectors: &VectorCollection,
    blocks: &Interleaved,
    sq_norms: &[f64],
    u: usize,
    floor: f64,
) -> Vec<(u32, f64)> {
    let n = vectors.len();
    let a = vectors.vector(u);
    let mut out = Vec::new();
    let mut push = |v: usize, d: f64| {
        let w = cosine_from_parts(d, sq_norms[u], sq_norms[v]);
        if w >= floor {
            out.push((v as u32, w));
        }
    };
    // scalar up to the next block boundary, whole blocks, then the ragged tail
    let first_block = (u + 1).div_ceil(LANES);
    let head_end = (first_block * LANES).min(n);
    for v in u + 1..head_end {
        push(v, dot(a, vectors.vector(v)));
    }
    for b in first_block..blocks.full_blocks {
        for (l, d) in dot_block(a, blocks.block(b)).into_iter().enumerate() {
            push(b * LANES + l, d);
        }
    }
    for v in head_end.max(blocks.full_blocks * LANES)..n {
        push(v, dot(a, vectors.vector(v)));
    }
    out
}

/// Builds the similarity graph holding every pair with cosine similarity at
/// least `min_weight_stored`.
///
/// Rows are processed in parallel on the current rayon pool; the result is
/// identical for any pool size.
pub fn build_graph(vectors: &VectorCollection, min_weight_stored: f64) -> Result<SimilarityGraph> {
    check_floor(min_weight_stored)?;
    if vectors.is_empty() {
        return Err(Error::config("cannot build a graph from an empty collection"));
    }
    if vectors.len() > u32::MAX as usize {
        return Err(Error::config("too many vectors"));
    }
    let sq_norms: Vec<f64> = (0..vectors.len()).map(|i| dot(vectors.vector(i), vectors.vector(i))).collect();
    if sq_norms.iter().any(|&x| x == 0.0) {
        return Err(Error::ZeroNorm);
    }
    let blocks = Interleaved::new(vectors);
    let rows: Vec<Vec<(u32, f64)>> = (0..vectors.len())
        .into_par_iter()
        .with_min_len(4)
        .map(|u| upper_row(vectors, &blocks, &sq_norms, u, min_weight_stored))
        .collect();
    Ok(SimilarityGraph::from_upper_rows(vectors.ids().to_vec(), min_weight_stored, rows))
}

/// Full n × n cosine matrix, row-major, for small collections.
pub fn dense_similarities(vectors: &VectorCollection) -> Result<Vec<f64>> {
    let n = vectors.len();
    if n > DENSE_MAX {
        return Err(Error::config(format!("dense mode supports at most {DENSE_MAX} vectors, got {n}")));
    }
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
        for j in i + 1..n {
            let w = cosine_similarity(vectors.vector(i), vectors.vector(j))?;
            m[i * n + j] = w;
            m[j * n + i] = w;
        }
    }
    Ok(m)
}

#[derive(Serialize)]
struct EdgeRecord {
    u: u64,
    v: u64,
    #[serde(serialize_with = "ser_sig9")]
    w: f64,
}

/// Writes `edges.jsonl`: one `{"u":id,"v":id,"w":weight}` per stored edge.
pub fn write_edges_jsonl<W: Write>(graph: &SimilarityGraph, sink: W) -> Result<()> {
    let mut out = std::io::BufWriter::new(sink);
    for e in graph.edges() {
        let rec = EdgeRecord { u: graph.vertex_ids[e.u], v: graph.vertex_ids[e.v], w: e.w };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn collection(rows: &[&[f32]]) -> VectorCollection {
        let mut c = VectorCollection::new(rows[0].len()).unwrap();
        for (i, r) in rows.iter().enumerate() {
            c.push(i as u64 + 1, r).unwrap();
        }
        c
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_similarity(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let w = cosine_similarity(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((w - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[-2.0, 0.0]).unwrap(), -1.0);
    }

    #[test]
    fn cosine_errors() {
        assert!(matches!(cosine_similarity(&[1.0], &[1.0, 0.0]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::ZeroNorm)));
    }

    #[test]
    fn identical_vectors_form_a_triangle() {
        let g = build_graph(&collection(&[&[1.0, 2.0], &[1.0, 2.0], &[1.0, 2.0]]), 0.5).unwrap();
        let edges: Vec<_> = g.edges().collect();
        assert_eq!(edges.len(), 3);
        assert!(edges.iter().all(|e| e.w == 1.0 && e.u < e.v));
    }

    #[test]
    fn pairs_below_floor_are_dropped() {
        // cos = 0.3 exactly in f64 terms is not needed; anything < 0.5 works
        let c = collection(&[&[1.0, 0.0], &[0.3, 0.953_939_2]]);
        let sim = cosine_similarity(c.vector(0), c.vector(1)).unwrap();
        assert!((sim - 0.3).abs() < 1e-6);
        assert_eq!(build_graph(&c, 0.5).unwrap().edge_count(), 0);
        assert_eq!(build_graph(&c, 0.2).unwrap().edge_count(), 1);
    }

    #[test]
    fn adjacency_is_symmetric_and_sorted() {
        let rows: Vec<Vec<f32>> = (0..23).map(|i| vec![1.0, (i % 5) as f32 * 0.1, (i % 3) as f32]).collect();
        let refs: Vec<&[f32]> = rows.iter().map(Vec::as_slice).collect();
        let g = build_graph(&collection(&refs), -1.0).unwrap();
        assert_eq!(g.edge_count(), 23 * 22 / 2);
        for u in 0..g.len() {
            let ns: Vec<usize> = g.neighbors(u).map(|(v, _)| v).collect();
            assert!(ns.windows(2).all(|p| p[0] < p[1]));
            for (v, w) in g.neighbors(u) {
                assert_eq!(g.weight(v, u), Some(w));
            }
        }
    }

    #[test]
    fn from_edges_validation() {
        let ids = vec![1, 2, 3];
        let e = |u, v, w| Edge { u, v, w };
        assert!(SimilarityGraph::from_edges(ids.clone(), 0.0, [e(0, 0, 0.5)]).is_err());
        assert!(SimilarityGraph::from_edges(ids.clone(), 0.0, [e(0, 5, 0.5)]).is_err());
        assert!(SimilarityGraph::from_edges(ids.clone(), 0.0, [e(0, 1, 1.5)]).is_err());
        assert!(SimilarityGraph::from_edges(ids.clone(), 0.6, [e(0, 1, 0.5)]).is_err());
        assert!(SimilarityGraph::from_edges(ids.clone(), 0.0, [e(0, 1, 0.5), e(1, 0, 0.5)]).is_err());
        assert!(SimilarityGraph::from_edges(ids.clone(), 1.5, []).is_err());
        let g = SimilarityGraph::from_edges(ids, 0.0, [e(2, 0, 0.5), e(0, 1, 0.7)]).unwrap();
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![e(0, 1, 0.7), e(0, 2, 0.5)]);
    }

    #[test]
    fn dense_matches_sparse_at_full_floor() {
        let rows: Vec<Vec<f32>> = (0..12).map(|i| vec![(i as f32).sin(), (i as f32).cos(), 0.5]).collect();
        let refs: Vec<&[f32]> = rows.iter().map(Vec::as_slice).collect();
        let c = collection(&refs);
        let dense = dense_similarities(&c).unwrap();
        let g = build_graph(&c, -1.0).unwrap();
        for e in g.edges() {
            assert_eq!(dense[e.u * 12 + e.v].to_bits(), e.w.to_bits());
        }
    }

    #[test]
    fn edges_jsonl_format() {
        let g = build_graph(&collection(&[&[1.0, 0.0], &[1.0, 1.0]]), 0.0).unwrap();
        let mut buf = Vec::new();
        write_edges_jsonl(&g, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "{\"u\":1,\"v\":2,\"w\":0.707106781}\n");
    }

    #[test]
    fn empty_collection_is_rejected() {
        let c = VectorCollection::new(2).unwrap();
        assert!(build_graph(&c, 0.5).is_err());
    }
}
