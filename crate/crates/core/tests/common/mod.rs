//! Independent reference implementations and fixture generators shared by
//! the integration tests. Nothing here calls into the code paths it checks.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use qaclust::VectorCollection;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type Partition = BTreeSet<BTreeSet<u64>>;

pub fn as_partition(clusters: &[Vec<u64>]) -> Partition {
    clusters.iter().map(|c| c.iter().copied().collect()).collect()
}

pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect(), size: vec![1; n] }
    }

    pub fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut x = x;
        while self.parent[x] != root {
            let next = self.parent[x];
            self.parent[x] = root;
            x = next;
        }
        root
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
    }
}

/// Components of the edges with `w >= threshold`, as sets of `ids`.
pub fn union_find_partition(ids: &[u64], edges: &[(usize, usize, f64)], threshold: f64) -> Partition {
    let mut uf = UnionFind::new(ids.len());
    for &(u, v, w) in edges {
        if w >= threshold {
            uf.union(u, v);
        }
    }
    let mut groups: BTreeMap<usize, BTreeSet<u64>> = BTreeMap::new();
    for (i, &id) in ids.iter().enumerate() {
        groups.entry(uf.find(i)).or_default().insert(id);
    }
    groups.into_values().collect()
}

/// Cosine with one plain ascending-order dot product per term.
pub fn naive_cosine(a: &[f32], b: &[f32]) -> f64 {
    let mut ab = 0.0f64;
    let mut aa = 0.0f64;
    let mut bb = 0.0f64;
    for i in 0..a.len() {
        ab += a[i] as f64 * b[i] as f64;
    }
    for i in 0..a.len() {
        aa += a[i] as f64 * a[i] as f64;
    }
    for i in 0..b.len() {
        bb += b[i] as f64 * b[i] as f64;
    }
    (ab / (aa * bb).sqrt()).clamp(-1.0, 1.0)
}

// ---- brute-force validity indices, straight from the definitions ----

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn cos_dist(a: &[f64], b: &[f64]) -> f64 {
    let ab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    1.0 - (ab / (na * nb)).clamp(-1.0, 1.0)
}

fn groups(labels: &[usize]) -> BTreeMap<usize, Vec<usize>> {
    let mut g: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        g.entry(l).or_default().push(i);
    }
    g
}

fn centroid(points: &[Vec<f64>], members: &[usize]) -> Vec<f64> {
    let dim = points[0].len();
    let mut c = vec![0.0; dim];
    for &m in members {
        for d in 0..dim {
            c[d] += points[m][d];
        }
    }
    c.iter().map(|x| x / members.len() as f64).collect()
}

pub fn brute_silhouette(points: &[Vec<f64>], labels: &[usize], cosine: bool) -> Option<f64> {
    let g = groups(labels);
    if g.len() < 2 {
        return None;
    }
    let n = points.len();
    let d = |i: usize, j: usize| if cosine { cos_dist(&points[i], &points[j]) } else { dist(&points[i], &points[j]) };
    let mut total = 0.0;
    for i in 0..n {
        let own = &g[&labels[i]];
        if own.len() == 1 {
            continue;
        }
        let a = own.iter().filter(|&&j| j != i).map(|&j| d(i, j)).sum::<f64>() / (own.len() - 1) as f64;
        let b = g
            .iter()
            .filter(|(l, _)| **l != labels[i])
            .map(|(_, members)| members.iter().map(|&j| d(i, j)).sum::<f64>() / members.len() as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    Some(total / n as f64)
}

pub fn brute_calinski_harabasz(points: &[Vec<f64>], labels: &[usize]) -> Option<f64> {
    let g = groups(labels);
    let (n, k) = (points.len(), g.len());
    if k < 2 || n <= k {
        return None;
    }
    let all: Vec<usize> = (0..n).collect();
    let mu = centroid(points, &all);
    let mut between = 0.0;
    let mut within = 0.0;
    for members in g.values() {
        let c = centroid(points, members);
        between += members.len() as f64 * dist(&c, &mu).powi(2);
        for &m in members {
            within += dist(&points[m], &c).powi(2);
        }
    }
    if within == 0.0 {
        return None;
    }
    Some((between / (k - 1) as f64) / (within / (n - k) as f64))
}

pub fn brute_davies_bouldin(points: &[Vec<f64>], labels: &[usize]) -> Option<f64> {
    let g: Vec<Vec<usize>> = groups(labels).into_values().collect();
    let k = g.len();
    if k < 2 {
        return None;
    }
    let cents: Vec<Vec<f64>> = g.iter().map(|m| centroid(points, m)).collect();
    let spread: Vec<f64> = g
        .iter()
        .zip(&cents)
        .map(|(m, c)| m.iter().map(|&i| dist(&points[i], c)).sum::<f64>() / m.len() as f64)
        .collect();
    let mut total = 0.0;
    for i in 0..k {
        let mut worst = f64::NEG_INFINITY;
        for j in 0..k {
            if i == j {
                continue;
            }
            let sep = dist(&cents[i], &cents[j]);
            let num = spread[i] + spread[j];
            let r = if sep == 0.0 {
                if num == 0.0 {
                    0.0
                } else {
                    return None;
                }
            } else {
                num / sep
            };
            worst = worst.max(r);
        }
        total += worst;
    }
    Some(total / k as f64)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300) || a == b
}

// ---- synthetic corpora ----

pub fn gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

pub fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn to_f32(v: &[f64]) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}

fn mix(base: &[f64], noise: &[f64], scale: f64) -> Vec<f64> {
    unit(base.iter().zip(noise).map(|(b, n)| b + scale * n).collect())
}

/// Topic-structured corpus. Each topic holds `groups_per_topic` groups of
/// near-duplicate questions plus `background_per_topic` loosely related
/// ones. Within a topic, group centres sit near cosine 0.7 to each other,
/// group members near 0.96 to each other, background vectors near 0.5 to
/// each other and near 0.58 to group members. Topics are mutually
/// near-orthogonal.
#[derive(Debug, Clone, Copy)]
pub struct TopicCorpus {
    pub dim: usize,
    pub topics: usize,
    pub groups_per_topic: usize,
    pub group_size: usize,
    pub background_per_topic: usize,
    pub seed: u64,
}

pub struct Corpus {
    pub vectors: VectorCollection,
    /// Question ids of each near-duplicate group.
    pub groups: Vec<Vec<u64>>,
    pub background: Vec<u64>,
}

impl TopicCorpus {
    /// 100 groups of 15 plus 500 background vectors: 2000 in total.
    pub fn trend() -> Self {
        TopicCorpus { dim: 768, topics: 25, groups_per_topic: 4, group_size: 15, background_per_topic: 20, seed: 20_240_501 }
    }

    pub fn scaled(n_topics: usize, seed: u64) -> Self {
        TopicCorpus { topics: n_topics, seed, ..Self::trend() }
    }

    pub fn len(&self) -> usize {
        self.topics * (self.groups_per_topic * self.group_size + self.background_per_topic)
    }

    pub fn build(&self) -> Corpus {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let dim = self.dim;
        let center_noise = (0.4286f64).sqrt() / (dim as f64).sqrt();
        let member_noise = 0.204 / (dim as f64).sqrt();
        let background_noise = 1.0 / (dim as f64).sqrt();

        let mut vectors = VectorCollection::with_capacity(dim, self.len()).unwrap();
        let mut groups = Vec::new();
        let mut background = Vec::new();
        let mut next_id = 1u64;
        for _ in 0..self.topics {
            let topic = unit(gaussian(&mut rng, dim));
            for _ in 0..self.groups_per_topic {
                let noise = gaussian(&mut rng, dim);
                let center = mix(&topic, &noise, center_noise);
                let mut members: Vec<Vec<f32>> = Vec::new();
                while members.len() < self.group_size {
                    let noise = gaussian(&mut rng, dim);
                    let m = to_f32(&mix(&center, &noise, member_noise));
                    if members.iter().all(|o| naive_cosine(o, &m) >= 0.92) {
                        members.push(m);
                    }
                }
                let mut ids = Vec::new();
                for m in members {
                    vectors.push(next_id, &m).unwrap();
                    ids.push(next_id);
                    next_id += 1;
                }
                groups.push(ids);
            }
            let mut local: Vec<Vec<f32>> = Vec::new();
            while local.len() < self.background_per_topic {
                let noise = gaussian(&mut rng, dim);
                let b = to_f32(&mix(&topic, &noise, background_noise));
                if local.iter().all(|o| naive_cosine(o, &b) <= 0.6) {
                    local.push(b);
                }
            }
            for b in local {
                vectors.push(next_id, &b).unwrap();
                background.push(next_id);
                next_id += 1;
            }
        }
        Corpus { vectors, groups, background }
    }
}

/// `count` independent random unit vectors.
pub fn random_unit_vectors(count: usize, dim: usize, seed: u64) -> VectorCollection {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = VectorCollection::with_capacity(dim, count).unwrap();
    for id in 0..count as u64 {
        c.push(id + 1, &to_f32(&unit(gaussian(&mut rng, dim)))).unwrap();
    }
    c
}

pub fn to_points(vectors: &VectorCollection) -> Vec<Vec<f64>> {
    vectors.iter().map(|(_, v)| v.iter().map(|&x| x as f64).collect()).collect()
}
