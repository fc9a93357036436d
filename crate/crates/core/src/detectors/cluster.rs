//! Clustering and isolation detectors: KMeans, CBLOF, IForest.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::common::{dist, kmeans, nearest_centroid, random_subset, Points};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct KMeans {
    pub centroids: Vec<Vec<f64>>,
}

impl KMeans {
    pub fn fit<R: Rng>(points: &Points, k: usize, rng: &mut R) -> Self {
        Self {
            centroids: kmeans(points, k, 100, rng),
        }
    }

    pub fn score(&self, q: &[f64]) -> f64 {
        nearest_centroid(&self.centroids, q).1
    }
}

/// Cluster-based local outlier factor without size weighting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Cblof {
    pub centroids: Vec<Vec<f64>>,
    pub large: Vec<bool>,
}

impl Cblof {
    pub fn fit<R: Rng>(points: &Points, k: usize, alpha: f64, beta: f64, rng: &mut R) -> Self {
        let centroids = kmeans(points, k, 100, rng);
        let mut sizes = vec![0usize; centroids.len()];
        for r in points.rows() {
            sizes[nearest_centroid(&centroids, r).0] += 1;
        }
        let mut order: Vec<usize> = (0..centroids.len()).collect();
        order.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]).then(a.cmp(&b)));
        let n = points.len() as f64;
        let mut boundary = order.len() - 1;
        let mut cum = 0usize;
        for (i, &c) in order.iter().enumerate() {
            cum += sizes[c];
            let ratio_break = order
                .get(i + 1)
                .is_some_and(|&next| sizes[next] == 0 || sizes[c] as f64 / sizes[next] as f64 >= beta);
            if cum as f64 >= alpha * n || ratio_break {
                boundary = i;
                break;
            }
        }
        let mut large = vec![false; centroids.len()];
        for &c in &order[..=boundary] {
            large[c] = true;
        }
        Self { centroids, large }
    }

    pub fn score(&self, q: &[f64]) -> f64 {
        let (c, d) = nearest_centroid(&self.centroids, q);
        if self.large[c] {
            return d;
        }
        self.centroids
            .iter()
            .zip(&self.large)
            .filter(|(_, l)| **l)
            .map(|(cen, _)| dist(cen, q))
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) enum Node {
    Leaf { size: usize },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Tree {
    pub nodes: Vec<Node>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct IForest {
    pub trees: Vec<Tree>,
    pub sample_size: usize,
}

/// Average unsuccessful-search path length in a binary search tree of `n`.
pub(crate) fn average_path_length(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let n = n as f64;
            2.0 * ((n - 1.0).ln() + 0.577_215_664_901_532_9) - 2.0 * (n - 1.0) / n
        }
    }
}

impl IForest {
    pub fn fit<R: Rng>(points: &Points, trees: usize, samples: usize, rng: &mut R) -> Self {
        let psi = samples.min(points.len());
        let limit = (psi as f64).log2().ceil() as usize;
        let trees = (0..trees)
            .map(|_| {
                let idx = random_subset(rng, points.len(), psi);
                let mut tree = Tree { nodes: Vec::new() };
                grow(&mut tree, points, idx, 0, limit, rng);
                tree
            })
            .collect();
        Self {
            trees,
            sample_size: psi,
        }
    }

    pub fn score(&self, q: &[f64]) -> f64 {
        let mean_path: f64 =
            self.trees.iter().map(|t| path_length(t, q)).sum::<f64>() / self.trees.len() as f64;
        let c = average_path_length(self.sample_size);
        if c == 0.0 {
            return 1.0;
        }
        (-mean_path / c).exp2()
    }
}

fn grow<R: Rng>(tree: &mut Tree, points: &Points, idx: Vec<usize>, depth: usize, limit: usize, rng: &mut R) -> usize {
    let id = tree.nodes.len();
    tree.nodes.push(Node::Leaf { size: idx.len() });
    if depth >= limit || idx.len() <= 1 {
        return id;
    }
    let ranges: Vec<(usize, f64, f64)> = (0..points.width)
        .filter_map(|f| {
            let lo = idx.iter().map(|&i| points.row(i)[f]).fold(f64::INFINITY, f64::min);
            let hi = idx.iter().map(|&i| points.row(i)[f]).fold(f64::NEG_INFINITY, f64::max);
            (hi > lo).then_some((f, lo, hi))
        })
        .collect();
    if ranges.is_empty() {
        return id;
    }
    let (feature, lo, hi) = ranges[rng.random_range(0..ranges.len())];
    let threshold = lo + rng.random::<f64>() * (hi - lo);
    let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| points.row(i)[feature] < threshold);
    let left = grow(tree, points, l, depth + 1, limit, rng);
    let right = grow(tree, points, r, depth + 1, limit, rng);
    tree.nodes[id] = Node::Split {
        feature,
        threshold,
        left,
        right,
    };
    id
}

fn path_length(tree: &Tree, q: &[f64]) -> f64 {
    let mut node = 0;
    let mut depth = 0.0;
    loop {
        match tree.nodes[node] {
            Node::Leaf { size } => return depth + average_path_length(size),
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                node = if q[feature] < threshold { left } else { right };
                depth += 1.0;
            }
        }
    }
}
