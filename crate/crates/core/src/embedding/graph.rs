//! Symmetric neighbor graphs over a point cloud.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::{sq_dist, PointCloud};
use crate::error::{Error, Result};

/// Which pairs are connected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphRule {
    /// `i ~ j` when either is among the other's `k` nearest neighbors.
    Knn(usize),
    /// `i ~ j` when `‖Y_i - Y_j‖² < ε`.
    Epsilon(f64),
}

/// How connected pairs are weighted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeWeights {
    Binary,
    /// Heat kernel `exp(-‖Y_i - Y_j‖² / t0)`.
    Heat(f64),
    /// Heat kernel with `t0` set to the median squared length over all edges.
    HeatMedian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborGraph {
    /// `adjacency[i]` lists `(j, w_ij)` sorted by `j`; symmetric.
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl NeighborGraph {
    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    /// Row sums of the weight matrix.
    pub fn degrees(&self) -> Vec<f64> {
        self.adjacency.iter().map(|row| row.iter().map(|e| e.1).sum()).collect()
    }

    /// Unordered edges `(i, j, w)` with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().filter(move |e| e.0 > i).map(move |&(j, w)| (i, j, w)))
    }

    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        self.adjacency[i]
            .binary_search_by_key(&j, |e| e.0)
            .ok()
            .map(|pos| self.adjacency[i][pos].1)
    }
}

/// `k` nearest neighbors of every point, ties broken by smaller index.
fn knn_lists(points: &PointCloud, k: usize) -> Vec<Vec<usize>> {
    (0..points.len())
        .into_par_iter()
        .map(|i| {
            let p = points.point(i);
            let mut d: Vec<(f64, usize)> = points
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(j, q)| (sq_dist(p, q), j))
                .collect();
            let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if k < d.len() {
                d.select_nth_unstable_by(k, cmp);
                d.truncate(k);
            }
            d.sort_by(cmp);
            d.into_iter().map(|x| x.1).collect()
        })
        .collect()
}

pub fn build_graph(points: &PointCloud, rule: GraphRule, weights: EdgeWeights) -> Result<NeighborGraph> {
    let m = points.len();
    let mut pairs: Vec<Vec<usize>> = vec![Vec::new(); m];
    match rule {
        GraphRule::Knn(k) => {
            if k == 0 || k >= m {
                return Err(Error::InvalidK { k, m });
            }
            for (i, list) in knn_lists(points, k).into_iter().enumerate() {
                for j in list {
                    pairs[i].push(j);
                    pairs[j].push(i);
                }
            }
        }
        GraphRule::Epsilon(eps) => {
            if !(eps > 0.0) {
                return Err(Error::invalid("epsilon", "must be positive"));
            }
            for i in 0..m {
                for j in (i + 1)..m {
                    if sq_dist(points.point(i), points.point(j)) < eps {
                        pairs[i].push(j);
                        pairs[j].push(i);
                    }
                }
            }
        }
    }
    for row in &mut pairs {
        row.sort_unstable();
        row.dedup();
    }

    let t0 = match weights {
        EdgeWeights::Binary => None,
        EdgeWeights::Heat(t0) => {
            if !(t0 > 0.0) {
                return Err(Error::invalid("heat_t0", "must be positive"));
            }
            Some(t0)
        }
        EdgeWeights::HeatMedian => {
            let mut lengths: Vec<f64> = pairs
                .iter()
                .enumerate()
                .flat_map(|(i, row)| {
                    row.iter()
                        .filter(move |&&j| j > i)
                        .map(move |&j| sq_dist(points.point(i), points.point(j)))
                })
                .collect();
            if lengths.is_empty() {
                None
            } else {
                lengths.sort_by(f64::total_cmp);
                let n = lengths.len();
                let med = if n % 2 == 1 {
                    lengths[n / 2]
                } else {
                    0.5 * (lengths[n / 2 - 1] + lengths[n / 2])
                };
                // All edges of zero length: every heat weight is 1 anyway.
                Some(if med > 0.0 { med } else { 1.0 })
            }
        }
    };

    let adjacency = pairs
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            row.into_iter()
                .map(|j| {
                    let w = match t0 {
                        Some(t0) => (-sq_dist(points.point(i), points.point(j)) / t0).exp(),
                        None => 1.0,
                    };
                    (j, w)
                })
                .collect()
        })
        .collect();
    Ok(NeighborGraph { adjacency })
}

/// Symmetrized kNN graph; heat-kernel weights when `heat_t0` is given, else binary.
pub fn build_knn_graph(points: &PointCloud, k_neighbors: usize, heat_t0: Option<f64>) -> Result<NeighborGraph> {
    let weights = match heat_t0 {
        Some(t0) => EdgeWeights::Heat(t0),
        None => EdgeWeights::Binary,
    };
    build_graph(points, GraphRule::Knn(k_neighbors), weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinear_k1_with_tie_breaking() {
        let pts = PointCloud::new(&[[0.0], [1.0], [2.0], [3.0]]).unwrap();
        // Brute force nearest neighbor with smallest-index tie-break:
        // 0→1, 1→0 (tie 0/2), 2→1 (tie 1/3), 3→2.
        let mut oracle = Vec::new();
        for i in 0..4usize {
            let mut best = (f64::INFINITY, usize::MAX);
            for j in 0..4usize {
                if j == i {
                    continue;
                }
                let d = (i as f64 - j as f64).powi(2);
                if d < best.0 {
                    best = (d, j);
                }
            }
            oracle.push((i.min(best.1), i.max(best.1)));
        }
        oracle.sort();
        oracle.dedup();
        let g = build_knn_graph(&pts, 1, None).unwrap();
        let edges: Vec<(usize, usize)> = g.edges().map(|(i, j, _)| (i, j)).collect();
        assert_eq!(edges, oracle);
        assert_eq!(edges, vec![(0, 1), (1, 2), (2, 3)]);
    }

    #[test]
    fn coincident_points_have_unit_heat_weight() {
        let pts = PointCloud::new(&[[1.0, 1.0], [1.0, 1.0], [5.0, 5.0]]).unwrap();
        let g = build_knn_graph(&pts, 1, Some(0.3)).unwrap();
        assert_eq!(g.weight(0, 1), Some(1.0));
    }

    #[test]
    fn heat_weight_at_t0_equal_to_length() {
        let pts = PointCloud::new(&[[0.0, 0.0], [3.0, 4.0]]).unwrap();
        let g = build_knn_graph(&pts, 1, Some(25.0)).unwrap();
        assert!((g.weight(0, 1).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn invalid_k() {
        let pts = PointCloud::new(&[[0.0], [1.0]]).unwrap();
        assert!(matches!(build_knn_graph(&pts, 2, None), Err(Error::InvalidK { k: 2, m: 2 })));
    }

    #[test]
    fn graph_is_symmetric() {
        let pts = PointCloud::new(&[[0.0, 0.0], [0.1, 0.0], [0.5, 0.2], [3.0, 3.0], [3.1, 2.9], [1.0, 1.5]]).unwrap();
        let g = build_graph(&pts, GraphRule::Knn(2), EdgeWeights::HeatMedian).unwrap();
        for i in 0..g.len() {
            for &(j, w) in g.neighbors(i) {
                assert_eq!(g.weight(j, i), Some(w));
                assert!(w > 0.0 && w <= 1.0);
            }
        }
    }

    #[test]
    fn epsilon_rule() {
        let pts = PointCloud::new(&[[0.0], [0.5], [2.0]]).unwrap();
        let g = build_graph(&pts, GraphRule::Epsilon(0.3), EdgeWeights::Binary).unwrap();
        let edges: Vec<_> = g.edges().collect();
        assert_eq!(edges, vec![(0, 1, 1.0)]);
    }
}
