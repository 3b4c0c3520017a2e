//! Exact radius search over a frozen point cloud.
//!
//! A small set of pivots is chosen by farthest-point traversal and the
//! distance of every cloud point to every pivot is cached. A query at `z`
//! with radius `r` discards point `i` whenever `|d(z, p) - d(i, p)| > r` for
//! some pivot `p` (triangle inequality), and checks the survivors exactly.
//! Works for any ambient dimension and returns the same set as brute force.

use crate::cloud::{sq_dist, PointCloud};

const MAX_PIVOTS: usize = 8;

#[derive(Debug, Clone)]
pub struct PivotIndex {
    pivots: Vec<usize>,
    /// `pivot_dist[i * P + p]` = distance from point `i` to pivot `p`.
    pivot_dist: Vec<f64>,
}

impl PivotIndex {
    pub fn build(cloud: &PointCloud) -> Self {
        let m = cloud.len();
        let n_pivots = MAX_PIVOTS.min(m);
        let mut pivots = Vec::with_capacity(n_pivots);
        let mut nearest = vec![f64::INFINITY; m];
        let mut next = 0usize;
        for _ in 0..n_pivots {
            pivots.push(next);
            let p = cloud.point(next);
            let mut far = (0usize, -1.0f64);
            for (i, q) in cloud.iter().enumerate() {
                let d = sq_dist(p, q);
                if d < nearest[i] {
                    nearest[i] = d;
                }
                if nearest[i] > far.1 {
                    far = (i, nearest[i]);
                }
            }
            if far.1 <= 0.0 {
                break;
            }
            next = far.0;
        }

        let n_pivots = pivots.len();
        let mut pivot_dist = vec![0.0; m * n_pivots];
        for (i, q) in cloud.iter().enumerate() {
            for (p, &pi) in pivots.iter().enumerate() {
                pivot_dist[i * n_pivots + p] = sq_dist(q, cloud.point(pi)).sqrt();
            }
        }
        Self { pivots, pivot_dist }
    }

    /// Appends `(index, squared distance)` for every point with `‖y - z‖ <= radius`,
    /// in increasing index order.
    pub fn within(&self, cloud: &PointCloud, z: &[f64], radius: f64, out: &mut Vec<(usize, f64)>) {
        out.clear();
        let n_pivots = self.pivots.len();
        let zp: Vec<f64> = self
            .pivots
            .iter()
            .map(|&pi| sq_dist(z, cloud.point(pi)).sqrt())
            .collect();
        let r2 = radius * radius;
        // Small slack so the pruning never drops a point on the boundary
        // because of rounding in the cached distances.
        let slack = radius * (1.0 + 1e-12) + 1e-300;
        'points: for i in 0..cloud.len() {
            let row = &self.pivot_dist[i * n_pivots..(i + 1) * n_pivots];
            for (a, b) in zp.iter().zip(row) {
                if (a - b).abs() > slack {
                    continue 'points;
                }
            }
            let d = sq_dist(z, cloud.point(i));
            if d <= r2 {
                out.push((i, d));
            }
        }
    }
}
