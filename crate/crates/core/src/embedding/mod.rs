//! Linear `D → d` embeddings learned from Phase I data: PCA, LPP and NPE.
//!
//! All three center on the Phase I mean. LPP and NPE first restrict to the
//! span of the centered data (directions of zero sample variance are dropped)
//! so that points lying exactly in a subspace still give a definite pencil.

mod eigen;
mod graph;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use eigen::{solve_generalized_symmetric_eig, GeneralizedEigen};
pub use graph::{build_graph, build_knn_graph, EdgeWeights, GraphRule, NeighborGraph};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use eigen::sorted_symmetric_eigen;

/// Relative eigenvalue below which a covariance direction counts as empty.
const NULL_VARIANCE: f64 = 1e-10;
/// Condition number beyond which the right-hand pencil matrix is rejected.
const MAX_CONDITION: f64 = 1e12;
/// Ridge factor for rank-deficient local Gram matrices in NPE.
pub const NPE_RIDGE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pca,
    Lpp,
    Npe,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Pca => "pca",
            Method::Lpp => "lpp",
            Method::Npe => "npe",
        })
    }
}

#[derive(Debug, Clone)]
pub struct EmbeddingMap {
    projection: DMatrix<f64>,
    centering: Vec<f64>,
    method: Method,
    spectrum: Vec<f64>,
}

impl EmbeddingMap {
    /// `projection` is `d × D` with `d < D`.
    pub fn new(projection: DMatrix<f64>, centering: Vec<f64>, method: Method) -> Result<Self> {
        if projection.ncols() != centering.len() {
            return Err(Error::DimensionMismatch {
                expected: projection.ncols(),
                found: centering.len(),
            });
        }
        if projection.nrows() == 0 || projection.nrows() >= projection.ncols() {
            return Err(Error::invalid("d", "need 1 <= d < D"));
        }
        if projection.iter().chain(&centering).any(|v| !v.is_finite()) {
            return Err(Error::invalid("projection", "entries must be finite"));
        }
        Ok(Self {
            projection,
            centering,
            method,
            spectrum: Vec::new(),
        })
    }

    /// Rows are the projection directions.
    pub fn projection(&self) -> &DMatrix<f64> {
        &self.projection
    }

    pub fn centering(&self) -> &[f64] {
        &self.centering
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn target_dim(&self) -> usize {
        self.projection.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.projection.ncols()
    }

    /// PCA: explained-variance ratios of all components, descending.
    /// LPP/NPE: the `d` generalized eigenvalues, ascending.
    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    pub fn embed(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: z.len(),
            });
        }
        Ok((0..self.target_dim())
            .map(|r| {
                self.projection
                    .row(r)
                    .iter()
                    .zip(z.iter().zip(&self.centering))
                    .map(|(u, (x, c))| u * (x - c))
                    .sum()
            })
            .collect())
    }
}

pub fn embed(map: &EmbeddingMap, z: &[f64]) -> Result<Vec<f64>> {
    map.embed(z)
}

fn centered(points: &PointCloud) -> (DMatrix<f64>, Vec<f64>) {
    let mean = points.mean();
    let x = DMatrix::from_fn(points.len(), points.dim(), |i, j| points.point(i)[j] - mean[j]);
    (x, mean)
}

fn check_target(d: usize, dim: usize) -> Result<()> {
    if d == 0 || d >= dim {
        return Err(Error::invalid("d", format!("need 1 <= d < D = {dim}, got {d}")));
    }
    Ok(())
}

/// Covariance eigenpairs, descending.
fn covariance_spectrum(x: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let m = x.nrows() as f64;
    let cov = x.tr_mul(x) / (m - 1.0);
    let (mut values, vectors) = sorted_symmetric_eigen(&cov);
    values.reverse();
    let n = vectors.ncols();
    let vectors = DMatrix::from_fn(vectors.nrows(), n, |r, c| vectors[(r, n - 1 - c)]);
    (values, vectors)
}

pub fn fit_pca(points: &PointCloud, d: usize) -> Result<EmbeddingMap> {
    if points.len() < 2 {
        return Err(Error::TooShort { len: points.len(), needed: 2 });
    }
    check_target(d, points.dim())?;
    let (x, mean) = centered(points);
    let (values, vectors) = covariance_spectrum(&x);
    let total: f64 = values.iter().map(|v| v.max(0.0)).sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateVariance);
    }
    let projection = vectors.columns(0, d).transpose();
    let mut map = EmbeddingMap::new(projection, mean, Method::Pca)?;
    map.spectrum = values.iter().map(|v| v.max(0.0) / total).collect();
    Ok(map)
}

/// Centered data expressed in an orthonormal basis of its own span.
struct Reduced {
    coords: DMatrix<f64>,
    basis: DMatrix<f64>,
    mean: Vec<f64>,
}

fn reduce(points: &PointCloud, d: usize, graph: &NeighborGraph) -> Result<Reduced> {
    let (m, dim) = (points.len(), points.dim());
    check_target(d, dim)?;
    if m <= dim {
        return Err(Error::IllPosed {
            reason: format!(
                "{m} Phase I points in dimension {dim}: the generalized eigenproblem needs m > D; use the manifold-fitting pipeline"
            ),
            condition: None,
        });
    }
    if graph.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: graph.len(),
        });
    }
    let (x, mean) = centered(points);
    let (values, vectors) = covariance_spectrum(&x);
    let top = values.first().copied().unwrap_or(0.0);
    let rank = values.iter().take_while(|&&v| v > NULL_VARIANCE * top).count();
    if rank < d {
        return Err(Error::IllPosed {
            reason: format!("data span only {rank} dimensions, fewer than d = {d}"),
            condition: None,
        });
    }
    let basis = vectors.columns(0, rank).into_owned();
    let coords = &x * &basis;
    Ok(Reduced { coords, basis, mean })
}

fn finish(
    reduced: Reduced,
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    d: usize,
    method: Method,
) -> Result<EmbeddingMap> {
    let (b_values, _) = sorted_symmetric_eigen(&b);
    let lo = b_values.first().copied().unwrap_or(0.0);
    let hi = b_values.last().copied().unwrap_or(0.0);
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllPosed {
            reason: "right-hand matrix of the eigenproblem is numerically singular".into(),
            condition: Some(condition),
        });
    }
    let eig = solve_generalized_symmetric_eig(&a, &b)?;
    let f = reduced.basis * eig.vectors.columns(0, d);
    let mut map = EmbeddingMap::new(f.transpose(), reduced.mean, method)?;
    map.spectrum = eig.values[..d].to_vec();
    Ok(map)
}

fn outer_add(acc: &mut DMatrix<f64>, v: &[f64], w: f64) {
    let r = v.len();
    for i in 0..r {
        let vi = w * v[i];
        for j in 0..r {
            acc[(i, j)] += vi * v[j];
        }
    }
}

/// Locality preserving projections: smallest eigenvectors of `(YLYᵀ, YKYᵀ)`.
pub fn fit_lpp(points: &PointCloud, d: usize, graph: &NeighborGraph) -> Result<EmbeddingMap> {
    let red = reduce(points, d, graph)?;
    let r = red.coords.ncols();
    let row = |i: usize| -> Vec<f64> { red.coords.row(i).iter().copied().collect() };
    let mut a = DMatrix::zeros(r, r);
    for (i, j, w) in graph.edges() {
        let diff: Vec<f64> = row(i).iter().zip(row(j)).map(|(p, q)| p - q).collect();
        outer_add(&mut a, &diff, w);
    }
    let mut b = DMatrix::zeros(r, r);
    for (i, k) in graph.degrees().into_iter().enumerate() {
        if k > 0.0 {
            outer_add(&mut b, &row(i), k);
        }
    }
    finish(red, a, b, d, Method::Lpp)
}

/// Reconstruction weights `W_i·` minimizing `‖Y_i − Σ_j W_ij Y_j‖²` with `Σ_j W_ij = 1`,
/// supported on the graph neighbors of `i`. Rows are `(j, W_ij)` sorted by `j`.
pub fn reconstruction_weights(points: &PointCloud, graph: &NeighborGraph) -> Result<Vec<Vec<(usize, f64)>>> {
    if graph.len() != points.len() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            found: graph.len(),
        });
    }
    (0..points.len())
        .map(|i| {
            let nbrs = graph.neighbors(i);
            if nbrs.is_empty() {
                return Err(Error::invalid("graph", format!("node {i} has no neighbors")));
            }
            let yi = points.point(i);
            let k = nbrs.len();
            let diffs: Vec<Vec<f64>> = nbrs
                .iter()
                .map(|&(j, _)| points.point(j).iter().zip(yi).map(|(a, b)| a - b).collect())
                .collect();
            let g = DMatrix::from_fn(k, k, |a, b| crate::cloud::dot(&diffs[a], &diffs[b]));
            let trace = g.trace();
            let uniform = || nbrs.iter().map(|&(j, _)| (j, 1.0 / k as f64)).collect::<Vec<_>>();
            if !(trace > 0.0) {
                // Every neighbor coincides with Y_i: any affine weights reconstruct exactly.
                return Ok(uniform());
            }
            let (values, _) = sorted_symmetric_eigen(&g);
            let deficient = values[0] <= NULL_VARIANCE * values[k - 1];
            let solve = |g: DMatrix<f64>| g.cholesky().map(|c| c.solve(&nalgebra::DVector::repeat(k, 1.0)));
            let w = if deficient {
                None
            } else {
                solve(g.clone())
            };
            let w = match w {
                Some(w) => w,
                None => {
                    let ridge = NPE_RIDGE * trace / k as f64;
                    solve(&g + DMatrix::identity(k, k) * ridge).ok_or(Error::NotPositiveDefinite { min_pivot: values[0] })?
                }
            };
            let total: f64 = w.iter().sum();
            if !(total.abs() > 0.0) || !total.is_finite() {
                return Ok(uniform());
            }
            Ok(nbrs.iter().zip(w.iter()).map(|(&(j, _), &wj)| (j, wj / total)).collect())
        })
        .collect()
}

/// Neighborhood preserving embedding: smallest eigenvectors of `(YMYᵀ, YYᵀ)`
/// with `M = (I − W)ᵀ(I − W)`.
pub fn fit_npe(points: &PointCloud, d: usize, graph: &NeighborGraph) -> Result<EmbeddingMap> {
    let red = reduce(points, d, graph)?;
    let weights = reconstruction_weights(points, graph)?;
    let r = red.coords.ncols();
    let mut a = DMatrix::zeros(r, r);
    let mut b = DMatrix::zeros(r, r);
    for (i, row) in weights.iter().enumerate() {
        let yi: Vec<f64> = red.coords.row(i).iter().copied().collect();
        // (I − W) applied to the reduced data, row i.
        let mut e = yi.clone();
        for &(j, w) in row {
            for (c, v) in e.iter_mut().enumerate() {
                *v -= w * red.coords[(j, c)];
            }
        }
        outer_add(&mut a, &e, 1.0);
        outer_add(&mut b, &yi, 1.0);
    }
    finish(red, a, b, d, Method::Npe)
}

/// Graph construction defaults for each method: heat-kernel LPP, binary NPE.
pub fn default_graph(points: &PointCloud, method: Method, k_neighbors: usize) -> Result<NeighborGraph> {
    let weights = match method {
        Method::Lpp => EdgeWeights::HeatMedian,
        Method::Npe | Method::Pca => EdgeWeights::Binary,
    };
    build_graph(points, GraphRule::Knn(k_neighbors), weights)
}

/// Fits `method` with its default graph. `k_neighbors` is ignored for PCA.
pub fn fit_embedding(points: &PointCloud, method: Method, d: usize, k_neighbors: usize) -> Result<EmbeddingMap> {
    match method {
        Method::Pca => {
            if points.len() <= points.dim() {
                return Err(Error::IllPosed {
                    reason: format!(
                        "{} Phase I points in dimension {}: need m > D; use the manifold-fitting pipeline",
                        points.len(),
                        points.dim()
                    ),
                    condition: None,
                });
            }
            fit_pca(points, d)
        }
        Method::Lpp => fit_lpp(points, d, &default_graph(points, method, k_neighbors)?),
        Method::Npe => fit_npe(points, d, &default_graph(points, method, k_neighbors)?),
    }
}
