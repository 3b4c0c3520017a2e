//! Implicit manifold fitting by local contraction.
//!
//! A point `z` is projected onto the fitted manifold in two steps. First a
//! smooth ball-weighted mean `μ_z` of the Phase I cloud gives the contraction
//! direction `μ_z - z`. Then a hyper-cylinder is laid along that direction
//! (flat-topped profile of half-length `r2` along the axis, polynomial
//! rolloff of radius `r1` across it) and its weighted mean is the projection
//! `π̂(z)`. The deviation `‖z - π̂(z)‖` is the monitored scalar.
//!
//! Radii are tied to the noise level: `r0 = C0·σ`, `r1 = C1·σ`,
//! `r2 = C2·σ·sqrt(max(ln(1/σ), 1))`. When σ is unknown it is estimated by
//! iterating projection and residual pooling ([`estimate_noise`]).
//!
//! Sparse neighborhoods are handled by growing the offending radius by a
//! fixed factor a bounded number of times; the growth count is reported on
//! every local estimate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use crate::cloud::PointCloud;
use crate::cloud::{dot, norm};
use crate::error::{Error, Result};
use crate::index::PivotIndex;

/// Constants and fallback policy for the local estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    /// Weight exponent shared by the ball and cylinder kernels.
    pub k: u32,
    /// Intrinsic dimension used by the noise update; `None` divides by `D`.
    pub d_hint: Option<usize>,
    pub min_ball_points: usize,
    pub radius_growth: f64,
    pub max_radius_growths: u32,
    pub noise: NoiseSearch,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            c0: 5.0,
            c1: 3.0,
            c2: 5.0,
            k: 3,
            d_hint: None,
            min_ball_points: 5,
            radius_growth: 1.5,
            max_radius_growths: 10,
            noise: NoiseSearch::default(),
        }
    }
}

/// Starting point and stopping rule for [`estimate_noise`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSearch {
    pub sigma0: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for NoiseSearch {
    fn default() -> Self {
        Self {
            sigma0: 0.05,
            tolerance: 1e-4,
            max_iterations: 30,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("c0", self.c0), ("c1", self.c1), ("c2", self.c2)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        if !(self.c2 >= self.c0 && self.c0 >= self.c1) {
            return Err(Error::invalid(
                "c0",
                format!(
                    "radii must satisfy r2 >= r0 >= r1 (need c2 >= c0 >= c1, got c0={}, c1={}, c2={})",
                    self.c0, self.c1, self.c2
                ),
            ));
        }
        if self.k < 2 {
            return Err(Error::invalid("k", "weight exponent must be at least 2"));
        }
        if self.min_ball_points == 0 {
            return Err(Error::invalid("min_ball_points", "must be at least 1"));
        }
        if !(self.radius_growth.is_finite() && self.radius_growth > 1.0) {
            return Err(Error::invalid("radius_growth", "must exceed 1"));
        }
        let n = &self.noise;
        if !(n.sigma0.is_finite() && n.sigma0 > 0.0) {
            return Err(Error::invalid("noise.sigma0", "must be positive"));
        }
        if !(n.tolerance.is_finite() && n.tolerance > 0.0) {
            return Err(Error::invalid("noise.tolerance", "must be positive"));
        }
        if n.max_iterations == 0 {
            return Err(Error::invalid("noise.max_iterations", "must be at least 1"));
        }
        Ok(())
    }

    pub fn fallback(&self) -> Fallback {
        Fallback {
            min_points: self.min_ball_points,
            growth: self.radius_growth,
            max_growths: self.max_radius_growths,
        }
    }

    pub fn radii(&self, sigma: f64) -> Radii {
        Radii::from_sigma(sigma, self.c0, self.c1, self.c2)
    }
}

/// Sparse-neighborhood policy: grow radii until `min_points` carry weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fallback {
    pub min_points: usize,
    pub growth: f64,
    pub max_growths: u32,
}

impl Default for Fallback {
    fn default() -> Self {
        FitConfig::default().fallback()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Radii {
    pub r0: f64,
    pub r1: f64,
    pub r2: f64,
}

impl Radii {
    pub fn from_sigma(sigma: f64, c0: f64, c1: f64, c2: f64) -> Self {
        // ln(1/σ) is clamped at 1 so that r2 >= r0 also holds for large σ.
        let log_factor = (1.0 / sigma).ln().max(1.0);
        Self {
            r0: c0 * sigma,
            r1: c1 * sigma,
            r2: c2 * sigma * log_factor.sqrt(),
        }
    }
}

/// Output of one local weighted-mean step.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalEstimate {
    pub value: Vec<f64>,
    /// Number of cloud points with positive weight.
    pub support: usize,
    /// How many times the radius was grown before enough points were found.
    pub growths: u32,
}

enum Search<'a> {
    Brute,
    Indexed(&'a PivotIndex),
}

impl Search<'_> {
    fn within(&self, cloud: &PointCloud, z: &[f64], radius: f64, out: &mut Vec<(usize, f64)>) {
        match self {
            Search::Indexed(index) => index.within(cloud, z, radius, out),
            Search::Brute => {
                out.clear();
                let r2 = radius * radius;
                for (i, y) in cloud.iter().enumerate() {
                    let d = crate::cloud::sq_dist(z, y);
                    if d <= r2 {
                        out.push((i, d));
                    }
                }
            }
        }
    }
}

fn check_radius(name: &'static str, r: f64) -> Result<()> {
    if r.is_finite() && r > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("radius must be positive, got {r}")))
    }
}

fn weighted_mean(cloud: &PointCloud, weights: &[(usize, f64)]) -> Vec<f64> {
    let total: f64 = weights.iter().map(|w| w.1).sum();
    let mut mean = vec![0.0; cloud.dim()];
    for &(i, w) in weights {
        let a = w / total;
        for (m, y) in mean.iter_mut().zip(cloud.point(i)) {
            *m += a * y;
        }
    }
    mean
}

/// Ball-weighted mean `μ_z` with weights `(1 - ‖y - z‖²/r0²)^k`.
fn ball_mean(
    search: &Search,
    cloud: &PointCloud,
    z: &[f64],
    r0: f64,
    k: u32,
    fallback: &Fallback,
) -> Result<LocalEstimate> {
    let mut hits = Vec::new();
    let mut weights = Vec::new();
    let mut r = r0;
    let mut growths = 0;
    loop {
        search.within(cloud, z, r, &mut hits);
        let r2 = r * r;
        weights.clear();
        weights.extend(
            hits.iter()
                .map(|&(i, d)| (i, (1.0 - d / r2).powi(k as i32)))
                .filter(|&(_, w)| w > 0.0),
        );
        if weights.len() >= fallback.min_points || growths >= fallback.max_growths {
            break;
        }
        r *= fallback.growth;
        growths += 1;
    }
    if weights.is_empty() {
        return Err(Error::EmptyNeighborhood { radius: r, growths });
    }
    Ok(LocalEstimate {
        value: weighted_mean(cloud, &weights),
        support: weights.len(),
        growths,
    })
}

fn axial_weight(u: f64, r2: f64, k: u32) -> f64 {
    let u = u.abs();
    if u <= 0.5 * r2 {
        1.0
    } else if u < r2 {
        let s = (2.0 * u - r2) / r2;
        (1.0 - s * s).powi(k as i32)
    } else {
        0.0
    }
}

fn radial_weight(v2: f64, r1: f64, k: u32) -> f64 {
    let a2 = r1 * r1;
    if v2 <= a2 {
        (1.0 - v2 / a2).powi(k as i32)
    } else {
        0.0
    }
}

#[allow(clippy::too_many_arguments)]
fn cylinder_mean(
    search: &Search,
    cloud: &PointCloud,
    z: &[f64],
    direction: &[f64],
    r1: f64,
    r2: f64,
    k: u32,
    fallback: &Fallback,
) -> Result<LocalEstimate> {
    let len = norm(direction);
    if !(len.is_finite() && len > 0.0) {
        return Err(Error::DegenerateDirection);
    }
    let axis: Vec<f64> = direction.iter().map(|x| x / len).collect();
    let dim = cloud.dim();
    let mut diff = vec![0.0; dim];
    let mut hits = Vec::new();
    let mut weights = Vec::new();
    let (mut a, mut b) = (r1, r2);
    let mut growths = 0;
    loop {
        search.within(cloud, z, (a * a + b * b).sqrt(), &mut hits);
        weights.clear();
        for &(i, _) in &hits {
            for ((d, y), zz) in diff.iter_mut().zip(cloud.point(i)).zip(z) {
                *d = y - zz;
            }
            let u = dot(&diff, &axis);
            let v2: f64 = diff
                .iter()
                .zip(&axis)
                .map(|(d, e)| {
                    let v = d - u * e;
                    v * v
                })
                .sum();
            let w = axial_weight(u, b, k) * radial_weight(v2, a, k);
            if w > 0.0 {
                weights.push((i, w));
            }
        }
        if weights.len() >= fallback.min_points || growths >= fallback.max_growths {
            break;
        }
        a *= fallback.growth;
        b *= fallback.growth;
        growths += 1;
    }
    if weights.is_empty() {
        return Err(Error::EmptyCylinder { r1: a, r2: b, growths });
    }
    Ok(LocalEstimate {
        value: weighted_mean(cloud, &weights),
        support: weights.len(),
        growths,
    })
}

/// Contraction direction `μ_z - z` from a ball of radius `r0` around `z`.
pub fn estimate_contraction_direction(
    cloud: &PointCloud,
    z: &[f64],
    r0: f64,
    k: u32,
    fallback: &Fallback,
) -> Result<LocalEstimate> {
    cloud.check_dim(z)?;
    check_radius("r0", r0)?;
    let mut est = ball_mean(&Search::Brute, cloud, z, r0, k, fallback)?;
    est.value.iter_mut().zip(z).for_each(|(m, zz)| *m -= zz);
    Ok(est)
}

/// Projection estimate `π̂(z)` from a cylinder along `direction`.
#[allow(clippy::too_many_arguments)]
pub fn contract_point(
    cloud: &PointCloud,
    z: &[f64],
    direction: &[f64],
    r1: f64,
    r2: f64,
    k: u32,
    fallback: &Fallback,
) -> Result<LocalEstimate> {
    cloud.check_dim(z)?;
    cloud.check_dim(direction)?;
    check_radius("r1", r1)?;
    check_radius("r2", r2)?;
    cylinder_mean(&Search::Brute, cloud, z, direction, r1, r2, k, fallback)
}

/// Result of projecting one point onto the fitted manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub point: Vec<f64>,
    pub deviation: f64,
    pub ball_growths: u32,
    pub cylinder_growths: u32,
}

fn project_with(
    search: &Search,
    cloud: &PointCloud,
    z: &[f64],
    radii: &Radii,
    k: u32,
    fallback: &Fallback,
) -> Result<Projection> {
    let mu = ball_mean(search, cloud, z, radii.r0, k, fallback)?;
    let direction: Vec<f64> = mu.value.iter().zip(z).map(|(m, zz)| m - zz).collect();
    let (point, cylinder_growths) = if direction.iter().all(|&x| x == 0.0) {
        // z already sits at its local mean; the ball mean is the projection.
        (mu.value, 0)
    } else {
        let c = cylinder_mean(search, cloud, z, &direction, radii.r1, radii.r2, k, fallback)?;
        (c.value, c.growths)
    };
    let deviation = crate::cloud::sq_dist(z, &point).sqrt();
    Ok(Projection {
        point,
        deviation,
        ball_growths: mu.growths,
        cylinder_growths,
    })
}

/// One noise update: `sqrt(Σ r_t² / (m·(D - d)))`.
pub fn noise_update(squared_residuals: &[f64], dim: usize, intrinsic: Option<usize>) -> f64 {
    let denom = dim - intrinsic.unwrap_or(0);
    let total: f64 = squared_residuals.iter().sum();
    (total / (squared_residuals.len() as f64 * denom as f64)).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseEstimate {
    pub sigma: f64,
    pub iterations: usize,
    /// Whether successive iterates came within the tolerance before the cap.
    pub converged: bool,
    /// `σ^(0), σ^(1), …` in order.
    pub trace: Vec<f64>,
}

/// Iterative noise-level estimate: project every cloud point with radii
/// derived from the current σ, pool the squared residuals, repeat.
pub fn estimate_noise(
    cloud: &PointCloud,
    intrinsic: Option<usize>,
    sigma0: f64,
    tolerance: f64,
    max_iterations: usize,
    config: &FitConfig,
) -> Result<NoiseEstimate> {
    if !(sigma0.is_finite() && sigma0 > 0.0) {
        return Err(Error::invalid("sigma0", "must be positive"));
    }
    if !(tolerance > 0.0) {
        return Err(Error::invalid("tolerance", "must be positive"));
    }
    if max_iterations == 0 {
        return Err(Error::invalid("max_iterations", "must be at least 1"));
    }
    if let Some(d) = intrinsic {
        if d >= cloud.dim() {
            return Err(Error::invalid(
                "d",
                format!("intrinsic dimension {d} must be below ambient {}", cloud.dim()),
            ));
        }
    }
    let index = PivotIndex::build(cloud);
    let fallback = config.fallback();
    let mut sigma = sigma0;
    let mut trace = vec![sigma0];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iterations {
        let radii = config.radii(sigma);
        let search = Search::Indexed(&index);
        let residuals = (0..cloud.len())
            .into_par_iter()
            .map(|t| {
                project_with(&search, cloud, cloud.point(t), &radii, config.k, &fallback)
                    .map(|p| p.deviation * p.deviation)
            })
            .collect::<Result<Vec<f64>>>()?;
        let next = noise_update(&residuals, cloud.dim(), intrinsic);
        iterations += 1;
        trace.push(next);
        if !(next > 0.0) {
            return Err(Error::DegenerateVariance);
        }
        let step = (next - sigma).abs();
        sigma = next;
        if step < tolerance {
            converged = true;
            break;
        }
    }
    Ok(NoiseEstimate {
        sigma,
        iterations,
        converged,
        trace,
    })
}

/// A frozen Phase I cloud with radii and a neighbor index, ready to project.
#[derive(Debug, Clone)]
pub struct FittedManifold {
    cloud: PointCloud,
    sigma_hat: f64,
    radii: Radii,
    k: u32,
    fallback: Fallback,
    index: PivotIndex,
    noise: Option<NoiseEstimate>,
}

/// Fits the manifold; estimates σ first when `sigma` is `None`.
pub fn fit_manifold(phase1: PointCloud, config: &FitConfig, sigma: Option<f64>) -> Result<FittedManifold> {
    config.validate()?;
    if phase1.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let (sigma_hat, noise) = match sigma {
        Some(s) => {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::invalid("sigma", "must be positive"));
            }
            (s, None)
        }
        None => {
            let n = &config.noise;
            let est = estimate_noise(&phase1, config.d_hint, n.sigma0, n.tolerance, n.max_iterations, config)?;
            (est.sigma, Some(est))
        }
    };
    let index = PivotIndex::build(&phase1);
    Ok(FittedManifold {
        radii: config.radii(sigma_hat),
        cloud: phase1,
        sigma_hat,
        k: config.k,
        fallback: config.fallback(),
        index,
        noise,
    })
}

impl FittedManifold {
    pub fn project(&self, z: &[f64]) -> Result<Projection> {
        self.cloud.check_dim(z)?;
        project_with(&Search::Indexed(&self.index), &self.cloud, z, &self.radii, self.k, &self.fallback)
    }

    /// `‖z - π̂(z)‖₂`.
    pub fn deviation(&self, z: &[f64]) -> Result<f64> {
        self.project(z).map(|p| p.deviation)
    }

    pub fn sigma_hat(&self) -> f64 {
        self.sigma_hat
    }

    pub fn radii(&self) -> Radii {
        self.radii
    }

    pub fn dim(&self) -> usize {
        self.cloud.dim()
    }

    pub fn cloud(&self) -> &PointCloud {
        &self.cloud
    }

    /// Present when σ was estimated rather than supplied.
    pub fn noise_estimate(&self) -> Option<&NoiseEstimate> {
        self.noise.as_ref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn circle_cloud(seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.05).unwrap();
        let rows: Vec<[f64; 2]> = (0..200)
            .map(|i| {
                let th = i as f64 * std::f64::consts::TAU / 200.0;
                [th.cos() + noise.sample(&mut rng), th.sin() + noise.sample(&mut rng)]
            })
            .collect();
        PointCloud::new(&rows).unwrap()
    }

    #[test]
    fn single_point_direction_is_zero() {
        let z = [0.3, -1.2, 4.0];
        let cloud = PointCloud::new(&[z]).unwrap();
        let est = estimate_contraction_direction(&cloud, &z, 0.5, 3, &Fallback::default()).unwrap();
        assert_eq!(est.value, vec![0.0; 3]);
        assert_eq!(est.support, 1);
        // One point never reaches min_ball_points, so every growth is spent.
        assert_eq!(est.growths, 10);
    }

    #[test]
    fn symmetric_pair_cancels() {
        let z = [1.0, 2.0];
        let u = [0.1, -0.05];
        let cloud = PointCloud::new(&[[z[0] + u[0], z[1] + u[1]], [z[0] - u[0], z[1] - u[1]]]).unwrap();
        let est = estimate_contraction_direction(&cloud, &z, 0.5, 3, &Fallback::default()).unwrap();
        for v in est.value {
            assert!(v.abs() < 1e-15);
        }
    }

    #[test]
    fn empty_neighborhood_after_growth() {
        let cloud = PointCloud::new(&[[100.0, 0.0]]).unwrap();
        let fb = Fallback {
            min_points: 1,
            growth: 1.5,
            max_growths: 3,
        };
        let err = estimate_contraction_direction(&cloud, &[0.0, 0.0], 1.0, 3, &fb).unwrap_err();
        assert!(matches!(err, Error::EmptyNeighborhood { growths: 3, .. }));
    }

    #[test]
    fn circle_direction_points_inward() {
        // Exact projection direction of (1.3, 0) onto the unit circle is (-1, 0).
        let cloud = circle_cloud(11);
        let z = [1.3, 0.0];
        let est = estimate_contraction_direction(&cloud, &z, 0.25, 3, &Fallback::default()).unwrap();
        let cos = -est.value[0] / norm(&est.value);
        assert!(cos > 0.95, "cosine {cos}");
    }

    #[test]
    fn contract_single_point_returns_it() {
        let p = [0.9, 0.1];
        let cloud = PointCloud::new(&[p]).unwrap();
        let est = contract_point(&cloud, &[1.0, 0.0], &[-1.0, 0.0], 0.3, 0.5, 2, &Fallback::default()).unwrap();
        assert_relative_eq!(est.value[0], p[0], epsilon = 1e-15);
        assert_relative_eq!(est.value[1], p[1], epsilon = 1e-15);
    }

    #[test]
    fn contract_symmetric_pairs_land_on_axis() {
        let z = [0.5, 0.5, 0.0];
        let dir = [0.0, 0.0, -2.0];
        let a = 0.1;
        let rows: Vec<[f64; 3]> = [0.02, 0.05]
            .iter()
            .flat_map(|&c| [[z[0] + c, z[1], z[2] - a], [z[0] - c, z[1], z[2] - a]])
            .collect();
        let cloud = PointCloud::new(&rows).unwrap();
        let est = contract_point(&cloud, &z, &dir, 0.2, 0.5, 3, &Fallback::default()).unwrap();
        assert_relative_eq!(est.value[0], 0.5, epsilon = 1e-14);
        assert_relative_eq!(est.value[1], 0.5, epsilon = 1e-14);
        assert_relative_eq!(est.value[2], -a, epsilon = 1e-14);
    }

    #[test]
    fn contract_zero_direction_is_an_error() {
        let cloud = PointCloud::new(&[[0.0, 0.0]]).unwrap();
        let err = contract_point(&cloud, &[0.0, 0.0], &[0.0, 0.0], 1.0, 1.0, 2, &Fallback::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateDirection));
    }

    #[test]
    fn circle_projection_close_to_exact() {
        let cloud = circle_cloud(11);
        let z = [1.3, 0.0];
        let fb = Fallback::default();
        let dir = estimate_contraction_direction(&cloud, &z, 0.25, 3, &fb).unwrap();
        let p = contract_point(&cloud, &z, &dir.value, 0.15, 0.4, 3, &fb).unwrap();
        let err = ((p.value[0] - 1.0).powi(2) + p.value[1].powi(2)).sqrt();
        assert!(err < 0.05, "projection error {err}");
    }

    #[test]
    fn weights_are_local() {
        // A far point must not influence the ball mean.
        let near = [[0.1, 0.0], [-0.1, 0.0], [0.0, 0.1], [0.0, -0.1], [0.05, 0.05]];
        let mut with_far: Vec<[f64; 2]> = near.to_vec();
        with_far.push([5.0, 5.0]);
        let fb = Fallback::default();
        let a = estimate_contraction_direction(&PointCloud::new(&near).unwrap(), &[0.0, 0.0], 0.5, 3, &fb).unwrap();
        let b = estimate_contraction_direction(&PointCloud::new(&with_far).unwrap(), &[0.0, 0.0], 0.5, 3, &fb).unwrap();
        assert_eq!(a.value, b.value);
    }

    #[test]
    fn noise_update_of_constant_residuals() {
        let c: f64 = 0.7;
        let sq = vec![c * c; 40];
        assert_relative_eq!(noise_update(&sq, 5, Some(2)), c / 3f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(noise_update(&sq, 4, None), c / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn radii_from_given_sigma() {
        let cfg = FitConfig {
            c0: 5.0,
            c1: 3.0,
            c2: 5.0,
            ..FitConfig::default()
        };
        let fit = fit_manifold(circle_cloud(1), &cfg, Some(0.1)).unwrap();
        let r = fit.radii();
        assert_relative_eq!(r.r0, 0.5, epsilon = 1e-15);
        assert_relative_eq!(r.r1, 0.3, epsilon = 1e-15);
        // 0.5 * sqrt(ln 10)
        assert_relative_eq!(r.r2, 0.758_713_564_692_573, epsilon = 1e-12);
        assert!(fit.noise_estimate().is_none());
    }

    #[test]
    fn radius_ordering_is_enforced() {
        let cfg = FitConfig {
            c0: 2.0,
            c1: 3.0,
            ..FitConfig::default()
        };
        assert!(matches!(
            fit_manifold(circle_cloud(1), &cfg, Some(0.1)),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn large_sigma_keeps_r2_above_r0() {
        let r = Radii::from_sigma(2.0, 4.0, 2.0, 4.0);
        assert!(r.r2 >= r.r0 && r.r0 >= r.r1);
    }

    #[test]
    fn isolated_point_has_zero_deviation() {
        let cloud = PointCloud::new(&[[0.0, 0.0], [50.0, 50.0]]).unwrap();
        let cfg = FitConfig {
            max_radius_growths: 2,
            ..FitConfig::default()
        };
        let fit = fit_manifold(cloud, &cfg, Some(0.1)).unwrap();
        assert_eq!(fit.deviation(&[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn circle_deviation_close_to_true_distance() {
        let cfg = FitConfig {
            c0: 5.0,
            c1: 3.0,
            c2: 5.0,
            ..FitConfig::default()
        };
        let fit = fit_manifold(circle_cloud(5), &cfg, Some(0.05)).unwrap();
        let d = fit.deviation(&[1.3, 0.0]).unwrap();
        assert!((d - 0.3).abs() < 0.05, "deviation {d}");
    }

    #[test]
    fn indexed_projection_matches_brute_force() {
        let cloud = circle_cloud(2);
        let cfg = FitConfig::default();
        let fit = fit_manifold(cloud.clone(), &cfg, Some(0.05)).unwrap();
        for z in [[1.2, 0.1], [0.0, 0.95], [-0.7, -0.7]] {
            let a = fit.project(&z).unwrap();
            let b = project_with(&Search::Brute, &cloud, &z, &fit.radii(), cfg.k, &cfg.fallback()).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let fit = fit_manifold(circle_cloud(2), &FitConfig::default(), Some(0.05)).unwrap();
        assert!(matches!(fit.deviation(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }
}
