//! Synthetic processes, fault injection and CSV input/output.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cloud::{norm, PointCloud};
use crate::error::{Error, Result};

/// Time-ordered observations, optionally with the latent path and a recorded shift.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub observations: Vec<Vec<f64>>,
    pub latent: Option<Vec<Vec<f64>>>,
    /// 1-based index of the first shifted observation.
    pub change_point: Option<usize>,
    pub shift: Option<Vec<f64>>,
}

impl Series {
    pub fn from_observations(observations: Vec<Vec<f64>>) -> Self {
        Self {
            observations,
            latent: None,
            change_point: None,
            shift: None,
        }
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.observations.first().map_or(0, Vec::len)
    }

    /// Rows `range` as a point cloud.
    pub fn cloud(&self, range: std::ops::Range<usize>) -> Result<PointCloud> {
        if range.end > self.len() {
            return Err(Error::IndexOutOfRange {
                index: range.end,
                len: self.len(),
            });
        }
        PointCloud::new(&self.observations[range])
    }
}

/// `(y₁..y_{d+1}, 0, …, 0) / ‖(y₁..y_{d+1})‖`.
pub fn sphere_project(y: &[f64], d: usize) -> Result<Vec<f64>> {
    if d + 1 > y.len() {
        return Err(Error::DimensionMismatch {
            expected: d + 1,
            found: y.len(),
        });
    }
    let r = norm(&y[..=d]);
    if r == 0.0 {
        return Err(Error::KernelPoint);
    }
    let mut out = vec![0.0; y.len()];
    for (o, v) in out.iter_mut().zip(&y[..=d]) {
        *o = v / r;
    }
    Ok(out)
}

/// Exact distance from `y` to the unit sphere in the first `d+1` coordinates.
pub fn sphere_deviation(y: &[f64], d: usize) -> Result<f64> {
    let p = sphere_project(y, d)?;
    Ok(crate::cloud::sq_dist(y, &p).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereConfig {
    /// Intrinsic dimension of the sphere.
    pub d: usize,
    pub ambient_dim: usize,
    pub sigma_x: f64,
    pub sigma: f64,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
}

impl SphereConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.ambient_dim < self.d + 1 {
            return Err(Error::invalid("ambient_dim", "need d >= 1 and D >= d + 1"));
        }
        if !(self.sigma_x > 0.0 && self.sigma_x.is_finite()) {
            return Err(Error::invalid("sigma_x", "must be positive"));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid("sigma", "must be positive"));
        }
        Ok(())
    }
}

/// Endless latent/observed pairs from the random walk on the sphere.
#[derive(Debug, Clone)]
pub struct SphereProcess {
    d: usize,
    dim: usize,
    step: Normal<f64>,
    noise: Normal<f64>,
    rng: ChaCha8Rng,
    state: Vec<f64>,
}

impl SphereProcess {
    pub fn new(cfg: &SphereConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let state = loop {
            let g: Vec<f64> = (0..cfg.ambient_dim)
                .map(|i| if i <= cfg.d { StandardNormal.sample(&mut rng) } else { 0.0 })
                .collect();
            if let Ok(x) = sphere_project(&g, cfg.d) {
                break x;
            }
        };
        Ok(Self {
            d: cfg.d,
            dim: cfg.ambient_dim,
            step: Normal::new(0.0, cfg.sigma_x).map_err(|e| Error::invalid("sigma_x", e.to_string()))?,
            noise: Normal::new(0.0, cfg.sigma).map_err(|e| Error::invalid("sigma", e.to_string()))?,
            rng,
            state,
        })
    }

    /// Advances one step, returning `(X_t, Y_t)`.
    pub fn step(&mut self) -> (Vec<f64>, Vec<f64>) {
        let next = loop {
            let moved: Vec<f64> = self.state.iter().map(|x| x + self.step.sample(&mut self.rng)).collect();
            if let Ok(x) = sphere_project(&moved, self.d) {
                break x;
            }
        };
        self.state = next;
        let y = self.state.iter().map(|x| x + self.noise.sample(&mut self.rng)).collect();
        (self.state.clone(), y)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

impl Iterator for SphereProcess {
    type Item = (Vec<f64>, Vec<f64>);

    fn next(&mut self) -> Option<Self::Item> {
        Some(self.step())
    }
}

pub fn generate_sphere_process(cfg: &SphereConfig) -> Result<Series> {
    let (latent, observations) = SphereProcess::new(cfg)?.take(cfg.n).unzip();
    Ok(Series {
        observations,
        latent: Some(latent),
        change_point: None,
        shift: None,
    })
}

/// Adds `delta` to every observation at 1-based index `tau` or later.
pub fn inject_mean_shift(mut series: Series, tau: usize, delta: &[f64]) -> Result<Series> {
    if tau == 0 || tau > series.len() {
        return Err(Error::IndexOutOfRange {
            index: tau,
            len: series.len(),
        });
    }
    if delta.len() != series.dim() {
        return Err(Error::DimensionMismatch {
            expected: series.dim(),
            found: delta.len(),
        });
    }
    for obs in &mut series.observations[tau - 1..] {
        for (o, s) in obs.iter_mut().zip(delta) {
            *o += s;
        }
    }
    series.change_point = Some(tau);
    series.shift = Some(delta.to_vec());
    Ok(series)
}

/// Points near the span of the first `d` coordinates: latent uniform on
/// `[−1, 1]^d`, isotropic noise, `delta` added from 1-based index `tau`
/// (`tau = n + 1` for no shift). Returns the series and the exact squared
/// distances to the subspace.
pub fn linear_subspace_oracle(
    d: usize,
    ambient_dim: usize,
    n: usize,
    sigma: f64,
    delta: &[f64],
    tau: usize,
    seed: u64,
) -> Result<(Series, Vec<f64>)> {
    if d == 0 || d >= ambient_dim {
        return Err(Error::invalid("d", "need 1 <= d < D"));
    }
    if delta.len() != ambient_dim {
        return Err(Error::DimensionMismatch {
            expected: ambient_dim,
            found: delta.len(),
        });
    }
    if tau == 0 || tau > n + 1 {
        return Err(Error::IndexOutOfRange { index: tau, len: n + 1 });
    }
    let noise = Normal::new(0.0, sigma).map_err(|e| Error::invalid("sigma", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut latent = Vec::with_capacity(n);
    let mut observations = Vec::with_capacity(n);
    let mut deviations = Vec::with_capacity(n);
    for t in 1..=n {
        let x: Vec<f64> = (0..ambient_dim)
            .map(|i| if i < d { rng.random_range(-1.0..=1.0) } else { 0.0 })
            .collect();
        let shifted = t >= tau;
        let y: Vec<f64> = x
            .iter()
            .zip(delta)
            .map(|(xi, di)| xi + noise.sample(&mut rng) + if shifted { *di } else { 0.0 })
            .collect();
        deviations.push(y[d..].iter().map(|v| v * v).sum());
        latent.push(x);
        observations.push(y);
    }
    let shifted = tau <= n;
    Ok((
        Series {
            observations,
            latent: Some(latent),
            change_point: shifted.then_some(tau),
            shift: shifted.then(|| delta.to_vec()),
        },
        deviations,
    ))
}

/// Parses a rectangular numeric CSV with an optional single header row.
pub fn read_series_csv<R: Read>(reader: R) -> Result<Series> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (i, record) in rdr.records().enumerate() {
        let line = i + 1;
        let record = record.map_err(|e| Error::Parse {
            row: line,
            column: 0,
            message: e.to_string(),
        })?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Vec<std::result::Result<f64, _>> = record.iter().map(str::parse::<f64>).collect();
        if i == 0 && parsed.iter().any(|p| p.is_err()) {
            width = Some(record.len());
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::Parse {
                row: line,
                column: record.len().min(expected) + 1,
                message: format!("expected {expected} fields, found {}", record.len()),
            });
        }
        let mut row = Vec::with_capacity(expected);
        for (c, (p, raw)) in parsed.into_iter().zip(record.iter()).enumerate() {
            match p {
                Ok(v) if v.is_finite() => row.push(v),
                _ => {
                    return Err(Error::Parse {
                        row: line,
                        column: c + 1,
                        message: format!("`{raw}` is not a finite number"),
                    })
                }
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(Series::from_observations(rows))
}

pub fn load_series_csv(path: impl AsRef<Path>) -> Result<Series> {
    read_series_csv(std::fs::File::open(path)?)
}

/// Formats with 17 significant digits.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_rows_csv<W: Write>(writer: W, header: Option<&[String]>, rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let to_io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    if let Some(h) = header {
        w.write_record(h).map_err(to_io)?;
    }
    for row in rows {
        w.write_record(row.iter().map(|v| format_value(*v))).map_err(to_io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_series_csv(path: impl AsRef<Path>, series: &Series) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_rows_csv(std::io::BufWriter::new(file), None, &series.observations)
}
