use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{centered_rank_moments, ewma_variance, rank_moments, upper_quantile};
use crate::error::{Error, Result};

/// Surviving replicates needed before the conditional quantile is trusted.
pub const MIN_SURVIVORS: usize = 50;
/// Cap on total replicates per step, as a multiple of the configured budget.
pub const MAX_REPLICATE_FACTOR: usize = 10;
/// Tie-breaking jitter, relative to the reference range.
const JITTER: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChartConfig {
    pub window: usize,
    pub lambda: f64,
    pub alpha: f64,
    pub replicates: usize,
    pub seed: u64,
    /// How many past statistics a replicate must keep below their limits.
    /// Defaults to the window size.
    pub conditioning_depth: Option<usize>,
}

impl Default for ChartConfig {
    fn default() -> Self {
        Self {
            window: 5,
            lambda: 0.05,
            alpha: 0.05,
            replicates: 1000,
            seed: 0,
            conditioning_depth: None,
        }
    }
}

impl ChartConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::invalid("window", "must be at least 1"));
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::invalid("lambda", "must lie in (0, 1)"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid("alpha", "must lie in (0, 1)"));
        }
        if self.replicates < 200 {
            return Err(Error::invalid("replicates", "need at least 200"));
        }
        Ok(())
    }

    fn depth(&self) -> usize {
        self.conditioning_depth.unwrap_or(self.window)
    }
}

/// One chart update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartStep {
    pub n: usize,
    pub statistic: f64,
    pub limit: f64,
    pub alarm: bool,
    /// False when too few replicates survived conditioning and the
    /// unconditional quantile was used.
    pub conditional: bool,
    pub survivors: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    /// One-sided score `max(0, R − (N+1)/2)/N`, standardized sum.
    Upper,
    /// Centered score `(R − (N+1)/2)/N` per dimension, sum of squared standardized sums.
    TwoSided,
}

/// Per-step constants for the statistic at step `k`.
#[derive(Debug, Clone, Copy)]
struct StepConst {
    n_pooled: f64,
    half: f64,
    mu: f64,
    inv_sd: f64,
    len: usize,
}

#[derive(Debug, Clone)]
struct Engine {
    kind: Kind,
    cfg: ChartConfig,
    dim: usize,
    m: usize,
    /// Pooled values per dimension, by arrival (reference first).
    values: Vec<Vec<f64>>,
    /// 1-based ranks in the current pooled sample, per dimension, by arrival.
    ranks: Vec<Vec<u32>>,
    /// `limits[k-1]` is the limit used at step `k`.
    limits: Vec<f64>,
    jitter_scale: Vec<f64>,
    jitter_rng: ChaCha8Rng,
    weights: Vec<f64>,
}

fn mix(mut x: u64) -> u64 {
    // splitmix64 finalizer
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

enum Replicate {
    Dead(f64),
    Alive(f64),
}

impl Engine {
    fn new(kind: Kind, reference: &[Vec<f64>], cfg: &ChartConfig) -> Result<Self> {
        cfg.validate()?;
        let first = reference.first().ok_or(Error::EmptyCloud)?;
        let dim = first.len();
        if dim == 0 {
            return Err(Error::invalid("dim", "observations need at least one coordinate"));
        }
        for (row, r) in reference.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: r.len(),
                });
            }
            if let Some(column) = r.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row, column });
            }
        }
        let jitter_scale = (0..dim)
            .map(|i| {
                let (lo, hi) = reference
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r[i]), hi.max(r[i])));
                let range = hi - lo;
                JITTER * if range > 0.0 { range } else { hi.abs().max(1.0) }
            })
            .collect();
        let weights = (0..cfg.window).map(|t| (1.0 - cfg.lambda).powi(t as i32)).collect();
        let mut engine = Self {
            kind,
            cfg: cfg.clone(),
            dim,
            m: 0,
            values: vec![Vec::new(); dim],
            ranks: vec![Vec::new(); dim],
            limits: Vec::new(),
            jitter_scale,
            jitter_rng: ChaCha8Rng::seed_from_u64(mix(cfg.seed ^ 0x6A09_E667_F3BC_C908)),
            weights,
        };
        for r in reference {
            engine.insert(r);
        }
        engine.m = reference.len();
        Ok(engine)
    }

    fn steps(&self) -> usize {
        self.values[0].len() - self.m
    }

    fn insert(&mut self, x: &[f64]) {
        for i in 0..self.dim {
            let v = x[i] + self.jitter_rng.random_range(-0.5..0.5) * self.jitter_scale[i];
            let mut below = 0u32;
            for (old, r) in self.values[i].iter().zip(self.ranks[i].iter_mut()) {
                if *old > v {
                    *r += 1;
                } else {
                    below += 1;
                }
            }
            self.values[i].push(v);
            self.ranks[i].push(below + 1);
        }
    }

    fn step_const(&self, k: usize) -> StepConst {
        let n_pooled = self.m + k;
        let len = k.min(self.cfg.window);
        let mo = match self.kind {
            Kind::Upper => rank_moments(n_pooled),
            Kind::TwoSided => centered_rank_moments(n_pooled),
        };
        let var = ewma_variance(self.cfg.lambda, len, &mo);
        StepConst {
            n_pooled: n_pooled as f64,
            half: (n_pooled as f64 + 1.0) / 2.0,
            mu: mo.mu,
            inv_sd: 1.0 / var.sqrt(),
            len,
        }
    }

    /// Statistic from window ranks; `rank(dim, t)` is the rank of the
    /// observation `t` steps before the newest in the window.
    #[inline]
    fn statistic(&self, c: &StepConst, rank: impl Fn(usize, usize) -> u32) -> f64 {
        match self.kind {
            Kind::Upper => {
                let mut s = 0.0;
                for t in 0..c.len {
                    let z = (rank(0, t) as f64 - c.half).max(0.0) / c.n_pooled;
                    s += self.weights[t] * (z - c.mu);
                }
                s * c.inv_sd
            }
            Kind::TwoSided => {
                let mut total = 0.0;
                for i in 0..self.dim {
                    let mut s = 0.0;
                    for t in 0..c.len {
                        s += self.weights[t] * (rank(i, t) as f64 - c.half) / c.n_pooled;
                    }
                    let e = s * c.inv_sd;
                    total += e * e;
                }
                total
            }
        }
    }

    /// One relabeling: draws the pooled rows occupying the last `p` stream
    /// positions and replays the statistics at steps `n, n−1, …, k_min`.
    fn replicate(&self, rng: &mut ChaCha8Rng, n: usize, p: usize, consts: &[StepConst]) -> Replicate {
        let big_n = self.m + n;
        let rows = index::sample(rng, big_n, p);
        let d = self.dim;
        // g[i * p + q]: rank in S_n (dimension i) of the row at position n − p + 1 + q.
        let mut g = vec![0u32; d * p];
        for (q, row) in rows.iter().enumerate() {
            for i in 0..d {
                g[i * p + q] = self.ranks[i][row];
            }
        }
        let mut adj = vec![0u32; d * p];
        let first = n + 1 - p;
        let k_min = n.saturating_sub(self.cfg.depth()).max(1);
        let mut t_n = 0.0;
        for k in (k_min..=n).rev() {
            let c = &consts[n - k];
            let newest = k - first;
            let t = self.statistic(c, |i, lag| g[i * p + newest - lag] - adj[i * p + newest - lag]);
            if k == n {
                t_n = t;
            } else if t > self.limits[k - 1] {
                return Replicate::Dead(t_n);
            }
            // Drop position k from the pooled sample.
            for i in 0..d {
                let gk = g[i * p + newest];
                for q in 0..newest {
                    if gk < g[i * p + q] {
                        adj[i * p + q] += 1;
                    }
                }
            }
        }
        Replicate::Alive(t_n)
    }

    fn update(&mut self, x: &[f64]) -> Result<ChartStep> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        if let Some(column) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: self.steps(),
                column,
            });
        }
        self.insert(x);
        let n = self.steps();
        let depth = self.cfg.depth();
        let w = self.cfg.window;
        let p = n.min(depth + w);
        let k_min = n.saturating_sub(depth).max(1);
        let consts: Vec<StepConst> = (k_min..=n).rev().map(|k| self.step_const(k)).collect();

        let newest_row = self.m + n - 1;
        let statistic = self.statistic(&consts[0], |i, lag| self.ranks[i][newest_row - lag]);

        let step_seed = mix(mix(self.cfg.seed) ^ n as u64);
        let b = self.cfg.replicates;
        let mut all = Vec::with_capacity(b);
        let mut survivors = Vec::with_capacity(b);
        let mut drawn = 0usize;
        while drawn < b * MAX_REPLICATE_FACTOR {
            let batch: Vec<Replicate> = (drawn..drawn + b)
                .into_par_iter()
                .with_min_len(64)
                .map(|r| {
                    let mut rng = ChaCha8Rng::seed_from_u64(step_seed);
                    rng.set_stream(r as u64);
                    self.replicate(&mut rng, n, p, &consts)
                })
                .collect();
            drawn += b;
            for rep in batch {
                match rep {
                    Replicate::Alive(t) => {
                        survivors.push(t);
                        all.push(t);
                    }
                    Replicate::Dead(t) => all.push(t),
                }
            }
            if survivors.len() >= MIN_SURVIVORS {
                break;
            }
        }
        let n_survivors = survivors.len();
        let conditional = n_survivors >= MIN_SURVIVORS;
        let limit = if conditional {
            upper_quantile(&mut survivors, self.cfg.alpha)
        } else {
            upper_quantile(&mut all, self.cfg.alpha)
        };
        self.limits.push(limit);
        Ok(ChartStep {
            n,
            statistic,
            limit,
            alarm: statistic > limit,
            conditional,
            survivors: n_survivors,
        })
    }
}

/// One-sided univariate rank chart.
#[derive(Debug, Clone)]
pub struct UdfmState {
    engine: Engine,
}

impl UdfmState {
    pub fn new(reference: &[f64], cfg: &ChartConfig) -> Result<Self> {
        let rows: Vec<Vec<f64>> = reference.iter().map(|&v| vec![v]).collect();
        Ok(Self {
            engine: Engine::new(Kind::Upper, &rows, cfg)?,
        })
    }

    pub fn update(&mut self, x: f64) -> Result<ChartStep> {
        self.engine.update(&[x])
    }

    pub fn steps(&self) -> usize {
        self.engine.steps()
    }

    pub fn reference_len(&self) -> usize {
        self.engine.m
    }

    pub fn config(&self) -> &ChartConfig {
        &self.engine.cfg
    }

    /// Limits used so far, by step.
    pub fn limits(&self) -> &[f64] {
        &self.engine.limits
    }
}

/// Two-sided multivariate rank chart with jointly permuted labels.
#[derive(Debug, Clone)]
pub struct DfewmaState {
    engine: Engine,
}

impl DfewmaState {
    pub fn new(reference: &[Vec<f64>], cfg: &ChartConfig) -> Result<Self> {
        Ok(Self {
            engine: Engine::new(Kind::TwoSided, reference, cfg)?,
        })
    }

    pub fn update(&mut self, v: &[f64]) -> Result<ChartStep> {
        self.engine.update(v)
    }

    pub fn steps(&self) -> usize {
        self.engine.steps()
    }

    pub fn dim(&self) -> usize {
        self.engine.dim
    }

    pub fn config(&self) -> &ChartConfig {
        &self.engine.cfg
    }

    pub fn limits(&self) -> &[f64] {
        &self.engine.limits
    }
}

pub fn udfm_update(state: &mut UdfmState, x: f64) -> Result<ChartStep> {
    state.update(x)
}

pub fn dfewma_update(state: &mut DfewmaState, v: &[f64]) -> Result<ChartStep> {
    state.update(v)
}
