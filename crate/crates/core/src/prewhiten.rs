//! Univariate autoregressive prewhitening.
//!
//! Models are fitted by Yule–Walker (Levinson–Durbin on the biased sample
//! autocovariance), which always gives a causal filter.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default maximum order for AIC selection.
pub const DEFAULT_P_MAX: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ARModel {
    pub coefficients: Vec<f64>,
    pub mean: f64,
    pub innovation_variance: f64,
}

impl ARModel {
    pub fn order(&self) -> usize {
        self.coefficients.len()
    }

    /// One-step prediction error for `x_new` given `history` in time order
    /// (most recent last). Missing lags are taken to equal the mean.
    pub fn residual(&self, history: &[f64], x_new: f64) -> f64 {
        let mut r = x_new - self.mean;
        for (i, phi) in self.coefficients.iter().enumerate() {
            let lagged = history
                .len()
                .checked_sub(i + 1)
                .map_or(self.mean, |pos| history[pos]);
            r -= phi * (lagged - self.mean);
        }
        r
    }
}

/// How the AR order is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArOrder {
    Fixed(usize),
    Aic { p_max: usize },
}

impl Default for ArOrder {
    fn default() -> Self {
        ArOrder::Aic { p_max: DEFAULT_P_MAX }
    }
}

fn mean_and_autocovariance(series: &[f64], max_lag: usize) -> Result<(f64, Vec<f64>)> {
    if let Some(row) = series.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row, column: 0 });
    }
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let acov: Vec<f64> = (0..=max_lag)
        .map(|k| c[..n - k].iter().zip(&c[k..]).map(|(a, b)| a * b).sum::<f64>() / n as f64)
        .collect();
    if !(acov[0] > 0.0) {
        return Err(Error::DegenerateVariance);
    }
    Ok((mean, acov))
}

/// Levinson–Durbin recursion. Entry `k` holds `(φ for order k, σ²_k)`.
fn levinson_durbin(acov: &[f64]) -> Vec<(Vec<f64>, f64)> {
    let floor = acov[0] * 1e-15;
    let mut out = Vec::with_capacity(acov.len());
    let mut phi: Vec<f64> = Vec::new();
    let mut sigma2 = acov[0];
    out.push((phi.clone(), sigma2));
    for k in 1..acov.len() {
        let mut num = acov[k];
        for j in 1..k {
            num -= phi[j - 1] * acov[k - j];
        }
        let kappa = (num / sigma2).clamp(-1.0, 1.0);
        let mut next = vec![0.0; k];
        for j in 1..k {
            next[j - 1] = phi[j - 1] - kappa * phi[k - j - 1];
        }
        next[k - 1] = kappa;
        phi = next;
        sigma2 = (sigma2 * (1.0 - kappa * kappa)).max(floor);
        out.push((phi.clone(), sigma2));
    }
    out
}

fn check_len(series: &[f64], p: usize) -> Result<()> {
    if series.len() <= p + 1 {
        return Err(Error::TooShort {
            len: series.len(),
            needed: p + 2,
        });
    }
    Ok(())
}

pub fn fit_ar(series: &[f64], p: usize) -> Result<ARModel> {
    check_len(series, p)?;
    let (mean, acov) = mean_and_autocovariance(series, p)?;
    let (coefficients, innovation_variance) = levinson_durbin(&acov).pop().expect("order 0 always present");
    Ok(ARModel {
        coefficients,
        mean,
        innovation_variance,
    })
}

fn aic_path(series: &[f64], p_max: usize) -> Result<(f64, Vec<(Vec<f64>, f64)>, usize)> {
    check_len(series, p_max)?;
    let (mean, acov) = mean_and_autocovariance(series, p_max)?;
    let path = levinson_durbin(&acov);
    let n = series.len() as f64;
    let mut best = (f64::INFINITY, 0usize);
    for (p, (_, s2)) in path.iter().enumerate() {
        let aic = n * s2.ln() + 2.0 * p as f64;
        if aic < best.0 {
            best = (aic, p);
        }
    }
    Ok((mean, path, best.1))
}

/// Order minimizing `n·ln σ̂²_p + 2p` over `0..=p_max`, ties to the smaller order.
pub fn select_order_aic(series: &[f64], p_max: usize) -> Result<usize> {
    aic_path(series, p_max).map(|(_, _, p)| p)
}

pub fn fit_ar_with(series: &[f64], order: ArOrder) -> Result<ARModel> {
    match order {
        ArOrder::Fixed(p) => fit_ar(series, p),
        ArOrder::Aic { p_max } => {
            let (mean, mut path, p) = aic_path(series, p_max)?;
            let (coefficients, innovation_variance) = path.swap_remove(p);
            Ok(ARModel {
                coefficients,
                mean,
                innovation_variance,
            })
        }
    }
}

/// `(x_new − mean) − Σ φ_i (history_{t−i} − mean)`; `history` is in time order.
pub fn filter_residual(model: &ARModel, history: &[f64], x_new: f64) -> f64 {
    model.residual(history, x_new)
}

/// Streaming residual filter holding the last `p` raw values.
#[derive(Debug, Clone)]
pub struct ARFilter {
    model: ARModel,
    history: VecDeque<f64>,
}

impl ARFilter {
    pub fn new(model: ARModel) -> Self {
        let cap = model.order();
        Self {
            model,
            history: VecDeque::with_capacity(cap),
        }
    }

    /// Starts the filter with prior observations (time order), e.g. the end
    /// of the series the model was fitted on.
    pub fn with_history(model: ARModel, prior: &[f64]) -> Self {
        let mut f = Self::new(model);
        let p = f.model.order();
        for &x in &prior[prior.len().saturating_sub(p)..] {
            f.history.push_back(x);
        }
        f
    }

    pub fn model(&self) -> &ARModel {
        &self.model
    }

    pub fn push(&mut self, x: f64) -> f64 {
        let p = self.model.order();
        let hist = self.history.make_contiguous();
        let r = self.model.residual(hist, x);
        if p > 0 {
            if self.history.len() == p {
                self.history.pop_front();
            }
            self.history.push_back(x);
        }
        r
    }

    /// Residuals of a whole series starting from the current state.
    pub fn filter_series(&mut self, series: &[f64]) -> Vec<f64> {
        series.iter().map(|&x| self.push(x)).collect()
    }
}
