//! Distribution-free rank charts.
//!
//! [`UdfmState`] is the one-sided univariate chart for deviations from the
//! manifold; [`DfewmaState`] is a two-sided multivariate analogue used for
//! embedded coordinates. Both compute control limits by conditional
//! permutation: the limit at step `n` is the upper `α` quantile of the
//! permuted statistic among relabelings whose last `w` statistics stayed
//! below the limits actually used at those steps.

mod chart;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use chart::{dfewma_update, udfm_update, ChartConfig, ChartStep, DfewmaState, UdfmState};

use crate::error::{Error, Result};

/// Moments of a rank score under exchangeability in a pooled sample of size `n_pooled`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankMoments {
    pub n_pooled: usize,
    pub mu: f64,
    pub sigma2: f64,
    pub cov: f64,
}

/// Moments of `Z = max(0, R − (N+1)/2)/N` for a uniformly random rank `R`.
pub fn rank_moments(n_pooled: usize) -> RankMoments {
    assert!(n_pooled >= 2, "pooled size must be at least 2");
    let n = n_pooled as f64;
    let n2 = n * n;
    // Each moment is one division of integer-valued numerator and denominator.
    let (mu, var_num, var_den) = if n_pooled.is_multiple_of(2) {
        (0.125, 5.0 * n2 - 8.0, 192.0 * n2)
    } else {
        ((n2 - 1.0) / (8.0 * n2), (n2 - 1.0) * (5.0 * n2 + 3.0), 192.0 * n2 * n2)
    };
    RankMoments {
        n_pooled,
        mu,
        sigma2: var_num / var_den,
        cov: -var_num / (var_den * (n - 1.0)),
    }
}

/// Moments of the centered rank `(R − (N+1)/2)/N`.
pub fn centered_rank_moments(n_pooled: usize) -> RankMoments {
    assert!(n_pooled >= 2, "pooled size must be at least 2");
    let n = n_pooled as f64;
    RankMoments {
        n_pooled,
        mu: 0.0,
        sigma2: (n * n - 1.0) / (12.0 * n * n),
        cov: -(n + 1.0) / (12.0 * n * n),
    }
}

/// `Var(Σ_{k<L} (1−λ)^k Z_k)` for `L` distinct ranks drawn without replacement.
pub fn ewma_variance(lambda: f64, window_len: usize, moments: &RankMoments) -> f64 {
    let q = 1.0 - lambda;
    let (mut a, mut s, mut p) = (0.0, 0.0, 1.0);
    for _ in 0..window_len {
        a += p * p;
        s += p;
        p *= q;
    }
    let nm1 = moments.n_pooled as f64 - 1.0;
    moments.sigma2 * (1.0 + 1.0 / nm1) * a - moments.sigma2 * s * s / nm1
}

/// Ranks with ties given their average rank.
pub(crate) fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = r;
        }
        i = j + 1;
    }
    ranks
}

fn score(rank: f64, n_pooled: usize) -> f64 {
    let n = n_pooled as f64;
    (rank - (n + 1.0) / 2.0).max(0.0) / n
}

fn t_from_ranks(candidate_ranks: impl Iterator<Item = f64>, m: usize, n: usize) -> f64 {
    let big_n = m + n;
    let mo = rank_moments(big_n);
    let num: f64 = candidate_ranks.map(|r| score(r, big_n) - mo.mu).sum();
    let nf = n as f64;
    let scale = if big_n > 1 { 1.0 - (nf - 1.0) / (big_n as f64 - 1.0) } else { 1.0 };
    num / (mo.sigma2.sqrt() * (nf * scale).sqrt())
}

/// Two-sample statistic `T_{m,n}` for `candidates` against `reference`.
/// Tied values receive average ranks.
pub fn two_sample_t(reference: &[f64], candidates: &[f64]) -> Result<f64> {
    if reference.is_empty() || candidates.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let pooled: Vec<f64> = reference.iter().chain(candidates).copied().collect();
    if let Some(row) = pooled.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row, column: 0 });
    }
    let ranks = midranks(&pooled);
    let m = reference.len();
    Ok(t_from_ranks(ranks[m..].iter().copied(), m, candidates.len()))
}

/// Index of the upper-`α` order statistic in a sample of `len` values sorted descending.
pub(crate) fn upper_quantile_index(alpha: f64, len: usize) -> usize {
    ((alpha * len as f64).ceil() as usize).clamp(1, len) - 1
}

/// Upper-`α` quantile of `values` by the ceil-index order statistic.
pub(crate) fn upper_quantile(values: &mut [f64], alpha: f64) -> f64 {
    let idx = upper_quantile_index(alpha, values.len());
    let (_, v, _) = values.select_nth_unstable_by(idx, |a, b| b.total_cmp(a));
    *v
}

/// Upper-`α` quantile of `T*_{m,n}` over `replicates` uniformly random
/// relabelings of `pooled` (first `m` reference, last `n` candidates).
pub fn permutation_quantile<R: Rng + ?Sized>(
    pooled: &[f64],
    m: usize,
    n: usize,
    alpha: f64,
    replicates: usize,
    rng: &mut R,
) -> Result<f64> {
    if m == 0 || n == 0 || m + n != pooled.len() {
        return Err(Error::invalid("m, n", format!("need m, n >= 1 and m + n = {}", pooled.len())));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("alpha", "must lie in (0, 1)"));
    }
    if replicates < 200 {
        return Err(Error::invalid("replicates", "need at least 200"));
    }
    let ranks = midranks(pooled);
    let mut stats: Vec<f64> = (0..replicates)
        .map(|_| {
            let pick = index::sample(rng, m + n, n);
            t_from_ranks(pick.iter().map(|i| ranks[i]), m, n)
        })
        .collect();
    Ok(upper_quantile(&mut stats, alpha))
}
