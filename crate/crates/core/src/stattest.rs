//! One-sided Wilcoxon rank-sum test (and a paired signed-rank variant) for
//! comparing per-fold cross-validation scores against a baseline.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.05;

/// Pooled sample size up to which tie-free data get the exact null
/// distribution.
pub const EXACT_MAX_TOTAL: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Alternative {
    /// `x` tends to be larger than `y`.
    Greater,
    /// `x` tends to be smaller than `y`.
    Less,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSumResult {
    /// Sum of the pooled midranks of `x`.
    pub statistic: f64,
    pub p_one_sided: f64,
    pub method: Method,
    pub n: usize,
    pub m: usize,
    pub alpha: f64,
}

impl RankSumResult {
    pub fn significant(&self) -> bool {
        self.p_one_sided < self.alpha
    }

    /// `"*"` when significant, empty otherwise.
    pub fn star(&self) -> &'static str {
        if self.significant() {
            "*"
        } else {
            ""
        }
    }
}

/// Midranks (1-based) of `values`, plus the tie group sizes.
pub fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i..j share the average of ranks i+1..=j
        let rank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = rank;
        }
        if j - i > 1 {
            ties.push(j - i);
        }
        i = j;
    }
    (ranks, ties)
}

/// `counts[s]` = number of `n`-subsets of {1..total} whose sum is `s`.
fn subset_sum_counts(total: usize, n: usize) -> Vec<u64> {
    let max_sum = total * (total + 1) / 2;
    // table[j][s]: subsets of size j with sum s among the ranks seen so far
    let mut table = vec![vec![0u64; max_sum + 1]; n + 1];
    table[0][0] = 1;
    for rank in 1..=total {
        for j in (1..=n.min(rank)).rev() {
            for s in (rank..=max_sum).rev() {
                table[j][s] += table[j - 1][s - rank];
            }
        }
    }
    table.swap_remove(n)
}

fn check_samples(x: &[f64], y: &[f64]) -> Result<()> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::invalid("rank-sum test needs at least one value per sample"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("rank-sum test needs finite values"));
    }
    Ok(())
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("valid parameters")
}

fn clamp_p(p: f64) -> f64 {
    p.clamp(f64::MIN_POSITIVE, 1.0)
}

pub fn wilcoxon_rank_sum(x: &[f64], y: &[f64], alternative: Alternative) -> Result<RankSumResult> {
    wilcoxon_rank_sum_alpha(x, y, alternative, DEFAULT_ALPHA)
}

pub fn wilcoxon_rank_sum_alpha(
    x: &[f64],
    y: &[f64],
    alternative: Alternative,
    alpha: f64,
) -> Result<RankSumResult> {
    check_samples(x, y)?;
    let (n, m) = (x.len(), y.len());
    let total = n + m;
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let statistic: f64 = ranks[..n].iter().sum();

    if total <= EXACT_MAX_TOTAL && ties.is_empty() {
        let counts = subset_sum_counts(total, n);
        let w = statistic as usize;
        let all: u64 = counts.iter().sum();
        let tail: u64 = match alternative {
            Alternative::Greater => counts[w..].iter().sum(),
            Alternative::Less => counts[..=w].iter().sum(),
        };
        return Ok(RankSumResult {
            statistic,
            p_one_sided: tail as f64 / all as f64,
            method: Method::Exact,
            n,
            m,
            alpha,
        });
    }

    let (nf, mf, tf) = (n as f64, m as f64, total as f64);
    let mean = nf * (tf + 1.0) / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (tf * (tf - 1.0));
    let variance = nf * mf / 12.0 * ((tf + 1.0) - tie_term);
    let p = if variance <= 0.0 {
        1.0
    } else {
        let sd = variance.sqrt();
        let normal = standard_normal();
        match alternative {
            Alternative::Greater => normal.sf((statistic - mean - 0.5) / sd),
            Alternative::Less => normal.cdf((statistic - mean + 0.5) / sd),
        }
    };
    Ok(RankSumResult {
        statistic,
        p_one_sided: clamp_p(p),
        method: Method::NormalApprox,
        n,
        m,
        alpha,
    })
}

/// Paired Wilcoxon signed-rank test on `x[i] - y[i]`, for sensitivity
/// analysis when fold scores are treated as matched pairs. Zero differences
/// are dropped. `statistic` is the sum of ranks of positive differences.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64], alternative: Alternative) -> Result<RankSumResult> {
    check_samples(x, y)?;
    if x.len() != y.len() {
        return Err(Error::invalid("signed-rank test needs paired samples of equal length"));
    }
    let diffs: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(RankSumResult {
            statistic: 0.0,
            p_one_sided: 1.0,
            method: Method::Exact,
            n: x.len(),
            m: y.len(),
            alpha: DEFAULT_ALPHA,
        });
    }
    let magnitudes: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let (ranks, ties) = midranks(&magnitudes);
    let statistic: f64 = ranks.iter().zip(&diffs).filter(|(_, d)| **d > 0.0).map(|(r, _)| r).sum();

    if n <= EXACT_MAX_TOTAL && ties.is_empty() {
        // Each rank independently carries a + or - sign under the null.
        let max_sum = n * (n + 1) / 2;
        let mut counts = vec![0u64; max_sum + 1];
        counts[0] = 1;
        for rank in 1..=n {
            for s in (rank..=max_sum).rev() {
                counts[s] += counts[s - rank];
            }
        }
        let v = statistic as usize;
        let tail: u64 = match alternative {
            Alternative::Greater => counts[v..].iter().sum(),
            Alternative::Less => counts[..=v].iter().sum(),
        };
        return Ok(RankSumResult {
            statistic,
            p_one_sided: tail as f64 / (1u64 << n) as f64,
            method: Method::Exact,
            n: x.len(),
            m: y.len(),
            alpha: DEFAULT_ALPHA,
        });
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let variance = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0
        - ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    let sd = variance.sqrt();
    let normal = standard_normal();
    let p = match alternative {
        Alternative::Greater => normal.sf((statistic - mean - 0.5) / sd),
        Alternative::Less => normal.cdf((statistic - mean + 0.5) / sd),
    };
    Ok(RankSumResult {
        statistic,
        p_one_sided: clamp_p(p),
        method: Method::NormalApprox,
        n: x.len(),
        m: y.len(),
        alpha: DEFAULT_ALPHA,
    })
}
