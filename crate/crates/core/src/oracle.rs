//! Exact law of `D_n` for finitely supported coefficients, by enumerating
//! every coefficient sequence.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::law::DiscreteLaw;

/// Largest number of sequences enumerated by default.
pub const SEQUENCE_BUDGET: f64 = 1e8;
const MERGE_ABS: f64 = 1e-12;
const MERGE_REL: f64 = 1e-12;
const COMPACT_EVERY: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub budget: f64,
    /// Drop branches whose probability falls below this. Off when `None`.
    pub prune_below: Option<f64>,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            budget: SEQUENCE_BUDGET,
            prune_below: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactDistribution {
    pub n: u64,
    pub d0: f64,
    /// Ascending support with merged near-equal points.
    pub support: Vec<(f64, f64)>,
    /// Mass dropped by pruning; an upper bound on the error of any tail.
    pub pruned_mass: f64,
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= MERGE_ABS + MERGE_REL * a.abs().max(b.abs())
}

/// Sorts and merges points that agree within the merge tolerance.
fn compact(points: &mut Vec<(f64, f64)>) {
    points.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(points.len());
    for &(v, p) in points.iter() {
        match out.last_mut() {
            Some(last) if close(last.0, v) => last.1 += p,
            _ => out.push((v, p)),
        }
    }
    *points = out;
}

struct Walker<'a> {
    atoms: &'a [((f64, f64), f64)],
    n: usize,
    prune: f64,
    leaves: Vec<(f64, f64)>,
    pruned: f64,
}

impl Walker<'_> {
    fn descend(&mut self, depth: usize, d: f64, p: f64) {
        if depth == self.n {
            self.leaves.push((d, p));
            if self.leaves.len() >= COMPACT_EVERY {
                compact(&mut self.leaves);
            }
            return;
        }
        for &((a, b), q) in self.atoms {
            let pq = p * q;
            if pq < self.prune {
                self.pruned += pq;
                continue;
            }
            self.descend(depth + 1, a * d + b, pq);
        }
    }
}

pub fn exact_distribution(law: &DiscreteLaw, n: u64, d0: f64) -> Result<ExactDistribution> {
    exact_distribution_with(law, n, d0, OracleOptions::default())
}

/// Enumerates all `m^n` sequences depth first.
pub fn exact_distribution_with(
    law: &DiscreteLaw,
    n: u64,
    d0: f64,
    opts: OracleOptions,
) -> Result<ExactDistribution> {
    if d0.is_nan() {
        return Err(Error::NanInput("exact_distribution"));
    }
    let sequences = (law.atoms().len() as f64).powf(n as f64);
    if sequences > opts.budget {
        return Err(Error::BudgetExceeded {
            sequences,
            budget: opts.budget,
        });
    }
    let mut w = Walker {
        atoms: law.atoms(),
        n: n as usize,
        prune: opts.prune_below.unwrap_or(0.0),
        leaves: Vec::new(),
        pruned: 0.0,
    };
    w.descend(0, d0, 1.0);
    compact(&mut w.leaves);
    Ok(ExactDistribution {
        n,
        d0,
        support: w.leaves,
        pruned_mass: w.pruned,
    })
}

impl ExactDistribution {
    pub fn total_mass(&self) -> f64 {
        sum_ascending(self.support.iter().map(|s| s.1))
    }

    /// `P{D_n > x}`.
    pub fn tail(&self, x: f64) -> f64 {
        self.prob_where(|v| v > x)
    }

    /// Probability of a predicate on the value, summed from the smallest term up.
    pub fn prob_where(&self, pred: impl Fn(f64) -> bool) -> f64 {
        sum_ascending(self.support.iter().filter(|s| pred(s.0)).map(|s| s.1))
    }

    /// One exact step of the recursion applied to this law.
    pub fn push(&self, law: &DiscreteLaw) -> ExactDistribution {
        let mut pts: Vec<(f64, f64)> = self
            .support
            .iter()
            .flat_map(|&(v, p)| law.atoms().iter().map(move |&((a, b), q)| (a * v + b, p * q)))
            .collect();
        compact(&mut pts);
        ExactDistribution {
            n: self.n + 1,
            d0: self.d0,
            support: pts,
            pruned_mass: self.pruned_mass,
        }
    }

    /// Midpoints between consecutive support points.
    pub fn midpoints(&self) -> Vec<f64> {
        self.support.windows(2).map(|w| 0.5 * (w[0].0 + w[1].0)).collect()
    }
}

fn sum_ascending(probs: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = probs.collect();
    v.sort_by(f64::total_cmp);
    v.into_iter().sum()
}

pub fn exact_tail(law: &DiscreteLaw, n: u64, d0: f64, x: f64) -> Result<f64> {
    Ok(exact_distribution(law, n, d0)?.tail(x))
}

/// Largest value-by-value discrepancy between two supports, or `None` when
/// their sizes differ.
pub fn max_discrepancy(a: &ExactDistribution, b: &ExactDistribution) -> Option<f64> {
    if a.support.len() != b.support.len() {
        return None;
    }
    Some(
        a.support
            .iter()
            .zip(&b.support)
            .map(|(x, y)| (x.0 - y.0).abs().max((x.1 - y.1).abs()))
            .fold(0.0, f64::max),
    )
}
