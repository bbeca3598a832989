//! Parallel Monte Carlo estimation of tail probabilities.
//!
//! Path `i` always draws from the stream keyed by `(seed, i)`. Paths are
//! grouped in fixed chunks, each chunk yields integer counters, and the
//! counters are summed, so hit counts do not depend on the worker count.

mod bigjump;

pub use bigjump::{
    auto_tune, big_jump_classify, conditional_big_jump_prob, conditional_big_jump_sweep,
    minorant_event_rate,
    minorant_event_rates, BigJumpEstimate, BigJumpParams, BigJumpReport, KFlags, TuneReport,
    C_GRID, MIN_CONDITIONAL,
};

use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotics::{horizon_rule, Regime, RegimeConfig, HORIZON_CAP};
use crate::chain::{encode, step_unchecked};
use crate::error::{Error, Result};
use crate::law::CoefficientLaw;
use crate::stats::{self, wilson};

/// Paths per work unit.
pub const CHUNK: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McOptions {
    pub n_paths: u64,
    pub seed: u64,
    pub workers: usize,
    pub d0: f64,
}

impl Default for McOptions {
    fn default() -> Self {
        Self {
            n_paths: 100_000,
            seed: 1,
            workers: 1,
            d0: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailEstimate {
    pub p_hat: f64,
    pub n_samples: u64,
    pub n_hits: u64,
    pub stderr: f64,
    pub ci95: (f64, f64),
    pub seed: u64,
    pub horizon_n: u64,
}

impl TailEstimate {
    pub fn from_counts(hits: u64, samples: u64, seed: u64, horizon_n: u64) -> Self {
        let w = wilson(hits, samples);
        let p = if samples == 0 { f64::NAN } else { hits as f64 / samples as f64 };
        TailEstimate {
            p_hat: p,
            n_samples: samples,
            n_hits: hits,
            stderr: (p * (1.0 - p) / samples as f64).sqrt(),
            ci95: (w.lo, w.hi),
            seed,
            horizon_n,
        }
    }
}

/// Event on the signed-log state `X_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Event {
    /// `X > t`
    Above(f64),
    /// `X < −t`
    Below(f64),
    /// `|X| > t`
    AbsAbove(f64),
    /// `lo < X ≤ hi`
    Between(f64, f64),
    Positive,
    Zero,
}

impl Event {
    /// `D > x`.
    pub fn d_above(x: f64) -> Self {
        Event::Above(encode(x))
    }

    /// `D > e^{log_x}` for levels past the float range.
    pub fn d_above_log(log_x: f64) -> Self {
        Event::Above(crate::law::softplus(log_x))
    }

    #[inline]
    pub fn hit(&self, x: f64) -> bool {
        match *self {
            Event::Above(t) => x > t,
            Event::Below(t) => x < -t,
            Event::AbsAbove(t) => x.abs() > t,
            Event::Between(lo, hi) => lo < x && x <= hi,
            Event::Positive => x > 0.0,
            Event::Zero => x == 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Probe {
    /// Step at which the event is checked.
    pub n: u64,
    pub event: Event,
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Runs `per_chunk` on every chunk of path indices and sums the counters.
pub(crate) fn run_chunks<F>(n_paths: u64, workers: usize, width: usize, per_chunk: F) -> Result<Vec<u64>>
where
    F: Fn(u64, u64) -> Vec<u64> + Sync,
{
    let chunks = n_paths.div_ceil(CHUNK);
    let add = |mut a: Vec<u64>, b: Vec<u64>| {
        for (x, y) in a.iter_mut().zip(b) {
            *x += y;
        }
        a
    };
    pool(workers)?.install(|| {
        Ok((0..chunks)
            .into_par_iter()
            .map(|c| {
                let start = c * CHUNK;
                let end = (start + CHUNK).min(n_paths);
                per_chunk(start, end)
            })
            .reduce(|| vec![0u64; width], add))
    })
}

/// Estimates several events at several steps from one set of paths.
pub fn estimate_tail_grid(
    law: &CoefficientLaw,
    probes: &[Probe],
    opts: McOptions,
) -> Result<Vec<TailEstimate>> {
    if probes.is_empty() {
        return Ok(Vec::new());
    }
    if opts.d0.is_nan() {
        return Err(Error::NanInput("estimate_tail"));
    }
    let horizon = probes.iter().map(|p| p.n).max().unwrap_or(0);
    let mut by_step: Vec<Vec<usize>> = vec![Vec::new(); horizon as usize + 1];
    for (i, p) in probes.iter().enumerate() {
        by_step[p.n as usize].push(i);
    }
    let x0 = encode(opts.d0);
    let counts = run_chunks(opts.n_paths, opts.workers, probes.len(), |start, end| {
        let mut c = vec![0u64; probes.len()];
        for idx in start..end {
            let mut rng = stats::path_rng(opts.seed, idx);
            let mut x = x0;
            for &i in &by_step[0] {
                c[i] += u64::from(probes[i].event.hit(x));
            }
            for here in &by_step[1..] {
                let (a, b) = law.sample(&mut rng);
                x = step_unchecked(x, a, b);
                for &i in here {
                    c[i] += u64::from(probes[i].event.hit(x));
                }
            }
        }
        c
    })?;
    Ok(probes
        .iter()
        .zip(counts)
        .map(|(p, h)| TailEstimate::from_counts(h, opts.n_paths, opts.seed, p.n))
        .collect())
}

/// `P{D_n > x}` from `opts.n_paths` independent paths.
pub fn estimate_tail(law: &CoefficientLaw, n: u64, x: f64, opts: McOptions) -> Result<TailEstimate> {
    Ok(estimate_tail_grid(
        law,
        &[Probe {
            n,
            event: Event::d_above(x),
        }],
        opts,
    )?[0])
}

/// Quasi-stationary `P{D_∞ > x}` at the horizon rule's `n`, one estimate per `x`.
pub fn estimate_stationary_tail(
    law: &CoefficientLaw,
    cfg: &RegimeConfig,
    xs: &[f64],
    opts: McOptions,
) -> Result<Vec<TailEstimate>> {
    let probes = xs
        .iter()
        .map(|&x| {
            Ok(Probe {
                n: horizon_rule(cfg, x, HORIZON_CAP)?,
                event: Event::d_above(x),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    estimate_tail_grid(law, &probes, opts)
}

/// `P{D_∞ > 0}` with a count of exact zeros as a smoke test for `P{D_∞ = 0} = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignEstimate {
    pub positive: TailEstimate,
    pub zero_hits: u64,
}

/// Horizon used for sign estimates: `max(50, ceil(20/a))`.
pub fn sign_horizon(cfg: &RegimeConfig) -> Result<u64> {
    if cfg.regime == Regime::AtomAtZero || !cfg.a.is_finite() {
        return horizon_rule(cfg, 1.0, HORIZON_CAP);
    }
    let n = (20.0 / cfg.a).ceil().max(50.0);
    if n > HORIZON_CAP as f64 {
        return Err(Error::HorizonOverflow {
            horizon: n as u64,
            cap: HORIZON_CAP,
        });
    }
    Ok(n as u64)
}

pub fn estimate_sign_prob(
    law: &CoefficientLaw,
    cfg: &RegimeConfig,
    opts: McOptions,
) -> Result<SignEstimate> {
    let n = sign_horizon(cfg)?;
    let est = estimate_tail_grid(
        law,
        &[
            Probe {
                n,
                event: Event::Positive,
            },
            Probe {
                n,
                event: Event::Zero,
            },
        ],
        opts,
    )?;
    Ok(SignEstimate {
        positive: est[0],
        zero_hits: est[1].n_hits,
    })
}

/// Terminal states `X_n` of paths `0..n_paths`, in path order.
pub fn sample_terminal_states(law: &CoefficientLaw, n: u64, opts: McOptions) -> Result<Vec<f64>> {
    let x0 = encode(opts.d0);
    let chunks = opts.n_paths.div_ceil(CHUNK);
    let parts: Vec<Vec<f64>> = pool(opts.workers)?.install(|| {
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let start = c * CHUNK;
                let end = (start + CHUNK).min(opts.n_paths);
                (start..end)
                    .map(|i| crate::chain::terminal_state(law, n as usize, x0, opts.seed, i))
                    .collect()
            })
            .collect()
    });
    Ok(parts.concat())
}
