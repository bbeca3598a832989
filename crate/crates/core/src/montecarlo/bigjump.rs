use serde::Serialize;

use super::{run_chunks, McOptions, TailEstimate};
use crate::chain::{encode, ln_abs_d, signed_log_add, simulate_path_indexed, PathRecord};
use crate::error::{Error, Result};
use crate::law::{softplus, CoefficientLaw};
use crate::stats::{self, wilson, Proportion};

/// Conditional samples required before a conditional estimate is reported.
pub const MIN_CONDITIONAL: u64 = 100;

/// Grid scanned by [`auto_tune`].
pub const C_GRID: [f64; 15] = [
    1.25, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 12.0, 16.0, 20.0, 25.0, 32.0,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BigJumpParams {
    pub c: f64,
    pub epsilon: f64,
    /// Drift `a = −E log|A|`.
    pub a: f64,
}

impl BigJumpParams {
    pub fn new(c: f64, epsilon: f64, a: f64) -> Result<Self> {
        if !(c > 1.0 && c.is_finite()) {
            return Err(Error::Config(format!("big-jump c must exceed 1, got {c}")));
        }
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::Config(format!("big-jump drift must be positive, got {a}")));
        }
        if !(epsilon > 0.0 && epsilon < a) {
            return Err(Error::Config(format!("epsilon must lie in (0, {a}), got {epsilon}")));
        }
        Ok(Self { c, epsilon, a })
    }
}

/// Per-step flags of the three defining conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct KFlags {
    pub k: usize,
    pub window: bool,
    pub jump: bool,
    pub descent: bool,
}

impl KFlags {
    pub fn all(&self) -> bool {
        self.window && self.jump && self.descent
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BigJumpReport {
    /// First step whose three conditions all hold.
    pub matched_k: Option<usize>,
    pub n_matched: usize,
    /// More than one step matched. Cannot happen when `x > c`.
    pub overlap: bool,
    pub flags: Vec<KFlags>,
}

/// Evaluates the big-jump events at every step of a recorded path, all in logs.
///
/// Step `k` matches when `1/c < D_{k−1} ≤ c`, `A_k/c + B_k > x·e^{c+(n−k)(a+ε)}`
/// and `e^{−c−j(a+ε)} ≤ D_{k+j}/D_k ≤ e^{c−j(a−ε)}` for `j = 0..=n−k`.
pub fn big_jump_classify(path: &PathRecord, log_x: f64, p: &BigJumpParams) -> BigJumpReport {
    let n = path.coeffs.len();
    let ln_c = p.c.ln();
    let signed_ln = |x: f64| (x.signum(), ln_abs_d(x));
    let mut flags = Vec::with_capacity(n);
    for k in 1..=n {
        let (s_prev, l_prev) = signed_ln(path.states[k - 1]);
        let window = s_prev > 0.0 && l_prev > -ln_c && l_prev <= ln_c;

        let (a, b) = path.coeffs[k - 1];
        let (s, l) = signed_log_add(a.sign(), a.ln_abs - ln_c, b.sign(), b.ln_abs);
        let m = (n - k) as f64;
        let jump = s > 0.0 && l > log_x + p.c + m * (p.a + p.epsilon);

        let (s_k, l_k) = signed_ln(path.states[k]);
        let descent = s_k > 0.0
            && (1..=n - k).all(|j| {
                let (s_j, l_j) = signed_ln(path.states[k + j]);
                let r = l_j - l_k;
                let jf = j as f64;
                s_j > 0.0 && r >= -p.c - jf * (p.a + p.epsilon) && r <= p.c - jf * (p.a - p.epsilon)
            });
        flags.push(KFlags {
            k,
            window,
            jump,
            descent,
        });
    }
    let n_matched = flags.iter().filter(|f| f.all()).count();
    BigJumpReport {
        matched_k: flags.iter().find(|f| f.all()).map(|f| f.k),
        n_matched,
        overlap: n_matched > 1,
        flags,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BigJumpEstimate {
    pub params: BigJumpParams,
    pub n: u64,
    pub log_x: f64,
    /// `P{D_n > x}` over all paths.
    pub tail: TailEstimate,
    /// `P{∪Ω^D_k | D_n > x}` over the conditional sample.
    pub conditional: TailEstimate,
    /// Paths whose events overlapped.
    pub overlaps: u64,
}

/// Conditional big-jump probability for each `c` in `cs`, from one set of paths.
///
/// The conditioning event does not involve `c`, so every estimate shares the
/// same conditional sample.
pub fn conditional_big_jump_sweep(
    law: &CoefficientLaw,
    n: u64,
    log_x: f64,
    cs: &[f64],
    epsilon: f64,
    a: f64,
    opts: McOptions,
) -> Result<Vec<BigJumpEstimate>> {
    let params: Vec<BigJumpParams> = cs
        .iter()
        .map(|&c| BigJumpParams::new(c, epsilon, a))
        .collect::<Result<_>>()?;
    if !(law.flags().a_positive && law.flags().b_nonnegative) {
        return Err(Error::RegimeHypothesisViolated(
            "big-jump events need A > 0 and B ≥ 0".into(),
        ));
    }
    if n == 0 {
        return Err(Error::Config("big-jump horizon must be at least 1".into()));
    }
    let threshold = softplus(log_x);
    let width = 1 + 2 * params.len();
    let counts = run_chunks(opts.n_paths, opts.workers, width, |start, end| {
        let mut c = vec![0u64; width];
        for idx in start..end {
            let path = simulate_path_indexed(law, n as usize, opts.d0, opts.seed, idx)
                .expect("validated inputs");
            if path.states[n as usize] <= threshold {
                continue;
            }
            c[0] += 1;
            for (i, p) in params.iter().enumerate() {
                let r = big_jump_classify(&path, log_x, p);
                c[1 + 2 * i] += u64::from(r.matched_k.is_some());
                c[2 + 2 * i] += u64::from(r.overlap);
            }
        }
        c
    })?;
    let hits = counts[0];
    if hits < MIN_CONDITIONAL {
        return Err(Error::TooFewHits {
            hits,
            required: MIN_CONDITIONAL,
        });
    }
    let tail = TailEstimate::from_counts(hits, opts.n_paths, opts.seed, n);
    Ok(params
        .iter()
        .enumerate()
        .map(|(i, &p)| BigJumpEstimate {
            params: p,
            n,
            log_x,
            tail,
            conditional: TailEstimate::from_counts(counts[1 + 2 * i], hits, opts.seed, n),
            overlaps: counts[2 + 2 * i],
        })
        .collect())
}

/// `P{∪Ω^D_k | D_n > x}` by plain conditioning.
pub fn conditional_big_jump_prob(
    law: &CoefficientLaw,
    n: u64,
    log_x: f64,
    params: BigJumpParams,
    opts: McOptions,
) -> Result<BigJumpEstimate> {
    let mut v = conditional_big_jump_sweep(law, n, log_x, &[params.c], params.epsilon, params.a, opts)?;
    Ok(v.remove(0))
}

/// Probability of `Ω(k,n,c)`: every partial sum of `η = log A − ε/2`
/// stays above `−c − n(a+ε)` for `j ≤ n`. One estimate per `c`.
pub fn minorant_event_rates(
    law: &CoefficientLaw,
    n: u64,
    cs: &[f64],
    epsilon: f64,
    a: f64,
    n_paths: u64,
    seed: u64,
) -> Vec<Proportion> {
    let mut rng = stats::aux_rng(seed, 3);
    let mut hits = vec![0u64; cs.len()];
    let floor = n as f64 * (a + epsilon);
    for _ in 0..n_paths {
        let (mut s, mut lowest) = (0.0f64, 0.0f64);
        for _ in 0..n {
            let (ca, _) = law.sample(&mut rng);
            s += ca.ln_abs - epsilon / 2.0;
            lowest = lowest.min(s);
        }
        for (h, &c) in hits.iter_mut().zip(cs) {
            *h += u64::from(lowest >= -c - floor);
        }
    }
    hits.into_iter().map(|h| wilson(h, n_paths)).collect()
}

pub fn minorant_event_rate(
    law: &CoefficientLaw,
    n: u64,
    c: f64,
    epsilon: f64,
    a: f64,
    n_paths: u64,
    seed: u64,
) -> Proportion {
    minorant_event_rates(law, n, &[c], epsilon, a, n_paths, seed)[0]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuneReport {
    pub params: BigJumpParams,
    /// Quasi-stationary `P{1/c < D ≤ c}` at the chosen `c`.
    pub window_rate: f64,
    pub minorant_rate: f64,
    pub target: f64,
}

/// Smallest `c` in [`C_GRID`] with `P{1/c < D ≤ c} ≥ target` and minorant rate
/// `≥ target`, and `ε = a/10`.
pub fn auto_tune(law: &CoefficientLaw, n: u64, a: f64, n_paths: u64, seed: u64) -> Result<TuneReport> {
    const TARGET: f64 = 0.95;
    let epsilon = 0.1 * a;
    BigJumpParams::new(2.0, epsilon, a)?;
    let horizon = (20.0 / a).ceil().max(50.0) as usize;
    let x0 = encode(1.0);
    let states: Vec<f64> = (0..n_paths)
        .map(|i| crate::chain::terminal_state(law, horizon, x0, seed ^ 0x5eed, i))
        .collect();
    let minorant = minorant_event_rates(law, n, &C_GRID, epsilon, a, n_paths, seed);
    for (i, &c) in C_GRID.iter().enumerate() {
        let ln_c = c.ln();
        let inside = states
            .iter()
            .filter(|&&x| x > 0.0 && {
                let l = ln_abs_d(x);
                l > -ln_c && l <= ln_c
            })
            .count();
        let window_rate = inside as f64 / n_paths as f64;
        if window_rate >= TARGET && minorant[i].estimate >= TARGET {
            return Ok(TuneReport {
                params: BigJumpParams::new(c, epsilon, a)?,
                window_rate,
                minorant_rate: minorant[i].estimate,
                target: TARGET,
            });
        }
    }
    Err(Error::Config(format!(
        "no c up to {} reaches the {TARGET} tuning target",
        C_GRID[C_GRID.len() - 1]
    )))
}
