//! The recursion `D_n = A_n D_{n−1} + B_n` in the signed-log coordinate
//! `X = sign(D)·log(1+|D|)`.
//!
//! The raw value `D` is only formed when `|X| < 30` and both coefficients
//! are moderate; otherwise the update runs on `log|D|` with a signed
//! log-sum, so no intermediate ever overflows.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::law::{ln_expm1, softplus, Coef, CoefficientLaw};
use crate::stats;

/// `|X|` below which `D` is materialized.
pub const MATERIALIZE_BELOW: f64 = 30.0;
const LN_MATERIAL_MAX: f64 = 300.0;

/// `sign(d)·log(1+|d|)`.
#[inline]
pub fn encode(d: f64) -> f64 {
    if d >= 0.0 {
        d.ln_1p()
    } else {
        -(-d).ln_1p()
    }
}

/// `sign(x)·(e^{|x|} − 1)`; overflows to `±∞` past `|x| ≈ 709.8`.
#[inline]
pub fn decode(x: f64) -> f64 {
    if x >= 0.0 {
        x.exp_m1()
    } else {
        -(-x).exp_m1()
    }
}

/// Encodes a coefficient without forming its value when it is huge.
#[inline]
pub fn encode_coef(c: Coef) -> f64 {
    if c.is_zero() {
        return 0.0;
    }
    if c.ln_abs < LN_MATERIAL_MAX {
        encode(c.value)
    } else {
        c.sign() * softplus(c.ln_abs)
    }
}

/// `log|D|` for the state `x`, `-∞` at zero.
#[inline]
pub fn ln_abs_d(x: f64) -> f64 {
    ln_expm1(x.abs())
}

/// Sum of two signed magnitudes given as `(sign, log|·|)`.
#[inline]
pub fn signed_log_add(s1: f64, l1: f64, s2: f64, l2: f64) -> (f64, f64) {
    if s1 == 0.0 || l1 == f64::NEG_INFINITY {
        return (s2, l2);
    }
    if s2 == 0.0 || l2 == f64::NEG_INFINITY {
        return (s1, l1);
    }
    let (sh, lh, sl, ll) = if l1 >= l2 { (s1, l1, s2, l2) } else { (s2, l2, s1, l1) };
    if sh == sl {
        (sh, lh + (ll - lh).exp().ln_1p())
    } else {
        let r = (-(ll - lh).exp()).ln_1p();
        if r == f64::NEG_INFINITY {
            (0.0, f64::NEG_INFINITY)
        } else {
            (sh, lh + r)
        }
    }
}

/// One step without input validation.
#[inline]
pub fn step_unchecked(x: f64, a: Coef, b: Coef) -> f64 {
    if a.is_zero() || x == 0.0 {
        return encode_coef(b);
    }
    if x.abs() < MATERIALIZE_BELOW && a.ln_abs < LN_MATERIAL_MAX && b.ln_abs < LN_MATERIAL_MAX {
        return encode(a.value * decode(x) + b.value);
    }
    let s_ad = a.sign() * x.signum();
    let l_ad = a.ln_abs + ln_abs_d(x);
    let (s, l) = signed_log_add(s_ad, l_ad, b.sign(), b.ln_abs);
    if s == 0.0 {
        0.0
    } else {
        s * softplus(l)
    }
}

/// `encode(a·decode(x) + b)` in the log domain.
pub fn step_log(x: f64, a: Coef, b: Coef) -> Result<f64> {
    if x.is_nan() || a.ln_abs.is_nan() || b.ln_abs.is_nan() {
        return Err(Error::NanInput("step"));
    }
    Ok(step_unchecked(x, a, b))
}

/// [`step_log`] with plain coefficients.
pub fn step(x: f64, a: f64, b: f64) -> Result<f64> {
    if a.is_nan() || b.is_nan() {
        return Err(Error::NanInput("step"));
    }
    step_log(x, Coef::new(a), Coef::new(b))
}

/// One simulated trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathRecord {
    pub seed: u64,
    pub n: usize,
    /// `X_0, …, X_n`.
    pub states: Vec<f64>,
    /// `(A_k, B_k)` for `k = 1..=n`.
    #[serde(skip)]
    pub coeffs: Vec<(Coef, Coef)>,
}

impl PathRecord {
    /// Replays the coefficients from `X_0`.
    pub fn replay(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n + 1);
        let mut x = self.states[0];
        out.push(x);
        for &(a, b) in &self.coeffs {
            x = step_unchecked(x, a, b);
            out.push(x);
        }
        out
    }

    /// `D_k`, infinite where it leaves the float range.
    pub fn d_values(&self) -> Vec<f64> {
        self.states.iter().map(|&x| decode(x)).collect()
    }

    /// Builds a record from given coefficients, starting at `d0`.
    pub fn from_coeffs(d0: f64, coeffs: Vec<(Coef, Coef)>, seed: u64) -> Self {
        let mut states = Vec::with_capacity(coeffs.len() + 1);
        let mut x = encode(d0);
        states.push(x);
        for &(a, b) in &coeffs {
            x = step_unchecked(x, a, b);
            states.push(x);
        }
        PathRecord {
            seed,
            n: coeffs.len(),
            states,
            coeffs,
        }
    }
}

/// Path `index` of the stream family keyed by `seed`.
pub fn simulate_path_indexed(
    law: &CoefficientLaw,
    n: usize,
    d0: f64,
    seed: u64,
    index: u64,
) -> Result<PathRecord> {
    if n == 0 {
        return Err(Error::Config("path length must be at least 1".into()));
    }
    if d0.is_nan() {
        return Err(Error::NanInput("simulate_path"));
    }
    let mut rng = stats::path_rng(seed, index);
    let coeffs: Vec<(Coef, Coef)> = (0..n).map(|_| law.sample(&mut rng)).collect();
    Ok(PathRecord::from_coeffs(d0, coeffs, seed))
}

pub fn simulate_path(law: &CoefficientLaw, n: usize, d0: f64, seed: u64) -> Result<PathRecord> {
    simulate_path_indexed(law, n, d0, seed, 0)
}

/// Final state `X_n` of path `index`, without storing the trajectory.
#[inline]
pub fn terminal_state(law: &CoefficientLaw, n: usize, x0: f64, seed: u64, index: u64) -> f64 {
    let mut rng = stats::path_rng(seed, index);
    let mut x = x0;
    for _ in 0..n {
        let (a, b) = law.sample(&mut rng);
        x = step_unchecked(x, a, b);
    }
    x
}

/// One draw of the jump `ξ(x) = X' − x` from state `x`.
pub fn jump_sample<R: Rng + ?Sized>(law: &CoefficientLaw, x: f64, rng: &mut R) -> Result<f64> {
    let (a, b) = law.sample(rng);
    Ok(step_log(x, a, b)? - x)
}

/// `D_n` through the backward sum `Π A·d0 + Σ_k (Π_{j<k} A_j) B_k` with fresh
/// draws; returned in the signed-log coordinate.
pub fn backward_sample<R: Rng + ?Sized>(law: &CoefficientLaw, n: usize, d0: f64, rng: &mut R) -> f64 {
    let (mut ps, mut pl) = (1.0, 0.0);
    let (mut ss, mut sl) = (0.0, f64::NEG_INFINITY);
    for _ in 0..n {
        let (a, b) = law.sample(rng);
        let (ts, tl) = (ps * b.sign(), pl + b.ln_abs);
        (ss, sl) = signed_log_add(ss, sl, ts, tl);
        ps *= a.sign();
        pl += a.ln_abs;
    }
    let d = Coef::new(d0);
    (ss, sl) = signed_log_add(ss, sl, ps * d.sign(), pl + d.ln_abs);
    if ss == 0.0 || sl == f64::NEG_INFINITY {
        0.0
    } else {
        ss * softplus(sl)
    }
}

/// Signs of large states and the empirical two-state transition matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignChain {
    pub threshold: f64,
    /// Signs of the selected states `X_k` with `|X_k| > threshold`.
    pub signs: Vec<i8>,
    /// Rows `[from +, from −]`, columns `[to +, to −]`. A row of NaN is undefined.
    pub transition: [[f64; 2]; 2],
    pub row_counts: [u64; 2],
}

impl SignChain {
    pub fn positive_share(&self) -> f64 {
        let pos = self.signs.iter().filter(|s| **s > 0).count();
        pos as f64 / self.signs.len() as f64
    }
}

pub fn sign_chain(path: &PathRecord, threshold: f64) -> Result<SignChain> {
    let signs: Vec<i8> = path
        .states
        .iter()
        .filter(|x| x.abs() > threshold)
        .map(|x| x.signum() as i8)
        .collect();
    if signs.is_empty() {
        return Err(Error::EmptySelection { threshold });
    }
    let mut counts = [[0u64; 2]; 2];
    for w in path.states.windows(2) {
        if w[0].abs() <= threshold || w[1] == 0.0 {
            continue;
        }
        let from = usize::from(w[0] < 0.0);
        let to = usize::from(w[1] < 0.0);
        counts[from][to] += 1;
    }
    let mut transition = [[f64::NAN; 2]; 2];
    let mut row_counts = [0u64; 2];
    for r in 0..2 {
        let tot = counts[r][0] + counts[r][1];
        row_counts[r] = tot;
        if tot > 0 {
            transition[r] = [
                counts[r][0] as f64 / tot as f64,
                counts[r][1] as f64 / tot as f64,
            ];
        }
    }
    Ok(SignChain {
        threshold,
        signs,
        transition,
        row_counts,
    })
}

/// `ζ(x0) = log(A + e^{−x0}(1+B))` for `A > 0`, `B ≥ 0`.
#[inline]
pub fn zeta(a: Coef, b: Coef, x0: f64) -> f64 {
    let l1 = a.ln_abs;
    let l2 = -x0 + if b.is_zero() { 0.0 } else { softplus(b.ln_abs) };
    signed_log_add(1.0, l1, 1.0, l2).1
}

/// Lindley walk `Z_k = max(0, Z_{k−1} + ζ_k)` driven by the path's coefficients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MajorantCoupling {
    pub x0: f64,
    pub zeta: Vec<f64>,
    pub z_path: Vec<f64>,
    /// Estimated `E ζ(x0)` and its standard error.
    pub drift: (f64, f64),
}

impl MajorantCoupling {
    /// Builds the walk for a recorded path. `Z_0 = max(0, X_0 − x0)`.
    pub fn for_path(path: &PathRecord, x0: f64, drift: (f64, f64)) -> Self {
        let zeta: Vec<f64> = path.coeffs.iter().map(|&(a, b)| self::zeta(a, b, x0)).collect();
        let mut z_path = Vec::with_capacity(zeta.len() + 1);
        let mut z = (path.states[0] - x0).max(0.0);
        z_path.push(z);
        for &dz in &zeta {
            z = (z + dz).max(0.0);
            z_path.push(z);
        }
        MajorantCoupling {
            x0,
            zeta,
            z_path,
            drift,
        }
    }

    /// Steps with `X_k > x0 + Z_k` beyond rounding.
    pub fn violations(&self, path: &PathRecord) -> usize {
        path.states
            .iter()
            .zip(&self.z_path)
            .filter(|(x, z)| {
                let bound = self.x0 + *z;
                **x > bound + 1e-10 * (1.0 + bound.abs())
            })
            .count()
    }
}

/// Estimates `E ζ(x0)` with `draws` samples from an auxiliary stream.
pub fn zeta_drift(law: &CoefficientLaw, x0: f64, draws: usize, seed: u64) -> (f64, f64) {
    let mut rng = stats::aux_rng(seed, 2);
    let v: Vec<f64> = (0..draws)
        .map(|_| {
            let (a, b) = law.sample(&mut rng);
            zeta(a, b, x0)
        })
        .collect();
    stats::mean_stderr(&v)
}

/// Simulates a path together with its majorizing Lindley walk.
pub fn coupled_majorant(
    law: &CoefficientLaw,
    n: usize,
    x0: f64,
    d0: f64,
    seed: u64,
) -> Result<(PathRecord, MajorantCoupling)> {
    let f = law.flags();
    if !(f.a_positive && f.b_nonnegative) {
        return Err(Error::RegimeHypothesisViolated(
            "the majorant needs A > 0 and B >= 0".into(),
        ));
    }
    let drift = zeta_drift(law, x0, 100_000, seed);
    if drift.0 >= 0.0 {
        return Err(Error::DriftNotNegative {
            mean: drift.0,
            stderr: drift.1,
        });
    }
    let path = simulate_path(law, n, d0, seed)?;
    let coupling = MajorantCoupling::for_path(&path, x0, drift);
    Ok((path, coupling))
}

/// Counts steps with `|D_k| > |A_k||D_{k−1}| + |B_k|` beyond rounding.
pub fn abs_domination_check(path: &PathRecord) -> usize {
    path.states
        .windows(2)
        .zip(&path.coeffs)
        .filter(|(w, (a, b))| {
            let lhs = ln_abs_d(w[1]);
            let (_, rhs) = signed_log_add(1.0, a.ln_abs + ln_abs_d(w[0]), 1.0, b.ln_abs);
            if lhs == f64::NEG_INFINITY {
                return false;
            }
            lhs > rhs + 1e-12 * (1.0 + rhs.abs())
        })
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::TailModel;
    use crate::law::{DiscreteLaw, ScalarLaw};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn step_examples() {
        assert!(close(step(encode(2.0), 3.0, -1.0).unwrap(), encode(5.0), 1e-15));
        assert_eq!(step(0.0, 7.0, 2.5).unwrap(), encode(2.5));
        assert_eq!(step(1.0, 1.0, 0.0).unwrap(), 1.0);
        assert!(step(f64::NAN, 1.0, 0.0).is_err());
        assert!(step(1.0, f64::NAN, 0.0).is_err());
        assert_eq!(step(55.0, 0.0, -3.0).unwrap(), encode(-3.0));
    }

    #[test]
    fn encode_decode_round_trip() {
        for d in [0.0, 1e-300, 1e-10, 0.5, 1.0, 7.0, 1e10, 1e300, -2.0, -1e200] {
            // exponentiation amplifies the last-bit error of x by |x|
            let x = encode(d);
            assert!(close(decode(x), d, 1e-15 * (1.0 + x.abs())), "{d}");
        }
        for x in [0.0, 0.25, 3.0, 29.0, 300.0, 700.0, -12.0, -700.0] {
            assert!(close(encode(decode(x)), x, 1e-15), "{x}");
        }
    }

    #[test]
    fn branches_agree_at_the_switch() {
        for &(a, b) in &[(0.5, 1.0), (3.0, -2.0), (-0.7, 4.0), (1e-3, 1e5), (2.0, 0.0)] {
            for x in [29.999_999, -29.999_999] {
                let material = step_unchecked(x, Coef::new(a), Coef::new(b));
                let ca = Coef::new(a);
                let l_ad = ca.ln_abs + ln_abs_d(x);
                let (s, l) =
                    signed_log_add(ca.sign() * x.signum(), l_ad, Coef::new(b).sign(), Coef::new(b).ln_abs);
                let logd = s * softplus(l);
                assert!(close(material, logd, 1e-12), "{a} {b} {x}: {material} vs {logd}");
            }
            let below = step_unchecked(29.999_999_999, Coef::new(a), Coef::new(b));
            let above = step_unchecked(30.000_000_001, Coef::new(a), Coef::new(b));
            assert!(close(below, above, 1e-9), "{a} {b}: {below} vs {above}");
        }
    }

    #[test]
    fn huge_states_never_overflow() {
        let a = Coef::from_log(1.0, 900.0);
        let x = step_log(800.0, a, Coef::new(1.0)).unwrap();
        assert!(close(x, 1700.0, 1e-12), "{x}");
        let x = step_log(-800.0, a, Coef::new(-5.0)).unwrap();
        assert!(close(x, -1700.0, 1e-12));
        // exact cancellation
        let big = Coef::from_log(1.0, 50.0);
        let x = step_log(encode(1.0), big, Coef::from_log(-1.0, 50.0)).unwrap();
        assert!(x.abs() < 1e-6, "{x}");
    }

    #[test]
    fn deterministic_path_and_replay() {
        let law = CoefficientLaw::constant(0.5, 1.0).unwrap();
        let p = simulate_path(&law, 3, 0.0, 1).unwrap();
        assert!(close(decode(p.states[3]), 1.75, 1e-15));
        assert_eq!(p.states.len(), 4);
        assert_eq!(p.coeffs.len(), 3);
        let q = simulate_path(&law, 3, 0.0, 1).unwrap();
        assert_eq!(p, q);
        assert_eq!(p.replay(), p.states);
        assert!(simulate_path(&law, 0, 0.0, 1).is_err());
    }

    #[test]
    fn zero_a_kills_history() {
        let b = ScalarLaw::positive(TailModel::reg_var_log(2.0, 1.0).unwrap(), 0.0).unwrap();
        let law = CoefficientLaw::independent(ScalarLaw::constant(0.0).unwrap(), b).unwrap();
        let p = simulate_path(&law, 5, 3.0, 4).unwrap();
        for k in 1..=5 {
            assert_eq!(p.states[k], encode_coef(p.coeffs[k - 1].1));
        }
    }

    #[test]
    fn jump_converges_to_log_a() {
        let law = CoefficientLaw::constant(0.5, 0.0).unwrap();
        let mut rng = stats::path_rng(1, 0);
        for x in [40.0, 60.0, 200.0] {
            let xi = jump_sample(&law, x, &mut rng).unwrap();
            assert!((xi - 0.5f64.ln()).abs() < 1e-9, "{x}: {xi}");
        }
        let law = CoefficientLaw::constant(0.5, 2.0).unwrap();
        assert_eq!(jump_sample(&law, 0.0, &mut rng).unwrap(), encode(2.0));
    }

    #[test]
    fn sign_chain_examples() {
        let law = CoefficientLaw::constant(2.0, 0.0).unwrap();
        let p = simulate_path(&law, 20, 1.0, 0).unwrap();
        let sc = sign_chain(&p, 5.0).unwrap();
        assert!(sc.signs.iter().all(|s| *s == 1));
        assert_eq!(sc.transition[0], [1.0, 0.0]);
        assert!(sc.transition[1][0].is_nan());
        let small = simulate_path(&CoefficientLaw::constant(0.5, 0.0).unwrap(), 5, 1.0, 0).unwrap();
        assert!(matches!(sign_chain(&small, 5.0), Err(Error::EmptySelection { .. })));
    }

    #[test]
    fn majorant_with_contracting_law() {
        let law = CoefficientLaw::constant(0.5, 0.0).unwrap();
        let (p, c) = coupled_majorant(&law, 50, 5.0, 3.0, 0).unwrap();
        assert!(p.states.windows(2).all(|w| w[1] <= w[0]));
        assert!(c.z_path.iter().all(|z| *z == 0.0));
        assert_eq!(c.violations(&p), 0);
        // start above x0
        let (p, c) = coupled_majorant(&law, 50, 5.0, 1e6, 0).unwrap();
        assert!(c.z_path[0] > 0.0);
        assert_eq!(c.violations(&p), 0);
    }

    #[test]
    fn majorant_rejects_bad_drift_and_signs() {
        let law = CoefficientLaw::constant(2.0, 0.0).unwrap();
        assert!(matches!(
            coupled_majorant(&law, 10, 5.0, 0.0, 0),
            Err(Error::DriftNotNegative { .. })
        ));
        let law = CoefficientLaw::constant(-0.5, 1.0).unwrap();
        assert!(coupled_majorant(&law, 10, 5.0, 0.0, 0).is_err());
    }

    #[test]
    fn abs_domination_and_corruption() {
        let law = CoefficientLaw::discrete(
            DiscreteLaw::product(&[(-1.5, 0.3), (0.4, 0.7)], &[(-1.0, 0.5), (2.0, 0.5)]).unwrap(),
        )
        .unwrap();
        let p = simulate_path(&law, 10_000, 0.0, 3).unwrap();
        assert_eq!(abs_domination_check(&p), 0);
        let mut bad = p.clone();
        bad.states[500] = bad.states[500].signum() * (bad.states[500].abs() + 5.0);
        assert!(abs_domination_check(&bad) > 0);
        let zero_b = CoefficientLaw::constant(0.9, 0.0).unwrap();
        assert_eq!(abs_domination_check(&simulate_path(&zero_b, 100, 5.0, 0).unwrap()), 0);
    }
}
