//! Leading-order tail predictions for `D_n` and `D_∞` in the four regimes,
//! regime selection, and the finite-horizon crossover.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dist::TailFn;
use crate::error::{Error, Result};
use crate::law::{CoefficientLaw, Drift, Marginal, Structure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    PositivePositive,
    AtomAtZero,
    PositiveSignedB,
    SignedA,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Regime::PositivePositive => "PositivePositive",
            Regime::AtomAtZero => "AtomAtZero",
            Regime::PositiveSignedB => "PositiveSignedB",
            Regime::SignedA => "SignedA",
        };
        f.write_str(s)
    }
}

/// `P{D_∞ > 0}` as known to the predictor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SignProb {
    Known(f64),
    NeedsMc,
    Estimated { value: f64, lo: f64, hi: f64 },
}

/// One recorded regime hypothesis and how it was established.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hypothesis {
    pub name: String,
    pub status: String,
}

#[derive(Clone)]
pub struct RegimeConfig {
    pub regime: Regime,
    /// `a = −E log|A|`; `+∞` with an atom at zero.
    pub a: f64,
    pub a_stderr: f64,
    pub p0: f64,
    pub p_plus: f64,
    pub prob_dinf_positive: SignProb,
    pub h: Arc<dyn TailFn>,
    pub f: Option<Arc<dyn TailFn>>,
    pub g: Option<Arc<dyn TailFn>>,
    pub g_plus: Option<Arc<dyn TailFn>>,
    pub g_minus: Option<Arc<dyn TailFn>>,
    pub hypotheses: Vec<Hypothesis>,
}

impl fmt::Debug for RegimeConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RegimeConfig")
            .field("regime", &self.regime)
            .field("a", &self.a)
            .field("p0", &self.p0)
            .field("p_plus", &self.p_plus)
            .field("prob_dinf_positive", &self.prob_dinf_positive)
            .field("hypotheses", &self.hypotheses)
            .finish()
    }
}

impl RegimeConfig {
    /// A configuration assembled from explicit tails; hypotheses are the caller's.
    pub fn manual(regime: Regime, a: f64, p0: f64, h: Arc<dyn TailFn>) -> Self {
        RegimeConfig {
            regime,
            a,
            a_stderr: 0.0,
            p0,
            p_plus: if regime == Regime::SignedA { f64::NAN } else { 1.0 - p0 },
            prob_dinf_positive: SignProb::Known(1.0),
            h,
            f: None,
            g: None,
            g_plus: None,
            g_minus: None,
            hypotheses: vec![Hypothesis {
                name: "all".into(),
                status: "asserted by caller".into(),
            }],
        }
    }

    pub fn with_signed_b_tails(
        mut self,
        f: Arc<dyn TailFn>,
        g_plus: Arc<dyn TailFn>,
        g_minus: Arc<dyn TailFn>,
    ) -> Self {
        self.f = Some(f);
        self.g_plus = Some(g_plus);
        self.g_minus = Some(g_minus);
        self
    }

    pub fn with_prob_dinf_positive(mut self, p: SignProb) -> Self {
        self.prob_dinf_positive = p;
        self
    }

    fn sign_prob(&self) -> Result<(f64, Option<(f64, f64)>)> {
        match self.prob_dinf_positive {
            SignProb::Known(p) => Ok((p, None)),
            SignProb::Estimated { value, lo, hi } => Ok((value, Some((lo, hi)))),
            SignProb::NeedsMc => Err(Error::RegimeHypothesisViolated(
                "P{D_inf > 0} is needed but has not been estimated".into(),
            )),
        }
    }

    fn signed_b_tails(&self) -> Result<(&Arc<dyn TailFn>, &Arc<dyn TailFn>)> {
        match (&self.f, &self.g_plus) {
            (Some(f), Some(g)) => Ok((f, g)),
            _ => Err(Error::RegimeHypothesisViolated(
                "signed-B prediction needs the laws F and G+".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailPrediction {
    pub value: f64,
    pub regime: Regime,
    pub x: f64,
    /// `None` for the stationary prediction.
    pub n: Option<u64>,
    pub lower_form: bool,
    pub ingredients: BTreeMap<String, f64>,
    /// Range induced by the confidence interval of `P{D_∞ > 0}`.
    pub range: Option<(f64, f64)>,
}

fn check_x(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::NanInput("prediction"));
    }
    if !(x > 0.0) {
        return Err(Error::Config(format!("x must be positive, got {x}")));
    }
    Ok(x.ln())
}

/// `∫_lo^hi tail`, clamped by `min(1, ∫_lo^∞ tail)` when that is finite.
fn window_integral(t: &dyn TailFn, lo: f64, hi: f64) -> Result<f64> {
    let width = hi - lo;
    if width <= 0.0 {
        return Ok(0.0);
    }
    let direct = || t.tail_integral(lo, hi);
    if !t.has_finite_mean() {
        return direct();
    }
    let full = t.integrated_tail_raw(lo)?;
    let v = if width <= 10.0 * lo.abs().max(1.0) {
        direct()?
    } else {
        full - t.integrated_tail_raw(hi)?
    };
    Ok(v.min(full.min(1.0)).max(0.0))
}

/// Stationary prediction for `P{D_∞ > x}`.
pub fn stationary_tail_prediction(cfg: &RegimeConfig, x: f64) -> Result<TailPrediction> {
    predict(cfg, None, check_x(x)?, false)
}

/// Prediction for `P{D_n > x}`, uniform in `n`.
pub fn finite_n_tail_prediction(cfg: &RegimeConfig, n: u64, x: f64) -> Result<TailPrediction> {
    predict(cfg, Some(check_n(n)?), check_x(x)?, false)
}

/// The lower-bound display; in every regime its leading constant matches
/// the upper one, so the value is the same and only the flag differs.
pub fn lower_bound_prediction(cfg: &RegimeConfig, n: Option<u64>, x: f64) -> Result<TailPrediction> {
    let n = n.map(check_n).transpose()?;
    predict(cfg, n, check_x(x)?, true)
}

/// Prediction at `log x` given directly, for levels beyond the float range.
/// `n = None` gives the stationary form.
pub fn prediction_at_log(
    cfg: &RegimeConfig,
    n: Option<u64>,
    log_x: f64,
    lower_form: bool,
) -> Result<TailPrediction> {
    if log_x.is_nan() {
        return Err(Error::NanInput("prediction"));
    }
    let n = n.map(check_n).transpose()?;
    predict(cfg, n, log_x, lower_form)
}

fn check_n(n: u64) -> Result<u64> {
    if n == 0 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    Ok(n)
}

fn predict(cfg: &RegimeConfig, n: Option<u64>, l: f64, lower_form: bool) -> Result<TailPrediction> {
    let x = l.exp();
    let mut ing = BTreeMap::new();
    ing.insert("log_x".to_string(), l);
    let mut range = None;
    let value = match cfg.regime {
        Regime::PositivePositive | Regime::SignedA => {
            let factor = if cfg.regime == Regime::SignedA { 0.5 } else { 1.0 } / cfg.a;
            ing.insert("factor".into(), factor);
            let integral = match n {
                None => {
                    let raw = cfg.h.integrated_tail_raw(l)?;
                    ing.insert("H_I_clamped".into(), f64::from(u8::from(raw > 1.0)));
                    raw.min(1.0)
                }
                Some(n) => window_integral(cfg.h.as_ref(), l, l + n as f64 * cfg.a)?,
            };
            ing.insert(
                if n.is_none() { "H_I(log x)" } else { "int_H(log x, log x + n a)" }.into(),
                integral,
            );
            factor * integral
        }
        Regime::AtomAtZero => {
            let hbar = cfg.h.tail(l);
            ing.insert("H(log x)".into(), hbar);
            let factor = match n {
                None => 1.0 / cfg.p0,
                Some(n) => atom_factor(cfg.p0, n),
            };
            ing.insert("factor".into(), factor);
            factor * hbar
        }
        Regime::PositiveSignedB => {
            let (p, ci) = cfg.sign_prob()?;
            let (f, gp) = cfg.signed_b_tails()?;
            let (fi, gi) = match n {
                None => (f.integrated_tail(l)?, gp.integrated_tail(l)?),
                Some(n) => {
                    let hi = l + n as f64 * cfg.a;
                    (
                        window_integral(f.as_ref(), l, hi)?,
                        window_integral(gp.as_ref(), l, hi)?,
                    )
                }
            };
            ing.insert("P(D_inf>0)".into(), p);
            ing.insert("F_term".into(), fi);
            ing.insert("Gplus_term".into(), gi);
            if let Some((lo, hi)) = ci {
                range = Some(((lo * fi + gi) / cfg.a, (hi * fi + gi) / cfg.a));
            }
            (p * fi + gi) / cfg.a
        }
    };
    Ok(TailPrediction {
        value,
        regime: cfg.regime,
        x,
        n,
        lower_form,
        ingredients: ing,
        range,
    })
}

/// `(1 − (1−p0)^n)/p0`.
pub fn atom_factor(p0: f64, n: u64) -> f64 {
    let q = 1.0 - p0;
    let qn = if n > i32::MAX as u64 {
        0.0
    } else {
        q.powi(n as i32)
    };
    // −expm1(n·log q) keeps precision when (1−p0)^n is close to one
    let num = if q > 0.0 && qn > 0.5 {
        -(n as f64 * q.ln()).exp_m1()
    } else {
        1.0 - qn
    };
    num / p0
}

/// `finite_n / stationary` at the same `x`.
pub fn crossover_ratio(cfg: &RegimeConfig, n: u64, x: f64) -> Result<f64> {
    crossover_ratio_at_log(cfg, n, check_x(x)?)
}

pub fn crossover_ratio_at_log(cfg: &RegimeConfig, n: u64, log_x: f64) -> Result<f64> {
    let s = prediction_at_log(cfg, None, log_x, false)?.value;
    if !(s > 0.0) {
        return Err(Error::Config(format!(
            "stationary prediction at log x = {log_x} is {s}"
        )));
    }
    Ok(prediction_at_log(cfg, Some(n), log_x, false)?.value / s)
}

/// Smallest `n` with `crossover_ratio(n, x) > target`, by bisection.
pub fn crossover_threshold(cfg: &RegimeConfig, log_x: f64, target: f64) -> Result<u64> {
    let ratio = |n: u64| crossover_ratio_at_log(cfg, n, log_x);
    let mut hi = 1u64;
    while ratio(hi)? <= target {
        hi = hi.checked_mul(2).ok_or(Error::HorizonOverflow {
            horizon: u64::MAX,
            cap: u64::MAX,
        })?;
        if hi > 1 << 50 {
            return Err(Error::HorizonOverflow {
                horizon: hi,
                cap: 1 << 50,
            });
        }
    }
    let mut lo = hi / 2;
    if lo == 0 {
        return Ok(1);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ratio(mid)? > target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Default cap on simulated horizons.
pub const HORIZON_CAP: u64 = 1_000_000;

/// Horizon standing in for stationarity at level `x`:
/// `max(50, round(20·log(1+x)/a))`, or enough steps for an atom at zero to
/// have occurred with probability `1 − 1e-9`.
pub fn horizon_rule(cfg: &RegimeConfig, x: f64, cap: u64) -> Result<u64> {
    let n = if cfg.regime == Regime::AtomAtZero || !cfg.a.is_finite() {
        (1e-9f64.ln() / (1.0 - cfg.p0).ln()).ceil()
    } else {
        (20.0 * x.ln_1p() / cfg.a).round()
    };
    let n = n.max(50.0);
    if !(n <= cap as f64) {
        return Err(Error::HorizonOverflow {
            horizon: if n.is_finite() { n as u64 } else { u64::MAX },
            cap,
        });
    }
    Ok(n as u64)
}

#[derive(Debug, Clone, Copy)]
pub struct SelectOptions {
    /// Constant in the grid check `Ḡ⁻_I ≤ K (F̄_I + Ḡ⁺_I)`.
    pub g_minus_constant: f64,
    pub grid_min: f64,
    pub grid_max: f64,
    pub grid_points: usize,
    /// Overrides the law's drift, e.g. with a Monte Carlo estimate.
    pub drift: Option<Drift>,
}

impl Default for SelectOptions {
    fn default() -> Self {
        Self {
            g_minus_constant: 10.0,
            grid_min: 1.0,
            grid_max: 50.0,
            grid_points: 50,
            drift: None,
        }
    }
}

fn hyp(name: &str, status: impl Into<String>) -> Hypothesis {
    Hypothesis {
        name: name.into(),
        status: status.into(),
    }
}

/// Picks the regime whose hypotheses the law satisfies.
pub fn regime_select(law: &Arc<CoefficientLaw>, opts: SelectOptions) -> Result<RegimeConfig> {
    let fl = law.flags();
    let drift = opts.drift.unwrap_or(law.drift());
    let h = law.marginal(Marginal::H);
    let mut hyps = Vec::new();

    let base = |regime: Regime, hyps: Vec<Hypothesis>| RegimeConfig {
        regime,
        a: drift.value,
        a_stderr: drift.stderr,
        p0: fl.p0,
        p_plus: fl.p_plus,
        prob_dinf_positive: SignProb::Known(1.0),
        h: Arc::clone(&h),
        f: Some(law.marginal(Marginal::F)),
        g: Some(law.marginal(Marginal::G)),
        g_plus: Some(law.marginal(Marginal::GPlus)),
        g_minus: Some(law.marginal(Marginal::GMinus)),
        hypotheses: hyps,
    };

    if fl.p0 > 0.0 {
        if fl.p0 >= 1.0 {
            return Err(Error::Unsupported("P{A = 0} = 1: D_n is just B_n".into()));
        }
        if fl.p0 + fl.p_plus < 1.0 {
            return Err(Error::Unsupported(
                "an atom of A at zero is covered only for A >= 0".into(),
            ));
        }
        if law.p_b_negative() > 0.0 || law.p_b_zero() > 0.0 {
            return Err(Error::Unsupported(
                "an atom of A at zero is covered only for B > 0".into(),
            ));
        }
        hyps.push(hyp("A >= 0", "verified from law"));
        hyps.push(hyp("B > 0", "verified from law"));
        hyps.push(hyp("0 < p0 < 1", format!("p0 = {}", fl.p0)));
        return Ok(base(Regime::AtomAtZero, hyps));
    }

    if !(drift.value > 0.0) {
        return Err(Error::RegimeHypothesisViolated(format!(
            "need E log|A| < 0, got a = {}",
            drift.value
        )));
    }
    if !drift.analytic && drift.value <= 3.0 * drift.stderr {
        return Err(Error::RegimeHypothesisViolated(format!(
            "a = {} is not above 3 standard errors ({})",
            drift.value, drift.stderr
        )));
    }
    hyps.push(hyp(
        "E log|A| = -a < 0",
        if drift.analytic {
            format!("analytic, a = {}", drift.value)
        } else {
            format!("estimated, a = {} +- {}", drift.value, drift.stderr)
        },
    ));
    hyps.push(hyp(
        "E log(1+|B|) < inf",
        format!("{}", law.b_logmoment()),
    ));

    if fl.a_positive && fl.b_nonnegative {
        hyps.push(hyp("A > 0, B >= 0", "verified from law"));
        return Ok(base(Regime::PositivePositive, hyps));
    }

    if fl.a_positive {
        if let Structure::BEqualsAEta { .. } = law.structure() {
            return Err(Error::Unsupported(
                "B = A*eta with signed eta is a dependent signed-B law; for B = -cA the chain \
                 D_{n+1} = A_n (D_n - c) keeps the tail of the unsigned case, so the \
                 independent-coefficient asymptotics do not apply"
                    .into(),
            ));
        }
        if !fl.independent {
            return Err(Error::Unsupported(
                "signed B requires A and B independent".into(),
            ));
        }
        let cfg = base(Regime::PositiveSignedB, hyps);
        let (f, gp, gm) = (
            cfg.f.clone().expect("set above"),
            cfg.g_plus.clone().expect("set above"),
            cfg.g_minus.clone().expect("set above"),
        );
        let mut worst: f64 = 0.0;
        for i in 0..opts.grid_points {
            let z = opts.grid_min
                + (opts.grid_max - opts.grid_min) * i as f64 / (opts.grid_points - 1).max(1) as f64;
            let num = gm.integrated_tail(z)?;
            let den = f.integrated_tail(z)? + gp.integrated_tail(z)?;
            let r = if den > 0.0 {
                num / den
            } else if num > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            worst = worst.max(r);
        }
        if worst > opts.g_minus_constant {
            return Err(Error::RegimeHypothesisViolated(format!(
                "Gminus_I / (F_I + Gplus_I) reaches {worst} > {} on the grid",
                opts.g_minus_constant
            )));
        }
        let mut cfg = cfg;
        cfg.hypotheses.push(hyp("A > 0, A and B independent", "verified from law"));
        cfg.hypotheses.push(hyp(
            "Gminus_I = O(F_I + Gplus_I)",
            format!(
                "checked on grid [{}, {}], max ratio {worst:.4} <= {}",
                opts.grid_min, opts.grid_max, opts.g_minus_constant
            ),
        ));
        cfg.hypotheses.push(hyp(
            "P{D_inf = 0} = 0",
            "user assertion; not verifiable, Monte Carlo smoke test only",
        ));
        cfg.prob_dinf_positive = SignProb::NeedsMc;
        return Ok(cfg);
    }

    if fl.p_plus > 0.0 && fl.p_plus < 1.0 {
        if !fl.independent {
            return Err(Error::Unsupported("signed A requires A and B independent".into()));
        }
        if law.b_is_zero() {
            return Err(Error::Unsupported(
                "B = 0 gives D_inf = 0, so P{D_inf = 0} > 0".into(),
            ));
        }
        hyps.push(hyp("0 < P{A > 0} < 1", format!("p+ = {}", fl.p_plus)));
        hyps.push(hyp("A and B independent", "verified from law"));
        hyps.push(hyp(
            "P{D_inf = 0} = 0",
            "user assertion; not verifiable, Monte Carlo smoke test only",
        ));
        return Ok(base(Regime::SignedA, hyps));
    }

    Err(Error::Unsupported(
        "A < 0 almost surely is not covered by any regime".into(),
    ))
}
