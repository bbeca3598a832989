//! Joint laws of the coefficient pair `(A, B)`.
//!
//! Magnitudes are held on the log scale: a nonzero scalar is
//! `sign · exp(shift + Y)` with `Y` drawn from a [`TailModel`]. This keeps
//! draws with `log|A|` in the hundreds representable without overflow.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{TailFn, TailModel};
use crate::error::{Error, Result};
use crate::quad::{self, QuadOptions};
use crate::stats;

/// A coefficient draw, kept both as a float and as `log|value|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coef {
    /// The value; may be `±∞` when `ln_abs` exceeds the float range.
    pub value: f64,
    /// `log|value|`, `-∞` for zero.
    pub ln_abs: f64,
}

impl Coef {
    pub const ZERO: Coef = Coef {
        value: 0.0,
        ln_abs: f64::NEG_INFINITY,
    };

    pub fn new(value: f64) -> Self {
        Coef {
            value,
            ln_abs: value.abs().ln(),
        }
    }

    /// `sign` in `{-1, 0, 1}`.
    pub fn from_log(sign: f64, ln_abs: f64) -> Self {
        if sign == 0.0 || ln_abs == f64::NEG_INFINITY {
            return Coef::ZERO;
        }
        Coef {
            value: sign * ln_abs.exp(),
            ln_abs,
        }
    }

    pub fn sign(&self) -> f64 {
        if self.ln_abs == f64::NEG_INFINITY {
            0.0
        } else {
            self.value.signum()
        }
    }

    pub fn is_zero(&self) -> bool {
        self.ln_abs == f64::NEG_INFINITY
    }
}

/// `ln(e^y − 1)` for `y ≥ 0`; `-∞` at zero.
pub fn ln_expm1(y: f64) -> f64 {
    if y > 30.0 {
        y + (-(-y).exp()).ln_1p()
    } else {
        y.exp_m1().ln()
    }
}

/// `ln(e^y − 1 − c)`, or `None` when `e^y − 1 − c < 0`.
fn ln_excess(y: f64, c: f64) -> Option<f64> {
    if y > 30.0 {
        let r = (1.0 + c) * (-y).exp();
        if r > 1.0 {
            return None;
        }
        Some(y + (-r).ln_1p())
    } else {
        let z = y.exp_m1() - c;
        if z < 0.0 {
            None
        } else {
            Some(z.ln())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Abs,
    Pos,
    Neg,
}

/// Law of a real scalar `V`: zero with probability `p_zero`, negative with
/// probability `p_negative`, and `|V| = exp(shift + Y)` otherwise, with the
/// sign independent of `Y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScalarSpec", into = "ScalarSpec")]
pub struct ScalarLaw {
    p_zero: f64,
    p_negative: f64,
    log_abs: TailModel,
    shift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScalarSpec {
    Constant {
        constant: f64,
    },
    General {
        #[serde(default)]
        p_zero: f64,
        #[serde(default)]
        p_negative: f64,
        log_abs: TailModel,
        #[serde(default)]
        shift: f64,
    },
}

impl TryFrom<ScalarSpec> for ScalarLaw {
    type Error = Error;
    fn try_from(s: ScalarSpec) -> Result<Self> {
        match s {
            ScalarSpec::Constant { constant } => ScalarLaw::constant(constant),
            ScalarSpec::General {
                p_zero,
                p_negative,
                log_abs,
                shift,
            } => ScalarLaw::new(p_zero, p_negative, log_abs, shift),
        }
    }
}

impl From<ScalarLaw> for ScalarSpec {
    fn from(l: ScalarLaw) -> Self {
        ScalarSpec::General {
            p_zero: l.p_zero,
            p_negative: l.p_negative,
            log_abs: l.log_abs,
            shift: l.shift,
        }
    }
}

impl ScalarLaw {
    pub fn new(p_zero: f64, p_negative: f64, log_abs: TailModel, shift: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_zero)
            || !(0.0..=1.0).contains(&p_negative)
            || p_zero + p_negative > 1.0 + 1e-12
            || !shift.is_finite()
        {
            return Err(Error::InvalidModel(format!(
                "scalar law needs p_zero, p_negative in [0, 1] with sum <= 1 and finite shift, got ({p_zero}, {p_negative}, {shift})"
            )));
        }
        Ok(ScalarLaw {
            p_zero,
            p_negative,
            log_abs,
            shift,
        })
    }

    /// `|V| = exp(shift + Y)` with a positive sign.
    pub fn positive(log_abs: TailModel, shift: f64) -> Result<Self> {
        Self::new(0.0, 0.0, log_abs, shift)
    }

    pub fn constant(v: f64) -> Result<Self> {
        if !v.is_finite() {
            return Err(Error::InvalidModel(format!("constant {v}")));
        }
        if v == 0.0 {
            return Self::new(1.0, 0.0, TailModel::point_mass(0.0)?, 0.0);
        }
        let p_negative = if v < 0.0 { 1.0 } else { 0.0 };
        Self::new(0.0, p_negative, TailModel::point_mass(v.abs().ln())?, 0.0)
    }

    pub fn p_zero(&self) -> f64 {
        self.p_zero
    }
    pub fn p_negative(&self) -> f64 {
        self.p_negative
    }
    pub fn p_positive(&self) -> f64 {
        (1.0 - self.p_zero - self.p_negative).max(0.0)
    }
    pub fn log_abs(&self) -> &TailModel {
        &self.log_abs
    }
    pub fn shift(&self) -> f64 {
        self.shift
    }

    fn side_weight(&self, side: Side) -> f64 {
        match side {
            Side::Abs => 1.0 - self.p_zero,
            Side::Pos => self.p_positive(),
            Side::Neg => self.p_negative,
        }
    }

    /// `P{V on side, ln|V| > lt}`.
    pub fn tail_ln(&self, side: Side, lt: f64) -> f64 {
        let w = self.side_weight(side);
        if w == 0.0 {
            return 0.0;
        }
        w * self.log_abs.tail(lt - self.shift)
    }

    /// `P{V on side, |V| > t}`; for `t < 0` the `Abs` side gives one.
    pub fn tail_abs(&self, side: Side, t: f64) -> f64 {
        if t < 0.0 {
            return match side {
                Side::Abs => 1.0,
                _ => self.side_weight(side) + self.p_zero,
            };
        }
        self.tail_ln(side, t.ln())
    }

    pub fn is_constant(&self) -> bool {
        self.p_zero == 1.0
            || (matches!(self.log_abs, TailModel::PointMass { .. })
                && self.p_zero == 0.0
                && (self.p_negative == 0.0 || self.p_negative == 1.0))
    }

    /// Atoms `(ln|v|, prob)` of `ln|V|` given `V != 0`, when `Y` is discrete with few atoms.
    fn discrete_log_atoms(&self) -> Option<Vec<(f64, f64)>> {
        let s = self.shift;
        match &self.log_abs {
            TailModel::PointMass { value } => Some(vec![(s + value, 1.0)]),
            TailModel::FiniteSupport { atoms } => {
                Some(atoms.iter().map(|(v, p)| (s + v, *p)).collect())
            }
            TailModel::Empirical { samples } if samples.len() <= 64 => {
                let w = 1.0 / samples.len() as f64;
                Some(samples.iter().map(|v| (s + v, w)).collect())
            }
            _ => None,
        }
    }

    /// `E[f(ln|V|) ; V != 0]` restricted to `V` on `side` (sign independent of magnitude).
    /// `u_cuts` are interior points in the quantile variable where `f ∘ Q` jumps.
    fn expect_nonzero<F: Fn(f64) -> f64>(&self, side: Side, f: F, u_cuts: &[f64]) -> Result<f64> {
        let w = self.side_weight(side);
        if w == 0.0 {
            return Ok(0.0);
        }
        if let Some(atoms) = self.discrete_log_atoms() {
            return Ok(w * atoms.iter().map(|(l, p)| p * f(*l)).sum::<f64>());
        }
        let g = |u: f64| f(self.shift + self.log_abs.quantile(u));
        let mut cuts: Vec<f64> = u_cuts
            .iter()
            .copied()
            .filter(|u| *u > 0.0 && *u < 1.0)
            .collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut total = 0.0;
        let mut start = 0.0;
        for c in cuts.into_iter().chain(std::iter::once(1.0)) {
            total += quad::integrate(g, start, c, QuadOptions::default())?;
            start = c;
        }
        Ok(w * total)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Coef {
        let sign = if self.p_zero == 0.0 && self.p_negative == 0.0 {
            1.0
        } else if self.p_zero == 0.0 && self.p_negative == 1.0 {
            -1.0
        } else {
            let u: f64 = rng.gen();
            if u < self.p_zero {
                0.0
            } else if u < self.p_zero + self.p_negative {
                -1.0
            } else {
                1.0
            }
        };
        if sign == 0.0 {
            return Coef::ZERO;
        }
        Coef::from_log(sign, self.shift + self.log_abs.sample(rng))
    }

    /// `E ln|V|` given `V != 0`.
    pub fn mean_ln_abs(&self) -> f64 {
        self.shift + self.log_abs.mean()
    }

    /// `E log(1+|V|)`.
    pub fn log1p_moment(&self) -> Result<f64> {
        if self.p_zero == 1.0 {
            return Ok(0.0);
        }
        if !self.log_abs.mean().is_finite() {
            return Ok(f64::INFINITY);
        }
        if let Some(atoms) = self.discrete_log_atoms() {
            return Ok((1.0 - self.p_zero)
                * atoms.iter().map(|(l, p)| p * softplus(*l)).sum::<f64>());
        }
        let breaks: Vec<f64> = self
            .log_abs
            .kinks()
            .into_iter()
            .map(|k| softplus(k + self.shift))
            .collect();
        quad::integrate_to_infinity_split(
            |y| self.tail_ln(Side::Abs, ln_expm1(y)),
            0.0,
            &breaks,
            QuadOptions::default(),
        )
    }

    fn kinks_y(&self) -> Vec<f64> {
        self.log_abs
            .kinks()
            .into_iter()
            .map(|k| softplus(k + self.shift))
            .collect()
    }
}

/// `ln(1 + e^l)`.
pub fn softplus(l: f64) -> f64 {
    if l > 30.0 {
        l + (-l).exp().ln_1p()
    } else {
        l.exp().ln_1p()
    }
}

/// A finite joint law of `(A, B)`, at most sixteen atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<((f64, f64), f64)>", into = "Vec<((f64, f64), f64)>")]
pub struct DiscreteLaw {
    atoms: Vec<((f64, f64), f64)>,
}

pub const MAX_ATOMS: usize = 16;

impl TryFrom<Vec<((f64, f64), f64)>> for DiscreteLaw {
    type Error = Error;
    fn try_from(v: Vec<((f64, f64), f64)>) -> Result<Self> {
        DiscreteLaw::new(v)
    }
}

impl From<DiscreteLaw> for Vec<((f64, f64), f64)> {
    fn from(l: DiscreteLaw) -> Self {
        l.atoms
    }
}

impl DiscreteLaw {
    pub fn new(atoms: Vec<((f64, f64), f64)>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() > MAX_ATOMS {
            return Err(Error::InvalidModel(format!(
                "discrete law needs 1..={MAX_ATOMS} atoms, got {}",
                atoms.len()
            )));
        }
        if atoms
            .iter()
            .any(|((a, b), p)| !a.is_finite() || !b.is_finite() || !(0.0..=1.0).contains(p))
        {
            return Err(Error::InvalidModel(format!("bad atoms {atoms:?}")));
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidModel(format!(
                "discrete law probabilities sum to {total}"
            )));
        }
        Ok(DiscreteLaw { atoms })
    }

    /// Independent `A` and `B` with the given marginal atoms.
    pub fn product(a: &[(f64, f64)], b: &[(f64, f64)]) -> Result<Self> {
        let mut atoms = Vec::with_capacity(a.len() * b.len());
        for &(av, ap) in a {
            for &(bv, bp) in b {
                atoms.push(((av, bv), ap * bp));
            }
        }
        Self::new(atoms)
    }

    pub fn atoms(&self) -> &[((f64, f64), f64)] {
        &self.atoms
    }

    fn prob_where<F: Fn(f64, f64) -> bool>(&self, pred: F) -> f64 {
        self.atoms
            .iter()
            .filter(|((a, b), _)| pred(*a, *b))
            .map(|x| x.1)
            .sum()
    }

    /// True when the joint atoms factor into their marginals.
    pub fn factorizes(&self) -> bool {
        let mut avals: Vec<f64> = self.atoms.iter().map(|x| x.0 .0).collect();
        let mut bvals: Vec<f64> = self.atoms.iter().map(|x| x.0 .1).collect();
        for v in [&mut avals, &mut bvals] {
            v.sort_by(f64::total_cmp);
            v.dedup();
        }
        for &a in &avals {
            let pa = self.prob_where(|x, _| x == a);
            for &b in &bvals {
                let pb = self.prob_where(|_, y| y == b);
                let pab = self.prob_where(|x, y| x == a && y == b);
                if (pab - pa * pb).abs() > 1e-12 {
                    return false;
                }
            }
        }
        true
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (Coef, Coef) {
        let u: f64 = rng.gen();
        let mut cum = 0.0;
        for ((a, b), p) in &self.atoms {
            cum += p;
            if u < cum {
                return (Coef::new(*a), Coef::new(*b));
            }
        }
        let ((a, b), _) = self.atoms[self.atoms.len() - 1];
        (Coef::new(a), Coef::new(b))
    }
}

/// Structure of the pair `(A, B)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "structure")]
pub enum Structure {
    IndependentProduct { a: ScalarLaw, b: ScalarLaw },
    /// `B = A·η` with `η` independent of `A`.
    BEqualsAEta { a: ScalarLaw, eta: ScalarLaw },
    /// Arbitrary finite joint law.
    Custom { atoms: DiscreteLaw },
}

/// `a = −E log|A|`, analytic or estimated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Drift {
    pub value: f64,
    pub stderr: f64,
    pub analytic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LawFlags {
    pub p0: f64,
    pub p_plus: f64,
    pub a_positive: bool,
    pub b_nonnegative: bool,
    pub independent: bool,
}

/// Which one-dimensional law of the pair to look at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Marginal {
    /// `log(1+|A|+|B|)`
    H,
    /// `log(1+|A|)`
    F,
    /// `log(1+|B|)`
    G,
    /// `log(1+B⁺)`
    GPlus,
    /// `log(1+B⁻)`
    GMinus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Structure", into = "Structure")]
pub struct CoefficientLaw {
    structure: Structure,
    flags: LawFlags,
    drift: Drift,
    b_logmoment: f64,
}

impl TryFrom<Structure> for CoefficientLaw {
    type Error = Error;
    fn try_from(s: Structure) -> Result<Self> {
        CoefficientLaw::new(s)
    }
}

impl From<CoefficientLaw> for Structure {
    fn from(l: CoefficientLaw) -> Self {
        l.structure
    }
}

impl CoefficientLaw {
    pub fn new(structure: Structure) -> Result<Self> {
        let flags = match &structure {
            Structure::IndependentProduct { a, b } => LawFlags {
                p0: a.p_zero(),
                p_plus: a.p_positive(),
                a_positive: a.p_positive() == 1.0,
                b_nonnegative: b.p_negative() == 0.0,
                independent: true,
            },
            Structure::BEqualsAEta { a, eta } => {
                let b_neg = a.p_positive() * eta.p_negative() + a.p_negative() * eta.p_positive();
                LawFlags {
                    p0: a.p_zero(),
                    p_plus: a.p_positive(),
                    a_positive: a.p_positive() == 1.0,
                    b_nonnegative: b_neg == 0.0,
                    independent: eta.p_zero() == 1.0 || a.is_constant(),
                }
            }
            Structure::Custom { atoms } => {
                let p0 = atoms.prob_where(|a, _| a == 0.0);
                let p_plus = atoms.prob_where(|a, _| a > 0.0);
                LawFlags {
                    p0,
                    p_plus,
                    a_positive: atoms.prob_where(|a, _| a <= 0.0) == 0.0,
                    b_nonnegative: atoms.prob_where(|_, b| b < 0.0) == 0.0,
                    independent: atoms.factorizes(),
                }
            }
        };
        let drift_value = if flags.p0 > 0.0 {
            f64::INFINITY
        } else {
            match &structure {
                Structure::IndependentProduct { a, .. } | Structure::BEqualsAEta { a, .. } => {
                    -a.mean_ln_abs()
                }
                Structure::Custom { atoms } => -atoms
                    .atoms()
                    .iter()
                    .map(|((a, _), p)| p * a.abs().ln())
                    .sum::<f64>(),
            }
        };
        if drift_value.is_nan() || drift_value == f64::NEG_INFINITY {
            return Err(Error::InvalidModel(format!(
                "E log|A| is not finite (drift {drift_value})"
            )));
        }
        let b_logmoment = match &structure {
            Structure::IndependentProduct { b, .. } => b.log1p_moment()?,
            // log(1+|A||η|) <= log(1+|A|) + log(1+|η|)
            Structure::BEqualsAEta { a, eta } => {
                if eta.p_zero() == 1.0 {
                    0.0
                } else {
                    a.log1p_moment()? + eta.log1p_moment()?
                }
            }
            Structure::Custom { atoms } => atoms
                .atoms()
                .iter()
                .map(|((_, b), p)| p * b.abs().ln_1p())
                .sum(),
        };
        if !b_logmoment.is_finite() {
            return Err(Error::InvalidModel(
                "E log(1+|B|) is infinite; the recursion is not stochastically bounded".into(),
            ));
        }
        Ok(CoefficientLaw {
            structure,
            flags,
            drift: Drift {
                value: drift_value,
                stderr: 0.0,
                analytic: true,
            },
            b_logmoment,
        })
    }

    pub fn independent(a: ScalarLaw, b: ScalarLaw) -> Result<Self> {
        Self::new(Structure::IndependentProduct { a, b })
    }

    pub fn b_equals_a_eta(a: ScalarLaw, eta: ScalarLaw) -> Result<Self> {
        Self::new(Structure::BEqualsAEta { a, eta })
    }

    pub fn discrete(atoms: DiscreteLaw) -> Result<Self> {
        Self::new(Structure::Custom { atoms })
    }

    /// Deterministic `A ≡ a`, `B ≡ b`.
    pub fn constant(a: f64, b: f64) -> Result<Self> {
        Self::discrete(DiscreteLaw::new(vec![((a, b), 1.0)])?)
    }

    pub fn structure(&self) -> &Structure {
        &self.structure
    }
    pub fn flags(&self) -> LawFlags {
        self.flags
    }
    pub fn drift(&self) -> Drift {
        self.drift
    }
    pub fn b_logmoment(&self) -> f64 {
        self.b_logmoment
    }
    /// `P{B < 0}`.
    pub fn p_b_negative(&self) -> f64 {
        match &self.structure {
            Structure::IndependentProduct { b, .. } => b.p_negative(),
            Structure::BEqualsAEta { a, eta } => {
                a.p_positive() * eta.p_negative() + a.p_negative() * eta.p_positive()
            }
            Structure::Custom { atoms } => atoms.prob_where(|_, b| b < 0.0),
        }
    }

    /// `P{B = 0}`.
    pub fn p_b_zero(&self) -> f64 {
        match &self.structure {
            Structure::IndependentProduct { b, .. } => b.p_zero(),
            Structure::BEqualsAEta { a, eta } => {
                a.p_zero() + eta.p_zero() - a.p_zero() * eta.p_zero()
            }
            Structure::Custom { atoms } => atoms.prob_where(|_, b| b == 0.0),
        }
    }

    /// True for `B ≡ 0`.
    pub fn b_is_zero(&self) -> bool {
        match &self.structure {
            Structure::IndependentProduct { b, .. } => b.p_zero() == 1.0,
            Structure::BEqualsAEta { a, eta } => eta.p_zero() == 1.0 || a.p_zero() == 1.0,
            Structure::Custom { atoms } => atoms.prob_where(|_, b| b != 0.0) == 0.0,
        }
    }

    pub fn as_discrete(&self) -> Option<&DiscreteLaw> {
        match &self.structure {
            Structure::Custom { atoms } => Some(atoms),
            _ => None,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (Coef, Coef) {
        match &self.structure {
            Structure::IndependentProduct { a, b } => {
                let ca = a.sample(rng);
                let cb = b.sample(rng);
                (ca, cb)
            }
            Structure::BEqualsAEta { a, eta } => {
                let ca = a.sample(rng);
                let ce = eta.sample(rng);
                let cb = Coef::from_log(ca.sign() * ce.sign(), ca.ln_abs + ce.ln_abs);
                (ca, cb)
            }
            Structure::Custom { atoms } => atoms.sample(rng),
        }
    }

    /// Tail `P{M > y}` of the chosen marginal `M`.
    pub fn marginal_tail(&self, which: Marginal, y: f64) -> f64 {
        if y < 0.0 {
            return 1.0;
        }
        match &self.structure {
            Structure::Custom { atoms } => {
                // compare on the log(1+·) scale to keep atoms exactly at y excluded
                let m = |a: f64, b: f64| -> f64 {
                    match which {
                        Marginal::H => (a.abs() + b.abs()).ln_1p(),
                        Marginal::F => a.abs().ln_1p(),
                        Marginal::G => b.abs().ln_1p(),
                        Marginal::GPlus => b.max(0.0).ln_1p(),
                        Marginal::GMinus => (-b).max(0.0).ln_1p(),
                    }
                };
                atoms.prob_where(|a, b| m(a, b) > y)
            }
            Structure::IndependentProduct { a, b } => {
                let lt = ln_expm1(y);
                match which {
                    Marginal::F => a.tail_ln(Side::Abs, lt),
                    Marginal::G => b.tail_ln(Side::Abs, lt),
                    Marginal::GPlus => b.tail_ln(Side::Pos, lt),
                    Marginal::GMinus => b.tail_ln(Side::Neg, lt),
                    Marginal::H => sum_tail(a, b, y).unwrap_or(f64::NAN),
                }
            }
            Structure::BEqualsAEta { a, eta } => {
                let lt = ln_expm1(y);
                match which {
                    Marginal::F => a.tail_ln(Side::Abs, lt),
                    Marginal::H => {
                        // |A|(1+|η|) > e^y − 1
                        let zero = eta.p_zero() * a.tail_ln(Side::Abs, lt);
                        zero + eta
                            .expect_nonzero(
                                Side::Abs,
                                |le| a.tail_ln(Side::Abs, lt - softplus(le)),
                                &[],
                            )
                            .unwrap_or(f64::NAN)
                    }
                    Marginal::G | Marginal::GPlus | Marginal::GMinus => {
                        // |A||η| > e^y − 1 with the sign of Aη on the requested side
                        let pairs: &[(Side, Side)] = match which {
                            Marginal::G => &[(Side::Abs, Side::Abs)],
                            Marginal::GPlus => &[(Side::Pos, Side::Pos), (Side::Neg, Side::Neg)],
                            _ => &[(Side::Pos, Side::Neg), (Side::Neg, Side::Pos)],
                        };
                        pairs
                            .iter()
                            .map(|&(sa, se)| {
                                eta.expect_nonzero(se, |le| a.tail_ln(sa, lt - le), &[])
                                    .unwrap_or(f64::NAN)
                            })
                            .sum()
                    }
                }
            }
        }
    }

    /// True when `E M < ∞` for the marginal.
    pub fn marginal_has_finite_mean(&self, which: Marginal) -> bool {
        match &self.structure {
            Structure::Custom { .. } => true,
            Structure::IndependentProduct { a, b } => {
                let fa = a.p_zero() == 1.0 || a.log_abs().mean().is_finite();
                let fb = b.p_zero() == 1.0 || b.log_abs().mean().is_finite();
                match which {
                    Marginal::F => fa,
                    Marginal::H => fa && fb,
                    _ => fb,
                }
            }
            Structure::BEqualsAEta { a, eta } => {
                let fa = a.p_zero() == 1.0 || a.log_abs().mean().is_finite();
                let fe = eta.p_zero() == 1.0 || eta.log_abs().mean().is_finite();
                match which {
                    Marginal::F => fa,
                    _ => fa && fe,
                }
            }
        }
    }

    fn marginal_kinks(&self, which: Marginal) -> Vec<f64> {
        match &self.structure {
            Structure::Custom { atoms } => atoms
                .atoms()
                .iter()
                .map(|((a, b), _)| match which {
                    Marginal::H => (a.abs() + b.abs()).ln_1p(),
                    Marginal::F => a.abs().ln_1p(),
                    Marginal::G => b.abs().ln_1p(),
                    Marginal::GPlus => b.max(0.0).ln_1p(),
                    Marginal::GMinus => (-b).max(0.0).ln_1p(),
                })
                .collect(),
            Structure::IndependentProduct { a, b } => match which {
                Marginal::F => a.kinks_y(),
                Marginal::H => {
                    let mut k = a.kinks_y();
                    if let Some(batoms) = b.discrete_log_atoms() {
                        for (lb, _) in batoms {
                            let bv = lb.exp();
                            for ka in a.log_abs().kinks() {
                                k.push((bv + (ka + a.shift()).exp()).ln_1p());
                            }
                        }
                    }
                    k
                }
                _ => b.kinks_y(),
            },
            Structure::BEqualsAEta { a, .. } => a.kinks_y(),
        }
    }

    /// The chosen marginal as a shareable tail function.
    pub fn marginal(self: &Arc<Self>, which: Marginal) -> Arc<dyn TailFn> {
        Arc::new(MarginalTail {
            law: Arc::clone(self),
            which,
        })
    }
}

/// `P{log(1+|A|+|B|) > y}` for independent `A`, `B`, conditioning on the
/// discrete coordinate when there is one.
fn sum_tail(a: &ScalarLaw, b: &ScalarLaw, y: f64) -> Result<f64> {
    let lt = ln_expm1(y);
    // P{|U| > e^y − 1 − e^l}
    let given = |u: &ScalarLaw, l: f64| -> f64 {
        if l > 700.0 {
            return 1.0;
        }
        match ln_excess(y, l.exp()) {
            None => 1.0,
            Some(r) => u.tail_ln(Side::Abs, r),
        }
    };
    let (outer, inner) = if b.discrete_log_atoms().is_none() && a.discrete_log_atoms().is_some() {
        (a, b)
    } else {
        (b, a)
    };
    let at_zero = outer.p_zero() * inner.tail_ln(Side::Abs, lt);
    if outer.p_zero() == 1.0 {
        return Ok(at_zero);
    }
    // quantile level where |outer| alone crosses e^y − 1
    let u_star = outer.log_abs().tail(lt - outer.shift());
    let rest = outer.expect_nonzero(Side::Abs, |l| given(inner, l), &[u_star])?;
    Ok((at_zero + rest).min(1.0))
}

#[derive(Debug, Clone)]
pub struct MarginalTail {
    law: Arc<CoefficientLaw>,
    which: Marginal,
}

impl MarginalTail {
    pub fn new(law: Arc<CoefficientLaw>, which: Marginal) -> Self {
        Self { law, which }
    }
}

impl TailFn for MarginalTail {
    fn tail(&self, x: f64) -> f64 {
        self.law.marginal_tail(self.which, x)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.law.marginal_kinks(self.which)
    }

    fn has_finite_mean(&self) -> bool {
        self.law.marginal_has_finite_mean(self.which)
    }
}

/// Monte Carlo estimate of `a = −E log|A|` from `draws` samples.
pub fn estimate_drift(law: &CoefficientLaw, draws: usize, seed: u64) -> Drift {
    let mut rng = stats::aux_rng(seed, 1);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..draws {
        let (a, _) = law.sample(&mut rng);
        let l = a.ln_abs;
        sum += l;
        sum_sq += l * l;
    }
    let n = draws as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean) * n / (n - 1.0);
    Drift {
        value: -mean,
        stderr: (var.max(0.0) / n).sqrt(),
        analytic: false,
    }
}
