//! The f-divergence catalog: generators φ, Fenchel conjugates φ*, conjugate
//! domains, output activations and closed-form divergences between finite
//! distributions.

use std::f64::consts::LN_2;
use std::fmt;

use thiserror::Error;

use crate::tensor::{log_sigmoid, sigmoid};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DivergenceError {
    #[error("unknown divergence `{0}`; known: {known}", known = NAMES.join(", "))]
    UnknownName(String),
    #[error("divergence `{0}` does not take a gamma parameter")]
    GammaNotAccepted(String),
    #[error("divergence `{0}` requires a gamma parameter")]
    GammaRequired(String),
    #[error("gamma must be positive and finite, got {0}")]
    InvalidGamma(f64),
    #[error("rescaling factor must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("{name}: t = {t} lies outside the conjugate domain {domain}")]
    OutsideDomain {
        name: String,
        t: f64,
        domain: Interval,
    },
    #[error("{name}: phi is defined on x >= 0, got {x}")]
    PhiDomain { name: String, x: f64 },
    #[error("{name}: phi is not differentiable at x = {x}")]
    NotDifferentiable { name: String, x: f64 },
    #[error("{name}: activation has no preimage for {t}")]
    NoPreimage { name: String, t: f64 },
    #[error("absolute continuity violated at atom {atom}: pt = 0 but ps = {ps}")]
    AbsoluteContinuity { atom: usize, ps: f64 },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("support sizes differ: {0} vs {1}")]
    SupportMismatch(usize, usize),
}

pub type Result<T> = std::result::Result<T, DivergenceError>;

pub const NAMES: &[&str] = &[
    "kl",
    "kl_rev",
    "js",
    "js_shifted",
    "pearson_chi2",
    "tv",
    "sq_hellinger",
    "neyman_chi2",
    "gamma_js",
    "gamma_pearson",
    "gamma_tv",
];

/// Floor applied to `2 - e^t` and `1 - e^t` before taking logs.
const LOG_GUARD: f64 = 1e-12;

/// Real interval with independently open or closed, possibly infinite ends.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub const REAL: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
        lo_closed: false,
        hi_closed: false,
    };

    pub fn open_above(hi: f64) -> Self {
        Interval {
            hi,
            ..Self::REAL
        }
    }

    pub fn closed_above(hi: f64) -> Self {
        Interval {
            hi,
            hi_closed: true,
            ..Self::REAL
        }
    }

    pub fn closed(lo: f64, hi: f64) -> Self {
        Interval {
            lo,
            hi,
            lo_closed: true,
            hi_closed: true,
        }
    }

    pub fn contains(&self, t: f64) -> bool {
        let above = if self.lo_closed { t >= self.lo } else { t > self.lo };
        let below = if self.hi_closed { t <= self.hi } else { t < self.hi };
        above && below
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Interval {
            lo: self.lo * lambda,
            hi: self.hi * lambda,
            ..*self
        }
    }

    /// Moves `t` inside the interval: onto a closed end, or one ulp inside
    /// an open one.
    pub fn clamp_inside(&self, t: f64) -> f64 {
        if t.is_nan() {
            return t;
        }
        let mut v = t.clamp(f64::MIN, f64::MAX);
        if self.hi.is_finite() {
            if self.hi_closed {
                v = v.min(self.hi);
            } else if v >= self.hi {
                v = self.hi.next_down();
            }
        }
        if self.lo.is_finite() {
            if self.lo_closed {
                v = v.max(self.lo);
            } else if v <= self.lo {
                v = self.lo.next_up();
            }
        }
        v
    }

    /// `n` evenly spaced interior points. Infinite ends are cut at `±span`
    /// from the finite end, or at `±span` around zero for the whole line.
    pub fn grid(&self, n: usize, span: f64) -> Vec<f64> {
        let (lo, hi) = match (self.lo.is_finite(), self.hi.is_finite()) {
            (true, true) => (self.lo, self.hi),
            (true, false) => (self.lo, self.lo + span),
            (false, true) => (self.hi - span, self.hi),
            (false, false) => (-span, span),
        };
        let mut pts: Vec<f64> = (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1).max(1) as f64)
            .collect();
        for p in &mut pts {
            *p = self.clamp_inside(*p);
        }
        pts
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |v: f64| {
            if v == f64::INFINITY {
                "inf".to_string()
            } else if v == f64::NEG_INFINITY {
                "-inf".to_string()
            } else if (v - LN_2).abs() < 1e-15 {
                "log 2".to_string()
            } else {
                format!("{v}")
            }
        };
        write!(
            f,
            "{}{}, {}{}",
            if self.lo_closed { '[' } else { '(' },
            show(self.lo),
            show(self.hi),
            if self.hi_closed { ']' } else { ')' }
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DivergenceKind {
    Kl,
    KlRev,
    Js,
    JsShifted,
    PearsonChi2,
    Tv,
    SqHellinger,
    NeymanChi2,
    GammaJs,
    GammaPearson,
    GammaTv,
}

impl DivergenceKind {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "kl" => Self::Kl,
            "kl_rev" => Self::KlRev,
            "js" => Self::Js,
            "js_shifted" => Self::JsShifted,
            "pearson_chi2" => Self::PearsonChi2,
            "tv" => Self::Tv,
            "sq_hellinger" => Self::SqHellinger,
            "neyman_chi2" => Self::NeymanChi2,
            "gamma_js" | "mdd" => Self::GammaJs,
            "gamma_pearson" => Self::GammaPearson,
            "gamma_tv" => Self::GammaTv,
            other => return Err(DivergenceError::UnknownName(other.to_string())),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Kl => "kl",
            Self::KlRev => "kl_rev",
            Self::Js => "js",
            Self::JsShifted => "js_shifted",
            Self::PearsonChi2 => "pearson_chi2",
            Self::Tv => "tv",
            Self::SqHellinger => "sq_hellinger",
            Self::NeymanChi2 => "neyman_chi2",
            Self::GammaJs => "gamma_js",
            Self::GammaPearson => "gamma_pearson",
            Self::GammaTv => "gamma_tv",
        }
    }

    pub fn takes_gamma(self) -> bool {
        matches!(self, Self::GammaJs | Self::GammaPearson | Self::GammaTv)
    }
}

/// φ'(1), which is an interval for the total-variation kink.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PhiPrimeAtOne {
    Value(f64),
    Interval(f64, f64),
}

impl PhiPrimeAtOne {
    /// The value itself, or the midpoint of the subdifferential.
    pub fn representative(self) -> f64 {
        match self {
            Self::Value(v) => v,
            Self::Interval(a, b) => 0.5 * (a + b),
        }
    }
}

impl fmt::Display for PhiPrimeAtOne {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Value(v) => write!(f, "{}", fmt_num(*v)),
            Self::Interval(a, b) => write!(f, "[{}, {}]", fmt_num(*a), fmt_num(*b)),
        }
    }
}

fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else {
        let r = (v * 1e6).round() / 1e6;
        format!("{r}")
    }
}

/// Derivative of φ at a point; at a kink `value` is the subdifferential
/// midpoint and `subdifferential` holds its ends.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhiPrime {
    pub value: f64,
    pub subdifferential: Option<(f64, f64)>,
}

/// One row of the catalog, optionally rescaled by a positive factor λ
/// (φ ← λφ, φ*(t) ← λφ*(t/λ), dom φ* ← λ·dom φ*).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DivergenceSpec {
    kind: DivergenceKind,
    gamma: Option<f64>,
    scale: f64,
}

pub fn get_spec(name: &str, gamma: Option<f64>) -> Result<DivergenceSpec> {
    DivergenceSpec::new(DivergenceKind::parse(name)?, gamma)
}

/// Every shipped spec; γ-parameterized rows use `gamma`.
pub fn catalog(gamma: f64) -> Result<Vec<DivergenceSpec>> {
    NAMES
        .iter()
        .map(|&n| {
            let kind = DivergenceKind::parse(n)?;
            DivergenceSpec::new(kind, kind.takes_gamma().then_some(gamma))
        })
        .collect()
}

pub fn gamma_rescale(spec: &DivergenceSpec, lambda: f64) -> Result<DivergenceSpec> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(DivergenceError::InvalidScale(lambda));
    }
    Ok(DivergenceSpec {
        scale: spec.scale * lambda,
        ..*spec
    })
}

fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

impl DivergenceSpec {
    pub fn new(kind: DivergenceKind, gamma: Option<f64>) -> Result<Self> {
        match (kind.takes_gamma(), gamma) {
            (true, None) => return Err(DivergenceError::GammaRequired(kind.name().into())),
            (false, Some(_)) => return Err(DivergenceError::GammaNotAccepted(kind.name().into())),
            (true, Some(g)) if !(g > 0.0 && g.is_finite()) => {
                return Err(DivergenceError::InvalidGamma(g))
            }
            _ => {}
        }
        Ok(Self {
            kind,
            gamma,
            scale: 1.0,
        })
    }

    pub fn kind(&self) -> DivergenceKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Label used in tables and file names, e.g. `gamma_js(2)` or `tv*2`.
    pub fn label(&self) -> String {
        let mut s = self.name().to_string();
        if let Some(g) = self.gamma {
            s.push_str(&format!("({g})"));
        }
        if self.scale != 1.0 {
            s.push_str(&format!("*{}", self.scale));
        }
        s
    }

    fn g(&self) -> f64 {
        self.gamma.unwrap_or(1.0)
    }

    fn err_phi(&self, x: f64) -> DivergenceError {
        DivergenceError::PhiDomain {
            name: self.label(),
            x,
        }
    }

    pub fn is_strictly_convex(&self) -> bool {
        !matches!(self.kind, DivergenceKind::Tv | DivergenceKind::GammaTv)
    }

    fn base_phi(&self, x: f64) -> f64 {
        use DivergenceKind::*;
        let g = self.g();
        match self.kind {
            Kl => xlogx(x),
            KlRev => -x.ln(),
            Js => -(x + 1.0) * ((1.0 + x) / 2.0).ln() + xlogx(x),
            JsShifted => xlogx(x) - (x + 1.0) * x.ln_1p(),
            PearsonChi2 => (x - 1.0).powi(2),
            Tv => 0.5 * (x - 1.0).abs(),
            SqHellinger => (x.sqrt() - 1.0).powi(2),
            NeymanChi2 => (1.0 - x).powi(2) / x,
            GammaJs => {
                let gx = g * x;
                let a = if x == 0.0 { 0.0 } else { x * (gx / (1.0 + gx)).ln() };
                a - gx.ln_1p() / g
            }
            GammaPearson => (g * x - 1.0).powi(2) / g,
            GammaTv => (g * x - 1.0).abs() / (2.0 * g),
        }
    }

    /// φ(x) for x ≥ 0. At x = 0 the continuous extension is returned, which
    /// is `+inf` for reverse KL and Neyman χ².
    pub fn phi(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) || x.is_infinite() {
            return Err(self.err_phi(x));
        }
        let v = if x == 0.0 && matches!(self.kind, DivergenceKind::KlRev | DivergenceKind::NeymanChi2) {
            f64::INFINITY
        } else {
            self.base_phi(x)
        };
        Ok(self.scale * v)
    }

    /// φ'(x) for x > 0. At a total-variation kink the subdifferential
    /// midpoint is returned together with the interval.
    pub fn phi_prime(&self, x: f64) -> Result<PhiPrime> {
        use DivergenceKind::*;
        if !(x > 0.0) || x.is_infinite() {
            return Err(self.err_phi(x));
        }
        let g = self.g();
        let (value, sub) = match self.kind {
            Kl => (x.ln() + 1.0, None),
            KlRev => (-1.0 / x, None),
            Js => ((2.0 * x / (1.0 + x)).ln(), None),
            JsShifted => ((x / (1.0 + x)).ln(), None),
            PearsonChi2 => (2.0 * (x - 1.0), None),
            Tv | GammaTv => {
                let g = if self.kind == Tv { 1.0 } else { g };
                let d = g * x - 1.0;
                if d == 0.0 {
                    (0.0, Some((-0.5, 0.5)))
                } else {
                    (0.5 * d.signum(), None)
                }
            }
            SqHellinger => (1.0 - 1.0 / x.sqrt(), None),
            NeymanChi2 => (1.0 - 1.0 / (x * x), None),
            GammaJs => ((g * x / (1.0 + g * x)).ln(), None),
            GammaPearson => (2.0 * (g * x - 1.0), None),
        };
        let s = self.scale;
        Ok(PhiPrime {
            value: s * value,
            subdifferential: sub.map(|(a, b)| (s * a, s * b)),
        })
    }

    /// φ'(x), refusing points where φ has a kink.
    pub fn phi_prime_strict(&self, x: f64) -> Result<f64> {
        let d = self.phi_prime(x)?;
        if d.subdifferential.is_some() {
            return Err(DivergenceError::NotDifferentiable {
                name: self.label(),
                x,
            });
        }
        Ok(d.value)
    }

    pub fn phi_prime_at_one(&self) -> PhiPrimeAtOne {
        let d = self
            .phi_prime(1.0)
            .expect("phi is differentiable or subdifferentiable at 1");
        match d.subdifferential {
            Some((a, b)) => PhiPrimeAtOne::Interval(a, b),
            None => PhiPrimeAtOne::Value(d.value),
        }
    }

    /// φ(1). Zero for every unshifted row.
    pub fn shift_constant(&self) -> f64 {
        self.scale * self.base_phi(1.0)
    }

    pub fn conjugate_domain(&self) -> Interval {
        use DivergenceKind::*;
        let base = match self.kind {
            Kl | PearsonChi2 | GammaPearson => Interval::REAL,
            KlRev | JsShifted | GammaJs => Interval::open_above(0.0),
            Js => Interval::open_above(LN_2),
            Tv | GammaTv => Interval::closed(-0.5, 0.5),
            SqHellinger => Interval::open_above(1.0),
            NeymanChi2 => Interval::closed_above(1.0),
        };
        base.scaled(self.scale)
    }

    fn check_domain(&self, t: f64) -> Result<f64> {
        let dom = self.conjugate_domain();
        if !t.is_finite() || !dom.contains(t) {
            return Err(DivergenceError::OutsideDomain {
                name: self.label(),
                t,
                domain: dom,
            });
        }
        Ok(t / self.scale)
    }

    /// φ*(t) for t in the conjugate domain.
    pub fn conjugate(&self, t: f64) -> Result<f64> {
        use DivergenceKind::*;
        let u = self.check_domain(t)?;
        let g = self.g();
        let v = match self.kind {
            Kl => (u - 1.0).exp(),
            KlRev => -1.0 - (-u).ln(),
            Js => -(2.0 - u.exp()).max(LOG_GUARD).ln(),
            JsShifted | GammaJs => -(-u.exp_m1()).max(LOG_GUARD).ln() / g,
            PearsonChi2 | GammaPearson => (u * u / 4.0 + u) / g,
            Tv | GammaTv => u / g,
            SqHellinger => u / (1.0 - u),
            NeymanChi2 => 2.0 - 2.0 * (1.0 - u).sqrt(),
        };
        Ok(self.scale * v)
    }

    /// d φ*(t) / dt. Infinite at the closed Neyman χ² end.
    pub fn conjugate_prime(&self, t: f64) -> Result<f64> {
        use DivergenceKind::*;
        let u = self.check_domain(t)?;
        let g = self.g();
        Ok(match self.kind {
            Kl => (u - 1.0).exp(),
            KlRev => -1.0 / u,
            Js => {
                let e = u.exp();
                e / (2.0 - e).max(LOG_GUARD)
            }
            JsShifted | GammaJs => u.exp() / (-u.exp_m1()).max(LOG_GUARD) / g,
            PearsonChi2 | GammaPearson => (u / 2.0 + 1.0) / g,
            Tv | GammaTv => 1.0 / g,
            SqHellinger => 1.0 / (1.0 - u).powi(2),
            NeymanChi2 => 1.0 / (1.0 - u).sqrt(),
        })
    }

    /// Output activation mapping ℝ into the conjugate domain.
    pub fn activation(&self, x: f64) -> f64 {
        use DivergenceKind::*;
        let v = match self.kind {
            Kl | PearsonChi2 | GammaPearson => x,
            KlRev => -x.exp(),
            Js => LN_2 + log_sigmoid(x),
            JsShifted | GammaJs => log_sigmoid(x),
            Tv | GammaTv => 0.5 * x.tanh(),
            SqHellinger | NeymanChi2 => -x.exp_m1(),
        };
        self.conjugate_domain().clamp_inside(self.scale * v)
    }

    pub fn activation_prime(&self, x: f64) -> f64 {
        use DivergenceKind::*;
        let d = match self.kind {
            Kl | PearsonChi2 | GammaPearson => 1.0,
            KlRev | SqHellinger | NeymanChi2 => -x.exp(),
            Js | JsShifted | GammaJs => sigmoid(-x),
            Tv | GammaTv => {
                let th = x.tanh();
                0.5 * (1.0 - th * th)
            }
        };
        self.scale * d
    }

    /// Preimage of `t` under the activation, for `t` in its open range.
    pub fn activation_inverse(&self, t: f64) -> Result<f64> {
        use DivergenceKind::*;
        let u = t / self.scale;
        let none = || DivergenceError::NoPreimage {
            name: self.label(),
            t,
        };
        let x = match self.kind {
            Kl | PearsonChi2 | GammaPearson => u,
            KlRev if u < 0.0 => (-u).ln(),
            Js if u < LN_2 => {
                let v = u - LN_2;
                v - (-v.exp_m1()).ln()
            }
            JsShifted | GammaJs if u < 0.0 => u - (-u.exp_m1()).ln(),
            Tv | GammaTv if u.abs() < 0.5 => (2.0 * u).atanh(),
            SqHellinger | NeymanChi2 if u < 1.0 => (-u).ln_1p(),
            _ => return Err(none()),
        };
        if x.is_finite() {
            Ok(x)
        } else {
            Err(none())
        }
    }

    pub fn phi_formula(&self) -> &'static str {
        use DivergenceKind::*;
        match self.kind {
            Kl => "x log x",
            KlRev => "-log x",
            Js => "-(x+1) log((1+x)/2) + x log x",
            JsShifted => "x log x - (x+1) log(1+x)",
            PearsonChi2 => "(x-1)^2",
            Tv => "|x-1|/2",
            SqHellinger => "(sqrt(x)-1)^2",
            NeymanChi2 => "(1-x)^2/x",
            GammaJs => "x log(gx/(1+gx)) + (1/g) log(1/(1+gx))",
            GammaPearson => "(gx-1)^2/g",
            GammaTv => "|gx-1|/(2g)",
        }
    }

    pub fn conjugate_formula(&self) -> &'static str {
        use DivergenceKind::*;
        match self.kind {
            Kl => "exp(t-1)",
            KlRev => "-1 - log(-t)",
            Js => "-log(2 - e^t)",
            JsShifted => "-log(1 - e^t)",
            PearsonChi2 => "t^2/4 + t",
            Tv => "t",
            SqHellinger => "t/(1-t)",
            NeymanChi2 => "2 - 2 sqrt(1-t)",
            GammaJs => "-log(1 - e^t)/g",
            GammaPearson => "(t^2/4 + t)/g",
            GammaTv => "t/g",
        }
    }

    pub fn activation_formula(&self) -> &'static str {
        use DivergenceKind::*;
        match self.kind {
            Kl | PearsonChi2 | GammaPearson => "x",
            KlRev => "-exp(x)",
            Js => "log(2/(1+exp(-x)))",
            JsShifted | GammaJs => "log sigmoid(x)",
            Tv | GammaTv => "tanh(x)/2",
            SqHellinger | NeymanChi2 => "1 - exp(x)",
        }
    }

    /// `φ(x) + φ*(t) - x·t`, nonnegative for a valid conjugate pair.
    pub fn fenchel_young_gap(&self, x: f64, t: f64) -> Result<f64> {
        Ok(self.phi(x)? + self.conjugate(t)? - x * t)
    }
}

/// Probability vector on `{0, .., n-1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteDistribution {
    probs: Vec<f64>,
}

impl FiniteDistribution {
    pub const NORMALIZATION_TOL: f64 = 1e-12;

    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(DivergenceError::InvalidDistribution("empty support".into()));
        }
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !(p.is_finite() && **p >= 0.0))
        {
            return Err(DivergenceError::InvalidDistribution(format!(
                "entry {i} is {p}"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > Self::NORMALIZATION_TOL {
            return Err(DivergenceError::InvalidDistribution(format!(
                "entries sum to {total}"
            )));
        }
        Ok(Self { probs })
    }

    /// Normalizes nonnegative weights with a positive total.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) || weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(DivergenceError::InvalidDistribution(format!(
                "weights {weights:?} cannot be normalized"
            )));
        }
        Self::new(weights.iter().map(|w| w / total).collect())
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::from_weights(&vec![1.0; n])
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

fn same_support(ps: &FiniteDistribution, pt: &FiniteDistribution) -> Result<()> {
    if ps.len() != pt.len() {
        return Err(DivergenceError::SupportMismatch(ps.len(), pt.len()));
    }
    Ok(())
}

/// `Σ_x pt(x)·φ(ps(x)/pt(x)) - φ(1)`, i.e. the divergence of the spec with
/// its constant offset removed, so that it vanishes at `ps = pt`.
pub fn analytic_f_divergence(
    ps: &FiniteDistribution,
    pt: &FiniteDistribution,
    spec: &DivergenceSpec,
) -> Result<f64> {
    Ok(raw_f_sum(ps, pt, spec)? - spec.shift_constant())
}

/// `Σ_x pt(x)·φ(ps(x)/pt(x))` with no offset correction.
pub fn raw_f_sum(
    ps: &FiniteDistribution,
    pt: &FiniteDistribution,
    spec: &DivergenceSpec,
) -> Result<f64> {
    same_support(ps, pt)?;
    let mut total = 0.0;
    for (atom, (&s, &t)) in ps.probs.iter().zip(&pt.probs).enumerate() {
        if t == 0.0 {
            if s > 0.0 {
                return Err(DivergenceError::AbsoluteContinuity { atom, ps: s });
            }
            continue;
        }
        total += t * spec.phi(s / t)?;
    }
    Ok(total)
}

/// `KL(p ‖ q)` in nats, infinite when `p` puts mass where `q` has none.
pub fn kl_divergence(p: &FiniteDistribution, q: &FiniteDistribution) -> Result<f64> {
    same_support(p, q)?;
    Ok(p.probs
        .iter()
        .zip(&q.probs)
        .map(|(&a, &b)| {
            if a == 0.0 {
                0.0
            } else if b == 0.0 {
                f64::INFINITY
            } else {
                a * (a / b).ln()
            }
        })
        .sum())
}

/// `γ/(γ+1)·KL(ps‖m) + 1/(γ+1)·KL(pt‖m)` with `m = (γ·ps + pt)/(γ+1)`.
pub fn analytic_gamma_js(ps: &FiniteDistribution, pt: &FiniteDistribution, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(DivergenceError::InvalidGamma(gamma));
    }
    same_support(ps, pt)?;
    let w = gamma / (gamma + 1.0);
    let m: Vec<f64> = ps
        .probs
        .iter()
        .zip(&pt.probs)
        .map(|(&s, &t)| w * s + (1.0 - w) * t)
        .collect();
    let m = FiniteDistribution { probs: m };
    Ok(w * kl_divergence(ps, &m)? + (1.0 - w) * kl_divergence(pt, &m)?)
}

/// Log-spaced grid on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1).max(1) as f64).exp())
        .collect()
}
