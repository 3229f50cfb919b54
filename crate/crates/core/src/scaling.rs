//! Hyperparameter algebra for width-scaled initializations.
//!
//! Every scale (the output factor `alpha` and the three initialization standard
//! deviations) is a [`PowerLaw`] in the hidden width `m`. Exponents are exact
//! rationals, so the phase coordinates `gamma2`/`gamma3` come out of pure
//! exponent arithmetic and round-trip without any floating-point slack.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Div, Mul};
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Network;

/// Exact rational exponent (or squared coefficient).
pub type Rational = Ratio<i64>;

/// Parses `"-11/30"`, `"3"` or a finite decimal such as `"1.1"` into an exact rational.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::InvalidConfig(format!("`{s}` is not a rational number"));
    if let Some((num, den)) = s.split_once('/') {
        let num: i64 = num.trim().parse().map_err(|_| bad())?;
        let den: i64 = den.trim().parse().map_err(|_| bad())?;
        if den == 0 {
            return Err(bad());
        }
        return Ok(Rational::new(num, den));
    }
    let (neg, digits) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) || frac_part.len() > 15
    {
        return Err(bad());
    }
    let den = 10i64.pow(frac_part.len() as u32);
    let whole: i64 = if int_part.is_empty() { 0 } else { int_part.parse().map_err(|_| bad())? };
    let frac: i64 = if frac_part.is_empty() { 0 } else { frac_part.parse().map_err(|_| bad())? };
    let num = whole
        .checked_mul(den)
        .and_then(|w| w.checked_add(frac))
        .ok_or_else(bad)?;
    Ok(Rational::new(if neg { -num } else { num }, den))
}

/// Converts a float to the rational its shortest decimal representation names,
/// so `1.1` becomes exactly `11/10`.
pub fn rational_from_f64(x: f64) -> Result<Rational> {
    if !x.is_finite() {
        return Err(Error::InvalidConfig(format!("{x} is not finite")));
    }
    let text = format!("{x}");
    if text.contains('e') {
        return Err(Error::InvalidConfig(format!(
            "{x} has no short decimal form; pass an exact rational"
        )));
    }
    parse_rational(&text)
}

fn rational_to_f64(r: Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// A positive scale as a function of width:
/// `sqrt(coef_sq) * prod_k (m + shift_k)^(exponent_k)`.
///
/// Pure power laws have a single factor with shift 0. Shifted factors express
/// fan-in/fan-out rules such as `sqrt(2 / (m + 1))`; they change the value at
/// finite width but not the asymptotic exponent.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PowerLaw {
    coef_sq: Rational,
    /// shift -> exponent, zero exponents removed
    factors: BTreeMap<i64, Rational>,
}

impl PowerLaw {
    pub fn one() -> Self {
        PowerLaw {
            coef_sq: Rational::one(),
            factors: BTreeMap::new(),
        }
    }

    /// `sqrt(coef_sq)`, independent of `m`.
    pub fn constant(coef_sq: Rational) -> Self {
        PowerLaw {
            coef_sq,
            factors: BTreeMap::new(),
        }
    }

    /// `m^exponent`
    pub fn monomial(exponent: Rational) -> Self {
        Self::shifted(Rational::one(), 0, exponent)
    }

    /// `sqrt(coef_sq) * m^exponent`
    pub fn pure(coef_sq: Rational, exponent: Rational) -> Self {
        Self::shifted(coef_sq, 0, exponent)
    }

    /// `sqrt(coef_sq) * (m + shift)^exponent`
    pub fn shifted(coef_sq: Rational, shift: i64, exponent: Rational) -> Self {
        let mut law = PowerLaw::constant(coef_sq);
        law.push_factor(shift, exponent);
        law
    }

    fn push_factor(&mut self, shift: i64, exponent: Rational) {
        let e = self.factors.entry(shift).or_insert_with(Rational::zero);
        *e += exponent;
        if e.is_zero() {
            self.factors.remove(&shift);
        }
    }

    pub fn coef_sq(&self) -> Rational {
        self.coef_sq
    }

    pub fn coefficient(&self) -> f64 {
        rational_to_f64(self.coef_sq).sqrt()
    }

    pub fn factors(&self) -> impl Iterator<Item = (i64, Rational)> + '_ {
        self.factors.iter().map(|(s, e)| (*s, *e))
    }

    /// Asymptotic exponent: `lim log(value) / log(m)`.
    pub fn exponent(&self) -> Rational {
        self.factors.values().fold(Rational::zero(), |acc, e| acc + e)
    }

    /// True when every factor has shift 0.
    pub fn is_pure(&self) -> bool {
        self.factors.keys().all(|s| *s == 0)
    }

    pub fn eval(&self, m: usize) -> f64 {
        let mut v = self.coefficient();
        for (shift, e) in &self.factors {
            v *= (m as f64 + *shift as f64).powf(rational_to_f64(*e));
        }
        v
    }

    pub fn recip(&self) -> PowerLaw {
        PowerLaw {
            coef_sq: self.coef_sq.recip(),
            factors: self.factors.iter().map(|(s, e)| (*s, -*e)).collect(),
        }
    }

    /// Multiplies by the constant `sqrt(c_sq)`.
    pub fn times_constant(&self, c_sq: Rational) -> PowerLaw {
        PowerLaw {
            coef_sq: self.coef_sq * c_sq,
            factors: self.factors.clone(),
        }
    }
}

impl Mul for &PowerLaw {
    type Output = PowerLaw;

    fn mul(self, rhs: &PowerLaw) -> PowerLaw {
        let mut out = PowerLaw::constant(self.coef_sq * rhs.coef_sq);
        for (s, e) in self.factors().chain(rhs.factors()) {
            out.push_factor(s, e);
        }
        out
    }
}

impl Div for &PowerLaw {
    type Output = PowerLaw;

    fn div(self, rhs: &PowerLaw) -> PowerLaw {
        self * &rhs.recip()
    }
}

impl fmt::Display for PowerLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() && self.coef_sq.is_one() {
            return f.write_str("1");
        }
        let mut parts = Vec::new();
        if self.coef_sq != Rational::one() || self.factors.is_empty() {
            parts.push(match (exact_sqrt(*self.coef_sq.numer()), exact_sqrt(*self.coef_sq.denom())) {
                (Some(n), Some(1)) => n.to_string(),
                (Some(n), Some(d)) => format!("{n}/{d}"),
                _ => format!("sqrt({})", self.coef_sq),
            });
        }
        for (s, e) in &self.factors {
            let base = match s.cmp(&0) {
                std::cmp::Ordering::Equal => "m".to_string(),
                std::cmp::Ordering::Greater => format!("(m+{s})"),
                std::cmp::Ordering::Less => format!("(m-{})", s.abs()),
            };
            if e.is_one() {
                parts.push(base);
            } else {
                parts.push(format!("{base}^({e})"));
            }
        }
        write!(f, "{}", parts.join("*"))
    }
}

fn exact_sqrt(n: i64) -> Option<i64> {
    if n < 0 {
        return None;
    }
    let r = (n as f64).sqrt().round() as i64;
    (r * r == n).then_some(r)
}

/// Exact exponents as `"p/q"` strings in JSON.
mod ratio_text {
    use super::{parse_rational, Rational};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&r.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        parse_rational(&String::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

/// JSON form of a law: `{"coef_sq": "2", "factors": [{"shift": 1, "exponent": "-1/2"}]}`.
/// The shorthand `{"coefficient": 1.5, "exponent": "-1/2"}` is also accepted.
#[derive(Serialize, Deserialize)]
struct LawRepr {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coef_sq: Option<String>,
    #[serde(default, skip_serializing)]
    coefficient: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    exponent: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    factors: Vec<FactorRepr>,
}

#[derive(Serialize, Deserialize)]
struct FactorRepr {
    #[serde(default)]
    shift: i64,
    exponent: String,
}

impl Serialize for PowerLaw {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        LawRepr {
            coef_sq: Some(self.coef_sq.to_string()),
            coefficient: None,
            exponent: None,
            factors: self
                .factors()
                .map(|(shift, e)| FactorRepr {
                    shift,
                    exponent: e.to_string(),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PowerLaw {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = LawRepr::deserialize(d)?;
        let coef_sq = match (repr.coef_sq, repr.coefficient) {
            (Some(_), Some(_)) => {
                return Err(D::Error::custom("give either coef_sq or coefficient, not both"))
            }
            (Some(c), None) => parse_rational(&c).map_err(D::Error::custom)?,
            (None, Some(c)) => {
                let c = rational_from_f64(c).map_err(D::Error::custom)?;
                c * c
            }
            (None, None) => Rational::one(),
        };
        let mut law = PowerLaw::constant(coef_sq);
        if let Some(e) = repr.exponent {
            law.push_factor(0, parse_rational(&e).map_err(D::Error::custom)?);
        }
        for f in repr.factors {
            law.push_factor(f.shift, parse_rational(&f.exponent).map_err(D::Error::custom)?);
        }
        Ok(law)
    }
}

/// Complete initialization and output-scale specification at one width.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperConfig {
    pub alpha: PowerLaw,
    pub beta1: PowerLaw,
    pub beta2: PowerLaw,
    pub beta3: PowerLaw,
    pub m: usize,
    pub d: usize,
    pub d_out: usize,
    /// Declared `beta2 = B * beta3`, stored as `B^2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_sq: Option<Rational>,
}

impl HyperConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.d == 0 || self.d_out == 0 {
            return Err(Error::InvalidConfig(format!(
                "widths must be positive (m={}, d={}, d_out={})",
                self.m, self.d, self.d_out
            )));
        }
        for (name, law) in self.laws() {
            if !law.coef_sq.is_positive() {
                return Err(Error::InvalidConfig(format!(
                    "{name} must have a positive coefficient, got {law}"
                )));
            }
            let v = law.eval(self.m);
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} evaluates to {v} at m={}",
                    self.m
                )));
            }
        }
        if let Some(b_sq) = self.b_sq {
            if !b_sq.is_positive() {
                return Err(Error::InvalidConfig("B must be positive".into()));
            }
            if self.beta2 != self.beta3.times_constant(b_sq) {
                return Err(Error::InvalidConfig(format!(
                    "declared beta2 = B*beta3 with B^2={b_sq}, but beta2={} and beta3={}",
                    self.beta2, self.beta3
                )));
            }
        }
        Ok(())
    }

    pub fn laws(&self) -> [(&'static str, &PowerLaw); 4] {
        [
            ("alpha", &self.alpha),
            ("beta1", &self.beta1),
            ("beta2", &self.beta2),
            ("beta3", &self.beta3),
        ]
    }

    /// Same laws evaluated at another width.
    pub fn at_width(&self, m: usize) -> HyperConfig {
        HyperConfig { m, ..self.clone() }
    }

    pub fn with_dims(mut self, d: usize, d_out: usize) -> HyperConfig {
        self.d = d;
        self.d_out = d_out;
        self
    }

    pub fn alpha_value(&self) -> f64 {
        self.alpha.eval(self.m)
    }

    /// `[beta1, beta2, beta3]` at the configured width.
    pub fn beta_values(&self) -> [f64; 3] {
        [
            self.beta1.eval(self.m),
            self.beta2.eval(self.m),
            self.beta3.eval(self.m),
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Preset {
    #[serde(rename = "NTK")]
    Ntk,
    LeCun,
    He,
    Xavier,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Ntk, Preset::LeCun, Preset::He, Preset::Xavier];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Ntk => "NTK",
            Preset::LeCun => "LeCun",
            Preset::He => "He",
            Preset::Xavier => "Xavier",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownPreset(s.to_string()))
    }
}

/// Standard initialization schemes written as width laws (both hidden widths equal `m`).
pub fn preset(name: Preset, m: usize, d: usize, d_out: usize) -> Result<HyperConfig> {
    if d == 0 || d > i64::MAX as usize {
        return Err(Error::InvalidConfig(format!("input dimension {d} out of range")));
    }
    let r = |n: i64, k: i64| Rational::new(n, k);
    let di = d as i64;
    let half = r(-1, 2);
    let (alpha, beta1, beta2, beta3) = match name {
        // alpha = sqrt(m1 m2) = m
        Preset::Ntk => (
            PowerLaw::monomial(Rational::one()),
            PowerLaw::one(),
            PowerLaw::one(),
            PowerLaw::one(),
        ),
        Preset::LeCun => (
            PowerLaw::one(),
            PowerLaw::constant(r(1, di)),
            PowerLaw::pure(Rational::one(), half),
            PowerLaw::pure(Rational::one(), half),
        ),
        Preset::He => (
            PowerLaw::one(),
            PowerLaw::constant(r(2, di)),
            PowerLaw::pure(r(2, 1), half),
            PowerLaw::pure(r(2, 1), half),
        ),
        // sqrt(2/(d+m)), sqrt(2/(m+m)), sqrt(2/(m+1))
        Preset::Xavier => (
            PowerLaw::one(),
            PowerLaw::shifted(r(2, 1), di, half),
            PowerLaw::pure(Rational::one(), half),
            PowerLaw::shifted(r(2, 1), 1, half),
        ),
    };
    let cfg = HyperConfig {
        alpha,
        beta1,
        beta2,
        beta3,
        m,
        d,
        d_out,
        b_sq: None,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// kappa ratios at a concrete width plus the exact phase coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingSummary {
    pub m: usize,
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa3: f64,
    pub kappa1_law: PowerLaw,
    pub kappa2_law: PowerLaw,
    pub kappa3_law: PowerLaw,
    #[serde(with = "ratio_text")]
    pub gamma2: Rational,
    #[serde(with = "ratio_text")]
    pub gamma3: Rational,
    /// Factor converting wall time to normalized time, `(alpha * k1 * k2 * k3)^(-2/3)`.
    pub time_factor: f64,
}

impl ScalingSummary {
    pub fn gamma2_f64(&self) -> f64 {
        rational_to_f64(self.gamma2)
    }

    pub fn gamma3_f64(&self) -> f64 {
        rational_to_f64(self.gamma3)
    }
}

pub fn kappas(config: &HyperConfig) -> ScalingSummary {
    let k1 = &config.beta3 / &config.beta2;
    let k2 = &config.beta3 / &config.beta1;
    let k3 = &(&(&config.beta1 * &config.beta2) * &config.beta3) / &config.alpha;
    let m = config.m;
    let (kappa1, kappa2, kappa3) = (k1.eval(m), k2.eval(m), k3.eval(m));
    let time_factor = (config.alpha_value() * kappa1 * kappa2 * kappa3).powf(-2.0 / 3.0);
    ScalingSummary {
        m,
        kappa1,
        kappa2,
        kappa3,
        gamma2: -k2.exponent(),
        gamma3: -k3.exponent(),
        kappa1_law: k1,
        kappa2_law: k2,
        kappa3_law: k3,
        time_factor,
    }
}

/// A point of the phase diagram together with the free choices that pick one
/// concrete initialization for it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PhasePoint {
    #[serde(with = "ratio_text")]
    pub gamma2: Rational,
    #[serde(with = "ratio_text")]
    pub gamma3: Rational,
    /// `alpha = m^alpha_exponent`
    #[serde(with = "ratio_text")]
    pub alpha_exponent: Rational,
    /// `beta2 = B * beta3`, stored as `B^2`
    #[serde(with = "ratio_text")]
    pub b_sq: Rational,
}

impl PhasePoint {
    /// Reads the coordinates through their shortest decimal form (`1.1` is `11/10`).
    pub fn new(gamma2: f64, gamma3: f64) -> Result<Self> {
        Ok(PhasePoint {
            gamma2: rational_from_f64(gamma2)?,
            gamma3: rational_from_f64(gamma3)?,
            alpha_exponent: Rational::zero(),
            b_sq: Rational::one(),
        })
    }

    pub fn exact(gamma2: Rational, gamma3: Rational) -> Self {
        PhasePoint {
            gamma2,
            gamma3,
            alpha_exponent: Rational::zero(),
            b_sq: Rational::one(),
        }
    }

    pub fn with_alpha_exponent(mut self, e: Rational) -> Self {
        self.alpha_exponent = e;
        self
    }

    pub fn with_b_sq(mut self, b_sq: Rational) -> Self {
        self.b_sq = b_sq;
        self
    }

    pub fn gamma2_f64(&self) -> f64 {
        rational_to_f64(self.gamma2)
    }

    pub fn gamma3_f64(&self) -> f64 {
        rational_to_f64(self.gamma3)
    }
}

/// Inverse map from phase coordinates to a concrete initialization.
///
/// With `alpha = m^a`, `beta1 = m^((a + 2 g2 - g3) / 3)`, `beta3 = m^((a - g2 - g3) / 3)`
/// and `beta2 = B * beta3`, so `kappa2 = m^-g2` and `kappa3 = B * m^-g3`.
pub fn config_from_gammas(point: PhasePoint, m: usize, d: usize, d_out: usize) -> Result<HyperConfig> {
    let PhasePoint {
        gamma2: g2,
        gamma3: g3,
        alpha_exponent: a,
        b_sq,
    } = point;
    let three = Rational::from_integer(3);
    let beta3 = PowerLaw::monomial((a - g2 - g3) / three);
    let cfg = HyperConfig {
        alpha: PowerLaw::monomial(a),
        beta1: PowerLaw::monomial((a + Rational::from_integer(2) * g2 - g3) / three),
        beta2: beta3.times_constant(b_sq),
        beta3,
        m,
        d,
        d_out,
        b_sq: Some(b_sq),
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Rescales a network drawn under `config` to unit-variance parameters.
///
/// The returned network computes the same function: its output factor becomes
/// `1 / kappa3` and its hidden bias input is divided by `beta1`. One step of
/// size `lr` on the original network is one step of size `lr * time_factor`
/// on the normalized one, weighted per layer by 1, `kappa1^2` and `kappa2^2`.
pub fn normalize(net: &Network, config: &HyperConfig) -> Result<(Network, f64)> {
    if net.width() != config.m || net.input_dim() != config.d || net.output_dim() != config.d_out {
        return Err(Error::Dimension(format!(
            "network is {}x{}x{}, config is {}x{}x{}",
            net.input_dim(),
            net.width(),
            net.output_dim(),
            config.d,
            config.m,
            config.d_out
        )));
    }
    let [b1, b2, b3] = config.beta_values();
    let summary = kappas(config);
    let mut out = net.clone();
    out.w1.scale(1.0 / b1);
    out.w2.scale(1.0 / b2);
    out.a.scale(1.0 / b3);
    out.alpha = 1.0 / summary.kappa3;
    out.hidden_bias_input = net.hidden_bias_input / b1;
    Ok((out, summary.time_factor))
}

/// Step size that advances every configuration by `normalized_lr` units of normalized time.
pub fn effective_lr(config: &HyperConfig, normalized_lr: f64) -> Result<f64> {
    if !(normalized_lr.is_finite() && normalized_lr > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "normalized learning rate must be positive, got {normalized_lr}"
        )));
    }
    Ok(normalized_lr / kappas(config).time_factor)
}
