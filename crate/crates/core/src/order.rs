//! Entropy orders and effective numbers.

use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Orders within this distance of 1 are evaluated with the Shannon limit formula.
pub const SHANNON_WINDOW: f64 = 1e-9;

/// Orders with magnitude beyond this are evaluated as ±∞.
pub const INFINITY_CUTOFF: f64 = 1e6;

/// Orders with `|1 - q|` above this accumulate power sums in the log domain.
pub const LOG_DOMAIN_CUTOFF: f64 = 10.0;

/// Entropy order `q` on the extended real line. Also Rényi's `α`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Order(f64);

/// Finite orders serialize as numbers, infinite ones as `"inf"` / `"-inf"`.
impl Serialize for Order {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else {
            s.collect_str(self)
        }
    }
}

impl<'de> Deserialize<'de> for Order {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(v) => Order::new(v),
            Raw::Text(t) => t.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// How an [`Order`] is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OrderKind {
    NegInfinity,
    /// The Shannon limit `q → 1`.
    Shannon,
    Finite(f64),
    PosInfinity,
}

impl Order {
    pub const INFINITY: Order = Order(f64::INFINITY);
    pub const NEG_INFINITY: Order = Order(f64::NEG_INFINITY);
    pub const SHANNON: Order = Order(1.0);

    pub fn new(q: f64) -> Result<Self> {
        if q.is_nan() {
            return Err(Error::InvalidOrder("NaN".into()));
        }
        Ok(Order(q))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn kind(self) -> OrderKind {
        let q = self.0;
        if q > INFINITY_CUTOFF {
            OrderKind::PosInfinity
        } else if q < -INFINITY_CUTOFF {
            OrderKind::NegInfinity
        } else if (q - 1.0).abs() < SHANNON_WINDOW {
            OrderKind::Shannon
        } else {
            OrderKind::Finite(q)
        }
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }
}

impl TryFrom<f64> for Order {
    type Error = Error;

    fn try_from(q: f64) -> Result<Self> {
        Order::new(q)
    }
}

impl From<Order> for f64 {
    fn from(q: Order) -> f64 {
        q.0
    }
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 == f64::INFINITY {
            f.write_str("inf")
        } else if self.0 == f64::NEG_INFINITY {
            f.write_str("-inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl FromStr for Order {
    type Err = Error;

    /// Accepts any float literal plus `inf`, `+inf`, `-inf`, `infinity` and `∞`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        let v = match t.as_str() {
            "inf" | "+inf" | "infinity" | "+infinity" | "∞" | "+∞" => f64::INFINITY,
            "-inf" | "-infinity" | "-∞" => f64::NEG_INFINITY,
            "pi" | "π" => core::f64::consts::PI,
            _ => t
                .parse::<f64>()
                .map_err(|_| Error::InvalidOrder(format!("cannot parse {s:?}")))?,
        };
        Order::new(v)
    }
}

/// Parses a comma-separated list of orders, e.g. `"0,1,2,inf"`.
pub fn parse_orders(s: &str) -> Result<Vec<Order>> {
    let qs = s
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(str::parse)
        .collect::<Result<Vec<Order>>>()?;
    if qs.is_empty() {
        return Err(Error::InvalidOrder("empty order list".into()));
    }
    Ok(qs)
}

/// Output form of a diversity value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Form {
    #[default]
    EffectiveNumber,
    LogForm,
}

/// An effective number of distinct elements: the exponential of an entropy.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EffectiveNumber(f64);

impl EffectiveNumber {
    pub fn new(value: f64) -> Self {
        EffectiveNumber(value)
    }

    /// Builds the effective number from an entropy in nats.
    pub fn from_entropy(h: f64) -> Self {
        EffectiveNumber(h.exp())
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// The underlying entropy, `ln` of the effective number.
    pub fn log_form(self) -> f64 {
        self.0.ln()
    }

    pub fn in_form(self, form: Form) -> f64 {
        match form {
            Form::EffectiveNumber => self.0,
            Form::LogForm => self.log_form(),
        }
    }
}

/// Power-mean style effective number `(Σ w_i x_i^(q-1))^(1/(1-q))` over positive weights,
/// with the limits at `q = 1` and `q = ±∞`.
///
/// `weights` must sum to 1 and both slices must only contain entries with `w_i > 0`
/// and `x_i > 0`. Hill numbers use `x = p`, LCR uses `x = Zp`, the Vendi score uses
/// `w = x = λ`.
pub(crate) fn weighted_power_mean_inverse(weights: &[f64], xs: &[f64], q: Order) -> f64 {
    debug_assert_eq!(weights.len(), xs.len());
    match q.kind() {
        OrderKind::PosInfinity => 1.0 / xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        OrderKind::NegInfinity => 1.0 / xs.iter().copied().fold(f64::INFINITY, f64::min),
        OrderKind::Shannon => {
            let h: f64 = weights.iter().zip(xs).map(|(w, x)| -w * x.ln()).sum();
            h.exp()
        }
        OrderKind::Finite(q) => {
            let e = q - 1.0;
            let log_sum = if (1.0 - q).abs() > LOG_DOMAIN_CUTOFF {
                log_sum_exp(weights.iter().zip(xs).map(|(w, x)| w.ln() + e * x.ln()))
            } else {
                weights
                    .iter()
                    .zip(xs)
                    .map(|(w, x)| w * x.powf(e))
                    .sum::<f64>()
                    .ln()
            };
            (log_sum / (1.0 - q)).exp()
        }
    }
}

pub(crate) fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + terms.map(|t| (t - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_infinities() {
        assert_eq!("inf".parse::<Order>().unwrap(), Order::INFINITY);
        assert_eq!("-inf".parse::<Order>().unwrap(), Order::NEG_INFINITY);
        assert_eq!(" 2.5 ".parse::<Order>().unwrap().value(), 2.5);
        assert!("nan".parse::<Order>().is_err());
        assert!("abc".parse::<Order>().is_err());
        let qs = parse_orders("0,1,inf").unwrap();
        assert_eq!(qs.len(), 3);
        assert!(parse_orders("").is_err());
    }

    #[test]
    fn kind_cutoffs() {
        assert_eq!(Order::new(1.0 + 1e-10).unwrap().kind(), OrderKind::Shannon);
        assert_eq!(
            Order::new(1.0 + 1e-6).unwrap().kind(),
            OrderKind::Finite(1.0 + 1e-6)
        );
        assert_eq!(Order::new(2e6).unwrap().kind(), OrderKind::PosInfinity);
        assert_eq!(Order::new(-2e6).unwrap().kind(), OrderKind::NegInfinity);
        assert_eq!(Order::new(1e6).unwrap().kind(), OrderKind::Finite(1e6));
    }

    #[test]
    fn display_round_trips() {
        for q in [
            Order::INFINITY,
            Order::NEG_INFINITY,
            Order::new(0.3).unwrap(),
        ] {
            assert_eq!(q.to_string().parse::<Order>().unwrap(), q);
        }
    }

    #[test]
    fn log_domain_matches_direct() {
        let w = [0.2f64, 0.3, 0.5];
        let x = [0.4f64, 0.7, 0.9];
        // q = 11 takes the log-domain path; compare with a direct evaluation.
        let direct: f64 = w.iter().zip(&x).map(|(w, x)| w * x.powf(10.0)).sum::<f64>();
        let expected = direct.powf(1.0 / -10.0);
        let got = weighted_power_mean_inverse(&w, &x, Order::new(11.0).unwrap());
        assert!((got - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn effective_number_forms() {
        let e = EffectiveNumber::from_entropy(2f64.ln());
        assert!((e.value() - 2.0).abs() < 1e-15);
        assert!((e.in_form(Form::LogForm) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip_including_infinities() {
        let qs = vec![
            Order::NEG_INFINITY,
            Order::new(0.5).unwrap(),
            Order::SHANNON,
            Order::INFINITY,
        ];
        let json = serde_json::to_string(&qs).unwrap();
        assert_eq!(json, r#"["-inf",0.5,1.0,"inf"]"#);
        assert_eq!(serde_json::from_str::<Vec<Order>>(&json).unwrap(), qs);
        assert!(serde_json::from_str::<Order>("\"nope\"").is_err());
    }
}
