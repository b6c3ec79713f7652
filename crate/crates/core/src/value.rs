//! Exact and approximate market value arithmetic.
//!
//! Linear and piecewise-linear valuations evaluate to exact big rationals;
//! exponential valuations evaluate to IEEE doubles. A [`Value`] carries
//! either representation, and [`Value::cmp_eps`] is the single comparison
//! primitive: exact pairs compare exactly, while any comparison touching a
//! float treats a difference within `eps` as a tie. The solver, matcher,
//! and verifier all route ordering decisions through it so the two
//! arithmetic modes behave uniformly.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

/// Default float-mode comparison tolerance.
pub const DEFAULT_EPS: f64 = 1e-9;

/// A market value: exact rational or IEEE double.
#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Exact(BigRational),
    Approx(f64),
}

impl Value {
    pub fn from_int(n: i64) -> Self {
        Value::Exact(int_rational(n))
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Value::Exact(_))
    }

    pub fn as_exact(&self) -> Option<&BigRational> {
        match self {
            Value::Exact(r) => Some(r),
            Value::Approx(_) => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Value::Exact(r) => r.to_f64().unwrap_or(f64::NAN),
            Value::Approx(x) => *x,
        }
    }

    /// Compare under the given tolerance. Exact pairs compare exactly;
    /// anything involving a float compares with `|a - b| <= eps` as a tie.
    pub fn cmp_eps(&self, other: &Value, eps: f64) -> Ordering {
        match (self, other) {
            (Value::Exact(a), Value::Exact(b)) => a.cmp(b),
            _ => {
                let a = self.to_f64();
                let b = other.to_f64();
                if (a - b).abs() <= eps {
                    Ordering::Equal
                } else if a < b {
                    Ordering::Less
                } else {
                    Ordering::Greater
                }
            }
        }
    }

    pub fn ge_eps(&self, other: &Value, eps: f64) -> bool {
        self.cmp_eps(other, eps) != Ordering::Less
    }

    pub fn gt_eps(&self, other: &Value, eps: f64) -> bool {
        self.cmp_eps(other, eps) == Ordering::Greater
    }

    pub fn lt_eps(&self, other: &Value, eps: f64) -> bool {
        self.cmp_eps(other, eps) == Ordering::Less
    }

    pub fn eq_eps(&self, other: &Value, eps: f64) -> bool {
        self.cmp_eps(other, eps) == Ordering::Equal
    }
}

impl Add for &Value {
    type Output = Value;

    fn add(self, rhs: &Value) -> Value {
        match (self, rhs) {
            (Value::Exact(a), Value::Exact(b)) => Value::Exact(a + b),
            _ => Value::Approx(self.to_f64() + rhs.to_f64()),
        }
    }
}

impl Sub for &Value {
    type Output = Value;

    fn sub(self, rhs: &Value) -> Value {
        match (self, rhs) {
            (Value::Exact(a), Value::Exact(b)) => Value::Exact(a - b),
            _ => Value::Approx(self.to_f64() - rhs.to_f64()),
        }
    }
}

impl Neg for &Value {
    type Output = Value;

    fn neg(self) -> Value {
        match self {
            Value::Exact(a) => Value::Exact(-a),
            Value::Approx(x) => Value::Approx(-x),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Exact(r) => write!(f, "{}", r),
            Value::Approx(x) => write!(f, "{}", x),
        }
    }
}

/// The rational `n/1`.
pub fn int_rational(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// The rational `n/d`; panics on a zero denominator.
pub fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Parse "n" or "n/d" with arbitrary-precision integers.
pub fn parse_rational(s: &str) -> Result<BigRational, String> {
    let body = s.trim();
    let (numer, denom) = match body.split_once('/') {
        Some((n, d)) => (n, d),
        None => (body, "1"),
    };
    let n: BigInt = numer
        .trim()
        .parse()
        .map_err(|_| format!("invalid rational \"{s}\""))?;
    let d: BigInt = denom
        .trim()
        .parse()
        .map_err(|_| format!("invalid rational \"{s}\""))?;
    if d.is_zero() {
        return Err(format!("invalid rational \"{s}\": zero denominator"));
    }
    Ok(BigRational::new(n, d))
}

/// Canonical text form: "n" for integers, "n/d" otherwise.
pub fn format_rational(r: &BigRational) -> String {
    r.to_string()
}
