//! Strictly increasing valuation functions of integer money.
//!
//! Three families are supported: linear `a*x + b`, piecewise-linear through
//! a breakpoint list (extended linearly beyond the extreme segments), and
//! exponential `a*exp(c*x) + b`. Linear and piecewise-linear evaluate
//! exactly over the rationals; exponential evaluates in doubles.
//! Monotonicity is validated analytically per family, never by sampling.

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::value::{int_rational, Value};

#[derive(Clone, Debug, PartialEq)]
pub enum Valuation {
    Linear {
        slope: BigRational,
        intercept: BigRational,
    },
    PiecewiseLinear {
        points: Vec<(BigRational, BigRational)>,
    },
    Exponential {
        scale: BigRational,
        offset: BigRational,
        rate: BigRational,
    },
}

impl Valuation {
    pub fn linear(slope: BigRational, intercept: BigRational) -> Self {
        Valuation::Linear { slope, intercept }
    }

    pub fn piecewise(points: Vec<(BigRational, BigRational)>) -> Self {
        Valuation::PiecewiseLinear { points }
    }

    pub fn exponential(scale: BigRational, offset: BigRational, rate: BigRational) -> Self {
        Valuation::Exponential {
            scale,
            offset,
            rate,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Valuation::Linear { .. } => "linear",
            Valuation::PiecewiseLinear { .. } => "piecewise_linear",
            Valuation::Exponential { .. } => "exponential",
        }
    }

    /// Linear and piecewise-linear evaluate exactly.
    pub fn is_exact_family(&self) -> bool {
        !matches!(self, Valuation::Exponential { .. })
    }

    /// Analytic strict-increase check plus per-family shape constraints.
    pub fn validate(&self) -> Result<(), String> {
        match self {
            Valuation::Linear { slope, .. } => {
                if slope <= &BigRational::zero() {
                    return Err("not strictly increasing: slope must be positive".into());
                }
                Ok(())
            }
            Valuation::PiecewiseLinear { points } => {
                if points.len() < 2 {
                    return Err(
                        "piecewise-linear valuation needs at least two breakpoints".into()
                    );
                }
                for pair in points.windows(2) {
                    if pair[1].0 <= pair[0].0 || pair[1].1 <= pair[0].1 {
                        return Err(
                            "not strictly increasing: breakpoints must increase in both \
                             coordinates"
                                .into(),
                        );
                    }
                }
                Ok(())
            }
            Valuation::Exponential { scale, rate, .. } => {
                if scale * rate <= BigRational::zero() {
                    return Err("not strictly increasing: requires a*c > 0".into());
                }
                Ok(())
            }
        }
    }

    /// Exact evaluation at a rational argument; `None` for the exponential
    /// family.
    pub fn eval_exact(&self, x: &BigRational) -> Option<BigRational> {
        match self {
            Valuation::Linear { slope, intercept } => Some(slope * x + intercept),
            Valuation::PiecewiseLinear { points } => {
                let k = segment_index(points, x);
                let (x0, y0) = &points[k];
                let (x1, y1) = &points[k + 1];
                Some(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
            }
            Valuation::Exponential { .. } => None,
        }
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        match self {
            Valuation::Linear { slope, intercept } => {
                slope.to_f64().unwrap_or(f64::NAN) * x + intercept.to_f64().unwrap_or(f64::NAN)
            }
            Valuation::PiecewiseLinear { points } => {
                let fx: Vec<(f64, f64)> = points
                    .iter()
                    .map(|(a, b)| {
                        (
                            a.to_f64().unwrap_or(f64::NAN),
                            b.to_f64().unwrap_or(f64::NAN),
                        )
                    })
                    .collect();
                let rx = BigRational::from_float(x).unwrap_or_else(|| int_rational(0));
                let k = segment_index(points, &rx);
                let (x0, y0) = fx[k];
                let (x1, y1) = fx[k + 1];
                y0 + (y1 - y0) * (x - x0) / (x1 - x0)
            }
            Valuation::Exponential {
                scale,
                offset,
                rate,
            } => {
                let a = scale.to_f64().unwrap_or(f64::NAN);
                let b = offset.to_f64().unwrap_or(f64::NAN);
                let c = rate.to_f64().unwrap_or(f64::NAN);
                a * (c * x).exp() + b
            }
        }
    }

    /// Value at integer money, in the family's arithmetic mode.
    pub fn eval_int(&self, x: i64) -> Value {
        match self {
            Valuation::Exponential { .. } => Value::Approx(self.eval_f64(x as f64)),
            _ => Value::Exact(self.eval_exact(&int_rational(x)).expect("exact family")),
        }
    }

    /// Value at the negation of integer money; this is how buyer valuations
    /// are read at a price `x`.
    pub fn eval_neg_int(&self, x: i64) -> Value {
        match self {
            Valuation::Exponential { .. } => Value::Approx(self.eval_f64(-(x as f64))),
            _ => Value::Exact(
                self.eval_exact(&-int_rational(x))
                    .expect("exact family"),
            ),
        }
    }
}

/// Index `k` of the segment `[x_k, x_{k+1}]` used at `x`, clamped to the
/// extreme segments outside the breakpoint span.
fn segment_index(points: &[(BigRational, BigRational)], x: &BigRational) -> usize {
    let upper = points.partition_point(|(px, _)| px <= x);
    if upper == 0 {
        0
    } else {
        (upper - 1).min(points.len() - 2)
    }
}
