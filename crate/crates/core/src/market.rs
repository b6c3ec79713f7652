//! Market instances: agent sets, per-pair price bounds, and valuations.
//!
//! Every seller-buyer pair carries integer price bounds, a seller valuation
//! read at the price, and a buyer valuation read at the negated price. The
//! threshold queries used by initialization and price updates are monotone
//! integer binary searches over the feasible range; inverses are never
//! computed symbolically.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::valuation::Valuation;
use crate::value::Value;

#[derive(Clone, Debug, PartialEq)]
pub struct PairData {
    pub lower: i64,
    pub upper: i64,
    pub seller_valuation: Valuation,
    pub buyer_valuation: Valuation,
}

/// A two-sided market over the complete pair set `U x V`.
#[derive(Clone, Debug, PartialEq)]
pub struct MarketInstance {
    sellers: Vec<String>,
    buyers: Vec<String>,
    pairs: Vec<PairData>, // row-major: (i, j) at i * buyers.len() + j
}

#[derive(Debug, Error, PartialEq)]
pub enum MarketError {
    #[error("unknown pair ({seller}, {buyer})")]
    UnknownPair { seller: usize, buyer: usize },
    #[error("money amount {x} outside [{lower}, {upper}] for pair ({seller}, {buyer})")]
    OutOfBounds {
        seller: usize,
        buyer: usize,
        x: i64,
        lower: i64,
        upper: i64,
    },
    #[error("malformed instance: {0}")]
    Malformed(String),
}

/// Result of a minimal price decrement search.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decrement {
    /// Smallest step `m >= 1` with `g(-(p-m)) >= target` and `p-m` feasible.
    Step(i64),
    /// No feasible step reaches the target; the pair belongs to `L`.
    Overflow,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            write!(f, "ok")
        } else {
            write!(f, "{}", self.violations.join("; "))
        }
    }
}

impl MarketInstance {
    pub fn new(
        sellers: Vec<String>,
        buyers: Vec<String>,
        pairs: Vec<PairData>,
    ) -> Result<Self, MarketError> {
        if pairs.len() != sellers.len() * buyers.len() {
            return Err(MarketError::Malformed(format!(
                "expected {} pair entries for a {}x{} market, got {}",
                sellers.len() * buyers.len(),
                sellers.len(),
                buyers.len(),
                pairs.len()
            )));
        }
        let unique: BTreeSet<&String> = sellers.iter().collect();
        if unique.len() != sellers.len() {
            return Err(MarketError::Malformed("duplicate seller id".into()));
        }
        let unique: BTreeSet<&String> = buyers.iter().collect();
        if unique.len() != buyers.len() {
            return Err(MarketError::Malformed("duplicate buyer id".into()));
        }
        Ok(MarketInstance {
            sellers,
            buyers,
            pairs,
        })
    }

    pub fn sellers(&self) -> &[String] {
        &self.sellers
    }

    pub fn buyers(&self) -> &[String] {
        &self.buyers
    }

    pub fn num_sellers(&self) -> usize {
        self.sellers.len()
    }

    pub fn num_buyers(&self) -> usize {
        self.buyers.len()
    }

    pub fn num_pairs(&self) -> usize {
        self.pairs.len()
    }

    pub fn seller_index(&self, id: &str) -> Option<usize> {
        self.sellers.iter().position(|s| s == id)
    }

    pub fn buyer_index(&self, id: &str) -> Option<usize> {
        self.buyers.iter().position(|b| b == id)
    }

    pub fn pair(&self, seller: usize, buyer: usize) -> Result<&PairData, MarketError> {
        if seller >= self.sellers.len() || buyer >= self.buyers.len() {
            return Err(MarketError::UnknownPair { seller, buyer });
        }
        Ok(&self.pairs[seller * self.buyers.len() + buyer])
    }

    /// All pairs in row-major (seller-major) order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let nb = self.buyers.len();
        (0..self.sellers.len()).flat_map(move |i| (0..nb).map(move |j| (i, j)))
    }

    /// True when every valuation belongs to an exact rational family.
    pub fn is_exact(&self) -> bool {
        self.pairs.iter().all(|p| {
            p.seller_valuation.is_exact_family() && p.buyer_valuation.is_exact_family()
        })
    }

    /// Zero payoff in the instance's arithmetic mode.
    pub fn zero_value(&self) -> Value {
        if self.is_exact() {
            Value::from_int(0)
        } else {
            Value::Approx(0.0)
        }
    }

    /// Widest `upper - lower` over all pairs; 0 for an empty market.
    pub fn max_range(&self) -> i64 {
        self.pairs
            .iter()
            .map(|p| p.upper.saturating_sub(p.lower))
            .max()
            .unwrap_or(0)
    }

    /// Seller valuation `f_ij(x)` at money `x`.
    pub fn evaluate_seller(&self, seller: usize, buyer: usize, x: i64) -> Result<Value, MarketError> {
        let pair = self.pair(seller, buyer)?;
        check_bounds(pair, seller, buyer, x)?;
        Ok(pair.seller_valuation.eval_int(x))
    }

    /// Buyer valuation `g_ji(-x)` at price `x`.
    pub fn evaluate_buyer(&self, seller: usize, buyer: usize, x: i64) -> Result<Value, MarketError> {
        let pair = self.pair(seller, buyer)?;
        check_bounds(pair, seller, buyer, x)?;
        Ok(pair.buyer_valuation.eval_neg_int(x))
    }

    /// Largest feasible integer price the buyer still accepts, or `None`
    /// when the buyer rejects even the lower bound.
    pub fn max_acceptable_price(
        &self,
        seller: usize,
        buyer: usize,
        eps: f64,
    ) -> Result<Option<i64>, MarketError> {
        let pair = self.pair(seller, buyer)?;
        let zero = Value::from_int(0);
        let accepts = |x: i64| pair.buyer_valuation.eval_neg_int(x).ge_eps(&zero, eps);
        if !accepts(pair.lower) {
            return Ok(None);
        }
        if accepts(pair.upper) {
            return Ok(Some(pair.upper));
        }
        // accepts() is decreasing in x; find the last true point.
        let mut lo = pair.lower;
        let mut hi = pair.upper;
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if accepts(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(Some(lo))
    }

    /// Smallest decrement `m >= 1` with `g(-(p-m)) >= target` and `p - m`
    /// still feasible, or [`Decrement::Overflow`] when no such step exists.
    pub fn min_decrement(
        &self,
        seller: usize,
        buyer: usize,
        p: i64,
        target: &Value,
        eps: f64,
    ) -> Result<Decrement, MarketError> {
        let pair = self.pair(seller, buyer)?;
        check_bounds(pair, seller, buyer, p)?;
        let reaches = |m: i64| pair.buyer_valuation.eval_neg_int(p - m).ge_eps(target, eps);
        let max_step = p - pair.lower;
        if max_step < 1 || !reaches(max_step) {
            return Ok(Decrement::Overflow);
        }
        if reaches(1) {
            return Ok(Decrement::Step(1));
        }
        // reaches() is increasing in m; find the first true point.
        let mut lo = 1; // false
        let mut hi = max_step; // true
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if reaches(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(Decrement::Step(hi))
    }

    /// Full validation, including non-empty agent sets.
    pub fn validate(&self) -> ValidationReport {
        let mut report = self.validate_pairs();
        if self.sellers.is_empty() {
            report.violations.push("empty seller set".into());
        }
        if self.buyers.is_empty() {
            report.violations.push("empty buyer set".into());
        }
        report
    }

    /// Per-pair validation only. The solver uses this variant so that a
    /// market with an empty side still runs (and trivially terminates).
    pub(crate) fn validate_pairs(&self) -> ValidationReport {
        let mut violations = Vec::new();
        for (i, j) in self.edges() {
            let pair = &self.pairs[i * self.buyers.len() + j];
            let loc = format!("({}, {})", self.sellers[i], self.buyers[j]);
            if pair.lower > pair.upper {
                violations.push(format!(
                    "bounds reversed at {loc}: lower {} > upper {}",
                    pair.lower, pair.upper
                ));
            }
            if let Err(msg) = pair.seller_valuation.validate() {
                violations.push(format!("seller valuation at {loc}: {msg}"));
            }
            if let Err(msg) = pair.buyer_valuation.validate() {
                violations.push(format!("buyer valuation at {loc}: {msg}"));
            }
        }
        ValidationReport { violations }
    }
}

fn check_bounds(pair: &PairData, seller: usize, buyer: usize, x: i64) -> Result<(), MarketError> {
    if x < pair.lower || x > pair.upper {
        return Err(MarketError::OutOfBounds {
            seller,
            buyer,
            x,
            lower: pair.lower,
            upper: pair.upper,
        });
    }
    Ok(())
}

/// Integer price per pair, stored row-major like the instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PriceVector {
    num_buyers: usize,
    values: Vec<i64>,
}

impl PriceVector {
    pub fn from_fn(inst: &MarketInstance, mut f: impl FnMut(usize, usize) -> i64) -> Self {
        let num_buyers = inst.num_buyers();
        let values = inst.edges().map(|(i, j)| f(i, j)).collect();
        PriceVector { num_buyers, values }
    }

    pub fn get(&self, seller: usize, buyer: usize) -> i64 {
        self.values[seller * self.num_buyers + buyer]
    }

    pub fn set(&mut self, seller: usize, buyer: usize, price: i64) {
        self.values[seller * self.num_buyers + buyer] = price;
    }
}
