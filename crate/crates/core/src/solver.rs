//! The price-adjustment solve loop.
//!
//! A run starts every pair at the highest price its buyer accepts, then
//! alternates two moves until quiescent: match buyers inside the current
//! seller-preferred acceptable pairs (saturating previously matched buyers
//! and maximizing buyer value), and walk the prices of seller-preferred but
//! unmatched pairs downward by the minimal decrement that makes the buyer
//! weakly prefer switching. Pairs whose price would fall through the floor
//! join `K0`; pairs whose seller drops below acceptability join `T0`; both
//! leave the live pair set for good. When no seller-preferred pair is left
//! unmatched the outcome is pairwise stable.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::market::{Decrement, MarketInstance, PriceVector, ValidationReport};
use crate::matching::{
    solve_constrained_matching, Matching, WeightedBipartiteGraph, WeightedEdge,
};
use crate::value::Value;

pub type PairKey = (usize, usize);

/// One pass of the loop: the live sets, prices, matching, and payoffs after
/// the pass settles, plus the decrements that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationState {
    pub iteration: usize,
    /// Pairs rejected by the buyer at their current price.
    pub k0: BTreeSet<PairKey>,
    /// Pairs rejected by the seller at their current price.
    pub t0: BTreeSet<PairKey>,
    /// Mutually acceptable pairs still live.
    pub e_tilde: BTreeSet<PairKey>,
    /// Best live seller value per seller (zero over an empty set).
    pub q_tilde: Vec<Value>,
    /// Live pairs achieving their seller's best value.
    pub ep_tilde: BTreeSet<PairKey>,
    /// Seller-best pairs that also weakly improve the buyer.
    pub ep_hat: BTreeSet<PairKey>,
    /// Buyers matched in `matching`.
    pub v_tilde: BTreeSet<usize>,
    /// Seller-best pairs whose seller is unmatched; the decrement trigger set.
    pub k: BTreeSet<PairKey>,
    /// Decrements applied to the previous pass's `K` (overflow pairs absent).
    pub decrements: BTreeMap<PairKey, i64>,
    /// Previous `K` pairs whose decrement fell through the price floor.
    pub l: BTreeSet<PairKey>,
    /// Previous `K` pairs whose seller rejects the decremented price.
    pub t0_tilde: BTreeSet<PairKey>,
    pub prices: PriceVector,
    pub matching: Matching,
    /// Buyer payoffs under `matching` and `prices`.
    pub r: Vec<Value>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatchedPair {
    pub seller: usize,
    pub buyer: usize,
    pub price: i64,
}

/// Final matching with per-pair prices and both payoff vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub matched: Vec<MatchedPair>,
    pub q: Vec<Value>,
    pub r: Vec<Value>,
    pub iterations: usize,
}

impl Outcome {
    /// Same matching and prices, ignoring payoffs and iteration count.
    pub fn same_assignment(&self, other: &Outcome) -> bool {
        self.matched == other.matched
    }

    pub fn price_of(&self, seller: usize, buyer: usize) -> Option<i64> {
        self.matched
            .iter()
            .find(|m| m.seller == seller && m.buyer == buyer)
            .map(|m| m.price)
    }
}

#[derive(Clone, Debug)]
pub struct IterationTrace {
    pub states: Vec<IterationState>,
    pub outcome: Outcome,
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("instance rejected: {0}")]
    Rejected(ValidationReport),
    #[error("internal invariant failed at pass {pass}: {message}")]
    InternalInvariant { pass: usize, message: String },
    #[error("no convergence within {bound} passes")]
    IterationBoundExceeded { bound: usize },
}

/// Safety ceiling on update passes: each pass either strictly shrinks the
/// live pair set or strictly decreases some bounded integer price.
pub fn iteration_bound(inst: &MarketInstance) -> usize {
    let pairs = inst.num_pairs();
    pairs * (1 + inst.max_range().max(0) as usize) + pairs
}

/// Payoffs under a matching: the seller's valuation at the pair price, the
/// buyer's valuation at its negation, and mode-consistent zeros elsewhere.
pub fn payoffs(
    inst: &MarketInstance,
    matching: &Matching,
    prices: &PriceVector,
) -> (Vec<Value>, Vec<Value>) {
    let zero = inst.zero_value();
    let mut q = vec![zero.clone(); inst.num_sellers()];
    let mut r = vec![zero; inst.num_buyers()];
    for &(i, j) in matching.edges() {
        let pair = inst.pair(i, j).expect("matched pair exists");
        let price = prices.get(i, j);
        q[i] = pair.seller_valuation.eval_int(price);
        r[j] = pair.buyer_valuation.eval_neg_int(price);
    }
    (q, r)
}

/// Initial state: prices at the buyer acceptance ceiling, live sets from
/// scratch, and a first matching with no saturation requirement.
pub fn initialize(inst: &MarketInstance, eps: f64) -> Result<IterationState, SolverError> {
    let report = inst.validate_pairs();
    if !report.is_clean() {
        return Err(SolverError::Rejected(report));
    }

    let mut price_of = BTreeMap::new();
    for (i, j) in inst.edges() {
        let pair = inst.pair(i, j).expect("edge exists");
        let p = inst
            .max_acceptable_price(i, j, eps)
            .expect("edge exists")
            .unwrap_or(pair.lower);
        price_of.insert((i, j), p);
    }
    let prices = PriceVector::from_fn(inst, |i, j| price_of[&(i, j)]);

    let zero = Value::from_int(0);
    let mut k0 = BTreeSet::new();
    let mut t0 = BTreeSet::new();
    let mut e_tilde = BTreeSet::new();
    for (i, j) in inst.edges() {
        let pair = inst.pair(i, j).expect("edge exists");
        let p = prices.get(i, j);
        let buyer_rejects = pair.buyer_valuation.eval_neg_int(p).lt_eps(&zero, eps);
        let seller_rejects = pair.seller_valuation.eval_int(p).lt_eps(&zero, eps);
        if buyer_rejects {
            k0.insert((i, j));
        }
        if seller_rejects {
            t0.insert((i, j));
        }
        if !buyer_rejects && !seller_rejects {
            e_tilde.insert((i, j));
        }
    }

    let r0 = vec![inst.zero_value(); inst.num_buyers()];
    let settled = settle(inst, eps, &e_tilde, &prices, &r0, &BTreeSet::new(), 0)?;

    Ok(IterationState {
        iteration: 0,
        k0,
        t0,
        e_tilde,
        q_tilde: settled.q_tilde,
        ep_tilde: settled.ep_tilde,
        ep_hat: settled.ep_hat,
        v_tilde: settled.v_tilde,
        k: settled.k,
        decrements: BTreeMap::new(),
        l: BTreeSet::new(),
        t0_tilde: BTreeSet::new(),
        prices,
        matching: settled.matching,
        r: settled.r,
    })
}

/// One update pass: decrement every trigger pair, retire floor and
/// seller-rejected pairs, then re-settle sets, matching, and payoffs.
pub fn price_update_step(
    inst: &MarketInstance,
    state: &IterationState,
    eps: f64,
) -> Result<IterationState, SolverError> {
    let pass = state.iteration + 1;
    if state.k.is_empty() {
        return Err(SolverError::InternalInvariant {
            pass,
            message: "price update requires a nonempty trigger set K".into(),
        });
    }

    let mut prices = state.prices.clone();
    let mut decrements = BTreeMap::new();
    let mut l = BTreeSet::new();
    for &(i, j) in &state.k {
        let pair = inst.pair(i, j).map_err(|e| SolverError::InternalInvariant {
            pass,
            message: e.to_string(),
        })?;
        let current = state.prices.get(i, j);
        let target = &state.r[j];
        match inst
            .min_decrement(i, j, current, target, eps)
            .map_err(|e| SolverError::InternalInvariant {
                pass,
                message: e.to_string(),
            })? {
            Decrement::Step(m) => {
                decrements.insert((i, j), m);
                prices.set(i, j, current - m);
            }
            Decrement::Overflow => {
                // The feasibility clamp leaves the price at the floor; the
                // pair retires into K0 regardless.
                l.insert((i, j));
                prices.set(i, j, pair.lower);
            }
        }
    }

    let zero = Value::from_int(0);
    let mut t0_tilde = BTreeSet::new();
    for &(i, j) in &state.k {
        let pair = inst.pair(i, j).expect("edge exists");
        if pair
            .seller_valuation
            .eval_int(prices.get(i, j))
            .lt_eps(&zero, eps)
        {
            t0_tilde.insert((i, j));
        }
    }

    let mut k0 = state.k0.clone();
    k0.extend(l.iter().copied());
    let mut t0 = state.t0.clone();
    t0.extend(t0_tilde.iter().copied());
    let e_tilde: BTreeSet<PairKey> = state
        .e_tilde
        .iter()
        .copied()
        .filter(|e| !k0.contains(e) && !t0.contains(e))
        .collect();

    let settled = settle(inst, eps, &e_tilde, &prices, &state.r, &state.v_tilde, pass)?;

    Ok(IterationState {
        iteration: pass,
        k0,
        t0,
        e_tilde,
        q_tilde: settled.q_tilde,
        ep_tilde: settled.ep_tilde,
        ep_hat: settled.ep_hat,
        v_tilde: settled.v_tilde,
        k: settled.k,
        decrements,
        l,
        t0_tilde,
        prices,
        matching: settled.matching,
        r: settled.r,
    })
}

/// Run to quiescence and derive the final payoffs.
pub fn run(inst: &MarketInstance, eps: f64) -> Result<(Outcome, IterationTrace), SolverError> {
    let bound = iteration_bound(inst);
    let mut states = vec![initialize(inst, eps)?];
    while !states.last().expect("nonempty").k.is_empty() {
        if states.len() > bound {
            return Err(SolverError::IterationBoundExceeded { bound });
        }
        let next = price_update_step(inst, states.last().expect("nonempty"), eps)?;
        states.push(next);
    }
    let outcome = outcome_from_state(inst, states.last().expect("nonempty"), states.len());
    Ok((outcome.clone(), IterationTrace { states, outcome }))
}

pub(crate) fn outcome_from_state(
    inst: &MarketInstance,
    state: &IterationState,
    iterations: usize,
) -> Outcome {
    let (q, _) = payoffs(inst, &state.matching, &state.prices);
    let matched = state
        .matching
        .edges()
        .iter()
        .map(|&(i, j)| MatchedPair {
            seller: i,
            buyer: j,
            price: state.prices.get(i, j),
        })
        .collect();
    Outcome {
        matched,
        q,
        r: state.r.clone(),
        iterations,
    }
}

struct Settled {
    q_tilde: Vec<Value>,
    ep_tilde: BTreeSet<PairKey>,
    ep_hat: BTreeSet<PairKey>,
    matching: Matching,
    r: Vec<Value>,
    v_tilde: BTreeSet<usize>,
    k: BTreeSet<PairKey>,
}

/// Recompute the preference sets for the given prices, match against the
/// current buyer payoffs, and read off the new payoffs and trigger set.
fn settle(
    inst: &MarketInstance,
    eps: f64,
    e_tilde: &BTreeSet<PairKey>,
    prices: &PriceVector,
    r_current: &[Value],
    required: &BTreeSet<usize>,
    pass: usize,
) -> Result<Settled, SolverError> {
    let mut seller_at = BTreeMap::new();
    let mut buyer_at = BTreeMap::new();
    for &(i, j) in e_tilde {
        let pair = inst.pair(i, j).expect("edge exists");
        let p = prices.get(i, j);
        seller_at.insert((i, j), pair.seller_valuation.eval_int(p));
        buyer_at.insert((i, j), pair.buyer_valuation.eval_neg_int(p));
    }

    let zero = inst.zero_value();
    let mut q_tilde = vec![zero.clone(); inst.num_sellers()];
    let mut seller_has_live = vec![false; inst.num_sellers()];
    for (&(i, _), value) in &seller_at {
        if !seller_has_live[i] {
            q_tilde[i] = value.clone();
            seller_has_live[i] = true;
        } else if value.cmp_eps(&q_tilde[i], eps) == std::cmp::Ordering::Greater {
            q_tilde[i] = value.clone();
        }
    }

    let mut ep_tilde = BTreeSet::new();
    for (&(i, j), value) in &seller_at {
        if value.eq_eps(&q_tilde[i], eps) {
            ep_tilde.insert((i, j));
        }
    }

    let mut ep_hat = BTreeSet::new();
    for &(i, j) in &ep_tilde {
        if buyer_at[&(i, j)].ge_eps(&r_current[j], eps) {
            ep_hat.insert((i, j));
        }
    }

    let edges = ep_hat
        .iter()
        .map(|&(i, j)| WeightedEdge {
            left: i,
            right: j,
            weight: buyer_at[&(i, j)].clone(),
        })
        .collect();
    let graph = WeightedBipartiteGraph::new(inst.num_sellers(), inst.num_buyers(), edges)
        .map_err(|e| SolverError::InternalInvariant {
            pass,
            message: e.to_string(),
        })?;
    let matching = solve_constrained_matching(&graph, required, eps).map_err(|e| {
        SolverError::InternalInvariant {
            pass,
            message: format!("matching subproblem infeasible: {e}"),
        }
    })?;

    let mut r = vec![zero; inst.num_buyers()];
    for &(i, j) in matching.edges() {
        r[j] = buyer_at[&(i, j)].clone();
    }
    let v_tilde = matching.matched_rights();
    let k = ep_tilde
        .iter()
        .copied()
        .filter(|&(i, _)| matching.left_partner(i).is_none())
        .collect();

    Ok(Settled {
        q_tilde,
        ep_tilde,
        ep_hat,
        matching,
        r,
        v_tilde,
        k,
    })
}
