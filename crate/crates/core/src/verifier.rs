//! Independent brute-force stability checks.
//!
//! [`verify`] quantifies exhaustively over every pair and every feasible
//! integer price, so it is sound and complete for discrete pairwise
//! stability by construction. [`audit_trace`] replays a solver trace
//! against the loop's monotonicity and containment invariants.
//! [`enumerate_stable_outcomes`] lists every stable outcome of a tiny
//! instance by full enumeration of matchings and price assignments.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::market::{MarketInstance, PriceVector};
use crate::matching::{enumerate_matchings, WeightedBipartiteGraph, WeightedEdge};
use crate::solver::{payoffs, IterationState, Outcome, PairKey};
use crate::value::Value;

/// Instance-size ceilings for exhaustive outcome enumeration.
pub const ORACLE_PAIR_GUARD: usize = 4;
pub const ORACLE_RANGE_GUARD: i64 = 12;

/// A blocking triple: both sides strictly prefer trading at price `c`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    pub seller: usize,
    pub buyer: usize,
    pub price: i64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityReport {
    /// Matching structure is valid: pairs of `E`, each agent at most once.
    pub matching_ok: bool,
    /// Every matched price lies within its pair bounds.
    pub feasibility_ok: bool,
    /// Payoffs are consistent with the matching and prices, and non-negative.
    pub p1_ok: bool,
    /// All blocking triples, ordered by (seller, buyer, price).
    pub witnesses: Vec<Witness>,
}

impl StabilityReport {
    pub fn is_stable(&self) -> bool {
        self.matching_ok && self.feasibility_ok && self.p1_ok && self.witnesses.is_empty()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum VerifierError {
    #[error("outcome refers to unknown {role} index {index}")]
    UnknownAgent { role: &'static str, index: usize },
    #[error("outcome payoff vector for {role}s has length {got}, expected {expected}")]
    MalformedPayoffs {
        role: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("oracle refused: {0}")]
    GuardRefused(String),
}

/// Exhaustive pairwise-stability check of an outcome against an instance.
pub fn verify(
    inst: &MarketInstance,
    outcome: &Outcome,
    eps: f64,
) -> Result<StabilityReport, VerifierError> {
    for m in &outcome.matched {
        if m.seller >= inst.num_sellers() {
            return Err(VerifierError::UnknownAgent {
                role: "seller",
                index: m.seller,
            });
        }
        if m.buyer >= inst.num_buyers() {
            return Err(VerifierError::UnknownAgent {
                role: "buyer",
                index: m.buyer,
            });
        }
    }
    if outcome.q.len() != inst.num_sellers() {
        return Err(VerifierError::MalformedPayoffs {
            role: "seller",
            got: outcome.q.len(),
            expected: inst.num_sellers(),
        });
    }
    if outcome.r.len() != inst.num_buyers() {
        return Err(VerifierError::MalformedPayoffs {
            role: "buyer",
            got: outcome.r.len(),
            expected: inst.num_buyers(),
        });
    }

    let mut matching_ok = true;
    let mut sellers_seen = BTreeSet::new();
    let mut buyers_seen = BTreeSet::new();
    for m in &outcome.matched {
        if !sellers_seen.insert(m.seller) || !buyers_seen.insert(m.buyer) {
            matching_ok = false;
        }
    }

    let mut feasibility_ok = true;
    for m in &outcome.matched {
        let pair = inst.pair(m.seller, m.buyer).expect("checked above");
        if m.price < pair.lower || m.price > pair.upper {
            feasibility_ok = false;
        }
    }

    // p1: payoffs must equal the matched valuations (zero when unmatched)
    // and be non-negative.
    let zero = Value::from_int(0);
    let mut p1_ok = true;
    let mut expected_q: Vec<Option<Value>> = vec![None; inst.num_sellers()];
    let mut expected_r: Vec<Option<Value>> = vec![None; inst.num_buyers()];
    for m in &outcome.matched {
        let pair = inst.pair(m.seller, m.buyer).expect("checked above");
        expected_q[m.seller].get_or_insert(pair.seller_valuation.eval_int(m.price));
        expected_r[m.buyer].get_or_insert(pair.buyer_valuation.eval_neg_int(m.price));
    }
    for (i, expected) in expected_q.iter().enumerate() {
        let expected = expected.clone().unwrap_or_else(|| zero.clone());
        if !outcome.q[i].eq_eps(&expected, eps) || outcome.q[i].lt_eps(&zero, eps) {
            p1_ok = false;
        }
    }
    for (j, expected) in expected_r.iter().enumerate() {
        let expected = expected.clone().unwrap_or_else(|| zero.clone());
        if !outcome.r[j].eq_eps(&expected, eps) || outcome.r[j].lt_eps(&zero, eps) {
            p1_ok = false;
        }
    }

    // p2: no pair may strictly improve both sides at any feasible price.
    let mut witnesses = Vec::new();
    for (i, j) in inst.edges() {
        let pair = inst.pair(i, j).expect("edge exists");
        for c in pair.lower..=pair.upper {
            let seller_gain = pair.seller_valuation.eval_int(c);
            let buyer_gain = pair.buyer_valuation.eval_neg_int(c);
            if seller_gain.gt_eps(&outcome.q[i], eps) && buyer_gain.gt_eps(&outcome.r[j], eps) {
                witnesses.push(Witness {
                    seller: i,
                    buyer: j,
                    price: c,
                });
            }
        }
    }

    Ok(StabilityReport {
        matching_ok,
        feasibility_ok,
        p1_ok,
        witnesses,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuditViolation {
    /// Which invariant failed, e.g. "Lemma 5(iii)" or "(s1)".
    pub lemma: String,
    /// Pass index the violation was detected at.
    pub pass: usize,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AuditReport {
    pub violations: Vec<AuditViolation>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    /// First violation in pass order, if any.
    pub fn first(&self) -> Option<&AuditViolation> {
        self.violations.first()
    }

    fn push(&mut self, lemma: &str, pass: usize, detail: String) {
        self.violations.push(AuditViolation {
            lemma: lemma.to_string(),
            pass,
            detail,
        });
    }
}

/// Replay a trace and check every loop invariant on each pass and each
/// consecutive pair of passes.
pub fn audit_trace(inst: &MarketInstance, states: &[IterationState], eps: f64) -> AuditReport {
    let mut report = AuditReport::default();
    if states.is_empty() {
        report.push("trace", 0, "trace contains no passes".into());
        return report;
    }

    for state in states {
        let pass = state.iteration;
        for (i, j) in inst.edges() {
            let pair = inst.pair(i, j).expect("edge exists");
            let p = state.prices.get(i, j);
            if p < pair.lower || p > pair.upper {
                report.push(
                    "feasibility",
                    pass,
                    format!("price {p} for pair ({i}, {j}) outside [{}, {}]", pair.lower, pair.upper),
                );
            }
        }
        for key in &state.e_tilde {
            if state.k0.contains(key) || state.t0.contains(key) {
                report.push(
                    "state",
                    pass,
                    format!("live pair {key:?} also retired in K0 or T0"),
                );
            }
        }
        if !state.ep_tilde.is_subset(&state.e_tilde) {
            report.push("state", pass, "EP_tilde not contained in E_tilde".into());
        }
        if !state.ep_hat.is_subset(&state.ep_tilde) {
            report.push("state", pass, "EP_hat not contained in EP_tilde".into());
        }
        if !state.k.is_subset(&state.ep_tilde) {
            report.push("state", pass, "K not contained in EP_tilde".into());
        }
        for &(i, j) in &state.k {
            if state.matching.left_partner(i).is_some() {
                report.push(
                    "state",
                    pass,
                    format!("trigger pair ({i}, {j}) has a matched seller"),
                );
            }
        }
        for &(i, j) in state.matching.edges() {
            if !state.ep_hat.contains(&(i, j)) {
                report.push(
                    "state",
                    pass,
                    format!("matched pair ({i}, {j}) outside EP_hat"),
                );
            }
        }
        // r must be exactly the buyer payoffs induced by X and p.
        let (_, expected_r) = payoffs(inst, &state.matching, &state.prices);
        for (j, expected) in expected_r.iter().enumerate() {
            if !state.r[j].eq_eps(expected, eps) {
                report.push(
                    "state",
                    pass,
                    format!("recorded r[{j}] = {} differs from induced payoff {expected}", state.r[j]),
                );
            }
        }
    }

    for window in states.windows(2) {
        let (prev, next) = (&window[0], &window[1]);
        let pass = next.iteration;

        // Lemma 2: the old matching stays inside the new EP_hat.
        for &(i, j) in prev.matching.edges() {
            if !next.ep_hat.contains(&(i, j)) {
                report.push(
                    "Lemma 2",
                    pass,
                    format!("pair ({i}, {j}) matched at pass {} left EP_hat", prev.iteration),
                );
            }
        }

        // Lemma 5(i): the live set never grows, and shrinks when L or
        // T0_tilde is nonempty.
        if !next.e_tilde.is_subset(&prev.e_tilde) {
            report.push("Lemma 5(i)", pass, "E_tilde gained a pair".into());
        }
        if !(next.l.is_empty() && next.t0_tilde.is_empty())
            && next.e_tilde.len() >= prev.e_tilde.len()
        {
            report.push(
                "Lemma 5(i)",
                pass,
                "E_tilde failed to shrink despite retirements".into(),
            );
        }

        // Lemma 5(ii): prices never rise, and strictly fall on surviving
        // trigger pairs.
        for (i, j) in inst.edges() {
            let before = prev.prices.get(i, j);
            let after = next.prices.get(i, j);
            if after > before {
                report.push(
                    "Lemma 5(ii)",
                    pass,
                    format!("price of pair ({i}, {j}) rose from {before} to {after}"),
                );
            }
        }
        for key in &prev.k {
            if next.l.contains(key) || next.t0_tilde.contains(key) {
                continue;
            }
            let before = prev.prices.get(key.0, key.1);
            let after = next.prices.get(key.0, key.1);
            if after >= before {
                report.push(
                    "Lemma 5(ii)",
                    pass,
                    format!("surviving trigger pair {key:?} kept price {before}"),
                );
            }
        }

        // Lemma 5(iii): buyer payoffs never decrease.
        for j in 0..inst.num_buyers() {
            if next.r[j].lt_eps(&prev.r[j], eps) {
                report.push(
                    "Lemma 5(iii)",
                    pass,
                    format!("r[{j}] decreased from {} to {}", prev.r[j], next.r[j]),
                );
            }
        }

        // (s1): previously matched buyers stay matched.
        for &j in &prev.v_tilde {
            if next.matching.right_partner(j).is_none() {
                report.push("(s1)", pass, format!("buyer {j} lost their match"));
            }
        }

        // Lemma 3: each recorded decrement is the minimal positive step
        // reaching the target payoff, relative to the previous pass.
        for (&(i, j), &m) in &next.decrements {
            if !prev.k.contains(&(i, j)) {
                report.push(
                    "state",
                    pass,
                    format!("decrement recorded for ({i}, {j}) outside the previous K"),
                );
                continue;
            }
            let pair = inst.pair(i, j).expect("edge exists");
            let before = prev.prices.get(i, j);
            let target = &prev.r[j];
            if m < 1 {
                report.push("Lemma 3", pass, format!("decrement {m} below 1 for ({i}, {j})"));
                continue;
            }
            let reached = pair.buyer_valuation.eval_neg_int(before - m);
            if !reached.ge_eps(target, eps) {
                report.push(
                    "Lemma 3",
                    pass,
                    format!("decrement {m} for ({i}, {j}) misses the target payoff {target}"),
                );
            }
            if m > 1 {
                let previous_step = pair.buyer_valuation.eval_neg_int(before - m + 1);
                if !previous_step.lt_eps(target, eps) {
                    report.push(
                        "Lemma 3",
                        pass,
                        format!("decrement {m} for ({i}, {j}) is not minimal"),
                    );
                }
            }
        }

        // Lemma 4: floor-overflow pairs sit at their lower bound and no
        // longer reach the buyer's previous payoff.
        for &(i, j) in &next.l {
            if !prev.k.contains(&(i, j)) {
                report.push(
                    "state",
                    pass,
                    format!("overflow pair ({i}, {j}) outside the previous K"),
                );
                continue;
            }
            let pair = inst.pair(i, j).expect("edge exists");
            if next.prices.get(i, j) != pair.lower {
                report.push(
                    "Lemma 4",
                    pass,
                    format!("overflow pair ({i}, {j}) not clamped to the floor"),
                );
            }
            let at_floor = pair.buyer_valuation.eval_neg_int(pair.lower);
            if at_floor.gt_eps(&prev.r[j], eps) {
                report.push(
                    "Lemma 4",
                    pass,
                    format!("overflow pair ({i}, {j}) still reaches the target at the floor"),
                );
            }
        }
        for &(i, j) in &next.t0_tilde {
            if !prev.k.contains(&(i, j)) {
                report.push(
                    "state",
                    pass,
                    format!("seller-dropout pair ({i}, {j}) outside the previous K"),
                );
            }
        }
    }

    // Lemma 1 at exit: the trigger set is empty and the outcome verifies.
    let last = states.last().expect("nonempty");
    if !last.k.is_empty() {
        report.push(
            "Lemma 1",
            last.iteration,
            format!("final pass leaves K = {:?}", last.k),
        );
    }
    let outcome = crate::solver::outcome_from_state(inst, last, states.len());
    match verify(inst, &outcome, eps) {
        Ok(stability) if !stability.is_stable() => {
            let detail = match stability.witnesses.first() {
                Some(w) => format!(
                    "final outcome unstable: pair ({}, {}) blocks at price {}",
                    w.seller, w.buyer, w.price
                ),
                None => "final outcome fails individual rationality or structure".to_string(),
            };
            report.push("Lemma 1", last.iteration, detail);
        }
        Ok(_) => {}
        Err(err) => {
            report.push("Lemma 1", last.iteration, format!("final outcome malformed: {err}"));
        }
    }

    report
}

/// Every pairwise-stable outcome of a tiny instance, by exhausting all
/// matchings and all feasible integer prices on matched pairs.
pub fn enumerate_stable_outcomes(
    inst: &MarketInstance,
    eps: f64,
) -> Result<Vec<Outcome>, VerifierError> {
    if inst.num_pairs() > ORACLE_PAIR_GUARD {
        return Err(VerifierError::GuardRefused(format!(
            "{} pairs exceed the oracle guard of {ORACLE_PAIR_GUARD}",
            inst.num_pairs()
        )));
    }
    if inst.max_range() > ORACLE_RANGE_GUARD {
        return Err(VerifierError::GuardRefused(format!(
            "price range {} exceeds the oracle guard of {ORACLE_RANGE_GUARD}",
            inst.max_range()
        )));
    }

    let edges = inst
        .edges()
        .map(|(i, j)| WeightedEdge {
            left: i,
            right: j,
            weight: Value::from_int(0),
        })
        .collect();
    let graph = WeightedBipartiteGraph::new(inst.num_sellers(), inst.num_buyers(), edges)
        .expect("instance edges are well formed");

    let mut stable = Vec::new();
    for matching in enumerate_matchings(&graph).expect("within guard") {
        let matched: Vec<PairKey> = matching.edges().to_vec();
        let spans: Vec<(i64, i64)> = matched
            .iter()
            .map(|&(i, j)| {
                let pair = inst.pair(i, j).expect("edge exists");
                (pair.lower, pair.upper)
            })
            .collect();

        let mut assignment: Vec<i64> = spans.iter().map(|&(lo, _)| lo).collect();
        let mut exhausted = false;
        while !exhausted {
            let mut prices = PriceVector::from_fn(inst, |i, j| {
                inst.pair(i, j).expect("edge exists").lower
            });
            for (idx, &(i, j)) in matched.iter().enumerate() {
                prices.set(i, j, assignment[idx]);
            }
            let (q, r) = payoffs(inst, &matching, &prices);
            let outcome = Outcome {
                matched: matched
                    .iter()
                    .enumerate()
                    .map(|(idx, &(i, j))| crate::solver::MatchedPair {
                        seller: i,
                        buyer: j,
                        price: assignment[idx],
                    })
                    .collect(),
                q,
                r,
                iterations: 0,
            };
            if verify(inst, &outcome, eps)
                .expect("enumerated outcome is structurally sound")
                .is_stable()
            {
                stable.push(outcome);
            }

            // Odometer step over the per-pair price spans.
            let mut idx = assignment.len();
            loop {
                if idx == 0 {
                    exhausted = true;
                    break;
                }
                idx -= 1;
                if assignment[idx] < spans[idx].1 {
                    assignment[idx] += 1;
                    for later in idx + 1..assignment.len() {
                        assignment[later] = spans[later].0;
                    }
                    break;
                }
                assignment[idx] = spans[idx].0;
            }
        }
    }
    Ok(stable)
}
