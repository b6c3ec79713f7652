//! Shared test support: independent oracles and deterministic corpora.
#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::BTreeSet;

use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand_xoshiro::rand_core::RngCore;
use rand_xoshiro::SplitMix64;

use stable_market::value::{int_rational, ratio};
use stable_market::{
    Decrement, FamilyWeights, GeneratorConfig, Matching, Valuation, Value,
    WeightedBipartiteGraph, WeightedEdge,
};

pub fn draw(rng: &mut SplitMix64, lo: i64, hi: i64) -> i64 {
    debug_assert!(lo <= hi);
    lo + (rng.next_u64() % ((hi - lo) as u64 + 1)) as i64
}

/// Family weight schedule cycling all-linear, all-piecewise, all-exponential,
/// and the mixed default.
pub fn weight_schedule(k: u64) -> FamilyWeights {
    match k % 4 {
        0 => FamilyWeights {
            linear: 1,
            piecewise_linear: 0,
            exponential: 0,
        },
        1 => FamilyWeights {
            linear: 0,
            piecewise_linear: 1,
            exponential: 0,
        },
        2 => FamilyWeights {
            linear: 0,
            piecewise_linear: 0,
            exponential: 1,
        },
        _ => FamilyWeights::default(),
    }
}

/// Deterministic corpus config for the universal-stability sweep: sizes up
/// to 6x6, price ranges up to width 20, all family mixes.
pub fn stability_corpus_config(k: u64) -> GeneratorConfig {
    let num_sellers = 1 + (k % 6) as usize;
    let num_buyers = 1 + ((k / 6) % 6) as usize;
    let lo = -((k % 11) as i64);
    let hi = lo + (k % 21) as i64;
    let mut config = GeneratorConfig::for_market(k, num_sellers, num_buyers, lo, hi);
    config.weights = weight_schedule(k);
    config
}

/// Deterministic corpus config within the enumeration-oracle guards:
/// at most 4 pairs and price ranges of width at most 12.
pub fn oracle_corpus_config(k: u64) -> GeneratorConfig {
    const DIMS: [(usize, usize); 8] =
        [(1, 1), (1, 2), (2, 1), (2, 2), (1, 3), (3, 1), (1, 4), (4, 1)];
    let (num_sellers, num_buyers) = DIMS[(k % 8) as usize];
    let lo = -((k % 5) as i64);
    let hi = lo + (k % 13) as i64;
    let mut config = GeneratorConfig::for_market(1000 + k, num_sellers, num_buyers, lo, hi);
    config.weights = weight_schedule(k);
    config
}

/// Independent real-root oracle for the minimal decrement: bisect
/// `g(-(p - m)) = target` over real `m`, then take `max(1, ceil(m*))` and
/// clamp against the feasible step range. Exact rational bisection for the
/// exact families, float bisection for the exponential family.
pub fn bisection_decrement(buyer: &Valuation, p: i64, lower: i64, target: &Value) -> Decrement {
    let cap = p - lower;
    if cap < 1 {
        return Decrement::Overflow;
    }
    match (buyer.is_exact_family(), target) {
        (true, Value::Exact(t)) => {
            // h(m) = g(m - p) - t, strictly increasing in m.
            let h = |m: &BigRational| {
                buyer
                    .eval_exact(&(m - int_rational(p)))
                    .expect("exact family")
                    - t
            };
            if !h(&BigRational::zero()).is_negative() {
                return Decrement::Step(1); // m* <= 0, so max(1, ceil(m*)) = 1
            }
            let cap_r = int_rational(cap);
            if h(&cap_r).is_negative() {
                return Decrement::Overflow;
            }
            let mut lo = BigRational::zero();
            let mut hi = cap_r;
            while &hi - &lo > BigRational::one() {
                let mid = (&lo + &hi) / int_rational(2);
                if h(&mid).is_negative() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            // Root lies in (lo, hi] with hi - lo <= 1: at most two integer
            // candidates remain, disambiguated by one exact probe.
            let first = lo.floor().to_integer().to_i64().expect("small step") + 1;
            let m = if h(&int_rational(first)).is_negative() {
                first + 1
            } else {
                first
            };
            if m > cap {
                Decrement::Overflow
            } else {
                Decrement::Step(m.max(1))
            }
        }
        _ => {
            let t = target.to_f64();
            let h = |m: f64| buyer.eval_f64(m - p as f64) - t;
            if h(0.0) >= 0.0 {
                return Decrement::Step(1);
            }
            if h(cap as f64) < 0.0 {
                return Decrement::Overflow;
            }
            let mut lo = 0.0f64;
            let mut hi = cap as f64;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if h(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let first = lo.floor() as i64 + 1;
            let m = if h(first as f64) < 0.0 { first + 1 } else { first };
            if m > cap {
                Decrement::Overflow
            } else {
                Decrement::Step(m.max(1))
            }
        }
    }
}

/// Random exact-family buyer valuation for decrement trials.
pub fn random_exact_buyer(rng: &mut SplitMix64) -> Valuation {
    if rng.next_u64().is_multiple_of(2) {
        let slope = ratio(draw(rng, 1, 8), draw(rng, 1, 4));
        let intercept = ratio(draw(rng, -24, 24), draw(rng, 1, 4));
        Valuation::linear(slope, intercept)
    } else {
        let count = draw(rng, 2, 4);
        let mut x = draw(rng, -25, -15);
        let mut y = ratio(draw(rng, -20, 4), draw(rng, 1, 3));
        let mut points = Vec::new();
        for _ in 0..count {
            points.push((int_rational(x), y.clone()));
            x += draw(rng, 1, 12);
            y += ratio(draw(rng, 1, 9), draw(rng, 1, 3));
        }
        Valuation::piecewise(points)
    }
}

/// Random exponential buyer valuation (a*c > 0) for decrement trials.
pub fn random_exponential_buyer(rng: &mut SplitMix64) -> Valuation {
    let d = draw(rng, 3, 8);
    let s = int_rational(draw(rng, 1, 3));
    if rng.next_u64().is_multiple_of(2) {
        Valuation::exponential(s, ratio(-draw(rng, 1, 64), 32), ratio(1, d))
    } else {
        Valuation::exponential(-s, ratio(draw(rng, 1, 64), 32), ratio(-1, d))
    }
}

/// Random weighted bipartite graph plus a feasible required-buyer set: the
/// required buyers come from a planted matching, so saturation is always
/// possible.
pub fn random_constrained_graph(
    rng: &mut SplitMix64,
) -> (WeightedBipartiteGraph, BTreeSet<usize>) {
    let num_left = draw(rng, 1, 5) as usize;
    let num_right = draw(rng, 1, 5) as usize;
    let mut present = vec![vec![false; num_right]; num_left];

    // Planted matching: a diagonal sample of pairwise-disjoint edges.
    let planted = draw(rng, 0, num_left.min(num_right) as i64) as usize;
    let mut required = BTreeSet::new();
    #[allow(clippy::needless_range_loop)]
    for k in 0..planted {
        present[k][k] = true;
        if rng.next_u64().is_multiple_of(2) {
            required.insert(k);
        }
    }
    for row in present.iter_mut() {
        for slot in row.iter_mut() {
            if rng.next_u64() % 10 < 6 {
                *slot = true;
            }
        }
    }

    let mut edges = Vec::new();
    for (l, row) in present.iter().enumerate() {
        for (r, &on) in row.iter().enumerate() {
            if on {
                // Small numerator pool so exact weight ties are common.
                edges.push(WeightedEdge {
                    left: l,
                    right: r,
                    weight: Value::Exact(ratio(draw(rng, 0, 6), draw(rng, 1, 3))),
                });
            }
        }
    }
    (
        WeightedBipartiteGraph::new(num_left, num_right, edges).expect("edges in range"),
        required,
    )
}

/// Enumeration-based optimum under the (saturation, weight, cardinality,
/// lexicographic edge list) ranking; `None` when no matching saturates the
/// required set.
pub fn enumeration_optimum(
    g: &WeightedBipartiteGraph,
    required: &BTreeSet<usize>,
    eps: f64,
) -> Option<Matching> {
    let mut best: Option<(Value, usize, Matching)> = None;
    for m in stable_market::enumerate_matchings(g).expect("within guard") {
        if !required.iter().all(|&r| m.right_partner(r).is_some()) {
            continue;
        }
        let weight = m
            .edges()
            .iter()
            .map(|&(l, r)| {
                g.edges()
                    .iter()
                    .find(|e| e.left == l && e.right == r)
                    .expect("edge exists")
                    .weight
                    .clone()
            })
            .fold(Value::from_int(0), |acc, w| &acc + &w);
        let better = match &best {
            None => true,
            Some((bw, bc, bm)) => match weight.cmp_eps(bw, eps) {
                Ordering::Greater => true,
                Ordering::Less => false,
                Ordering::Equal => match m.len().cmp(bc) {
                    Ordering::Greater => true,
                    Ordering::Less => false,
                    Ordering::Equal => m.edges() < bm.edges(),
                },
            },
        };
        if better {
            best = Some((weight, m.len(), m));
        }
    }
    best.map(|(_, _, m)| m)
}
