//! Constrained maximum-weight bipartite matching.
//!
//! Each solver pass needs a matching that, in order of priority, saturates
//! a required buyer set, maximizes total buyer value, maximizes
//! cardinality, and resolves remaining ties on the lexicographically
//! smallest sorted edge list. All four goals fold into one lexicographic
//! objective per edge: the last component weights edge `k` (in sorted
//! order) by `2^(E-1-k)`, so among equal-cardinality optima the largest
//! tie sum is exactly the lexicographically smallest edge list. The
//! optimum is found by successive maximum-gain augmenting paths; the tie
//! component lives in its own lexicographic slot, so it never interacts
//! with the true weights.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_traits::Zero;
use thiserror::Error;

use crate::value::Value;

/// Edge-count ceiling for exhaustive matching enumeration.
pub const ENUMERATION_EDGE_GUARD: usize = 25;

#[derive(Clone, Debug)]
pub struct WeightedEdge {
    pub left: usize,
    pub right: usize,
    pub weight: Value,
}

/// Bipartite graph with sellers on the left, buyers on the right.
#[derive(Clone, Debug)]
pub struct WeightedBipartiteGraph {
    num_left: usize,
    num_right: usize,
    edges: Vec<WeightedEdge>,
}

#[derive(Debug, Error, PartialEq)]
pub enum MatchingError {
    #[error("edge ({left}, {right}) out of range for a {num_left}x{num_right} graph")]
    EdgeOutOfRange {
        left: usize,
        right: usize,
        num_left: usize,
        num_right: usize,
    },
    #[error("duplicate edge ({left}, {right})")]
    DuplicateEdge { left: usize, right: usize },
    #[error("required buyer {index} out of range for {num_right} buyers")]
    RequiredOutOfRange { index: usize, num_right: usize },
    #[error("{side} {index} repeated in matching")]
    RepeatedAgent { side: &'static str, index: usize },
    #[error(
        "required buyers {deficient:?} have joint neighborhood {neighborhood:?}; \
         no matching saturates them"
    )]
    InfeasibleRequired {
        deficient: Vec<usize>,
        neighborhood: Vec<usize>,
    },
    #[error("matching enumeration refused: {edges} edges exceed the guard of {guard}")]
    EnumerationGuard { edges: usize, guard: usize },
}

impl WeightedBipartiteGraph {
    pub fn new(
        num_left: usize,
        num_right: usize,
        mut edges: Vec<WeightedEdge>,
    ) -> Result<Self, MatchingError> {
        for e in &edges {
            if e.left >= num_left || e.right >= num_right {
                return Err(MatchingError::EdgeOutOfRange {
                    left: e.left,
                    right: e.right,
                    num_left,
                    num_right,
                });
            }
        }
        edges.sort_by_key(|e| (e.left, e.right));
        for pair in edges.windows(2) {
            if pair[0].left == pair[1].left && pair[0].right == pair[1].right {
                return Err(MatchingError::DuplicateEdge {
                    left: pair[0].left,
                    right: pair[0].right,
                });
            }
        }
        Ok(WeightedBipartiteGraph {
            num_left,
            num_right,
            edges,
        })
    }

    pub fn num_left(&self) -> usize {
        self.num_left
    }

    pub fn num_right(&self) -> usize {
        self.num_right
    }

    pub fn edges(&self) -> &[WeightedEdge] {
        &self.edges
    }
}

/// A set of pairs in which every agent appears at most once.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Matching {
    edges: Vec<(usize, usize)>, // sorted by (left, right)
}

impl Matching {
    pub fn new(mut edges: Vec<(usize, usize)>) -> Result<Self, MatchingError> {
        edges.sort_unstable();
        let mut lefts = BTreeSet::new();
        let mut rights = BTreeSet::new();
        for &(l, r) in &edges {
            if !lefts.insert(l) {
                return Err(MatchingError::RepeatedAgent {
                    side: "seller",
                    index: l,
                });
            }
            if !rights.insert(r) {
                return Err(MatchingError::RepeatedAgent {
                    side: "buyer",
                    index: r,
                });
            }
        }
        Ok(Matching { edges })
    }

    pub fn empty() -> Self {
        Matching::default()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains(&self, left: usize, right: usize) -> bool {
        self.edges.binary_search(&(left, right)).is_ok()
    }

    pub fn left_partner(&self, left: usize) -> Option<usize> {
        self.edges
            .iter()
            .find(|&&(l, _)| l == left)
            .map(|&(_, r)| r)
    }

    pub fn right_partner(&self, right: usize) -> Option<usize> {
        self.edges
            .iter()
            .find(|&&(_, r)| r == right)
            .map(|&(l, _)| l)
    }

    pub fn matched_rights(&self) -> BTreeSet<usize> {
        self.edges.iter().map(|&(_, r)| r).collect()
    }
}

/// Lexicographic objective accumulated along alternating paths.
#[derive(Clone, Debug)]
struct Objective {
    saturation: i64,
    weight: Value,
    cardinality: i64,
    tie: BigInt,
}

impl Objective {
    fn zero() -> Self {
        Objective {
            saturation: 0,
            weight: Value::from_int(0),
            cardinality: 0,
            tie: BigInt::zero(),
        }
    }

    fn add(&self, other: &Objective) -> Objective {
        Objective {
            saturation: self.saturation + other.saturation,
            weight: &self.weight + &other.weight,
            cardinality: self.cardinality + other.cardinality,
            tie: &self.tie + &other.tie,
        }
    }

    fn sub(&self, other: &Objective) -> Objective {
        Objective {
            saturation: self.saturation - other.saturation,
            weight: &self.weight - &other.weight,
            cardinality: self.cardinality - other.cardinality,
            tie: &self.tie - &other.tie,
        }
    }

    fn cmp_eps(&self, other: &Objective, eps: f64) -> Ordering {
        self.saturation
            .cmp(&other.saturation)
            .then_with(|| self.weight.cmp_eps(&other.weight, eps))
            .then_with(|| self.cardinality.cmp(&other.cardinality))
            .then_with(|| self.tie.cmp(&other.tie))
    }
}

/// Matching in `g` that matches every buyer in `required`, maximizes total
/// weight among those, then cardinality, then breaks remaining ties toward
/// the lexicographically smallest sorted edge list.
pub fn solve_constrained_matching(
    g: &WeightedBipartiteGraph,
    required: &BTreeSet<usize>,
    eps: f64,
) -> Result<Matching, MatchingError> {
    for &r in required {
        if r >= g.num_right {
            return Err(MatchingError::RequiredOutOfRange {
                index: r,
                num_right: g.num_right,
            });
        }
    }

    let objectives: Vec<Objective> = g
        .edges
        .iter()
        .enumerate()
        .map(|(k, e)| Objective {
            saturation: i64::from(required.contains(&e.right)),
            weight: e.weight.clone(),
            cardinality: 1,
            tie: BigInt::from(1u8) << (g.edges.len() - 1 - k),
        })
        .collect();

    let mut match_l: Vec<Option<usize>> = vec![None; g.num_left];
    let mut match_r: Vec<Option<usize>> = vec![None; g.num_right];

    loop {
        match best_augmenting_path(g, &objectives, &match_l, &match_r, eps) {
            Some((gain, end_right, pred)) if gain.cmp_eps(&Objective::zero(), eps) == Ordering::Greater => {
                apply_augmenting_path(g, end_right, &pred, &mut match_l, &mut match_r);
            }
            _ => break,
        }
    }

    let saturated = required
        .iter()
        .filter(|&&r| match_r[r].is_some())
        .count();
    if saturated < required.len() {
        let (deficient, neighborhood) = hall_witness(g, required, &match_l, &match_r);
        return Err(MatchingError::InfeasibleRequired {
            deficient,
            neighborhood,
        });
    }

    let edges = match_l
        .iter()
        .enumerate()
        .filter_map(|(l, r)| r.map(|r| (l, r)))
        .collect();
    Matching::new(edges)
}

/// Maximum-gain alternating path from an unmatched left vertex to an
/// unmatched right vertex, by Bellman-Ford over the residual digraph.
/// Node ids: lefts are `0..num_left`, rights are `num_left + r`.
#[allow(clippy::type_complexity)]
fn best_augmenting_path(
    g: &WeightedBipartiteGraph,
    objectives: &[Objective],
    match_l: &[Option<usize>],
    match_r: &[Option<usize>],
    eps: f64,
) -> Option<(Objective, usize, Vec<Option<usize>>)> {
    let nodes = g.num_left + g.num_right;
    let mut dist: Vec<Option<Objective>> = vec![None; nodes];
    let mut pred: Vec<Option<usize>> = vec![None; nodes];
    for l in 0..g.num_left {
        if match_l[l].is_none() {
            dist[l] = Some(Objective::zero());
        }
    }

    // The matching is optimal for its cardinality at every iteration, so
    // the residual digraph has no positive cycle; the round cap is a
    // safety net for float-mode edge cases.
    for _ in 0..=nodes {
        let mut changed = false;
        for (k, e) in g.edges.iter().enumerate() {
            if match_l[e.left] == Some(e.right) {
                // Matched edge traversed right-to-left, subtracting.
                if let Some(dr) = dist[g.num_left + e.right].clone() {
                    let cand = dr.sub(&objectives[k]);
                    if improves(&cand, &dist[e.left], eps) {
                        dist[e.left] = Some(cand);
                        pred[e.left] = Some(k);
                        changed = true;
                    }
                }
            } else {
                // Free edge traversed left-to-right, adding.
                if let Some(dl) = dist[e.left].clone() {
                    let cand = dl.add(&objectives[k]);
                    if improves(&cand, &dist[g.num_left + e.right], eps) {
                        dist[g.num_left + e.right] = Some(cand);
                        pred[g.num_left + e.right] = Some(k);
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }

    let mut best: Option<(Objective, usize)> = None;
    for r in 0..g.num_right {
        if match_r[r].is_some() {
            continue;
        }
        if let Some(d) = &dist[g.num_left + r] {
            let better = match &best {
                None => true,
                Some((cur, _)) => d.cmp_eps(cur, eps) == Ordering::Greater,
            };
            if better {
                best = Some((d.clone(), r));
            }
        }
    }
    best.map(|(gain, r)| (gain, r, pred))
}

fn improves(candidate: &Objective, current: &Option<Objective>, eps: f64) -> bool {
    match current {
        None => true,
        Some(cur) => candidate.cmp_eps(cur, eps) == Ordering::Greater,
    }
}

fn apply_augmenting_path(
    g: &WeightedBipartiteGraph,
    end_right: usize,
    pred: &[Option<usize>],
    match_l: &mut [Option<usize>],
    match_r: &mut [Option<usize>],
) {
    let mut forward = Vec::new();
    let mut backward = Vec::new();
    let mut node = g.num_left + end_right;
    loop {
        let k = pred[node].expect("augmenting path is connected");
        let e = &g.edges[k];
        if node == g.num_left + e.right {
            forward.push(k);
            if pred[e.left].is_none() {
                break;
            }
            node = e.left;
        } else {
            backward.push(k);
            node = g.num_left + e.right;
        }
    }
    for &k in &backward {
        let e = &g.edges[k];
        match_l[e.left] = None;
        match_r[e.right] = None;
    }
    for &k in &forward {
        let e = &g.edges[k];
        match_l[e.left] = Some(e.right);
        match_r[e.right] = Some(e.left);
    }
}

/// Deficient required-buyer set and its joint neighborhood, from alternating
/// reachability in the subgraph of edges incident to required buyers.
fn hall_witness(
    g: &WeightedBipartiteGraph,
    required: &BTreeSet<usize>,
    match_l: &[Option<usize>],
    match_r: &[Option<usize>],
) -> (Vec<usize>, Vec<usize>) {
    let mut seen_r = BTreeSet::new();
    let mut seen_l = BTreeSet::new();
    let mut queue: Vec<usize> = required
        .iter()
        .copied()
        .filter(|&r| match_r[r].is_none())
        .collect();
    seen_r.extend(queue.iter().copied());
    while let Some(r) = queue.pop() {
        for e in &g.edges {
            if e.right != r || seen_l.contains(&e.left) {
                continue;
            }
            seen_l.insert(e.left);
            if let Some(r2) = match_l[e.left] {
                if required.contains(&r2) && seen_r.insert(r2) {
                    queue.push(r2);
                }
            }
        }
    }
    (
        seen_r.into_iter().collect(),
        seen_l.into_iter().collect(),
    )
}

/// Yields every matching of `g` (including the empty one) exactly once, as
/// increasing sequences of edge indices in depth-first prefix order.
pub fn enumerate_matchings(
    g: &WeightedBipartiteGraph,
) -> Result<MatchingEnumeration<'_>, MatchingError> {
    if g.edges.len() > ENUMERATION_EDGE_GUARD {
        return Err(MatchingError::EnumerationGuard {
            edges: g.edges.len(),
            guard: ENUMERATION_EDGE_GUARD,
        });
    }
    Ok(MatchingEnumeration {
        g,
        stack: Vec::new(),
        cursor: 0,
        used_l: vec![false; g.num_left],
        used_r: vec![false; g.num_right],
        emitted_empty: false,
    })
}

pub struct MatchingEnumeration<'g> {
    g: &'g WeightedBipartiteGraph,
    stack: Vec<usize>,
    cursor: usize,
    used_l: Vec<bool>,
    used_r: Vec<bool>,
    emitted_empty: bool,
}

impl Iterator for MatchingEnumeration<'_> {
    type Item = Matching;

    fn next(&mut self) -> Option<Matching> {
        if !self.emitted_empty {
            self.emitted_empty = true;
            return Some(Matching::empty());
        }
        loop {
            if self.cursor < self.g.edges.len() {
                let e = &self.g.edges[self.cursor];
                if !self.used_l[e.left] && !self.used_r[e.right] {
                    self.used_l[e.left] = true;
                    self.used_r[e.right] = true;
                    self.stack.push(self.cursor);
                    self.cursor += 1;
                    let edges = self
                        .stack
                        .iter()
                        .map(|&k| (self.g.edges[k].left, self.g.edges[k].right))
                        .collect();
                    return Some(Matching::new(edges).expect("edge stack is a matching"));
                }
                self.cursor += 1;
            } else {
                let k = self.stack.pop()?;
                let e = &self.g.edges[k];
                self.used_l[e.left] = false;
                self.used_r[e.right] = false;
                self.cursor = k + 1;
            }
        }
    }
}
