//! JSON (de)serialization for instances, outcomes, traces, and reports.
//!
//! Rationals ride as strings ("n" or "n/d") so exact values survive a
//! round trip; plain JSON integers are accepted on input. Floats appear
//! only for float-mode payoffs. Parse errors carry a JSON pointer path.

use std::collections::BTreeMap;

use serde_json::{json, Map, Value as Json};
use thiserror::Error;

use crate::generator::GeneratorConfig;
use crate::market::{MarketInstance, PairData, PriceVector, ValidationReport};
use crate::matching::Matching;
use crate::solver::{IterationState, MatchedPair, Outcome};
use crate::valuation::Valuation;
use crate::value::{format_rational, int_rational, parse_rational, Value};
use crate::verifier::{AuditReport, StabilityReport};

#[derive(Debug, Error, PartialEq)]
#[error("{path}: {message}")]
pub struct ParseError {
    /// JSON pointer to the offending element ("" for the document root).
    pub path: String,
    pub message: String,
}

fn err<T>(path: &str, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        path: path.to_string(),
        message: message.into(),
    })
}

// ---------------------------------------------------------------------------
// Reading

fn parse_document(text: &str) -> Result<Json, ParseError> {
    serde_json::from_str(text).or_else(|e| err("", format!("invalid JSON: {e}")))
}

fn as_object<'a>(v: &'a Json, path: &str) -> Result<&'a Map<String, Json>, ParseError> {
    v.as_object()
        .map_or_else(|| err(path, "expected an object"), Ok)
}

fn as_array<'a>(v: &'a Json, path: &str) -> Result<&'a Vec<Json>, ParseError> {
    v.as_array()
        .map_or_else(|| err(path, "expected an array"), Ok)
}

fn as_str<'a>(v: &'a Json, path: &str) -> Result<&'a str, ParseError> {
    v.as_str()
        .map_or_else(|| err(path, "expected a string"), Ok)
}

fn as_int(v: &Json, path: &str) -> Result<i64, ParseError> {
    v.as_i64()
        .map_or_else(|| err(path, "expected an integer"), Ok)
}

fn get<'a>(obj: &'a Map<String, Json>, key: &str, path: &str) -> Result<&'a Json, ParseError> {
    obj.get(key)
        .map_or_else(|| err(path, format!("missing key \"{key}\"")), Ok)
}

fn check_keys(obj: &Map<String, Json>, allowed: &[&str], path: &str) -> Result<(), ParseError> {
    for key in obj.keys() {
        if !allowed.contains(&key.as_str()) {
            return err(path, format!("unknown key \"{key}\""));
        }
    }
    Ok(())
}

/// Rational from a JSON string ("n" or "n/d") or plain integer.
fn rational_from(v: &Json, path: &str) -> Result<num_rational::BigRational, ParseError> {
    match v {
        Json::String(s) => parse_rational(s).or_else(|e| err(path, e)),
        Json::Number(n) => match n.as_i64() {
            Some(i) => Ok(int_rational(i)),
            None => err(path, "expected an integer or rational string"),
        },
        _ => err(path, "expected an integer or rational string"),
    }
}

/// Payoff value: rational strings and integers parse exactly, other
/// numbers parse as floats.
fn value_from(v: &Json, path: &str) -> Result<Value, ParseError> {
    match v {
        Json::String(s) => Ok(Value::Exact(parse_rational(s).or_else(|e| err(path, e))?)),
        Json::Number(n) => {
            if let Some(i) = n.as_i64() {
                Ok(Value::from_int(i))
            } else if let Some(f) = n.as_f64() {
                Ok(Value::Approx(f))
            } else {
                err(path, "unrepresentable number")
            }
        }
        _ => err(path, "expected a number or rational string"),
    }
}

fn valuation_from(v: &Json, path: &str) -> Result<Valuation, ParseError> {
    let obj = as_object(v, path)?;
    let kind = as_str(get(obj, "kind", path)?, &format!("{path}/kind"))?;
    match kind {
        "linear" => {
            check_keys(obj, &["kind", "a", "b"], path)?;
            let a = rational_from(get(obj, "a", path)?, &format!("{path}/a"))?;
            let b = rational_from(get(obj, "b", path)?, &format!("{path}/b"))?;
            Ok(Valuation::linear(a, b))
        }
        "piecewise_linear" => {
            check_keys(obj, &["kind", "points"], path)?;
            let raw = as_array(get(obj, "points", path)?, &format!("{path}/points"))?;
            let mut points = Vec::with_capacity(raw.len());
            for (idx, entry) in raw.iter().enumerate() {
                let entry_path = format!("{path}/points/{idx}");
                let pair = as_array(entry, &entry_path)?;
                if pair.len() != 2 {
                    return err(&entry_path, "expected an [x, y] pair");
                }
                let x = rational_from(&pair[0], &format!("{entry_path}/0"))?;
                let y = rational_from(&pair[1], &format!("{entry_path}/1"))?;
                points.push((x, y));
            }
            Ok(Valuation::piecewise(points))
        }
        "exponential" => {
            check_keys(obj, &["kind", "a", "b", "c"], path)?;
            let a = rational_from(get(obj, "a", path)?, &format!("{path}/a"))?;
            let b = rational_from(get(obj, "b", path)?, &format!("{path}/b"))?;
            let c = rational_from(get(obj, "c", path)?, &format!("{path}/c"))?;
            Ok(Valuation::exponential(a, b, c))
        }
        other => err(
            &format!("{path}/kind"),
            format!("unsupported valuation kind \"{other}\""),
        ),
    }
}

fn id_list(v: &Json, path: &str, role: &str) -> Result<Vec<String>, ParseError> {
    let raw = as_array(v, path)?;
    let mut ids = Vec::with_capacity(raw.len());
    for (idx, entry) in raw.iter().enumerate() {
        let entry_path = format!("{path}/{idx}");
        let id = as_str(entry, &entry_path)?;
        if id.is_empty() {
            return err(&entry_path, format!("empty {role} id"));
        }
        if ids.iter().any(|existing| existing == id) {
            return err(&entry_path, format!("duplicate {role} id \"{id}\""));
        }
        ids.push(id.to_string());
    }
    Ok(ids)
}

pub fn read_instance(text: &str) -> Result<MarketInstance, ParseError> {
    let doc = parse_document(text)?;
    let root = as_object(&doc, "")?;
    check_keys(root, &["sellers", "buyers", "pairs"], "")?;
    let sellers = id_list(get(root, "sellers", "")?, "/sellers", "seller")?;
    let buyers = id_list(get(root, "buyers", "")?, "/buyers", "buyer")?;

    let raw_pairs = as_array(get(root, "pairs", "")?, "/pairs")?;
    let mut slots: Vec<Option<PairData>> = vec![None; sellers.len() * buyers.len()];
    for (idx, entry) in raw_pairs.iter().enumerate() {
        let path = format!("/pairs/{idx}");
        let obj = as_object(entry, &path)?;
        check_keys(
            obj,
            &["seller", "buyer", "lower", "upper", "seller_valuation", "buyer_valuation"],
            &path,
        )?;
        let seller_id = as_str(get(obj, "seller", &path)?, &format!("{path}/seller"))?;
        let buyer_id = as_str(get(obj, "buyer", &path)?, &format!("{path}/buyer"))?;
        let i = sellers
            .iter()
            .position(|s| s == seller_id)
            .ok_or_else(|| ParseError {
                path: format!("{path}/seller"),
                message: format!("unknown seller \"{seller_id}\""),
            })?;
        let j = buyers
            .iter()
            .position(|b| b == buyer_id)
            .ok_or_else(|| ParseError {
                path: format!("{path}/buyer"),
                message: format!("unknown buyer \"{buyer_id}\""),
            })?;
        let slot = i * buyers.len() + j;
        if slots[slot].is_some() {
            return err(&path, format!("duplicate pair entry for ({seller_id}, {buyer_id})"));
        }
        slots[slot] = Some(PairData {
            lower: as_int(get(obj, "lower", &path)?, &format!("{path}/lower"))?,
            upper: as_int(get(obj, "upper", &path)?, &format!("{path}/upper"))?,
            seller_valuation: valuation_from(
                get(obj, "seller_valuation", &path)?,
                &format!("{path}/seller_valuation"),
            )?,
            buyer_valuation: valuation_from(
                get(obj, "buyer_valuation", &path)?,
                &format!("{path}/buyer_valuation"),
            )?,
        });
    }

    let mut pairs = Vec::with_capacity(slots.len());
    for (slot, data) in slots.into_iter().enumerate() {
        match data {
            Some(d) => pairs.push(d),
            None => {
                let i = slot / buyers.len();
                let j = slot % buyers.len();
                return err(
                    "/pairs",
                    format!("missing pair entry for ({}, {})", sellers[i], buyers[j]),
                );
            }
        }
    }

    MarketInstance::new(sellers, buyers, pairs).map_err(|e| ParseError {
        path: String::new(),
        message: e.to_string(),
    })
}

pub fn read_outcome(text: &str, inst: &MarketInstance) -> Result<Outcome, ParseError> {
    let doc = parse_document(text)?;
    let root = as_object(&doc, "")?;
    check_keys(root, &["matching", "q", "r", "iterations"], "")?;

    let raw_matching = as_array(get(root, "matching", "")?, "/matching")?;
    let mut matched = Vec::with_capacity(raw_matching.len());
    for (idx, entry) in raw_matching.iter().enumerate() {
        let path = format!("/matching/{idx}");
        let obj = as_object(entry, &path)?;
        check_keys(obj, &["seller", "buyer", "price"], &path)?;
        let seller_id = as_str(get(obj, "seller", &path)?, &format!("{path}/seller"))?;
        let buyer_id = as_str(get(obj, "buyer", &path)?, &format!("{path}/buyer"))?;
        let seller = inst.seller_index(seller_id).ok_or_else(|| ParseError {
            path: format!("{path}/seller"),
            message: format!("unknown seller \"{seller_id}\""),
        })?;
        let buyer = inst.buyer_index(buyer_id).ok_or_else(|| ParseError {
            path: format!("{path}/buyer"),
            message: format!("unknown buyer \"{buyer_id}\""),
        })?;
        let price = as_int(get(obj, "price", &path)?, &format!("{path}/price"))?;
        matched.push(MatchedPair { seller, buyer, price });
    }
    matched.sort_by_key(|m| (m.seller, m.buyer));

    let q = payoff_vector(get(root, "q", "")?, "/q", inst.sellers(), "seller")?;
    let r = payoff_vector(get(root, "r", "")?, "/r", inst.buyers(), "buyer")?;
    let iterations = get(root, "iterations", "")?
        .as_u64()
        .map_or_else(|| err("/iterations", "expected a non-negative integer"), Ok)?
        as usize;

    Ok(Outcome {
        matched,
        q,
        r,
        iterations,
    })
}

fn payoff_vector(
    v: &Json,
    path: &str,
    ids: &[String],
    role: &str,
) -> Result<Vec<Value>, ParseError> {
    let obj = as_object(v, path)?;
    for key in obj.keys() {
        if !ids.iter().any(|id| id == key) {
            return err(path, format!("unknown {role} \"{key}\""));
        }
    }
    let mut out = Vec::with_capacity(ids.len());
    for id in ids {
        let entry = obj
            .get(id)
            .ok_or_else(|| ParseError {
                path: path.to_string(),
                message: format!("missing {role} \"{id}\""),
            })?;
        out.push(value_from(entry, &format!("{path}/{id}"))?);
    }
    Ok(out)
}

pub fn read_trace(text: &str, inst: &MarketInstance) -> Result<Vec<IterationState>, ParseError> {
    let doc = parse_document(text)?;
    let passes = as_array(&doc, "")?;
    let mut states = Vec::with_capacity(passes.len());
    for (idx, entry) in passes.iter().enumerate() {
        let path = format!("/{idx}");
        states.push(state_from(entry, &path, inst)?);
    }
    Ok(states)
}

fn state_from(v: &Json, path: &str, inst: &MarketInstance) -> Result<IterationState, ParseError> {
    let obj = as_object(v, path)?;
    check_keys(
        obj,
        &[
            "iteration", "K0", "T0", "E_tilde", "q_tilde", "EP_tilde", "EP_hat", "V_tilde",
            "K", "L", "T0_tilde", "m", "p", "X", "r",
        ],
        path,
    )?;
    let iteration = get(obj, "iteration", path)?
        .as_u64()
        .map_or_else(|| err(&format!("{path}/iteration"), "expected a non-negative integer"), Ok)?
        as usize;

    let pair_set = |key: &str| -> Result<std::collections::BTreeSet<(usize, usize)>, ParseError> {
        let key_path = format!("{path}/{key}");
        let raw = as_array(get(obj, key, path)?, &key_path)?;
        let mut set = std::collections::BTreeSet::new();
        for (idx, entry) in raw.iter().enumerate() {
            set.insert(pair_ref(entry, &format!("{key_path}/{idx}"), inst)?);
        }
        Ok(set)
    };

    let k0 = pair_set("K0")?;
    let t0 = pair_set("T0")?;
    let e_tilde = pair_set("E_tilde")?;
    let ep_tilde = pair_set("EP_tilde")?;
    let ep_hat = pair_set("EP_hat")?;
    let k = pair_set("K")?;
    let l = pair_set("L")?;
    let t0_tilde = pair_set("T0_tilde")?;

    let q_tilde = payoff_vector(get(obj, "q_tilde", path)?, &format!("{path}/q_tilde"), inst.sellers(), "seller")?;
    let r = payoff_vector(get(obj, "r", path)?, &format!("{path}/r"), inst.buyers(), "buyer")?;

    let v_path = format!("{path}/V_tilde");
    let raw_v = as_array(get(obj, "V_tilde", path)?, &v_path)?;
    let mut v_tilde = std::collections::BTreeSet::new();
    for (idx, entry) in raw_v.iter().enumerate() {
        let entry_path = format!("{v_path}/{idx}");
        let id = as_str(entry, &entry_path)?;
        let j = inst.buyer_index(id).ok_or_else(|| ParseError {
            path: entry_path,
            message: format!("unknown buyer \"{id}\""),
        })?;
        v_tilde.insert(j);
    }

    let m_path = format!("{path}/m");
    let raw_m = as_array(get(obj, "m", path)?, &m_path)?;
    let mut decrements = BTreeMap::new();
    for (idx, entry) in raw_m.iter().enumerate() {
        let entry_path = format!("{m_path}/{idx}");
        let mobj = as_object(entry, &entry_path)?;
        check_keys(mobj, &["seller", "buyer", "m"], &entry_path)?;
        let key = pair_ref(entry, &entry_path, inst)?;
        let step = as_int(get(mobj, "m", &entry_path)?, &format!("{entry_path}/m"))?;
        decrements.insert(key, step);
    }

    let p_path = format!("{path}/p");
    let raw_p = as_array(get(obj, "p", path)?, &p_path)?;
    let mut price_map = BTreeMap::new();
    for (idx, entry) in raw_p.iter().enumerate() {
        let entry_path = format!("{p_path}/{idx}");
        let pobj = as_object(entry, &entry_path)?;
        check_keys(pobj, &["seller", "buyer", "price"], &entry_path)?;
        let key = pair_ref(entry, &entry_path, inst)?;
        let price = as_int(get(pobj, "price", &entry_path)?, &format!("{entry_path}/price"))?;
        price_map.insert(key, price);
    }
    for (i, j) in inst.edges() {
        if !price_map.contains_key(&(i, j)) {
            return err(
                &p_path,
                format!(
                    "missing price for pair ({}, {})",
                    inst.sellers()[i],
                    inst.buyers()[j]
                ),
            );
        }
    }
    let prices = PriceVector::from_fn(inst, |i, j| price_map[&(i, j)]);

    let x_path = format!("{path}/X");
    let raw_x = as_array(get(obj, "X", path)?, &x_path)?;
    let mut x_edges = Vec::with_capacity(raw_x.len());
    for (idx, entry) in raw_x.iter().enumerate() {
        x_edges.push(pair_ref(entry, &format!("{x_path}/{idx}"), inst)?);
    }
    let matching = Matching::new(x_edges).map_err(|e| ParseError {
        path: x_path,
        message: e.to_string(),
    })?;

    Ok(IterationState {
        iteration,
        k0,
        t0,
        e_tilde,
        q_tilde,
        ep_tilde,
        ep_hat,
        v_tilde,
        k,
        decrements,
        l,
        t0_tilde,
        prices,
        matching,
        r,
    })
}

fn pair_ref(v: &Json, path: &str, inst: &MarketInstance) -> Result<(usize, usize), ParseError> {
    let obj = as_object(v, path)?;
    let seller_id = as_str(get(obj, "seller", path)?, &format!("{path}/seller"))?;
    let buyer_id = as_str(get(obj, "buyer", path)?, &format!("{path}/buyer"))?;
    let i = inst.seller_index(seller_id).ok_or_else(|| ParseError {
        path: format!("{path}/seller"),
        message: format!("unknown seller \"{seller_id}\""),
    })?;
    let j = inst.buyer_index(buyer_id).ok_or_else(|| ParseError {
        path: format!("{path}/buyer"),
        message: format!("unknown buyer \"{buyer_id}\""),
    })?;
    Ok((i, j))
}

pub fn read_generator_config(text: &str) -> Result<GeneratorConfig, ParseError> {
    serde_json::from_str(text).map_err(|e| ParseError {
        path: String::new(),
        message: format!("invalid generator config: {e}"),
    })
}

// ---------------------------------------------------------------------------
// Writing

fn pretty(v: &Json) -> String {
    let mut text = serde_json::to_string_pretty(v).expect("serializable");
    text.push('\n');
    text
}

fn rational_json(r: &num_rational::BigRational) -> Json {
    Json::String(format_rational(r))
}

fn value_json(v: &Value) -> Json {
    match v {
        Value::Exact(r) => rational_json(r),
        Value::Approx(x) => json!(x),
    }
}

fn valuation_json(v: &Valuation) -> Json {
    match v {
        Valuation::Linear { slope, intercept } => json!({
            "kind": "linear",
            "a": rational_json(slope),
            "b": rational_json(intercept),
        }),
        Valuation::PiecewiseLinear { points } => json!({
            "kind": "piecewise_linear",
            "points": points
                .iter()
                .map(|(x, y)| json!([rational_json(x), rational_json(y)]))
                .collect::<Vec<_>>(),
        }),
        Valuation::Exponential { scale, offset, rate } => json!({
            "kind": "exponential",
            "a": rational_json(scale),
            "b": rational_json(offset),
            "c": rational_json(rate),
        }),
    }
}

pub fn write_instance(inst: &MarketInstance) -> String {
    let pairs: Vec<Json> = inst
        .edges()
        .map(|(i, j)| {
            let pair = inst.pair(i, j).expect("edge exists");
            json!({
                "seller": inst.sellers()[i],
                "buyer": inst.buyers()[j],
                "lower": pair.lower,
                "upper": pair.upper,
                "seller_valuation": valuation_json(&pair.seller_valuation),
                "buyer_valuation": valuation_json(&pair.buyer_valuation),
            })
        })
        .collect();
    pretty(&json!({
        "sellers": inst.sellers(),
        "buyers": inst.buyers(),
        "pairs": pairs,
    }))
}

fn payoff_map(ids: &[String], values: &[Value]) -> Json {
    let mut map = Map::new();
    for (id, v) in ids.iter().zip(values) {
        map.insert(id.clone(), value_json(v));
    }
    Json::Object(map)
}

pub fn write_outcome(inst: &MarketInstance, outcome: &Outcome) -> String {
    pretty(&outcome_json(inst, outcome))
}

fn outcome_json(inst: &MarketInstance, outcome: &Outcome) -> Json {
    let matching: Vec<Json> = outcome
        .matched
        .iter()
        .map(|m| {
            json!({
                "seller": inst.sellers()[m.seller],
                "buyer": inst.buyers()[m.buyer],
                "price": m.price,
            })
        })
        .collect();
    json!({
        "matching": matching,
        "q": payoff_map(inst.sellers(), &outcome.q),
        "r": payoff_map(inst.buyers(), &outcome.r),
        "iterations": outcome.iterations,
    })
}

pub fn write_outcome_list(inst: &MarketInstance, outcomes: &[Outcome]) -> String {
    let list: Vec<Json> = outcomes.iter().map(|o| outcome_json(inst, o)).collect();
    pretty(&Json::Array(list))
}

pub fn write_trace(inst: &MarketInstance, states: &[IterationState]) -> String {
    let list: Vec<Json> = states.iter().map(|s| state_json(inst, s)).collect();
    pretty(&Json::Array(list))
}

fn state_json(inst: &MarketInstance, state: &IterationState) -> Json {
    let pair_list = |set: &std::collections::BTreeSet<(usize, usize)>| -> Json {
        Json::Array(
            set.iter()
                .map(|&(i, j)| {
                    json!({
                        "seller": inst.sellers()[i],
                        "buyer": inst.buyers()[j],
                    })
                })
                .collect(),
        )
    };
    let m: Vec<Json> = state
        .decrements
        .iter()
        .map(|(&(i, j), &step)| {
            json!({
                "seller": inst.sellers()[i],
                "buyer": inst.buyers()[j],
                "m": step,
            })
        })
        .collect();
    let p: Vec<Json> = inst
        .edges()
        .map(|(i, j)| {
            json!({
                "seller": inst.sellers()[i],
                "buyer": inst.buyers()[j],
                "price": state.prices.get(i, j),
            })
        })
        .collect();
    let x: Vec<Json> = state
        .matching
        .edges()
        .iter()
        .map(|&(i, j)| {
            json!({
                "seller": inst.sellers()[i],
                "buyer": inst.buyers()[j],
            })
        })
        .collect();
    let v_tilde: Vec<Json> = state
        .v_tilde
        .iter()
        .map(|&j| Json::String(inst.buyers()[j].clone()))
        .collect();
    json!({
        "iteration": state.iteration,
        "K0": pair_list(&state.k0),
        "T0": pair_list(&state.t0),
        "E_tilde": pair_list(&state.e_tilde),
        "q_tilde": payoff_map(inst.sellers(), &state.q_tilde),
        "EP_tilde": pair_list(&state.ep_tilde),
        "EP_hat": pair_list(&state.ep_hat),
        "V_tilde": v_tilde,
        "K": pair_list(&state.k),
        "L": pair_list(&state.l),
        "T0_tilde": pair_list(&state.t0_tilde),
        "m": m,
        "p": p,
        "X": x,
        "r": payoff_map(inst.buyers(), &state.r),
    })
}

pub fn write_stability_report(inst: &MarketInstance, report: &StabilityReport) -> String {
    let witnesses: Vec<Json> = report
        .witnesses
        .iter()
        .map(|w| {
            json!({
                "seller": inst.sellers()[w.seller],
                "buyer": inst.buyers()[w.buyer],
                "c": w.price,
            })
        })
        .collect();
    pretty(&json!({
        "stable": report.is_stable(),
        "p1_ok": report.p1_ok,
        "feasibility_ok": report.feasibility_ok,
        "matching_ok": report.matching_ok,
        "witnesses": witnesses,
    }))
}

pub fn write_audit_report(report: &AuditReport) -> String {
    let violations: Vec<Json> = report
        .violations
        .iter()
        .map(|v| {
            json!({
                "lemma": v.lemma,
                "pass": v.pass,
                "detail": v.detail,
            })
        })
        .collect();
    pretty(&json!({
        "clean": report.is_clean(),
        "violations": violations,
    }))
}

pub fn write_validation_report(report: &ValidationReport) -> String {
    pretty(&json!({
        "valid": report.is_clean(),
        "violations": report.violations,
    }))
}
