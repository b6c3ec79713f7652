//! Seeded random instance generation.
//!
//! Instances are drawn from a SplitMix64 stream (Steele, Lea, Flood's
//! splittable generator, as shipped by `rand_xoshiro`) with a fixed draw
//! order: per pair in row-major order, bounds first, then the seller
//! valuation, then the buyer valuation. Integer draws reduce the raw
//! 64-bit output modulo the span width, so the byte-level output depends
//! only on the seed and configuration. Valuations are built in threshold
//! form - pick where the function crosses zero, then shape around it - so
//! every generated instance is strictly increasing by construction.

use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand_xoshiro::rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::{MarketInstance, PairData};
use crate::valuation::Valuation;
use crate::value::{int_rational, ratio};

/// Exponent-magnitude ceiling keeping exponential values inside a range
/// where the float comparison tolerance stays meaningful.
pub const MAX_EXPONENT_MAGNITUDE: f64 = 40.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FamilyWeights {
    pub linear: u32,
    pub piecewise_linear: u32,
    pub exponential: u32,
}

impl Default for FamilyWeights {
    fn default() -> Self {
        FamilyWeights {
            linear: 1,
            piecewise_linear: 1,
            exponential: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub num_sellers: usize,
    pub num_buyers: usize,
    /// Inclusive span the per-pair integer bounds are drawn from.
    pub price_range: (i64, i64),
    pub weights: FamilyWeights,
    /// Inclusive numerator span for slopes; only the positive part is used.
    pub slope_numerators: (i64, i64),
    /// Denominators for slopes and thresholds are drawn from `1..=this`.
    pub max_denominator: u32,
    /// How far outside the price range acceptance thresholds may fall.
    pub threshold_margin: i64,
    /// Inclusive span for the piecewise-linear breakpoint count.
    pub piecewise_points: (u32, u32),
    /// Inclusive span for exponential rate denominators (`|c| = 1/d`).
    pub exp_rate_denominators: (u32, u32),
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            seed: 0,
            num_sellers: 3,
            num_buyers: 3,
            price_range: (0, 10),
            weights: FamilyWeights::default(),
            slope_numerators: (1, 4),
            max_denominator: 4,
            threshold_margin: 6,
            piecewise_points: (2, 4),
            exp_rate_denominators: (4, 8),
        }
    }
}

impl GeneratorConfig {
    /// Convenience constructor that retunes the threshold margin and
    /// exponential rates to the requested price range.
    pub fn for_market(seed: u64, num_sellers: usize, num_buyers: usize, lo: i64, hi: i64) -> Self {
        let width = (hi - lo).max(1);
        let margin = width / 2 + 1;
        let extreme = (lo - margin).abs().max((hi + margin).abs()).max(1);
        let d_lo = ((extreme as f64 / 8.0).ceil() as u32).max(4);
        GeneratorConfig {
            seed,
            num_sellers,
            num_buyers,
            price_range: (lo, hi),
            threshold_margin: margin,
            exp_rate_denominators: (d_lo, d_lo * 2),
            ..GeneratorConfig::default()
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GeneratorError {
    #[error("invalid generator config: {0}")]
    Config(String),
}

/// Deterministic instance generation; a pure function of the config.
pub fn generate(config: &GeneratorConfig) -> Result<MarketInstance, GeneratorError> {
    validate_config(config)?;
    let mut rng = SplitMix64::seed_from_u64(config.seed);

    let sellers: Vec<String> = (0..config.num_sellers)
        .map(|i| format!("s{}", i + 1))
        .collect();
    let buyers: Vec<String> = (0..config.num_buyers)
        .map(|j| format!("b{}", j + 1))
        .collect();

    let mut pairs = Vec::with_capacity(config.num_sellers * config.num_buyers);
    for _ in 0..config.num_sellers {
        for _ in 0..config.num_buyers {
            let (lo, hi) = config.price_range;
            let a = draw_i64(&mut rng, lo, hi);
            let b = draw_i64(&mut rng, lo, hi);
            let (lower, upper) = if a <= b { (a, b) } else { (b, a) };
            let seller_valuation = draw_valuation(&mut rng, config, Side::Seller);
            let buyer_valuation = draw_valuation(&mut rng, config, Side::Buyer);
            pairs.push(PairData {
                lower,
                upper,
                seller_valuation,
                buyer_valuation,
            });
        }
    }

    MarketInstance::new(sellers, buyers, pairs)
        .map_err(|e| GeneratorError::Config(e.to_string()))
}

fn validate_config(config: &GeneratorConfig) -> Result<(), GeneratorError> {
    let err = |msg: String| Err(GeneratorError::Config(msg));
    let (lo, hi) = config.price_range;
    if lo > hi {
        return err(format!("price range ({lo}, {hi}) is reversed"));
    }
    let w = &config.weights;
    if w.linear == 0 && w.piecewise_linear == 0 && w.exponential == 0 {
        return err("family weights are all zero".into());
    }
    if config.slope_numerators.0 > config.slope_numerators.1 {
        return err("slope numerator range is reversed".into());
    }
    if config.slope_numerators.1 < 1 {
        return err("slope numerator range contains no positive values".into());
    }
    if config.max_denominator == 0 {
        return err("max denominator must be at least 1".into());
    }
    if config.piecewise_points.0 < 2 || config.piecewise_points.0 > config.piecewise_points.1 {
        return err("piecewise point count range must satisfy 2 <= lo <= hi".into());
    }
    if config.exp_rate_denominators.0 == 0
        || config.exp_rate_denominators.0 > config.exp_rate_denominators.1
    {
        return err("exponential rate denominators must satisfy 1 <= lo <= hi".into());
    }
    if config.weights.exponential > 0 {
        let margin = config.threshold_margin.max(0);
        let extreme = (lo - margin).abs().max((hi + margin).abs()) as f64;
        let max_exponent = extreme / config.exp_rate_denominators.0 as f64;
        if max_exponent > MAX_EXPONENT_MAGNITUDE {
            return err(format!(
                "exponent magnitude {max_exponent:.1} exceeds {MAX_EXPONENT_MAGNITUDE}; \
                 raise exp_rate_denominators"
            ));
        }
    }
    Ok(())
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    Seller,
    Buyer,
}

fn draw_valuation(rng: &mut SplitMix64, config: &GeneratorConfig, side: Side) -> Valuation {
    let total = u64::from(config.weights.linear)
        + u64::from(config.weights.piecewise_linear)
        + u64::from(config.weights.exponential);
    let pick = rng.next_u64() % total;
    // Acceptance threshold: where the valuation crosses zero, in price
    // terms, drawn on a rational grid around the price range.
    let margin = config.threshold_margin.max(0);
    let (lo, hi) = config.price_range;
    let denom = draw_i64(rng, 1, i64::from(config.max_denominator));
    let numer = draw_i64(rng, (lo - margin) * denom, (hi + margin) * denom);
    let threshold = ratio(numer, denom);

    if pick < u64::from(config.weights.linear) {
        linear_through(rng, config, side, &threshold)
    } else if pick < u64::from(config.weights.linear) + u64::from(config.weights.piecewise_linear)
    {
        piecewise_through(rng, config, side, &threshold)
    } else {
        exponential_through(rng, config, side, &threshold)
    }
}

/// Seller `f(x) = a (x - t)`, buyer `g(y) = a (y + t)`: both strictly
/// increasing with acceptance threshold `t` in price terms.
fn linear_through(
    rng: &mut SplitMix64,
    config: &GeneratorConfig,
    side: Side,
    threshold: &BigRational,
) -> Valuation {
    let slope = draw_slope(rng, config);
    let intercept = match side {
        Side::Seller => -(&slope * threshold),
        Side::Buyer => &slope * threshold,
    };
    Valuation::linear(slope, intercept)
}

fn piecewise_through(
    rng: &mut SplitMix64,
    config: &GeneratorConfig,
    side: Side,
    threshold: &BigRational,
) -> Valuation {
    let (lo, hi) = config.price_range;
    let margin = config.threshold_margin.max(0);
    // Breakpoint x-span covers the evaluation domain of the chosen side.
    let (span_lo, span_hi) = match side {
        Side::Seller => (lo - margin, hi + margin),
        Side::Buyer => (-(hi + margin), -(lo - margin)),
    };
    let count = draw_i64(
        rng,
        i64::from(config.piecewise_points.0),
        i64::from(config.piecewise_points.1),
    ) as usize;

    let span = (span_hi - span_lo).max(1);
    let mut xs = Vec::with_capacity(count);
    let mut x = span_lo + draw_i64(rng, 0, span / 2);
    xs.push(x);
    for _ in 1..count {
        x += draw_i64(rng, 1, (span / count as i64).max(2));
        xs.push(x);
    }

    let mut points = Vec::with_capacity(count);
    let mut y = int_rational(0);
    for (idx, &bx) in xs.iter().enumerate() {
        if idx > 0 {
            let gap = int_rational(bx - xs[idx - 1]);
            let slope = draw_slope(rng, config);
            y = &y + &(slope * gap);
        }
        points.push((int_rational(bx), y.clone()));
    }

    // Shift vertically so the function crosses zero at the threshold
    // (negated for the buyer side, which is evaluated at -price).
    let zero_at = match side {
        Side::Seller => threshold.clone(),
        Side::Buyer => -threshold.clone(),
    };
    let probe = Valuation::piecewise(points.clone());
    let offset = probe.eval_exact(&zero_at).expect("piecewise is exact");
    let points = points
        .into_iter()
        .map(|(px, py)| (px, py - &offset))
        .collect();
    Valuation::piecewise(points)
}

/// Exponentials with `a*c > 0` and the zero crossing steered toward the
/// threshold by snapping `exp(threshold/d)` onto a rational grid.
fn exponential_through(
    rng: &mut SplitMix64,
    config: &GeneratorConfig,
    side: Side,
    threshold: &BigRational,
) -> Valuation {
    let d = draw_i64(
        rng,
        i64::from(config.exp_rate_denominators.0),
        i64::from(config.exp_rate_denominators.1),
    );
    let scale = int_rational(draw_i64(rng, 1, 3));
    let flipped = rng.next_u64() % 2 == 1;

    let zero_at = match side {
        Side::Seller => threshold.clone(),
        Side::Buyer => -threshold.clone(),
    };
    let t = zero_at.to_f64().unwrap_or(0.0);
    let rate_f = 1.0 / d as f64;

    if !flipped {
        // f(v) = s exp(v/d) - s G with G ~ exp(t/d): zero near t.
        let g = snap_positive((t * rate_f).exp());
        let offset = -(&scale * &g);
        Valuation::exponential(scale, offset, ratio(1, d))
    } else {
        // f(v) = -s exp(-v/d) + s G with G ~ exp(-t/d): also increasing.
        let g = snap_positive((-t * rate_f).exp());
        let offset = &scale * &g;
        Valuation::exponential(-scale, offset, ratio(-1, d))
    }
}

/// Snap a positive float onto the 1/64 grid, keeping it positive.
fn snap_positive(x: f64) -> BigRational {
    let snapped = (x * 64.0).round().max(1.0) as i64;
    ratio(snapped, 64)
}

fn draw_slope(rng: &mut SplitMix64, config: &GeneratorConfig) -> BigRational {
    let lo = config.slope_numerators.0.max(1);
    let hi = config.slope_numerators.1;
    let numer = draw_i64(rng, lo, hi);
    let denom = draw_i64(rng, 1, i64::from(config.max_denominator));
    ratio(numer, denom)
}

/// Uniform-ish draw in `lo..=hi` by modular reduction of the raw stream.
fn draw_i64(rng: &mut SplitMix64, lo: i64, hi: i64) -> i64 {
    debug_assert!(lo <= hi);
    let span = (hi - lo) as u64 + 1;
    lo + (rng.next_u64() % span) as i64
}
