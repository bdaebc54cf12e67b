//! AP utility, best-TP selection and market-share partitions.

use crate::error::{require, ModelError, Result};
use crate::model::{ApPopulation, ApType, Market};

/// Relative gap under which two utilities count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Carried throughput `alpha * exp(-beta * q)`; exactly 0 at `q = inf`.
pub fn throughput(ap: &ApType, q: f64) -> Result<f64> {
    if q == f64::INFINITY {
        return Ok(0.0);
    }
    require(q >= 0.0, "quality", ">= 0 or +inf", q)?;
    Ok(ap.alpha * (-ap.beta * q).exp())
}

/// Profit `alpha * (v - p) * exp(-beta * q)`; exactly 0 at `q = inf`.
pub fn utility(ap: &ApType, price: f64, q: f64) -> Result<f64> {
    if q == f64::INFINITY {
        return Ok(0.0);
    }
    require(price.is_finite(), "price", "finite", price)?;
    Ok((ap.value - price) * throughput(ap, q)?)
}

/// Price at which `ap` earns normalized utility `u / alpha = target` from quality `q`.
pub fn indifference_price(ap: &ApType, target: f64, q: f64) -> f64 {
    ap.value - target * (ap.beta * q).exp()
}

/// Core selection rule shared by the public API and the solver.
///
/// `decay[i]` is `exp(-beta * q_i)` for each non-dummy segment in quality
/// order. Returns `decay.len()` for the dummy. The winner is the smallest-q
/// segment whose per-unit utility is within [`TIE_TOLERANCE`] of the best;
/// a best utility of zero or less sends the AP to the dummy.
#[inline]
pub(crate) fn select(value: f64, decay: &[f64], prices: &[f64]) -> usize {
    let mut best = 0.0f64;
    for (d, p) in decay.iter().zip(prices) {
        let u = (value - p) * d;
        if u > best {
            best = u;
        }
    }
    if best <= 0.0 {
        return decay.len();
    }
    let floor = best - TIE_TOLERANCE * best;
    decay
        .iter()
        .zip(prices)
        .position(|(d, p)| (value - p) * d >= floor)
        .unwrap_or(decay.len())
}

pub(crate) fn check_prices(prices: &[f64], market: &Market) -> Result<()> {
    if prices.len() != market.len() {
        return Err(ModelError::PriceLength {
            expected: market.len(),
            got: prices.len(),
        });
    }
    Ok(())
}

/// Index of the segment `ap` picks under `prices` (dummy included, last).
pub fn best_tp(ap: &ApType, prices: &[f64], market: &Market) -> Result<usize> {
    check_prices(prices, market)?;
    let real = market.real_segments();
    let decay: Vec<f64> = real.iter().map(|s| (-ap.beta * s.quality).exp()).collect();
    Ok(select(ap.value, &decay, &prices[..real.len()]))
}

/// Which segment every AP type uses, and the inverse map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    /// Segment index per AP type, in population order.
    pub choice: Vec<usize>,
    /// AP type indices per segment, ascending.
    pub shares: Vec<Vec<usize>>,
}

impl Assignment {
    pub(crate) fn from_choice(choice: Vec<usize>, segments: usize) -> Self {
        let mut shares = vec![Vec::new(); segments];
        for (i, &c) in choice.iter().enumerate() {
            shares[c].push(i);
        }
        Self { choice, shares }
    }
}

pub fn partition(population: &ApPopulation, prices: &[f64], market: &Market) -> Result<Assignment> {
    check_prices(prices, market)?;
    let choice = population
        .types()
        .iter()
        .map(|ap| best_tp(ap, prices, market))
        .collect::<Result<Vec<_>>>()?;
    Ok(Assignment::from_choice(choice, market.len()))
}
