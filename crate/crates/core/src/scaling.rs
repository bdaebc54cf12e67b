//! Affine rescaling of a whole system and the unit normalization built on it.
//!
//! Prices and values map through `x -> k1 * x + k2`, qualities through
//! `q -> q / k3` and sensitivities through `beta -> k3 * beta`, which leaves
//! every AP's ranking of segments unchanged. Traffic ceilings and effective
//! capacities both scale by `kappa`, which leaves equilibrium prices
//! unchanged up to the same affine map.

use crate::error::{require, ModelError, Result};
use crate::model::{ApPopulation, ApType, Capacity, Market, TpSegment};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingFactors {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub kappa: f64,
}

impl ScalingFactors {
    pub fn new(k1: f64, k2: f64, k3: f64, kappa: f64) -> Result<Self> {
        require(k1.is_finite() && k1 > 0.0, "k1", "finite and > 0", k1)?;
        require(k2.is_finite(), "k2", "finite", k2)?;
        require(k3.is_finite() && k3 > 0.0, "k3", "finite and > 0", k3)?;
        require(
            kappa.is_finite() && kappa > 0.0,
            "kappa",
            "finite and > 0",
            kappa,
        )?;
        Ok(Self { k1, k2, k3, kappa })
    }

    pub fn identity() -> Self {
        Self {
            k1: 1.0,
            k2: 0.0,
            k3: 1.0,
            kappa: 1.0,
        }
    }

    pub fn price(&self, p: f64) -> f64 {
        self.k1 * p + self.k2
    }

    pub fn inverse_price(&self, p: f64) -> f64 {
        (p - self.k2) / self.k1
    }
}

/// Applies `f` to every AP type and segment.
///
/// Transformed segments carry their capacity as effective capacity `kappa * mu`,
/// since a raw capacity would be re-derated at the rescaled quality. A value
/// pushed below zero is clamped to zero; such an AP cannot profit at any price
/// at or above the transformed floors either way.
pub fn transform_system(
    market: &Market,
    population: &ApPopulation,
    f: &ScalingFactors,
) -> Result<(Market, ApPopulation)> {
    let types = population.types().iter().map(|t| ApType {
        alpha: f.kappa * t.alpha,
        beta: f.k3 * t.beta,
        value: f.price(t.value).max(0.0),
    });
    let pop = ApPopulation::new(types.collect::<Vec<_>>());
    let segs = market
        .real_segments()
        .iter()
        .map(|s| {
            TpSegment::new(
                s.label.clone(),
                f.price(s.price_floor),
                s.quality / f.k3,
                Capacity::Effective(f.kappa * s.effective_capacity()),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((Market::canonicalize(segs), pop))
}

/// Factors used to normalize a system, kept so prices can be mapped back.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub factors: ScalingFactors,
    pub v_max: f64,
    pub beta_max: f64,
    pub p_min: f64,
}

impl Normalization {
    pub fn denormalize(&self, p_scaled: f64) -> f64 {
        denormalize_price(p_scaled, self)
    }
}

/// Factors that send the cheapest floor to 0, the top value to 1, the
/// largest sensitivity to 1 and total traffic to 1.
pub fn normalization_factors(
    v_max: f64,
    p_min: f64,
    beta_max: f64,
    total_alpha: f64,
) -> Result<ScalingFactors> {
    if !(v_max > p_min) {
        return Err(ModelError::Degenerate(format!(
            "v_max {v_max} must exceed the lowest floor {p_min}"
        )));
    }
    if !(beta_max > 0.0) {
        return Err(ModelError::Degenerate(
            "all quality sensitivities are zero".into(),
        ));
    }
    let span = v_max - p_min;
    ScalingFactors::new(1.0 / span, -p_min / span, 1.0 / beta_max, 1.0 / total_alpha)
}

pub fn normalize(
    market: &Market,
    population: &ApPopulation,
) -> Result<(Market, ApPopulation, Normalization)> {
    let v_max = population.max_value();
    let beta_max = population.max_beta();
    let p_min = market
        .real_segments()
        .iter()
        .map(|s| s.price_floor)
        .fold(f64::INFINITY, f64::min);
    let p_min = if p_min.is_finite() { p_min } else { 0.0 };
    let factors = normalization_factors(v_max, p_min, beta_max, population.total_alpha())?;
    let (m, pop) = transform_system(market, population, &factors)?;
    Ok((
        m,
        pop,
        Normalization {
            factors,
            v_max,
            beta_max,
            p_min,
        },
    ))
}

pub fn denormalize_price(p_scaled: f64, n: &Normalization) -> f64 {
    (n.v_max - n.p_min) * p_scaled + n.p_min
}
