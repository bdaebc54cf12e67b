//! Domain types: AP populations, TP segments, canonical markets and the
//! discrete distribution families used to populate the AP type plane.

use std::collections::HashMap;

use crate::error::{require, ModelError, Result};
use crate::quality::QualityModel;

/// Default per-level decay of the truncated geometric family.
pub const DEFAULT_GEOMETRIC_RATIO: f64 = 0.9;
/// Default number of support points per distribution axis.
pub const DEFAULT_LEVELS: usize = 50;

/// One application-provider segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApType {
    /// Traffic ceiling (throughput units).
    pub alpha: f64,
    /// Quality sensitivity.
    pub beta: f64,
    /// Revenue per unit of traffic.
    pub value: f64,
}

impl ApType {
    pub fn new(alpha: f64, beta: f64, value: f64) -> Result<Self> {
        require(
            alpha.is_finite() && alpha >= 0.0,
            "alpha",
            "finite and >= 0",
            alpha,
        )?;
        require(
            beta.is_finite() && beta >= 0.0,
            "beta",
            "finite and >= 0",
            beta,
        )?;
        require(
            value.is_finite() && value >= 0.0,
            "value",
            "finite and >= 0",
            value,
        )?;
        Ok(Self { alpha, beta, value })
    }
}

fn bits(x: f64) -> u64 {
    // fold -0.0 onto 0.0 so the merge key is value-based
    (x + 0.0).to_bits()
}

/// A set of AP types with equal `(beta, value)` pairs merged.
#[derive(Debug, Clone, PartialEq)]
pub struct ApPopulation {
    types: Vec<ApType>,
    total_alpha: f64,
}

impl ApPopulation {
    /// Merges duplicate `(beta, value)` pairs by summing alpha. The first
    /// occurrence fixes the position of a merged type.
    pub fn new(types: impl IntoIterator<Item = ApType>) -> Self {
        let mut merged: Vec<ApType> = Vec::new();
        let mut index: HashMap<(u64, u64), usize> = HashMap::new();
        for t in types {
            match index.get(&(bits(t.beta), bits(t.value))) {
                Some(&i) => merged[i].alpha += t.alpha,
                None => {
                    index.insert((bits(t.beta), bits(t.value)), merged.len());
                    merged.push(t);
                }
            }
        }
        let total_alpha = merged.iter().map(|t| t.alpha).sum();
        Self {
            types: merged,
            total_alpha,
        }
    }

    pub fn types(&self) -> &[ApType] {
        &self.types
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn total_alpha(&self) -> f64 {
        self.total_alpha
    }

    pub fn max_value(&self) -> f64 {
        self.types.iter().map(|t| t.value).fold(0.0, f64::max)
    }

    pub fn max_beta(&self) -> f64 {
        self.types.iter().map(|t| t.beta).fold(0.0, f64::max)
    }
}

/// How a segment's capacity is specified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Capacity {
    /// Raw capacity `nu`, converted through a quality model.
    Raw { nu: f64, model: QualityModel },
    /// Effective capacity `mu` given directly.
    Effective(f64),
}

/// One transport-provider market segment.
#[derive(Debug, Clone, PartialEq)]
pub struct TpSegment {
    pub label: String,
    /// Cost floor for the segment's price.
    pub price_floor: f64,
    /// Advertised quality, smaller is better. `+inf` only for the dummy.
    pub quality: f64,
    pub capacity: Capacity,
    mu: f64,
    dummy: bool,
}

impl TpSegment {
    pub fn new(
        label: impl Into<String>,
        price_floor: f64,
        quality: f64,
        capacity: Capacity,
    ) -> Result<Self> {
        require(
            price_floor.is_finite() && price_floor >= 0.0,
            "price_floor",
            "finite and >= 0",
            price_floor,
        )?;
        require(
            quality.is_finite() && quality >= 0.0,
            "quality",
            "finite and >= 0",
            quality,
        )?;
        let mu = match capacity {
            Capacity::Raw { nu, model } => {
                require(nu.is_finite() && nu >= 0.0, "nu", "finite and >= 0", nu)?;
                model.max_throughput(quality, nu)?
            }
            Capacity::Effective(mu) => {
                require(mu.is_finite() && mu >= 0.0, "mu", "finite and >= 0", mu)?;
                mu
            }
        };
        Ok(Self {
            label: label.into(),
            price_floor,
            quality,
            capacity,
            mu,
            dummy: false,
        })
    }

    /// Shorthand for a segment with effective capacity.
    pub fn effective(
        label: impl Into<String>,
        price_floor: f64,
        quality: f64,
        mu: f64,
    ) -> Result<Self> {
        Self::new(label, price_floor, quality, Capacity::Effective(mu))
    }

    /// The "no provider" option: zero price, infinite quality, unbounded capacity.
    pub fn dummy() -> Self {
        Self {
            label: "dummy".to_string(),
            price_floor: 0.0,
            quality: f64::INFINITY,
            capacity: Capacity::Effective(f64::INFINITY),
            mu: f64::INFINITY,
            dummy: true,
        }
    }

    pub fn is_dummy(&self) -> bool {
        self.dummy
    }

    /// Largest throughput the segment carries while meeting its quality.
    pub fn effective_capacity(&self) -> f64 {
        self.mu
    }
}

/// Quality-sorted segments with one trailing dummy.
#[derive(Debug, Clone, PartialEq)]
pub struct Market {
    segments: Vec<TpSegment>,
}

impl Market {
    /// Sorts by quality, merges equal qualities and appends the dummy.
    ///
    /// Merged segments sum their capacity (raw when both share a quality
    /// model, effective otherwise), keep the lower floor and join labels
    /// with `+`. Any dummy in the input is discarded and re-added last.
    pub fn canonicalize(segments: impl IntoIterator<Item = TpSegment>) -> Self {
        let mut real: Vec<TpSegment> = segments.into_iter().filter(|s| !s.dummy).collect();
        real.sort_by(|a, b| a.quality.total_cmp(&b.quality));
        let mut out: Vec<TpSegment> = Vec::with_capacity(real.len() + 1);
        for seg in real {
            match out.last_mut() {
                Some(prev) if prev.quality == seg.quality => {
                    prev.capacity = match (prev.capacity, seg.capacity) {
                        (
                            Capacity::Raw { nu: a, model: ma },
                            Capacity::Raw { nu: b, model: mb },
                        ) if ma == mb => Capacity::Raw {
                            nu: a + b,
                            model: ma,
                        },
                        _ => Capacity::Effective(prev.mu + seg.mu),
                    };
                    prev.mu += seg.mu;
                    prev.price_floor = prev.price_floor.min(seg.price_floor);
                    prev.label = format!("{}+{}", prev.label, seg.label);
                }
                _ => out.push(seg),
            }
        }
        out.push(TpSegment::dummy());
        Self { segments: out }
    }

    /// All segments, dummy last.
    pub fn segments(&self) -> &[TpSegment] {
        &self.segments
    }

    /// Segments without the dummy.
    pub fn real_segments(&self) -> &[TpSegment] {
        &self.segments[..self.segments.len() - 1]
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dummy_index(&self) -> usize {
        self.segments.len() - 1
    }

    pub fn total_mu(&self) -> f64 {
        self.real_segments().iter().map(|s| s.mu).sum()
    }

    pub fn rho(&self, population: &ApPopulation) -> f64 {
        self.total_mu() / population.total_alpha()
    }

    /// `mu_I / mu` for a non-dummy segment.
    pub fn capacity_share(&self, i: usize) -> f64 {
        self.real_segments()[i].mu / self.total_mu()
    }

    pub fn qualities(&self) -> Vec<f64> {
        self.segments.iter().map(|s| s.quality).collect()
    }

    pub fn floors(&self) -> Vec<f64> {
        self.segments.iter().map(|s| s.price_floor).collect()
    }

    pub fn labels(&self) -> Vec<String> {
        self.segments.iter().map(|s| s.label.clone()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistributionKind {
    /// Truncated geometric, mass at level k proportional to `ratio^(k-1)`.
    Geometric {
        ratio: f64,
    },
    Uniform,
    /// The geometric family mirrored so mass grows with the level.
    ReversedGeometric {
        ratio: f64,
    },
    /// `Binomial(levels - 1, p)` shifted onto `1..=levels`.
    Binomial {
        p: f64,
    },
}

impl DistributionKind {
    pub fn geometric() -> Self {
        Self::Geometric {
            ratio: DEFAULT_GEOMETRIC_RATIO,
        }
    }

    pub fn reversed_geometric() -> Self {
        Self::ReversedGeometric {
            ratio: DEFAULT_GEOMETRIC_RATIO,
        }
    }

    /// Parses the short names used in configs and tables:
    /// `geo`, `uni`, `regeo`, `bn(p)`.
    pub fn parse(name: &str, ratio: f64) -> Option<Self> {
        let s = name.trim().to_ascii_lowercase();
        match s.as_str() {
            "geo" | "geometric" => Some(Self::Geometric { ratio }),
            "uni" | "uniform" => Some(Self::Uniform),
            "regeo" | "reversed_geometric" | "reversed-geometric" => {
                Some(Self::ReversedGeometric { ratio })
            }
            _ => {
                let inner = s
                    .strip_prefix("bn(")
                    .or_else(|| s.strip_prefix("binomial("))?;
                let p = inner.strip_suffix(')')?.trim().parse().ok()?;
                Some(Self::Binomial { p })
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            Self::Geometric { .. } => "Geo".into(),
            Self::Uniform => "Uni".into(),
            Self::ReversedGeometric { .. } => "ReGeo".into(),
            Self::Binomial { p } => format!("BN({p})"),
        }
    }
}

/// A probability mass function on levels `1..=levels`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    kind: DistributionKind,
    masses: Vec<f64>,
}

fn normalize_log_weights(logs: Vec<f64>) -> Result<Vec<f64>> {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(ModelError::NotNormalizable("no finite mass".into()));
    }
    let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(ModelError::NotNormalizable(format!("total weight {total}")));
    }
    Ok(w.into_iter().map(|x| x / total).collect())
}

fn geometric_masses(ratio: f64, levels: usize) -> Result<Vec<f64>> {
    if !(ratio.is_finite() && ratio > 0.0) {
        return Err(ModelError::NotNormalizable(format!(
            "geometric ratio must be finite and > 0, got {ratio}"
        )));
    }
    let lr = ratio.ln();
    normalize_log_weights((0..levels).map(|k| k as f64 * lr).collect())
}

fn binomial_masses(p: f64, levels: usize) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(ModelError::NotNormalizable(format!(
            "binomial p must lie in [0, 1], got {p}"
        )));
    }
    let n = levels - 1;
    if p == 0.0 || p == 1.0 {
        let mut m = vec![0.0; levels];
        m[if p == 0.0 { 0 } else { n }] = 1.0;
        return Ok(m);
    }
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    let mut log_choose = 0.0;
    let mut logs = Vec::with_capacity(levels);
    for k in 0..=n {
        if k > 0 {
            log_choose += ((n - k + 1) as f64).ln() - (k as f64).ln();
        }
        logs.push(log_choose + k as f64 * lp + (n - k) as f64 * lq);
    }
    normalize_log_weights(logs)
}

impl DiscreteDistribution {
    pub fn new(kind: DistributionKind, levels: usize) -> Result<Self> {
        if levels == 0 {
            return Err(ModelError::NoLevels);
        }
        let masses = match kind {
            DistributionKind::Uniform => vec![1.0 / levels as f64; levels],
            DistributionKind::Geometric { ratio } => geometric_masses(ratio, levels)?,
            DistributionKind::ReversedGeometric { ratio } => {
                let mut m = geometric_masses(ratio, levels)?;
                m.reverse();
                m
            }
            DistributionKind::Binomial { p } => binomial_masses(p, levels)?,
        };
        Ok(Self { kind, masses })
    }

    pub fn kind(&self) -> DistributionKind {
        self.kind
    }

    pub fn levels(&self) -> usize {
        self.masses.len()
    }

    /// Mass at a 1-based level.
    pub fn pmf(&self, level: usize) -> Result<f64> {
        if level == 0 || level > self.masses.len() {
            return Err(ModelError::LevelOutOfRange {
                level,
                levels: self.masses.len(),
            });
        }
        Ok(self.masses[level - 1])
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// Mean of the level-midpoint coordinate `(k - 0.5) / levels`.
    pub fn mean_coordinate(&self) -> f64 {
        let l = self.levels() as f64;
        self.masses
            .iter()
            .enumerate()
            .map(|(i, m)| m * (i as f64 + 0.5) / l)
            .sum()
    }
}

/// Product population on the unit `(beta, v)` grid of cell midpoints.
pub fn build_population(
    f_beta: DistributionKind,
    f_v: DistributionKind,
    levels: usize,
    total_alpha: f64,
) -> Result<ApPopulation> {
    build_population_scaled(f_beta, f_v, levels, total_alpha, 1.0, 1.0)
}

/// As [`build_population`] with the beta axis stretched to `(0, beta_max)`
/// and the value axis to `(0, v_max)`.
pub fn build_population_scaled(
    f_beta: DistributionKind,
    f_v: DistributionKind,
    levels: usize,
    total_alpha: f64,
    beta_max: f64,
    v_max: f64,
) -> Result<ApPopulation> {
    if levels == 0 {
        return Err(ModelError::NoLevels);
    }
    require(
        total_alpha.is_finite() && total_alpha > 0.0,
        "total_alpha",
        "finite and > 0",
        total_alpha,
    )?;
    require(
        beta_max.is_finite() && beta_max > 0.0,
        "beta_max",
        "finite and > 0",
        beta_max,
    )?;
    require(
        v_max.is_finite() && v_max > 0.0,
        "v_max",
        "finite and > 0",
        v_max,
    )?;
    let fb = DiscreteDistribution::new(f_beta, levels)?;
    let fv = DiscreteDistribution::new(f_v, levels)?;
    let l = levels as f64;
    let mut types = Vec::with_capacity(levels * levels);
    for (k, mb) in fb.masses().iter().enumerate() {
        let beta = (k as f64 + 0.5) / l * beta_max;
        for (m, mv) in fv.masses().iter().enumerate() {
            let value = (m as f64 + 0.5) / l * v_max;
            types.push(ApType {
                alpha: total_alpha * mb * mv,
                beta,
                value,
            });
        }
    }
    Ok(ApPopulation::new(types))
}
