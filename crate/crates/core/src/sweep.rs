//! Parameter sweeps over normalized systems and fixed-menu partition rasters.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;

use crate::choice::partition;
use crate::equilibrium::{solve, PriceGrid};
use crate::error::{require, ModelError, Result};
use crate::model::{build_population_scaled, ApPopulation, DistributionKind, Market, TpSegment};

/// Default number of points along a sweep axis.
pub const DEFAULT_POINTS: usize = 50;

/// Capacity of the non-dummy segments.
#[derive(Debug, Clone, PartialEq)]
pub enum CapacitySpec {
    /// Relative shares `sigma_I` (normalized internally) and `rho = mu / alpha`.
    Shares { shares: Vec<f64>, rho: f64 },
    /// Effective capacities given directly.
    Effective(Vec<f64>),
}

/// Full description of one system: menu, capacities and AP population.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub labels: Vec<String>,
    /// Strictly increasing qualities, one per segment.
    pub qualities: Vec<f64>,
    pub capacity: CapacitySpec,
    pub beta_dist: DistributionKind,
    pub value_dist: DistributionKind,
    pub levels: usize,
    pub beta_max: f64,
    pub v_max: f64,
    pub total_alpha: f64,
    pub floors: Vec<f64>,
    pub grid_step: f64,
    pub ceiling: f64,
    /// Fixed menu prices for partition rasters (dummy excluded).
    pub prices: Option<Vec<f64>>,
}

impl SystemSpec {
    /// A normalized system with zero floors on a 0.001 grid up to 1.
    pub fn normalized(qualities: Vec<f64>, capacity: CapacitySpec) -> Self {
        let n = qualities.len();
        Self {
            labels: default_labels(n),
            qualities,
            capacity,
            beta_dist: DistributionKind::geometric(),
            value_dist: DistributionKind::Binomial { p: 0.5 },
            levels: crate::model::DEFAULT_LEVELS,
            beta_max: 1.0,
            v_max: 1.0,
            total_alpha: 1.0,
            floors: vec![0.0; n],
            grid_step: 1e-3,
            ceiling: 1.0,
            prices: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.qualities.len();
        let bad_len = |what: &str, got: usize| {
            ModelError::Degenerate(format!("{what} has {got} entries for {n} segments"))
        };
        if self.labels.len() != n {
            return Err(bad_len("labels", self.labels.len()));
        }
        if self.floors.len() != n {
            return Err(bad_len("floors", self.floors.len()));
        }
        if let Some(p) = &self.prices {
            if p.len() != n {
                return Err(bad_len("prices", p.len()));
            }
        }
        match &self.capacity {
            CapacitySpec::Shares { shares, rho } => {
                if shares.len() != n {
                    return Err(bad_len("capacity shares", shares.len()));
                }
                require(
                    *rho >= 0.0 && rho.is_finite(),
                    "rho",
                    "finite and >= 0",
                    *rho,
                )?;
                for &s in shares {
                    require(
                        s >= 0.0 && s.is_finite(),
                        "capacity share",
                        "finite and >= 0",
                        s,
                    )?;
                }
                if n > 0 && shares.iter().sum::<f64>() <= 0.0 {
                    return Err(ModelError::Degenerate("capacity shares sum to zero".into()));
                }
            }
            CapacitySpec::Effective(mu) => {
                if mu.len() != n {
                    return Err(bad_len("capacities", mu.len()));
                }
            }
        }
        for w in self.qualities.windows(2) {
            if !(w[0] < w[1]) {
                return Err(ModelError::Degenerate(format!(
                    "qualities must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(())
    }

    /// Effective capacity of each segment.
    pub fn capacities(&self) -> Vec<f64> {
        match &self.capacity {
            CapacitySpec::Shares { shares, rho } => {
                let total: f64 = shares.iter().sum();
                shares
                    .iter()
                    .map(|s| s / total * rho * self.total_alpha)
                    .collect()
            }
            CapacitySpec::Effective(mu) => mu.clone(),
        }
    }

    pub fn market(&self) -> Result<Market> {
        self.validate()?;
        let segs = self
            .labels
            .iter()
            .zip(&self.qualities)
            .zip(&self.floors)
            .zip(self.capacities())
            .map(|(((l, &q), &f), mu)| TpSegment::effective(l.clone(), f, q, mu))
            .collect::<Result<Vec<_>>>()?;
        Ok(Market::canonicalize(segs))
    }

    pub fn population(&self) -> Result<ApPopulation> {
        build_population_scaled(
            self.beta_dist,
            self.value_dist,
            self.levels,
            self.total_alpha,
            self.beta_max,
            self.v_max,
        )
    }

    pub fn grid(&self, market: &Market) -> Result<PriceGrid> {
        PriceGrid::new(self.grid_step, market.floors(), self.ceiling)
    }

    pub fn build(&self) -> Result<(Market, ApPopulation, PriceGrid)> {
        let market = self.market()?;
        let population = self.population()?;
        let grid = self.grid(&market)?;
        Ok((market, population, grid))
    }
}

pub fn default_labels(n: usize) -> Vec<String> {
    (0..n)
        .map(|i| match i {
            0..=25 => ((b'A' + i as u8) as char).to_string(),
            _ => format!("TP{}", i + 1),
        })
        .collect()
}

/// A parameter varied along a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepAxis {
    /// Effective capacity of one segment.
    Capacity { segment: usize },
    /// Total capacity ratio at fixed shares.
    Rho,
    /// All qualities multiplied by the point value.
    QualityScale,
    /// Adjacent quality ratio `1:k` around the middle segment, which keeps its quality.
    QualityRatio,
    /// Revenue distribution selector.
    ValueDistribution,
    /// Sensitivity distribution selector.
    BetaDistribution,
    /// Parameter `p` of a binomial sensitivity distribution.
    BetaBinomial,
    /// Parameter `p` of a binomial revenue distribution.
    ValueBinomial,
    /// Menu price of one segment (partition rasters).
    Price { segment: usize },
    /// Qualities and capacities multiplied together.
    CapacityQualityScale,
}

impl SweepAxis {
    /// Parses names such as `rho`, `mu_B`, `price_2`, `kappa_quality`.
    pub fn parse(name: &str, labels: &[String]) -> Option<Self> {
        let segment = |s: &str| -> Option<usize> {
            labels.iter().position(|l| l == s).or_else(|| {
                s.parse::<usize>()
                    .ok()
                    .filter(|&i| i >= 1 && i <= labels.len())
                    .map(|i| i - 1)
            })
        };
        match name {
            "rho" => Some(Self::Rho),
            "kappa_quality" | "quality_scale" => Some(Self::QualityScale),
            "quality_ratio" => Some(Self::QualityRatio),
            "f_v" | "value_distribution" => Some(Self::ValueDistribution),
            "f_beta" | "beta_distribution" => Some(Self::BetaDistribution),
            "beta_binomial_p" => Some(Self::BetaBinomial),
            "value_binomial_p" => Some(Self::ValueBinomial),
            "kappa_capacity" | "capacity_quality_scale" => Some(Self::CapacityQualityScale),
            _ => {
                if let Some(s) = name.strip_prefix("mu_") {
                    segment(s).map(|segment| Self::Capacity { segment })
                } else if let Some(s) = name.strip_prefix("price_") {
                    segment(s).map(|segment| Self::Price { segment })
                } else {
                    None
                }
            }
        }
    }

    pub fn name(&self, labels: &[String]) -> String {
        let lab = |i: usize| {
            labels
                .get(i)
                .cloned()
                .unwrap_or_else(|| (i + 1).to_string())
        };
        match *self {
            Self::Capacity { segment } => format!("mu_{}", lab(segment)),
            Self::Rho => "rho".into(),
            Self::QualityScale => "kappa_quality".into(),
            Self::QualityRatio => "quality_ratio".into(),
            Self::ValueDistribution => "f_v".into(),
            Self::BetaDistribution => "f_beta".into(),
            Self::BetaBinomial => "beta_binomial_p".into(),
            Self::ValueBinomial => "value_binomial_p".into(),
            Self::Price { segment } => format!("price_{}", lab(segment)),
            Self::CapacityQualityScale => "kappa_capacity".into(),
        }
    }

    fn wants_distribution(&self) -> bool {
        matches!(self, Self::ValueDistribution | Self::BetaDistribution)
    }

    /// The system at one point of this axis.
    pub fn apply(&self, base: &SystemSpec, value: &AxisValue) -> Result<SystemSpec> {
        let mut s = base.clone();
        let n = s.qualities.len();
        let num = || match value {
            AxisValue::Number(x) => Ok(*x),
            AxisValue::Distribution(d) => Err(ModelError::Degenerate(format!(
                "axis expects a number, got distribution {}",
                d.name()
            ))),
        };
        let check_segment = |segment: usize| {
            if segment < n {
                Ok(())
            } else {
                Err(ModelError::LevelOutOfRange {
                    level: segment + 1,
                    levels: n,
                })
            }
        };
        match *self {
            Self::Capacity { segment } => {
                check_segment(segment)?;
                let mut mu = s.capacities();
                mu[segment] = num()?;
                s.capacity = CapacitySpec::Effective(mu);
            }
            Self::Rho => match &mut s.capacity {
                CapacitySpec::Shares { rho, .. } => *rho = num()?,
                CapacitySpec::Effective(_) => {
                    return Err(ModelError::Degenerate(
                        "a rho sweep needs capacity shares".into(),
                    ))
                }
            },
            Self::QualityScale => {
                let k = num()?;
                require(k > 0.0, "quality scale", "> 0", k)?;
                s.qualities.iter_mut().for_each(|q| *q *= k);
            }
            Self::QualityRatio => {
                let k = num()?;
                require(k > 1.0, "quality ratio", "> 1", k)?;
                let mid = n / 2;
                let reference = s.qualities[mid];
                for (i, q) in s.qualities.iter_mut().enumerate() {
                    *q = reference * k.powi(i as i32 - mid as i32);
                }
            }
            Self::ValueDistribution | Self::BetaDistribution => {
                let d = match value {
                    AxisValue::Distribution(d) => *d,
                    AxisValue::Number(x) => {
                        return Err(ModelError::Degenerate(format!(
                            "axis expects a distribution, got {x}"
                        )))
                    }
                };
                if *self == Self::ValueDistribution {
                    s.value_dist = d;
                } else {
                    s.beta_dist = d;
                }
            }
            Self::BetaBinomial => s.beta_dist = DistributionKind::Binomial { p: num()? },
            Self::ValueBinomial => s.value_dist = DistributionKind::Binomial { p: num()? },
            Self::Price { segment } => {
                check_segment(segment)?;
                let prices = s.prices.get_or_insert_with(|| vec![0.0; n]);
                prices[segment] = num()?;
            }
            Self::CapacityQualityScale => {
                let k = num()?;
                require(k > 0.0, "capacity/quality scale", "> 0", k)?;
                s.qualities.iter_mut().for_each(|q| *q *= k);
                s.capacity = match &s.capacity {
                    CapacitySpec::Shares { shares, rho } => CapacitySpec::Shares {
                        shares: shares.clone(),
                        rho: rho * k,
                    },
                    CapacitySpec::Effective(mu) => {
                        CapacitySpec::Effective(mu.iter().map(|m| m * k).collect())
                    }
                };
            }
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AxisValue {
    Number(f64),
    Distribution(DistributionKind),
}

impl fmt::Display for AxisValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Number(x) => write!(f, "{x}"),
            Self::Distribution(d) => write!(f, "{}", d.name()),
        }
    }
}

/// `n` evenly spaced numbers from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<AxisValue> {
    match n {
        0 => Vec::new(),
        1 => vec![AxisValue::Number(lo)],
        _ => (0..n)
            .map(|i| AxisValue::Number(lo + (hi - lo) * i as f64 / (n - 1) as f64))
            .collect(),
    }
}

/// A sweep along one axis, optionally repeated for each value of a second
/// (series) axis, as in a multi-panel figure.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: SystemSpec,
    pub axis: SweepAxis,
    pub points: Vec<AxisValue>,
    pub series: Option<(SweepAxis, Vec<AxisValue>)>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        check_points(&self.axis, &self.points)?;
        // catches axes that do not fit the base system, e.g. rho without shares
        self.axis.apply(&self.base, &self.points[0])?;
        if let Some((axis, values)) = &self.series {
            if values.is_empty() {
                return Err(ModelError::Degenerate("series has no values".into()));
            }
            axis.apply(&self.base, &values[0])
                .map_err(|e| ModelError::Degenerate(format!("series: {e}")))?;
            if axis.wants_distribution()
                != values
                    .iter()
                    .all(|v| matches!(v, AxisValue::Distribution(_)))
            {
                return Err(ModelError::Degenerate(
                    "series values do not match the series axis".into(),
                ));
            }
        }
        Ok(())
    }

    fn systems(&self) -> Vec<(Option<AxisValue>, AxisValue, Result<SystemSpec>)> {
        let series: Vec<Option<AxisValue>> = match &self.series {
            Some((_, values)) => values.iter().copied().map(Some).collect(),
            None => vec![None],
        };
        let mut out = Vec::new();
        for s in series {
            let base = match (s, &self.series) {
                (Some(v), Some((axis, _))) => axis.apply(&self.base, &v),
                _ => Ok(self.base.clone()),
            };
            for &p in &self.points {
                let sys = base.clone().and_then(|b| self.axis.apply(&b, &p));
                out.push((s, p, sys));
            }
        }
        out
    }
}

fn check_points(axis: &SweepAxis, points: &[AxisValue]) -> Result<()> {
    if points.is_empty() {
        return Err(ModelError::Degenerate("sweep has no points".into()));
    }
    if axis.wants_distribution() {
        if !points
            .iter()
            .all(|p| matches!(p, AxisValue::Distribution(_)))
        {
            return Err(ModelError::Degenerate(
                "distribution axis needs distribution names".into(),
            ));
        }
        return Ok(());
    }
    let nums = points
        .iter()
        .map(|p| match p {
            AxisValue::Number(x) => Ok(*x),
            AxisValue::Distribution(_) => Err(ModelError::Degenerate(
                "numeric axis got a distribution name".into(),
            )),
        })
        .collect::<Result<Vec<_>>>()?;
    let up = nums.windows(2).all(|w| w[0] < w[1]);
    let down = nums.windows(2).all(|w| w[0] > w[1]);
    if !(up || down) {
        return Err(ModelError::Degenerate(
            "sweep points must be strictly monotone".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub series: Option<AxisValue>,
    pub value: AxisValue,
    /// Non-dummy equilibrium prices, or the reason the point failed.
    pub prices: std::result::Result<Vec<f64>, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub axis: String,
    pub series: Option<String>,
    pub labels: Vec<String>,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// Rows of one series (all rows when the sweep has none).
    pub fn series_rows(&self, series: Option<&AxisValue>) -> Vec<&SweepRow> {
        self.rows
            .iter()
            .filter(|r| series.is_none() || r.series.as_ref() == series)
            .collect()
    }

    /// CSV with header `[<series axis>,]<axis>,<labels>`; failed points print `NA`.
    pub fn write_csv<W: Write>(&self, out: W) -> std::result::Result<(), csv::Error> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let mut header = Vec::new();
        if let Some(name) = &self.series {
            header.push(name.clone());
        }
        header.push(self.axis.clone());
        header.extend(self.labels.iter().cloned());
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = Vec::new();
            if let Some(s) = &r.series {
                rec.push(s.to_string());
            }
            rec.push(r.value.to_string());
            match &r.prices {
                Ok(p) => rec.extend(p.iter().map(|x| format!("{x:.6}"))),
                Err(_) => rec.extend(self.labels.iter().map(|_| "NA".to_string())),
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn solve_point(sys: &SystemSpec) -> Result<Vec<f64>> {
    let (market, population, grid) = sys.build()?;
    let r = solve(&market, &population, &grid)?;
    if !r.feasible {
        return Err(ModelError::Degenerate(
            "no feasible price on the grid".into(),
        ));
    }
    Ok(r.prices[..r.prices.len() - 1].to_vec())
}

/// One competitive solve per point, rows in series-then-axis order.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepTable> {
    spec.validate()?;
    let rows = spec
        .systems()
        .into_par_iter()
        .map(|(series, value, sys)| SweepRow {
            series,
            value,
            prices: sys.and_then(|s| solve_point(&s)).map_err(|e| e.to_string()),
        })
        .collect();
    Ok(SweepTable {
        axis: spec.axis.name(&spec.base.labels),
        series: spec.series.as_ref().map(|(a, _)| a.name(&spec.base.labels)),
        labels: spec.base.labels.clone(),
        rows,
    })
}

/// Choice map of the `(beta, v)` grid at one menu.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub value: AxisValue,
    pub levels: usize,
    /// `(beta, v, segment)` per grid cell, beta-major. The dummy's index is
    /// the number of non-dummy segments.
    pub cells: Vec<(f64, f64, usize)>,
}

impl Raster {
    /// Segment chosen at beta level `k` and value level `m` (0-based).
    pub fn at(&self, k: usize, m: usize) -> usize {
        self.cells[k * self.levels + m].2
    }

    pub fn count(&self, segment: usize) -> usize {
        self.cells.iter().filter(|c| c.2 == segment).count()
    }
}

/// Partition rasters of a fixed menu at each point; no equilibrium solve.
/// The population is a uniform grid whatever distributions the system names.
pub fn run_partition_sweep(spec: &SweepSpec) -> Result<Vec<Raster>> {
    spec.validate()?;
    spec.systems()
        .into_par_iter()
        .map(|(_, value, sys)| {
            let sys = sys?;
            let prices = sys
                .prices
                .clone()
                .ok_or_else(|| ModelError::Degenerate("partition needs menu prices".into()))?;
            let market = sys.market()?;
            let population = build_population_scaled(
                DistributionKind::Uniform,
                DistributionKind::Uniform,
                sys.levels,
                1.0,
                sys.beta_max,
                sys.v_max,
            )?;
            let mut full = prices;
            full.push(0.0);
            let a = partition(&population, &full, &market)?;
            let cells = population
                .types()
                .iter()
                .zip(&a.choice)
                .map(|(t, &c)| (t.beta, t.value, c))
                .collect();
            Ok(Raster {
                value,
                levels: sys.levels,
                cells,
            })
        })
        .collect()
}

/// CSV rows `point,beta,v,segment_index` for a list of rasters.
pub fn write_rasters_csv<W: Write>(
    rasters: &[Raster],
    out: W,
) -> std::result::Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(["point", "beta", "v", "segment_index"])?;
    for r in rasters {
        let point = r.value.to_string();
        for (b, v, c) in &r.cells {
            w.write_record([
                point.clone(),
                format!("{b:.6}"),
                format!("{v:.6}"),
                c.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
