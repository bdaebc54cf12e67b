//! TOML run configuration. Unknown keys are rejected, and validation errors
//! name the offending key path.
//!
//! Generic systems (`[model]`, `[population]`) are unit-free: qualities in
//! time units, prices and values in currency per throughput unit, capacities
//! and traffic in throughput units. The yearly scenario (`[scenario]`) carries
//! physical units in its key names.

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::equilibrium::PriceGrid;
use crate::evolution::{Decision, Knob, Scenario};
use crate::model::{
    build_population_scaled, ApPopulation, ApType, Capacity, DistributionKind, Market, TpSegment,
    DEFAULT_GEOMETRIC_RATIO, DEFAULT_LEVELS,
};
use crate::quality::QualityModel;
use crate::sweep::{
    default_labels, linspace, AxisValue, CapacitySpec, SweepAxis, SweepSpec, SystemSpec,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

type CResult<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub model: Option<ModelSection>,
    pub population: Option<PopulationSection>,
    pub sweep: Option<SweepSection>,
    pub partition: Option<SweepSection>,
    pub scenario: Option<ScenarioSection>,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub labels: Option<Vec<String>>,
    #[serde(default)]
    pub qualities: Vec<f64>,
    pub price_floors: Option<Vec<f64>>,
    pub capacity_shares: Option<Vec<f64>>,
    pub rho: Option<f64>,
    pub effective_capacities: Option<Vec<f64>>,
    pub raw_capacities: Option<Vec<f64>>,
    pub quality_model: Option<QualityModelSection>,
    pub grid_step: Option<f64>,
    pub price_ceiling: Option<f64>,
    pub menu_prices: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum QualityModelSection {
    Mg1Fifo { mean_residual: Option<f64> },
    DirectEta { eta: f64 },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSection {
    pub beta_distribution: Option<String>,
    pub value_distribution: Option<String>,
    pub geometric_ratio: Option<f64>,
    pub levels: Option<usize>,
    pub beta_max: Option<f64>,
    pub v_max: Option<f64>,
    pub total_alpha: Option<f64>,
    /// Explicit `[alpha, beta, v]` triples; overrides the distributions.
    pub types: Option<Vec<[f64; 3]>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: Option<String>,
    pub points: Option<Vec<toml::Value>>,
    pub from: Option<f64>,
    pub to: Option<f64>,
    pub count: Option<usize>,
    pub series_axis: Option<String>,
    pub series: Option<Vec<toml::Value>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub start_year: Option<i32>,
    pub anchor_year: Option<i32>,
    pub end_year: Option<i32>,
    pub nu_anchor_tbps: Option<[f64; 2]>,
    pub r_nu: Option<f64>,
    pub r_nu_future: Option<f64>,
    pub eta: Option<[f64; 2]>,
    pub alpha_start_tbps: Option<f64>,
    pub r_alpha: Option<f64>,
    pub weights_start: Option<[f64; 3]>,
    pub weight_growth: Option<[f64; 3]>,
    pub betas_per_quality_unit: Option<[f64; 3]>,
    pub qualities: Option<[f64; 2]>,
    pub v_max_usd_per_mbps_month: Option<f64>,
    pub v_levels: Option<usize>,
    pub p_min_usd_per_mbps_month: Option<[f64; 2]>,
    pub price_step_usd_per_mbps_month: Option<f64>,
    /// Horizon-year capacity ratio `nu_A : nu_B`.
    pub horizon_capacity_ratio: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub out_dir: Option<String>,
    /// Seed for randomized checks; the computations themselves are deterministic.
    pub seed: Option<u64>,
    pub competitive: Option<bool>,
    pub sensitivity_knob: Option<String>,
    pub sensitivity_values: Option<Vec<f64>>,
    /// `growth` or `ratio`.
    pub decision: Option<String>,
    /// Capacity multipliers after the anchor year, for `growth`.
    pub decision_growth: Option<Vec<f64>>,
    /// Horizon `nu_A : nu_B` ratios, for `ratio`.
    pub decision_ratios: Option<Vec<[f64; 2]>>,
}

impl ConfigFile {
    pub fn from_toml(text: &str) -> CResult<Self> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> CResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }
}

fn check_all(field: &str, xs: &[f64], ok: impl Fn(f64) -> bool, what: &str) -> CResult<()> {
    for (i, &x) in xs.iter().enumerate() {
        if !ok(x) {
            return Err(invalid(
                format!("{field}[{i}]"),
                format!("must be {what}, got {x}"),
            ));
        }
    }
    Ok(())
}

fn check_len(field: &str, got: usize, want: usize) -> CResult<()> {
    if got != want {
        return Err(invalid(
            field,
            format!("has {got} entries, expected {want}"),
        ));
    }
    Ok(())
}

fn nonneg(x: f64) -> bool {
    x.is_finite() && x >= 0.0
}

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

fn check_one(field: &str, x: Option<f64>, ok: impl Fn(f64) -> bool, what: &str) -> CResult<()> {
    match x {
        Some(v) if !ok(v) => Err(invalid(field, format!("must be {what}, got {v}"))),
        _ => Ok(()),
    }
}

fn distribution(
    field: &str,
    name: Option<&str>,
    ratio: f64,
    default: DistributionKind,
) -> CResult<DistributionKind> {
    let Some(name) = name else {
        return Ok(default);
    };
    let d = DistributionKind::parse(name, ratio).ok_or_else(|| {
        invalid(
            field,
            format!("unknown distribution `{name}` (use geo, uni, regeo or bn(p))"),
        )
    })?;
    crate::model::DiscreteDistribution::new(d, 2).map_err(|e| invalid(field, e.to_string()))?;
    Ok(d)
}

impl ModelSection {
    fn validate(&self) -> CResult<usize> {
        let n = self.qualities.len();
        check_all(
            "model.qualities",
            &self.qualities,
            nonneg,
            "finite and >= 0",
        )?;
        for (i, w) in self.qualities.windows(2).enumerate() {
            if !(w[0] < w[1]) {
                return Err(invalid(
                    format!("model.qualities[{}]", i + 1),
                    "qualities must be strictly increasing",
                ));
            }
        }
        if let Some(l) = &self.labels {
            check_len("model.labels", l.len(), n)?;
        }
        if let Some(f) = &self.price_floors {
            check_len("model.price_floors", f.len(), n)?;
            check_all("model.price_floors", f, nonneg, "finite and >= 0")?;
        }
        if let Some(p) = &self.menu_prices {
            check_len("model.menu_prices", p.len(), n)?;
            check_all("model.menu_prices", p, |x| x.is_finite(), "finite")?;
        }
        let given = [
            self.capacity_shares.is_some(),
            self.effective_capacities.is_some(),
            self.raw_capacities.is_some(),
        ]
        .iter()
        .filter(|&&b| b)
        .count();
        if given > 1 {
            return Err(invalid(
                "model",
                "give only one of capacity_shares, effective_capacities, raw_capacities",
            ));
        }
        if let Some(s) = &self.capacity_shares {
            check_len("model.capacity_shares", s.len(), n)?;
            check_all("model.capacity_shares", s, nonneg, "finite and >= 0")?;
            if n > 0 && s.iter().sum::<f64>() <= 0.0 {
                return Err(invalid("model.capacity_shares", "shares sum to zero"));
            }
            if self.rho.is_none() {
                return Err(invalid("model.rho", "required with capacity_shares"));
            }
        }
        check_one("model.rho", self.rho, nonneg, "finite and >= 0")?;
        if let Some(c) = &self.effective_capacities {
            check_len("model.effective_capacities", c.len(), n)?;
            check_all("model.effective_capacities", c, nonneg, "finite and >= 0")?;
        }
        if let Some(c) = &self.raw_capacities {
            check_len("model.raw_capacities", c.len(), n)?;
            check_all("model.raw_capacities", c, nonneg, "finite and >= 0")?;
            if self.quality_model.is_none() {
                return Err(invalid(
                    "model.quality_model",
                    "required with raw_capacities",
                ));
            }
            if matches!(
                self.quality_model,
                Some(QualityModelSection::Mg1Fifo { .. })
            ) {
                check_all(
                    "model.qualities",
                    &self.qualities,
                    positive,
                    "> 0 for an M/G/1 segment",
                )?;
            }
        }
        check_one(
            "model.grid_step",
            self.grid_step,
            positive,
            "finite and > 0",
        )?;
        check_one(
            "model.price_ceiling",
            self.price_ceiling,
            |x| x.is_finite(),
            "finite",
        )?;
        Ok(n)
    }

    fn quality_model(&self) -> CResult<Option<QualityModel>> {
        Ok(match &self.quality_model {
            None => None,
            Some(QualityModelSection::Mg1Fifo { mean_residual }) => Some(
                QualityModel::mg1_fifo(
                    mean_residual.unwrap_or(crate::quality::DEFAULT_MEAN_RESIDUAL),
                )
                .map_err(|e| invalid("model.quality_model.mean_residual", e.to_string()))?,
            ),
            Some(QualityModelSection::DirectEta { eta }) => Some(
                QualityModel::direct_eta(*eta)
                    .map_err(|e| invalid("model.quality_model.eta", e.to_string()))?,
            ),
        })
    }
}

impl PopulationSection {
    fn validate(&self) -> CResult<()> {
        check_one(
            "population.geometric_ratio",
            self.geometric_ratio,
            positive,
            "finite and > 0",
        )?;
        check_one(
            "population.beta_max",
            self.beta_max,
            positive,
            "finite and > 0",
        )?;
        check_one("population.v_max", self.v_max, positive, "finite and > 0")?;
        check_one(
            "population.total_alpha",
            self.total_alpha,
            positive,
            "finite and > 0",
        )?;
        if self.levels == Some(0) {
            return Err(invalid("population.levels", "must be >= 1"));
        }
        if let Some(types) = &self.types {
            if types.is_empty() {
                return Err(invalid("population.types", "must not be empty"));
            }
            for (i, t) in types.iter().enumerate() {
                ApType::new(t[0], t[1], t[2])
                    .map_err(|e| invalid(format!("population.types[{i}]"), e.to_string()))?;
            }
        }
        Ok(())
    }
}

impl PopulationSection {
    fn distributions(&self) -> CResult<(DistributionKind, DistributionKind)> {
        let ratio = self.geometric_ratio.unwrap_or(DEFAULT_GEOMETRIC_RATIO);
        Ok((
            distribution(
                "population.beta_distribution",
                self.beta_distribution.as_deref(),
                ratio,
                DistributionKind::Geometric { ratio },
            )?,
            distribution(
                "population.value_distribution",
                self.value_distribution.as_deref(),
                ratio,
                DistributionKind::Binomial { p: 0.5 },
            )?,
        ))
    }
}

/// A fully specified single system.
#[derive(Debug, Clone)]
pub struct SolveSetup {
    pub market: Market,
    pub population: ApPopulation,
    pub grid: PriceGrid,
}

impl ConfigFile {
    fn model(&self) -> CResult<&ModelSection> {
        self.model
            .as_ref()
            .ok_or_else(|| invalid("model", "section is required"))
    }

    /// The `[model]` and `[population]` sections as a sweepable system.
    pub fn system_spec(&self) -> CResult<SystemSpec> {
        let m = self.model()?;
        let n = m.validate()?;
        if m.raw_capacities.is_some() {
            return Err(invalid(
                "model.raw_capacities",
                "sweeps take capacity_shares or effective_capacities",
            ));
        }
        let default_pop = PopulationSection::default();
        let p = self.population.as_ref().unwrap_or(&default_pop);
        p.validate()?;
        if p.types.is_some() {
            return Err(invalid(
                "population.types",
                "sweeps take distributions, not explicit types",
            ));
        }
        let capacity = match (&m.capacity_shares, &m.effective_capacities) {
            (Some(s), _) => CapacitySpec::Shares {
                shares: s.clone(),
                rho: m.rho.unwrap_or(0.0),
            },
            (None, Some(c)) => CapacitySpec::Effective(c.clone()),
            (None, None) => CapacitySpec::Effective(vec![0.0; n]),
        };
        let mut spec = SystemSpec::normalized(m.qualities.clone(), capacity);
        (spec.beta_dist, spec.value_dist) = p.distributions()?;
        if let Some(l) = &m.labels {
            spec.labels = l.clone();
        }
        spec.floors = m.price_floors.clone().unwrap_or_else(|| vec![0.0; n]);
        spec.levels = p.levels.unwrap_or(spec.levels);
        spec.beta_max = p.beta_max.unwrap_or(1.0);
        spec.v_max = p.v_max.unwrap_or(1.0);
        spec.total_alpha = p.total_alpha.unwrap_or(1.0);
        spec.grid_step = m.grid_step.unwrap_or(spec.grid_step);
        spec.ceiling = m.price_ceiling.unwrap_or(spec.v_max);
        spec.prices = m.menu_prices.clone();
        Ok(spec)
    }

    /// Market, population and grid for a single solve.
    pub fn solve_setup(&self, grid_step: Option<f64>) -> CResult<SolveSetup> {
        let m = self.model()?;
        let n = m.validate()?;
        let default_pop = PopulationSection::default();
        let p = self.population.as_ref().unwrap_or(&default_pop);
        p.validate()?;
        let population = match &p.types {
            Some(types) => ApPopulation::new(types.iter().map(|t| ApType {
                alpha: t[0],
                beta: t[1],
                value: t[2],
            })),
            None => {
                let (fb, fv) = p.distributions()?;
                build_population_scaled(
                    fb,
                    fv,
                    p.levels.unwrap_or(DEFAULT_LEVELS),
                    p.total_alpha.unwrap_or(1.0),
                    p.beta_max.unwrap_or(1.0),
                    p.v_max.unwrap_or(1.0),
                )
                .map_err(|e| invalid("population", e.to_string()))?
            }
        };
        let labels = m.labels.clone().unwrap_or_else(|| default_labels(n));
        let floors = m.price_floors.clone().unwrap_or_else(|| vec![0.0; n]);
        let model = m.quality_model()?;
        let capacities: Vec<Capacity> = if let Some(raw) = &m.raw_capacities {
            let model = model.expect("validated");
            raw.iter().map(|&nu| Capacity::Raw { nu, model }).collect()
        } else if let Some(s) = &m.capacity_shares {
            let total: f64 = s.iter().sum();
            let rho = m.rho.unwrap_or(0.0);
            s.iter()
                .map(|x| Capacity::Effective(x / total * rho * population.total_alpha()))
                .collect()
        } else {
            m.effective_capacities
                .clone()
                .unwrap_or_else(|| vec![0.0; n])
                .into_iter()
                .map(Capacity::Effective)
                .collect()
        };
        let segs = (0..n)
            .map(|i| {
                TpSegment::new(labels[i].clone(), floors[i], m.qualities[i], capacities[i])
                    .map_err(|e| invalid(format!("model.segment[{i}]"), e.to_string()))
            })
            .collect::<CResult<Vec<_>>>()?;
        let market = Market::canonicalize(segs);
        let step = grid_step.or(m.grid_step);
        if let Some(s) = grid_step {
            if !positive(s) {
                return Err(invalid(
                    "--grid-step",
                    format!("must be finite and > 0, got {s}"),
                ));
            }
        }
        let grid = PriceGrid::for_market(&market, &population, step, m.price_ceiling)
            .map_err(|e| invalid("model.grid_step", e.to_string()))?;
        Ok(SolveSetup {
            market,
            population,
            grid,
        })
    }

    fn sweep_from(
        &self,
        section: Option<&SweepSection>,
        name: &str,
        axis_override: Option<&str>,
    ) -> CResult<SweepSpec> {
        let base = self.system_spec()?;
        let default = SweepSection::default();
        let s = section.unwrap_or(&default);
        let axis_name = axis_override
            .or(s.axis.as_deref())
            .ok_or_else(|| invalid(format!("{name}.axis"), "an axis is required"))?;
        let axis = SweepAxis::parse(axis_name, &base.labels).ok_or_else(|| {
            invalid(
                format!("{name}.axis"),
                format!("unknown axis `{axis_name}`"),
            )
        })?;
        let points = match (&s.points, s.from, s.to) {
            (Some(p), _, _) => axis_values(&format!("{name}.points"), p, base.beta_dist)?,
            (None, Some(a), Some(b)) => {
                linspace(a, b, s.count.unwrap_or(crate::sweep::DEFAULT_POINTS))
            }
            _ => return Err(invalid(format!("{name}.points"), "give points or from/to")),
        };
        let series = match (&s.series_axis, &s.series) {
            (Some(a), Some(v)) => {
                let sa = SweepAxis::parse(a, &base.labels).ok_or_else(|| {
                    invalid(format!("{name}.series_axis"), format!("unknown axis `{a}`"))
                })?;
                Some((
                    sa,
                    axis_values(&format!("{name}.series"), v, base.beta_dist)?,
                ))
            }
            (None, None) => None,
            _ => {
                return Err(invalid(
                    format!("{name}.series"),
                    "series_axis and series go together",
                ))
            }
        };
        let spec = SweepSpec {
            base,
            axis,
            points,
            series,
        };
        spec.validate().map_err(|e| invalid(name, e.to_string()))?;
        Ok(spec)
    }

    pub fn sweep_spec(&self, axis_override: Option<&str>) -> CResult<SweepSpec> {
        self.sweep_from(self.sweep.as_ref(), "sweep", axis_override)
    }

    pub fn partition_spec(&self) -> CResult<SweepSpec> {
        let spec = self.sweep_from(self.partition.as_ref(), "partition", None)?;
        if spec.base.prices.is_none() {
            return Err(invalid(
                "model.menu_prices",
                "required for partition rasters",
            ));
        }
        Ok(spec)
    }

    pub fn scenario(&self) -> CResult<Scenario> {
        let mut s = Scenario::benchmark();
        let Some(c) = &self.scenario else {
            return Ok(s);
        };
        macro_rules! set {
            ($($src:ident => $dst:ident),* $(,)?) => {
                $(if let Some(v) = c.$src { s.$dst = v; })*
            };
        }
        set!(
            start_year => start_year,
            anchor_year => anchor_year,
            end_year => end_year,
            nu_anchor_tbps => nu_anchor,
            r_nu => r_nu,
            eta => eta,
            alpha_start_tbps => alpha_start,
            r_alpha => r_alpha,
            weights_start => weights_start,
            weight_growth => weight_growth,
            betas_per_quality_unit => betas,
            qualities => qualities,
            v_max_usd_per_mbps_month => v_max,
            v_levels => v_levels,
            p_min_usd_per_mbps_month => p_min,
            price_step_usd_per_mbps_month => price_step,
        );
        s.r_nu_future = c.r_nu_future;
        if let Some([a, b]) = c.horizon_capacity_ratio {
            if !(nonneg(a) && nonneg(b) && a + b > 0.0) {
                return Err(invalid(
                    "scenario.horizon_capacity_ratio",
                    "entries must be >= 0 and not both 0",
                ));
            }
            s.horizon_share_a = Some(crate::evolution::ratio_share(a, b));
        }
        s.validate()
            .map_err(|e| invalid("scenario", e.to_string()))?;
        Ok(s)
    }

    pub fn knob(&self) -> CResult<(Knob, Vec<f64>)> {
        let name = self
            .run
            .sensitivity_knob
            .as_deref()
            .ok_or_else(|| invalid("run.sensitivity_knob", "required for sensitivity"))?;
        let knob = Knob::parse(name).ok_or_else(|| {
            invalid(
                "run.sensitivity_knob",
                format!("unknown knob `{name}` (alpha_start, r_alpha, eta_A, eta_B)"),
            )
        })?;
        let values = self
            .run
            .sensitivity_values
            .clone()
            .ok_or_else(|| invalid("run.sensitivity_values", "required for sensitivity"))?;
        if values.is_empty() {
            return Err(invalid("run.sensitivity_values", "must not be empty"));
        }
        check_all(
            "run.sensitivity_values",
            &values,
            positive,
            "finite and > 0",
        )?;
        Ok((knob, values))
    }

    pub fn decision(&self) -> CResult<Decision> {
        match self.run.decision.as_deref() {
            Some("growth") => {
                let r = self
                    .run
                    .decision_growth
                    .clone()
                    .unwrap_or_else(|| vec![1.4, 1.5, 1.6]);
                check_all("run.decision_growth", &r, positive, "finite and > 0")?;
                Ok(Decision::Growth(r))
            }
            Some("ratio") => {
                let r = self
                    .run
                    .decision_ratios
                    .clone()
                    .unwrap_or_else(|| vec![[3.0, 1.0], [2.0, 1.0], [3.0, 2.0]]);
                for (i, [a, b]) in r.iter().enumerate() {
                    if !(nonneg(*a) && nonneg(*b) && a + b > 0.0) {
                        return Err(invalid(
                            format!("run.decision_ratios[{i}]"),
                            "entries must be >= 0 and not both 0",
                        ));
                    }
                }
                Ok(Decision::Ratio(
                    r.iter()
                        .map(|[a, b]| crate::evolution::ratio_share(*a, *b))
                        .collect(),
                ))
            }
            Some(other) => Err(invalid(
                "run.decision",
                format!("unknown decision `{other}` (growth, ratio)"),
            )),
            None => Err(invalid("run.decision", "required for decide")),
        }
    }
}

fn axis_values(
    field: &str,
    raw: &[toml::Value],
    default_beta: DistributionKind,
) -> CResult<Vec<AxisValue>> {
    let ratio = match default_beta {
        DistributionKind::Geometric { ratio } | DistributionKind::ReversedGeometric { ratio } => {
            ratio
        }
        _ => DEFAULT_GEOMETRIC_RATIO,
    };
    raw.iter()
        .enumerate()
        .map(|(i, v)| match v {
            toml::Value::Float(x) => Ok(AxisValue::Number(*x)),
            toml::Value::Integer(x) => Ok(AxisValue::Number(*x as f64)),
            toml::Value::String(s) => DistributionKind::parse(s, ratio)
                .map(AxisValue::Distribution)
                .ok_or_else(|| {
                    invalid(
                        format!("{field}[{i}]"),
                        format!("unknown distribution `{s}`"),
                    )
                }),
            other => Err(invalid(
                format!("{field}[{i}]"),
                format!("expected a number or name, got {other}"),
            )),
        })
        .collect()
}
