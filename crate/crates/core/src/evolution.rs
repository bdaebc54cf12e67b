//! Yearly two-service, three-class market model for CDN (A) and IP transit (B)
//! prices, with sensitivity and capacity-planning scenario families.

use std::io::Write;

use rayon::prelude::*;

use crate::equilibrium::{solve, PriceGrid};
use crate::error::{require, ModelError, Result};
use crate::model::{ApPopulation, ApType, Capacity, Market, TpSegment};
use crate::quality::QualityModel;

/// Terabits carried by 1 Mbps sustained over a 30-day month.
pub const TERABITS_PER_MBPS_MONTH: f64 = 1e6 * 30.0 * 86_400.0 / 1e12;

/// $/Mbps-month to $/terabit.
pub fn convert_price(p: f64) -> f64 {
    p / TERABITS_PER_MBPS_MONTH
}

/// $/terabit to $/Mbps-month.
pub fn convert_price_back(p: f64) -> f64 {
    p * TERABITS_PER_MBPS_MONTH
}

pub const SERVICES: [&str; 2] = ["A", "B"];
pub const CLASSES: [&str; 3] = ["a", "b", "c"];

/// Growth model of capacities, demand and AP mix. Growth rates are per-year
/// multipliers (1.22 means +22% a year).
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub start_year: i32,
    pub anchor_year: i32,
    pub end_year: i32,
    /// Raw capacity of (A, B) in the anchor year, Tbps.
    pub nu_anchor: [f64; 2],
    pub r_nu: f64,
    /// Capacity multiplier applied after the anchor year instead of `r_nu`.
    pub r_nu_future: Option<f64>,
    /// Utilization factor `mu / nu` of (A, B).
    pub eta: [f64; 2],
    /// Total traffic ceiling in the start year, Tbps.
    pub alpha_start: f64,
    pub r_alpha: f64,
    /// Class weights (video, web, inelastic) in the start year.
    pub weights_start: [f64; 3],
    pub weight_growth: [f64; 3],
    pub betas: [f64; 3],
    /// Qualities of (A, B).
    pub qualities: [f64; 2],
    /// Revenue ceiling, $/Mbps-month.
    pub v_max: f64,
    pub v_levels: usize,
    /// Price floors of (A, B), $/Mbps-month.
    pub p_min: [f64; 2],
    pub price_step: f64,
    /// Share of total raw capacity held by A at `end_year`; shares move
    /// linearly from the anchor value and the total keeps its growth path.
    pub horizon_share_a: Option<f64>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self::benchmark()
    }
}

impl Scenario {
    /// The calibrated 2007-2014 setting.
    pub fn benchmark() -> Self {
        Self {
            start_year: 2007,
            anchor_year: 2011,
            end_year: 2014,
            nu_anchor: [14.0, 7.0],
            r_nu: 1.5,
            r_nu_future: None,
            eta: [0.3, 0.9],
            alpha_start: 10.0,
            r_alpha: 1.22,
            weights_start: [0.02, 0.75, 0.23],
            weight_growth: [2.5, 1.5, 1.2],
            betas: [10.0, 1.0, 0.1],
            qualities: [0.01, 1.0],
            v_max: 10.0,
            v_levels: 100,
            p_min: [0.0, 0.0],
            price_step: 0.01,
            horizon_share_a: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.end_year < self.start_year {
            return Err(ModelError::Degenerate(format!(
                "end year {} precedes start year {}",
                self.end_year, self.start_year
            )));
        }
        let positive = |field: &'static str, x: f64| {
            require(x.is_finite() && x > 0.0, field, "finite and > 0", x)
        };
        positive("r_nu", self.r_nu)?;
        if let Some(r) = self.r_nu_future {
            positive("r_nu_future", r)?;
        }
        positive("r_alpha", self.r_alpha)?;
        positive("alpha_start", self.alpha_start)?;
        positive("v_max", self.v_max)?;
        positive("price_step", self.price_step)?;
        for &w in &self.weights_start {
            positive("weights_start", w)?;
        }
        for &g in &self.weight_growth {
            positive("weight_growth", g)?;
        }
        for &nu in &self.nu_anchor {
            require(
                nu.is_finite() && nu >= 0.0,
                "nu_anchor",
                "finite and >= 0",
                nu,
            )?;
        }
        for &b in &self.betas {
            require(b.is_finite() && b >= 0.0, "beta", "finite and >= 0", b)?;
        }
        for &p in &self.p_min {
            require(p.is_finite() && p >= 0.0, "p_min", "finite and >= 0", p)?;
        }
        for &e in &self.eta {
            QualityModel::direct_eta(e)?;
        }
        if !(self.qualities[0] >= 0.0
            && self.qualities[0] < self.qualities[1]
            && self.qualities[1].is_finite())
        {
            return Err(ModelError::Degenerate(format!(
                "qualities must satisfy 0 <= q_A < q_B, got {:?}",
                self.qualities
            )));
        }
        if self.v_levels == 0 {
            return Err(ModelError::NoLevels);
        }
        if let Some(s) = self.horizon_share_a {
            require((0.0..=1.0).contains(&s), "horizon_share_a", "in [0, 1]", s)?;
        }
        Ok(())
    }

    /// Raw capacities of (A, B) in `year`.
    pub fn nu(&self, year: i32) -> [f64; 2] {
        let dt = year - self.anchor_year;
        let growth = match self.r_nu_future {
            Some(r) if dt > 0 => r.powi(dt),
            _ => self.r_nu.powi(dt),
        };
        let mut nu = [self.nu_anchor[0] * growth, self.nu_anchor[1] * growth];
        if let Some(target) = self.horizon_share_a {
            if dt > 0 && self.end_year > self.anchor_year {
                let total = nu[0] + nu[1];
                let start = self.nu_anchor[0] / (self.nu_anchor[0] + self.nu_anchor[1]);
                let t = (dt as f64 / (self.end_year - self.anchor_year) as f64).min(1.0);
                let share = start + (target - start) * t;
                nu = [total * share, total * (1.0 - share)];
            }
        }
        nu
    }

    pub fn alpha(&self, year: i32) -> f64 {
        self.alpha_start * self.r_alpha.powi(year - self.start_year)
    }

    /// Class traffic ceilings `alpha * omega_i / sum(omega)`.
    pub fn class_alpha(&self, year: i32) -> [f64; 3] {
        let dt = year - self.start_year;
        let w: Vec<f64> = (0..3)
            .map(|i| self.weights_start[i] * self.weight_growth[i].powi(dt))
            .collect();
        let total: f64 = w.iter().sum();
        let a = self.alpha(year);
        [a * w[0] / total, a * w[1] / total, a * w[2] / total]
    }

    pub fn years(&self) -> impl Iterator<Item = i32> {
        self.start_year..=self.end_year
    }
}

/// Market and AP population of one year.
pub fn build_year(s: &Scenario, year: i32) -> Result<(Market, ApPopulation)> {
    s.validate()?;
    let nu = s.nu(year);
    let segs = (0..2)
        .map(|i| {
            TpSegment::new(
                SERVICES[i],
                s.p_min[i],
                s.qualities[i],
                Capacity::Raw {
                    nu: nu[i],
                    model: QualityModel::direct_eta(s.eta[i])?,
                },
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let alpha = s.class_alpha(year);
    let l = s.v_levels as f64;
    let mut types = Vec::with_capacity(3 * s.v_levels);
    for (a, beta) in alpha.iter().zip(s.betas) {
        for m in 1..=s.v_levels {
            types.push(ApType::new(a / l, beta, m as f64 * s.v_max / l)?);
        }
    }
    Ok((Market::canonicalize(segs), ApPopulation::new(types)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct YearlyState {
    pub year: i32,
    pub nu: [f64; 2],
    /// Effective capacities of (A, B).
    pub mu: [f64; 2],
    /// Class traffic ceilings (a, b, c).
    pub alpha: [f64; 3],
    /// Equilibrium prices of (A, B) in $/Mbps-month.
    pub prices: [f64; 2],
    pub loads: [f64; 2],
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub states: Vec<YearlyState>,
}

/// Percent change from `prev` to `cur`; `None` on a zero base.
fn pct_change(prev: f64, cur: f64) -> Option<f64> {
    (prev != 0.0).then(|| (cur - prev) / prev * 100.0)
}

impl Projection {
    pub fn state(&self, year: i32) -> Option<&YearlyState> {
        self.states.iter().find(|s| s.year == year)
    }

    pub fn price_series(&self, service: usize) -> Vec<f64> {
        self.states.iter().map(|s| s.prices[service]).collect()
    }

    /// Year-over-year percent changes; the first year has none.
    pub fn pct_changes(&self, service: usize) -> Vec<Option<f64>> {
        let p = self.price_series(service);
        std::iter::once(None)
            .chain(p.windows(2).map(|w| pct_change(w[0], w[1])))
            .collect()
    }

    fn window(&self, service: usize, from: i32, to: i32) -> Option<Vec<f64>> {
        if to <= from {
            return None;
        }
        (from..=to)
            .map(|y| self.state(y).map(|s| s.prices[service]))
            .collect()
    }

    /// Average annual drop in percent measured against the `from` level:
    /// `(p_from - p_to) / (years * p_from)`.
    pub fn mean_annual_drop(&self, service: usize, from: i32, to: i32) -> Option<f64> {
        let p = self.window(service, from, to)?;
        let (first, last) = (p[0], *p.last()?);
        (first != 0.0).then(|| (first - last) / (first * (to - from) as f64) * 100.0)
    }

    /// Arithmetic mean of the year-over-year drops in percent.
    pub fn mean_yoy_drop(&self, service: usize, from: i32, to: i32) -> Option<f64> {
        let p = self.window(service, from, to)?;
        let drops: Option<Vec<f64>> = p
            .windows(2)
            .map(|w| pct_change(w[0], w[1]).map(|c| -c))
            .collect();
        let drops = drops?;
        Some(drops.iter().sum::<f64>() / drops.len() as f64)
    }

    pub fn header() -> Vec<&'static str> {
        vec![
            "year",
            "mu_A",
            "mu_B",
            "alpha_a",
            "alpha_b",
            "alpha_c",
            "p_A",
            "p_B",
            "pct_change_A",
            "pct_change_B",
            "p_A_usd_per_terabit",
            "p_B_usd_per_terabit",
        ]
    }

    pub fn records(&self) -> Vec<Vec<String>> {
        let fmt_pct = |c: Option<f64>| c.map_or_else(|| "NA".to_string(), |x| format!("{x:.4}"));
        let (ca, cb) = (self.pct_changes(0), self.pct_changes(1));
        self.states
            .iter()
            .enumerate()
            .map(|(i, s)| {
                vec![
                    s.year.to_string(),
                    format!("{:.6}", s.mu[0]),
                    format!("{:.6}", s.mu[1]),
                    format!("{:.6}", s.alpha[0]),
                    format!("{:.6}", s.alpha[1]),
                    format!("{:.6}", s.alpha[2]),
                    format!("{:.4}", s.prices[0]),
                    format!("{:.4}", s.prices[1]),
                    fmt_pct(ca[i]),
                    fmt_pct(cb[i]),
                    format!("{:.4}", convert_price(s.prices[0])),
                    format!("{:.4}", convert_price(s.prices[1])),
                ]
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::result::Result<(), csv::Error> {
        let mut w = csv_writer(out);
        w.write_record(Self::header())?;
        for r in self.records() {
            w.write_record(&r)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

/// One competitive solve per year.
pub fn project(s: &Scenario) -> Result<Projection> {
    s.validate()?;
    let states = s
        .years()
        .map(|year| {
            let at = |e: ModelError| ModelError::Degenerate(format!("year {year}: {e}"));
            let (market, population) = build_year(s, year).map_err(at)?;
            let grid = PriceGrid::new(s.price_step, market.floors(), s.v_max).map_err(at)?;
            let r = solve(&market, &population, &grid).map_err(at)?;
            let real = market.real_segments();
            Ok(YearlyState {
                year,
                nu: s.nu(year),
                mu: [real[0].effective_capacity(), real[1].effective_capacity()],
                alpha: s.class_alpha(year),
                prices: [r.prices[0], r.prices[1]],
                loads: [r.loads[0], r.loads[1]],
                feasible: r.feasible,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Projection { states })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Knob {
    AlphaStart,
    RAlpha,
    EtaA,
    EtaB,
}

impl Knob {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "alpha_start" | "alpha_07" => Some(Self::AlphaStart),
            "r_alpha" => Some(Self::RAlpha),
            "eta_A" | "eta_a" => Some(Self::EtaA),
            "eta_B" | "eta_b" => Some(Self::EtaB),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::AlphaStart => "alpha_start",
            Self::RAlpha => "r_alpha",
            Self::EtaA => "eta_A",
            Self::EtaB => "eta_B",
        }
    }

    pub fn apply(&self, s: &Scenario, value: f64) -> Scenario {
        let mut s = s.clone();
        match self {
            Self::AlphaStart => s.alpha_start = value,
            Self::RAlpha => s.r_alpha = value,
            Self::EtaA => s.eta[0] = value,
            Self::EtaB => s.eta[1] = value,
        }
        s
    }
}

/// Projections labelled by the scenario value that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Family {
    pub parameter: String,
    pub members: Vec<(f64, Projection)>,
}

impl Family {
    pub fn write_csv<W: Write>(&self, out: W) -> std::result::Result<(), csv::Error> {
        let mut w = csv_writer(out);
        let mut header = vec![self.parameter.as_str()];
        header.extend(Projection::header());
        w.write_record(&header)?;
        for (value, p) in &self.members {
            for r in p.records() {
                let mut rec = vec![value.to_string()];
                rec.extend(r);
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn family(parameter: String, scenarios: Vec<(f64, Scenario)>) -> Result<Family> {
    let members = scenarios
        .into_par_iter()
        .map(|(v, s)| project(&s).map(|p| (v, p)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Family { parameter, members })
}

pub fn sensitivity(s: &Scenario, knob: Knob, values: &[f64]) -> Result<Family> {
    family(
        knob.name().to_string(),
        values.iter().map(|&v| (v, knob.apply(s, v))).collect(),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decision {
    /// Capacity multipliers applied after the anchor year.
    Growth(Vec<f64>),
    /// Horizon-year `nu_A : nu_B` ratios, given as A's share of the total.
    Ratio(Vec<f64>),
}

pub fn decision_scenarios(s: &Scenario, decision: &Decision) -> Result<Family> {
    match decision {
        Decision::Growth(rates) => family(
            "r_nu_future".into(),
            rates
                .iter()
                .map(|&r| {
                    let mut t = s.clone();
                    t.r_nu_future = Some(r);
                    (r, t)
                })
                .collect(),
        ),
        Decision::Ratio(shares) => family(
            "horizon_share_A".into(),
            shares
                .iter()
                .map(|&sh| {
                    let mut t = s.clone();
                    t.horizon_share_a = Some(sh);
                    (sh, t)
                })
                .collect(),
        ),
    }
}

/// A's share of total capacity for an `a:b` ratio.
pub fn ratio_share(a: f64, b: f64) -> f64 {
    a / (a + b)
}
