//! Shared fixtures: small random instances and a brute-force equilibrium
//! oracle that enumerates the whole joint price grid.
#![allow(dead_code)]

pub mod laws;

use aptp::equilibrium::PriceGrid;
use aptp::model::{ApPopulation, ApType, Market, TpSegment};
use proptest::prelude::*;

/// A small system on an aligned grid `floor + k * step`, ceiling 1.
#[derive(Debug, Clone)]
pub struct Instance {
    pub qualities: Vec<f64>,
    pub floor_levels: Vec<usize>,
    pub mu: Vec<f64>,
    /// Grid points from 0 to the ceiling inclusive.
    pub points: usize,
    /// `(alpha, beta, v)` per AP type.
    pub aps: Vec<(f64, f64, f64)>,
}

impl Instance {
    pub fn n(&self) -> usize {
        self.qualities.len()
    }

    pub fn step(&self) -> f64 {
        1.0 / (self.points - 1) as f64
    }

    pub fn floor(&self, i: usize) -> f64 {
        self.floor_levels[i] as f64 * self.step()
    }

    /// Grid points of segment `i`, floor included.
    pub fn levels(&self, i: usize) -> usize {
        self.points - self.floor_levels[i]
    }

    pub fn price(&self, i: usize, k: usize) -> f64 {
        self.floor(i) + k as f64 * self.step()
    }

    pub fn total_alpha(&self) -> f64 {
        self.aps.iter().map(|a| a.0).sum()
    }

    pub fn market(&self) -> Market {
        Market::canonicalize((0..self.n()).map(|i| {
            TpSegment::effective(
                format!("S{i}"),
                self.floor(i),
                self.qualities[i],
                self.mu[i],
            )
            .unwrap()
        }))
    }

    pub fn population(&self) -> ApPopulation {
        ApPopulation::new(
            self.aps
                .iter()
                .map(|&(a, b, v)| ApType::new(a, b, v).unwrap()),
        )
    }

    pub fn grid(&self) -> PriceGrid {
        let mut floors: Vec<f64> = (0..self.n()).map(|i| self.floor(i)).collect();
        floors.push(0.0);
        PriceGrid::new(self.step(), floors, 1.0).unwrap()
    }
}

/// Random instance with up to `max_segments` segments and `max_aps` types.
/// Three-segment instances use at most `max_points_3` grid points.
pub fn instance(
    max_segments: usize,
    max_aps: usize,
    max_points: usize,
    max_points_3: usize,
) -> impl Strategy<Value = Instance> {
    (1..=max_segments)
        .prop_flat_map(move |n| {
            let top = if n >= 3 { max_points_3 } else { max_points };
            (
                Just(n),
                5..=top,
                prop::collection::vec(0.05f64..2.0, n),
                prop::collection::vec(0.0f64..0.25, n),
                prop::collection::vec(prop_oneof![1 => Just(0.0), 6 => 0.0f64..0.6], n),
                prop::collection::vec((0.05f64..1.0, 0.0f64..3.0, 0.02f64..1.0), 1..=max_aps),
            )
        })
        .prop_map(|(n, points, mut q, floor_frac, mu_frac, aps)| {
            // strictly increasing qualities
            q.sort_by(f64::total_cmp);
            for i in 1..n {
                if q[i] <= q[i - 1] + 1e-3 {
                    q[i] = q[i - 1] + 0.05;
                }
            }
            let floor_levels = floor_frac
                .iter()
                .map(|f| (f * (points - 1) as f64).floor() as usize)
                .collect();
            let total: f64 = aps.iter().map(|a| a.0).sum();
            Instance {
                qualities: q,
                floor_levels,
                mu: mu_frac.iter().map(|m| m * total).collect(),
                points,
                aps,
            }
        })
}

/// The AP's pick under `prices`: the best positive per-unit utility, ties
/// broken towards the smaller index. `None` stands for the dummy.
pub fn oracle_choice(beta: f64, v: f64, qualities: &[f64], prices: &[f64]) -> Option<usize> {
    let u: Vec<f64> = qualities
        .iter()
        .zip(prices)
        .map(|(q, p)| (v - p) * (-beta * q).exp())
        .collect();
    let best = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if best <= 0.0 {
        return None;
    }
    u.iter().position(|&x| x >= best - 1e-12 * best)
}

pub fn oracle_loads(inst: &Instance, prices: &[f64]) -> Vec<f64> {
    let mut loads = vec![0.0; inst.n()];
    for &(a, b, v) in &inst.aps {
        if let Some(i) = oracle_choice(b, v, &inst.qualities, prices) {
            loads[i] += a * (-b * inst.qualities[i]).exp();
        }
    }
    loads
}

#[derive(Debug, Clone)]
pub struct OracleOutcome {
    /// Every competitive equilibrium, as level vectors.
    pub equilibria: Vec<Vec<usize>>,
    /// Componentwise least equilibrium, when one exists.
    pub least: Option<Vec<usize>>,
}

/// Exhaustive search: every joint grid vector is tested for feasibility,
/// for the absence of any unilateral move carrying strictly more feasible
/// load, and for the absence of any unilateral lower feasible price.
pub fn oracle(inst: &Instance) -> OracleOutcome {
    let n = inst.n();
    let dims: Vec<usize> = (0..n).map(|i| inst.levels(i)).collect();
    let total: usize = dims.iter().product();
    let tol = 1e-12 * inst.total_alpha();
    let mut loads = vec![0.0; total * n];
    let mut idx = vec![0usize; n];
    let mut prices = vec![0.0; n];
    for flat in 0..total {
        decode(flat, &dims, &mut idx);
        for i in 0..n {
            prices[i] = inst.price(i, idx[i]);
        }
        loads[flat * n..(flat + 1) * n].copy_from_slice(&oracle_loads(inst, &prices));
    }
    let strides: Vec<usize> = (0..n).map(|i| dims[i + 1..].iter().product()).collect();
    let feasible = |flat: usize, i: usize| loads[flat * n + i] <= inst.mu[i] + tol;
    let mut equilibria = Vec::new();
    'vectors: for flat in 0..total {
        if !(0..n).all(|i| feasible(flat, i)) {
            continue;
        }
        decode(flat, &dims, &mut idx);
        for i in 0..n {
            let own = loads[flat * n + i];
            let base = flat - idx[i] * strides[i];
            for k in 0..dims[i] {
                if k == idx[i] {
                    continue;
                }
                let other = base + k * strides[i];
                if !feasible(other, i) {
                    continue;
                }
                if k < idx[i] || loads[other * n + i] > own + tol {
                    continue 'vectors;
                }
            }
        }
        equilibria.push(idx.clone());
    }
    let least = equilibria.first().map(|first| {
        let mut m = first.clone();
        for e in &equilibria {
            for i in 0..n {
                m[i] = m[i].min(e[i]);
            }
        }
        m
    });
    let least = least.filter(|m| equilibria.contains(m));
    OracleOutcome { equilibria, least }
}

fn decode(mut flat: usize, dims: &[usize], idx: &mut [usize]) {
    for i in (0..dims.len()).rev() {
        idx[i] = flat % dims[i];
        flat /= dims[i];
    }
}

/// Qualities, prices and `(alpha, beta, v)` AP types.
pub type Menu = (Vec<f64>, Vec<f64>, Vec<(f64, f64, f64)>);

/// Random market and population for choice-level properties.
pub fn menu_and_population(max_segments: usize, max_aps: usize) -> impl Strategy<Value = Menu> {
    (1..=max_segments).prop_flat_map(move |n| {
        (
            prop::collection::vec(0.05f64..3.0, n),
            prop::collection::vec(0.0f64..1.0, n),
            prop::collection::vec((0.05f64..1.0, 0.0f64..3.0, 0.0f64..1.0), 1..=max_aps),
        )
            .prop_map(|(mut q, p, aps)| {
                q.sort_by(f64::total_cmp);
                q.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
                let p = p[..q.len()].to_vec();
                (q, p, aps)
            })
    })
}

pub fn market_of(qualities: &[f64], mu: f64) -> Market {
    Market::canonicalize(
        qualities
            .iter()
            .enumerate()
            .map(|(i, &q)| TpSegment::effective(format!("S{i}"), 0.0, q, mu).unwrap()),
    )
}

pub fn population_of(aps: &[(f64, f64, f64)]) -> ApPopulation {
    ApPopulation::new(aps.iter().map(|&(a, b, v)| ApType::new(a, b, v).unwrap()))
}

/// Prices with the dummy's zero appended.
pub fn with_dummy(prices: &[f64]) -> Vec<f64> {
    let mut p = prices.to_vec();
    p.push(0.0);
    p
}
