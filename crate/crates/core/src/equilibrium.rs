//! Demand aggregation, equilibrium certificates and the competitive solver.
//!
//! Prices live on a per-segment grid `floor + k * step`. A segment's own load
//! never rises when its own price rises, and never falls when a rival's price
//! rises, so the set of feasible price vectors is closed under componentwise
//! minimum. [`solve`] returns the least element of that set.

use crate::choice::{check_prices, select, Assignment};
use crate::error::{require, ModelError, Result};
use crate::model::{ApPopulation, Market};

/// Relative slack (times total alpha) when comparing a load with capacity.
pub const LOAD_TOLERANCE: f64 = 1e-12;

/// Discrete price menu of every segment.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceGrid {
    pub step: f64,
    /// One floor per market segment, dummy included.
    pub floors: Vec<f64>,
    pub ceiling: f64,
}

impl PriceGrid {
    pub fn new(step: f64, floors: Vec<f64>, ceiling: f64) -> Result<Self> {
        require(
            step.is_finite() && step > 0.0,
            "grid step",
            "finite and > 0",
            step,
        )?;
        require(ceiling.is_finite(), "grid ceiling", "finite", ceiling)?;
        for &f in &floors {
            require(f.is_finite(), "grid floor", "finite", f)?;
        }
        Ok(Self {
            step,
            floors,
            ceiling,
        })
    }

    /// Grid over the market's floors. `step` defaults to a thousandth of
    /// `v_max - min floor`; `ceiling` defaults to `v_max`.
    pub fn for_market(
        market: &Market,
        population: &ApPopulation,
        step: Option<f64>,
        ceiling: Option<f64>,
    ) -> Result<Self> {
        let v_max = population.max_value();
        let ceiling = ceiling.unwrap_or(v_max);
        let min_floor = market
            .real_segments()
            .iter()
            .map(|s| s.price_floor)
            .fold(f64::INFINITY, f64::min);
        let step = match step {
            Some(s) => s,
            None => {
                let span = if min_floor.is_finite() {
                    v_max - min_floor
                } else {
                    v_max
                };
                if span > 0.0 {
                    1e-3 * span
                } else {
                    1e-3
                }
            }
        };
        Self::new(step, market.floors(), ceiling)
    }

    fn top(&self, segment: usize) -> usize {
        let floor = self.floors[segment];
        if floor >= self.ceiling {
            return 0;
        }
        let n = ((self.ceiling - floor) / self.step + 1e-9).floor() as usize;
        let last = floor + n as f64 * self.step;
        if self.ceiling - last > 1e-9 * self.step {
            n + 1
        } else {
            n
        }
    }

    /// Number of grid points for a non-dummy segment.
    pub fn levels(&self, segment: usize) -> usize {
        self.top(segment) + 1
    }

    /// Price at a level. Levels run from the floor up to the ceiling; when the
    /// ceiling is off-grid it is appended as the last level.
    pub fn price(&self, segment: usize, level: usize) -> f64 {
        let floor = self.floors[segment];
        let p = floor + level as f64 * self.step;
        if level > 0 && level == self.top(segment) && p > self.ceiling {
            self.ceiling
        } else {
            p
        }
    }

    /// Grid of the system transformed by `p -> k1 * p + k2`.
    pub fn transformed(&self, k1: f64, k2: f64, dummy: Option<usize>) -> Self {
        let floors = self
            .floors
            .iter()
            .enumerate()
            .map(|(i, &f)| if Some(i) == dummy { 0.0 } else { k1 * f + k2 })
            .collect();
        Self {
            step: k1 * self.step,
            floors,
            ceiling: k1 * self.ceiling + k2,
        }
    }
}

/// Per-AP constants used by every load evaluation.
struct LoadModel {
    n: usize,
    values: Vec<f64>,
    decay: Vec<f64>,
    flow: Vec<f64>,
    mu: Vec<f64>,
    tol: f64,
}

impl LoadModel {
    fn new(market: &Market, population: &ApPopulation) -> Self {
        let real = market.real_segments();
        let n = real.len();
        let mut decay = Vec::with_capacity(n * population.len());
        let mut flow = Vec::with_capacity(n * population.len());
        for ap in population.types() {
            for s in real {
                let d = (-ap.beta * s.quality).exp();
                decay.push(d);
                flow.push(ap.alpha * d);
            }
        }
        Self {
            n,
            values: population.types().iter().map(|t| t.value).collect(),
            decay,
            flow,
            mu: real.iter().map(|s| s.effective_capacity()).collect(),
            tol: LOAD_TOLERANCE * population.total_alpha(),
        }
    }

    fn choices(&self, prices: &[f64]) -> Vec<usize> {
        let n = self.n;
        self.values
            .iter()
            .enumerate()
            .map(|(i, &v)| select(v, &self.decay[i * n..(i + 1) * n], prices))
            .collect()
    }

    fn loads(&self, prices: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n + 1];
        for (i, &v) in self.values.iter().enumerate() {
            let c = select(v, &self.decay[i * n..(i + 1) * n], prices);
            if c < n {
                out[c] += self.flow[i * n + c];
            }
        }
        out
    }

    fn load_of(&self, segment: usize, prices: &[f64]) -> f64 {
        let n = self.n;
        let mut total = 0.0;
        for (i, &v) in self.values.iter().enumerate() {
            if select(v, &self.decay[i * n..(i + 1) * n], prices) == segment {
                total += self.flow[i * n + segment];
            }
        }
        total
    }

    fn feasible_at(&self, segment: usize, prices: &mut [f64], price: f64) -> bool {
        let saved = prices[segment];
        prices[segment] = price;
        let ok = self.load_of(segment, prices) <= self.mu[segment] + self.tol;
        prices[segment] = saved;
        ok
    }

    /// Lowest level in `lo..=hi` at which `segment` is feasible, assuming own
    /// load is non-increasing in own price. `None` when `hi` is infeasible.
    fn lowest_feasible(
        &self,
        grid: &PriceGrid,
        segment: usize,
        prices: &mut [f64],
        lo: usize,
        hi: usize,
    ) -> Option<usize> {
        if !self.feasible_at(segment, prices, grid.price(segment, hi)) {
            return None;
        }
        let (mut a, mut b) = (lo, hi);
        while a < b {
            let m = a + (b - a) / 2;
            if self.feasible_at(segment, prices, grid.price(segment, m)) {
                b = m;
            } else {
                a = m + 1;
            }
        }
        Some(a)
    }
}

/// Solver output.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumResult {
    /// One price per market segment, dummy (0) last.
    pub prices: Vec<f64>,
    /// Grid level of each non-dummy price.
    pub price_levels: Vec<usize>,
    pub assignment: Assignment,
    /// Carried throughput per segment; the dummy carries none.
    pub loads: Vec<f64>,
    pub feasible: bool,
    /// No segment could lower its price by one level and stay feasible.
    pub competitive: bool,
    /// Round-robin passes over all segments.
    pub iterations: usize,
    /// Fixed point reached by the price-descent phase alone.
    pub descending_prices: Vec<f64>,
}

/// Carried throughput of every segment under `prices`.
pub fn demand(prices: &[f64], market: &Market, population: &ApPopulation) -> Result<Vec<f64>> {
    check_prices(prices, market)?;
    let lm = LoadModel::new(market, population);
    Ok(lm.loads(&prices[..lm.n]))
}

fn check_grid(market: &Market, grid: &PriceGrid) -> Result<()> {
    if grid.floors.len() != market.len() {
        return Err(ModelError::PriceLength {
            expected: market.len(),
            got: grid.floors.len(),
        });
    }
    Ok(())
}

fn prices_of(grid: &PriceGrid, levels: &[usize]) -> Vec<f64> {
    levels
        .iter()
        .enumerate()
        .map(|(i, &k)| grid.price(i, k))
        .collect()
}

/// Descending round-robin: start at the ceiling and move each segment, in
/// quality order, to its lowest feasible level given the others.
fn descend(lm: &LoadModel, grid: &PriceGrid) -> (Vec<usize>, usize) {
    let mut levels: Vec<usize> = (0..lm.n).map(|i| grid.top(i)).collect();
    let mut prices = prices_of(grid, &levels);
    let mut passes = 0;
    loop {
        passes += 1;
        let mut changed = false;
        for i in 0..lm.n {
            if let Some(k) = lm.lowest_feasible(grid, i, &mut prices, 0, levels[i]) {
                if k < levels[i] {
                    levels[i] = k;
                    prices[i] = grid.price(i, k);
                    changed = true;
                }
            }
        }
        if !changed {
            return (levels, passes);
        }
    }
}

/// Ascending round-robin from the floors: raise every overloaded segment to
/// its lowest feasible level, never beyond `cap`.
fn ascend(lm: &LoadModel, grid: &PriceGrid, cap: &[usize]) -> (Vec<usize>, usize) {
    let mut levels = vec![0usize; lm.n];
    let mut prices = prices_of(grid, &levels);
    let mut passes = 0;
    loop {
        passes += 1;
        let mut changed = false;
        for i in 0..lm.n {
            if lm.load_of(i, &prices) <= lm.mu[i] + lm.tol || levels[i] >= cap[i] {
                continue;
            }
            let k = lm
                .lowest_feasible(grid, i, &mut prices, levels[i] + 1, cap[i])
                .unwrap_or(cap[i]);
            levels[i] = k;
            prices[i] = grid.price(i, k);
            changed = true;
        }
        if !changed {
            return (levels, passes);
        }
    }
}

fn finish(
    lm: &LoadModel,
    grid: &PriceGrid,
    levels: Vec<usize>,
    iterations: usize,
    descending: Vec<f64>,
) -> EquilibriumResult {
    let real = prices_of(grid, &levels);
    let loads = lm.loads(&real);
    let feasible = (0..lm.n).all(|i| loads[i] <= lm.mu[i] + lm.tol);
    let mut scratch = real.clone();
    let competitive = (0..lm.n)
        .all(|i| levels[i] == 0 || !lm.feasible_at(i, &mut scratch, grid.price(i, levels[i] - 1)));
    let choice = lm.choices(&real);
    let mut prices = real;
    prices.push(0.0);
    let mut descending_prices = descending;
    descending_prices.push(0.0);
    EquilibriumResult {
        prices,
        price_levels: levels,
        assignment: Assignment::from_choice(choice, lm.n + 1),
        loads,
        feasible,
        competitive,
        iterations,
        descending_prices,
    }
}

/// Competitive equilibrium: the componentwise-least feasible price vector.
///
/// Runs the descending scheme first; its fixed point is feasible but may sit
/// above the least one, so an ascending pass from the floors, bounded by it,
/// finishes the job.
pub fn solve(
    market: &Market,
    population: &ApPopulation,
    grid: &PriceGrid,
) -> Result<EquilibriumResult> {
    check_grid(market, grid)?;
    let lm = LoadModel::new(market, population);
    let (down, p1) = descend(&lm, grid);
    let (up, p2) = ascend(&lm, grid, &down);
    let descending = prices_of(grid, &down);
    Ok(finish(&lm, grid, up, p1 + p2, descending))
}

/// The descending scheme on its own, started from the ceiling.
pub fn solve_descending(
    market: &Market,
    population: &ApPopulation,
    grid: &PriceGrid,
) -> Result<EquilibriumResult> {
    check_grid(market, grid)?;
    let lm = LoadModel::new(market, population);
    let (down, passes) = descend(&lm, grid);
    let descending = prices_of(grid, &down);
    Ok(finish(&lm, grid, down, passes, descending))
}

/// Constructive variant: start at the floors and raise overloaded segments.
pub fn solve_ascending(
    market: &Market,
    population: &ApPopulation,
    grid: &PriceGrid,
) -> Result<EquilibriumResult> {
    check_grid(market, grid)?;
    let lm = LoadModel::new(market, population);
    let cap: Vec<usize> = (0..lm.n).map(|i| grid.top(i)).collect();
    let (up, passes) = ascend(&lm, grid, &cap);
    let ascending = prices_of(grid, &up);
    Ok(finish(&lm, grid, up, passes, ascending))
}

#[derive(Debug, Clone, PartialEq)]
pub enum ViolationKind {
    /// Load above effective capacity at the given price.
    Overloaded { load: f64, capacity: f64 },
    /// A different grid price carries strictly more feasible load.
    LargerLoad { load: f64, current: f64 },
    /// A lower grid price is also feasible.
    LowerFeasible,
    /// A price is below its floor or off the grid.
    OffGrid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub segment: usize,
    pub price: f64,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Certificate {
    pub violations: Vec<Violation>,
}

impl Certificate {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks feasibility, that no unilateral grid move carries strictly more
/// feasible load, and (when `competitive`) that no lower grid price is
/// feasible. Every grid point of every segment is scanned.
pub fn verify(
    prices: &[f64],
    market: &Market,
    population: &ApPopulation,
    grid: &PriceGrid,
    competitive: bool,
) -> Result<Certificate> {
    check_prices(prices, market)?;
    check_grid(market, grid)?;
    let lm = LoadModel::new(market, population);
    let mut current: Vec<f64> = prices[..lm.n].to_vec();
    let loads = lm.loads(&current);
    let mut violations = Vec::new();
    if prices[lm.n] != 0.0 {
        violations.push(Violation {
            segment: lm.n,
            price: prices[lm.n],
            kind: ViolationKind::OffGrid,
        });
    }
    let eps = 1e-9 * grid.step;
    for i in 0..lm.n {
        let own = current[i];
        if own < grid.floors[i] - eps {
            violations.push(Violation {
                segment: i,
                price: own,
                kind: ViolationKind::OffGrid,
            });
        }
        if loads[i] > lm.mu[i] + lm.tol {
            violations.push(Violation {
                segment: i,
                price: own,
                kind: ViolationKind::Overloaded {
                    load: loads[i],
                    capacity: lm.mu[i],
                },
            });
        }
        for k in 0..grid.levels(i) {
            let p = grid.price(i, k);
            if (p - own).abs() <= eps {
                continue;
            }
            current[i] = p;
            let load = lm.load_of(i, &current);
            current[i] = own;
            if load > lm.mu[i] + lm.tol {
                continue;
            }
            if load > loads[i] + lm.tol {
                violations.push(Violation {
                    segment: i,
                    price: p,
                    kind: ViolationKind::LargerLoad {
                        load,
                        current: loads[i],
                    },
                });
            } else if competitive && p < own {
                violations.push(Violation {
                    segment: i,
                    price: p,
                    kind: ViolationKind::LowerFeasible,
                });
            }
        }
    }
    Ok(Certificate { violations })
}
