//! Structural laws of the model, each as a strategy plus a check so the
//! property suite and the acceptance run share one definition.

use aptp::choice::{best_tp, partition, utility};
use aptp::equilibrium::{solve, verify};
use aptp::model::{ApType, Market};
use aptp::scaling::{transform_system, ScalingFactors};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use super::{instance, market_of, menu_and_population, population_of, with_dummy, Instance, Menu};

fn chosen_q(market: &Market, idx: usize) -> f64 {
    market.segments()[idx].quality
}

pub type ShareCase = (Menu, usize, f64);

pub fn share_case() -> impl Strategy<Value = ShareCase> {
    (menu_and_population(4, 9), 0usize..4, 1e-4f64..0.5)
}

/// Raising one segment's price only ever loses it APs.
pub fn share_shrinks_with_own_price(
    ((q, p, aps), pick, delta): ShareCase,
) -> Result<(), TestCaseError> {
    let market = market_of(&q, 1.0);
    let pop = population_of(&aps);
    let j = pick % q.len();
    let before = partition(&pop, &with_dummy(&p), &market).unwrap();
    let mut raised = p.clone();
    raised[j] += delta;
    let after = partition(&pop, &with_dummy(&raised), &market).unwrap();
    for t in &after.shares[j] {
        prop_assert!(
            before.shares[j].contains(t),
            "type {} joined segment {}",
            t,
            j
        );
    }
    Ok(())
}

pub type PairCase = (Menu, (f64, f64), (f64, f64));

pub fn pair_case() -> impl Strategy<Value = PairCase> {
    (
        menu_and_population(4, 1),
        (0.0f64..3.0, 0.0f64..1.0),
        (0.0f64..2.0, 0.0f64..1.0),
    )
}

/// An AP with larger beta and larger v never picks a worse quality.
pub fn choice_quality_monotone(
    ((q, p, _), (bi, vi), (db, dv)): PairCase,
) -> Result<(), TestCaseError> {
    let market = market_of(&q, 1.0);
    let prices = with_dummy(&p);
    let low = ApType::new(1.0, bi, vi).unwrap();
    let high = ApType::new(1.0, bi + db, vi + dv).unwrap();
    let ci = best_tp(&low, &prices, &market).unwrap();
    let cj = best_tp(&high, &prices, &market).unwrap();
    prop_assert!(chosen_q(&market, ci) >= chosen_q(&market, cj));
    Ok(())
}

pub type AffineCase = (Menu, (f64, f64, f64, f64));

fn factors() -> impl Strategy<Value = (f64, f64, f64, f64)> {
    (0.1f64..10.0, 0.0f64..2.0, 0.1f64..10.0, 0.1f64..10.0)
}

pub fn affine_case() -> impl Strategy<Value = AffineCase> {
    (menu_and_population(4, 9), factors())
}

/// Every AP keeps its pick after the affine rescaling of the whole system.
pub fn choice_invariant_under_rescaling(
    ((q, p, aps), (k1, k2, k3, kappa)): AffineCase,
) -> Result<(), TestCaseError> {
    let market = market_of(&q, 1.0);
    let pop = population_of(&aps);
    let f = ScalingFactors::new(k1, k2, k3, kappa).unwrap();
    let (m2, _) = transform_system(&market, &pop, &f).unwrap();
    let prices = with_dummy(&p);
    let p2 = with_dummy(&p.iter().map(|&x| f.price(x)).collect::<Vec<_>>());
    for t in pop.types() {
        let t2 = ApType::new(kappa * t.alpha, k3 * t.beta, f.price(t.value)).unwrap();
        prop_assert_eq!(
            best_tp(t, &prices, &market).unwrap(),
            best_tp(&t2, &p2, &m2).unwrap()
        );
    }
    Ok(())
}

pub type QualityScaleCase = (Menu, f64, f64);

pub fn quality_scale_case() -> impl Strategy<Value = QualityScaleCase> {
    (menu_and_population(4, 9), 1.0f64..5.0, 0.2f64..1.0)
}

/// Scaling every quality by `kappa` moves each AP's chosen quality by at
/// most the factor `kappa`, in the direction of the scaling.
pub fn quality_scaling_bound(
    ((q, p, aps), up, down): QualityScaleCase,
) -> Result<(), TestCaseError> {
    let market = market_of(&q, 1.0);
    let prices = with_dummy(&p);
    for kappa in [up, down] {
        let scaled: Vec<f64> = q.iter().map(|x| x * kappa).collect();
        let m2 = market_of(&scaled, 1.0);
        for &(a, b, v) in &aps {
            let t = ApType::new(a, b, v).unwrap();
            let before = chosen_q(&market, best_tp(&t, &prices, &market).unwrap());
            let after = chosen_q(&m2, best_tp(&t, &prices, &m2).unwrap());
            if before.is_infinite() || after.is_infinite() {
                prop_assert_eq!(before.is_infinite(), after.is_infinite());
            } else if kappa >= 1.0 {
                prop_assert!(after <= kappa * before * (1.0 + 1e-12));
            } else {
                prop_assert!(after >= kappa * before * (1.0 - 1e-12));
            }
        }
    }
    Ok(())
}

pub type MidpointCase = (f64, f64, (f64, f64), (f64, f64), f64);

pub fn midpoint_case() -> impl Strategy<Value = MidpointCase> {
    (
        0.0f64..3.0,
        0.01f64..1.0,
        (0.0f64..1.0, 0.0f64..3.0),
        (0.0f64..1.0, 0.0f64..3.0),
        0.0f64..1.0,
    )
}

/// On the profitable region `p <= v`, utility at a convex combination of two
/// `(p, q)` points is at least the smaller endpoint utility.
pub fn utility_quasiconcave(
    (beta, v, (f1, q1), (f2, q2), lambda): MidpointCase,
) -> Result<(), TestCaseError> {
    let ap = ApType::new(1.0, beta, v).unwrap();
    let (p1, p2) = (f1 * v, f2 * v);
    let u1 = utility(&ap, p1, q1).unwrap();
    let u2 = utility(&ap, p2, q2).unwrap();
    let pm = lambda * p1 + (1.0 - lambda) * p2;
    let qm = lambda * q1 + (1.0 - lambda) * q2;
    let um = utility(&ap, pm, qm).unwrap();
    prop_assert!(um >= u1.min(u2) - 1e-12, "{} < min({}, {})", um, u1, u2);
    Ok(())
}

pub type EquilibriumScaleCase = (Instance, (f64, f64, f64, f64));

pub fn equilibrium_scale_case() -> impl Strategy<Value = EquilibriumScaleCase> {
    (instance(3, 9, 61, 21), factors())
}

/// Equilibrium levels are identical on the transformed grid, and prices map
/// through `p -> k1 * p + k2`.
pub fn equilibrium_maps_through_rescaling(
    (inst, (k1, k2, k3, kappa)): EquilibriumScaleCase,
) -> Result<(), TestCaseError> {
    let (market, pop, grid) = (inst.market(), inst.population(), inst.grid());
    let f = ScalingFactors::new(k1, k2, k3, kappa).unwrap();
    let (m2, pop2) = transform_system(&market, &pop, &f).unwrap();
    let g2 = grid.transformed(k1, k2, Some(market.dummy_index()));
    let a = solve(&market, &pop, &grid).unwrap();
    let b = solve(&m2, &pop2, &g2).unwrap();
    prop_assert_eq!(&a.price_levels, &b.price_levels);
    for (x, y) in a.prices.iter().zip(&b.prices).take(inst.n()) {
        prop_assert!((f.price(*x) - y).abs() <= 1e-9 * (1.0 + y.abs()));
    }
    Ok(())
}

pub fn certificate_case() -> impl Strategy<Value = Instance> {
    instance(3, 9, 101, 41)
}

/// The solver's output passes the full-grid certificate, competitive part included.
pub fn solver_output_certified(inst: Instance) -> Result<(), TestCaseError> {
    let (market, pop, grid) = (inst.market(), inst.population(), inst.grid());
    let r = solve(&market, &pop, &grid).unwrap();
    prop_assert!(r.feasible && r.competitive);
    let cert = verify(&r.prices, &market, &pop, &grid, true).unwrap();
    prop_assert!(cert.passed(), "{:?}", cert.violations);
    Ok(())
}
