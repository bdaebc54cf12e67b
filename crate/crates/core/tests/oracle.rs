mod common;

use aptp::equilibrium::solve;
use common::{instance, oracle, Instance};
use proptest::prelude::*;

fn check(inst: &Instance) -> Result<(), TestCaseError> {
    let r = solve(&inst.market(), &inst.population(), &inst.grid()).unwrap();
    let o = oracle(inst);
    prop_assert!(
        o.equilibria.contains(&r.price_levels),
        "solver levels {:?} not an equilibrium",
        r.price_levels
    );
    prop_assert_eq!(o.least.as_ref(), Some(&r.price_levels));
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solver_matches_exhaustive_search(inst in instance(3, 9, 101, 41)) {
        check(&inst)?;
    }
}

#[test]
fn capacity_for_one_of_two_aps() {
    let inst = Instance {
        qualities: vec![1.0],
        floor_levels: vec![0],
        mu: vec![0.5],
        points: 11,
        aps: vec![(0.5, 0.0, 0.9), (0.5, 0.0, 0.5)],
    };
    check(&inst).unwrap();
    let r = solve(&inst.market(), &inst.population(), &inst.grid()).unwrap();
    assert_eq!(r.price_levels, vec![5]);
    // the low-value AP is priced out at exactly its value
    assert_eq!(r.assignment.shares[0], vec![0]);
}

#[test]
fn zero_capacity_prices_everyone_out() {
    let inst = Instance {
        qualities: vec![0.5, 2.0],
        floor_levels: vec![0, 0],
        mu: vec![0.0, 0.0],
        points: 21,
        aps: vec![(1.0, 1.0, 0.62), (1.0, 0.5, 0.3)],
    };
    check(&inst).unwrap();
    let r = solve(&inst.market(), &inst.population(), &inst.grid()).unwrap();
    // 0.65 is the first grid price at or above the top value
    assert_eq!(r.price_levels, vec![13, 13]);
    assert!(r.loads.iter().all(|&l| l == 0.0));
}

#[test]
fn ample_capacity_sits_at_floors() {
    let inst = Instance {
        qualities: vec![0.5, 2.0, 3.0],
        floor_levels: vec![3, 2, 0],
        mu: vec![10.0, 10.0, 10.0],
        points: 21,
        aps: vec![(1.0, 1.0, 0.8), (1.0, 0.1, 0.3), (0.5, 2.5, 0.9)],
    };
    check(&inst).unwrap();
    let r = solve(&inst.market(), &inst.population(), &inst.grid()).unwrap();
    assert_eq!(r.price_levels, vec![0, 0, 0]);
}
