mod common;

use aptp::equilibrium::{demand, solve, solve_ascending, solve_descending, verify};
use aptp::model::{
    build_population, ApPopulation, ApType, Capacity, DiscreteDistribution, DistributionKind,
    Market, TpSegment,
};
use aptp::quality::QualityModel;
use aptp::scaling::normalize;
use common::{instance, laws};
use proptest::prelude::*;
use statrs::distribution::{Binomial, Discrete};

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig::with_cases(n)
}

proptest! {
    #![proptest_config(cases(256))]

    #[test]
    fn raising_own_price_shrinks_share(c in laws::share_case()) {
        laws::share_shrinks_with_own_price(c)?;
    }

    #[test]
    fn more_sensitive_and_richer_aps_pick_better_quality(c in laws::pair_case()) {
        laws::choice_quality_monotone(c)?;
    }

    #[test]
    fn choices_survive_affine_rescaling(c in laws::affine_case()) {
        laws::choice_invariant_under_rescaling(c)?;
    }

    #[test]
    fn quality_scaling_bounds_chosen_quality(c in laws::quality_scale_case()) {
        laws::quality_scaling_bound(c)?;
    }

    #[test]
    fn utility_is_quasiconcave_along_segments(c in laws::midpoint_case()) {
        laws::utility_quasiconcave(c)?;
    }

    #[test]
    fn equilibrium_maps_through_affine_rescaling(c in laws::equilibrium_scale_case()) {
        laws::equilibrium_maps_through_rescaling(c)?;
    }

    #[test]
    fn solver_output_passes_certificate(inst in laws::certificate_case()) {
        laws::solver_output_certified(inst)?;
    }

    #[test]
    fn descent_and_ascent_bracket_the_least_point(inst in instance(3, 9, 101, 41)) {
        let (market, pop, grid) = (inst.market(), inst.population(), inst.grid());
        let r = solve(&market, &pop, &grid).unwrap();
        let up = solve_ascending(&market, &pop, &grid).unwrap();
        let down = solve_descending(&market, &pop, &grid).unwrap();
        prop_assert_eq!(&r.price_levels, &up.price_levels);
        for (lo, hi) in r.price_levels.iter().zip(&down.price_levels) {
            prop_assert!(lo <= hi);
        }
        prop_assert!(verify(&down.prices, &market, &pop, &grid, false).unwrap().passed());
    }

    #[test]
    fn worse_quality_never_charges_more_unless_floored(inst in instance(3, 9, 101, 41)) {
        let (market, pop, grid) = (inst.market(), inst.population(), inst.grid());
        let r = solve(&market, &pop, &grid).unwrap();
        for i in 0..inst.n() {
            for j in i + 1..inst.n() {
                let bound = r.prices[i].max(inst.floor(j));
                prop_assert!(r.prices[j] <= bound + 1e-12, "p[{j}]={} > {bound}", r.prices[j]);
            }
        }
    }

    #[test]
    fn splitting_a_type_changes_nothing(inst in instance(2, 6, 41, 21), frac in 0.05f64..0.95) {
        let (market, pop, grid) = (inst.market(), inst.population(), inst.grid());
        let mut split = Vec::new();
        for t in pop.types() {
            split.push(ApType::new(frac * t.alpha, t.beta, t.value).unwrap());
            split.push(ApType::new((1.0 - frac) * t.alpha, t.beta, t.value).unwrap());
        }
        let pop2 = ApPopulation::new(split);
        prop_assert_eq!(pop2.len(), pop.len());
        let a = solve(&market, &pop, &grid).unwrap();
        let b = solve(&market, &pop2, &grid).unwrap();
        prop_assert_eq!(a.price_levels, b.price_levels);
        let la = demand(&a.prices, &market, &pop).unwrap();
        let lb = demand(&a.prices, &market, &pop2).unwrap();
        for (x, y) in la.iter().zip(&lb) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn normalization_round_trips_prices(inst in instance(2, 9, 41, 21)) {
        let (market, pop, grid) = (inst.market(), inst.population(), inst.grid());
        let Ok((m2, pop2, n)) = normalize(&market, &pop) else {
            return Ok(());
        };
        let f = n.factors;
        let g2 = grid.transformed(f.k1, f.k2, Some(market.dummy_index()));
        let a = solve(&market, &pop, &grid).unwrap();
        let b = solve(&m2, &pop2, &g2).unwrap();
        prop_assert_eq!(&a.price_levels, &b.price_levels);
        for i in 0..inst.n() {
            prop_assert!((n.denormalize(b.prices[i]) - a.prices[i]).abs() <= 1e-9);
        }
    }

    #[test]
    fn mg1_quality_round_trips(q in 1e-3f64..100.0, r in 0.01f64..10.0, nu in 0.01f64..1e3, c in 0.01f64..100.0) {
        let m = QualityModel::mg1_fifo(r).unwrap();
        let lambda = m.max_throughput(q, nu).unwrap();
        let back = m.achieved_quality(lambda, nu, q).unwrap();
        prop_assert!((back - q).abs() <= 1e-9 * q);
        let scaled = m.max_throughput(q, c * nu).unwrap();
        prop_assert!((scaled - c * lambda).abs() <= 1e-12 * scaled.max(1.0));
        // looser promise, more room
        prop_assert!(m.max_throughput(2.0 * q, nu).unwrap() > lambda);
    }

    #[test]
    fn canonical_markets_are_sorted_and_conserve_capacity(
        segs in prop::collection::vec((0usize..4, 0.0f64..1.0, 0.0f64..5.0), 1..8),
    ) {
        let input: Vec<TpSegment> = segs
            .iter()
            .enumerate()
            .map(|(i, &(qi, floor, mu))| {
                TpSegment::new(format!("T{i}"), floor, 0.5 * (qi + 1) as f64, Capacity::Effective(mu)).unwrap()
            })
            .collect();
        let m = Market::canonicalize(input.clone());
        let q = m.qualities();
        prop_assert!(q.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(m.segments().last().unwrap().is_dummy());
        prop_assert_eq!(m.segments().iter().filter(|s| s.is_dummy()).count(), 1);
        let total: f64 = input.iter().map(|s| s.effective_capacity()).sum();
        prop_assert!((m.total_mu() - total).abs() <= 1e-12 * (1.0 + total));
        for s in m.real_segments() {
            let min = input
                .iter()
                .filter(|t| t.quality == s.quality)
                .map(|t| t.price_floor)
                .fold(f64::INFINITY, f64::min);
            prop_assert_eq!(s.price_floor, min);
        }
    }

    #[test]
    fn distributions_carry_unit_mass(
        levels in 1usize..300,
        ratio in 0.05f64..3.0,
        p in 0.0f64..=1.0,
        total in 0.01f64..100.0,
    ) {
        for kind in [
            DistributionKind::Uniform,
            DistributionKind::Geometric { ratio },
            DistributionKind::ReversedGeometric { ratio },
            DistributionKind::Binomial { p },
        ] {
            let d = DiscreteDistribution::new(kind, levels).unwrap();
            let sum: f64 = d.masses().iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12, "{kind:?}: {sum}");
            prop_assert!(d.masses().iter().all(|&m| m >= 0.0));
        }
        let small = levels.min(40);
        let pop = build_population(
            DistributionKind::Geometric { ratio },
            DistributionKind::Binomial { p },
            small,
            total,
        )
        .unwrap();
        prop_assert!((pop.total_alpha() - total).abs() <= 1e-12 * total);
    }

    #[test]
    fn binomial_matches_reference(levels in 2usize..400, p in 0.001f64..0.999) {
        let d = DiscreteDistribution::new(DistributionKind::Binomial { p }, levels).unwrap();
        let reference = Binomial::new(p, (levels - 1) as u64).unwrap();
        for k in 0..levels {
            let want = reference.pmf(k as u64);
            let got = d.pmf(k + 1).unwrap();
            prop_assert!((got - want).abs() <= 1e-12 + 1e-9 * want, "k={k}: {got} vs {want}");
        }
    }
}
