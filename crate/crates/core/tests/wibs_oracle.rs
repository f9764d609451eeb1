mod common;

use common::*;
use gridride_core::auction::{bmw, default_penalty, max_deliverable_kwh, second_price_payments, solve_wibs_exact};
use gridride_core::error::Error;
use proptest::prelude::*;

#[test]
fn exact_matches_enumeration() {
    let mut rng = rng(0x5eed_0101);
    for case in 0..300 {
        let (workers, tasks, bids, budget) = random_auction(&mut rng, 6, 6);
        let penalty = default_penalty(&bids);
        let oracle = wibs_enumerate(&bids, &tasks, budget, penalty);
        match solve_wibs_exact(&bids, &tasks, &workers, budget, penalty) {
            Ok(a) => {
                let best = oracle.unwrap_or_else(|| panic!("case {case}: oracle found no feasible matching"));
                assert!((a.penalized_cost(penalty) - best).abs() < 1e-9, "case {case}: {} vs {best}", a.penalized_cost(penalty));
                assert!(a.feasible);
                a.check(&bids, &tasks).unwrap();
            }
            Err(Error::BudgetUnattainable { attainable_kwh, .. }) => {
                assert!(oracle.is_none(), "case {case}");
                assert!(attainable_kwh + 1e-9 < budget.required_kwh);
            }
            Err(e) => panic!("case {case}: {e}"),
        }
    }
}

#[test]
fn small_penalty_trades_coverage_for_cost() {
    let mut rng = rng(0x5eed_0102);
    for case in 0..150 {
        let (workers, tasks, bids, budget) = random_auction(&mut rng, 5, 5);
        let penalty = 5.0;
        let oracle = wibs_enumerate(&bids, &tasks, budget, penalty);
        if let Ok(a) = solve_wibs_exact(&bids, &tasks, &workers, budget, penalty) {
            assert!((a.penalized_cost(penalty) - oracle.unwrap()).abs() < 1e-9, "case {case}");
        } else {
            assert!(oracle.is_none());
        }
    }
}

#[test]
fn bmw_never_beats_exact() {
    let mut rng = rng(0x5eed_0103);
    for case in 0..300 {
        let (workers, tasks, bids, budget) = random_auction(&mut rng, 7, 7);
        let penalty = default_penalty(&bids);
        let h = bmw(&workers, &tasks, &bids, budget).unwrap();
        h.check(&bids, &tasks).unwrap();
        assert!(h.iterations <= bids.len() + 1);
        if let Ok(x) = solve_wibs_exact(&bids, &tasks, &workers, budget, penalty) {
            if h.feasible {
                assert!(h.penalized_cost(penalty) + 1e-9 >= x.penalized_cost(penalty), "case {case}");
            }
        } else {
            assert!(!h.feasible, "case {case}: heuristic met a budget the exact solver calls unattainable");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn bmw_feasible_flag_is_honest(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (workers, tasks, bids, budget) = random_auction(&mut r, 8, 8);
        let a = bmw(&workers, &tasks, &bids, budget).unwrap();
        prop_assert!(a.check(&bids, &tasks).is_ok());
        prop_assert_eq!(a.feasible, a.delivered_v2g_kwh + 1e-9 >= budget.required_kwh);
        prop_assert!(a.delivered_v2g_kwh <= max_deliverable_kwh(&bids, &tasks).unwrap() + 1e-9);
    }

    #[test]
    fn payments_cover_winning_bids_unless_undercut(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (workers, tasks, bids, budget) = random_auction(&mut r, 6, 6);
        let a = bmw(&workers, &tasks, &bids, budget).unwrap();
        let p = second_price_payments(&a, &bids).unwrap();
        prop_assert_eq!(p.payments.len(), a.len());
        for pay in &p.payments {
            prop_assert!(pay.undercut || pay.amount >= pay.bid);
        }
    }
}
