use fair_auction::baselines::{second_price, simple_expected, simple_group_probs, TieBreak};
use fair_auction::gpm::{gpm_estimate, solve_group_lp, Estimator};
use fair_auction::gsm::{buyer_expected_on_side, gsm_expected, BaseTransform, GroupScoreFunction, ScoreParams, SplitMode};
use fair_auction::harness::ValuationSpec;
use fair_auction::io::{bids_to_json, parse_bids};
use fair_auction::rng::derive_seed;
use fair_auction::{BidProfile, QuadratureSpec, ValuationSupport};
use proptest::prelude::*;

fn support() -> ValuationSupport {
    ValuationSupport::new(0.0, 10.0).unwrap()
}

fn groups(m: usize, max: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.01f64..10.0, 1..=max), m)
}

fn profile(m: usize, max: usize) -> impl Strategy<Value = BidProfile> {
    groups(m, max).prop_map(|g| BidProfile::from_groups(&g, support()).unwrap())
}

fn base() -> impl Strategy<Value = BaseTransform> {
    prop::sample::select(BaseTransform::ALL.to_vec())
}

fn scores(m: usize) -> impl Strategy<Value = GroupScoreFunction> {
    (prop::collection::vec((0.0f64..3.0, 0.0f64..3.0, 0.0f64..3.0, 0.01f64..2.0), m), base()).prop_map(|(p, base)| {
        let params = p.into_iter().map(|(a, b, c, d)| ScoreParams::new(a, b, c, d).unwrap()).collect();
        GroupScoreFunction::new(params, base, support()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn second_price_charges_the_runner_up(bids in profile(2, 6)) {
        let o = second_price(&bids, TieBreak::LowestIndex).unwrap();
        let w = o.winner().unwrap();
        let mut sorted = bids.bids().to_vec();
        sorted.sort_by(|a, b| b.total_cmp(a));
        prop_assert_eq!(bids.bid(w), sorted[0]);
        let second = sorted.get(1).copied().unwrap_or(0.0);
        prop_assert_eq!(o.price().unwrap(), second);
    }

    #[test]
    fn simple_lottery_equalizes_top_bids(bids in profile(3, 5)) {
        let p = simple_group_probs(&bids).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let tops: Vec<f64> = bids.groups().iter().map(|g| g.iter().cloned().fold(0.0, f64::max)).collect();
        for k in 1..p.len() {
            prop_assert!((p[k] * tops[k] - p[0] * tops[0]).abs() < 1e-9);
        }
        let e = simple_expected(&bids).unwrap();
        for i in 0..bids.n() {
            prop_assert!(e.exp_payment()[i] <= e.win_prob()[i] * bids.bid(i) + 1e-12);
        }
    }

    #[test]
    fn lp_solution_is_feasible_and_beats_random_feasible_points(
        w in prop::collection::vec(0.5f64..10.0, 2..=5),
        frac in prop::collection::vec(0.0f64..1.0, 5),
        eps in 0.0f64..3.0,
        probes in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 5), 50),
    ) {
        let m = w.len();
        let price: Vec<f64> = w.iter().zip(&frac).map(|(w, f)| w * f).collect();
        let pr = solve_group_lp(&w, &price, eps).unwrap();
        let value = |p: &[f64]| p.iter().zip(&price).map(|(p, c)| p * c).sum::<f64>();
        let spread = |p: &[f64]| {
            let xs: Vec<f64> = p.iter().zip(&w).map(|(p, w)| p * w).collect();
            xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - xs.iter().cloned().fold(f64::INFINITY, f64::min)
        };
        prop_assert!((pr.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(pr.iter().all(|&p| (-1e-9..=1.0 + 1e-9).contains(&p)));
        prop_assert!(spread(&pr) <= eps + 1e-9);
        for raw in probes {
            let total: f64 = raw[..m].iter().sum();
            let p: Vec<f64> = raw[..m].iter().map(|x| x / total).collect();
            if spread(&p) <= eps {
                prop_assert!(value(&p) <= value(&pr) + 1e-9);
            }
        }
    }

    #[test]
    fn gpm_estimate_is_a_subprobability(bids in profile(2, 6), eps in 0.0f64..2.0, seed in any::<u64>()) {
        let e = gpm_estimate(&bids, eps, 50, seed, Estimator::SplitConditional).unwrap().expected;
        prop_assert!(e.win_prob().iter().sum::<f64>() <= 1.0 + 1e-12);
        for i in 0..bids.n() {
            prop_assert!(e.exp_payment()[i] <= e.win_prob()[i] * bids.bid(i) + 1e-12);
        }
    }

    #[test]
    fn gsm_is_individually_rational_and_allocates_fully(bids in profile(2, 4), gsf in scores(2)) {
        let e = gsm_expected(&bids, &gsf, SplitMode::AllAuction, &QuadratureSpec::default()).unwrap();
        prop_assert!((e.win_prob().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for i in 0..bids.n() {
            prop_assert!(e.exp_payment()[i] >= 0.0);
            prop_assert!(e.exp_payment()[i] <= e.win_prob()[i] * bids.bid(i) + 1e-9);
        }
    }

    #[test]
    fn gsm_deviations_do_not_pay(bids in profile(2, 4), gsf in scores(2), pick in any::<prop::sample::Index>(), dev in 0.0f64..10.0) {
        let quad = QuadratureSpec::default();
        let side: Vec<usize> = (0..bids.n()).collect();
        let i = pick.index(bids.n());
        let value = bids.bid(i);
        let (pi, pay) = buyer_expected_on_side(&bids, &gsf, &side, i, &quad).unwrap();
        let lied = bids.with_bid(i, dev).unwrap();
        let (pi_d, pay_d) = buyer_expected_on_side(&lied, &gsf, &side, i, &quad).unwrap();
        prop_assert!(pi * value - pay >= pi_d * value - pay_d - 1e-7);
    }

    #[test]
    fn bids_json_round_trips(g in groups(3, 4)) {
        let bids = BidProfile::from_groups(&g, support()).unwrap();
        prop_assert_eq!(parse_bids(&bids_to_json(&bids)).unwrap(), bids);
    }

    #[test]
    fn valuation_specs_round_trip(lo in 0.0f64..5.0, width in 0.1f64..5.0, normal in any::<bool>()) {
        let text = if normal { format!("normal:{lo}:{width}") } else { format!("uniform:{lo}:{}", lo + width) };
        let spec: ValuationSpec = text.parse().unwrap();
        prop_assert_eq!(spec.to_string().parse::<ValuationSpec>().unwrap(), spec);
    }

    #[test]
    fn seed_paths_are_distinct(master in any::<u64>(), a in any::<u64>(), b in any::<u64>()) {
        prop_assert_eq!(derive_seed(master, &[a, b]), derive_seed(master, &[a, b]));
        if a != b {
            prop_assert_ne!(derive_seed(master, &[a]), derive_seed(master, &[b]));
        }
    }
}

#[test]
fn simpson_is_exact_for_cubics() {
    for quad in [QuadratureSpec::composite(2), QuadratureSpec::default()] {
        let v = quad.integrate(|x| 4.0 * x * x * x - 3.0 * x * x + 1.0, 0.0, 2.0);
        assert!((v - (16.0 - 8.0 + 2.0)).abs() < 1e-12, "{v}");
    }
}
