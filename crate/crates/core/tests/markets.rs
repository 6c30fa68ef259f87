mod common;

use common::*;
use martsel::geometry::ClosedPolyhedron;
use martsel::markets::frictionless::{
    frictionless_ftap, frictionless_to_msp, verify_frictionless_certificate, verify_frictionless_price_system, FrictionlessModel,
};
use martsel::markets::kabanov::{kabanov_ftap, kabanov_to_msp, verify_kabanov_certificate, verify_kabanov_price_system, KabanovModel};
use martsel::markets::{Assumption, FtapOutcome, MarketError};
use martsel::msp::is_solvable;
use martsel::oracle::{oracle_frictionless_arbitrage, oracle_kabanov_arbitrage, OracleCaps};
use martsel::scalar::{int, rat};
use martsel::scenario::{NodeMap, ScenarioTree};
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn random_frictionless(r: &mut ChaCha8Rng) -> FrictionlessModel {
    let tree = random_tree(r, 2, 3, 10);
    let d = r.gen_range(1..=2);
    let prices = NodeMap::from_fn(&tree, |_| (0..d).map(|_| rat(r.gen_range(1..=8), 2)).collect::<Vec<_>>());
    let a = if r.gen_bool(0.7) { ClosedPolyhedron::universe(d) } else { ClosedPolyhedron::nonneg_orthant(d) };
    FrictionlessModel::new(tree.clone(), prices, NodeMap::from_fn(&tree, |_| a.clone())).unwrap()
}

fn random_spreads(r: &mut ChaCha8Rng) -> KabanovModel {
    let tree = random_tree(r, 2, 3, 10);
    let spreads = NodeMap::from_fn(&tree, |_| {
        let bid = r.gen_range(1..=6);
        (int(bid), int(bid + r.gen_range(1..=3)))
    });
    bid_ask_model(&tree, &spreads)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn frictionless_verdicts_match_the_oracle(seed in any::<u64>()) {
        let m = random_frictionless(&mut rng(seed));
        let outcome = frictionless_ftap(&m, &[]).unwrap();
        let found = oracle_frictionless_arbitrage(&m, &OracleCaps::default()).unwrap();
        prop_assert_eq!(found, outcome.is_arbitrage());
        match outcome {
            FtapOutcome::NoArbitrage(na) => {
                for p in &na.price_systems {
                    prop_assert!(verify_frictionless_price_system(&m, p).is_ok());
                }
            }
            FtapOutcome::Arbitrage(c) => {
                prop_assert!(verify_frictionless_certificate(&m, &c).is_ok());
                prop_assert!(!is_solvable(&frictionless_to_msp(&m).unwrap()).unwrap());
            }
        }
    }

    /// Strict spreads: the weak and robust notions can still differ when a
    /// bid meets an earlier ask, and only in the direction where the solver
    /// reports an arbitrage the oracle cannot realize in the original cones.
    #[test]
    fn kabanov_verdicts_match_the_oracle_up_to_the_boundary(seed in any::<u64>()) {
        let m = random_spreads(&mut rng(seed));
        let outcome = kabanov_ftap(&m, &[]).unwrap();
        let found = oracle_kabanov_arbitrage(&m, &OracleCaps::default()).unwrap();
        match &outcome {
            FtapOutcome::NoArbitrage(na) => {
                prop_assert!(!found, "oracle found an arbitrage the solver missed");
                prop_assert!(na.robust);
                for p in &na.price_systems {
                    prop_assert!(verify_kabanov_price_system(&m, p).is_ok());
                }
            }
            FtapOutcome::Arbitrage(c) => {
                prop_assert!(verify_kabanov_certificate(&m, c).is_ok());
                if !found {
                    // boundary case: some bid equals an ask met earlier on a path
                    let touching = m.tree.nodes().any(|n| {
                        let k = m.solvency[n].polar().unwrap();
                        m.tree.nodes().filter(|a| m.tree.is_ancestor(*a, n) && *a != n).any(|a| {
                            let ka = m.solvency[a].polar().unwrap();
                            k.intersect(&ka).affine_dim() == Some(1)
                        })
                    });
                    prop_assert!(touching, "solver arbitrage without a touching spread");
                }
            }
        }
    }
}

#[test]
fn touching_spreads_are_flagged_as_a_boundary_case() {
    let m = one_period_bid_ask((2, 3), &[(int(3), int(4)), (int(3), int(4))]);
    assert!(kabanov_ftap(&m, &[]).unwrap().is_arbitrage());
    assert!(!oracle_kabanov_arbitrage(&m, &OracleCaps::default()).unwrap());
}

#[test]
fn zero_spread_without_constraints_is_frictionless() {
    let m = one_period_bid_ask((2, 2), &[(int(3), int(3)), (int(1), int(1))]);
    let FtapOutcome::NoArbitrage(na) = kabanov_ftap(&m, &[]).unwrap() else { panic!("expected no arbitrage") };
    assert!(na.robust);
}

#[test]
fn constrained_zero_spread_gives_a_one_sided_verdict() {
    let tree = ScenarioTree::uniform(&[2]);
    let spreads = NodeMap::from_fn(&tree, |n| if n.level == 0 { (int(2), int(2)) } else { (int(1 + 2 * n.index as i64), int(2 + 2 * n.index as i64)) });
    let a = NodeMap::from_fn(&tree, |_| ClosedPolyhedron::cone(2, vec![vec![int(1), int(0)], vec![int(0), int(1)], vec![int(1), int(-1)]], vec![]));
    let m = KabanovModel::bid_ask(tree, &spreads, a).unwrap();
    assert!(matches!(kabanov_to_msp(&m), Err(MarketError::AssumptionViolated(Assumption::EfficientFriction, _))));
    if let FtapOutcome::NoArbitrage(na) = kabanov_ftap(&m, &[]).unwrap() {
        assert!(!na.robust);
    }
}
