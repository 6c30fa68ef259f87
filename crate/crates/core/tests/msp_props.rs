mod common;

use common::*;
use martsel::geometry::SemiOpenPolyhedron;
use martsel::msp::{
    build_local_solution, compute_w, compute_w_ri, compute_w_with, find_failure, verify_solution, Aggregation, MspInstance,
    RiPlacement, Solution,
};
use martsel::scalar::int;
use martsel::scenario::NodeMap;
use proptest::prelude::*;
use rand::Rng;

/// Full-dimensional open cones at every node.
fn open_instance(seed: u64) -> MspInstance {
    let mut r = rng(seed);
    let d = r.gen_range(1..=3);
    let tree = random_tree(&mut r, 3, 3, 12);
    let v = NodeMap::from_fn(&tree, |_| loop {
        let k = random_cone(&mut r, d);
        if k.is_full_dimensional() {
            break SemiOpenPolyhedron::relint(k);
        }
    });
    let c = NodeMap::from_fn(&tree, |_| random_drift(&mut r, d));
    MspInstance::new(tree, v, c).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn open_values_need_no_flat(seed in any::<u64>()) {
        let inst = open_instance(seed);
        let flat = compute_w(&inst).unwrap();
        let sharp = compute_w_with(&inst, Aggregation::Sharp).unwrap();
        for n in inst.tree().nodes() {
            prop_assert_eq!(flat.get(n), sharp.get(n));
        }
    }

    #[test]
    fn ri_recursion_is_inside_w(seed in any::<u64>()) {
        let mut r = rng(seed);
        let inst = random_relint_instance(&mut r, 12);
        let big = compute_w(&inst);
        prop_assume!(!unrepresentable(&big));
        let big = big.unwrap();
        for placement in [RiPlacement::AfterDrift, RiPlacement::BeforeDrift] {
            let small = compute_w_ri(&inst, placement).unwrap();
            for n in inst.tree().nodes() {
                prop_assert!(semi_open_subset(small.get(n), big.get(n)), "{:?} set at {} is not inside W", placement, n);
            }
        }
    }

    #[test]
    fn failure_is_the_deepest_empty_node(seed in any::<u64>()) {
        let mut r = rng(seed);
        let inst = random_conical_instance(&mut r, 12);
        let table = compute_w(&inst);
        prop_assume!(!unrepresentable(&table));
        let table = table.unwrap();
        let empty: Vec<_> = inst.tree().nodes().filter(|n| table.get(*n).is_empty()).collect();
        match find_failure(&inst).unwrap() {
            None => prop_assert!(empty.is_empty()),
            Some((t, n)) => {
                prop_assert_eq!(t, n.level);
                prop_assert!(empty.contains(&n));
                prop_assert!(empty.iter().all(|m| m.level < t || (m.level == t && m.index >= n.index)));
            }
        }
    }

    #[test]
    fn solutions_select_from_w_and_round_trip(seed in any::<u64>()) {
        let mut r = rng(seed);
        let inst = random_conical_instance(&mut r, 12);
        let table = compute_w(&inst);
        prop_assume!(!unrepresentable(&table));
        let table = table.unwrap();
        prop_assume!(table.all_nonempty());
        let leaves: Vec<_> = inst.tree().leaves().collect();
        let anchor = leaves[r.gen_range(0..leaves.len())];
        let s = build_local_solution(&inst, &table, anchor, None).unwrap();
        prop_assert!(verify_solution(&inst, &s).is_empty());
        for (n, x) in &s.xi {
            prop_assert!(table.get(*n).member(x), "selection at {} leaves W", n);
        }
        let json = serde_json::to_string(&s).unwrap();
        let back: Solution = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(back, s);
    }
}

#[test]
fn start_point_outside_w_is_rejected() {
    let inst = drift_instance();
    let table = compute_w(&inst).unwrap();
    let root = inst.tree().root();
    let inside = build_local_solution(&inst, &table, root, Some(&[int(0), int(0)])).unwrap();
    assert_eq!(inside.xi[&root], vec![int(0), int(0)]);
    assert!(build_local_solution(&inst, &table, root, Some(&[int(1), int(0)])).is_err());
}
