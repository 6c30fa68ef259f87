//! Frictionless markets with a riskless asset worth 1 and conical
//! portfolio constraints.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{at, check_cones, lifted_drift_cone, queried, separator, FtapOutcome, MarketError, NoArbitrage, PriceSystem, Strategy};
use crate::geometry::{ClosedPolyhedron, SemiOpenPolyhedron};
use crate::linalg::{dot, scale, sub, Vector};
use crate::msp::{build_local_solution, compute_w, MspInstance};
use crate::scalar::Scalar;
use crate::scenario::{node_mass, FiniteMeasure, NodeId, NodeMap, ScenarioTree};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrictionlessModel {
    pub tree: ScenarioTree,
    /// Risky prices per node.
    pub prices: NodeMap<Vector>,
    /// Allowed risky holdings per node.
    pub constraints: NodeMap<ClosedPolyhedron>,
}

impl FrictionlessModel {
    pub fn new(tree: ScenarioTree, prices: NodeMap<Vector>, constraints: NodeMap<ClosedPolyhedron>) -> Result<Self, MarketError> {
        if !prices.fits(&tree) {
            return Err(MarketError::Shape);
        }
        let d = prices[tree.root()].len();
        for (n, s) in prices.iter() {
            if s.len() != d {
                return Err(MarketError::InvalidModel(n, format!("price vector has length {}, expected {d}", s.len())));
            }
        }
        check_cones(&tree, &constraints, d, "constraint set")?;
        Ok(FrictionlessModel { tree, prices, constraints })
    }

    /// Number of risky assets.
    pub fn assets(&self) -> usize {
        self.prices[self.tree.root()].len()
    }

    /// The market with no trading constraints.
    pub fn unconstrained(tree: ScenarioTree, prices: NodeMap<Vector>) -> Result<Self, MarketError> {
        let d = prices[tree.root()].len();
        let a = NodeMap::from_fn(&tree, |_| ClosedPolyhedron::universe(d));
        Self::new(tree, prices, a)
    }
}

fn lifted_price(s: &[Scalar]) -> Vector {
    let mut v = vec![Scalar::one()];
    v.extend(s.iter().cloned());
    v
}

/// `V = ri cone{(1, S)}`, `C = {0} x (-A^*)`.
pub fn frictionless_to_msp(m: &FrictionlessModel) -> Result<MspInstance, MarketError> {
    let d = m.assets() + 1;
    let v = NodeMap::from_fn(&m.tree, |n| {
        SemiOpenPolyhedron::relint(ClosedPolyhedron::cone(d, vec![lifted_price(&m.prices[n])], vec![]))
    });
    let c = NodeMap::try_from_fn(&m.tree, |n| lifted_drift_cone(&m.constraints[n]).map_err(at(n)))?;
    Ok(MspInstance::new(m.tree.clone(), v, c)?)
}

/// Arbitrage found by separating at the deepest failing node of `W`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrictionlessCertificate {
    pub failure: NodeId,
    pub separator: Vector,
    pub strategy: Strategy,
    pub witness: NodeId,
    pub payoffs: BTreeMap<NodeId, Scalar>,
}

pub fn frictionless_ftap(m: &FrictionlessModel, nodes: &[NodeId]) -> Result<FtapOutcome<FrictionlessCertificate>, MarketError> {
    let inst = frictionless_to_msp(m)?;
    let table = compute_w(&inst)?;
    let Some((_, node)) = table.failure() else {
        let mut systems = Vec::new();
        for anchor in queried(&m.tree, nodes)? {
            let s = build_local_solution(&inst, &table, anchor, None)?;
            let y = |n: NodeId| s.xi[&n][0].clone();
            let y0 = y(m.tree.root());
            let weights = s.q.weights().iter().map(|(l, q)| (*l, &(q * &y(*l)) / &y0)).collect();
            let measure = FiniteMeasure::new(&m.tree, weights).map_err(crate::msp::MspError::from)?;
            let xi = s.xi.keys().map(|n| (*n, m.prices[*n].clone())).collect();
            systems.push(PriceSystem { anchor, measure, xi });
        }
        return Ok(FtapOutcome::NoArbitrage(NoArbitrage { price_systems: systems, robust: true }));
    };
    let sets = table.sets(node);
    let flat = sets.flat.as_ref().expect("failure is an interior node");
    let side = flat.closure().minkowski_sum(&inst.c(node).negate());
    let (z, _) = separator(inst.v(node).closure(), &side, flat.closure()).ok_or(MarketError::NoSeparator(node))?;
    let strategy = Strategy { holdings: BTreeMap::from([(node, z[1..].to_vec())]), initial_capital: Scalar::zero() };
    let payoffs = replay_frictionless(m, &strategy)?;
    let witness = payoffs
        .iter()
        .find(|(_, v)| v.is_positive())
        .map(|(l, _)| *l)
        .ok_or(MarketError::NoSeparator(node))?;
    Ok(FtapOutcome::Arbitrage(FrictionlessCertificate { failure: node, separator: z, strategy, witness, payoffs }))
}

/// Terminal wealth `h0 + sum_t <h_t, S_{t+1} - S_t>` per leaf.
pub fn replay_frictionless(m: &FrictionlessModel, s: &Strategy) -> Result<BTreeMap<NodeId, Scalar>, MarketError> {
    let d = m.assets();
    for (n, h) in &s.holdings {
        m.tree.check(*n).map_err(crate::msp::MspError::from)?;
        if h.len() != d {
            return Err(MarketError::Inadmissible(*n, "holding has the wrong length".into()));
        }
        if !m.constraints[*n].contains(h) {
            return Err(MarketError::Inadmissible(*n, "holding violates the constraint set".into()));
        }
    }
    let mut out = BTreeMap::new();
    for leaf in m.tree.leaves() {
        let mut v = s.initial_capital.clone();
        for t in 0..m.tree.horizon() {
            let n = m.tree.ancestor_at(leaf, t);
            let next = m.tree.ancestor_at(leaf, t + 1);
            if let Some(h) = s.holdings.get(&n) {
                v += dot(h, &sub(&m.prices[next], &m.prices[n]));
            }
        }
        out.insert(leaf, v);
    }
    Ok(out)
}

/// Checks the measure, the anchor, and `E_P[S_{t+1} - S_t | n] ∈ -A^*`
/// at every supported interior node.
pub fn verify_frictionless_price_system(m: &FrictionlessModel, p: &PriceSystem) -> Result<(), String> {
    let tree = &m.tree;
    p.measure.validate(tree).map_err(|e| e.to_string())?;
    if !tree.contains(p.anchor) || node_mass(tree, &p.measure, p.anchor).is_zero() {
        return Err(format!("anchor {} has zero mass", p.anchor));
    }
    for n in tree.nodes() {
        let mass = node_mass(tree, &p.measure, n);
        if tree.is_leaf(n) || mass.is_zero() {
            continue;
        }
        let mut drift = scale(&m.prices[n], &-Scalar::one());
        for c in tree.children(n) {
            let w = &node_mass(tree, &p.measure, c) / &mass;
            drift = crate::linalg::axpy(&drift, &w, &m.prices[c]);
        }
        let dual = m.constraints[n].polar().map_err(|e| e.to_string())?;
        if !dual.contains(&scale(&drift, &-Scalar::one())) {
            return Err(format!("drift at {n} is not in the negative dual of the constraint set"));
        }
    }
    Ok(())
}

/// Replays a certificate: nonnegative payoffs everywhere and positive at the witness.
pub fn verify_frictionless_certificate(m: &FrictionlessModel, c: &FrictionlessCertificate) -> Result<(), String> {
    if !c.strategy.initial_capital.is_zero() {
        return Err("certificate uses initial capital".into());
    }
    let payoffs = replay_frictionless(m, &c.strategy).map_err(|e| e.to_string())?;
    if payoffs != c.payoffs {
        return Err("recorded payoffs differ from the replay".into());
    }
    if let Some((l, _)) = payoffs.iter().find(|(_, v)| v.is_negative()) {
        return Err(format!("payoff at {l} is negative"));
    }
    match payoffs.get(&c.witness) {
        Some(v) if v.is_positive() => Ok(()),
        _ => Err(format!("payoff at witness {} is not positive", c.witness)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{int, rat};

    fn one_period(s0: Scalar, up: Scalar, down: Scalar, a: ClosedPolyhedron) -> FrictionlessModel {
        let tree = ScenarioTree::uniform(&[2]);
        let prices = NodeMap::from_fn(&tree, |n| vec![match (n.level, n.index) {
            (0, _) => s0.clone(),
            (_, 0) => up.clone(),
            _ => down.clone(),
        }]);
        let a = NodeMap::from_fn(&tree, |_| a.clone());
        FrictionlessModel::new(tree, prices, a).unwrap()
    }

    #[test]
    fn binomial_price_system() {
        let m = one_period(int(1), int(2), rat(1, 2), ClosedPolyhedron::universe(1));
        let FtapOutcome::NoArbitrage(na) = frictionless_ftap(&m, &[]).unwrap() else { panic!() };
        for p in &na.price_systems {
            assert_eq!(p.measure.weight(NodeId::new(1, 0)), rat(1, 3));
            verify_frictionless_price_system(&m, p).unwrap();
        }
        let h = Strategy { holdings: [(NodeId::new(0, 0), vec![int(1)])].into(), initial_capital: int(0) };
        let pay = replay_frictionless(&m, &h).unwrap();
        assert_eq!(pay[&NodeId::new(1, 0)], int(1));
        assert_eq!(pay[&NodeId::new(1, 1)], rat(-1, 2));
    }

    #[test]
    fn rising_prices_give_arbitrage() {
        let m = one_period(int(1), int(2), int(3), ClosedPolyhedron::universe(1));
        let FtapOutcome::Arbitrage(c) = frictionless_ftap(&m, &[]).unwrap() else { panic!() };
        verify_frictionless_certificate(&m, &c).unwrap();
        assert!(c.payoffs.values().all(|v| v.is_positive()));
    }

    #[test]
    fn short_sale_constraint_gives_supermartingale() {
        let m = one_period(int(2), int(1), rat(3, 2), ClosedPolyhedron::nonneg_orthant(1));
        let FtapOutcome::NoArbitrage(na) = frictionless_ftap(&m, &[]).unwrap() else { panic!() };
        for p in &na.price_systems {
            verify_frictionless_price_system(&m, p).unwrap();
        }
    }
}
