//! Markets with convex, piecewise-linear trading costs paid in a riskless
//! numeraire.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::kabanov::{blunting_eps, extract, holdings_from, verify_decomposition};
use super::{at, blunt, check_cones, lift_constraint, lifted_drift_cone, queried, Assumption, FtapOutcome, MarketError, NoArbitrage, PriceSystem, Strategy};
use crate::geometry::{ClosedPolyhedron, SemiOpenPolyhedron};
use crate::linalg::{dot, scale, sub, zeros, Vector};
use crate::msp::{build_local_solution, compute_w, compute_w_ri, verify_solution, MspInstance, RiPlacement};
use crate::scalar::Scalar;
use crate::scenario::{NodeId, NodeMap, ScenarioTree};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffinePiece {
    pub slope: Vector,
    pub intercept: Scalar,
}

/// `x -> max_i <a_i, x> + b_i`, the cash paid for buying `x`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MaxAffine {
    pub pieces: Vec<AffinePiece>,
}

impl MaxAffine {
    pub fn linear(slopes: Vec<Vector>) -> Self {
        MaxAffine { pieces: slopes.into_iter().map(|slope| AffinePiece { slope, intercept: Scalar::zero() }).collect() }
    }

    /// Bid-ask cost for one asset: buy at `ask`, sell at `bid`.
    pub fn bid_ask(bid: Scalar, ask: Scalar) -> Self {
        Self::linear(vec![vec![bid], vec![ask]])
    }

    pub fn dim(&self) -> usize {
        self.pieces.first().map_or(0, |p| p.slope.len())
    }

    pub fn eval(&self, x: &[Scalar]) -> Scalar {
        self.pieces.iter().map(|p| &dot(&p.slope, x) + &p.intercept).reduce(Scalar::max).expect("nonempty cost")
    }

    /// The recession function `max_i <a_i, x>`.
    pub fn horizon(&self, x: &[Scalar]) -> Scalar {
        self.pieces.iter().map(|p| dot(&p.slope, x)).reduce(Scalar::max).expect("nonempty cost")
    }

    fn vanishes_at_origin(&self) -> bool {
        self.pieces.iter().map(|p| p.intercept.clone()).reduce(Scalar::max).is_some_and(|m| m.is_zero())
    }

    /// `cone{(1, a_i)}`
    pub fn price_cone(&self) -> ClosedPolyhedron {
        let rays = self
            .pieces
            .iter()
            .map(|p| {
                let mut v = vec![Scalar::one()];
                v.extend(p.slope.iter().cloned());
                v
            })
            .collect();
        ClosedPolyhedron::cone(self.dim() + 1, rays, vec![])
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostModel {
    pub tree: ScenarioTree,
    pub costs: NodeMap<MaxAffine>,
    pub constraints: NodeMap<ClosedPolyhedron>,
}

impl CostModel {
    pub fn new(tree: ScenarioTree, costs: NodeMap<MaxAffine>, constraints: NodeMap<ClosedPolyhedron>) -> Result<Self, MarketError> {
        if !costs.fits(&tree) {
            return Err(MarketError::Shape);
        }
        let d = costs[tree.root()].dim();
        for (n, c) in costs.iter() {
            if c.pieces.is_empty() || c.pieces.iter().any(|p| p.slope.len() != d) {
                return Err(MarketError::InvalidModel(n, format!("cost needs pieces with {d} slopes")));
            }
            if !c.vanishes_at_origin() {
                return Err(MarketError::InvalidCost(n));
            }
        }
        check_cones(&tree, &constraints, d, "constraint set")?;
        Ok(CostModel { tree, costs, constraints })
    }

    pub fn assets(&self) -> usize {
        self.costs[self.tree.root()].dim()
    }

    /// Lifted solvency cones `{(y0, y) : y0 + <a_i, y> >= 0}`.
    pub fn solvency(&self) -> Result<NodeMap<ClosedPolyhedron>, MarketError> {
        NodeMap::try_from_fn(&self.tree, |n| self.costs[n].price_cone().polar().map_err(at(n)))
    }

    /// The first failing node for each assumption, if any. Free disposal
    /// needs every slope strictly positive.
    pub fn check_assumptions(&self) -> Result<(Option<NodeId>, Option<NodeId>), MarketError> {
        let disposal = self
            .tree
            .nodes()
            .find(|n| self.costs[*n].pieces.iter().any(|p| p.slope.iter().any(|a| !a.is_positive())));
        let d = self.assets();
        let unconstrained = self.tree.nodes().all(|n| self.constraints[n] == ClosedPolyhedron::universe(d));
        let solvency = self.solvency()?;
        let friction = if unconstrained { None } else { self.tree.nodes().find(|n| !solvency[*n].lineality().is_empty()) };
        Ok((disposal, friction))
    }
}

fn instance(m: &CostModel) -> Result<MspInstance, MarketError> {
    let v = NodeMap::from_fn(&m.tree, |n| SemiOpenPolyhedron::relint(m.costs[n].price_cone()));
    let c = NodeMap::try_from_fn(&m.tree, |n| lifted_drift_cone(&m.constraints[n]).map_err(at(n)))?;
    Ok(MspInstance::new(m.tree.clone(), v, c)?)
}

/// `V = ri cone{(1, a_i)}`, `C = {0} x (-A^*)`, after checking both assumptions.
pub fn cost_to_msp(m: &CostModel) -> Result<MspInstance, MarketError> {
    match m.check_assumptions()? {
        (Some(n), _) => Err(MarketError::AssumptionViolated(Assumption::FreeDisposal, n)),
        (_, Some(n)) => Err(MarketError::AssumptionViolated(Assumption::EfficientFriction, n)),
        _ => instance(m),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaledPayoffs {
    pub alpha: Scalar,
    pub payoffs: BTreeMap<NodeId, Scalar>,
}

/// A round trip of positions ending flat, with terminal cash checked for
/// several scalings. When the slack is not strict for the given costs the
/// replay uses `dominating`, a linear cost no larger than the horizon cost.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostCertificate {
    pub failure: NodeId,
    pub separator: Vector,
    pub decomposition: BTreeMap<NodeId, Vector>,
    pub slack: NodeId,
    pub strategy: Strategy,
    pub dominating: Option<Vec<Vec<MaxAffine>>>,
    pub witness: NodeId,
    pub payoffs: Vec<ScaledPayoffs>,
}

pub fn scaling_factors() -> Vec<Scalar> {
    [1, 2, 10].into_iter().map(Scalar::from_int).collect()
}

pub fn cost_ftap(m: &CostModel, nodes: &[NodeId]) -> Result<FtapOutcome<CostCertificate>, MarketError> {
    let (disposal, friction) = m.check_assumptions()?;
    if let Some(n) = disposal {
        return Err(MarketError::AssumptionViolated(Assumption::FreeDisposal, n));
    }
    let inst = instance(m)?;
    let table = compute_w(&inst)?;
    if table.all_nonempty() {
        let mut systems = Vec::new();
        for anchor in queried(&m.tree, nodes)? {
            let s = build_local_solution(&inst, &table, anchor, None)?;
            systems.push(PriceSystem { anchor, measure: s.q, xi: s.xi });
        }
        return Ok(FtapOutcome::NoArbitrage(NoArbitrage { price_systems: systems, robust: friction.is_none() }));
    }
    let ri = compute_w_ri(&inst, RiPlacement::AfterDrift)?;
    let solvency = m.solvency()?;
    let lifted = m.constraints.map(|_, a| lift_constraint(a));
    let ex = extract(&m.tree, &solvency, &lifted, &inst, &ri)?;
    let lifted_h = holdings_from(&m.tree, &ex);
    let holdings = lifted_h.into_iter().map(|(n, h)| (n, h[1..].to_vec())).collect();
    let strategy = Strategy { holdings, initial_capital: Scalar::zero() };

    let strict = |costs: &NodeMap<MaxAffine>| -> Result<Option<(NodeId, Vec<ScaledPayoffs>)>, MarketError> {
        let mut all = Vec::new();
        for alpha in scaling_factors() {
            let payoffs = replay_cost(&m.tree, costs, &m.constraints, &strategy.scaled(&alpha))?;
            all.push(ScaledPayoffs { alpha, payoffs });
        }
        let first = &all[0].payoffs;
        if first.values().any(Scalar::is_negative) {
            return Ok(None);
        }
        Ok(first.iter().find(|(_, v)| v.is_positive()).map(|(l, _)| (*l, all.clone())))
    };
    let (dominating, (witness, payoffs)) = match strict(&m.costs)? {
        Some(found) => (None, found),
        None => {
            let dom = dominating_costs(m, &solvency)?;
            let found = strict(&dom)?.ok_or(MarketError::NoSlack)?;
            (Some(dom), found)
        }
    };
    Ok(FtapOutcome::Arbitrage(CostCertificate {
        failure: ex.failure,
        separator: ex.z,
        decomposition: ex.k,
        slack: ex.slack,
        strategy,
        dominating: dominating.map(|d| d.levels().to_vec()),
        witness,
        payoffs,
    }))
}

/// Linear costs from the extreme rays `(y0, y)` of the dual of the blunted
/// solvency cone, with slopes `y / y0`.
fn dominating_costs(m: &CostModel, solvency: &NodeMap<ClosedPolyhedron>) -> Result<NodeMap<MaxAffine>, MarketError> {
    let eps = blunting_eps();
    NodeMap::try_from_fn(&m.tree, |n| {
        let dual = blunt(&solvency[n], &eps).polar().map_err(at(n))?;
        let mut slopes = Vec::new();
        for r in dual.rays() {
            if !r[0].is_positive() {
                return Err(MarketError::InvalidModel(n, "dominating cost has a ray with no cash component".into()));
            }
            slopes.push(scale(&r[1..], &r[0].recip()));
        }
        Ok(MaxAffine::linear(slopes))
    })
}

/// Terminal cash per leaf, `-sum_t cost_t(h_t - h_{t-1})`, for holdings that
/// start and end flat.
pub fn replay_cost(
    tree: &ScenarioTree,
    costs: &NodeMap<MaxAffine>,
    constraints: &NodeMap<ClosedPolyhedron>,
    s: &Strategy,
) -> Result<BTreeMap<NodeId, Scalar>, MarketError> {
    let d = costs[tree.root()].dim();
    for (n, h) in &s.holdings {
        tree.check(*n).map_err(crate::msp::MspError::from)?;
        if h.len() != d {
            return Err(MarketError::Inadmissible(*n, "holding has the wrong length".into()));
        }
        if !constraints[*n].contains(h) {
            return Err(MarketError::Inadmissible(*n, "holding violates the constraint set".into()));
        }
        if tree.is_leaf(*n) && h.iter().any(|x| !x.is_zero()) {
            return Err(MarketError::Inadmissible(*n, "position is not closed at the horizon".into()));
        }
    }
    let mut out = BTreeMap::new();
    for leaf in tree.leaves() {
        let mut cash = s.initial_capital.clone();
        let mut prev = zeros(d);
        for t in 0..=tree.horizon() {
            let n = tree.ancestor_at(leaf, t);
            let h = s.holding(n, d);
            cash -= costs[n].eval(&sub(&h, &prev));
            prev = h;
        }
        out.insert(leaf, cash);
    }
    Ok(out)
}

pub fn verify_cost_certificate(m: &CostModel, c: &CostCertificate) -> Result<(), String> {
    if !c.strategy.initial_capital.is_zero() {
        return Err("certificate uses initial capital".into());
    }
    let costs = match &c.dominating {
        None => m.costs.clone(),
        Some(levels) => {
            let dom = NodeMap::from_levels(levels.clone());
            if !dom.fits(&m.tree) {
                return Err("dominating costs do not match the tree".into());
            }
            for (n, cost) in dom.iter() {
                if cost.pieces.iter().any(|p| !p.intercept.is_zero()) {
                    return Err(format!("dominating cost at {n} is not linear"));
                }
                // a cheaper market: every dominating piece is a price in cl V
                if cost.pieces.iter().any(|p| !m.costs[n].price_cone().contains(&[vec![Scalar::one()], p.slope.clone()].concat())) {
                    return Err(format!("dominating cost at {n} exceeds the horizon cost"));
                }
            }
            dom
        }
    };
    let mut scales = Vec::new();
    for sp in &c.payoffs {
        let payoffs = replay_cost(&m.tree, &costs, &m.constraints, &c.strategy.scaled(&sp.alpha)).map_err(|e| e.to_string())?;
        if payoffs != sp.payoffs {
            return Err(format!("recorded payoffs for scale {} differ from the replay", sp.alpha));
        }
        if let Some((l, _)) = payoffs.iter().find(|(_, v)| v.is_negative()) {
            return Err(format!("payoff at {l} is negative for scale {}", sp.alpha));
        }
        if !payoffs.get(&c.witness).is_some_and(Scalar::is_positive) {
            return Err(format!("payoff at witness {} is not positive for scale {}", c.witness, sp.alpha));
        }
        scales.push(sp.alpha.clone());
    }
    if scales != scaling_factors() {
        return Err("certificate does not cover every scale".into());
    }
    let solvency = m.solvency().map_err(|e| e.to_string())?;
    verify_decomposition(&m.tree, &solvency, c.failure, &c.separator, &c.decomposition)
}

pub fn verify_cost_price_system(m: &CostModel, p: &PriceSystem) -> Result<(), String> {
    let inst = instance(m).map_err(|e| e.to_string())?;
    let s = crate::msp::Solution { xi: p.xi.clone(), q: p.measure.clone(), anchor: p.anchor };
    match verify_solution(&inst, &s).first() {
        None => Ok(()),
        Some(v) => Err(v.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{int, rat};

    fn spread_model(root: (Scalar, Scalar), kids: &[(Scalar, Scalar)], shift: Option<Scalar>) -> CostModel {
        let tree = ScenarioTree::uniform(&[kids.len()]);
        let costs = NodeMap::from_fn(&tree, |n| {
            let (b, a) = if n.level == 0 { root.clone() } else { kids[n.index].clone() };
            let mut c = MaxAffine::bid_ask(b, a);
            if let Some(b) = &shift {
                // large purchases cost one more per unit
                c.pieces.push(AffinePiece { slope: vec![&c.pieces[1].slope[0] + &int(1)], intercept: b.clone() });
            }
            c
        });
        let a = NodeMap::from_fn(&tree, |_| ClosedPolyhedron::universe(1));
        CostModel::new(tree, costs, a).unwrap()
    }

    #[test]
    fn costs_must_vanish_at_origin() {
        let tree = ScenarioTree::uniform(&[1]);
        let bad = MaxAffine { pieces: vec![AffinePiece { slope: vec![int(1)], intercept: int(-1) }] };
        let costs = NodeMap::from_fn(&tree, |_| bad.clone());
        let a = NodeMap::from_fn(&tree, |_| ClosedPolyhedron::universe(1));
        assert_eq!(CostModel::new(tree, costs, a), Err(MarketError::InvalidCost(NodeId::new(0, 0))));
    }

    #[test]
    fn overlapping_spreads_have_price_system() {
        let m = spread_model((int(1), int(2)), &[(int(1), int(3)), (rat(1, 2), rat(3, 2))], Some(int(-1)));
        let FtapOutcome::NoArbitrage(na) = cost_ftap(&m, &[]).unwrap() else { panic!() };
        for p in &na.price_systems {
            verify_cost_price_system(&m, p).unwrap();
        }
    }

    #[test]
    fn rising_spread_gives_scalable_arbitrage() {
        let m = spread_model((int(1), int(2)), &[(int(4), int(5)), (int(6), int(7))], Some(int(-1)));
        let FtapOutcome::Arbitrage(c) = cost_ftap(&m, &[]).unwrap() else { panic!() };
        verify_cost_certificate(&m, &c).unwrap();
        assert!(c.dominating.is_none());
    }

    #[test]
    fn touching_spreads_need_a_dominating_cost() {
        let m = spread_model((int(1), int(2)), &[(int(2), int(3)), (int(2), int(3))], None);
        let FtapOutcome::Arbitrage(c) = cost_ftap(&m, &[]).unwrap() else { panic!() };
        verify_cost_certificate(&m, &c).unwrap();
        assert!(c.dominating.is_some());
    }
}
