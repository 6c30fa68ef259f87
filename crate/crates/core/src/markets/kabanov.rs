//! Currency markets given by solvency cones `K` and conical constraints `A`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    at, blunt, check_cones, decompose_z, dominates, free_disposal, in_interior, positive_witness, queried, separator,
    Assumption, FtapOutcome, MarketError, NoArbitrage, PriceSystem, Strategy,
};
use crate::geometry::{ClosedPolyhedron, SemiOpenPolyhedron};
use crate::linalg::{add, l1_norm, scale, sub, zeros, Vector};
use crate::msp::{build_local_solution, compute_w, compute_w_ri, verify_solution, MspInstance, RiPlacement, WTable};
use crate::scalar::Scalar;
use crate::scenario::{NodeId, NodeMap, ScenarioTree};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KabanovModel {
    pub tree: ScenarioTree,
    pub solvency: NodeMap<ClosedPolyhedron>,
    pub constraints: NodeMap<ClosedPolyhedron>,
}

impl KabanovModel {
    pub fn new(tree: ScenarioTree, solvency: NodeMap<ClosedPolyhedron>, constraints: NodeMap<ClosedPolyhedron>) -> Result<Self, MarketError> {
        if !solvency.fits(&tree) {
            return Err(MarketError::Shape);
        }
        let d = solvency[tree.root()].dim();
        check_cones(&tree, &solvency, d, "solvency cone")?;
        check_cones(&tree, &constraints, d, "constraint set")?;
        Ok(KabanovModel { tree, solvency, constraints })
    }

    pub fn dim(&self) -> usize {
        self.solvency[self.tree.root()].dim()
    }

    /// Solvency cones with dual `cone({1} x [bid, ask])` per node.
    pub fn bid_ask(tree: ScenarioTree, spreads: &NodeMap<(Scalar, Scalar)>, constraints: NodeMap<ClosedPolyhedron>) -> Result<Self, MarketError> {
        let k = NodeMap::try_from_fn(&tree, |n| {
            let (b, a) = &spreads[n];
            let dual = ClosedPolyhedron::cone(2, vec![vec![Scalar::one(), b.clone()], vec![Scalar::one(), a.clone()]], vec![]);
            dual.polar().map_err(at(n))
        })?;
        Self::new(tree, k, constraints)
    }

    /// The first failing node for each assumption, if any.
    pub fn check_assumptions(&self) -> Result<(Option<NodeId>, Option<NodeId>), MarketError> {
        let mut disposal = None;
        for n in self.tree.nodes() {
            if !free_disposal(&self.solvency[n], &self.constraints[n]).map_err(at(n))? {
                disposal = Some(n);
                break;
            }
        }
        let d = self.dim();
        let unconstrained = self.tree.nodes().all(|n| self.constraints[n] == ClosedPolyhedron::universe(d));
        let friction = if unconstrained {
            None
        } else {
            self.tree.nodes().find(|n| !self.solvency[*n].lineality().is_empty())
        };
        Ok((disposal, friction))
    }
}

fn instance(m: &KabanovModel) -> Result<MspInstance, MarketError> {
    let v = NodeMap::try_from_fn(&m.tree, |n| m.solvency[n].polar().map(SemiOpenPolyhedron::relint).map_err(at(n)))?;
    let c = NodeMap::try_from_fn(&m.tree, |n| m.constraints[n].polar().map(|p| p.negate()).map_err(at(n)))?;
    Ok(MspInstance::new(m.tree.clone(), v, c)?)
}

/// `V = ri K^*`, `C = -A^*`, after checking both assumptions.
pub fn kabanov_to_msp(m: &KabanovModel) -> Result<MspInstance, MarketError> {
    match m.check_assumptions()? {
        (Some(n), _) => Err(MarketError::AssumptionViolated(Assumption::FreeDisposal, n)),
        (_, Some(n)) => Err(MarketError::AssumptionViolated(Assumption::EfficientFriction, n)),
        _ => instance(m),
    }
}

/// Arbitrage in a dominating market, extracted from the deepest failing
/// node of the ri-recursion.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KabanovCertificate {
    pub failure: NodeId,
    pub separator: Vector,
    /// `k_u` per node below the failure node, summing to the separator along
    /// every path; the failure node carries `-separator` when that is not a
    /// round trip.
    pub decomposition: BTreeMap<NodeId, Vector>,
    /// Node whose `k` is not a costless round trip.
    pub slack: NodeId,
    /// The dominating solvency cones the strategy is replayed in.
    pub enlarged: NodeMap<ClosedPolyhedron>,
    pub strategy: Strategy,
    pub witness: NodeId,
    pub terminal: BTreeMap<NodeId, Vector>,
}

/// Tilt used for the dominating cones.
pub fn blunting_eps() -> Scalar {
    Scalar::new(1, 100)
}

/// Price systems when the problem is solvable, otherwise a certificate.
/// With efficient friction missing, a price system only certifies the
/// weak direction and `robust` is false.
pub fn kabanov_ftap(m: &KabanovModel, nodes: &[NodeId]) -> Result<FtapOutcome<KabanovCertificate>, MarketError> {
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
    let cert = certificate(m, &inst, &ri)?;
    Ok(FtapOutcome::Arbitrage(cert))
}

/// Separator, decomposition and slack node at the deepest failing node of
/// the ri table.
pub(crate) struct Extraction {
    pub failure: NodeId,
    pub z: Vector,
    pub k: BTreeMap<NodeId, Vector>,
    pub slack: NodeId,
}

pub(crate) fn extract(
    tree: &ScenarioTree,
    solvency: &NodeMap<ClosedPolyhedron>,
    constraints: &NodeMap<ClosedPolyhedron>,
    inst: &MspInstance,
    ri: &WTable,
) -> Result<Extraction, MarketError> {
    let (_, node) = ri.failure().ok_or(MarketError::NoSlack)?;
    let agg = ri.sets(node).sharp.as_ref().expect("failure is an interior node");
    let side = agg.closure().minkowski_sum(&inst.c(node).negate());
    let (z, strict_v) = separator(inst.v(node).closure(), &side, agg.closure()).ok_or(MarketError::NoSeparator(node))?;
    let mut k = decompose_z(tree, solvency, constraints, ri, node, &z)?;
    let neg = scale(&z, &-Scalar::one());
    let round_trip = |n: NodeId, v: &Vector| crate::linalg::Reducer::new(solvency[n].lineality()).contains(v);
    if strict_v || !round_trip(node, &neg) {
        k.insert(node, neg);
    }
    let slack = k
        .iter()
        .filter(|(n, v)| !round_trip(**n, v))
        .min_by_key(|(n, _)| **n)
        .map(|(n, _)| *n)
        .ok_or(MarketError::NoSlack)?;
    Ok(Extraction { failure: node, z, k, slack })
}

/// Holdings `h = z` at the failure node and `h_{u-1} - h_u = k_u` below it.
pub(crate) fn holdings_from(tree: &ScenarioTree, ex: &Extraction) -> BTreeMap<NodeId, Vector> {
    let mut h = BTreeMap::new();
    h.insert(ex.failure, ex.z.clone());
    let mut stack = vec![ex.failure];
    while let Some(n) = stack.pop() {
        for c in tree.children(n) {
            let hc = sub(&h[&n], &ex.k[&c]);
            h.insert(c, hc);
            stack.push(c);
        }
    }
    h
}

fn certificate(m: &KabanovModel, inst: &MspInstance, ri: &WTable) -> Result<KabanovCertificate, MarketError> {
    let ex = extract(&m.tree, &m.solvency, &m.constraints, inst, ri)?;
    let eps = blunting_eps();
    let enlarged = m.solvency.map(|_, k| blunt(k, &eps));
    for (n, kh) in enlarged.iter() {
        if !dominates(kh, &m.solvency[n]) {
            return Err(MarketError::InvalidModel(n, "blunted cone does not dominate".into()));
        }
    }
    let mut h = holdings_from(&m.tree, &ex);
    let witness = assemble_arbitrage(&m.tree, &enlarged, &m.constraints, &mut h, ex.slack)?;
    let strategy = Strategy { holdings: h, initial_capital: Scalar::zero() };
    let terminal = replay_kabanov(&m.tree, &enlarged, &m.constraints, &strategy)?;
    Ok(KabanovCertificate {
        failure: ex.failure,
        separator: ex.z,
        decomposition: ex.k,
        slack: ex.slack,
        enlarged,
        strategy,
        witness,
        terminal,
    })
}

/// Pushes the interior slack at `slack` forward to a leaf, adding a
/// nonnegative allowed position at each step, and returns that leaf.
pub fn assemble_arbitrage(
    tree: &ScenarioTree,
    enlarged: &NodeMap<ClosedPolyhedron>,
    constraints: &NodeMap<ClosedPolyhedron>,
    h: &mut BTreeMap<NodeId, Vector>,
    slack: NodeId,
) -> Result<NodeId, MarketError> {
    let d = enlarged[tree.root()].dim();
    let holding = |h: &BTreeMap<NodeId, Vector>, n: Option<NodeId>| n.and_then(|n| h.get(&n).cloned()).unwrap_or_else(|| zeros(d));
    let mut n = slack;
    loop {
        let k = sub(&holding(h, tree.parent(n)), &holding(h, Some(n)));
        if !in_interior(&enlarged[n], &k) {
            return Err(MarketError::NoSlack);
        }
        let x = positive_witness(&k, &enlarged[n], &constraints[n]).ok_or(MarketError::NoPositiveWitness(n))?;
        let hn = add(&holding(h, Some(n)), &x);
        h.insert(n, hn);
        if tree.is_leaf(n) {
            return Ok(n);
        }
        n = tree.children(n)[0];
    }
}

/// Checks `h_{t-1} - h_t ∈ K_t` and `h_t ∈ A_t` everywhere (with
/// `h_{-1} = 0`) and returns the terminal holdings.
pub fn replay_kabanov(
    tree: &ScenarioTree,
    solvency: &NodeMap<ClosedPolyhedron>,
    constraints: &NodeMap<ClosedPolyhedron>,
    s: &Strategy,
) -> Result<BTreeMap<NodeId, Vector>, MarketError> {
    let d = solvency[tree.root()].dim();
    for (n, h) in &s.holdings {
        tree.check(*n).map_err(crate::msp::MspError::from)?;
        if h.len() != d {
            return Err(MarketError::Inadmissible(*n, "holding has the wrong length".into()));
        }
    }
    for n in tree.nodes() {
        let h = s.holding(n, d);
        let prev = tree.parent(n).map(|p| s.holding(p, d)).unwrap_or_else(|| zeros(d));
        if !constraints[n].contains(&h) {
            return Err(MarketError::Inadmissible(n, "holding violates the constraint set".into()));
        }
        if !solvency[n].contains(&sub(&prev, &h)) {
            return Err(MarketError::Inadmissible(n, "rebalancing is not solvent".into()));
        }
    }
    Ok(tree.leaves().map(|l| (l, s.holding(l, d))).collect())
}

pub fn verify_kabanov_certificate(m: &KabanovModel, c: &KabanovCertificate) -> Result<(), String> {
    if !c.enlarged.fits(&m.tree) {
        return Err("enlarged cones do not match the tree".into());
    }
    for (n, kh) in c.enlarged.iter() {
        if !dominates(kh, &m.solvency[n]) {
            return Err(format!("enlarged cone at {n} does not dominate the solvency cone"));
        }
    }
    let terminal = replay_kabanov(&m.tree, &c.enlarged, &m.constraints, &c.strategy).map_err(|e| e.to_string())?;
    if terminal != c.terminal {
        return Err("recorded terminal holdings differ from the replay".into());
    }
    for (l, h) in &terminal {
        if h.iter().any(Scalar::is_negative) {
            return Err(format!("terminal holding at {l} has a negative entry"));
        }
    }
    match terminal.get(&c.witness) {
        Some(h) if h.iter().any(Scalar::is_positive) => {}
        _ => return Err(format!("terminal holding at witness {} is zero", c.witness)),
    }
    verify_decomposition(&m.tree, &m.solvency, c.failure, &c.separator, &c.decomposition)
}

/// `k_u ∈ K_u` and `k_{t+1} + ... + k_T = z` along every path below `node`.
pub fn verify_decomposition(
    tree: &ScenarioTree,
    solvency: &NodeMap<ClosedPolyhedron>,
    node: NodeId,
    z: &[Scalar],
    k: &BTreeMap<NodeId, Vector>,
) -> Result<(), String> {
    for (n, v) in k {
        if !tree.contains(*n) || !solvency[*n].contains(v) {
            return Err(format!("k at {n} is not in the solvency cone"));
        }
    }
    for leaf in tree.leaves_under(node) {
        let mut sum = zeros(z.len());
        for t in node.level + 1..=leaf.level {
            let n = tree.ancestor_at(leaf, t);
            sum = add(&sum, k.get(&n).ok_or(format!("k missing at {n}"))?);
        }
        if sum != z {
            return Err(format!("decomposition does not sum to the separator on the path to {leaf}"));
        }
    }
    Ok(())
}

pub fn verify_kabanov_price_system(m: &KabanovModel, p: &PriceSystem) -> Result<(), String> {
    let inst = instance(m).map_err(|e| e.to_string())?;
    let s = crate::msp::Solution { xi: p.xi.clone(), q: p.measure.clone(), anchor: p.anchor };
    match verify_solution(&inst, &s).first() {
        None => Ok(()),
        Some(v) => Err(v.to_string()),
    }
}

/// `U^j = ri cone{xi, j r + xi}` over the l1-normalized extreme rays `r`
/// of `cl V`, `xi` a relative-interior point of `V`.
fn shrunk(v: &ClosedPolyhedron, xi: &[Scalar], j: u64) -> ClosedPolyhedron {
    let js = Scalar::from_int(j as i64);
    let mut rays = vec![xi.to_vec()];
    for r in v.rays() {
        let r = scale(r, &l1_norm(r).recip());
        rays.push(add(&scale(&r, &js), xi));
    }
    ClosedPolyhedron::cone(v.dim(), rays, v.lineality().to_vec())
}

fn subtree_nonempty(
    inst: &MspInstance,
    duals: &NodeMap<ClosedPolyhedron>,
    samples: &NodeMap<Vector>,
    index: &NodeMap<u64>,
    node: NodeId,
    j: u64,
) -> Result<bool, MarketError> {
    let tree = inst.tree();
    let (sub_tree, ids) = tree.subtree(node);
    let v = NodeMap::from_fn(&sub_tree, |n| {
        let o = ids[n];
        SemiOpenPolyhedron::relint(shrunk(&duals[o], &samples[o], index[o] + j))
    });
    let c = NodeMap::from_fn(&sub_tree, |n| inst.c(ids[n]).clone());
    let sub = MspInstance::new(sub_tree, v, c)?;
    let table = compute_w(&sub)?;
    Ok(!table.get(sub.tree().root()).is_empty())
}

/// A dominating market whose problem is still solvable, built by shrinking
/// each `V` to a cone `U^n` and choosing `n` backward in time.
pub fn construct_dominating_model(m: &KabanovModel) -> Result<KabanovModel, MarketError> {
    let inst = kabanov_to_msp(m)?;
    let tree = &m.tree;
    let duals = NodeMap::try_from_fn(tree, |n| m.solvency[n].polar().map_err(at(n)))?;
    let samples = NodeMap::try_from_fn(tree, |n| inst.v(n).sample_ri_point().map_err(at(n)))?;
    let mut index = NodeMap::from_fn(tree, |_| 1u64);
    const CAP: u64 = 256;
    for t in (0..tree.horizon()).rev() {
        for node in tree.nodes_at(t) {
            let ok = |j: u64| subtree_nonempty(&inst, &duals, &samples, &index, node, j);
            let mut hi = 1;
            while !ok(hi)? {
                hi *= 2;
                if hi > CAP {
                    return Err(MarketError::DominationSearch(node));
                }
            }
            let mut lo = hi / 2;
            // invariant: ok(hi), and lo == 0 or !ok(lo)
            while hi - lo > 1 {
                let mid = (lo + hi) / 2;
                if ok(mid)? {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let (_, ids) = tree.subtree(node);
            for (_, o) in ids.iter() {
                index.set(*o, index[*o] + hi);
            }
        }
    }
    let solvency = NodeMap::try_from_fn(tree, |n| shrunk(&duals[n], &samples[n], index[n]).polar().map_err(at(n)))?;
    for n in tree.nodes() {
        if !dominates(&solvency[n], &m.solvency[n]) {
            return Err(MarketError::DominationSearch(n));
        }
    }
    let out = KabanovModel::new(tree.clone(), solvency, m.constraints.clone())?;
    if !compute_w(&instance(&out)?)?.all_nonempty() {
        return Err(MarketError::DominationSearch(tree.root()));
    }
    Ok(out)
}
