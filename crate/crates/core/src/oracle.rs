//! Brute-force verifiers independent of the W-recursion.
//!
//! The solvability oracle works with moments `m(n) = Q[n] xi(n)` and node
//! masses `q(n) = Q[n]`, which turns the bilinear drift condition into
//! linear constraints on the homogenized sets. Strict memberships are settled
//! by maximizing capped slacks, which lands in the relative interior of the
//! feasible cone; a node whose best face is excluded is branched on.

use std::collections::{BTreeMap, BTreeSet};

use crate::geometry::ClosedPolyhedron;
use crate::linalg::{scale, sub, Vector};
use crate::markets::frictionless::FrictionlessModel;
use crate::markets::kabanov::KabanovModel;
use crate::lp::{LinearProgram, LpOutcome, Relation};
use crate::msp::{MspInstance, Solution};
use crate::scalar::Scalar;
use crate::scenario::{FiniteMeasure, NodeId, ScenarioTree};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("instance exceeds oracle caps (horizon {horizon}/{max_horizon}, branching {branching}/{max_branching}, dimension {dim}/{max_dim})")]
    TooLarge { horizon: usize, branching: usize, dim: usize, max_horizon: usize, max_branching: usize, max_dim: usize },
    #[error("node {0} is not in the tree")]
    UnknownNode(NodeId),
    #[error("bad MARTSEL_ORACLE_CAP value {0:?}")]
    BadCap(String),
}

/// Size limits for the oracles.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OracleCaps {
    pub horizon: usize,
    pub branching: usize,
    pub dim: usize,
}

impl Default for OracleCaps {
    fn default() -> Self {
        OracleCaps { horizon: 3, branching: 3, dim: 3 }
    }
}

impl OracleCaps {
    /// Defaults overridden by `MARTSEL_ORACLE_CAP`, either one number for all
    /// three caps or `HORIZON,BRANCHING,DIM`.
    pub fn from_env() -> Result<Self, OracleError> {
        match std::env::var("MARTSEL_ORACLE_CAP") {
            Err(_) => Ok(Self::default()),
            Ok(s) => Self::parse(&s),
        }
    }

    pub fn parse(s: &str) -> Result<Self, OracleError> {
        let bad = || OracleError::BadCap(s.to_string());
        let parts: Vec<usize> = s.split(',').map(|p| p.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?;
        match parts[..] {
            [n] => Ok(OracleCaps { horizon: n, branching: n, dim: n }),
            [horizon, branching, dim] => Ok(OracleCaps { horizon, branching, dim }),
            _ => Err(bad()),
        }
    }

    pub fn check(&self, tree: &ScenarioTree, dim: usize) -> Result<(), OracleError> {
        let (horizon, branching) = (tree.horizon(), tree.max_branching());
        if horizon > self.horizon || branching > self.branching || dim > self.dim {
            return Err(OracleError::TooLarge {
                horizon,
                branching,
                dim,
                max_horizon: self.horizon,
                max_branching: self.branching,
                max_dim: self.dim,
            });
        }
        Ok(())
    }
}

/// Constraint state of one branch of the search.
#[derive(Clone, Default)]
struct Pattern {
    unsupported: BTreeSet<NodeId>,
    tight: BTreeSet<(NodeId, usize)>,
}

struct MomentProgram<'a> {
    inst: &'a MspInstance,
    leaves: Vec<NodeId>,
    nodes: Vec<NodeId>,
    anchor: NodeId,
}

struct Moments {
    q: BTreeMap<NodeId, Scalar>,
    m: BTreeMap<NodeId, Vector>,
}

impl<'a> MomentProgram<'a> {
    fn mass_terms(&self, n: NodeId) -> Vec<(usize, Scalar)> {
        let tree = self.inst.tree();
        self.leaves
            .iter()
            .enumerate()
            .filter(|(_, l)| tree.is_ancestor(n, **l))
            .map(|(i, _)| (i, Scalar::one()))
            .collect()
    }

    fn moment_var(&self, k: usize, i: usize) -> usize {
        self.leaves.len() + k * self.inst.dim() + i
    }

    /// Maximizes the capped slacks under `pat`; `None` when infeasible.
    fn solve(&self, pat: &Pattern) -> Option<Moments> {
        let d = self.inst.dim();
        let tree = self.inst.tree();
        let nvars = self.leaves.len() + self.nodes.len() * d;
        let mut lp = LinearProgram::new(nvars);
        for i in 0..self.leaves.len() {
            lp.set_nonneg(i);
        }
        let mut objective = Vec::new();
        let mut slack = |lp: &mut LinearProgram, mut row: Vec<(usize, Scalar)>| {
            let s = lp.add_var(true);
            lp.constrain(vec![(s, Scalar::one())], Relation::Le, Scalar::one());
            row.push((s, -Scalar::one()));
            lp.constrain(row, Relation::Ge, Scalar::zero());
            objective.push((s, Scalar::one()));
        };
        let index: BTreeMap<NodeId, usize> = self.nodes.iter().enumerate().map(|(k, n)| (*n, k)).collect();
        let moment = |n: NodeId, coeffs: &[Scalar], sign: &Scalar| -> Vec<(usize, Scalar)> {
            coeffs.iter().enumerate().map(|(i, a)| (self.moment_var(index[&n], i), a * sign)).collect()
        };
        for &n in &self.nodes {
            let qn = self.mass_terms(n);
            if pat.unsupported.contains(&n) {
                lp.constrain(qn, Relation::Eq, Scalar::zero());
                for i in 0..d {
                    lp.constrain(vec![(self.moment_var(index[&n], i), Scalar::one())], Relation::Eq, Scalar::zero());
                }
                continue;
            }
            let one = Scalar::one();
            let with_mass = |mut row: Vec<(usize, Scalar)>, b: &Scalar| {
                row.extend(qn.iter().map(|(i, _)| (*i, -b)));
                row
            };
            let cl = self.inst.v(n).closure();
            for e in cl.equalities() {
                lp.constrain(with_mass(moment(n, &e.normal, &one), &e.offset), Relation::Eq, Scalar::zero());
            }
            for (i, h) in cl.inequalities().iter().enumerate() {
                let row = with_mass(moment(n, &h.normal, &one), &h.offset);
                if pat.tight.contains(&(n, i)) {
                    lp.constrain(row, Relation::Eq, Scalar::zero());
                } else {
                    slack(&mut lp, row);
                }
            }
            slack(&mut lp, qn.clone());
            if tree.is_leaf(n) {
                continue;
            }
            let c = self.inst.c(n);
            let drift = |normal: &[Scalar]| {
                let mut row = moment(n, normal, &-Scalar::one());
                for ch in tree.children(n) {
                    row.extend(moment(ch, normal, &one));
                }
                row
            };
            for e in c.equalities() {
                lp.constrain(with_mass(drift(&e.normal), &e.offset), Relation::Eq, Scalar::zero());
            }
            for h in c.inequalities() {
                lp.constrain(with_mass(drift(&h.normal), &h.offset), Relation::Ge, Scalar::zero());
            }
        }
        lp.constrain(self.mass_terms(self.anchor), Relation::Ge, Scalar::one());
        lp.maximize(objective);
        let LpOutcome::Optimal { x, .. } = lp.solve() else {
            return None;
        };
        let q = self
            .nodes
            .iter()
            .map(|&n| (n, self.mass_terms(n).iter().map(|(i, _)| x[*i].clone()).sum()))
            .collect();
        let m = self
            .nodes
            .iter()
            .enumerate()
            .map(|(k, &n)| (n, (0..d).map(|i| x[self.moment_var(k, i)].clone()).collect()))
            .collect();
        Some(Moments { q, m })
    }

    fn search(&self, mut pat: Pattern) -> Option<Solution> {
        loop {
            let sol = self.solve(&pat)?;
            let dead: Vec<NodeId> =
                self.nodes.iter().filter(|n| !pat.unsupported.contains(n) && sol.q[n].is_zero()).copied().collect();
            if !dead.is_empty() {
                pat.unsupported.extend(dead);
                continue;
            }
            for &n in &self.nodes {
                if pat.unsupported.contains(&n) {
                    continue;
                }
                let xi = scale(&sol.m[&n], &sol.q[&n].recip());
                let v = self.inst.v(n);
                if v.member(&xi) {
                    continue;
                }
                // the best reachable face at n is excluded: either n carries
                // no mass, or its selection sits on a smaller face
                let mut branch = pat.clone();
                branch.unsupported.insert(n);
                if let Some(s) = self.search(branch) {
                    return Some(s);
                }
                let tight = v.closure().tight_at(&xi);
                for i in 0..v.closure().inequalities().len() {
                    if tight.contains(i) {
                        continue;
                    }
                    let mut branch = pat.clone();
                    branch.tight.insert((n, i));
                    if let Some(s) = self.search(branch) {
                        return Some(s);
                    }
                }
                return None;
            }
            return Some(self.extract(&sol, &pat));
        }
    }

    fn extract(&self, sol: &Moments, pat: &Pattern) -> Solution {
        let total: Scalar = self.leaves.iter().map(|l| sol.q[l].clone()).sum();
        let weights = self
            .leaves
            .iter()
            .filter(|l| !pat.unsupported.contains(l))
            .map(|l| (*l, &sol.q[l] / &total))
            .collect();
        let xi = self
            .nodes
            .iter()
            .filter(|n| !pat.unsupported.contains(n))
            .map(|n| (*n, scale(&sol.m[n], &sol.q[n].recip())))
            .collect();
        let q = FiniteMeasure::new(self.inst.tree(), weights).expect("oracle measure is normalized");
        Solution { xi, q, anchor: self.anchor }
    }
}

/// A local solution charging `anchor`, found by exhaustive moment LPs.
pub fn oracle_solution(inst: &MspInstance, anchor: NodeId, caps: &OracleCaps) -> Result<Option<Solution>, OracleError> {
    let tree = inst.tree();
    caps.check(tree, inst.dim())?;
    if !tree.contains(anchor) {
        return Err(OracleError::UnknownNode(anchor));
    }
    let prog = MomentProgram { inst, leaves: tree.leaves().collect(), nodes: tree.nodes().collect(), anchor };
    Ok(prog.search(Pattern::default()))
}

pub fn oracle_solvable(inst: &MspInstance, anchor: NodeId, caps: &OracleCaps) -> Result<bool, OracleError> {
    Ok(oracle_solution(inst, anchor, caps)?.is_some())
}

/// Oracle verdict at every node. A solution found for one anchor settles
/// every node in its support.
pub fn oracle_all_anchors(inst: &MspInstance, caps: &OracleCaps) -> Result<BTreeMap<NodeId, bool>, OracleError> {
    let tree = inst.tree();
    let mut out = BTreeMap::new();
    for n in tree.nodes() {
        if out.contains_key(&n) {
            continue;
        }
        match oracle_solution(inst, n, caps)? {
            Some(s) => {
                for l in s.q.support() {
                    for t in 0..=l.level {
                        out.insert(tree.ancestor_at(l, t), true);
                    }
                }
            }
            None => {
                out.insert(n, false);
            }
        }
    }
    Ok(out)
}

/// Requires `x`, at variables `offset..offset + d`, to lie in the cone `p`.
fn constrain_cone(lp: &mut LinearProgram, p: &ClosedPolyhedron, offset: usize, sign: &Scalar) {
    for h in p.inequalities() {
        lp.constrain_dense(offset, &scale(&h.normal, sign), Relation::Ge, Scalar::zero());
    }
    for h in p.equalities() {
        lp.constrain_dense(offset, &h.normal, Relation::Eq, Scalar::zero());
    }
}

/// Whether some admissible strategy with holdings of l1 norm at most one has
/// a nonnegative payoff that is positive somewhere: maximizes the summed
/// payoff over such strategies.
pub fn oracle_frictionless_arbitrage(m: &FrictionlessModel, caps: &OracleCaps) -> Result<bool, OracleError> {
    let tree = &m.tree;
    let d = m.assets();
    caps.check(tree, d)?;
    let interior: Vec<NodeId> = tree.nodes().filter(|n| !tree.is_leaf(*n)).collect();
    let mut lp = LinearProgram::new(0);
    let mut var = BTreeMap::new();
    for &n in &interior {
        let h = lp.add_vars(d, false);
        let u = lp.add_vars(d, true);
        for i in 0..d {
            lp.constrain(vec![(u + i, Scalar::one()), (h + i, -Scalar::one())], Relation::Ge, Scalar::zero());
            lp.constrain(vec![(u + i, Scalar::one()), (h + i, Scalar::one())], Relation::Ge, Scalar::zero());
        }
        lp.constrain((u..u + d).map(|i| (i, Scalar::one())).collect(), Relation::Le, Scalar::one());
        constrain_cone(&mut lp, &m.constraints[n], h, &Scalar::one());
        var.insert(n, h);
    }
    let mut total: BTreeMap<usize, Scalar> = BTreeMap::new();
    for leaf in tree.leaves() {
        let mut row: BTreeMap<usize, Scalar> = BTreeMap::new();
        for t in 0..tree.horizon() {
            let n = tree.ancestor_at(leaf, t);
            let step = sub(&m.prices[tree.ancestor_at(leaf, t + 1)], &m.prices[n]);
            for (i, x) in step.into_iter().enumerate() {
                *row.entry(var[&n] + i).or_insert_with(Scalar::zero) += x;
            }
        }
        for (i, x) in &row {
            *total.entry(*i).or_insert_with(Scalar::zero) += x.clone();
        }
        lp.constrain(row.into_iter().collect(), Relation::Ge, Scalar::zero());
    }
    lp.maximize(total.into_iter().collect());
    Ok(matches!(lp.solve(), LpOutcome::Optimal { value, .. } if value.is_positive()))
}

/// Whether self-financing transfers `h_{t-1} - h_t ∈ K_t` with `h_t ∈ A_t`
/// reach nonnegative terminal holdings with positive total.
pub fn oracle_kabanov_arbitrage(m: &KabanovModel, caps: &OracleCaps) -> Result<bool, OracleError> {
    let tree = &m.tree;
    let d = m.dim();
    caps.check(tree, d)?;
    let mut lp = LinearProgram::new(0);
    let mut var = BTreeMap::new();
    for n in tree.nodes() {
        var.insert(n, lp.add_vars(d, false));
    }
    let mut total = Vec::new();
    for n in tree.nodes() {
        let h = var[&n];
        constrain_cone(&mut lp, &m.constraints[n], h, &Scalar::one());
        // h_parent - h in K
        let relation = |lp: &mut LinearProgram, normal: &[Scalar], rel: Relation| {
            let mut coeffs: Vec<(usize, Scalar)> = normal.iter().enumerate().map(|(i, a)| (h + i, -a)).collect();
            if let Some(p) = tree.parent(n) {
                coeffs.extend(normal.iter().enumerate().map(|(i, a)| (var[&p] + i, a.clone())));
            }
            lp.constrain(coeffs, rel, Scalar::zero());
        };
        for i in m.solvency[n].inequalities() {
            relation(&mut lp, &i.normal, Relation::Ge);
        }
        for e in m.solvency[n].equalities() {
            relation(&mut lp, &e.normal, Relation::Eq);
        }
        if tree.is_leaf(n) {
            for i in 0..d {
                lp.constrain(vec![(h + i, Scalar::one())], Relation::Ge, Scalar::zero());
                total.push((h + i, Scalar::one()));
            }
        }
    }
    lp.constrain(total, Relation::Ge, Scalar::one());
    Ok(lp.feasible_point().is_some())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SemiOpenPolyhedron;
    use crate::msp::verify_solution;
    use crate::scalar::{int, ivec, rat};
    use crate::scenario::NodeMap;

    fn points_instance(root: Scalar, leaves: &[Scalar]) -> MspInstance {
        let tree = ScenarioTree::uniform(&[leaves.len()]);
        let v = NodeMap::from_fn(&tree, |n| {
            let x = if n.level == 0 { root.clone() } else { leaves[n.index].clone() };
            SemiOpenPolyhedron::closed(ClosedPolyhedron::point(vec![x]))
        });
        let c = NodeMap::from_fn(&tree, |_| ClosedPolyhedron::point(ivec(&[0])));
        MspInstance::new(tree, v, c).unwrap()
    }

    #[test]
    fn point_valued_instances() {
        let caps = OracleCaps::default();
        let bad = points_instance(int(0), &[int(0), rat(1, 2), int(1)]);
        let verdicts = oracle_all_anchors(&bad, &caps).unwrap();
        assert_eq!(verdicts[&NodeId::new(1, 1)], false);
        assert_eq!(verdicts[&NodeId::new(0, 0)], true);
        let good = points_instance(rat(1, 2), &[int(0), rat(1, 2), int(1)]);
        for n in good.tree().nodes() {
            let s = oracle_solution(&good, n, &caps).unwrap().unwrap();
            assert!(verify_solution(&good, &s).is_empty());
        }
    }

    #[test]
    fn excluded_face_branching() {
        // root must sit at 1, reachable only through the excluded endpoint of [0,1)
        let tree = ScenarioTree::uniform(&[1]);
        let seg = ClosedPolyhedron::from_v(1, vec![ivec(&[0]), ivec(&[1])], vec![], vec![]);
        let half_open = SemiOpenPolyhedron::from_included(seg.clone(), &[crate::geometry::FaceId::top(), crate::geometry::FaceId(seg.tight_at(&[int(0)]))]).unwrap();
        let v = NodeMap::from_fn(&tree, |n| {
            if n.level == 0 { SemiOpenPolyhedron::closed(ClosedPolyhedron::point(ivec(&[1]))) } else { half_open.clone() }
        });
        let c = NodeMap::from_fn(&tree, |_| ClosedPolyhedron::point(ivec(&[0])));
        let inst = MspInstance::new(tree, v, c).unwrap();
        assert!(!oracle_solvable(&inst, NodeId::new(0, 0), &OracleCaps::default()).unwrap());
    }

    #[test]
    fn caps() {
        assert_eq!(OracleCaps::parse("4").unwrap(), OracleCaps { horizon: 4, branching: 4, dim: 4 });
        assert_eq!(OracleCaps::parse("2,3,5").unwrap(), OracleCaps { horizon: 2, branching: 3, dim: 5 });
        assert!(OracleCaps::parse("x").is_err());
        let inst = points_instance(int(0), &vec![int(0); 4]);
        assert!(matches!(oracle_solvable(&inst, NodeId::new(0, 0), &OracleCaps::default()), Err(OracleError::TooLarge { .. })));
    }

    fn one_period(s0: Scalar, kids: &[Scalar], a: ClosedPolyhedron) -> FrictionlessModel {
        let tree = ScenarioTree::uniform(&[kids.len()]);
        let prices = NodeMap::from_fn(&tree, |n| vec![if n.level == 0 { s0.clone() } else { kids[n.index].clone() }]);
        let a = NodeMap::from_fn(&tree, |_| a.clone());
        FrictionlessModel::new(tree, prices, a).unwrap()
    }

    #[test]
    fn frictionless_search() {
        let caps = OracleCaps::default();
        let r = ClosedPolyhedron::universe(1);
        assert!(oracle_frictionless_arbitrage(&one_period(int(1), &[int(2), int(3)], r.clone()), &caps).unwrap());
        assert!(!oracle_frictionless_arbitrage(&one_period(int(1), &[int(2), rat(1, 2)], r), &caps).unwrap());
        let long_only = ClosedPolyhedron::nonneg_orthant(1);
        assert!(!oracle_frictionless_arbitrage(&one_period(int(2), &[int(1), rat(3, 2)], long_only), &caps).unwrap());
    }

    #[test]
    fn kabanov_search() {
        let caps = OracleCaps::default();
        let model = |kids: [(i64, i64); 2]| {
            let tree = ScenarioTree::uniform(&[2]);
            let spreads = NodeMap::from_fn(&tree, |n| {
                let (b, a) = if n.level == 0 { (1, 2) } else { kids[n.index] };
                (int(b), int(a))
            });
            let a = NodeMap::from_fn(&tree, |_| ClosedPolyhedron::universe(2));
            KabanovModel::bid_ask(tree, &spreads, a).unwrap()
        };
        assert!(oracle_kabanov_arbitrage(&model([(3, 4), (3, 4)]), &caps).unwrap());
        assert!(!oracle_kabanov_arbitrage(&model([(3, 4), (0, 1)]), &caps).unwrap());
    }
}
