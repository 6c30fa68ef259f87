//! Martingale selection problems: the backward W-recursion, solvability,
//! local solutions by pasting, and mixing of solutions.

use std::collections::BTreeMap;

use crate::geometry::ops::{merge_witness, restrict};
use crate::geometry::{
    caratheodory_decompose, decompose_semi_open_sum, intersect, minkowski_sum, sharp_core, sharp_flat, ClosedPolyhedron,
    GeometryError, SemiOpenPolyhedron, Witness,
};
use crate::linalg::{add, axpy, scale, sub, Vector};
use crate::scalar::Scalar;
use crate::scenario::{node_mass, AdaptedProcess, FiniteMeasure, NodeId, NodeMap, ScenarioError, ScenarioTree};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MspError {
    #[error("geometry failure at node {node}: {source}")]
    Geometry { node: NodeId, source: GeometryError },
    #[error("problem is not solvable: W is empty at node {1} (level {0})")]
    Unsolvable(usize, NodeId),
    #[error("start point is not in W at the root")]
    InvalidStart,
    #[error("solutions do not belong to the same instance")]
    Mismatch,
    #[error("mixing weight must lie in (0,1)")]
    BadWeight,
    #[error("node {node} has dimension {found}, expected {expected}")]
    Dimension { node: NodeId, expected: usize, found: usize },
    #[error("set families do not match the tree shape")]
    Shape,
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

fn at(node: NodeId) -> impl Fn(GeometryError) -> MspError {
    move |source| MspError::Geometry { node, source }
}

/// Adapted families `V` (semi-open, convex) and `C` (closed, convex).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MspInstance {
    tree: ScenarioTree,
    v: NodeMap<SemiOpenPolyhedron>,
    c: NodeMap<ClosedPolyhedron>,
    dim: usize,
    conical: bool,
}

impl MspInstance {
    pub fn new(
        tree: ScenarioTree,
        v: NodeMap<SemiOpenPolyhedron>,
        c: NodeMap<ClosedPolyhedron>,
    ) -> Result<Self, MspError> {
        if !v.fits(&tree) || !c.fits(&tree) {
            return Err(MspError::Shape);
        }
        let dim = v.get(tree.root()).dim();
        for n in tree.nodes() {
            for found in [v[n].dim(), c[n].dim()] {
                if found != dim {
                    return Err(MspError::Dimension { node: n, expected: dim, found });
                }
            }
        }
        let conical = tree.nodes().all(|n| (v[n].is_empty() || v[n].is_cone()) && (c[n].is_empty() || c[n].is_cone()));
        Ok(MspInstance { tree, v, c, dim, conical })
    }

    pub fn tree(&self) -> &ScenarioTree {
        &self.tree
    }

    pub fn v(&self, n: NodeId) -> &SemiOpenPolyhedron {
        &self.v[n]
    }

    pub fn c(&self, n: NodeId) -> &ClosedPolyhedron {
        &self.c[n]
    }

    pub fn v_map(&self) -> &NodeMap<SemiOpenPolyhedron> {
        &self.v
    }

    pub fn c_map(&self) -> &NodeMap<ClosedPolyhedron> {
        &self.c
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Whether every `V` and `C` value is a cone.
    pub fn is_conical(&self) -> bool {
        self.conical
    }
}

/// The sets computed at one node by a backward recursion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeSets {
    pub w: SemiOpenPolyhedron,
    /// Convex hull of the children's sets (interior nodes only). A face of
    /// its closure that the hull covers only in part is left out.
    pub sharp: Option<SemiOpenPolyhedron>,
    /// The flat aggregate of the children's sets (interior nodes only, `W` recursion).
    pub flat: Option<SemiOpenPolyhedron>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WTable {
    nodes: NodeMap<NodeSets>,
}

impl WTable {
    pub fn get(&self, n: NodeId) -> &SemiOpenPolyhedron {
        &self.nodes[n].w
    }

    pub fn sets(&self, n: NodeId) -> &NodeSets {
        &self.nodes[n]
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &NodeSets)> {
        self.nodes.iter()
    }

    pub fn all_nonempty(&self) -> bool {
        self.nodes.iter().all(|(_, s)| !s.w.is_empty())
    }

    /// The deepest level holding an empty set, and its lowest-index such node.
    pub fn failure(&self) -> Option<(usize, NodeId)> {
        self.nodes
            .iter()
            .filter(|(_, s)| s.w.is_empty())
            .map(|(n, _)| n)
            .max_by(|a, b| a.level.cmp(&b.level).then(b.index.cmp(&a.index)))
            .map(|n| (n.level, n))
    }
}

/// How children's sets are combined before subtracting the drift set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Aggregation {
    Flat,
    /// Valid shortcut when every `V` value is open.
    Sharp,
}

/// Where the relative interior is taken in the ri-recursion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum RiPlacement {
    /// `V ∩ ri(sharp - C)`
    #[default]
    AfterDrift,
    /// `V ∩ (ri(sharp) - C)`
    BeforeDrift,
}

fn children_sets(tree: &ScenarioTree, done: &BTreeMap<NodeId, NodeSets>, n: NodeId) -> Vec<SemiOpenPolyhedron> {
    tree.children(n).into_iter().map(|c| done[&c].w.clone()).collect()
}

fn backward(
    inst: &MspInstance,
    mut step: impl FnMut(NodeId, Vec<SemiOpenPolyhedron>) -> Result<NodeSets, MspError>,
) -> Result<WTable, MspError> {
    let tree = &inst.tree;
    let mut done: BTreeMap<NodeId, NodeSets> = BTreeMap::new();
    for leaf in tree.leaves() {
        done.insert(leaf, NodeSets { w: inst.v[leaf].clone(), sharp: None, flat: None });
    }
    for t in (0..tree.horizon()).rev() {
        for n in tree.nodes_at(t) {
            let ch = children_sets(tree, &done, n);
            let sets = step(n, ch)?;
            done.insert(n, sets);
        }
    }
    let nodes = NodeMap::from_fn(tree, |n| done.remove(&n).unwrap());
    Ok(WTable { nodes })
}

/// `W_T = V_T`, `W_t = V_t ∩ (flat(W_{t+1}) - C_t)`.
pub fn compute_w(inst: &MspInstance) -> Result<WTable, MspError> {
    compute_w_with(inst, Aggregation::Flat)
}

pub fn compute_w_with(inst: &MspInstance, agg: Aggregation) -> Result<WTable, MspError> {
    let d = inst.dim;
    backward(inst, |n, ch| {
        let (s, f) = match agg {
            Aggregation::Flat => sharp_flat(&ch).map_err(at(n))?,
            Aggregation::Sharp => {
                let s = sharp_core(&ch).map_err(at(n))?;
                let f = if ch.iter().any(|c| c.is_empty()) { SemiOpenPolyhedron::empty(d) } else { s.clone() };
                (s, f)
            }
        };
        let w = if f.is_empty() {
            SemiOpenPolyhedron::empty(d)
        } else {
            let shifted = minkowski_sum(&f, &inst.c[n].negate()).map_err(at(n))?;
            intersect(&inst.v[n], &shifted).map_err(at(n))?
        };
        Ok(NodeSets { w, sharp: Some(s), flat: Some(f) })
    })
}

/// The ri-recursion `w_t = V_t ∩ ri(sharp(w_{t+1}) - C_t)`; a node with an
/// empty child gets an empty set.
pub fn compute_w_ri(inst: &MspInstance, placement: RiPlacement) -> Result<WTable, MspError> {
    let d = inst.dim;
    backward(inst, |n, ch| {
        if ch.iter().any(|c| c.is_empty()) {
            return Ok(NodeSets { w: SemiOpenPolyhedron::empty(d), sharp: Some(SemiOpenPolyhedron::empty(d)), flat: None });
        }
        let s = sharp_core(&ch).map_err(at(n))?;
        let neg_c = inst.c[n].negate();
        let inner = match placement {
            // ri(S - C) = ri(cl S - C)
            RiPlacement::AfterDrift => SemiOpenPolyhedron::relint(s.closure().minkowski_sum(&neg_c)),
            RiPlacement::BeforeDrift => minkowski_sum(&s.relative_interior(), &neg_c).map_err(at(n))?,
        };
        let w = intersect(&inst.v[n], &inner).map_err(at(n))?;
        Ok(NodeSets { w, sharp: Some(s), flat: None })
    })
}

pub fn is_solvable(inst: &MspInstance) -> Result<bool, MspError> {
    Ok(compute_w(inst)?.all_nonempty())
}

pub fn find_failure(inst: &MspInstance) -> Result<Option<(usize, NodeId)>, MspError> {
    Ok(compute_w(inst)?.failure())
}

/// A selection `xi` on the support of `q`, with `anchor` in that support.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Solution {
    pub xi: AdaptedProcess,
    pub q: FiniteMeasure,
    pub anchor: NodeId,
}

/// Builds a solution whose measure charges `anchor`, starting from `start`
/// (default: a relative-interior point of `W` at the root).
pub fn build_local_solution(
    inst: &MspInstance,
    table: &WTable,
    anchor: NodeId,
    start: Option<&[Scalar]>,
) -> Result<Solution, MspError> {
    let tree = &inst.tree;
    tree.check(anchor)?;
    let root = tree.root();
    if let Some((t, n)) = table.failure() {
        return Err(MspError::Unsolvable(t, n));
    }
    let w0 = table.get(root);
    let xi0 = match start {
        Some(s) if s.len() == inst.dim && w0.member(s) => s.to_vec(),
        Some(_) => return Err(MspError::InvalidStart),
        None => w0.sample_ri_point().map_err(at(root))?,
    };
    let mut xi = AdaptedProcess::new();
    let mut weights = BTreeMap::new();
    paste(inst, table, anchor, root, xi0, &Scalar::one(), &mut xi, &mut weights)?;
    let q = FiniteMeasure::new(tree, weights)?;
    Ok(Solution { xi, q, anchor })
}

#[allow(clippy::too_many_arguments)]
fn paste(
    inst: &MspInstance,
    table: &WTable,
    anchor: NodeId,
    n: NodeId,
    x: Vector,
    mass: &Scalar,
    xi: &mut AdaptedProcess,
    weights: &mut BTreeMap<NodeId, Scalar>,
) -> Result<(), MspError> {
    let tree = &inst.tree;
    if tree.is_leaf(n) {
        xi.insert(n, x);
        weights.insert(n, mass.clone());
        return Ok(());
    }
    let sets = table.sets(n);
    let f = sets.flat.as_ref().expect("interior node has a flat set");
    let s = sets.sharp.as_ref().expect("interior node has a sharp set");
    let (w, _) = decompose_semi_open_sum(&x, f, &inst.c[n].negate()).map_err(at(n))?;
    let children = tree.children(n);
    let child_sets: Vec<SemiOpenPolyhedron> = children.iter().map(|c| table.get(*c).clone()).collect();
    let forced = children.iter().position(|c| anchor.level > n.level && tree.is_ancestor(*c, anchor));
    let terms = match forced {
        None => caratheodory_decompose(&w, &child_sets).map_err(at(n))?,
        Some(j) => forced_witness(&w, s, &child_sets, j).map_err(at(n))?,
    };
    xi.insert(n, x);
    for (q, p, j) in terms {
        paste(inst, table, anchor, children[j], p, &(mass * &q), xi, weights)?;
    }
    Ok(())
}

/// A convex decomposition of `w ∈ flat` over the children's sets giving
/// child `j` positive weight.
fn forced_witness(
    w: &[Scalar],
    sharp_set: &SemiOpenPolyhedron,
    children: &[SemiOpenPolyhedron],
    j: usize,
) -> Result<Vec<Witness>, GeometryError> {
    let cl = sharp_set.closure();
    let id = cl.minimal_face(w)?;
    let face = cl.face(&id).expect("minimal face exists");
    let fp = cl.face_polyhedron(&face);
    let xj = restrict(&children[j], &fp)?.sample_ri_point()?;
    let dir = sub(w, &xj);
    let two = Scalar::from_int(2);
    let mut mu = Scalar::one();
    let z = loop {
        let z = axpy(w, &mu, &dir);
        if sharp_set.member(&z) {
            break z;
        }
        mu = &mu / &two;
    };
    let lambda = &mu / &(&Scalar::one() + &mu);
    let rest = &Scalar::one() - &lambda;
    let mut terms = vec![(lambda, xj, j)];
    for (q, p, i) in caratheodory_decompose(&z, children)? {
        terms.push((&rest * &q, p, i));
    }
    Ok(merge_witness(terms))
}

/// `Q = mu Q1 + (1-mu) Q2` with the selections averaged by conditional mass.
pub fn mix_solutions(inst: &MspInstance, s1: &Solution, s2: &Solution, mu: &Scalar) -> Result<Solution, MspError> {
    if !mu.is_positive() || *mu >= Scalar::one() {
        return Err(MspError::BadWeight);
    }
    let tree = &inst.tree;
    for s in [s1, s2] {
        s.q.validate(tree).map_err(|_| MspError::Mismatch)?;
    }
    let nu = &Scalar::one() - mu;
    let q = crate::scenario::mix_measures(&[(mu.clone(), s1.q.clone()), (nu.clone(), s2.q.clone())])?;
    let mut xi = AdaptedProcess::new();
    for n in tree.nodes() {
        let m = node_mass(tree, &q, n);
        if m.is_zero() {
            continue;
        }
        let mut acc: Option<Vector> = None;
        for (lam, s) in [(mu, s1), (&nu, s2)] {
            let mk = node_mass(tree, &s.q, n);
            if mk.is_zero() {
                continue;
            }
            let v = s.xi.get(&n).ok_or(MspError::Mismatch)?;
            if v.len() != inst.dim {
                return Err(MspError::Mismatch);
            }
            let term = scale(v, &(&(lam * &mk) / &m));
            acc = Some(match acc {
                None => term,
                Some(a) => add(&a, &term),
            });
        }
        xi.insert(n, acc.unwrap());
    }
    Ok(Solution { xi, q, anchor: s1.anchor })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    InvalidMeasure(String),
    AnchorUnsupported(NodeId),
    MissingValue(NodeId),
    NotInV(NodeId),
    DriftNotInC(NodeId),
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::InvalidMeasure(e) => write!(f, "invalid measure: {e}"),
            Violation::AnchorUnsupported(n) => write!(f, "anchor {n} has zero mass"),
            Violation::MissingValue(n) => write!(f, "selection undefined at supported node {n}"),
            Violation::NotInV(n) => write!(f, "selection at {n} is not in V"),
            Violation::DriftNotInC(n) => write!(f, "conditional drift at {n} is not in C"),
        }
    }
}

/// Checks `xi ∈ V` and `E_Q[xi_{t+1} - xi_t | n] ∈ C` at every node of
/// positive mass; returns the violations found.
pub fn verify_solution(inst: &MspInstance, s: &Solution) -> Vec<Violation> {
    let tree = &inst.tree;
    if let Err(e) = s.q.validate(tree) {
        return vec![Violation::InvalidMeasure(e.to_string())];
    }
    let mut out = Vec::new();
    if !tree.contains(s.anchor) || node_mass(tree, &s.q, s.anchor).is_zero() {
        out.push(Violation::AnchorUnsupported(s.anchor));
    }
    let masses = NodeMap::from_fn(tree, |n| node_mass(tree, &s.q, n));
    for n in tree.nodes() {
        if masses[n].is_zero() {
            continue;
        }
        let Some(x) = s.xi.get(&n) else {
            out.push(Violation::MissingValue(n));
            continue;
        };
        if !inst.v[n].member(x) {
            out.push(Violation::NotInV(n));
        }
        if tree.is_leaf(n) {
            continue;
        }
        let mut e = scale(x, &-&masses[n]);
        let mut complete = true;
        for c in tree.children(n) {
            if masses[c].is_zero() {
                continue;
            }
            match s.xi.get(&c) {
                Some(y) if y.len() == inst.dim => e = axpy(&e, &masses[c], y),
                _ => complete = false,
            }
        }
        if complete && !inst.c[n].contains(&scale(&e, &masses[n].recip())) {
            out.push(Violation::DriftNotInC(n));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FaceId;
    use crate::scalar::{int, ivec, rat};

    fn chain(n: usize) -> ScenarioTree {
        ScenarioTree::uniform(&vec![1; n])
    }

    fn pt(x: &[i64]) -> ClosedPolyhedron {
        ClosedPolyhedron::point(ivec(x))
    }

    fn open_box(lo: &[i64], hi: &[i64]) -> ClosedPolyhedron {
        let d = lo.len();
        let mut pts = vec![vec![]];
        for i in 0..d {
            pts = pts
                .into_iter()
                .flat_map(|p: Vec<Scalar>| {
                    [lo[i], hi[i]].into_iter().map(move |v| {
                        let mut q = p.clone();
                        q.push(int(v));
                        q
                    })
                })
                .collect();
        }
        ClosedPolyhedron::from_v(d, pts, vec![], vec![])
    }

    /// Root `{0}`, three children `{0}`, `{1/2}`, `{1}`, no drift.
    fn unsolvable_example() -> MspInstance {
        let tree = ScenarioTree::uniform(&[3]);
        let vals = [int(0), rat(1, 2), int(1)];
        let v = NodeMap::from_fn(&tree, |n| {
            let x = if n.level == 0 { int(0) } else { vals[n.index].clone() };
            SemiOpenPolyhedron::closed(ClosedPolyhedron::point(vec![x]))
        });
        let c = NodeMap::from_fn(&tree, |_| pt(&[0]));
        MspInstance::new(tree, v, c).unwrap()
    }

    /// Three-level chain with a half-plane drift set at level 1.
    fn drift_example() -> MspInstance {
        let tree = chain(2);
        let segment = open_box(&[-1, 0], &[1, 0]);
        let square = open_box(&[-1, -1], &[1, 1]);
        let v = NodeMap::from_fn(&tree, |n| {
            SemiOpenPolyhedron::relint(if n.level == 1 { square.clone() } else { segment.clone() })
        });
        let upper = ClosedPolyhedron::from_v(2, vec![ivec(&[0, 0])], vec![ivec(&[0, 1])], vec![ivec(&[1, 0])]);
        let c = NodeMap::from_fn(&tree, |n| if n.level == 1 { upper.clone() } else { pt(&[0, 0]) });
        MspInstance::new(tree, v, c).unwrap()
    }

    #[test]
    fn unsolvable_fixture() {
        let inst = unsolvable_example();
        let table = compute_w(&inst).unwrap();
        let root = inst.tree().root();
        let s = table.sets(root);
        assert_eq!(s.sharp.as_ref().unwrap().closure(), &open_box(&[0], &[1]));
        assert!(s.sharp.as_ref().unwrap().is_closed());
        assert!(s.flat.as_ref().unwrap().is_relatively_open());
        assert!(table.get(root).is_empty());
        assert_eq!(table.failure(), Some((0, root)));
        assert!(matches!(build_local_solution(&inst, &table, root, None), Err(MspError::Unsolvable(0, _))));
    }

    #[test]
    fn drift_fixture() {
        let inst = drift_example();
        let table = compute_w(&inst).unwrap();
        let w1 = table.get(NodeId::new(1, 0));
        // (-1,1) x (-1,0]
        assert_eq!(w1.closure(), &open_box(&[-1, -1], &[1, 0]));
        assert!(w1.member(&[int(0), int(0)]));
        assert!(!w1.member(&[int(0), int(-1)]));
        assert!(!w1.member(&[int(1), int(0)]));
        assert_eq!(table.get(NodeId::new(0, 0)), inst.v(NodeId::new(0, 0)));
        assert!(table.all_nonempty());

        let after = compute_w_ri(&inst, RiPlacement::AfterDrift).unwrap();
        let w1 = after.get(NodeId::new(1, 0));
        assert!(w1.is_relatively_open());
        assert!(!w1.member(&[int(0), int(0)]));
        assert!(after.get(NodeId::new(0, 0)).is_empty());

        let before = compute_w_ri(&inst, RiPlacement::BeforeDrift).unwrap();
        let w1 = before.get(NodeId::new(1, 0));
        assert!(w1.member(&[int(0), int(0)]));
        let cl = w1.closure().clone();
        let top_edge = FaceId(cl.tight_at(&[int(0), int(0)]));
        assert!(w1.is_included(&top_edge));
        assert!(before.get(NodeId::new(0, 0)).is_empty());
    }

    #[test]
    fn constant_solution_on_drift_fixture() {
        let inst = drift_example();
        let table = compute_w(&inst).unwrap();
        let leaf = NodeId::new(2, 0);
        let s = build_local_solution(&inst, &table, leaf, Some(&ivec(&[0, 0]))).unwrap();
        assert!(verify_solution(&inst, &s).is_empty());
        assert!(s.xi.values().all(|x| x == &ivec(&[0, 0])));
        assert_eq!(s.q, FiniteMeasure::dirac(leaf));
        assert_eq!(
            build_local_solution(&inst, &table, leaf, Some(&ivec(&[0, 1]))),
            Err(MspError::InvalidStart)
        );
    }

    fn binomial() -> MspInstance {
        let tree = ScenarioTree::uniform(&[2]);
        let prices = [ivec(&[1, 1]), ivec(&[1, 2]), vec![int(1), rat(1, 2)]];
        let v = NodeMap::from_fn(&tree, |n| {
            let p = if n.level == 0 { &prices[0] } else { &prices[1 + n.index] };
            SemiOpenPolyhedron::relint(ClosedPolyhedron::cone(2, vec![p.clone()], vec![]))
        });
        let c = NodeMap::from_fn(&tree, |_| pt(&[0, 0]));
        MspInstance::new(tree, v, c).unwrap()
    }

    #[test]
    fn binomial_solutions_and_mixing() {
        let inst = binomial();
        assert!(inst.is_conical());
        let table = compute_w(&inst).unwrap();
        let up = NodeId::new(1, 0);
        let down = NodeId::new(1, 1);
        let s = build_local_solution(&inst, &table, up, None).unwrap();
        assert!(verify_solution(&inst, &s).is_empty());
        // density-weighted probability of the up state is 1/3
        let y = |n: NodeId| s.xi[&n][0].clone();
        let pu = &(&s.q.weight(up) * &y(up)) / &y(inst.tree().root());
        assert_eq!(pu, rat(1, 3));
        let s2 = build_local_solution(&inst, &table, down, Some(&ivec(&[2, 2]))).unwrap();
        let m = mix_solutions(&inst, &s, &s2, &rat(1, 3)).unwrap();
        assert!(verify_solution(&inst, &m).is_empty());
        assert_eq!(mix_solutions(&inst, &s, &s, &rat(1, 2)).unwrap(), s);
    }

    #[test]
    fn tampered_solution_reports_node() {
        let inst = binomial();
        let table = compute_w(&inst).unwrap();
        let mut s = build_local_solution(&inst, &table, NodeId::new(1, 1), None).unwrap();
        s.xi.insert(NodeId::new(1, 1), ivec(&[1, 7]));
        let v = verify_solution(&inst, &s);
        assert!(v.contains(&Violation::NotInV(NodeId::new(1, 1))));
    }

    #[test]
    fn empty_leaf_is_reported() {
        let tree = ScenarioTree::uniform(&[2]);
        let v = NodeMap::from_fn(&tree, |n| {
            if n == NodeId::new(1, 1) {
                SemiOpenPolyhedron::empty(1)
            } else {
                SemiOpenPolyhedron::closed(pt(&[0]))
            }
        });
        let c = NodeMap::from_fn(&tree, |_| pt(&[0]));
        let inst = MspInstance::new(tree, v, c).unwrap();
        assert_eq!(find_failure(&inst).unwrap(), Some((1, NodeId::new(1, 1))));
    }
}
