//! Market models translated into martingale selection problems, with
//! price systems or arbitrage certificates as outcomes.

pub mod cost;
pub mod frictionless;
pub mod kabanov;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geometry::ops::box_constraints;
use crate::geometry::{decompose_sum, ClosedPolyhedron, GeometryError};
use crate::linalg::{add, l1_norm, scale, sub, unit, zeros, Vector};
use crate::lp::{LinearProgram, LpOutcome, Relation};
use crate::msp::{MspError, WTable};
use crate::scalar::Scalar;
use crate::scenario::{AdaptedProcess, FiniteMeasure, NodeId, NodeMap, ScenarioTree};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assumption {
    /// Free disposal: every nonnegative position is strictly solvent, and
    /// some nonzero nonnegative position is allowed.
    FreeDisposal,
    /// No constraints everywhere, or no costless round trips everywhere.
    EfficientFriction,
}

impl std::fmt::Display for Assumption {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Assumption::FreeDisposal => write!(f, "free disposal"),
            Assumption::EfficientFriction => write!(f, "efficient friction"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MarketError {
    #[error("{0}")]
    Msp(#[from] MspError),
    #[error("geometry failure at node {node}: {source}")]
    Geometry { node: NodeId, source: GeometryError },
    #[error("assumption of {0} violated at node {1}")]
    AssumptionViolated(Assumption, NodeId),
    #[error("node {0}: {1}")]
    InvalidModel(NodeId, String),
    #[error("strategy is inadmissible at node {0}: {1}")]
    Inadmissible(NodeId, String),
    #[error("cost function at node {0} does not vanish at the origin")]
    InvalidCost(NodeId),
    #[error("no separator with the required strictness at node {0}")]
    NoSeparator(NodeId),
    #[error("separator is not in the polar of the aggregate at node {0}")]
    NotInPolar(NodeId),
    #[error("decomposition has no slack outside the lineality space")]
    NoSlack,
    #[error("no nonnegative allowed position with interior slack at node {0}")]
    NoPositiveWitness(NodeId),
    #[error("dominating-model search failed at node {0}")]
    DominationSearch(NodeId),
    #[error("model shapes do not match the tree")]
    Shape,
}

pub(crate) fn at(node: NodeId) -> impl Fn(GeometryError) -> MarketError {
    move |source| MarketError::Geometry { node, source }
}

/// Risky holdings per node plus the initial riskless capital. Nodes without
/// an entry hold nothing.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Strategy {
    pub holdings: AdaptedProcess,
    pub initial_capital: Scalar,
}

impl Strategy {
    pub fn holding(&self, n: NodeId, d: usize) -> Vector {
        self.holdings.get(&n).cloned().unwrap_or_else(|| zeros(d))
    }

    pub fn scaled(&self, alpha: &Scalar) -> Strategy {
        Strategy {
            holdings: self.holdings.iter().map(|(n, h)| (*n, scale(h, alpha))).collect(),
            initial_capital: &self.initial_capital * alpha,
        }
    }
}

/// A measure charging `anchor` and a selection on its support.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriceSystem {
    pub anchor: NodeId,
    pub measure: FiniteMeasure,
    pub xi: AdaptedProcess,
}

/// Price systems for each queried node.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoArbitrage {
    pub price_systems: Vec<PriceSystem>,
    /// False when efficient friction fails, so that a price system does not
    /// certify robust no-arbitrage.
    pub robust: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verdict")]
pub enum FtapOutcome<C> {
    NoArbitrage(NoArbitrage),
    Arbitrage(C),
}

impl<C> FtapOutcome<C> {
    pub fn is_arbitrage(&self) -> bool {
        matches!(self, FtapOutcome::Arbitrage(_))
    }
}

/// Queried nodes, defaulting to every leaf.
pub(crate) fn queried(tree: &ScenarioTree, nodes: &[NodeId]) -> Result<Vec<NodeId>, MarketError> {
    for n in nodes {
        tree.check(*n).map_err(MspError::from)?;
    }
    Ok(if nodes.is_empty() { tree.leaves().collect() } else { nodes.to_vec() })
}

/// Checks that every value is a cone of dimension `d`.
pub(crate) fn check_cones(tree: &ScenarioTree, map: &NodeMap<ClosedPolyhedron>, d: usize, what: &str) -> Result<(), MarketError> {
    if !map.fits(tree) {
        return Err(MarketError::Shape);
    }
    for (n, p) in map.iter() {
        if p.dim() != d {
            return Err(MarketError::InvalidModel(n, format!("{what} has dimension {}, expected {d}", p.dim())));
        }
        if p.is_empty() || !p.is_cone() {
            return Err(MarketError::InvalidModel(n, format!("{what} is not a nonempty cone")));
        }
    }
    Ok(())
}

/// `(-A)^*` lifted: `{0} x (-A^*)`.
pub(crate) fn lifted_drift_cone(a: &ClosedPolyhedron) -> Result<ClosedPolyhedron, GeometryError> {
    let dual = a.polar()?;
    let lift = |v: &Vector| {
        let mut out = vec![Scalar::zero()];
        out.extend(v.iter().map(|x| -x));
        out
    };
    Ok(ClosedPolyhedron::cone(
        a.dim() + 1,
        dual.rays().iter().map(lift).collect(),
        dual.lineality().iter().map(lift).collect(),
    ))
}

/// `R x A`
pub(crate) fn lift_constraint(a: &ClosedPolyhedron) -> ClosedPolyhedron {
    let lift = |v: &Vector| {
        let mut out = vec![Scalar::zero()];
        out.extend(v.iter().cloned());
        out
    };
    let mut lin: Vec<Vector> = a.lineality().iter().map(lift).collect();
    lin.push(unit(a.dim() + 1, 0));
    ClosedPolyhedron::cone(a.dim() + 1, a.rays().iter().map(lift).collect(), lin)
}

/// The free-disposal check on `(K, A)` at one node.
pub(crate) fn free_disposal(k: &ClosedPolyhedron, a: &ClosedPolyhedron) -> Result<bool, GeometryError> {
    let dual = k.polar()?;
    let strictly_positive = dual.lineality().is_empty() && dual.rays().iter().all(|r| r.iter().all(Scalar::is_positive));
    Ok(strictly_positive && nonnegative_generators(a).next().is_some())
}

/// Nonzero generators of `A ∩ R^d_+`, scaled to unit l1 norm.
pub(crate) fn nonnegative_generators(a: &ClosedPolyhedron) -> impl Iterator<Item = Vector> {
    let p = a.intersect(&ClosedPolyhedron::nonneg_orthant(a.dim()));
    let rays: Vec<Vector> = p.rays().to_vec();
    rays.into_iter().map(|r| {
        let n = l1_norm(&r);
        scale(&r, &n.recip())
    })
}

/// Separator `z` with `<x,z> <= 0` on `v` and `>= 0` on `side`.
///
/// First tries to make `z` strictly negative on every extreme ray of `v`.
/// Otherwise asks for strictness on some generator of `v` or `target`.
/// Returns `z` and whether the first, stronger form was obtained.
pub fn separator(
    v: &ClosedPolyhedron,
    side: &ClosedPolyhedron,
    target: &ClosedPolyhedron,
) -> Option<(Vector, bool)> {
    let d = v.dim();
    let base = || {
        let mut lp = LinearProgram::new(d);
        box_constraints(&mut lp, d);
        for l in v.lineality().iter().chain(side.lineality()) {
            lp.constrain_dense(0, l, Relation::Eq, Scalar::zero());
        }
        for r in side.rays() {
            lp.constrain_dense(0, r, Relation::Ge, Scalar::zero());
        }
        for p in side.points() {
            lp.constrain_dense(0, p, Relation::Ge, Scalar::zero());
        }
        lp
    };
    if !v.rays().is_empty() {
        let mut lp = base();
        let tau = lp.add_var(true);
        lp.constrain(vec![(tau, Scalar::one())], Relation::Le, Scalar::one());
        for r in v.rays() {
            let mut row: Vec<(usize, Scalar)> = r.iter().cloned().enumerate().collect();
            row.push((tau, Scalar::one()));
            lp.constrain(row, Relation::Le, Scalar::zero());
        }
        lp.maximize(vec![(tau, Scalar::one())]);
        if let LpOutcome::Optimal { value, mut x } = lp.solve() {
            if value.is_positive() {
                x.truncate(d);
                return Some((x, true));
            }
        }
    }
    let mut lp = base();
    let mut obj = zeros(d);
    for r in v.rays() {
        lp.constrain_dense(0, r, Relation::Le, Scalar::zero());
        obj = sub(&obj, r);
    }
    for r in target.rays().iter().chain(target.points()) {
        obj = add(&obj, r);
    }
    lp.maximize(obj.into_iter().enumerate().collect());
    match lp.solve() {
        LpOutcome::Optimal { value, x } if value.is_positive() => Some((x, false)),
        _ => None,
    }
}

/// Splits `z`, a member of the polar of `sharp(w) - C` at `node`, into
/// `k_{t+1} + ... + k_T` along every path, `k_u` in the solvency cone.
///
/// `solvency` is `K` per node, `constraint` is `A = -C^*` per node, and
/// `table` the ri-recursion table. Returns `k` per strict descendant.
pub fn decompose_z(
    tree: &ScenarioTree,
    solvency: &NodeMap<ClosedPolyhedron>,
    constraint: &NodeMap<ClosedPolyhedron>,
    table: &WTable,
    node: NodeId,
    z: &[Scalar],
) -> Result<BTreeMap<NodeId, Vector>, MarketError> {
    let mut out = BTreeMap::new();
    let mut stack = vec![(node, z.to_vec())];
    while let Some((n, z)) = stack.pop() {
        for c in tree.children(n) {
            if tree.is_leaf(c) {
                if !solvency[c].contains(&z) {
                    return Err(MarketError::NotInPolar(n));
                }
                out.insert(c, z.clone());
                continue;
            }
            let agg = table.sets(c).sharp.as_ref().expect("interior node has a sharp set");
            let rest = agg.closure().polar().map_err(at(c))?.intersect(&constraint[c]);
            let (k, zc) = decompose_sum(&z, &solvency[c], &rest).map_err(|_| MarketError::NotInPolar(c))?;
            out.insert(c, k);
            stack.push((c, zc));
        }
    }
    Ok(out)
}

/// Widens `K` by tilting each extreme ray: `cone{r ± eps e_i} + lin K`
/// with rays scaled to unit l1 norm.
pub fn blunt(k: &ClosedPolyhedron, eps: &Scalar) -> ClosedPolyhedron {
    let d = k.dim();
    let mut rays = Vec::new();
    for r in k.rays() {
        let r = scale(r, &l1_norm(r).recip());
        for i in 0..d {
            let e = scale(&unit(d, i), eps);
            rays.push(add(&r, &e));
            rays.push(sub(&r, &e));
        }
    }
    ClosedPolyhedron::cone(d, rays, k.lineality().to_vec())
}

/// `K \ (K ∩ -K) ⊂ ri K̂`
pub fn dominates(k_hat: &ClosedPolyhedron, k: &ClosedPolyhedron) -> bool {
    k.lineality().iter().all(|l| k_hat.contains_direction(l) && k_hat.contains_direction(&scale(l, &-Scalar::one())))
        && k.rays().iter().all(|r| k_hat.in_relative_interior(r))
}

/// Interior membership for a full-dimensional polyhedron.
pub fn in_interior(p: &ClosedPolyhedron, x: &[Scalar]) -> bool {
    !p.is_empty()
        && p.equalities().is_empty()
        && p.inequalities().iter().all(|h| crate::linalg::dot(&h.normal, x) > h.offset)
}

/// `x in A ∩ R^d_+ \ {0}` with `k - x` interior to `k_hat`, searched over
/// halvings of unit vectors and of the generators of `A ∩ R^d_+`.
pub(crate) fn positive_witness(k: &[Scalar], k_hat: &ClosedPolyhedron, a: &ClosedPolyhedron) -> Option<Vector> {
    let d = k.len();
    let mut candidates: Vec<Vector> = (0..d).map(|i| unit(d, i)).filter(|e| a.contains(e)).collect();
    candidates.extend(nonnegative_generators(a));
    let two = Scalar::from_int(2);
    let mut s = Scalar::one();
    for _ in 0..=40 {
        for c in &candidates {
            let x = scale(c, &s);
            if in_interior(k_hat, &sub(k, &x)) {
                return Some(x);
            }
        }
        s = &s / &two;
    }
    None
}
