//! Finite scenario trees, finite-support measures on their leaves, and
//! conditional expectations along the tree.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::linalg::{add, scale, zeros, Vector};
use crate::scalar::Scalar;

/// A node `(level, index)`; printed as `level:index`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId {
    pub level: usize,
    pub index: usize,
}

impl NodeId {
    pub fn new(level: usize, index: usize) -> Self {
        NodeId { level, index }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.level, self.index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid node id {0:?}, expected LEVEL:INDEX")]
pub struct ParseNodeIdError(pub String);

impl FromStr for NodeId {
    type Err = ParseNodeIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseNodeIdError(s.to_string());
        let (l, i) = s.split_once(':').ok_or_else(err)?;
        Ok(NodeId { level: l.trim().parse().map_err(|_| err())?, index: i.trim().parse().map_err(|_| err())? })
    }
}

impl Serialize for NodeId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for NodeId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScenarioError {
    #[error("tree has no levels")]
    NoLevels,
    #[error("level 0 must contain exactly one node, found {0}")]
    RootCount(usize),
    #[error("node {0} has no parent")]
    MissingParent(NodeId),
    #[error("node {node} names parent index {parent} which does not exist at level {}", node.level - 1)]
    BadParent { node: NodeId, parent: usize },
    #[error("root node {0} must not name a parent")]
    RootWithParent(NodeId),
    #[error("node {0} is not a leaf but has no children")]
    Childless(NodeId),
    #[error("node {0} is not in the tree")]
    UnknownNode(NodeId),
    #[error("measure weight at {0} must be positive")]
    NonPositiveWeight(NodeId),
    #[error("measure is supported on {0}, which is not a leaf")]
    NotALeaf(NodeId),
    #[error("measure weights sum to {0}, expected 1")]
    NotNormalized(Scalar),
    #[error("node {0} has zero mass")]
    ZeroMass(NodeId),
    #[error("process has no value at {0}")]
    MissingValue(NodeId),
    #[error("mixing weights must be positive and sum to 1")]
    BadMixWeights,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct TreeNode {
    parent: Option<usize>,
    label: Option<String>,
    children: Vec<usize>,
}

/// Levels `0..=T` of nodes with parent links. Level 0 holds the single root
/// and every node above level `T` has at least one child.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScenarioTree {
    levels: Vec<Vec<TreeNode>>,
}

impl ScenarioTree {
    /// Builds a tree from `(parent index, label)` entries per level.
    pub fn new(levels: Vec<Vec<(Option<usize>, Option<String>)>>) -> Result<Self, ScenarioError> {
        if levels.is_empty() {
            return Err(ScenarioError::NoLevels);
        }
        if levels[0].len() != 1 {
            return Err(ScenarioError::RootCount(levels[0].len()));
        }
        let mut out: Vec<Vec<TreeNode>> = Vec::with_capacity(levels.len());
        for (t, level) in levels.into_iter().enumerate() {
            let mut nodes = Vec::with_capacity(level.len());
            for (i, (parent, label)) in level.into_iter().enumerate() {
                let id = NodeId::new(t, i);
                match (t, parent) {
                    (0, Some(_)) => return Err(ScenarioError::RootWithParent(id)),
                    (0, None) => {}
                    (_, None) => return Err(ScenarioError::MissingParent(id)),
                    (_, Some(p)) => {
                        let prev: &mut Vec<TreeNode> = out.last_mut().unwrap();
                        if p >= prev.len() {
                            return Err(ScenarioError::BadParent { node: id, parent: p });
                        }
                        prev[p].children.push(i);
                    }
                }
                nodes.push(TreeNode { parent, label, children: Vec::new() });
            }
            out.push(nodes);
        }
        let horizon = out.len() - 1;
        for (t, level) in out.iter().enumerate().take(horizon) {
            for (i, n) in level.iter().enumerate() {
                if n.children.is_empty() {
                    return Err(ScenarioError::Childless(NodeId::new(t, i)));
                }
            }
        }
        Ok(ScenarioTree { levels: out })
    }

    /// Builds a tree from parent indices of levels `1..=T`.
    pub fn from_parents(parents: &[Vec<usize>]) -> Result<Self, ScenarioError> {
        let mut levels = vec![vec![(None, None)]];
        for l in parents {
            levels.push(l.iter().map(|&p| (Some(p), None)).collect());
        }
        Self::new(levels)
    }

    /// A tree in which every node at level `t` has `branching[t]` children.
    pub fn uniform(branching: &[usize]) -> Self {
        let mut parents = Vec::new();
        let mut width = 1;
        for &b in branching {
            parents.push((0..width * b).map(|i| i / b).collect());
            width *= b;
        }
        Self::from_parents(&parents).expect("uniform tree is valid")
    }

    pub fn horizon(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn root(&self) -> NodeId {
        NodeId::new(0, 0)
    }

    pub fn contains(&self, n: NodeId) -> bool {
        n.level < self.levels.len() && n.index < self.levels[n.level].len()
    }

    pub fn check(&self, n: NodeId) -> Result<(), ScenarioError> {
        if self.contains(n) {
            Ok(())
        } else {
            Err(ScenarioError::UnknownNode(n))
        }
    }

    pub fn level_size(&self, t: usize) -> usize {
        self.levels[t].len()
    }

    pub fn node_count(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    pub fn nodes_at(&self, t: usize) -> impl Iterator<Item = NodeId> {
        (0..self.levels[t].len()).map(move |i| NodeId::new(t, i))
    }

    /// All nodes, level by level.
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.levels.len()).flat_map(move |t| self.nodes_at(t))
    }

    pub fn children(&self, n: NodeId) -> Vec<NodeId> {
        if n.level >= self.horizon() {
            return Vec::new();
        }
        self.levels[n.level][n.index].children.iter().map(|&c| NodeId::new(n.level + 1, c)).collect()
    }

    pub fn parent(&self, n: NodeId) -> Option<NodeId> {
        self.levels[n.level][n.index].parent.map(|p| NodeId::new(n.level - 1, p))
    }

    pub fn label(&self, n: NodeId) -> Option<&str> {
        self.levels[n.level][n.index].label.as_deref()
    }

    pub fn is_leaf(&self, n: NodeId) -> bool {
        n.level == self.horizon()
    }

    pub fn leaves(&self) -> impl Iterator<Item = NodeId> {
        self.nodes_at(self.horizon())
    }

    /// The ancestor of `n` at `level` (`n` itself when the levels agree).
    pub fn ancestor_at(&self, n: NodeId, level: usize) -> NodeId {
        assert!(level <= n.level);
        let mut cur = n;
        while cur.level > level {
            cur = self.parent(cur).unwrap();
        }
        cur
    }

    /// Whether `a` is `n` or one of its ancestors.
    pub fn is_ancestor(&self, a: NodeId, n: NodeId) -> bool {
        a.level <= n.level && self.ancestor_at(n, a.level) == a
    }

    pub fn leaves_under(&self, n: NodeId) -> Vec<NodeId> {
        let mut frontier = vec![n];
        while frontier.first().is_some_and(|f| !self.is_leaf(*f)) {
            frontier = frontier.iter().flat_map(|&f| self.children(f)).collect();
        }
        frontier
    }

    /// Maximum number of children of any node.
    pub fn max_branching(&self) -> usize {
        self.levels.iter().flatten().map(|n| n.children.len()).max().unwrap_or(0)
    }

    /// Parent indices of levels `1..=T`, the inverse of `from_parents`.
    pub fn parent_table(&self) -> Vec<Vec<usize>> {
        self.levels[1..].iter().map(|l| l.iter().map(|n| n.parent.unwrap()).collect()).collect()
    }

    /// The subtree rooted at `n`, with the original id of each of its nodes.
    pub fn subtree(&self, n: NodeId) -> (ScenarioTree, NodeMap<NodeId>) {
        let mut ids = vec![vec![n]];
        let mut levels = vec![vec![(None, self.label(n).map(str::to_string))]];
        while !self.is_leaf(ids.last().unwrap()[0]) {
            let mut next_ids = Vec::new();
            let mut next = Vec::new();
            for (pi, &p) in ids.last().unwrap().iter().enumerate() {
                for c in self.children(p) {
                    next_ids.push(c);
                    next.push((Some(pi), self.label(c).map(str::to_string)));
                }
            }
            ids.push(next_ids);
            levels.push(next);
        }
        let tree = ScenarioTree::new(levels).expect("subtree of a valid tree is valid");
        (tree, NodeMap { levels: ids })
    }

    pub fn labels(&self) -> Vec<Vec<Option<String>>> {
        self.levels.iter().map(|l| l.iter().map(|n| n.label.clone()).collect()).collect()
    }
}

/// One value per node of a tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeMap<T> {
    levels: Vec<Vec<T>>,
}

impl<T> NodeMap<T> {
    pub fn from_fn(tree: &ScenarioTree, mut f: impl FnMut(NodeId) -> T) -> Self {
        NodeMap {
            levels: (0..=tree.horizon()).map(|t| tree.nodes_at(t).map(&mut f).collect()).collect(),
        }
    }

    pub fn try_from_fn<E>(tree: &ScenarioTree, mut f: impl FnMut(NodeId) -> Result<T, E>) -> Result<Self, E> {
        let mut levels = Vec::new();
        for t in 0..=tree.horizon() {
            levels.push(tree.nodes_at(t).map(&mut f).collect::<Result<Vec<_>, E>>()?);
        }
        Ok(NodeMap { levels })
    }

    pub fn get(&self, n: NodeId) -> &T {
        &self.levels[n.level][n.index]
    }

    pub fn set(&mut self, n: NodeId, v: T) {
        self.levels[n.level][n.index] = v;
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &T)> {
        self.levels
            .iter()
            .enumerate()
            .flat_map(|(t, l)| l.iter().enumerate().map(move |(i, v)| (NodeId::new(t, i), v)))
    }

    pub fn map<U>(&self, mut f: impl FnMut(NodeId, &T) -> U) -> NodeMap<U> {
        NodeMap {
            levels: self
                .levels
                .iter()
                .enumerate()
                .map(|(t, l)| l.iter().enumerate().map(|(i, v)| f(NodeId::new(t, i), v)).collect())
                .collect(),
        }
    }

    pub fn levels(&self) -> &[Vec<T>] {
        &self.levels
    }

    pub fn from_levels(levels: Vec<Vec<T>>) -> Self {
        NodeMap { levels }
    }

    /// Whether the map has exactly the shape of `tree`.
    pub fn fits(&self, tree: &ScenarioTree) -> bool {
        self.levels.len() == tree.horizon() + 1 && self.levels.iter().enumerate().all(|(t, l)| l.len() == tree.level_size(t))
    }
}

impl<T> std::ops::Index<NodeId> for NodeMap<T> {
    type Output = T;
    fn index(&self, n: NodeId) -> &T {
        self.get(n)
    }
}

impl<T: Serialize> Serialize for NodeMap<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.levels.serialize(s)
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for NodeMap<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(NodeMap { levels: Vec::deserialize(d)? })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeNodeDoc {
    parent: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeDoc {
    levels: Vec<Vec<TreeNodeDoc>>,
}

/// `{"levels": [[{"parent": null, "label": ...}], [{"parent": 0}, ...], ...]}`
impl Serialize for ScenarioTree {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let levels = self
            .levels
            .iter()
            .map(|l| l.iter().map(|n| TreeNodeDoc { parent: n.parent, label: n.label.clone() }).collect())
            .collect();
        TreeDoc { levels }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ScenarioTree {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let doc = TreeDoc::deserialize(d)?;
        let levels = doc.levels.into_iter().map(|l| l.into_iter().map(|n| (n.parent, n.label)).collect()).collect();
        ScenarioTree::new(levels).map_err(serde::de::Error::custom)
    }
}

/// A vector-valued process, possibly defined only on part of the tree.
pub type AdaptedProcess = BTreeMap<NodeId, Vector>;

/// A probability measure with finite support on the leaves.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FiniteMeasure {
    weights: BTreeMap<NodeId, Scalar>,
}

impl FiniteMeasure {
    pub fn new(tree: &ScenarioTree, weights: BTreeMap<NodeId, Scalar>) -> Result<Self, ScenarioError> {
        let mut total = Scalar::zero();
        for (n, w) in &weights {
            tree.check(*n)?;
            if !tree.is_leaf(*n) {
                return Err(ScenarioError::NotALeaf(*n));
            }
            if !w.is_positive() {
                return Err(ScenarioError::NonPositiveWeight(*n));
            }
            total += w;
        }
        if !total.is_one() {
            return Err(ScenarioError::NotNormalized(total));
        }
        Ok(FiniteMeasure { weights })
    }

    pub fn dirac(leaf: NodeId) -> Self {
        FiniteMeasure { weights: BTreeMap::from([(leaf, Scalar::one())]) }
    }

    pub fn weights(&self) -> &BTreeMap<NodeId, Scalar> {
        &self.weights
    }

    pub fn weight(&self, leaf: NodeId) -> Scalar {
        self.weights.get(&leaf).cloned().unwrap_or_default()
    }

    pub fn support(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.weights.keys().copied()
    }

    /// Re-validates the measure against `tree`.
    pub fn validate(&self, tree: &ScenarioTree) -> Result<(), ScenarioError> {
        FiniteMeasure::new(tree, self.weights.clone()).map(|_| ())
    }
}

/// Mass of the leaves below `n`.
pub fn node_mass(tree: &ScenarioTree, q: &FiniteMeasure, n: NodeId) -> Scalar {
    q.weights.iter().filter(|(l, _)| tree.is_ancestor(n, **l)).map(|(_, w)| w.clone()).sum()
}

/// `E_Q[X_{t+1} | node n]` for a process defined on the children of `n`.
pub fn conditional_expectation(
    tree: &ScenarioTree,
    x: &AdaptedProcess,
    q: &FiniteMeasure,
    n: NodeId,
) -> Result<Vector, ScenarioError> {
    tree.check(n)?;
    let m = node_mass(tree, q, n);
    if m.is_zero() {
        return Err(ScenarioError::ZeroMass(n));
    }
    let mut acc: Option<Vector> = None;
    for c in tree.children(n) {
        let mc = node_mass(tree, q, c);
        if mc.is_zero() {
            continue;
        }
        let v = x.get(&c).ok_or(ScenarioError::MissingValue(c))?;
        let term = scale(v, &(&mc / &m));
        acc = Some(match acc {
            None => term,
            Some(a) => add(&a, &term),
        });
    }
    Ok(acc.unwrap_or_else(|| zeros(0)))
}

/// Leafwise convex combination of measures.
pub fn mix_measures(parts: &[(Scalar, FiniteMeasure)]) -> Result<FiniteMeasure, ScenarioError> {
    let total: Scalar = parts.iter().map(|(w, _)| w.clone()).sum();
    if parts.is_empty() || !total.is_one() || parts.iter().any(|(w, _)| !w.is_positive()) {
        return Err(ScenarioError::BadMixWeights);
    }
    let mut weights: BTreeMap<NodeId, Scalar> = BTreeMap::new();
    for (w, q) in parts {
        for (l, x) in &q.weights {
            *weights.entry(*l).or_default() += w * x;
        }
    }
    Ok(FiniteMeasure { weights })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{int, rat};

    fn binary2() -> ScenarioTree {
        ScenarioTree::uniform(&[2, 2])
    }

    #[test]
    fn tree_validation() {
        assert_eq!(
            ScenarioTree::from_parents(&[vec![0, 0], vec![0]]),
            Err(ScenarioError::Childless(NodeId::new(1, 1)))
        );
        assert_eq!(
            ScenarioTree::from_parents(&[vec![0, 3]]),
            Err(ScenarioError::BadParent { node: NodeId::new(1, 1), parent: 3 })
        );
        let t = binary2();
        assert_eq!(t.leaves_under(NodeId::new(1, 1)), vec![NodeId::new(2, 2), NodeId::new(2, 3)]);
        assert_eq!(t.ancestor_at(NodeId::new(2, 3), 1), NodeId::new(1, 1));
    }

    #[test]
    fn masses() {
        let t = binary2();
        let q = FiniteMeasure::new(&t, t.leaves().map(|l| (l, rat(1, 4))).collect()).unwrap();
        assert_eq!(node_mass(&t, &q, t.root()), int(1));
        assert_eq!(node_mass(&t, &q, NodeId::new(2, 1)), rat(1, 4));
        let d = FiniteMeasure::dirac(NodeId::new(2, 0));
        assert_eq!(node_mass(&t, &d, NodeId::new(1, 1)), int(0));
    }

    #[test]
    fn conditional_expectations() {
        let t = ScenarioTree::uniform(&[2]);
        let q = FiniteMeasure::new(&t, [(NodeId::new(1, 0), rat(1, 3)), (NodeId::new(1, 1), rat(2, 3))].into()).unwrap();
        let x: AdaptedProcess = [(NodeId::new(1, 0), vec![int(2)]), (NodeId::new(1, 1), vec![rat(1, 2)])].into();
        assert_eq!(conditional_expectation(&t, &x, &q, t.root()).unwrap(), vec![int(1)]);
        let d = FiniteMeasure::dirac(NodeId::new(1, 0));
        assert_eq!(
            conditional_expectation(&t, &x, &d, NodeId::new(1, 1)),
            Err(ScenarioError::ZeroMass(NodeId::new(1, 1)))
        );
    }

    #[test]
    fn mixing() {
        let a = FiniteMeasure::dirac(NodeId::new(1, 0));
        let b = FiniteMeasure::dirac(NodeId::new(1, 1));
        let m = mix_measures(&[(rat(1, 2), a.clone()), (rat(1, 2), b)]).unwrap();
        assert_eq!(m.weight(NodeId::new(1, 0)), rat(1, 2));
        assert_eq!(mix_measures(&[(int(1), a.clone())]).unwrap(), a);
    }

    #[test]
    fn node_id_round_trip() {
        let n: NodeId = "3:14".parse().unwrap();
        assert_eq!(n, NodeId::new(3, 14));
        assert_eq!(n.to_string(), "3:14");
        assert!("3-14".parse::<NodeId>().is_err());
    }
}
