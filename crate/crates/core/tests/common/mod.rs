//! Fixtures and seeded random generators shared by the integration tests.
#![allow(dead_code)]

use martsel::geometry::bitset::BitSet;
use martsel::geometry::{ClosedPolyhedron, FaceId, SemiOpenPolyhedron};
use martsel::markets::cost::{CostModel, MaxAffine};
use martsel::markets::frictionless::FrictionlessModel;
use martsel::markets::kabanov::KabanovModel;
use martsel::geometry::GeometryError;
use martsel::msp::{MspError, MspInstance};
use martsel::linalg::scale;
use martsel::scalar::{int, ivec, rat};
use martsel::scenario::{NodeMap, ScenarioTree};
use martsel::Scalar;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn pt(x: &[i64]) -> ClosedPolyhedron {
    ClosedPolyhedron::point(ivec(x))
}

/// Axis-aligned box with integer corners.
pub fn boxed(lo: &[i64], hi: &[i64]) -> ClosedPolyhedron {
    let mut pts: Vec<Vec<Scalar>> = vec![vec![]];
    for i in 0..lo.len() {
        pts = pts
            .into_iter()
            .flat_map(|p| {
                [lo[i], hi[i]].into_iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(int(v));
                    q
                })
            })
            .collect();
    }
    ClosedPolyhedron::from_v(lo.len(), pts, vec![], vec![])
}

/// Root `{0}`, children `{0}`, `{1/2}`, `{1}`, no drift.
pub fn three_point_instance() -> MspInstance {
    let tree = ScenarioTree::uniform(&[3]);
    let vals = [int(0), rat(1, 2), int(1)];
    let v = NodeMap::from_fn(&tree, |n| {
        let x = if n.level == 0 { int(0) } else { vals[n.index].clone() };
        SemiOpenPolyhedron::closed(ClosedPolyhedron::point(vec![x]))
    });
    let c = NodeMap::from_fn(&tree, |_| pt(&[0]));
    MspInstance::new(tree, v, c).unwrap()
}

/// Chain of three dates: open segment, open square, open segment, with the
/// upper half-plane as drift set in the middle.
pub fn drift_instance() -> MspInstance {
    let tree = ScenarioTree::uniform(&[1, 1]);
    let segment = boxed(&[-1, 0], &[1, 0]);
    let square = boxed(&[-1, -1], &[1, 1]);
    let v = NodeMap::from_fn(&tree, |n| SemiOpenPolyhedron::relint(if n.level == 1 { square.clone() } else { segment.clone() }));
    let upper = ClosedPolyhedron::cone(2, vec![ivec(&[0, 1])], vec![ivec(&[1, 0])]);
    let c = NodeMap::from_fn(&tree, |n| if n.level == 1 { upper.clone() } else { pt(&[0, 0]) });
    MspInstance::new(tree, v, c).unwrap()
}

pub fn one_period_frictionless(s0: Scalar, kids: &[Scalar], a: ClosedPolyhedron) -> FrictionlessModel {
    let tree = ScenarioTree::uniform(&[kids.len()]);
    let prices = NodeMap::from_fn(&tree, |n| vec![if n.level == 0 { s0.clone() } else { kids[n.index].clone() }]);
    let a = NodeMap::from_fn(&tree, |_| a.clone());
    FrictionlessModel::new(tree, prices, a).unwrap()
}

/// One risky asset with bid-ask intervals per node, unconstrained.
pub fn bid_ask_model(tree: &ScenarioTree, spreads: &NodeMap<(Scalar, Scalar)>) -> KabanovModel {
    let a = NodeMap::from_fn(tree, |_| ClosedPolyhedron::universe(2));
    KabanovModel::bid_ask(tree.clone(), spreads, a).unwrap()
}

pub fn one_period_bid_ask(root: (i64, i64), kids: &[(Scalar, Scalar)]) -> KabanovModel {
    let tree = ScenarioTree::uniform(&[kids.len()]);
    let spreads = NodeMap::from_fn(&tree, |n| if n.level == 0 { (int(root.0), int(root.1)) } else { kids[n.index].clone() });
    bid_ask_model(&tree, &spreads)
}

/// The cost model charging `ask` per unit bought and `bid` per unit sold.
pub fn bid_ask_cost(k: &KabanovModel, spreads: &NodeMap<(Scalar, Scalar)>) -> CostModel {
    let costs = spreads.map(|_, (b, a)| MaxAffine::bid_ask(b.clone(), a.clone()));
    let a = NodeMap::from_fn(&k.tree, |_| ClosedPolyhedron::universe(1));
    CostModel::new(k.tree.clone(), costs, a).unwrap()
}

pub fn random_tree(r: &mut ChaCha8Rng, max_horizon: usize, max_branching: usize, max_nodes: usize) -> ScenarioTree {
    loop {
        let horizon = r.gen_range(1..=max_horizon);
        let mut parents: Vec<Vec<usize>> = Vec::new();
        let mut width = 1;
        let mut total = 1;
        for _ in 0..horizon {
            let mut level = Vec::new();
            for p in 0..width {
                for _ in 0..r.gen_range(1..=max_branching) {
                    level.push(p);
                }
            }
            width = level.len();
            total += width;
            parents.push(level);
        }
        if total <= max_nodes {
            return ScenarioTree::from_parents(&parents).unwrap();
        }
    }
}

pub fn random_vector(r: &mut ChaCha8Rng, d: usize, lo: i64, hi: i64) -> Vec<Scalar> {
    (0..d).map(|_| int(r.gen_range(lo..=hi))).collect()
}

fn nonzero_vector(r: &mut ChaCha8Rng, d: usize, lo: i64, hi: i64) -> Vec<Scalar> {
    loop {
        let v = random_vector(r, d, lo, hi);
        if v.iter().any(|x| !x.is_zero()) {
            return v;
        }
    }
}

/// A random cone: a few rays with positive first coordinate, sometimes a
/// lineality direction, sometimes a halfspace.
pub fn random_cone(r: &mut ChaCha8Rng, d: usize) -> ClosedPolyhedron {
    match r.gen_range(0..10) {
        0 if d > 1 => {
            let mut n = nonzero_vector(r, d, -2, 2);
            n[0] = int(r.gen_range(1..=2));
            ClosedPolyhedron::from_h(d, vec![martsel::geometry::Halfspace { normal: n, offset: int(0) }], vec![])
        }
        1 if d > 1 => {
            let mut l = nonzero_vector(r, d, -1, 1);
            l[0] = int(0);
            if l.iter().all(Scalar::is_zero) {
                l[d - 1] = int(1);
            }
            let mut ray = random_vector(r, d, -2, 2);
            ray[0] = int(1);
            ClosedPolyhedron::cone(d, vec![ray], vec![l])
        }
        _ => {
            let k = r.gen_range(1..=d.min(3) + 1);
            let rays = (0..k)
                .map(|_| {
                    let mut v = random_vector(r, d, -2, 2);
                    v[0] = int(r.gen_range(1..=2));
                    v
                })
                .collect();
            ClosedPolyhedron::cone(d, rays, vec![])
        }
    }
}

/// A random drift cone: mostly `{0}`, otherwise a ray, a halfspace or everything.
pub fn random_drift(r: &mut ChaCha8Rng, d: usize) -> ClosedPolyhedron {
    match r.gen_range(0..10) {
        0..=4 => ClosedPolyhedron::point(vec![int(0); d]),
        5..=6 => ClosedPolyhedron::cone(d, vec![nonzero_vector(r, d, -1, 1)], vec![]),
        7..=8 => ClosedPolyhedron::from_h(d, vec![martsel::geometry::Halfspace { normal: nonzero_vector(r, d, -1, 1), offset: int(0) }], vec![]),
        _ => ClosedPolyhedron::universe(d),
    }
}

/// Included faces closed under joins, always containing the top face.
pub fn join_closed_faces(p: &ClosedPolyhedron, mut pick: impl FnMut(&FaceId) -> bool) -> Vec<FaceId> {
    let faces = p.faces();
    let mut included: Vec<FaceId> = faces.iter().filter(|f| f.id.is_top() || pick(&f.id)).map(|f| f.id.clone()).collect();
    loop {
        let mut grown = false;
        for i in 0..included.len() {
            for j in i + 1..included.len() {
                let meet: BitSet = included[i].0.intersection(&included[j].0);
                let join = p.face_closure(&meet).expect("nonempty join").id;
                if !included.contains(&join) {
                    included.push(join);
                    grown = true;
                }
            }
        }
        if !grown {
            return included;
        }
    }
}

/// Random openness pattern on `p`.
pub fn random_openness(r: &mut ChaCha8Rng, p: ClosedPolyhedron) -> SemiOpenPolyhedron {
    match r.gen_range(0..10) {
        0..=4 => SemiOpenPolyhedron::relint(p),
        5 => SemiOpenPolyhedron::closed(p),
        6..=7 => {
            // everything but the minimal faces
            let faces = p.faces();
            let minimal: Vec<FaceId> = faces
                .iter()
                .filter(|f| !faces.iter().any(|g| g.id != f.id && f.id.0.is_subset(&g.id.0)))
                .map(|f| f.id.clone())
                .collect();
            let included = join_closed_faces(&p, |id| !minimal.contains(id));
            SemiOpenPolyhedron::from_included(p, &included).unwrap()
        }
        _ => {
            let included = join_closed_faces(&p, |_| r.gen_bool(0.4));
            SemiOpenPolyhedron::from_included(p, &included).unwrap()
        }
    }
}

/// A random conical instance within the oracle caps.
pub fn random_conical_instance(r: &mut ChaCha8Rng, max_nodes: usize) -> MspInstance {
    let d = r.gen_range(1..=3);
    let tree = random_tree(r, 3, 3, max_nodes);
    // a small pool of cones shared across nodes makes overlaps likely
    let pool: Vec<ClosedPolyhedron> = (0..3).map(|_| random_cone(r, d)).collect();
    let v = NodeMap::from_fn(&tree, |_| {
        let p = if r.gen_bool(0.6) { pool.choose(r).unwrap().clone() } else { random_cone(r, d) };
        random_openness(r, p)
    });
    let c = NodeMap::from_fn(&tree, |_| random_drift(r, d));
    MspInstance::new(tree, v, c).unwrap()
}

/// A random instance whose `V` values are relatively open cones, as in the
/// currency-market translation.
pub fn random_relint_instance(r: &mut ChaCha8Rng, max_nodes: usize) -> MspInstance {
    let d = r.gen_range(2..=3);
    let tree = random_tree(r, 2, 3, max_nodes);
    let pool: Vec<ClosedPolyhedron> = (0..2).map(|_| random_cone(r, d)).collect();
    let v = NodeMap::from_fn(&tree, |_| {
        let p = if r.gen_bool(0.7) { pool.choose(r).unwrap().clone() } else { random_cone(r, d) };
        SemiOpenPolyhedron::relint(p)
    });
    let c = NodeMap::from_fn(&tree, |_| random_drift(r, d));
    MspInstance::new(tree, v, c).unwrap()
}

/// A random polytope with small integer vertices.
pub fn random_polytope(r: &mut ChaCha8Rng, d: usize) -> ClosedPolyhedron {
    let k = r.gen_range(1..=d + 2);
    let pts = (0..k).map(|_| random_vector(r, d, -2, 2)).collect();
    ClosedPolyhedron::from_v(d, pts, vec![], vec![])
}

pub fn random_semi_open_polytope(r: &mut ChaCha8Rng, d: usize) -> SemiOpenPolyhedron {
    let p = random_polytope(r, d);
    random_openness(r, p)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FamilyKind {
    Open,
    RelativelyOpen,
    Mixed,
}

/// Child sets for the aggregation operators.
pub fn random_family(r: &mut ChaCha8Rng, kind: FamilyKind) -> Vec<SemiOpenPolyhedron> {
    let d = r.gen_range(1..=2);
    let k = r.gen_range(1..=3);
    (0..k)
        .map(|_| match kind {
            FamilyKind::Open => loop {
                let p = random_polytope(r, d);
                if p.is_full_dimensional() {
                    break SemiOpenPolyhedron::relint(p);
                }
            },
            FamilyKind::RelativelyOpen => SemiOpenPolyhedron::relint(random_polytope(r, d)),
            FamilyKind::Mixed => random_semi_open_polytope(r, d),
        })
        .collect()
}

/// `a ⊆ b` for semi-open sets: a relatively open convex subset of `cl b`
/// sits inside one relatively open face, so one sample per face suffices.
pub fn semi_open_subset(a: &SemiOpenPolyhedron, b: &SemiOpenPolyhedron) -> bool {
    a.is_empty() || (a.closure().is_subset(b.closure()) && a.included_faces().all(|f| b.member(&a.face_sample(f))))
}

fn scaled(p: &ClosedPolyhedron, s: &Scalar) -> ClosedPolyhedron {
    let pts = p.points().iter().map(|x| scale(x, s)).collect();
    ClosedPolyhedron::from_v(p.dim(), pts, p.rays().to_vec(), p.lineality().to_vec())
}

/// Membership of `y` in the intersection over children `U` of the union
/// over `lambda = k/64` of `lambda U + (1 - lambda) S`. Each sum is the
/// union of `ri(lambda F + (1 - lambda) G)` over included faces, and only
/// faces inside the face of `cl S` whose relative interior holds `y` can
/// contribute.
pub fn flat_by_grid(children: &[SemiOpenPolyhedron], s: &SemiOpenPolyhedron, y: &[Scalar]) -> bool {
    let cl = s.closure();
    if !cl.contains(y) {
        return false;
    }
    let home = cl.tight_at(y);
    let inside = |p: &ClosedPolyhedron, f: &martsel::geometry::Face| home.is_subset(&cl.tight_at(&p.face_sample(f)));
    let gs: Vec<ClosedPolyhedron> = s.included_faces().filter(|g| inside(cl, g)).map(|g| cl.face_polyhedron(g)).collect();
    children.iter().all(|u| {
        let fs: Vec<ClosedPolyhedron> = u
            .included_faces()
            .filter(|f| inside(u.closure(), f))
            .map(|f| u.closure().face_polyhedron(f))
            .collect();
        (1..64).any(|k| {
            let lambda = rat(k, 64);
            let rest = &Scalar::one() - &lambda;
            fs.iter().any(|f| {
                let lf = scaled(f, &lambda);
                gs.iter().any(|g| lf.minkowski_sum(&scaled(g, &rest)).in_relative_interior(y))
            })
        })
    })
}

/// Whether the error is the representation limit: a set that is convex but
/// not a union of relatively open faces of its closure.
pub fn unrepresentable<T>(r: &Result<T, MspError>) -> bool {
    matches!(r, Err(MspError::Geometry { source: GeometryError::ClosureViolation(_), .. }))
}
