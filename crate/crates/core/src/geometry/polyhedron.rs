//! Closed rational polyhedra held in both representations.

use std::collections::{BTreeSet, VecDeque};

use super::bitset::BitSet;
use super::dd::cone_generators;
use super::GeometryError;
use crate::linalg::{add, dot, is_zero, mean, neg, rank, span_basis, sub, unit, zeros, Reducer, Vector};
use crate::scalar::{primitive, Scalar};

/// `normal . x >= offset`
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Halfspace {
    pub normal: Vector,
    pub offset: Scalar,
}

/// `normal . x = offset`
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Hyperplane {
    pub normal: Vector,
    pub offset: Scalar,
}

/// A closed convex polyhedron `conv(points) + cone(rays) + span(lineality)`,
/// equivalently `{x : a_i . x >= b_i, e_j . x = f_j}`.
///
/// Both representations are kept in a canonical, irredundant form so that two
/// polyhedra are equal as sets iff they are equal as values. The inequalities
/// are exactly the facets; points and rays are reduced modulo the lineality
/// space; inequalities are reduced modulo the equalities.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClosedPolyhedron {
    dim: usize,
    inequalities: Vec<Halfspace>,
    equalities: Vec<Hyperplane>,
    points: Vec<Vector>,
    rays: Vec<Vector>,
    lineality: Vec<Vector>,
    point_tight: Vec<BitSet>,
    ray_tight: Vec<BitSet>,
}

/// The face of a polyhedron on which exactly the listed facet inequalities
/// are tight. The top face is the empty set.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FaceId(pub BitSet);

impl FaceId {
    pub fn top() -> Self {
        FaceId(BitSet::default())
    }

    pub fn from_indices(idx: &[usize]) -> Self {
        FaceId(BitSet::from_indices(0, idx.iter().copied()))
    }

    pub fn indices(&self) -> Vec<usize> {
        self.0.iter().collect()
    }

    pub fn is_top(&self) -> bool {
        self.0.is_empty()
    }

    /// Whether this face lies inside `other` (more tight constraints).
    pub fn is_subface_of(&self, other: &FaceId) -> bool {
        other.0.is_subset(&self.0)
    }
}

/// A nonempty face together with the generators lying on it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Face {
    pub id: FaceId,
    pub points: Vec<usize>,
    pub rays: Vec<usize>,
}

fn hom_point(p: &[Scalar]) -> Vector {
    let mut v = Vec::with_capacity(p.len() + 1);
    v.push(Scalar::one());
    v.extend_from_slice(p);
    v
}

fn hom_dir(r: &[Scalar]) -> Vector {
    let mut v = Vec::with_capacity(r.len() + 1);
    v.push(Scalar::zero());
    v.extend_from_slice(r);
    v
}

type VRep = (Vec<Vector>, Vec<Vector>, Vec<Vector>);

fn h_to_v(dim: usize, ineqs: &[Halfspace], eqs: &[Hyperplane]) -> Option<VRep> {
    let mut hi: Vec<Vector> = ineqs
        .iter()
        .map(|h| {
            let mut v = vec![-&h.offset];
            v.extend_from_slice(&h.normal);
            v
        })
        .collect();
    hi.push(unit(dim + 1, 0));
    let he: Vec<Vector> = eqs
        .iter()
        .map(|h| {
            let mut v = vec![-&h.offset];
            v.extend_from_slice(&h.normal);
            v
        })
        .collect();
    let g = cone_generators(dim + 1, &he, &hi);
    let mut points = Vec::new();
    let mut rays = Vec::new();
    for r in g.rays {
        if r[0].is_zero() {
            rays.push(r[1..].to_vec());
        } else {
            let inv = r[0].recip();
            points.push(r[1..].iter().map(|x| x * &inv).collect());
        }
    }
    if points.is_empty() {
        return None;
    }
    let lineality = g
        .lineality
        .into_iter()
        .map(|l| {
            debug_assert!(l[0].is_zero());
            l[1..].to_vec()
        })
        .collect();
    Some((points, rays, lineality))
}

fn v_to_h(dim: usize, points: &[Vector], rays: &[Vector], lineality: &[Vector]) -> (Vec<Halfspace>, Vec<Hyperplane>) {
    let ineqs: Vec<Vector> = points.iter().map(|p| hom_point(p)).chain(rays.iter().map(|r| hom_dir(r))).collect();
    let eqs: Vec<Vector> = lineality.iter().map(|l| hom_dir(l)).collect();
    let g = cone_generators(dim + 1, &eqs, &ineqs);
    let mut hs = Vec::new();
    for r in g.rays {
        if is_zero(&r[1..]) {
            continue;
        }
        hs.push(Halfspace { normal: r[1..].to_vec(), offset: -&r[0] });
    }
    let es = g
        .lineality
        .into_iter()
        .filter(|l| !is_zero(&l[1..]))
        .map(|l| Hyperplane { normal: l[1..].to_vec(), offset: -&l[0] })
        .collect();
    (hs, es)
}

impl ClosedPolyhedron {
    /// `{x : a . x >= b for each inequality, e . x = f for each equality}`.
    pub fn from_h(dim: usize, inequalities: Vec<Halfspace>, equalities: Vec<Hyperplane>) -> Self {
        for h in &inequalities {
            assert_eq!(h.normal.len(), dim, "halfspace dimension");
        }
        for h in &equalities {
            assert_eq!(h.normal.len(), dim, "hyperplane dimension");
        }
        match h_to_v(dim, &inequalities, &equalities) {
            None => Self::empty(dim),
            Some((p, r, l)) => Self::from_v(dim, p, r, l),
        }
    }

    /// `conv(points) + cone(rays) + span(lineality)`; empty when `points` is.
    pub fn from_v(dim: usize, points: Vec<Vector>, rays: Vec<Vector>, lineality: Vec<Vector>) -> Self {
        for v in points.iter().chain(&rays).chain(&lineality) {
            assert_eq!(v.len(), dim, "generator dimension");
        }
        if points.is_empty() {
            return Self::empty(dim);
        }
        let (hs, es) = v_to_h(dim, &points, &rays, &lineality);
        let (p, r, l) = h_to_v(dim, &hs, &es).expect("nonempty V-representation");
        Self::canonical(dim, hs, es, p, r, l)
    }

    fn canonical(
        dim: usize,
        ineqs: Vec<Halfspace>,
        eqs: Vec<Hyperplane>,
        points: Vec<Vector>,
        rays: Vec<Vector>,
        lineality: Vec<Vector>,
    ) -> Self {
        let lineality = span_basis(&lineality);
        let lred = Reducer::new(&lineality);
        let mut rays: Vec<Vector> = rays
            .iter()
            .map(|r| lred.reduce(r))
            .filter(|r| !is_zero(r))
            .map(|r| primitive(&r))
            .collect();
        rays.sort();
        rays.dedup();
        let mut points: Vec<Vector> = points.iter().map(|p| lred.reduce(p)).collect();
        points.sort();
        points.dedup();

        let aug: Vec<Vector> = eqs
            .iter()
            .map(|e| {
                let mut v = e.normal.clone();
                v.push(e.offset.clone());
                v
            })
            .collect();
        let eq_rows = span_basis(&aug);
        let ered = Reducer::new(&eq_rows);
        let equalities: Vec<Hyperplane> = eq_rows
            .into_iter()
            .map(|mut v| {
                let offset = v.pop().unwrap();
                Hyperplane { normal: v, offset }
            })
            .collect();
        let mut inequalities: Vec<Halfspace> = ineqs
            .iter()
            .filter_map(|h| {
                let mut v = h.normal.clone();
                v.push(h.offset.clone());
                let mut v = primitive(&ered.reduce(&v));
                let offset = v.pop().unwrap();
                if is_zero(&v) {
                    None
                } else {
                    Some(Halfspace { normal: v, offset })
                }
            })
            .collect();
        inequalities.sort();
        inequalities.dedup();

        let mut p = ClosedPolyhedron {
            dim,
            inequalities,
            equalities,
            points,
            rays,
            lineality,
            point_tight: Vec::new(),
            ray_tight: Vec::new(),
        };
        p.compute_tight();
        p
    }

    fn compute_tight(&mut self) {
        let m = self.inequalities.len();
        self.point_tight = self
            .points
            .iter()
            .map(|x| {
                BitSet::from_indices(
                    m,
                    (0..m).filter(|&i| dot(&self.inequalities[i].normal, x) == self.inequalities[i].offset),
                )
            })
            .collect();
        self.ray_tight = self
            .rays
            .iter()
            .map(|r| BitSet::from_indices(m, (0..m).filter(|&i| dot(&self.inequalities[i].normal, r).is_zero())))
            .collect();
    }

    pub fn empty(dim: usize) -> Self {
        ClosedPolyhedron {
            dim,
            inequalities: Vec::new(),
            equalities: vec![Hyperplane { normal: zeros(dim), offset: Scalar::one() }],
            points: Vec::new(),
            rays: Vec::new(),
            lineality: Vec::new(),
            point_tight: Vec::new(),
            ray_tight: Vec::new(),
        }
    }

    pub fn universe(dim: usize) -> Self {
        Self::from_v(dim, vec![zeros(dim)], Vec::new(), (0..dim).map(|i| unit(dim, i)).collect())
    }

    pub fn point(x: Vector) -> Self {
        let d = x.len();
        Self::from_v(d, vec![x], Vec::new(), Vec::new())
    }

    /// The cone generated by `rays` and `lineality` with apex at the origin.
    pub fn cone(dim: usize, rays: Vec<Vector>, lineality: Vec<Vector>) -> Self {
        Self::from_v(dim, vec![zeros(dim)], rays, lineality)
    }

    pub fn nonneg_orthant(dim: usize) -> Self {
        Self::cone(dim, (0..dim).map(|i| unit(dim, i)).collect(), Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn inequalities(&self) -> &[Halfspace] {
        &self.inequalities
    }

    pub fn equalities(&self) -> &[Hyperplane] {
        &self.equalities
    }

    pub fn points(&self) -> &[Vector] {
        &self.points
    }

    pub fn rays(&self) -> &[Vector] {
        &self.rays
    }

    pub fn lineality(&self) -> &[Vector] {
        &self.lineality
    }

    pub fn contains(&self, x: &[Scalar]) -> bool {
        if self.is_empty() {
            return false;
        }
        self.equalities.iter().all(|e| dot(&e.normal, x) == e.offset)
            && self.inequalities.iter().all(|h| dot(&h.normal, x) >= h.offset)
    }

    /// Whether `r` is a direction of recession.
    pub fn contains_direction(&self, r: &[Scalar]) -> bool {
        self.equalities.iter().all(|e| dot(&e.normal, r).is_zero())
            && self.inequalities.iter().all(|h| !dot(&h.normal, r).is_negative())
    }

    /// Facets tight at `x`, which is assumed to lie in the polyhedron.
    pub fn tight_at(&self, x: &[Scalar]) -> BitSet {
        let m = self.inequalities.len();
        BitSet::from_indices(m, (0..m).filter(|&i| dot(&self.inequalities[i].normal, x) == self.inequalities[i].offset))
    }

    /// The smallest face containing `x`.
    pub fn minimal_face(&self, x: &[Scalar]) -> Result<FaceId, GeometryError> {
        if x.len() != self.dim {
            return Err(GeometryError::DimensionMismatch(self.dim, x.len()));
        }
        if !self.contains(x) {
            return Err(GeometryError::NotMember);
        }
        Ok(FaceId(self.tight_at(x)))
    }

    pub fn in_relative_interior(&self, x: &[Scalar]) -> bool {
        self.contains(x) && self.tight_at(x).is_empty()
    }

    pub fn is_cone(&self) -> bool {
        self.points.len() == 1 && is_zero(&self.points[0])
    }

    /// Dimension of the affine hull; -1 is reported as `None` for the empty set.
    pub fn affine_dim(&self) -> Option<usize> {
        if self.is_empty() {
            return None;
        }
        Some(self.dim - rank(&self.equalities.iter().map(|e| e.normal.clone()).collect::<Vec<_>>()))
    }

    pub fn is_full_dimensional(&self) -> bool {
        !self.is_empty() && self.equalities.is_empty()
    }

    /// Generators of the face with tight set `id`, or `None` if that face is empty.
    fn face_generators(&self, tight: &BitSet) -> Option<(Vec<usize>, Vec<usize>)> {
        let pts: Vec<usize> = (0..self.points.len()).filter(|&i| tight.is_subset(&self.point_tight[i])).collect();
        if pts.is_empty() {
            return None;
        }
        let rays = (0..self.rays.len()).filter(|&i| tight.is_subset(&self.ray_tight[i])).collect();
        Some((pts, rays))
    }

    /// The full tight set of the smallest face containing the generators
    /// selected by `tight`, or `None` if there is no such nonempty face.
    pub fn face_closure(&self, tight: &BitSet) -> Option<Face> {
        let (pts, rays) = self.face_generators(tight)?;
        let mut acc = self.point_tight[pts[0]].clone();
        for &p in &pts[1..] {
            acc = acc.intersection(&self.point_tight[p]);
        }
        for &r in &rays {
            acc = acc.intersection(&self.ray_tight[r]);
        }
        Some(Face { id: FaceId(acc), points: pts, rays })
    }

    pub fn face(&self, id: &FaceId) -> Option<Face> {
        self.face_closure(&id.0).filter(|f| f.id == *id)
    }

    /// All nonempty faces, top face first, then by number of tight facets.
    pub fn faces(&self) -> Vec<Face> {
        if self.is_empty() {
            return Vec::new();
        }
        let top = self.face_closure(&BitSet::default()).expect("nonempty");
        let mut seen: BTreeSet<FaceId> = BTreeSet::new();
        seen.insert(top.id.clone());
        let mut out = vec![top.clone()];
        let mut queue = VecDeque::from([top]);
        while let Some(f) = queue.pop_front() {
            for i in 0..self.inequalities.len() {
                if f.id.0.contains(i) {
                    continue;
                }
                let mut s = f.id.0.clone();
                s.insert(i);
                if let Some(g) = self.face_closure(&s) {
                    if seen.insert(g.id.clone()) {
                        out.push(g.clone());
                        queue.push_back(g);
                    }
                }
            }
        }
        out.sort_by(|a, b| a.id.0.count().cmp(&b.id.0.count()).then_with(|| a.id.cmp(&b.id)));
        out
    }

    /// A point in the relative interior of the face.
    pub fn face_sample(&self, f: &Face) -> Vector {
        let pts: Vec<Vector> = f.points.iter().map(|&i| self.points[i].clone()).collect();
        let mut x = mean(&pts);
        for &r in &f.rays {
            x = add(&x, &self.rays[r]);
        }
        x
    }

    pub fn face_polyhedron(&self, f: &Face) -> ClosedPolyhedron {
        ClosedPolyhedron::from_v(
            self.dim,
            f.points.iter().map(|&i| self.points[i].clone()).collect(),
            f.rays.iter().map(|&i| self.rays[i].clone()).collect(),
            self.lineality.clone(),
        )
    }

    /// A point in the relative interior.
    pub fn sample_ri_point(&self) -> Result<Vector, GeometryError> {
        if self.is_empty() {
            return Err(GeometryError::Empty);
        }
        let top = self.face_closure(&BitSet::default()).expect("nonempty");
        Ok(self.face_sample(&top))
    }

    /// A point of the affine hull and a basis of its direction space.
    pub fn affine_hull(&self) -> Option<(Vector, Vec<Vector>)> {
        if self.is_empty() {
            return None;
        }
        let p0 = &self.points[0];
        let mut dirs: Vec<Vector> = self.points[1..].iter().map(|p| sub(p, p0)).collect();
        dirs.extend(self.rays.iter().cloned());
        dirs.extend(self.lineality.iter().cloned());
        Some((p0.clone(), span_basis(&dirs)))
    }

    pub fn recession_cone(&self) -> ClosedPolyhedron {
        if self.is_empty() {
            return ClosedPolyhedron::empty(self.dim);
        }
        ClosedPolyhedron::cone(self.dim, self.rays.clone(), self.lineality.clone())
    }

    pub fn intersect(&self, other: &ClosedPolyhedron) -> ClosedPolyhedron {
        assert_eq!(self.dim, other.dim);
        if self.is_empty() || other.is_empty() {
            return ClosedPolyhedron::empty(self.dim);
        }
        let mut ineqs = self.inequalities.clone();
        ineqs.extend(other.inequalities.iter().cloned());
        let mut eqs = self.equalities.clone();
        eqs.extend(other.equalities.iter().cloned());
        ClosedPolyhedron::from_h(self.dim, ineqs, eqs)
    }

    pub fn minkowski_sum(&self, other: &ClosedPolyhedron) -> ClosedPolyhedron {
        assert_eq!(self.dim, other.dim);
        if self.is_empty() || other.is_empty() {
            return ClosedPolyhedron::empty(self.dim);
        }
        let mut pts = Vec::with_capacity(self.points.len() * other.points.len());
        for p in &self.points {
            for q in &other.points {
                pts.push(add(p, q));
            }
        }
        let mut rays = self.rays.clone();
        rays.extend(other.rays.iter().cloned());
        let mut lin = self.lineality.clone();
        lin.extend(other.lineality.iter().cloned());
        ClosedPolyhedron::from_v(self.dim, pts, rays, lin)
    }

    pub fn negate(&self) -> ClosedPolyhedron {
        if self.is_empty() {
            return self.clone();
        }
        ClosedPolyhedron::from_v(
            self.dim,
            self.points.iter().map(|p| neg(p)).collect(),
            self.rays.iter().map(|r| neg(r)).collect(),
            self.lineality.clone(),
        )
    }

    /// `{y : y . x >= 0 for all x}` for a cone.
    pub fn polar(&self) -> Result<ClosedPolyhedron, GeometryError> {
        if !self.is_cone() {
            return Err(GeometryError::NotACone);
        }
        let ineqs = self.rays.iter().map(|r| Halfspace { normal: r.clone(), offset: Scalar::zero() }).collect();
        let eqs = self.lineality.iter().map(|l| Hyperplane { normal: l.clone(), offset: Scalar::zero() }).collect();
        Ok(ClosedPolyhedron::from_h(self.dim, ineqs, eqs))
    }

    /// Whether every point of `self` lies in `other`.
    pub fn is_subset(&self, other: &ClosedPolyhedron) -> bool {
        if self.is_empty() {
            return true;
        }
        self.points.iter().all(|p| other.contains(p))
            && self.rays.iter().all(|r| other.contains_direction(r))
            && self.lineality.iter().all(|l| other.contains_direction(l) && other.contains_direction(&neg(l)))
    }

    /// Convex hull of the union of the given polyhedra (closed).
    pub fn hull_of(dim: usize, parts: &[&ClosedPolyhedron]) -> ClosedPolyhedron {
        let mut pts = Vec::new();
        let mut rays = Vec::new();
        let mut lin = Vec::new();
        for p in parts {
            if p.is_empty() {
                continue;
            }
            pts.extend(p.points.iter().cloned());
            rays.extend(p.rays.iter().cloned());
            lin.extend(p.lineality.iter().cloned());
        }
        ClosedPolyhedron::from_v(dim, pts, rays, lin)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{int, ivec, rat};

    pub(crate) fn unit_square() -> ClosedPolyhedron {
        ClosedPolyhedron::from_v(2, vec![ivec(&[0, 0]), ivec(&[1, 0]), ivec(&[0, 1]), ivec(&[1, 1])], vec![], vec![])
    }

    #[test]
    fn square_both_representations() {
        let sq = unit_square();
        assert_eq!(sq.inequalities().len(), 4);
        assert_eq!(sq.points().len(), 4);
        let from_h = ClosedPolyhedron::from_h(
            2,
            vec![
                Halfspace { normal: ivec(&[1, 0]), offset: int(0) },
                Halfspace { normal: ivec(&[0, 1]), offset: int(0) },
                Halfspace { normal: ivec(&[-1, 0]), offset: int(-1) },
                Halfspace { normal: ivec(&[0, -1]), offset: int(-1) },
                Halfspace { normal: ivec(&[-1, -1]), offset: int(-5) },
            ],
            vec![],
        );
        assert_eq!(sq, from_h);
        assert_eq!(sq.faces().len(), 9);
    }

    #[test]
    fn minimal_faces_of_square() {
        let sq = unit_square();
        assert!(sq.minimal_face(&[rat(1, 2), rat(1, 2)]).unwrap().is_top());
        let edge = sq.minimal_face(&[int(0), rat(1, 2)]).unwrap();
        assert_eq!(edge.indices().len(), 1);
        let h = &sq.inequalities()[edge.indices()[0]];
        assert_eq!(dot(&h.normal, &ivec(&[0, 7])), h.offset);
        assert_eq!(sq.minimal_face(&[int(2), int(0)]), Err(GeometryError::NotMember));
    }

    #[test]
    fn cone_facet_face() {
        let c = ClosedPolyhedron::cone(2, vec![ivec(&[1, 1]), ivec(&[-1, 1])], vec![]);
        let f = c.minimal_face(&ivec(&[1, 1])).unwrap();
        let face = c.face(&f).unwrap();
        assert_eq!(c.face_polyhedron(&face), ClosedPolyhedron::cone(2, vec![ivec(&[1, 1])], vec![]));
    }

    #[test]
    fn recession_and_polar() {
        let half = ClosedPolyhedron::from_h(1, vec![Halfspace { normal: ivec(&[1]), offset: int(1) }], vec![]);
        assert_eq!(half.recession_cone(), ClosedPolyhedron::cone(1, vec![ivec(&[1])], vec![]));
        let orth = ClosedPolyhedron::nonneg_orthant(3);
        assert_eq!(orth.polar().unwrap(), orth);
        assert_eq!(ClosedPolyhedron::point(zeros(2)).polar().unwrap(), ClosedPolyhedron::universe(2));
        assert_eq!(half.polar(), Err(GeometryError::NotACone));
    }

    #[test]
    fn infeasible_is_empty() {
        let p = ClosedPolyhedron::from_h(
            1,
            vec![
                Halfspace { normal: ivec(&[1]), offset: int(1) },
                Halfspace { normal: ivec(&[-1]), offset: int(0) },
            ],
            vec![],
        );
        assert!(p.is_empty());
        assert_eq!(p, ClosedPolyhedron::empty(1));
    }

    #[test]
    fn line_with_lineality() {
        let line = ClosedPolyhedron::from_v(2, vec![ivec(&[3, 1])], vec![], vec![ivec(&[2, 0])]);
        assert_eq!(line.points(), &[ivec(&[0, 1])]);
        assert!(line.contains(&ivec(&[-7, 1])));
        assert_eq!(line.affine_dim(), Some(1));
        assert_eq!(line.faces().len(), 1);
    }
}
