//! Convex sets that are unions of relatively open faces of a closed polyhedron.

use std::collections::BTreeMap;

use super::polyhedron::{ClosedPolyhedron, Face, FaceId};
use super::GeometryError;
use crate::linalg::{add, sub, Vector};
use crate::scalar::Scalar;

/// A closed polyhedron with an inclusion flag on every nonempty face.
///
/// The set is the union of the relative interiors of the included faces. When
/// nonempty, the top face is always included and the stored closure is the
/// actual closure of the set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SemiOpenPolyhedron {
    closure: ClosedPolyhedron,
    faces: Vec<Face>,
    flags: BTreeMap<FaceId, bool>,
}

impl SemiOpenPolyhedron {
    pub fn empty(dim: usize) -> Self {
        SemiOpenPolyhedron { closure: ClosedPolyhedron::empty(dim), faces: Vec::new(), flags: BTreeMap::new() }
    }

    pub fn closed(p: ClosedPolyhedron) -> Self {
        let faces = p.faces();
        let flags = faces.iter().map(|f| (f.id.clone(), true)).collect();
        SemiOpenPolyhedron { closure: p, faces, flags }
    }

    /// The relative interior of `p`.
    pub fn relint(p: ClosedPolyhedron) -> Self {
        let faces = p.faces();
        let flags = faces.iter().map(|f| (f.id.clone(), f.id.is_top())).collect();
        SemiOpenPolyhedron { closure: p, faces, flags }
    }

    /// Builds the set from explicit per-face flags keyed by tight-index sets.
    /// Faces missing from `included` are excluded.
    pub fn from_included(p: ClosedPolyhedron, included: &[FaceId]) -> Result<Self, GeometryError> {
        let faces = p.faces();
        let flags: Vec<bool> = faces.iter().map(|f| included.contains(&f.id)).collect();
        Self::from_face_flags(p, faces, flags)
    }

    /// Flags each face of `candidate` by evaluating `oracle` on a relative
    /// interior sample, probing along rays and lineality directions to catch
    /// sets that are not unions of relatively open faces.
    pub fn from_oracle<F>(candidate: ClosedPolyhedron, oracle: F) -> Result<Self, GeometryError>
    where
        F: Fn(&[Scalar]) -> Result<bool, GeometryError>,
    {
        if candidate.is_empty() {
            return Ok(Self::empty(candidate.dim()));
        }
        let (faces, states) = face_states(&candidate, oracle)?;
        let mut flags = Vec::with_capacity(faces.len());
        for (f, st) in faces.iter().zip(states) {
            match st {
                Some(b) => flags.push(b),
                None => {
                    return Err(GeometryError::ClosureViolation(format!(
                        "membership is not constant on the face with tight set {:?}",
                        f.id.indices()
                    )))
                }
            }
        }
        Self::from_face_flags(candidate, faces, flags)
    }

    /// Builds the set from a flag per face of `p.faces()`.
    pub(crate) fn from_flags(p: ClosedPolyhedron, faces: Vec<Face>, flags: Vec<bool>) -> Result<Self, GeometryError> {
        if p.is_empty() {
            return Ok(Self::empty(p.dim()));
        }
        Self::from_face_flags(p, faces, flags)
    }

    /// Normalizes a flag table: shrinks the closure to the largest included
    /// face and checks that the included faces form a convex union.
    fn from_face_flags(p: ClosedPolyhedron, faces: Vec<Face>, flags: Vec<bool>) -> Result<Self, GeometryError> {
        let dim = p.dim();
        let included: Vec<&Face> = faces.iter().zip(&flags).filter(|(_, &b)| b).map(|(f, _)| f).collect();
        if included.is_empty() {
            return Ok(Self::empty(dim));
        }
        let g = included.iter().min_by_key(|f| f.id.0.count()).unwrap();
        if !included.iter().all(|f| f.id.is_subface_of(&g.id)) {
            return Err(GeometryError::ClosureViolation("included faces have no common maximal face".into()));
        }
        for (i, a) in included.iter().enumerate() {
            for b in &included[i + 1..] {
                let meet = a.id.0.intersection(&b.id.0);
                let join = p.face_closure(&meet).expect("join of nonempty faces");
                let ok = faces.iter().zip(&flags).any(|(f, &fl)| fl && f.id == join.id);
                if !ok {
                    return Err(GeometryError::ClosureViolation(format!(
                        "segment between faces {:?} and {:?} leaves the set",
                        a.id.indices(),
                        b.id.indices()
                    )));
                }
            }
        }
        if g.id.is_top() {
            let flags = faces.iter().zip(flags).map(|(f, b)| (f.id.clone(), b)).collect();
            return Ok(SemiOpenPolyhedron { closure: p, faces, flags });
        }
        let sub = p.face_polyhedron(g);
        let old: BTreeMap<FaceId, bool> = faces.iter().zip(&flags).map(|(f, &b)| (f.id.clone(), b)).collect();
        let sub_faces = sub.faces();
        let mut sub_flags = BTreeMap::new();
        for f in &sub_faces {
            let s = sub.face_sample(f);
            let id = FaceId(p.tight_at(&s));
            sub_flags.insert(f.id.clone(), old.get(&id).copied().unwrap_or(false));
        }
        Ok(SemiOpenPolyhedron { closure: sub, faces: sub_faces, flags: sub_flags })
    }

    pub fn dim(&self) -> usize {
        self.closure.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.closure.is_empty()
    }

    pub fn closure(&self) -> &ClosedPolyhedron {
        &self.closure
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn is_included(&self, id: &FaceId) -> bool {
        self.flags.get(id).copied().unwrap_or(false)
    }

    pub fn included_faces(&self) -> impl Iterator<Item = &Face> {
        self.faces.iter().filter(|f| self.is_included(&f.id))
    }

    pub fn member(&self, x: &[Scalar]) -> bool {
        if x.len() != self.dim() || !self.closure.contains(x) {
            return false;
        }
        self.is_included(&FaceId(self.closure.tight_at(x)))
    }

    pub fn relative_interior(&self) -> Self {
        if self.is_empty() {
            return self.clone();
        }
        Self::relint(self.closure.clone())
    }

    pub fn is_closed(&self) -> bool {
        self.flags.values().all(|&b| b)
    }

    pub fn is_relatively_open(&self) -> bool {
        self.flags.iter().all(|(id, &b)| b == id.is_top())
    }

    /// A point in the relative interior.
    pub fn sample_ri_point(&self) -> Result<Vector, GeometryError> {
        self.closure.sample_ri_point()
    }

    pub fn face_sample(&self, f: &Face) -> Vector {
        self.closure.face_sample(f)
    }

    pub fn affine_hull(&self) -> Option<(Vector, Vec<Vector>)> {
        self.closure.affine_hull()
    }

    /// Whether the closure is a cone with apex at the origin.
    pub fn is_cone(&self) -> bool {
        self.closure.is_cone()
    }

    /// `-S`
    pub fn negate(&self) -> Self {
        if self.is_empty() {
            return self.clone();
        }
        let cl = self.closure.negate();
        let faces = cl.faces();
        let flags = faces
            .iter()
            .map(|f| {
                let s = crate::linalg::neg(&cl.face_sample(f));
                (f.id.clone(), self.member(&s))
            })
            .collect();
        SemiOpenPolyhedron { closure: cl, faces, flags }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{int, ivec, rat};

    fn segment(a: i64, b: i64) -> ClosedPolyhedron {
        ClosedPolyhedron::from_v(1, vec![ivec(&[a]), ivec(&[b])], vec![], vec![])
    }

    #[test]
    fn open_and_half_open_intervals() {
        let open = SemiOpenPolyhedron::relint(segment(0, 1));
        assert!(!open.member(&[int(0)]));
        assert!(open.member(&[rat(1, 2)]));
        let cl = segment(0, 1);
        let one = FaceId(cl.tight_at(&[int(1)]));
        let zero = FaceId(cl.tight_at(&[int(0)]));
        let half = SemiOpenPolyhedron::from_included(cl, &[FaceId::top(), zero]).unwrap();
        assert!(!half.member(&[int(1)]));
        assert!(half.member(&[int(0)]));
        assert!(!half.is_included(&one));
    }

    #[test]
    fn ri_and_closure() {
        let s = SemiOpenPolyhedron::closed(ClosedPolyhedron::from_v(
            2,
            vec![ivec(&[0, 0]), ivec(&[1, 0])],
            vec![],
            vec![],
        ));
        let ri = s.relative_interior();
        assert!(ri.member(&[rat(1, 3), int(0)]));
        assert!(!ri.member(&[int(0), int(0)]));
        assert_eq!(ri.closure(), s.closure());
    }

    #[test]
    fn nonconvex_flags_rejected() {
        let cl = segment(0, 1);
        let zero = FaceId(cl.tight_at(&[int(0)]));
        assert!(matches!(
            SemiOpenPolyhedron::from_included(cl, &[zero.clone(), FaceId(segment(0, 1).tight_at(&[int(1)]))]),
            Err(GeometryError::ClosureViolation(_))
        ));
        // a lone vertex shrinks the closure to that vertex
        let p = SemiOpenPolyhedron::from_included(segment(0, 1), &[zero]).unwrap();
        assert_eq!(p.closure(), &ClosedPolyhedron::point(ivec(&[0])));
        assert!(p.member(&[int(0)]));
    }
}

/// Membership of the relative interior of each face of `candidate`:
/// `Some(b)` when the sample and every probe agree on `b`, `None` when the
/// face is only partly covered.
pub(crate) fn face_states<F>(candidate: &ClosedPolyhedron, oracle: F) -> Result<(Vec<Face>, Vec<Option<bool>>), GeometryError>
where
    F: Fn(&[Scalar]) -> Result<bool, GeometryError>,
{
    let faces = candidate.faces();
    let mut states = Vec::with_capacity(faces.len());
    for f in &faces {
        let s = candidate.face_sample(f);
        let flag = oracle(&s)?;
        let mut probes: Vec<Vector> = f.rays.iter().map(|&r| add(&s, &candidate.rays()[r])).collect();
        for l in candidate.lineality() {
            probes.push(add(&s, l));
            probes.push(sub(&s, l));
        }
        let mut constant = true;
        for q in probes {
            if oracle(&q)? != flag {
                constant = false;
                break;
            }
        }
        states.push(constant.then_some(flag));
    }
    Ok((faces, states))
}
