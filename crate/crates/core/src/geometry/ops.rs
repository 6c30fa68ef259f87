//! Set operations on semi-open polyhedra.

use std::cell::RefCell;
use std::collections::HashMap;

use super::polyhedron::{ClosedPolyhedron, Face, FaceId};
use super::semi_open::{face_states, SemiOpenPolyhedron};
use super::GeometryError;
use crate::linalg::{add, affine_dependence, dot, mean, scale, sub, zeros, Vector};
use crate::lp::{LinearProgram, LpOutcome, Relation};
use crate::scalar::Scalar;

/// One term `(weight, point, child index)` of a convex decomposition.
pub type Witness = (Scalar, Vector, usize);

fn check_dims(a: usize, b: usize) -> Result<(), GeometryError> {
    if a == b {
        Ok(())
    } else {
        Err(GeometryError::DimensionMismatch(a, b))
    }
}

pub fn intersect(a: &SemiOpenPolyhedron, b: &SemiOpenPolyhedron) -> Result<SemiOpenPolyhedron, GeometryError> {
    check_dims(a.dim(), b.dim())?;
    if a.is_empty() || b.is_empty() {
        return Ok(SemiOpenPolyhedron::empty(a.dim()));
    }
    let p = a.closure().intersect(b.closure());
    SemiOpenPolyhedron::from_oracle(p, |x| Ok(a.member(x) && b.member(x)))
}

/// Intersection with a closed polyhedron.
pub fn restrict(a: &SemiOpenPolyhedron, p: &ClosedPolyhedron) -> Result<SemiOpenPolyhedron, GeometryError> {
    intersect(a, &SemiOpenPolyhedron::closed(p.clone()))
}

/// Adds to `lp` the constraint `v in P` for variables `offset..offset+d`,
/// shifted so that the constrained expression is `sign * v + shift`.
fn constrain_membership(
    lp: &mut LinearProgram,
    p: &ClosedPolyhedron,
    offset: usize,
    sign: &Scalar,
    shift: &[Scalar],
) {
    for e in p.equalities() {
        let coeffs = scale(&e.normal, sign);
        lp.constrain_dense(offset, &coeffs, Relation::Eq, &e.offset - &dot(&e.normal, shift));
    }
    for h in p.inequalities() {
        let coeffs = scale(&h.normal, sign);
        lp.constrain_dense(offset, &coeffs, Relation::Ge, &h.offset - &dot(&h.normal, shift));
    }
}

/// A point of the relative interior of face `g` of `cl` lying in `x - B`,
/// found by maximizing a uniform slack on the non-tight facets.
fn face_point_in_translate(cl: &ClosedPolyhedron, g: &Face, b: &ClosedPolyhedron, x: &[Scalar]) -> Option<Vector> {
    let d = cl.dim();
    let mut lp = LinearProgram::new(d + 1);
    let t = d;
    for e in cl.equalities() {
        lp.constrain_dense(0, &e.normal, Relation::Eq, e.offset.clone());
    }
    let mut slack_rows = 0;
    for (i, h) in cl.inequalities().iter().enumerate() {
        if g.id.0.contains(i) {
            lp.constrain_dense(0, &h.normal, Relation::Eq, h.offset.clone());
        } else {
            let mut c: Vec<(usize, Scalar)> = h.normal.iter().cloned().enumerate().collect();
            c.push((t, -Scalar::one()));
            lp.constrain(c, Relation::Ge, h.offset.clone());
            slack_rows += 1;
        }
    }
    lp.constrain(vec![(t, Scalar::one())], Relation::Le, Scalar::one());
    // x - g in B
    constrain_membership(&mut lp, b, 0, &-Scalar::one(), x);
    lp.maximize(vec![(t, Scalar::one())]);
    match lp.solve() {
        LpOutcome::Optimal { value, mut x } if slack_rows == 0 || value.is_positive() => {
            x.truncate(d);
            Some(x)
        }
        _ => None,
    }
}

/// Whether `x` lies in `A + B`.
pub fn sum_member(a: &SemiOpenPolyhedron, b: &ClosedPolyhedron, x: &[Scalar]) -> bool {
    a.included_faces().any(|g| face_point_in_translate(a.closure(), g, b, x).is_some())
}

/// `(a, b)` with `a in A`, `b in B`, `a + b = x` for a semi-open `A`.
pub fn decompose_semi_open_sum(
    x: &[Scalar],
    a: &SemiOpenPolyhedron,
    b: &ClosedPolyhedron,
) -> Result<(Vector, Vector), GeometryError> {
    check_dims(a.dim(), x.len())?;
    check_dims(b.dim(), x.len())?;
    for g in a.included_faces() {
        if let Some(p) = face_point_in_translate(a.closure(), g, b, x) {
            let rest = sub(x, &p);
            return Ok((p, rest));
        }
    }
    Err(GeometryError::NotMember)
}

/// `A + B` for a semi-open `A` and a closed `B`.
pub fn minkowski_sum(a: &SemiOpenPolyhedron, b: &ClosedPolyhedron) -> Result<SemiOpenPolyhedron, GeometryError> {
    check_dims(a.dim(), b.dim())?;
    if a.is_empty() || b.is_empty() {
        return Ok(SemiOpenPolyhedron::empty(a.dim()));
    }
    if a.is_closed() {
        return Ok(SemiOpenPolyhedron::closed(a.closure().minkowski_sum(b)));
    }
    let p = a.closure().minkowski_sum(b);
    SemiOpenPolyhedron::from_oracle(p, |x| Ok(sum_member(a, b, x)))
}

/// Membership in the convex hull of a union, decided by restricting to the
/// minimal face of the closed hull at the query point.
struct HullMembership {
    sets: Vec<SemiOpenPolyhedron>,
    hull: ClosedPolyhedron,
    restricted: RefCell<HashMap<FaceId, Option<HullMembership>>>,
}

impl HullMembership {
    fn new(sets: Vec<SemiOpenPolyhedron>) -> Self {
        let dim = sets[0].dim();
        let closures: Vec<&ClosedPolyhedron> = sets.iter().map(|s| s.closure()).collect();
        let hull = ClosedPolyhedron::hull_of(dim, &closures);
        HullMembership { sets, hull, restricted: RefCell::new(HashMap::new()) }
    }

    fn member(&self, x: &[Scalar]) -> Result<bool, GeometryError> {
        if !self.hull.contains(x) {
            return Ok(false);
        }
        let id = FaceId(self.hull.tight_at(x));
        if id.is_top() {
            return Ok(true);
        }
        if !self.restricted.borrow().contains_key(&id) {
            let face = self.hull.face(&id).expect("tight set of a member is a face");
            let fp = self.hull.face_polyhedron(&face);
            let mut sub = Vec::new();
            for s in &self.sets {
                let r = restrict(s, &fp)?;
                if !r.is_empty() {
                    sub.push(r);
                }
            }
            let entry = if sub.is_empty() { None } else { Some(HullMembership::new(sub)) };
            self.restricted.borrow_mut().insert(id.clone(), entry);
        }
        let map = self.restricted.borrow();
        match map.get(&id).unwrap() {
            None => Ok(false),
            Some(h) => h.member(x),
        }
    }
}

/// `conv(S_1 ∪ ... ∪ S_k)`; empty members are ignored.
pub fn conv_union(sets: &[SemiOpenPolyhedron]) -> Result<SemiOpenPolyhedron, GeometryError> {
    let Some(first) = sets.first() else {
        return Err(GeometryError::Empty);
    };
    let dim = first.dim();
    for s in sets {
        check_dims(dim, s.dim())?;
    }
    let nonempty: Vec<SemiOpenPolyhedron> = sets.iter().filter(|s| !s.is_empty()).cloned().collect();
    match nonempty.len() {
        0 => return Ok(SemiOpenPolyhedron::empty(dim)),
        1 => return Ok(nonempty[0].clone()),
        _ => {}
    }
    if nonempty.iter().all(|s| s.is_closed()) {
        let closures: Vec<&ClosedPolyhedron> = nonempty.iter().map(|s| s.closure()).collect();
        let hull = ClosedPolyhedron::hull_of(dim, &closures);
        // closed parts sharing the recession cone of their hull have a closed hull
        if nonempty.iter().all(|s| s.closure().recession_cone() == hull.recession_cone()) {
            return Ok(SemiOpenPolyhedron::closed(hull));
        }
    }
    let oracle = HullMembership::new(nonempty);
    SemiOpenPolyhedron::from_oracle(oracle.hull.clone(), |x| oracle.member(x))
}

/// Convex hull of the children's sets.
pub fn sharp(children: &[SemiOpenPolyhedron]) -> Result<SemiOpenPolyhedron, GeometryError> {
    conv_union(children)
}

/// Whether every child has a point in the face `id` of `cl`.
fn meets_all(samples: &[Vec<Vector>], cl: &ClosedPolyhedron, id: &FaceId) -> bool {
    samples.iter().all(|ss| ss.iter().any(|s| cl.contains(s) && id.0.is_subset(&cl.tight_at(s))))
}

fn included_samples(children: &[SemiOpenPolyhedron]) -> Vec<Vec<Vector>> {
    children.iter().map(|c| c.included_faces().map(|g| c.face_sample(g)).collect()).collect()
}

/// Points `y` of the sharp set such that every child meets the minimal face
/// of the sharp closure at `y`.
pub fn flat(children: &[SemiOpenPolyhedron], sharp_set: &SemiOpenPolyhedron) -> Result<SemiOpenPolyhedron, GeometryError> {
    let dim = sharp_set.dim();
    if sharp_set.is_empty() || children.is_empty() || children.iter().any(|c| c.is_empty()) {
        return Ok(SemiOpenPolyhedron::empty(dim));
    }
    for c in children {
        check_dims(dim, c.dim())?;
    }
    let cl = sharp_set.closure();
    let samples = included_samples(children);
    let keep: Vec<FaceId> = sharp_set.included_faces().filter(|f| meets_all(&samples, cl, &f.id)).map(|f| f.id.clone()).collect();
    SemiOpenPolyhedron::from_included(cl.clone(), &keep)
}

fn hull_states(children: &[SemiOpenPolyhedron]) -> Result<(ClosedPolyhedron, Vec<Face>, Vec<Option<bool>>), GeometryError> {
    let oracle = HullMembership::new(children.to_vec());
    let (faces, states) = face_states(&oracle.hull, |x| oracle.member(x))?;
    Ok((oracle.hull.clone(), faces, states))
}

/// The sharp set with any partly covered face of its closure left out.
/// Agrees with [`sharp`] whenever that succeeds, and always has the same
/// closure and relative interior.
pub fn sharp_core(children: &[SemiOpenPolyhedron]) -> Result<SemiOpenPolyhedron, GeometryError> {
    match conv_union(children) {
        Err(GeometryError::ClosureViolation(_)) => {
            let nonempty: Vec<SemiOpenPolyhedron> = children.iter().filter(|c| !c.is_empty()).cloned().collect();
            let (hull, faces, states) = hull_states(&nonempty)?;
            let flags = states.iter().map(|st| *st == Some(true)).collect();
            SemiOpenPolyhedron::from_flags(hull, faces, flags)
        }
        other => other,
    }
}

/// The sharp and flat sets together. The hull of semi-open sets can cover
/// part of a face of its closure; such a face is left out of the returned
/// sharp set, and is an error only when the flat set would need it.
pub fn sharp_flat(children: &[SemiOpenPolyhedron]) -> Result<(SemiOpenPolyhedron, SemiOpenPolyhedron), GeometryError> {
    let Some(first) = children.first() else {
        return Err(GeometryError::Empty);
    };
    let dim = first.dim();
    for c in children {
        check_dims(dim, c.dim())?;
    }
    if children.iter().any(|c| c.is_empty()) {
        return Ok((sharp_core(children)?, SemiOpenPolyhedron::empty(dim)));
    }
    if let Ok(s) = conv_union(children) {
        let f = flat(children, &s)?;
        return Ok((s, f));
    }
    let (hull, faces, states) = hull_states(children)?;
    let samples = included_samples(children);
    let mut core = Vec::with_capacity(faces.len());
    let mut keep = Vec::with_capacity(faces.len());
    for (f, st) in faces.iter().zip(&states) {
        let meets = meets_all(&samples, &hull, &f.id);
        if st.is_none() && meets {
            return Err(GeometryError::ClosureViolation(format!(
                "the flat set covers part of the face with tight set {:?}",
                f.id.indices()
            )));
        }
        core.push(*st == Some(true));
        keep.push(*st == Some(true) && meets);
    }
    let s = SemiOpenPolyhedron::from_flags(hull.clone(), faces.clone(), core)?;
    let f = SemiOpenPolyhedron::from_flags(hull, faces, keep)?;
    Ok((s, f))
}

pub fn polar_cone(p: &ClosedPolyhedron) -> Result<ClosedPolyhedron, GeometryError> {
    p.polar()
}

/// A vector `z` with `<x,z> <= 0` on `A`, `<y,z> >= 0` on `B`, strict
/// somewhere on `A ∪ B`.
pub fn separate_cones(a: &SemiOpenPolyhedron, b: &SemiOpenPolyhedron) -> Result<Vector, GeometryError> {
    check_dims(a.dim(), b.dim())?;
    if a.is_empty() || b.is_empty() {
        return Err(GeometryError::Empty);
    }
    if !a.is_cone() || !b.is_cone() {
        return Err(GeometryError::NotACone);
    }
    let d = a.dim();
    let mut lp = LinearProgram::new(d);
    box_constraints(&mut lp, d);
    let mut obj = zeros(d);
    for r in a.closure().rays() {
        lp.constrain_dense(0, r, Relation::Le, Scalar::zero());
        obj = sub(&obj, r);
    }
    for l in a.closure().lineality().iter().chain(b.closure().lineality()) {
        lp.constrain_dense(0, l, Relation::Eq, Scalar::zero());
    }
    for r in b.closure().rays() {
        lp.constrain_dense(0, r, Relation::Ge, Scalar::zero());
        obj = add(&obj, r);
    }
    lp.maximize(obj.into_iter().enumerate().collect());
    match lp.solve() {
        LpOutcome::Optimal { value, x } if value.is_positive() => Ok(x),
        _ => Err(GeometryError::NoSeparator),
    }
}

/// `-1 <= z_i <= 1` on the first `d` variables.
pub(crate) fn box_constraints(lp: &mut LinearProgram, d: usize) {
    for i in 0..d {
        lp.constrain(vec![(i, Scalar::one())], Relation::Le, Scalar::one());
        lp.constrain(vec![(i, Scalar::one())], Relation::Ge, -Scalar::one());
    }
}

/// `(a, b)` with `a in A`, `b in B`, `a + b = z`.
pub fn decompose_sum(z: &[Scalar], a: &ClosedPolyhedron, b: &ClosedPolyhedron) -> Result<(Vector, Vector), GeometryError> {
    check_dims(a.dim(), z.len())?;
    check_dims(b.dim(), z.len())?;
    let d = z.len();
    let mut lp = LinearProgram::new(d);
    constrain_membership(&mut lp, a, 0, &Scalar::one(), &zeros(d));
    constrain_membership(&mut lp, b, 0, &-Scalar::one(), z);
    match lp.feasible_point() {
        Some(av) => {
            let bv = sub(z, &av);
            Ok((av, bv))
        }
        None => Err(GeometryError::NotMember),
    }
}

/// Writes `y` as a combination of generators of the given closed sets:
/// per set, (total point weight, combined vector).
fn decompose_over_closures(y: &[Scalar], closures: &[&ClosedPolyhedron]) -> Option<Vec<(Scalar, Vector)>> {
    let d = y.len();
    let mut lp = LinearProgram::new(0);
    let mut layout = Vec::new();
    for c in closures {
        let p0 = lp.add_vars(c.points().len(), true);
        let r0 = lp.add_vars(c.rays().len(), true);
        let l0 = lp.add_vars(c.lineality().len(), false);
        layout.push((p0, r0, l0));
    }
    for k in 0..d {
        let mut row = Vec::new();
        for (c, &(p0, r0, l0)) in closures.iter().zip(&layout) {
            row.extend(c.points().iter().enumerate().map(|(i, p)| (p0 + i, p[k].clone())));
            row.extend(c.rays().iter().enumerate().map(|(i, r)| (r0 + i, r[k].clone())));
            row.extend(c.lineality().iter().enumerate().map(|(i, l)| (l0 + i, l[k].clone())));
        }
        lp.constrain(row, Relation::Eq, y[k].clone());
    }
    let mut total = Vec::new();
    for (c, &(p0, _, _)) in closures.iter().zip(&layout) {
        total.extend((0..c.points().len()).map(|i| (p0 + i, Scalar::one())));
    }
    lp.constrain(total, Relation::Eq, Scalar::one());
    let sol = lp.feasible_point()?;
    let mut out = Vec::new();
    for (c, &(p0, r0, l0)) in closures.iter().zip(&layout) {
        let mut lam = Scalar::zero();
        let mut v = zeros(d);
        for (i, p) in c.points().iter().enumerate() {
            if !sol[p0 + i].is_zero() {
                lam += &sol[p0 + i];
                v = add(&v, &scale(p, &sol[p0 + i]));
            }
        }
        for (i, r) in c.rays().iter().enumerate() {
            v = add(&v, &scale(r, &sol[r0 + i]));
        }
        for (i, l) in c.lineality().iter().enumerate() {
            v = add(&v, &scale(l, &sol[l0 + i]));
        }
        out.push((lam, v));
    }
    Some(out)
}

/// Drops terms by affine dependence until the points are affinely independent.
pub fn reduce_witness(mut terms: Vec<Witness>) -> Vec<Witness> {
    loop {
        let pts: Vec<Vector> = terms.iter().map(|t| t.1.clone()).collect();
        let Some(mut mu) = (if terms.len() > 1 { affine_dependence(&pts) } else { None }) else {
            return terms;
        };
        if !mu.iter().any(Scalar::is_positive) {
            mu = mu.iter().map(|m| -m).collect();
        }
        let theta = terms
            .iter()
            .zip(&mu)
            .filter(|(_, m)| m.is_positive())
            .map(|(t, m)| &t.0 / m)
            .min()
            .unwrap();
        terms = terms
            .into_iter()
            .zip(mu)
            .map(|(t, m)| (&t.0 - &(&theta * &m), t.1, t.2))
            .filter(|t| !t.0.is_zero())
            .collect();
    }
}

/// Merges terms that share a child index into one term at their weighted mean.
pub fn merge_witness(terms: Vec<Witness>) -> Vec<Witness> {
    let mut out: Vec<Witness> = Vec::new();
    for (w, p, i) in terms {
        if let Some(t) = out.iter_mut().find(|t| t.2 == i) {
            let total = &t.0 + &w;
            let v = scale(&add(&scale(&t.1, &t.0), &scale(&p, &w)), &total.recip());
            *t = (total, v, i);
        } else {
            out.push((w, p, i));
        }
    }
    out
}

/// Writes `x` as a convex combination of at most `d+1` points, each a member
/// of one of the given sets.
pub fn caratheodory_decompose(x: &[Scalar], children: &[SemiOpenPolyhedron]) -> Result<Vec<Witness>, GeometryError> {
    let indexed: Vec<(usize, SemiOpenPolyhedron)> =
        children.iter().enumerate().filter(|(_, s)| !s.is_empty()).map(|(i, s)| (i, s.clone())).collect();
    if indexed.is_empty() {
        return Err(GeometryError::NotMember);
    }
    for (_, s) in &indexed {
        check_dims(s.dim(), x.len())?;
    }
    let terms = decompose_rec(x, indexed)?;
    Ok(reduce_witness(merge_witness(terms)))
}

fn decompose_rec(x: &[Scalar], sets: Vec<(usize, SemiOpenPolyhedron)>) -> Result<Vec<Witness>, GeometryError> {
    let dim = x.len();
    let closures: Vec<&ClosedPolyhedron> = sets.iter().map(|(_, s)| s.closure()).collect();
    let hull = ClosedPolyhedron::hull_of(dim, &closures);
    if !hull.contains(x) {
        return Err(GeometryError::NotMember);
    }
    let id = FaceId(hull.tight_at(x));
    if !id.is_top() {
        let face = hull.face(&id).expect("face at member");
        let fp = hull.face_polyhedron(&face);
        let mut sub = Vec::new();
        for (i, s) in &sets {
            let r = restrict(s, &fp)?;
            if !r.is_empty() {
                sub.push((*i, r));
            }
        }
        if sub.is_empty() {
            return Err(GeometryError::NotMember);
        }
        return decompose_rec(x, sub);
    }
    // x lies in the relative interior of the hull: push it away from the
    // centre of the children's relative interiors and decompose the image
    let samples: Vec<Vector> = sets.iter().map(|(_, s)| s.sample_ri_point()).collect::<Result<_, _>>()?;
    let c = mean(&samples);
    let dir = sub(x, &c);
    let mut eps = Scalar::one();
    let y = loop {
        let y = add(x, &scale(&dir, &eps));
        if hull.contains(&y) {
            break y;
        }
        eps = &eps / &Scalar::from_int(2);
    };
    let parts = decompose_over_closures(&y, &closures).ok_or(GeometryError::NotMember)?;
    let k = Scalar::from_int(sets.len() as i64);
    let one_eps = &Scalar::one() + &eps;
    let share = &eps / &(&one_eps * &k);
    let mut out = Vec::new();
    for (((i, _), (lam, z)), p) in sets.iter().zip(parts).zip(&samples) {
        let w = &(&lam / &one_eps) + &share;
        let v = add(&scale(&z, &one_eps.recip()), &scale(p, &share));
        out.push((w.clone(), scale(&v, &w.recip()), *i));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Halfspace;
    use crate::scalar::{int, ivec, rat};

    fn seg(a: Scalar, b: Scalar) -> ClosedPolyhedron {
        ClosedPolyhedron::from_v(1, vec![vec![a], vec![b]], vec![], vec![])
    }

    fn pt(a: Scalar) -> SemiOpenPolyhedron {
        SemiOpenPolyhedron::closed(ClosedPolyhedron::point(vec![a]))
    }

    #[test]
    fn intersect_examples() {
        let a = SemiOpenPolyhedron::closed(seg(int(0), int(1)));
        let b = SemiOpenPolyhedron::closed(seg(int(1), int(2)));
        assert_eq!(intersect(&a, &b).unwrap(), pt(int(1)));
        let open = SemiOpenPolyhedron::relint(seg(int(0), int(1)));
        assert!(intersect(&pt(int(0)), &open).unwrap().is_empty());
    }

    #[test]
    fn sum_examples() {
        let ray = ClosedPolyhedron::cone(1, vec![ivec(&[1])], vec![]);
        assert_eq!(minkowski_sum(&pt(int(0)), &ray).unwrap(), SemiOpenPolyhedron::closed(ray.clone()));
        let open = SemiOpenPolyhedron::relint(seg(int(0), int(1)));
        assert_eq!(minkowski_sum(&open, &ClosedPolyhedron::point(ivec(&[0]))).unwrap(), open);
    }

    #[test]
    fn sharp_and_flat_of_three_points() {
        let kids = vec![pt(int(0)), pt(rat(1, 2)), pt(int(1))];
        let s = sharp(&kids).unwrap();
        assert_eq!(s, SemiOpenPolyhedron::closed(seg(int(0), int(1))));
        let f = flat(&kids, &s).unwrap();
        assert_eq!(f, SemiOpenPolyhedron::relint(seg(int(0), int(1))));
    }

    #[test]
    fn sharp_of_point_and_open_interval() {
        let kids = vec![pt(int(0)), SemiOpenPolyhedron::relint(seg(int(1), int(2)))];
        let s = sharp(&kids).unwrap();
        assert!(s.member(&[int(0)]));
        assert!(s.member(&[rat(3, 2)]));
        assert!(!s.member(&[int(2)]));
    }

    #[test]
    fn hull_covering_part_of_a_face() {
        // an open half-plane and a closed ray from the origin into it: the
        // hull meets the boundary line only at the origin
        let half = SemiOpenPolyhedron::relint(ClosedPolyhedron::from_h(
            2,
            vec![Halfspace { normal: ivec(&[0, 1]), offset: int(0) }],
            vec![],
        ));
        let ray = SemiOpenPolyhedron::closed(ClosedPolyhedron::cone(2, vec![ivec(&[1, 1])], vec![]));
        let kids = vec![half.clone(), ray];
        assert!(matches!(sharp(&kids), Err(GeometryError::ClosureViolation(_))));
        let (s, f) = sharp_flat(&kids).unwrap();
        assert_eq!(s, half);
        assert_eq!(f, half);
        assert_eq!(sharp_core(&kids).unwrap(), half);
    }

    #[test]
    fn caratheodory_examples() {
        let kids = vec![pt(int(0)), pt(int(1))];
        let w = caratheodory_decompose(&[rat(1, 2)], &kids).unwrap();
        let total: Scalar = w.iter().map(|t| t.0.clone()).sum();
        assert_eq!(total, int(1));
        let x: Scalar = w.iter().map(|t| &t.0 * &t.1[0]).sum();
        assert_eq!(x, rat(1, 2));
        let w0 = caratheodory_decompose(&[int(0)], &kids).unwrap();
        assert_eq!(w0, vec![(int(1), vec![int(0)], 0)]);
        assert_eq!(caratheodory_decompose(&[int(2)], &kids), Err(GeometryError::NotMember));
    }

    #[test]
    fn separator_of_two_rays() {
        let a = SemiOpenPolyhedron::relint(ClosedPolyhedron::cone(2, vec![ivec(&[1, 1])], vec![]));
        let b = SemiOpenPolyhedron::relint(ClosedPolyhedron::cone(2, vec![ivec(&[1, -1])], vec![]));
        let z = separate_cones(&a, &b).unwrap();
        assert!(!dot(&z, &ivec(&[1, 1])).is_positive());
        assert!(!dot(&z, &ivec(&[1, -1])).is_negative());
        assert!(separate_cones(&a, &a).is_err());
    }
}
