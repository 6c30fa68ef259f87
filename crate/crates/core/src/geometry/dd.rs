//! Double description method for polyhedral cones.
//!
//! Computes generators of `{y : E y = 0, G y >= 0}` by inserting constraints
//! one at a time into a lineality basis plus a list of extreme rays. Adjacency
//! of ray pairs uses the combinatorial test on zero sets.

use super::bitset::BitSet;
use crate::linalg::{axpy, dot, unit, Vector};
use crate::scalar::{primitive, Scalar};

#[derive(Clone, Debug, Default)]
pub struct ConeGenerators {
    pub lineality: Vec<Vector>,
    pub rays: Vec<Vector>,
}

struct Ray {
    v: Vector,
    zeros: BitSet,
}

/// Generators of the cone cut out by `equalities` and `inequalities` in `R^dim`.
pub fn cone_generators(dim: usize, equalities: &[Vector], inequalities: &[Vector]) -> ConeGenerators {
    let m = inequalities.len();
    let mut lin: Vec<Vector> = (0..dim).map(|i| unit(dim, i)).collect();
    let mut rays: Vec<Ray> = Vec::new();

    for a in equalities {
        insert(a, None, m, &mut lin, &mut rays);
    }
    for (k, a) in inequalities.iter().enumerate() {
        insert(a, Some(k), m, &mut lin, &mut rays);
    }
    ConeGenerators { lineality: lin, rays: rays.into_iter().map(|r| r.v).collect() }
}

/// Inserts `a . y >= 0` (when `index` is `Some`) or `a . y = 0`.
fn insert(a: &[Scalar], index: Option<usize>, m: usize, lin: &mut Vec<Vector>, rays: &mut Vec<Ray>) {
    if let Some(p) = lin.iter().position(|l| !dot(a, l).is_zero()) {
        let mut piv = lin.swap_remove(p);
        let mut ap = dot(a, &piv);
        if ap.is_negative() {
            piv = piv.iter().map(|x| -x).collect();
            ap = -ap;
        }
        for l in lin.iter_mut() {
            let al = dot(a, l);
            if !al.is_zero() {
                *l = primitive(&axpy(l, &(-(al / &ap)), &piv));
            }
        }
        for r in rays.iter_mut() {
            let ar = dot(a, &r.v);
            if !ar.is_zero() {
                r.v = primitive(&axpy(&r.v, &(-(ar / &ap)), &piv));
            }
            if let Some(k) = index {
                r.zeros.insert(k);
            }
        }
        if let Some(k) = index {
            // the pivot was lineality, so it is tight on every earlier inequality
            let zeros = BitSet::from_indices(m, 0..k);
            rays.push(Ray { v: primitive(&piv), zeros });
        }
        return;
    }

    let vals: Vec<Scalar> = rays.iter().map(|r| dot(a, &r.v)).collect();
    let pos: Vec<usize> = (0..rays.len()).filter(|&i| vals[i].is_positive()).collect();
    let neg: Vec<usize> = (0..rays.len()).filter(|&i| vals[i].is_negative()).collect();
    if neg.is_empty() && (index.is_some() || pos.is_empty()) {
        if let Some(k) = index {
            for (r, v) in rays.iter_mut().zip(&vals) {
                if v.is_zero() {
                    r.zeros.insert(k);
                }
            }
        }
        return;
    }

    let mut created = Vec::new();
    for &p in &pos {
        for &n in &neg {
            let z = rays[p].zeros.intersection(&rays[n].zeros);
            let adjacent = rays
                .iter()
                .enumerate()
                .all(|(i, r)| i == p || i == n || !z.is_subset(&r.zeros));
            if !adjacent {
                continue;
            }
            let v = axpy(&(&rays[n].v.iter().map(|x| x * &vals[p]).collect::<Vec<_>>()), &-&vals[n], &rays[p].v);
            let mut zeros = z;
            if let Some(k) = index {
                zeros.insert(k);
            }
            created.push(Ray { v: primitive(&v), zeros });
        }
    }

    let keep_pos = index.is_some();
    let old = std::mem::take(rays);
    for (r, v) in old.into_iter().zip(vals) {
        if v.is_zero() {
            let mut r = r;
            if let Some(k) = index {
                r.zeros.insert(k);
            }
            rays.push(r);
        } else if v.is_positive() && keep_pos {
            rays.push(r);
        }
    }
    rays.extend(created);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ivec;

    #[test]
    fn orthant_has_unit_rays() {
        let g = cone_generators(3, &[], &[ivec(&[1, 0, 0]), ivec(&[0, 1, 0]), ivec(&[0, 0, 1])]);
        assert!(g.lineality.is_empty());
        let mut rays = g.rays.clone();
        rays.sort();
        assert_eq!(rays, vec![ivec(&[0, 0, 1]), ivec(&[0, 1, 0]), ivec(&[1, 0, 0])]);
    }

    #[test]
    fn halfspace_keeps_lineality() {
        let g = cone_generators(2, &[], &[ivec(&[1, 1])]);
        assert_eq!(g.lineality.len(), 1);
        assert_eq!(g.rays.len(), 1);
    }

    #[test]
    fn square_cone_has_four_rays() {
        // homogenized unit square: x0 >= 0, x >= 0, y >= 0, x <= x0, y <= x0
        let ineqs = vec![
            ivec(&[1, 0, 0]),
            ivec(&[0, 1, 0]),
            ivec(&[0, 0, 1]),
            ivec(&[1, -1, 0]),
            ivec(&[1, 0, -1]),
        ];
        let g = cone_generators(3, &[], &ineqs);
        assert!(g.lineality.is_empty());
        assert_eq!(g.rays.len(), 4);
    }

    #[test]
    fn equality_restricts() {
        let g = cone_generators(3, &[ivec(&[1, -1, 0])], &[ivec(&[1, 0, 0]), ivec(&[0, 0, 1])]);
        assert!(g.lineality.is_empty());
        assert_eq!(g.rays.len(), 2);
    }
}
