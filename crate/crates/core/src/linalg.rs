//! Dense exact linear algebra on `Vec<Scalar>` vectors.

use crate::scalar::{primitive, Scalar};

pub type Vector = Vec<Scalar>;

pub fn zeros(d: usize) -> Vector {
    vec![Scalar::zero(); d]
}

pub fn unit(d: usize, i: usize) -> Vector {
    let mut v = zeros(d);
    v[i] = Scalar::one();
    v
}

pub fn dot(a: &[Scalar], b: &[Scalar]) -> Scalar {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = Scalar::zero();
    for (x, y) in a.iter().zip(b) {
        if !x.is_zero() && !y.is_zero() {
            acc += x * y;
        }
    }
    acc
}

pub fn add(a: &[Scalar], b: &[Scalar]) -> Vector {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub(a: &[Scalar], b: &[Scalar]) -> Vector {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(a: &[Scalar], s: &Scalar) -> Vector {
    a.iter().map(|x| x * s).collect()
}

pub fn neg(a: &[Scalar]) -> Vector {
    a.iter().map(|x| -x).collect()
}

/// `a + s * b`
pub fn axpy(a: &[Scalar], s: &Scalar, b: &[Scalar]) -> Vector {
    a.iter()
        .zip(b)
        .map(|(x, y)| if y.is_zero() { x.clone() } else { x + &(s * y) })
        .collect()
}

pub fn is_zero(a: &[Scalar]) -> bool {
    a.iter().all(Scalar::is_zero)
}

pub fn l1_norm(a: &[Scalar]) -> Scalar {
    a.iter().map(Scalar::abs).sum()
}

/// Arithmetic mean of a nonempty list of vectors.
pub fn mean(vs: &[Vector]) -> Vector {
    assert!(!vs.is_empty());
    let mut acc = zeros(vs[0].len());
    for v in vs {
        acc = add(&acc, v);
    }
    scale(&acc, &Scalar::from_int(vs.len() as i64).recip())
}

/// Reduced row echelon form. Returns the nonzero rows and their pivot columns.
pub fn rref(rows: &[Vector]) -> (Vec<Vector>, Vec<usize>) {
    let mut m: Vec<Vector> = rows.to_vec();
    let ncols = m.first().map_or(0, |r| r.len());
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        if r == m.len() {
            break;
        }
        let Some(p) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = m[r][c].recip();
        m[r] = scale(&m[r], &inv);
        for i in 0..m.len() {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                m[i] = axpy(&m[i], &-f, &m[r]);
            }
        }
        pivots.push(c);
        r += 1;
    }
    m.truncate(r);
    (m, pivots)
}

pub fn rank(rows: &[Vector]) -> usize {
    rref(rows).1.len()
}

/// Basis of `{x : row . x = 0 for every row}` in dimension `ncols`.
pub fn nullspace(rows: &[Vector], ncols: usize) -> Vec<Vector> {
    let (m, pivots) = rref(rows);
    let mut basis = Vec::new();
    for free in 0..ncols {
        if pivots.contains(&free) {
            continue;
        }
        let mut v = zeros(ncols);
        v[free] = Scalar::one();
        for (row, &pc) in m.iter().zip(&pivots) {
            v[pc] = -&row[free];
        }
        basis.push(v);
    }
    basis
}

/// Rows of a row-reduced basis of the span of `vs`, each scaled to a
/// primitive integer vector.
pub fn span_basis(vs: &[Vector]) -> Vec<Vector> {
    rref(vs).0.iter().map(|r| primitive(r)).collect()
}

/// A reduced basis used to take canonical representatives modulo a subspace:
/// rows in RREF with pivot columns.
#[derive(Clone, Debug, Default)]
pub struct Reducer {
    rows: Vec<Vector>,
    pivots: Vec<usize>,
}

impl Reducer {
    pub fn new(vs: &[Vector]) -> Self {
        let (rows, pivots) = rref(vs);
        Reducer { rows, pivots }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    /// Subtracts the subspace component so that every pivot coordinate is zero.
    pub fn reduce(&self, v: &[Scalar]) -> Vector {
        let mut out = v.to_vec();
        for (row, &pc) in self.rows.iter().zip(&self.pivots) {
            if !out[pc].is_zero() {
                let f = -&out[pc];
                out = axpy(&out, &f, row);
            }
        }
        out
    }

    pub fn contains(&self, v: &[Scalar]) -> bool {
        is_zero(&self.reduce(v))
    }
}

/// Coefficients `mu` (not all zero) with `sum mu_i p_i = 0` and
/// `sum mu_i = 0`, if the points are affinely dependent.
pub fn affine_dependence(points: &[Vector]) -> Option<Vector> {
    let n = points.len();
    if n == 0 {
        return None;
    }
    let d = points[0].len();
    let mut rows: Vec<Vector> = (0..d)
        .map(|k| points.iter().map(|p| p[k].clone()).collect())
        .collect();
    rows.push(vec![Scalar::one(); n]);
    nullspace(&rows, n).into_iter().next()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ivec;

    #[test]
    fn nullspace_of_plane() {
        let ns = nullspace(&[ivec(&[1, 1, 1])], 3);
        assert_eq!(ns.len(), 2);
        for v in &ns {
            assert!(dot(v, &ivec(&[1, 1, 1])).is_zero());
        }
    }

    #[test]
    fn reducer_kills_span() {
        let r = Reducer::new(&[ivec(&[1, 2, 0])]);
        assert!(r.contains(&ivec(&[2, 4, 0])));
        assert!(!r.contains(&ivec(&[0, 0, 1])));
        assert_eq!(r.reduce(&ivec(&[1, 2, 5])), ivec(&[0, 0, 5]));
    }

    #[test]
    fn dependence_of_collinear_points() {
        let mu = affine_dependence(&[ivec(&[0]), ivec(&[1]), ivec(&[2])]).unwrap();
        assert!(!is_zero(&mu));
    }
}
