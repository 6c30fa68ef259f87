//! Exact two-phase simplex over rationals.
//!
//! Pricing uses the largest reduced cost and falls back to Bland's rule once a
//! run of degenerate pivots is observed, which rules out cycling.

use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
struct Row {
    coeffs: Vec<(usize, Scalar)>,
    rel: Relation,
    rhs: Scalar,
}

/// A linear program `maximize c.x` over free or nonnegative variables.
#[derive(Clone, Debug, Default)]
pub struct LinearProgram {
    nonneg: Vec<bool>,
    rows: Vec<Row>,
    objective: Vec<(usize, Scalar)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LpOutcome {
    Optimal { value: Scalar, x: Vec<Scalar> },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn is_feasible(&self) -> bool {
        !matches!(self, LpOutcome::Infeasible)
    }
}

impl LinearProgram {
    /// `n` free variables.
    pub fn new(n: usize) -> Self {
        LinearProgram { nonneg: vec![false; n], ..Default::default() }
    }

    pub fn num_vars(&self) -> usize {
        self.nonneg.len()
    }

    pub fn add_var(&mut self, nonneg: bool) -> usize {
        self.nonneg.push(nonneg);
        self.nonneg.len() - 1
    }

    /// Appends `k` variables and returns the index of the first one.
    pub fn add_vars(&mut self, k: usize, nonneg: bool) -> usize {
        let first = self.nonneg.len();
        self.nonneg.extend(std::iter::repeat(nonneg).take(k));
        first
    }

    pub fn set_nonneg(&mut self, i: usize) {
        self.nonneg[i] = true;
    }

    pub fn constrain(&mut self, coeffs: Vec<(usize, Scalar)>, rel: Relation, rhs: Scalar) {
        let coeffs = coeffs.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        self.rows.push(Row { coeffs, rel, rhs });
    }

    /// Constraint whose coefficients apply to variables `offset..offset + coeffs.len()`.
    pub fn constrain_dense(&mut self, offset: usize, coeffs: &[Scalar], rel: Relation, rhs: Scalar) {
        let c = coeffs
            .iter()
            .enumerate()
            .map(|(k, a)| (offset + k, a.clone()))
            .collect();
        self.constrain(c, rel, rhs);
    }

    pub fn maximize(&mut self, obj: Vec<(usize, Scalar)>) {
        self.objective = obj;
    }

    pub fn minimize(&mut self, obj: Vec<(usize, Scalar)>) {
        self.objective = obj.into_iter().map(|(i, c)| (i, -c)).collect();
    }

    /// Some feasible point, ignoring the objective.
    pub fn feasible_point(&self) -> Option<Vec<Scalar>> {
        let mut lp = self.clone();
        lp.objective.clear();
        match lp.solve() {
            LpOutcome::Optimal { x, .. } => Some(x),
            _ => None,
        }
    }

    pub fn solve(&self) -> LpOutcome {
        Simplex::build(self).run(self)
    }
}

struct Simplex {
    /// constraint rows; the last entry of each row is the right-hand side
    t: Vec<Vec<Scalar>>,
    basis: Vec<usize>,
    ncols: usize,
    /// structural column index of (positive part, optional negative part) per variable
    var_cols: Vec<(usize, Option<usize>)>,
    first_artificial: usize,
}

const DEGENERATE_STREAK: usize = 30;

impl Simplex {
    fn build(lp: &LinearProgram) -> Simplex {
        let mut var_cols = Vec::with_capacity(lp.nonneg.len());
        let mut nstruct = 0;
        for &nn in &lp.nonneg {
            if nn {
                var_cols.push((nstruct, None));
                nstruct += 1;
            } else {
                var_cols.push((nstruct, Some(nstruct + 1)));
                nstruct += 2;
            }
        }
        // normalize rows to nonnegative right-hand sides
        let mut rows: Vec<(Vec<(usize, Scalar)>, Relation, Scalar)> = Vec::with_capacity(lp.rows.len());
        for r in &lp.rows {
            let mut coeffs = Vec::with_capacity(r.coeffs.len() * 2);
            for (i, c) in &r.coeffs {
                let (p, n) = var_cols[*i];
                coeffs.push((p, c.clone()));
                if let Some(n) = n {
                    coeffs.push((n, -c));
                }
            }
            let (mut rel, mut rhs) = (r.rel, r.rhs.clone());
            let flip = rhs.is_negative() || (rhs.is_zero() && rel == Relation::Ge);
            if flip {
                coeffs = coeffs.into_iter().map(|(i, c)| (i, -c)).collect();
                rhs = -rhs;
                rel = match rel {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
            }
            rows.push((coeffs, rel, rhs));
        }
        let nslack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
        let nart = rows.iter().filter(|r| r.1 != Relation::Le).count();
        let first_artificial = nstruct + nslack;
        let ncols = first_artificial + nart;
        let m = rows.len();
        let mut t = vec![vec![Scalar::zero(); ncols + 1]; m];
        let mut basis = vec![0; m];
        let (mut s, mut a) = (nstruct, first_artificial);
        for (i, (coeffs, rel, rhs)) in rows.into_iter().enumerate() {
            for (j, c) in coeffs {
                t[i][j] += c;
            }
            t[i][ncols] = rhs;
            match rel {
                Relation::Le => {
                    t[i][s] = Scalar::one();
                    basis[i] = s;
                    s += 1;
                }
                Relation::Ge => {
                    t[i][s] = -Scalar::one();
                    s += 1;
                    t[i][a] = Scalar::one();
                    basis[i] = a;
                    a += 1;
                }
                Relation::Eq => {
                    t[i][a] = Scalar::one();
                    basis[i] = a;
                    a += 1;
                }
            }
        }
        Simplex { t, basis, ncols, var_cols, first_artificial }
    }

    fn pivot(&mut self, obj: &mut [Scalar], r: usize, c: usize) {
        let inv = self.t[r][c].recip();
        if !inv.is_one() {
            for v in self.t[r].iter_mut() {
                if !v.is_zero() {
                    *v *= &inv;
                }
            }
        }
        let nz: Vec<usize> = (0..=self.ncols).filter(|&j| !self.t[r][j].is_zero()).collect();
        let prow = std::mem::take(&mut self.t[r]);
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for &j in &nz {
                let d = &f * &prow[j];
                row[j] -= d;
            }
        }
        if !obj[c].is_zero() {
            let f = obj[c].clone();
            for &j in &nz {
                let d = &f * &prow[j];
                obj[j] -= d;
            }
        }
        self.t[r] = prow;
        self.basis[r] = c;
    }

    /// Maximizes with the reduced-cost row `obj`. Returns false when unbounded.
    fn optimize(&mut self, obj: &mut [Scalar], allowed: usize) -> bool {
        let mut streak = 0;
        loop {
            let bland = streak >= DEGENERATE_STREAK;
            let mut enter = None;
            let mut best = Scalar::zero();
            for (j, rc) in obj.iter().enumerate().take(allowed) {
                if rc.is_positive() {
                    if bland {
                        enter = Some(j);
                        break;
                    }
                    if enter.is_none() || *rc > best {
                        best = rc.clone();
                        enter = Some(j);
                    }
                }
            }
            let Some(c) = enter else { return true };
            let mut leave: Option<(usize, Scalar)> = None;
            for (i, row) in self.t.iter().enumerate() {
                if !row[c].is_positive() {
                    continue;
                }
                let ratio = &row[self.ncols] / &row[c];
                let better = match &leave {
                    None => true,
                    Some((li, lr)) => ratio < *lr || (ratio == *lr && self.basis[i] < self.basis[*li]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            let Some((r, ratio)) = leave else { return false };
            if ratio.is_zero() {
                streak += 1;
            } else {
                streak = 0;
            }
            self.pivot(obj, r, c);
        }
    }

    fn objective_row(&self, cost: &[Scalar]) -> Vec<Scalar> {
        let mut obj = vec![Scalar::zero(); self.ncols + 1];
        obj[..cost.len()].clone_from_slice(cost);
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = if b < cost.len() { &cost[b] } else { continue };
            if cb.is_zero() {
                continue;
            }
            for (j, v) in self.t[i].iter().enumerate() {
                if !v.is_zero() {
                    obj[j] -= cb * v;
                }
            }
        }
        obj
    }

    fn run(mut self, lp: &LinearProgram) -> LpOutcome {
        // phase 1: maximize -(sum of artificials)
        if self.basis.iter().any(|&b| b >= self.first_artificial) {
            let mut cost = vec![Scalar::zero(); self.ncols];
            for c in cost.iter_mut().skip(self.first_artificial) {
                *c = -Scalar::one();
            }
            let mut obj = self.objective_row(&cost);
            self.optimize(&mut obj, self.ncols);
            let infeas: Scalar = self
                .basis
                .iter()
                .zip(&self.t)
                .filter(|(&b, _)| b >= self.first_artificial)
                .map(|(_, row)| row[self.ncols].clone())
                .sum();
            if infeas.is_positive() {
                return LpOutcome::Infeasible;
            }
            // drive remaining (zero-valued) artificials out of the basis
            let mut i = 0;
            while i < self.t.len() {
                if self.basis[i] >= self.first_artificial {
                    match (0..self.first_artificial).find(|&j| !self.t[i][j].is_zero()) {
                        Some(j) => {
                            let mut dummy = vec![Scalar::zero(); self.ncols + 1];
                            self.pivot(&mut dummy, i, j);
                            i += 1;
                        }
                        None => {
                            self.t.remove(i);
                            self.basis.remove(i);
                        }
                    }
                } else {
                    i += 1;
                }
            }
        }
        // phase 2
        let mut cost = vec![Scalar::zero(); self.first_artificial];
        for (i, c) in &lp.objective {
            let (p, n) = self.var_cols[*i];
            cost[p] += c;
            if let Some(n) = n {
                cost[n] -= c;
            }
        }
        let mut obj = self.objective_row(&cost);
        if !self.optimize(&mut obj, self.first_artificial) {
            return LpOutcome::Unbounded;
        }
        let mut y = vec![Scalar::zero(); self.ncols];
        for (i, &b) in self.basis.iter().enumerate() {
            y[b] = self.t[i][self.ncols].clone();
        }
        let x: Vec<Scalar> = self
            .var_cols
            .iter()
            .map(|&(p, n)| match n {
                Some(n) => &y[p] - &y[n],
                None => y[p].clone(),
            })
            .collect();
        let value = lp.objective.iter().map(|(i, c)| c * &x[*i]).sum();
        LpOutcome::Optimal { value, x }
    }
}
