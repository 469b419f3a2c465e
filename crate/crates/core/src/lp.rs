//! Exact linear feasibility over the rationals: phase-one simplex with
//! Bland's rule on non-negative variables.

use num_traits::{One, Signed, Zero};

use crate::rational::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Row {
    pub coeffs: Vec<Rational>,
    pub relation: Relation,
    pub rhs: Rational,
}

/// A point `x ≥ 0` satisfying every row, or `None` when the system is
/// infeasible.
pub fn find_feasible(n_vars: usize, rows: &[Row]) -> Option<Vec<Rational>> {
    let m = rows.len();
    if m == 0 {
        return Some(vec![Rational::zero(); n_vars]);
    }
    // Normalise to rhs >= 0.
    let rows: Vec<Row> = rows
        .iter()
        .map(|r| {
            assert_eq!(r.coeffs.len(), n_vars, "row width");
            if r.rhs.is_negative() {
                Row {
                    coeffs: r.coeffs.iter().map(|c| -c).collect(),
                    relation: match r.relation {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    },
                    rhs: -&r.rhs,
                }
            } else {
                r.clone()
            }
        })
        .collect();

    let n_slack = rows.iter().filter(|r| r.relation != Relation::Eq).count();
    let n_art = rows.iter().filter(|r| r.relation != Relation::Le).count();
    let cols = n_vars + n_slack + n_art;
    let rhs = cols;
    let art_start = n_vars + n_slack;

    let mut t = vec![vec![Rational::zero(); cols + 1]; m];
    let mut basis = vec![0usize; m];
    let (mut s, mut a) = (n_vars, art_start);
    for (i, r) in rows.iter().enumerate() {
        t[i][..n_vars].clone_from_slice(&r.coeffs);
        t[i][rhs] = r.rhs.clone();
        match r.relation {
            Relation::Le => {
                t[i][s] = Rational::one();
                basis[i] = s;
                s += 1;
            }
            Relation::Ge => {
                t[i][s] = -Rational::one();
                s += 1;
                t[i][a] = Rational::one();
                basis[i] = a;
                a += 1;
            }
            Relation::Eq => {
                t[i][a] = Rational::one();
                basis[i] = a;
                a += 1;
            }
        }
    }

    // Reduced costs of the phase-one objective (sum of artificials).
    let mut z = vec![Rational::zero(); cols + 1];
    for zj in &mut z[art_start..cols] {
        *zj = Rational::one();
    }
    for i in 0..m {
        if basis[i] >= art_start {
            for j in 0..=cols {
                z[j] = &z[j] - &t[i][j];
            }
        }
    }

    while let Some(enter) = (0..cols).find(|&j| z[j].is_negative()) {
        let mut leave: Option<(usize, Rational)> = None;
        for i in 0..m {
            if t[i][enter].is_positive() {
                let ratio = &t[i][rhs] / &t[i][enter];
                let better = match &leave {
                    None => true,
                    Some((li, lr)) => ratio < *lr || (ratio == *lr && basis[i] < basis[*li]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        // Phase one is bounded below by zero.
        let (p, _) = leave.expect("phase-one objective is bounded");
        let pivot = t[p][enter].clone();
        for v in t[p].iter_mut().filter(|v| !v.is_zero()) {
            *v /= &pivot;
        }
        let pivot_row = t[p].clone();
        let support: Vec<usize> = (0..=cols).filter(|&j| !pivot_row[j].is_zero()).collect();
        for (i, row) in t.iter_mut().chain(std::iter::once(&mut z)).enumerate() {
            if i != p && !row[enter].is_zero() {
                let f = row[enter].clone();
                for &j in &support {
                    row[j] -= &f * &pivot_row[j];
                }
            }
        }
        basis[p] = enter;
    }

    if !z[rhs].is_zero() {
        return None;
    }
    let mut x = vec![Rational::zero(); n_vars];
    for (i, &b) in basis.iter().enumerate() {
        if b < n_vars {
            x[b] = t[i][rhs].clone();
        }
    }
    Some(x)
}

/// Whether `x` satisfies every row exactly.
pub fn satisfies(x: &[Rational], rows: &[Row]) -> bool {
    x.iter().all(|v| !v.is_negative())
        && rows.iter().all(|r| {
            let lhs: Rational = r.coeffs.iter().zip(x).map(|(c, v)| c * v).sum();
            match r.relation {
                Relation::Le => lhs <= r.rhs,
                Relation::Ge => lhs >= r.rhs,
                Relation::Eq => lhs == r.rhs,
            }
        })
}

/// Deletion filter: an irreducible infeasible subset of `rows`, as indices.
/// Returns an empty list when the system is feasible.
pub fn irreducible_infeasible_subset(n_vars: usize, rows: &[Row]) -> Vec<usize> {
    if find_feasible(n_vars, rows).is_some() {
        return Vec::new();
    }
    let mut keep: Vec<usize> = (0..rows.len()).collect();
    let mut k = 0;
    while k < keep.len() {
        let trial: Vec<Row> = keep.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, &r)| rows[r].clone()).collect();
        if find_feasible(n_vars, &trial).is_none() {
            keep.remove(k);
        } else {
            k += 1;
        }
    }
    keep
}
