//! Dense two-phase simplex with Bland's anti-cycling rule.
//!
//! Every variable is implicitly nonnegative. The solver is generic over
//! [`Scalar`], so the same code runs in `f64` for allocation queries and in
//! exact rationals for the two-buyer polyhedra.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAX_PIVOTS: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint<T> {
    pub coeffs: Vec<T>,
    pub relation: Relation,
    pub rhs: T,
}

/// Optimizes `objective · x` subject to the constraints and `x >= 0`.
#[derive(Debug, Clone)]
pub struct LinearProgram<T> {
    num_vars: usize,
    /// Always in maximization form.
    objective: Vec<T>,
    minimizing: bool,
    constraints: Vec<Constraint<T>>,
}

#[derive(Debug, Clone)]
pub struct LpSolution<T> {
    pub x: Vec<T>,
    pub objective: T,
}

#[derive(Debug, Clone)]
pub enum LpStatus<T> {
    Optimal(LpSolution<T>),
    Infeasible,
    Unbounded,
}

impl<T> LpStatus<T> {
    pub fn optimal(self) -> Option<LpSolution<T>> {
        match self {
            LpStatus::Optimal(s) => Some(s),
            _ => None,
        }
    }
}

impl<T: Scalar> LinearProgram<T> {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            objective: vec![T::zero(); num_vars],
            minimizing: false,
            constraints: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn constraints(&self) -> &[Constraint<T>] {
        &self.constraints
    }

    /// Coefficients in maximization form.
    pub fn objective(&self) -> &[T] {
        &self.objective
    }

    pub fn maximize(&mut self, objective: Vec<T>) -> &mut Self {
        assert_eq!(objective.len(), self.num_vars);
        self.objective = objective;
        self.minimizing = false;
        self
    }

    pub fn minimize(&mut self, objective: Vec<T>) -> &mut Self {
        self.maximize(objective.into_iter().map(|c| -c).collect());
        self.minimizing = true;
        self
    }

    pub fn add(&mut self, coeffs: Vec<T>, relation: Relation, rhs: T) -> &mut Self {
        assert_eq!(coeffs.len(), self.num_vars);
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
        self
    }

    /// Adds `x[var] relation rhs`.
    pub fn add_bound(&mut self, var: usize, relation: Relation, rhs: T) -> &mut Self {
        let mut coeffs = vec![T::zero(); self.num_vars];
        coeffs[var] = T::one();
        self.add(coeffs, relation, rhs)
    }

    /// `tol` is the pivot/reduced-cost threshold for inexact scalars; the
    /// phase-one feasibility threshold is `100 * tol`.
    pub fn solve(&self, tol: f64) -> Result<LpStatus<T>> {
        Tableau::build(self).run(self, tol)
    }
}

struct Tableau<T> {
    rows: Vec<Vec<T>>,
    rhs: Vec<T>,
    basis: Vec<usize>,
    num_cols: usize,
    first_artificial: usize,
}

impl<T: Scalar> Tableau<T> {
    fn build(lp: &LinearProgram<T>) -> Self {
        let n = lp.num_vars;
        let mut normalized: Vec<(Vec<T>, Relation, T)> = lp
            .constraints
            .iter()
            .map(|c| {
                if c.rhs < T::zero() {
                    let rel = match c.relation {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (
                        c.coeffs.iter().map(|v| -v.clone()).collect(),
                        rel,
                        -c.rhs.clone(),
                    )
                } else {
                    (c.coeffs.clone(), c.relation, c.rhs.clone())
                }
            })
            .collect();

        let slack_count = normalized
            .iter()
            .filter(|(_, r, _)| *r != Relation::Eq)
            .count();
        let art_count = normalized
            .iter()
            .filter(|(_, r, _)| *r != Relation::Le)
            .count();
        let first_artificial = n + slack_count;
        let num_cols = first_artificial + art_count;

        let mut rows = Vec::with_capacity(normalized.len());
        let mut rhs = Vec::with_capacity(normalized.len());
        let mut basis = Vec::with_capacity(normalized.len());
        let mut next_slack = n;
        let mut next_art = first_artificial;
        for (coeffs, rel, b) in normalized.drain(..) {
            let mut row = coeffs;
            row.resize(num_cols, T::zero());
            match rel {
                Relation::Le => {
                    row[next_slack] = T::one();
                    basis.push(next_slack);
                    next_slack += 1;
                }
                Relation::Ge => {
                    row[next_slack] = -T::one();
                    next_slack += 1;
                    row[next_art] = T::one();
                    basis.push(next_art);
                    next_art += 1;
                }
                Relation::Eq => {
                    row[next_art] = T::one();
                    basis.push(next_art);
                    next_art += 1;
                }
            }
            rows.push(row);
            rhs.push(b);
        }
        Self {
            rows,
            rhs,
            basis,
            num_cols,
            first_artificial,
        }
    }

    fn reduced_costs(&self, cost: &[T]) -> (Vec<T>, T) {
        let mut d = cost.to_vec();
        let mut value = T::zero();
        for (r, row) in self.rows.iter().enumerate() {
            let cb = cost[self.basis[r]].clone();
            if cb.is_zero_tol(0.0) {
                continue;
            }
            for (dj, a) in d.iter_mut().zip(row) {
                *dj = dj.clone() - cb.clone() * a.clone();
            }
            value = value + cb * self.rhs[r].clone();
        }
        (d, value)
    }

    fn pivot(&mut self, r: usize, col: usize, d: &mut [T], value: &mut T) {
        let piv = self.rows[r][col].clone();
        for a in self.rows[r].iter_mut() {
            *a = a.clone() / piv.clone();
        }
        self.rhs[r] = self.rhs[r].clone() / piv;
        let pivot_row = self.rows[r].clone();
        let pivot_rhs = self.rhs[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[col].clone();
            if f.is_zero_tol(0.0) {
                continue;
            }
            for (a, p) in row.iter_mut().zip(&pivot_row) {
                *a = a.clone() - f.clone() * p.clone();
            }
            self.rhs[i] = self.rhs[i].clone() - f * pivot_rhs.clone();
        }
        let f = d[col].clone();
        if !f.is_zero_tol(0.0) {
            for (dj, p) in d.iter_mut().zip(&pivot_row) {
                *dj = dj.clone() - f.clone() * p.clone();
            }
            *value = value.clone() + f * pivot_rhs;
        }
        self.basis[r] = col;
    }

    /// Runs simplex iterations on the given cost vector. Columns at or beyond
    /// `col_limit` never enter. Returns false when unbounded.
    fn optimize(&mut self, cost: &[T], col_limit: usize, tol: f64, pivots: &mut usize) -> Result<bool> {
        let (mut d, mut value) = self.reduced_costs(cost);
        loop {
            let entering = (0..col_limit).find(|&j| d[j].is_pos_tol(tol));
            let Some(col) = entering else {
                return Ok(true);
            };
            let mut leave: Option<(usize, T)> = None;
            for r in 0..self.rows.len() {
                let a = &self.rows[r][col];
                if !a.is_pos_tol(tol) {
                    continue;
                }
                let ratio = self.rhs[r].clone() / a.clone();
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((lr, lratio)) => match ratio.cmp_tol(&lratio, tol) {
                        std::cmp::Ordering::Less => Some((r, ratio)),
                        std::cmp::Ordering::Equal if self.basis[r] < self.basis[lr] => {
                            Some((r, ratio))
                        }
                        _ => Some((lr, lratio)),
                    },
                };
            }
            let Some((r, _)) = leave else {
                return Ok(false);
            };
            *pivots += 1;
            if *pivots > MAX_PIVOTS {
                return Err(Error::PivotLimit(MAX_PIVOTS));
            }
            self.pivot(r, col, &mut d, &mut value);
            // keep tiny negative round-off out of the rhs
            if !T::EXACT {
                for b in self.rhs.iter_mut() {
                    if b.is_neg_tol(0.0) && b.is_zero_tol(tol) {
                        *b = T::zero();
                    }
                }
            }
        }
    }

    fn run(mut self, lp: &LinearProgram<T>, tol: f64) -> Result<LpStatus<T>> {
        let mut pivots = 0;
        if self.first_artificial < self.num_cols {
            let mut cost = vec![T::zero(); self.num_cols];
            for c in cost.iter_mut().skip(self.first_artificial) {
                *c = -T::one();
            }
            self.optimize(&cost, self.num_cols, tol, &mut pivots)?;
            let (_, value) = self.reduced_costs(&cost);
            if value.is_neg_tol(tol * 100.0) {
                return Ok(LpStatus::Infeasible);
            }
            // drive remaining artificials out of the basis
            let mut r = 0;
            while r < self.rows.len() {
                if self.basis[r] >= self.first_artificial {
                    let col = (0..self.first_artificial)
                        .find(|&j| !self.rows[r][j].is_zero_tol(tol));
                    match col {
                        Some(col) => {
                            let mut d = vec![T::zero(); self.num_cols];
                            let mut v = T::zero();
                            self.pivot(r, col, &mut d, &mut v);
                        }
                        None => {
                            self.rows.remove(r);
                            self.rhs.remove(r);
                            self.basis.remove(r);
                            continue;
                        }
                    }
                }
                r += 1;
            }
        }
        let mut cost = vec![T::zero(); self.num_cols];
        cost[..lp.num_vars].clone_from_slice(&lp.objective);
        if !self.optimize(&cost, self.first_artificial, tol, &mut pivots)? {
            return Ok(LpStatus::Unbounded);
        }
        let mut x = vec![T::zero(); lp.num_vars];
        for (r, &b) in self.basis.iter().enumerate() {
            if b < lp.num_vars {
                x[b] = self.rhs[r].clone();
            }
        }
        let objective = T::sum(
            &x.iter()
                .zip(&lp.objective)
                .map(|(a, c)| a.clone() * c.clone())
                .collect::<Vec<_>>(),
        );
        let objective = if lp.minimizing { -objective } else { objective };
        Ok(LpStatus::Optimal(LpSolution { x, objective }))
    }
}
