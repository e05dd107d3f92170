//! Dense two-phase tableau simplex, generic over the scalar field.
//!
//! With `f64` the solver uses tolerances; with [`BigRational`] all tolerances are
//! zero and the result is exact for the given data.

use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};
use std::fmt::Debug;

pub trait Scalar: Clone + PartialOrd + Num + Signed + FromPrimitive + ToPrimitive + Debug {}
impl<T: Clone + PartialOrd + Num + Signed + FromPrimitive + ToPrimitive + Debug> Scalar for T {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

impl Relation {
    fn flipped(self) -> Self {
        match self {
            Relation::Le => Relation::Ge,
            Relation::Ge => Relation::Le,
            Relation::Eq => Relation::Eq,
        }
    }
}

/// `minimize cᵀx` subject to `rows · x (rel) rhs`, `x ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram<T> {
    pub objective: Vec<T>,
    pub rows: Vec<Vec<T>>,
    pub relations: Vec<Relation>,
    pub rhs: Vec<T>,
}

impl<T: Scalar> LinearProgram<T> {
    pub fn new(objective: Vec<T>) -> Self {
        Self {
            objective,
            rows: Vec::new(),
            relations: Vec::new(),
            rhs: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<T>, rel: Relation, rhs: T) {
        assert_eq!(row.len(), self.objective.len(), "row length mismatch");
        self.rows.push(row);
        self.relations.push(rel);
        self.rhs.push(rhs);
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }
}

impl LinearProgram<f64> {
    /// Exact rational copy of the floating-point data.
    pub fn to_rational(&self) -> LinearProgram<BigRational> {
        let cv = |x: &f64| BigRational::from_float(*x).expect("finite LP data");
        LinearProgram {
            objective: self.objective.iter().map(cv).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(cv).collect())
                .collect(),
            relations: self.relations.clone(),
            rhs: self.rhs.iter().map(cv).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimplexOptions {
    /// Reduced-cost optimality tolerance.
    pub opt_tol: f64,
    /// Smallest admissible pivot magnitude.
    pub piv_tol: f64,
    /// Phase-1 infeasibility tolerance.
    pub feas_tol: f64,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub stall_limit: usize,
    /// Hard cap on pivots per phase; exceeding it reports a degenerate LP.
    pub max_pivots: Option<usize>,
    /// Rebuild the tableau from the original data every this many pivots.
    pub refactor_every: Option<usize>,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            opt_tol: 1e-11,
            piv_tol: 1e-10,
            feas_tol: 1e-9,
            stall_limit: 50,
            max_pivots: None,
            refactor_every: Some(200),
        }
    }
}

impl SimplexOptions {
    /// Zero tolerances, for exact arithmetic.
    pub fn exact() -> Self {
        Self {
            opt_tol: 0.0,
            piv_tol: 0.0,
            feas_tol: 0.0,
            stall_limit: 0,
            max_pivots: None,
            refactor_every: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution<T> {
    pub x: Vec<T>,
    pub objective: T,
    /// One multiplier per original row, with `c − Aᵀy ≥ 0` on the variables.
    pub duals: Vec<T>,
    /// Basic standard-form columns, one per row.
    pub basis: Vec<usize>,
    pub pivots: usize,
}

struct StandardForm<T> {
    a: Vec<Vec<T>>, // rows with rhs appended
    cost: Vec<T>,
    artificial: Vec<bool>,
    identity_col: Vec<usize>,
    sign_flipped: Vec<bool>,
    n_orig: usize,
}

impl<T: Scalar> StandardForm<T> {
    fn build(lp: &LinearProgram<T>) -> Self {
        let m = lp.num_rows();
        let n = lp.num_vars();
        let mut rels = Vec::with_capacity(m);
        let mut sign_flipped = Vec::with_capacity(m);
        for i in 0..m {
            let neg = lp.rhs[i] < T::zero();
            sign_flipped.push(neg);
            rels.push(if neg {
                lp.relations[i].flipped()
            } else {
                lp.relations[i]
            });
        }
        let n_slack = rels.iter().filter(|r| **r != Relation::Eq).count();
        let n_art = rels.iter().filter(|r| **r != Relation::Le).count();
        let ncols = n + n_slack + n_art;
        let mut a = vec![vec![T::zero(); ncols + 1]; m];
        let mut artificial = vec![false; ncols];
        let mut identity_col = vec![0; m];
        let mut next_slack = n;
        let mut next_art = n + n_slack;
        for i in 0..m {
            for j in 0..n {
                a[i][j] = if sign_flipped[i] {
                    -lp.rows[i][j].clone()
                } else {
                    lp.rows[i][j].clone()
                };
            }
            a[i][ncols] = lp.rhs[i].abs();
            match rels[i] {
                Relation::Le => {
                    a[i][next_slack] = T::one();
                    identity_col[i] = next_slack;
                    next_slack += 1;
                }
                Relation::Ge => {
                    a[i][next_slack] = -T::one();
                    next_slack += 1;
                    a[i][next_art] = T::one();
                    artificial[next_art] = true;
                    identity_col[i] = next_art;
                    next_art += 1;
                }
                Relation::Eq => {
                    a[i][next_art] = T::one();
                    artificial[next_art] = true;
                    identity_col[i] = next_art;
                    next_art += 1;
                }
            }
        }
        let mut cost = vec![T::zero(); ncols];
        cost[..n].clone_from_slice(&lp.objective);
        Self {
            a,
            cost,
            artificial,
            identity_col,
            sign_flipped,
            n_orig: n,
        }
    }

    fn ncols(&self) -> usize {
        self.cost.len()
    }
}

struct Tableau<'a, T> {
    sf: &'a StandardForm<T>,
    t: Vec<Vec<T>>,
    obj: Vec<T>,
    basis: Vec<usize>,
    barred: Vec<bool>,
    opts: SimplexOptions,
    opt_tol: T,
    piv_tol: T,
    pivots: usize,
}

impl<'a, T: Scalar> Tableau<'a, T> {
    fn new(sf: &'a StandardForm<T>, opts: SimplexOptions) -> Self {
        let conv = |x: f64| T::from_f64(x).unwrap_or_else(T::zero);
        Self {
            t: sf.a.clone(),
            obj: vec![T::zero(); sf.ncols() + 1],
            basis: sf.identity_col.clone(),
            barred: vec![false; sf.ncols()],
            opt_tol: conv(opts.opt_tol),
            piv_tol: conv(opts.piv_tol),
            opts,
            sf,
            pivots: 0,
        }
    }

    fn nrows(&self) -> usize {
        self.t.len()
    }

    fn set_costs(&mut self, cost: &[T]) {
        let nc = self.sf.ncols();
        let mut obj: Vec<T> = cost.to_vec();
        obj.push(T::zero());
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = cost[b].clone();
            if cb.is_zero() {
                continue;
            }
            for j in 0..=nc {
                let v = cb.clone() * self.t[i][j].clone();
                obj[j] = obj[j].clone() - v;
            }
        }
        self.obj = obj;
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let nc = self.sf.ncols();
        let p = self.t[r][c].clone();
        for j in 0..=nc {
            if !self.t[r][j].is_zero() {
                self.t[r][j] = self.t[r][j].clone() / p.clone();
            }
        }
        let prow = self.t[r].clone();
        let nz: Vec<usize> = (0..=nc).filter(|&j| !prow[j].is_zero()).collect();
        for i in 0..self.nrows() {
            if i == r || self.t[i][c].is_zero() {
                continue;
            }
            let f = self.t[i][c].clone();
            let row = &mut self.t[i];
            for &j in &nz {
                row[j] = row[j].clone() - f.clone() * prow[j].clone();
            }
            row[c] = T::zero();
        }
        if !self.obj[c].is_zero() {
            let f = self.obj[c].clone();
            for &j in &nz {
                self.obj[j] = self.obj[j].clone() - f.clone() * prow[j].clone();
            }
            self.obj[c] = T::zero();
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Gauss–Jordan rebuild of `B^{-1}[A | b]` for the current basis set.
    fn rebuild(&mut self, cost: &[T]) -> bool {
        let nc = self.sf.ncols();
        let m = self.nrows();
        let mut t = self.sf.a.clone();
        let cols = self.basis.clone();
        let mut assigned = vec![false; m];
        let mut new_basis = vec![usize::MAX; m];
        for &c in &cols {
            let mut best: Option<(usize, T)> = None;
            for (i, row) in t.iter().enumerate() {
                if assigned[i] {
                    continue;
                }
                let v = row[c].abs();
                if best.as_ref().map_or(true, |(_, b)| v > *b) {
                    best = Some((i, v));
                }
            }
            let Some((r, v)) = best else { return false };
            if v.is_zero() || v <= self.piv_tol {
                return false;
            }
            let p = t[r][c].clone();
            for j in 0..=nc {
                t[r][j] = t[r][j].clone() / p.clone();
            }
            let prow = t[r].clone();
            for (i, row) in t.iter_mut().enumerate() {
                if i == r || row[c].is_zero() {
                    continue;
                }
                let f = row[c].clone();
                for j in 0..=nc {
                    if !prow[j].is_zero() {
                        row[j] = row[j].clone() - f.clone() * prow[j].clone();
                    }
                }
            }
            assigned[r] = true;
            new_basis[r] = c;
        }
        self.t = t;
        self.basis = new_basis;
        self.set_costs(cost);
        true
    }

    fn entering(&self, bland: bool) -> Option<usize> {
        let neg_tol = -self.opt_tol.clone();
        let mut best: Option<usize> = None;
        for j in 0..self.sf.ncols() {
            if self.barred[j] || self.obj[j] >= neg_tol || self.obj[j].is_zero() {
                continue;
            }
            if bland {
                return Some(j);
            }
            match best {
                Some(b) if self.obj[j] >= self.obj[b] => {}
                _ => best = Some(j),
            }
        }
        best
    }

    fn leaving(&self, c: usize, bland: bool) -> Option<usize> {
        let nc = self.sf.ncols();
        let mut best: Option<(usize, T)> = None;
        for i in 0..self.nrows() {
            let a = &self.t[i][c];
            if *a <= self.piv_tol || a.is_zero() {
                continue;
            }
            let ratio = self.t[i][nc].clone() / a.clone();
            let take = match &best {
                None => true,
                Some((b, rb)) => {
                    if ratio < *rb {
                        true
                    } else if ratio == *rb {
                        if bland {
                            self.basis[i] < self.basis[*b]
                        } else {
                            a.abs() > self.t[*b][c].abs()
                        }
                    } else {
                        false
                    }
                }
            };
            if take {
                best = Some((i, ratio));
            }
        }
        best.map(|(i, _)| i)
    }

    fn optimize(&mut self, cost: &[T]) -> Result<()> {
        let nc = self.sf.ncols();
        let m = self.nrows();
        let cap = self.opts.max_pivots.unwrap_or(50 * (m + nc) + 1000);
        let mut bland = self.opts.stall_limit == 0;
        let mut stall = 0usize;
        let mut since_refactor = 0usize;
        let mut count = 0usize;
        loop {
            let Some(c) = self.entering(bland) else {
                if self.opts.refactor_every.is_some() && since_refactor > 0 {
                    // confirm optimality on a freshly rebuilt tableau
                    since_refactor = 0;
                    if self.rebuild(cost) {
                        continue;
                    }
                }
                return Ok(());
            };
            let Some(r) = self.leaving(c, bland) else {
                return Err(Error::Unbounded);
            };
            let degenerate = self.t[r][nc].is_zero() || self.t[r][nc] <= self.piv_tol;
            self.pivot(r, c);
            count += 1;
            since_refactor += 1;
            if degenerate {
                stall += 1;
                if stall > self.opts.stall_limit {
                    bland = true;
                }
            } else {
                stall = 0;
            }
            if let Some(k) = self.opts.refactor_every {
                if since_refactor >= k {
                    let saved = (self.t.clone(), self.basis.clone(), self.obj.clone());
                    if !self.rebuild(cost) {
                        (self.t, self.basis, self.obj) = saved;
                    }
                    since_refactor = 0;
                }
            }
            if count > cap {
                return Err(Error::DegenerateLp);
            }
        }
    }

    fn rhs_feasible(&self) -> bool {
        let nc = self.sf.ncols();
        let neg = -T::from_f64(self.opts.feas_tol).unwrap_or_else(T::zero);
        self.t.iter().all(|row| row[nc] >= neg)
    }

    fn drive_out_artificials(&mut self) {
        let nc = self.sf.ncols();
        for r in 0..self.nrows() {
            if !self.sf.artificial[self.basis[r]] {
                continue;
            }
            let mut best: Option<(usize, T)> = None;
            for j in 0..nc {
                if self.sf.artificial[j] {
                    continue;
                }
                let v = self.t[r][j].abs();
                if v > self.piv_tol && !v.is_zero() && best.as_ref().map_or(true, |(_, b)| v > *b) {
                    best = Some((j, v));
                }
            }
            if let Some((j, _)) = best {
                self.pivot(r, j);
            }
        }
    }

    fn phase_one(&mut self) -> Result<()> {
        let phase1: Vec<T> = self
            .sf
            .artificial
            .iter()
            .map(|&a| if a { T::one() } else { T::zero() })
            .collect();
        self.set_costs(&phase1);
        self.optimize(&phase1)?;
        let nc = self.sf.ncols();
        let infeas = -self.obj[nc].clone();
        let tol = T::from_f64(self.opts.feas_tol).unwrap_or_else(T::zero);
        let scale = self
            .sf
            .a
            .iter()
            .fold(T::one(), |s, r| if r[nc] > s { r[nc].clone() } else { s });
        if infeas > tol * scale {
            return Err(Error::Infeasible);
        }
        Ok(())
    }

    fn phase_two(&mut self) -> Result<()> {
        self.drive_out_artificials();
        self.barred = self.sf.artificial.clone();
        let cost = self.sf.cost.clone();
        self.set_costs(&cost);
        self.optimize(&cost)
    }

    fn solution(&self) -> LpSolution<T> {
        let nc = self.sf.ncols();
        let mut x = vec![T::zero(); self.sf.n_orig];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < self.sf.n_orig {
                x[b] = self.t[i][nc].clone();
            }
        }
        let duals = (0..self.nrows())
            .map(|i| {
                let y = -self.obj[self.sf.identity_col[i]].clone();
                if self.sf.sign_flipped[i] {
                    -y
                } else {
                    y
                }
            })
            .collect();
        LpSolution {
            x,
            objective: -self.obj[nc].clone(),
            duals,
            basis: self.basis.clone(),
            pivots: self.pivots,
        }
    }
}

/// Solves `lp` from scratch.
pub fn solve<T: Scalar>(lp: &LinearProgram<T>, opts: &SimplexOptions) -> Result<LpSolution<T>> {
    let sf = StandardForm::build(lp);
    let mut tab = Tableau::new(&sf, opts.clone());
    tab.phase_one()?;
    tab.phase_two()?;
    Ok(tab.solution())
}

/// Solves `lp` starting from a given basis; falls back to a cold start when the
/// basis is singular or primal infeasible.
pub fn solve_from_basis<T: Scalar>(
    lp: &LinearProgram<T>,
    basis: &[usize],
    opts: &SimplexOptions,
) -> Result<LpSolution<T>> {
    let sf = StandardForm::build(lp);
    let mut tab = Tableau::new(&sf, opts.clone());
    let valid = basis.len() == tab.nrows()
        && basis.iter().all(|&b| b < sf.ncols())
        && {
            tab.basis = basis.to_vec();
            let zeros = vec![T::zero(); sf.ncols()];
            tab.rebuild(&zeros)
        }
        && tab.rhs_feasible()
        && {
            let nc = sf.ncols();
            tab.basis
                .iter()
                .enumerate()
                .all(|(i, &b)| !sf.artificial[b] || tab.t[i][nc].is_zero())
        };
    if !valid {
        return solve(lp, opts);
    }
    tab.phase_two()?;
    Ok(tab.solution())
}

/// Solves the floating-point LP exactly in rational arithmetic, warm-started
/// from a basis found in floating point.
pub fn solve_exact(
    lp: &LinearProgram<f64>,
    basis: Option<&[usize]>,
) -> Result<LpSolution<BigRational>> {
    let q = lp.to_rational();
    let opts = SimplexOptions::exact();
    match basis {
        Some(b) => solve_from_basis(&q, b, &opts),
        None => solve(&q, &opts),
    }
}

pub fn rational_to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or_else(|| {
        // very large numerators: scale down before converting
        let n: &BigInt = x.numer();
        let d: &BigInt = x.denom();
        let shift = (n.bits().max(d.bits()) as i64 - 1000).max(0) as usize;
        (n >> shift).to_f64().unwrap_or(f64::NAN) / (d >> shift).to_f64().unwrap_or(f64::NAN)
    })
}
