//! Exact linear programming over the rationals.
//!
//! Two-phase primal simplex; Bland's rule guards against cycling. Every variable is
//! non-negative; the objective is maximized. Each optimal answer is checked
//! against the original constraints before it is returned.

use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

use crate::rational::Rational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LpError {
    #[error("malformed linear program: {0}")]
    Malformed(String),
    #[error("simplex answer failed exact re-check: {0}")]
    SelfCheckFailed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

/// `Σ terms ⋈ rhs` with sparse terms `(variable, coefficient)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub terms: Vec<(usize, Rational)>,
    pub relation: Relation,
    pub rhs: Rational,
}

impl Constraint {
    pub fn new(terms: Vec<(usize, Rational)>, relation: Relation, rhs: Rational) -> Self {
        Constraint { terms, relation, rhs }
    }

    pub fn dense(coefficients: &[Rational], relation: Relation, rhs: Rational) -> Self {
        let terms = coefficients
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| (i, c.clone()))
            .collect();
        Constraint { terms, relation, rhs }
    }

    fn lhs(&self, x: &[Rational]) -> Rational {
        self.terms.iter().map(|(i, c)| c * &x[*i]).sum()
    }

    fn holds(&self, x: &[Rational]) -> bool {
        let lhs = self.lhs(x);
        match self.relation {
            Relation::Le => lhs <= self.rhs,
            Relation::Ge => lhs >= self.rhs,
            Relation::Eq => lhs == self.rhs,
        }
    }
}

/// Maximize `objective · x` subject to the constraints and `x >= 0`.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    num_vars: usize,
    objective: Vec<(usize, Rational)>,
    constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        LinearProgram { num_vars, objective: Vec::new(), constraints: Vec::new() }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn set_objective(&mut self, terms: Vec<(usize, Rational)>) -> Result<(), LpError> {
        self.check_terms(&terms)?;
        self.objective = terms;
        Ok(())
    }

    pub fn add_constraint(&mut self, constraint: Constraint) -> Result<(), LpError> {
        self.check_terms(&constraint.terms)?;
        self.constraints.push(constraint);
        Ok(())
    }

    /// Dense-row convenience; the row length must equal the variable count.
    pub fn add_dense(&mut self, coefficients: &[Rational], relation: Relation, rhs: Rational) -> Result<(), LpError> {
        if coefficients.len() != self.num_vars {
            return Err(LpError::Malformed(format!(
                "row has {} coefficients for {} variables",
                coefficients.len(),
                self.num_vars
            )));
        }
        self.add_constraint(Constraint::dense(coefficients, relation, rhs))
    }

    fn check_terms(&self, terms: &[(usize, Rational)]) -> Result<(), LpError> {
        match terms.iter().find(|(i, _)| *i >= self.num_vars) {
            Some((i, _)) => Err(LpError::Malformed(format!("variable {i} out of range 0..{}", self.num_vars))),
            None => Ok(()),
        }
    }

    pub fn objective_value(&self, x: &[Rational]) -> Rational {
        self.objective.iter().map(|(i, c)| c * &x[*i]).sum()
    }

    /// Exact feasibility of a candidate point.
    pub fn is_feasible(&self, x: &[Rational]) -> bool {
        x.len() == self.num_vars && x.iter().all(|v| !v.is_negative()) && self.constraints.iter().all(|c| c.holds(x))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpOutcome {
    Optimal { value: Rational, assignment: Vec<Rational> },
    Infeasible,
    Unbounded,
}

static SOLVES: AtomicU64 = AtomicU64::new(0);
static OPTIMAL: AtomicU64 = AtomicU64::new(0);
static VERIFIED: AtomicU64 = AtomicU64::new(0);

/// Solver activity since process start.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolveCounters {
    pub solves: u64,
    /// Optimal vertices reached.
    pub optimal: u64,
    /// Optimal vertices that passed the exact re-check against every constraint.
    pub verified: u64,
}

pub fn solve_counters() -> SolveCounters {
    SolveCounters {
        solves: SOLVES.load(Ordering::SeqCst),
        optimal: OPTIMAL.load(Ordering::SeqCst),
        verified: VERIFIED.load(Ordering::SeqCst),
    }
}

/// Degenerate pivots tolerated under largest-coefficient pricing before switching to Bland's rule.
const DEGENERATE_RUN_LIMIT: usize = 32;

struct Tableau {
    rows: Vec<Vec<Rational>>,
    rhs: Vec<Rational>,
    basis: Vec<usize>,
    /// Reduced costs of the current phase objective (maximize).
    cost: Vec<Rational>,
    width: usize,
    pivots: usize,
}

enum Step {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn pivot(&mut self, l: usize, e: usize) {
        let piv = self.rows[l][e].clone();
        if !piv.is_one() {
            let inv = piv.recip();
            for v in self.rows[l].iter_mut().filter(|v| !v.is_zero()) {
                *v = &*v * &inv;
            }
            self.rhs[l] = &self.rhs[l] * &inv;
        }
        let support: Vec<usize> = (0..self.width).filter(|&j| !self.rows[l][j].is_zero()).collect();
        let pivot_row: Vec<(usize, Rational)> = support.iter().map(|&j| (j, self.rows[l][j].clone())).collect();
        let pivot_rhs = self.rhs[l].clone();
        for i in 0..self.rows.len() {
            if i == l || self.rows[i][e].is_zero() {
                continue;
            }
            let factor = self.rows[i][e].clone();
            for (j, v) in &pivot_row {
                self.rows[i][*j] -= &factor * v;
            }
            if !pivot_rhs.is_zero() {
                self.rhs[i] -= &factor * &pivot_rhs;
            }
        }
        if !self.cost[e].is_zero() {
            let factor = self.cost[e].clone();
            for (j, v) in &pivot_row {
                self.cost[*j] -= &factor * v;
            }
        }
        self.basis[l] = e;
        self.pivots += 1;
    }

    /// Largest reduced cost enters; after a run of degenerate pivots, Bland's rule
    /// (lowest-index improving column) takes over until the objective moves again,
    /// which rules out cycling. Ties for the leaving row go to the lowest basic index.
    fn run(&mut self, allowed: &dyn Fn(usize) -> bool) -> Step {
        let mut degenerate_run = 0usize;
        loop {
            let bland = degenerate_run >= DEGENERATE_RUN_LIMIT;
            let mut entering: Option<usize> = None;
            for j in (0..self.width).filter(|&j| allowed(j) && self.cost[j].is_positive()) {
                if bland {
                    entering = Some(j);
                    break;
                }
                if entering.map_or(true, |e| self.cost[j] > self.cost[e]) {
                    entering = Some(j);
                }
            }
            let Some(e) = entering else {
                return Step::Optimal;
            };
            let mut best: Option<(usize, Rational)> = None;
            for i in 0..self.rows.len() {
                let a = &self.rows[i][e];
                if !a.is_positive() {
                    continue;
                }
                let ratio = &self.rhs[i] / a;
                let better = match &best {
                    None => true,
                    Some((bi, br)) => ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi]),
                };
                if better {
                    best = Some((i, ratio));
                }
            }
            match best {
                None => return Step::Unbounded,
                Some((l, ratio)) => {
                    log::trace!("pivot {}: row {l}, column {e}", self.pivots);
                    if ratio.is_zero() {
                        degenerate_run += 1;
                    } else {
                        degenerate_run = 0;
                    }
                    self.pivot(l, e);
                }
            }
        }
    }

    fn set_cost(&mut self, c: &[Rational]) {
        let mut cost = c.to_vec();
        for (i, &b) in self.basis.iter().enumerate() {
            if c[b].is_zero() {
                continue;
            }
            for j in 0..self.width {
                if !self.rows[i][j].is_zero() {
                    cost[j] -= &c[b] * &self.rows[i][j];
                }
            }
        }
        self.cost = cost;
    }
}

/// Solves `lp` exactly.
pub fn solve(lp: &LinearProgram) -> Result<LpOutcome, LpError> {
    SOLVES.fetch_add(1, Ordering::SeqCst);
    let n = lp.num_vars;
    let m = lp.constraints.len();

    // Normalize to non-negative right-hand sides.
    let mut normalized: Vec<(Vec<(usize, Rational)>, Relation, Rational)> = Vec::with_capacity(m);
    for c in &lp.constraints {
        if c.rhs.is_negative() {
            let rel = match c.relation {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
            normalized.push((c.terms.iter().map(|(i, v)| (*i, -v)).collect(), rel, -&c.rhs));
        } else {
            normalized.push((c.terms.clone(), c.relation, c.rhs.clone()));
        }
    }
    let num_slack = normalized.iter().filter(|(_, r, _)| *r != Relation::Eq).count();
    let num_art = normalized.iter().filter(|(_, r, _)| *r != Relation::Le).count();
    let width = n + num_slack + num_art;
    let art_start = n + num_slack;

    let mut rows = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let (mut next_slack, mut next_art) = (n, art_start);
    for (terms, rel, b) in normalized {
        let mut row = vec![Rational::zero(); width];
        for (i, v) in terms {
            row[i] += v;
        }
        match rel {
            Relation::Le => {
                row[next_slack] = Rational::one();
                basis.push(next_slack);
                next_slack += 1;
            }
            Relation::Ge => {
                row[next_slack] = -Rational::one();
                next_slack += 1;
                row[next_art] = Rational::one();
                basis.push(next_art);
                next_art += 1;
            }
            Relation::Eq => {
                row[next_art] = Rational::one();
                basis.push(next_art);
                next_art += 1;
            }
        }
        rows.push(row);
        rhs.push(b);
    }
    let mut t = Tableau { rows, rhs, basis, cost: Vec::new(), width, pivots: 0 };

    if num_art > 0 {
        let phase1: Vec<Rational> =
            (0..width).map(|j| if j >= art_start { -Rational::one() } else { Rational::zero() }).collect();
        t.set_cost(&phase1);
        t.run(&|_| true);
        log::debug!("phase one done after {} pivots", t.pivots);
        let infeasible = t.basis.iter().zip(&t.rhs).any(|(&b, v)| b >= art_start && v.is_positive());
        if infeasible {
            log::debug!("lp infeasible after {} pivots", t.pivots);
            return Ok(LpOutcome::Infeasible);
        }
        // Drive zero-level artificials out of the basis; drop redundant rows.
        let mut i = 0;
        while i < t.rows.len() {
            if t.basis[i] >= art_start {
                match (0..art_start).find(|&j| !t.rows[i][j].is_zero()) {
                    Some(j) => {
                        t.pivot(i, j);
                        i += 1;
                    }
                    None => {
                        t.rows.remove(i);
                        t.rhs.remove(i);
                        t.basis.remove(i);
                    }
                }
            } else {
                i += 1;
            }
        }
    }

    let mut phase2 = vec![Rational::zero(); width];
    for (i, v) in &lp.objective {
        phase2[*i] += v;
    }
    t.set_cost(&phase2);
    match t.run(&|j| j < art_start) {
        Step::Unbounded => {
            log::debug!("lp unbounded after {} pivots", t.pivots);
            Ok(LpOutcome::Unbounded)
        }
        Step::Optimal => {
            OPTIMAL.fetch_add(1, Ordering::SeqCst);
            let mut x = vec![Rational::zero(); n];
            for (i, &b) in t.basis.iter().enumerate() {
                if b < n {
                    x[b] = t.rhs[i].clone();
                }
            }
            if !lp.is_feasible(&x) {
                return Err(LpError::SelfCheckFailed("optimal vertex violates a constraint".into()));
            }
            let value = lp.objective_value(&x);
            log::debug!("lp optimal value {value} after {} pivots", t.pivots);
            VERIFIED.fetch_add(1, Ordering::SeqCst);
            Ok(LpOutcome::Optimal { value, assignment: x })
        }
    }
}
